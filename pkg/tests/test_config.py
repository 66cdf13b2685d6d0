"""
Testing `config.py` (solver parameter models).

Tests include:
- Defaults (alpha = 1/nu, SV grad-div AH, l2 stopping norm).
- Validation of signs, method specific parameters and unknown keys.
- Immutability.
- Parameter diagnostics.
"""
import pytest
from pydantic import ValidationError

from ahflow.config import Method, NsConfig, StoppingNorm
from ahflow.fem import ElementPair


def test_defaults():
    config = NsConfig(nu=0.001, gamma=1.0)
    assert config.alpha == pytest.approx(1000.0)
    assert config.reynolds == pytest.approx(1000.0)
    assert config.method is Method.GRAD_DIV_AH
    assert config.element is ElementPair.SCOTT_VOGELIUS
    assert config.stopping_norm is StoppingNorm.L2
    assert config.tol == 1e-6


def test_string_values_are_parsed():
    config = NsConfig(nu=0.01, method="Picard", element="TH", stopping_norm="h")
    assert config.method is Method.PICARD
    assert config.element is ElementPair.TAYLOR_HOOD
    assert config.stopping_norm is StoppingNorm.H


@pytest.mark.parametrize("kwargs", [
    {"nu": 0.0, "method": "AH"},
    {"nu": 0.01, "rho": -1.0, "method": "AH"},
    {"nu": 0.01, "alpha": 0.0, "method": "AH"},
    {"nu": 0.01, "gamma": -1.0, "method": "AH"},
    {"nu": 0.01, "tol": 0.0, "method": "AH"},
    {"nu": 0.01, "max_iters": -1, "method": "AH"},
    {"nu": 0.01, "method": "IPP"},
    {"nu": 0.01, "method": "IPP", "epsilon": 0.0},
    {"nu": 0.01, "method": "GradDivAH"},
    {"nu": 0.01, "method": "Newton"},
    {"nu": 0.01, "method": "AH", "window": 5},
])
def test_invalid_configs(kwargs):
    with pytest.raises(ValidationError):
        NsConfig(**kwargs)


def test_config_is_immutable():
    config = NsConfig(nu=0.01, method=Method.AH)
    with pytest.raises(TypeError):
        config.rho = 2.0


def test_diagnostics():
    assert NsConfig(nu=0.01, rho=5.0, alpha=100.0, gamma=1.0).diagnostics() == []
    messages = NsConfig(nu=0.01, rho=200.0, alpha=100.0, gamma=1.0).diagnostics()
    assert len(messages) == 3
    assert any(message.startswith("gamma=1") for message in messages)
    assert any(message.startswith("rho=200") for message in messages)
    assert any(message.startswith("alpha=100") for message in messages)
    assert NsConfig(nu=0.01, method="Picard").diagnostics() == []


if __name__ == "__main__":
    pytest.main([__file__])
