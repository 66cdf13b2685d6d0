"""
Run and sweep specifications, and their YAML loader.

A config file is a flat YAML mapping of RunSpec fields. An optional `sweep:`
mapping turns it into a SweepSpec whose lists span a cartesian product:

    problem: cavity
    re: 100
    element: SV
    gamma: 1
    sweep:
      rho: [5, 20, 50]
      m: [0, 1, 5, 10]
"""
import itertools
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Union

import yaml
from loguru import logger
from pydantic import BaseModel, ValidationError, root_validator, validator

from ahflow.config import (AndersonConfig, InnerProduct, Method, NsConfig,
                           StoppingNorm)
from ahflow.exceptions import ConfigurationError
from ahflow.fem import ElementPair
from ahflow.harness.problems import Problem

PRESET_DIR = Path(__file__).parent / "presets"
PRESETS = tuple(f"fig{i}" for i in range(1, 10))

SWEEP_KEYS = ("re", "element", "gamma", "rho", "alpha", "m")


class RunSpec(BaseModel):
    problem: Problem = Problem.CAVITY
    re: float = 100.0
    h: float = 1.0 / 32.0
    outflow_h: Optional[float] = None
    fine_length: Optional[float] = None
    element: ElementPair = ElementPair.SCOTT_VOGELIUS
    method: Method = Method.GRAD_DIV_AH
    rho: float = 1.0
    alpha: Optional[float] = None
    gamma: float = 1.0
    epsilon: Optional[float] = None
    tol: float = 1e-6
    max_iters: int = 1000
    stopping_norm: StoppingNorm = StoppingNorm.L2
    divergence_threshold: float = 1e8
    depth: Optional[int] = None
    beta: Union[float, List[float]] = 1.0
    inner_product: InnerProduct = InnerProduct.H
    forcing_scale: float = 1.0
    out: Path = Path("results")
    run_id: Optional[str] = None
    export_vtk: bool = True

    class Config:
        extra = "forbid"

    @validator("re")
    def _positive_re(cls, value):
        if not value > 0:
            raise ValueError(f"re must be > 0, got {value}")
        return value

    @root_validator(skip_on_failure=True)
    def _resolution(cls, values):
        h = values["h"]
        if not h > 0:
            raise ValueError(f"h must be > 0, got {h}")
        n = round(1.0 / h)
        if n < 1 or abs(n * h - 1.0) > 1e-9:
            raise ValueError(f"h={h} does not divide the unit length")
        if values["problem"] is not Problem.STEP and (
                values["outflow_h"] is not None or values["fine_length"] is not None):
            raise ValueError("outflow_h and fine_length only apply to the step problem")
        return values

    @property
    def nu(self) -> float:
        return 1.0 / self.re

    @property
    def effective_method(self) -> Method:
        # Without grad-div the grad-div AH step is plain AH.
        if self.method is Method.GRAD_DIV_AH and self.gamma == 0:
            return Method.AH
        return self.method

    def ns_config(self) -> NsConfig:
        try:
            return NsConfig(nu=self.nu, rho=self.rho, alpha=self.alpha,
                            gamma=self.gamma, epsilon=self.epsilon, tol=self.tol,
                            max_iters=self.max_iters, element=self.element,
                            method=self.effective_method,
                            stopping_norm=self.stopping_norm,
                            divergence_threshold=self.divergence_threshold)
        except ValidationError as error:
            raise ConfigurationError(f"Invalid solver parameters: {error}") from error

    def anderson_config(self) -> Optional[AndersonConfig]:
        if self.depth is None:
            return None
        try:
            return AndersonConfig(depth=self.depth, damping=self.beta,
                                  inner_product=self.inner_product)
        except ValidationError as error:
            raise ConfigurationError(f"Invalid Anderson parameters: {error}") from error

    def identifier(self) -> str:
        if self.run_id:
            return self.run_id
        alpha = self.alpha if self.alpha is not None else self.re
        parts = [self.problem.value, f"re{self.re:g}", self.element.value,
                 self.effective_method.value, f"rho{self.rho:g}",
                 f"alpha{alpha:g}", f"gamma{self.gamma:g}"]
        if self.epsilon is not None:
            parts.append(f"eps{self.epsilon:g}")
        if self.depth is not None:
            parts.append(f"m{self.depth}")
        return "_".join(parts)


class SweepSpec(BaseModel):
    """
    Attributes:
        name: Sweep name, used for the output directory.
        base: Values shared by every run.
        re, element, gamma, rho, alpha, m: Swept values; an empty list keeps
            the base value.
        cap: Maximum number of runs.
        workers: Worker processes (1 runs sequentially).
    """
    name: str = "sweep"
    base: RunSpec
    re: List[float] = []
    element: List[ElementPair] = []
    gamma: List[float] = []
    rho: List[float] = []
    alpha: List[float] = []
    m: List[int] = []
    cap: int = 200
    workers: int = 1

    class Config:
        extra = "forbid"

    @validator("cap", "workers")
    def _at_least_one(cls, value, field):
        if value < 1:
            raise ValueError(f"{field.name} must be >= 1, got {value}")
        return value

    @property
    def size(self) -> int:
        size = 1
        for key in SWEEP_KEYS:
            size *= max(len(getattr(self, key)), 1)
        return size

    def expand(self) -> List[RunSpec]:
        """
        Cartesian product of the swept values, in a fixed key order.

        Raises:
            ConfigurationError: More runs than `cap`.
        """
        if self.size > self.cap:
            raise ConfigurationError(
                f"Sweep {self.name} has {self.size} runs, the cap is {self.cap}.")
        keys = [key for key in SWEEP_KEYS if getattr(self, key)]
        runs = []
        for combination in itertools.product(*(getattr(self, key) for key in keys)):
            update: Dict[str, Any] = {"run_id": None}
            for key, value in zip(keys, combination):
                update["depth" if key == "m" else key] = value
            runs.append(self.base.copy(update=update))
        return runs


Spec = Union[RunSpec, SweepSpec]


def _read_mapping(source: Union[str, Path]) -> Dict[str, Any]:
    path = Path(source)
    if not path.exists() and str(source) in PRESETS:
        path = PRESET_DIR / f"{source}.yaml"
    if not path.exists():
        raise ConfigurationError(f"Config file {source} not found.")
    with open(path, encoding="utf-8") as f:
        data = yaml.safe_load(f) or {}
    if not isinstance(data, dict):
        raise ConfigurationError(f"Config file {path} is not a key: value mapping.")
    logger.debug(f"Loaded config {path}")
    return data


def build_spec(data: Mapping[str, Any],
               overrides: Optional[Mapping[str, Any]] = None) -> Spec:
    """
    Build a RunSpec, or a SweepSpec when `data` has a `sweep` mapping.
    Non-None `overrides` take precedence over `data`.
    """
    data = dict(data)
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    sweep = data.pop("sweep", None)
    name = data.pop("name", None)
    sweep_options = {key: data.pop(key) for key in ("cap", "workers") if key in data}
    try:
        if sweep is None:
            if name is not None and data.get("run_id") is None:
                data["run_id"] = name
            return RunSpec(**data)
        if not isinstance(sweep, dict):
            raise ConfigurationError("`sweep` must map parameter names to lists.")
        unknown = set(sweep) - set(SWEEP_KEYS)
        if unknown:
            raise ConfigurationError(f"Cannot sweep over {sorted(unknown)}; "
                                     f"allowed keys are {list(SWEEP_KEYS)}.")
        return SweepSpec(name=name or "sweep", base=RunSpec(**data),
                         **{k: list(v) if isinstance(v, (list, tuple)) else [v]
                            for k, v in sweep.items()},
                         **sweep_options)
    except ValidationError as error:
        raise ConfigurationError(f"Invalid configuration: {error}") from error


def load_spec(source: Union[str, Path],
              overrides: Optional[Mapping[str, Any]] = None) -> Spec:
    """
    Load a YAML config file or a named preset (fig1 ... fig9).

    Args:
        source: File path or preset name.
        overrides: Field values (e.g. from command-line flags) replacing the
            file values; None entries are ignored.

    Returns:
        Spec: RunSpec or SweepSpec.
    """
    return build_spec(_read_mapping(source), overrides)
