"""
Solver configuration models.

- NsConfig: Parameters of the nonlinear iteration (viscosity, AH parameters,
  grad-div parameter, IPP penalty, stopping rule).
- AndersonConfig: Depth, damping and inner product of Anderson acceleration.
"""
from enum import Enum
from typing import List, Optional, Union

from loguru import logger
from pydantic import BaseModel, root_validator, validator

from ahflow.fem import ElementPair
from ahflow.sparse_linalg import MAX_LSQ_COLUMNS


class Method(str, Enum):
    AH = "AH"
    GRAD_DIV_AH = "GradDivAH"
    IPP = "IPP"
    PICARD = "Picard"


class StoppingNorm(str, Enum):
    L2 = "l2"
    H1 = "h1"
    H = "h"


class InnerProduct(str, Enum):
    EUCLIDEAN = "euclidean"
    H = "h"


class NsConfig(BaseModel):
    """
    Attributes:
        nu: Kinematic viscosity (1/Re).
        rho: AH step parameter.
        alpha: AH pressure parameter; defaults to 1/nu.
        gamma: Grad-div parameter.
        epsilon: IPP penalty parameter.
        tol: Stopping tolerance on the update norm.
        max_iters: Iteration cap.
        element: Element pair.
        method: Stepper.
        stopping_norm: Norm of u_k - u_{k-1} compared with `tol`.
        divergence_threshold: Update norm above which the run is declared
            diverged.
    """
    nu: float
    rho: float = 1.0
    alpha: Optional[float] = None
    gamma: float = 0.0
    epsilon: Optional[float] = None
    tol: float = 1e-6
    max_iters: int = 1000
    element: ElementPair = ElementPair.SCOTT_VOGELIUS
    method: Method = Method.GRAD_DIV_AH
    stopping_norm: StoppingNorm = StoppingNorm.L2
    divergence_threshold: float = 1e8

    class Config:
        allow_mutation = False
        extra = "forbid"

    @validator("nu", "rho", "tol", "divergence_threshold")
    def _positive(cls, value, field):
        if not value > 0:
            raise ValueError(f"{field.name} must be > 0, got {value}")
        return value

    @validator("gamma")
    def _non_negative(cls, value):
        if not value >= 0:
            raise ValueError(f"gamma must be >= 0, got {value}")
        return value

    @validator("max_iters")
    def _non_negative_iters(cls, value):
        if value < 0:
            raise ValueError(f"max_iters must be >= 0, got {value}")
        return value

    @validator("alpha", always=True)
    def _default_alpha(cls, value, values):
        if value is None:
            nu = values.get("nu")
            return None if nu is None else 1.0 / nu
        if not value > 0:
            raise ValueError(f"alpha must be > 0, got {value}")
        return value

    @root_validator(skip_on_failure=True)
    def _method_parameters(cls, values):
        method = values["method"]
        if method is Method.IPP:
            epsilon = values.get("epsilon")
            if epsilon is None or not epsilon > 0:
                raise ValueError("method IPP needs epsilon > 0")
        if method is Method.GRAD_DIV_AH and not values["gamma"] > 0:
            raise ValueError("method GradDivAH needs gamma > 0")
        return values

    @property
    def reynolds(self) -> float:
        return 1.0 / self.nu

    def diagnostics(self) -> List[str]:
        """
        Non-fatal parameter warnings: the grad-div AH guidance gamma >= rho/alpha
        and rho <= 1/nu, and the positivity condition alpha > 2 rho^2.
        """
        messages = []
        if self.method in (Method.AH, Method.GRAD_DIV_AH):
            if self.method is Method.GRAD_DIV_AH and self.gamma < self.rho / self.alpha:
                messages.append(f"gamma={self.gamma:g} < rho/alpha="
                                f"{self.rho / self.alpha:g}")
            if self.rho > 1.0 / self.nu:
                messages.append(f"rho={self.rho:g} > 1/nu={1.0 / self.nu:g}")
            if self.alpha <= 2.0 * self.rho ** 2:
                messages.append(f"alpha={self.alpha:g} <= 2 rho^2="
                                f"{2.0 * self.rho ** 2:g}")
        for message in messages:
            logger.warning(f"Parameter diagnostic: {message}")
        return messages


class AndersonConfig(BaseModel):
    """
    Attributes:
        depth: History depth m (0 disables the extrapolation).
        damping: Constant beta in (0, 1] or a per-iteration schedule; the last
            entry repeats once the schedule is exhausted.
        inner_product: Norm of the coefficient minimization.
        regularization: Relative Gram diagonal shift.
    """
    depth: int = 0
    damping: Union[float, List[float]] = 1.0
    inner_product: InnerProduct = InnerProduct.H
    regularization: float = 1e-12

    class Config:
        allow_mutation = False
        extra = "forbid"

    @validator("depth")
    def _depth_range(cls, value):
        if not 0 <= value <= MAX_LSQ_COLUMNS:
            raise ValueError(f"depth must lie in [0, {MAX_LSQ_COLUMNS}], got {value}")
        return value

    @validator("damping")
    def _damping_range(cls, value):
        schedule = value if isinstance(value, list) else [value]
        if not schedule:
            raise ValueError("damping schedule is empty")
        for beta in schedule:
            if not 0.0 < beta <= 1.0:
                raise ValueError(f"damping must lie in (0, 1], got {beta}")
        return value

    @validator("regularization")
    def _regularization_sign(cls, value):
        if value < 0:
            raise ValueError(f"regularization must be >= 0, got {value}")
        return value

    def beta(self, k: int) -> float:
        """Damping factor of (1-based) iteration k."""
        if isinstance(self.damping, list):
            return float(self.damping[min(max(k, 1), len(self.damping)) - 1])
        return float(self.damping)
