"""
Anderson acceleration of fixed-point iterations x = g(x).

Each step evaluates w_k = g(x_{k-1}) - x_{k-1}, minimizes the norm of an affine
combination of the last m_k + 1 residuals (written with residual differences),
and mixes the correspondingly averaged iterates:

    x_k = (1 - beta_k) x_avg + beta_k g_avg.

The gain factor theta_k = ||w_avg|| / ||w_k|| reports what the minimization
gained over the plain step.
"""
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Deque, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from loguru import logger

from ahflow.config import AndersonConfig, InnerProduct, NsConfig
from ahflow.sparse_linalg import DenseLSQ, weighted_least_squares
from ahflow.solvers import IterationTrace, NsSystem, State, Stepper, iterate

Map = Callable[[np.ndarray], np.ndarray]


@dataclass
class GainTrace:
    thetas: List[float] = field(default_factory=list)
    coefficients: List[np.ndarray] = field(default_factory=list)


@dataclass
class _HistoryEntry:
    x: np.ndarray
    gx: np.ndarray
    w: np.ndarray


@dataclass
class AndersonWorkspace:
    """
    Attributes:
        current: The iterate x_{k-1} the next step starts from.
        depth: Window depth m; at most m + 1 residuals are kept.
        weight: Inner product matrix, None for euclidean.
        k: Number of completed steps.
    """
    current: np.ndarray
    depth: int
    weight: Optional[sp.spmatrix] = None
    k: int = 0
    history: Deque[_HistoryEntry] = field(init=False, default_factory=deque)
    converged: bool = False

    def __post_init__(self):
        self.current = np.asarray(self.current, dtype=float)
        self.history = deque(maxlen=self.depth + 1)

    def norm(self, v: np.ndarray) -> float:
        if self.weight is None:
            return float(np.linalg.norm(v))
        return float(np.sqrt(max(float(v @ (self.weight @ v)), 0.0)))


def h_inner_product(system: NsSystem, alpha: float) -> sp.csr_matrix:
    """blockdiag(A, alpha M_p): the (u, p) inner product sqrt(||grad u||^2 + alpha ||p||^2)."""
    return sp.block_diag([system.laplacian, alpha * system.pressure_mass],
                         format="csr")


def aa_step(workspace: AndersonWorkspace, g_eval: Map, config: AndersonConfig,
            gains: Optional[GainTrace] = None) -> Tuple[np.ndarray, float]:
    """
    Advance the accelerated iteration by one step.

    Returns:
        Tuple[np.ndarray, float]: The next iterate (also stored as
        `workspace.current`) and theta_k. A zero residual sets
        `workspace.converged` and returns the current iterate with theta 0.
    """
    x = workspace.current
    gx = np.asarray(g_eval(x), dtype=float)
    w = gx - x
    workspace.k += 1
    w_norm = workspace.norm(w)
    if w_norm == 0.0:
        workspace.converged = True
        if gains is not None:
            gains.thetas.append(0.0)
            gains.coefficients.append(np.zeros(0))
        return x, 0.0

    workspace.history.append(_HistoryEntry(x, gx, w))
    entries = list(workspace.history)
    if len(entries) == 1:
        gamma = np.zeros(0)
        x_avg, gx_avg, theta = x, gx, 1.0
    else:
        d_w = np.column_stack([b.w - a.w for a, b in zip(entries, entries[1:])])
        d_g = np.column_stack([b.gx - a.gx for a, b in zip(entries, entries[1:])])
        d_x = np.column_stack([b.x - a.x for a, b in zip(entries, entries[1:])])
        gamma = weighted_least_squares(
            DenseLSQ(d_w, w, regularization=config.regularization),
            workspace.weight)
        x_avg = x - d_x @ gamma
        gx_avg = gx - d_g @ gamma
        theta = workspace.norm(w - d_w @ gamma) / w_norm

    beta = config.beta(workspace.k)
    next_x = gx_avg if beta == 1.0 else (1.0 - beta) * x_avg + beta * gx_avg
    workspace.current = next_x
    if gains is not None:
        gains.thetas.append(theta)
        gains.coefficients.append(gamma)
    return next_x, theta


def accelerated_solve(initial: State, stepper: Stepper, ns_config: NsConfig,
                      aa_config: AndersonConfig, system: NsSystem
                      ) -> Tuple[State, IterationTrace, GainTrace]:
    """
    Fixed-point driver with every application of `stepper` passed through
    `aa_step`. Stopping rule and trace are those of the plain driver.
    """
    n_velocity = system.dofmap.n_velocity
    weight = (h_inner_product(system, ns_config.alpha)
              if aa_config.inner_product is InnerProduct.H else None)
    workspace = AndersonWorkspace(initial.to_vector(), aa_config.depth, weight)
    gains = GainTrace()

    def g_eval(x: np.ndarray) -> np.ndarray:
        return stepper(State.from_vector(x, n_velocity), ns_config, system).to_vector()

    def advance(state: State, _k: int):
        workspace.current = state.to_vector()
        x, theta = aa_step(workspace, g_eval, aa_config, gains)
        return State.from_vector(x, n_velocity), theta

    logger.info(f"Anderson acceleration: depth {aa_config.depth}, "
                f"{aa_config.inner_product.value} inner product")
    state, trace = iterate(initial, advance, ns_config, system)
    return state, trace, gains
