"""
Solvers Module

Linearized steps of the steady Navier-Stokes iteration and the fixed-point
driver around them.

Every step has the signature `step(state, config, system) -> State`:
- ah_step: Arrow-Hurwicz velocity solve followed by an explicit pressure update.
- graddiv_ah_step: Same with the grad-div term in the velocity matrix.
- ipp_step: Iterated penalty Picard.
- picard_step: Coupled Picard (Oseen) solve.

The iteration starts from `solve_stokes_initial` and is run by
`fixed_point_solve`, which also routes through Anderson acceleration when an
AndersonConfig is given.
"""
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
import scipy.sparse as sp
from loguru import logger

from ahflow.config import AndersonConfig, Method, NsConfig, StoppingNorm
from ahflow.exceptions import DimensionError
from ahflow.fem import (DofMap, ElementPair, FemOperators, VectorField,
                        apply_dirichlet, assemble_convection, assemble_operators,
                        assemble_rhs, norms)
from ahflow.sparse_linalg import (Factorization, FactorizationKind, SparseMatrix,
                                  csr_from_triplets, factorize)


@dataclass(frozen=True)
class State:
    """Velocity and pressure coefficient vectors of one iterate."""
    u: np.ndarray
    p: np.ndarray

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.u, self.p])

    @classmethod
    def from_vector(cls, x: np.ndarray, n_velocity: int) -> "State":
        return cls(u=x[:n_velocity].copy(), p=x[n_velocity:].copy())

    @classmethod
    def zeros(cls, dofmap: DofMap) -> "State":
        return cls(u=np.zeros(dofmap.n_velocity), p=np.zeros(dofmap.n_pressure))

    def check_sizes(self, dofmap: DofMap) -> None:
        if self.u.shape != (dofmap.n_velocity,) or self.p.shape != (dofmap.n_pressure,):
            raise DimensionError(
                f"State sizes ({self.u.shape}, {self.p.shape}) do not match the "
                f"dof map ({dofmap.n_velocity}, {dofmap.n_pressure}).")


@dataclass(frozen=True)
class NsSystem:
    """
    Everything the steps need besides the iterate: the dof map, the assembled
    velocity-independent operators, the load vector, the pressure mass
    factorization and, for Scott-Vogelius, the block-diagonal inverse pressure
    mass matrix. Each iteration method keeps its linear solver in
    `factorizations`, so later iterations only refactorize numerically.
    """
    dofmap: DofMap
    operators: FemOperators
    load: np.ndarray
    mass_factorization: Factorization
    pressure_weights: np.ndarray
    inverse_pressure_mass: Optional[SparseMatrix] = None
    factorizations: Dict[str, Factorization] = field(default_factory=dict, repr=False,
                                                     compare=False)

    @property
    def laplacian(self) -> SparseMatrix:
        return self.operators.laplacian

    @property
    def graddiv(self) -> SparseMatrix:
        return self.operators.graddiv

    @property
    def divergence(self) -> SparseMatrix:
        return self.operators.divergence

    @property
    def pressure_mass(self) -> SparseMatrix:
        return self.operators.pressure_mass

    def solve_pressure_mass(self, r: np.ndarray) -> np.ndarray:
        if self.inverse_pressure_mass is not None:
            return self.inverse_pressure_mass @ r
        return self.mass_factorization.solve(r)

    def normalize_pressure(self, p: np.ndarray) -> np.ndarray:
        """Subtract the mass-weighted mean when the pressure is defined up to a constant."""
        if not self.dofmap.pressure_nullspace:
            return p
        return p - float(self.pressure_weights @ p) / float(self.pressure_weights.sum())

    def pressure_mean(self, p: np.ndarray) -> float:
        return float(self.pressure_weights @ p) / float(self.pressure_weights.sum())

    def factorize(self, key: str, matrix: SparseMatrix) -> Factorization:
        """Factorize `matrix`, reusing the column order cached under `key`."""
        cached = self.factorizations.get(key)
        if cached is None:
            cached = factorize(matrix, FactorizationKind.GENERAL)
        factorization = cached.refactorize(matrix)
        self.factorizations[key] = factorization
        return factorization


def _sv_inverse_pressure_mass(dofmap: DofMap) -> SparseMatrix:
    geo = dofmap.geometry
    local = np.einsum("tq,qp,qr->tpr", geo.dx, geo.psi, geo.psi)
    inverse = np.linalg.inv(local)
    rows = np.broadcast_to(dofmap.pressure_dofs[:, :, None], inverse.shape)
    cols = np.broadcast_to(dofmap.pressure_dofs[:, None, :], inverse.shape)
    return csr_from_triplets(rows, cols, inverse,
                             (dofmap.n_pressure, dofmap.n_pressure))


def assemble_system(dofmap: DofMap, f: Optional[VectorField] = None) -> NsSystem:
    """Assemble the operators and load vector of `dofmap` for forcing `f`."""
    operators = assemble_operators(dofmap)
    mass_factorization = factorize(operators.pressure_mass, FactorizationKind.SPD)
    inverse = (_sv_inverse_pressure_mass(dofmap)
               if dofmap.pair is ElementPair.SCOTT_VOGELIUS else None)
    weights = operators.pressure_mass @ np.ones(dofmap.n_pressure)
    logger.info(f"Assembled system: {operators.laplacian.nnz} nonzeros in A, "
                f"{operators.divergence.nnz} in B")
    return NsSystem(dofmap=dofmap, operators=operators,
                    load=assemble_rhs(dofmap, f),
                    mass_factorization=mass_factorization,
                    pressure_weights=weights,
                    inverse_pressure_mass=inverse)


def _saddle_point_solve(system: NsSystem, key: str, velocity_block: SparseMatrix,
                        pressure_block: Optional[SparseMatrix],
                        rhs_u: np.ndarray, rhs_p: np.ndarray) -> State:
    """
    Solve [[K, -B^T], [-B, C]] [u; p] = [rhs_u; rhs_p] with the Dirichlet data
    imposed, bordered by a zero-mean pressure constraint when the pressure is
    only defined up to a constant.
    """
    dofmap = system.dofmap
    b = system.divergence
    matrix = sp.bmat([[velocity_block, -b.T], [-b, pressure_block]], format="csr")
    matrix, rhs = apply_dirichlet(matrix, np.concatenate([rhs_u, rhs_p]), dofmap)
    bordered = dofmap.pressure_nullspace and pressure_block is None
    if bordered:
        weights = np.concatenate([np.zeros(dofmap.n_velocity), system.pressure_weights])
        column = sp.csr_matrix(weights[:, None])
        matrix = sp.bmat([[matrix, column], [column.T, None]], format="csr")
        rhs = np.append(rhs, 0.0)
    x = system.factorize(key, matrix).solve(rhs)
    state = State.from_vector(x[:dofmap.n_total], dofmap.n_velocity)
    return State(u=state.u, p=system.normalize_pressure(state.p))


def solve_stokes_initial(system: NsSystem) -> State:
    """
    Unit-viscosity Stokes solve (grad u, grad v) - (div v, p) = (f, v),
    (div u, q) = 0 with the full Dirichlet data.
    """
    n_p = system.dofmap.n_pressure
    state = _saddle_point_solve(system, "stokes", system.laplacian, None, system.load,
                                np.zeros(n_p))
    logger.info("Initial Stokes solve done")
    return state


def _arrow_hurwicz(state: State, config: NsConfig, system: NsSystem,
                   gamma: float) -> State:
    a = system.laplacian
    matrix = (1.0 / config.rho) * a + assemble_convection(system.dofmap, state.u)
    if gamma:
        matrix = matrix + gamma * system.graddiv
    rhs = (system.load + (1.0 / config.rho - config.nu) * (a @ state.u)
           + system.divergence.T @ state.p)
    matrix, rhs = apply_dirichlet(matrix, rhs, system.dofmap)
    u = system.factorize("arrow_hurwicz", matrix).solve(rhs)
    p = state.p - (config.rho / config.alpha) * system.solve_pressure_mass(
        system.divergence @ u)
    return State(u=u, p=system.normalize_pressure(p))


def ah_step(state: State, config: NsConfig, system: NsSystem) -> State:
    """
    Arrow-Hurwicz step: solve
    (1/rho) A u + N(u^m) u = f + (1/rho - nu) A u^m + B^T p^m,
    then p = p^m - (rho/alpha) M_p^{-1} B u.
    """
    return _arrow_hurwicz(state, config, system, gamma=0.0)


def graddiv_ah_step(state: State, config: NsConfig, system: NsSystem) -> State:
    """Arrow-Hurwicz step with gamma G added to the velocity matrix."""
    return _arrow_hurwicz(state, config, system, gamma=config.gamma)


def ipp_step(state: State, config: NsConfig, system: NsSystem) -> State:
    """
    Iterated penalty Picard step with penalty epsilon:
    nu A u + N(u^m) u - B^T p = f and eps M_p (p - p^m) + B u = 0.

    For Scott-Vogelius the pressure is eliminated through the block-diagonal
    M_p^{-1}; for Taylor-Hood the coupled system is solved.
    """
    eps = config.epsilon
    velocity_block = (config.nu * system.laplacian
                      + assemble_convection(system.dofmap, state.u))
    if system.inverse_pressure_mass is not None:
        b = system.divergence
        matrix = velocity_block + (1.0 / eps) * (b.T @ system.inverse_pressure_mass @ b)
        rhs = system.load + b.T @ state.p
        matrix, rhs = apply_dirichlet(matrix, rhs, system.dofmap)
        u = system.factorize("ipp", matrix).solve(rhs)
        p = state.p - (1.0 / eps) * (system.inverse_pressure_mass @ (b @ u))
        return State(u=u, p=system.normalize_pressure(p))

    mass = system.pressure_mass
    return _saddle_point_solve(system, "ipp", velocity_block, -eps * mass, system.load,
                               -eps * (mass @ state.p))


def picard_step(state: State, config: NsConfig, system: NsSystem) -> State:
    """Coupled Oseen solve linearized at u^m (grad-div term included when gamma > 0)."""
    velocity_block = (config.nu * system.laplacian
                      + assemble_convection(system.dofmap, state.u))
    if config.gamma:
        velocity_block = velocity_block + config.gamma * system.graddiv
    return _saddle_point_solve(system, "picard", velocity_block, None, system.load,
                               np.zeros(system.dofmap.n_pressure))


Stepper = Callable[[State, NsConfig, NsSystem], State]

STEPPERS = {
    Method.AH: ah_step,
    Method.GRAD_DIV_AH: graddiv_ah_step,
    Method.IPP: ipp_step,
    Method.PICARD: picard_step,
}


def stepper_for(method: Method) -> Stepper:
    return STEPPERS[Method(method)]


class Status(str, Enum):
    CONVERGED = "Converged"
    MAX_ITERS = "MaxIters"
    DIVERGED = "Diverged"


@dataclass(frozen=True)
class IterationRecord:
    """
    Attributes:
        iteration: 0 for the initial state.
        update_l2: ||u_k - u_{k-1}|| in L2 (NaN for the initial state).
        update_h1: ||grad(u_k - u_{k-1})||.
        update_norm: Update measured in the configured stopping norm.
        divergence_l2: ||div u_k||.
        theta: Anderson gain factor, None without acceleration.
        wall_ms: Cumulative wall time since the driver started.
    """
    iteration: int
    update_l2: float
    update_h1: float
    update_norm: float
    divergence_l2: float
    theta: Optional[float]
    wall_ms: float


@dataclass
class IterationTrace:
    records: List[IterationRecord] = field(default_factory=list)
    status: Optional[Status] = None

    @property
    def iterations(self) -> int:
        return len(self.records) - 1

    @property
    def update_norms(self) -> np.ndarray:
        return np.array([r.update_norm for r in self.records[1:]])

    @property
    def thetas(self) -> List[Optional[float]]:
        return [r.theta for r in self.records[1:]]

    def to_frame(self, run_id: str) -> pd.DataFrame:
        """One row per record, columns run_id,iter,update_l2,div_l2,theta,wall_ms,status."""
        status = self.status.value if self.status else ""
        return pd.DataFrame({
            "run_id": [run_id] * len(self.records),
            "iter": [r.iteration for r in self.records],
            "update_l2": [r.update_l2 for r in self.records],
            "div_l2": [r.divergence_l2 for r in self.records],
            "theta": [np.nan if r.theta is None else r.theta for r in self.records],
            "wall_ms": [r.wall_ms for r in self.records],
            "status": [status] * len(self.records),
        })


Advance = Callable[[State, int], Tuple[State, Optional[float]]]


def _stopping_value(config: NsConfig, update_l2: float, update_h1: float,
                    update_h: float) -> float:
    if config.stopping_norm is StoppingNorm.H1:
        return update_h1
    if config.stopping_norm is StoppingNorm.H:
        return update_h
    return update_l2


def iterate(initial: State, advance: Advance, config: NsConfig,
            system: NsSystem) -> Tuple[State, IterationTrace]:
    """
    Run `advance` until the update norm drops to `config.tol`, exceeds
    `config.divergence_threshold` (or is not finite), or `config.max_iters`
    steps were taken.

    Args:
        initial: Starting iterate.
        advance: (state, k) -> (next state, gain factor or None).
        config: Stopping parameters.
        system: Supplies the norms.

    Returns:
        Tuple[State, IterationTrace]: Last iterate and its trace.
    """
    initial.check_sizes(system.dofmap)
    operators = system.operators
    start = time.perf_counter()
    div0 = norms(operators, initial.u, initial.p).divergence_l2
    trace = IterationTrace([IterationRecord(0, np.nan, np.nan, np.nan, div0, None, 0.0)])

    state = initial
    for k in range(1, config.max_iters + 1):
        new, theta = advance(state, k)
        diff = norms(operators, new.u - state.u, new.p - state.p, alpha=config.alpha)
        div = norms(operators, new.u, new.p).divergence_l2
        value = _stopping_value(config, diff.l2_velocity, diff.h1_seminorm_velocity,
                                diff.h_norm)
        trace.records.append(IterationRecord(
            k, diff.l2_velocity, diff.h1_seminorm_velocity, value, div, theta,
            1e3 * (time.perf_counter() - start)))
        theta_text = "" if theta is None else f", theta={theta:.3e}"
        logger.debug(f"iter {k}: update={value:.3e}, div={div:.3e}{theta_text}")
        state = new
        if value <= config.tol:
            trace.status = Status.CONVERGED
            break
        if not np.isfinite(value) or value > config.divergence_threshold:
            trace.status = Status.DIVERGED
            logger.warning(f"Diverged at iteration {k} (update {value:.3e})")
            break
    else:
        trace.status = Status.MAX_ITERS
        if config.max_iters:
            logger.warning(f"No convergence within {config.max_iters} iterations")

    logger.info(f"{config.method.value}: {trace.status.value} after "
                f"{trace.iterations} iterations")
    return state, trace


def fixed_point_solve(initial: State, stepper: Stepper, config: NsConfig,
                      system: NsSystem, aa: Optional[AndersonConfig] = None
                      ) -> Tuple[State, IterationTrace]:
    """
    Iterate `stepper` from `initial`; with `aa`, every step goes through
    Anderson acceleration.
    """
    if aa is not None:
        from ahflow.anderson import accelerated_solve
        state, trace, _ = accelerated_solve(initial, stepper, config, aa, system)
        return state, trace
    return iterate(initial, lambda state, _k: (stepper(state, config, system), None),
                   config, system)
