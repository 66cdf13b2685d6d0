"""
Finite Element Module

Taylor-Hood and Scott-Vogelius element pairs on triangles: degree-of-freedom
maps, assembly of every bilinear/trilinear form used by the solvers, Dirichlet
imposition and discrete norms.

Velocity unknowns are numbered component-blocked: the x-components of all P2
nodes first (vertices, then edge midpoints), then the y-components.

Functions:
- build_dofmap: Number velocity/pressure dofs and collect Dirichlet data.
- assemble_vector_laplacian, assemble_graddiv, assemble_divergence,
  assemble_pressure_mass, assemble_velocity_mass, assemble_convection,
  assemble_rhs: Sparse operators and load vectors.
- apply_dirichlet: Symmetric elimination of Dirichlet rows and columns.
- norms: Discrete norms of a velocity/pressure pair.
"""
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Callable, Mapping, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from loguru import logger

from ahflow.exceptions import ConfigurationError, DimensionError
from ahflow.mesh import CHANNEL_HEIGHT, BoundaryTag, Mesh
from ahflow.quadrature import QuadratureRule, triangle_rule
from ahflow.sparse_linalg import SparseMatrix, csr_from_triplets

VectorField = Callable[[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray]]
ScalarField = Callable[[np.ndarray, np.ndarray], np.ndarray]


class ElementPair(str, Enum):
    """P2 velocity with continuous (TH) or discontinuous (SV) P1 pressure."""
    TAYLOR_HOOD = "TH"
    SCOTT_VOGELIUS = "SV"


def lid_velocity(x: np.ndarray, y: np.ndarray):
    return np.ones_like(x), np.zeros_like(y)


def no_slip(x: np.ndarray, y: np.ndarray):
    return np.zeros_like(x), np.zeros_like(y)


def parabolic_inflow(u_max: float = 1.0) -> VectorField:
    """u_x(y) = y (H - y) 4/H^2 u_max, u_y = 0 across the channel height H."""
    def profile(x: np.ndarray, y: np.ndarray):
        ux = y * (CHANNEL_HEIGHT - y) * (4.0 / CHANNEL_HEIGHT ** 2) * u_max
        return ux, np.zeros_like(x)
    return profile


@dataclass(frozen=True)
class BoundaryConditionSet:
    """
    Velocity prescription per boundary tag. A tag mapped to None is a natural
    (do-nothing) boundary.
    """
    prescriptions: Mapping[BoundaryTag, Optional[VectorField]]

    def is_dirichlet(self, tag: BoundaryTag) -> bool:
        return self.prescriptions.get(BoundaryTag(tag)) is not None

    def check_covers(self, mesh: Mesh) -> None:
        tags = {BoundaryTag(int(t)) for t in np.unique(mesh.edge_tags[mesh.boundary_edges])}
        missing = tags - set(BoundaryTag(t) for t in self.prescriptions)
        if missing:
            raise ConfigurationError(
                f"No boundary prescription for tags {sorted(t.name for t in missing)}.")

    @classmethod
    def cavity(cls) -> "BoundaryConditionSet":
        return cls({BoundaryTag.LID: lid_velocity, BoundaryTag.WALL: no_slip})

    @classmethod
    def step_channel(cls, u_max: float = 1.0) -> "BoundaryConditionSet":
        return cls({BoundaryTag.INFLOW: parabolic_inflow(u_max),
                    BoundaryTag.WALL: no_slip,
                    BoundaryTag.OUTFLOW: None})

    @classmethod
    def everywhere(cls, velocity: VectorField) -> "BoundaryConditionSet":
        """The same Dirichlet data on every boundary tag."""
        return cls({tag: velocity for tag in BoundaryTag
                    if tag is not BoundaryTag.INTERIOR})


@dataclass(frozen=True)
class ElementGeometry:
    """
    Per-triangle quantities at the quadrature nodes.

    Attributes:
        dx: (T, Q) quadrature weights times the Jacobian determinant.
        points: (T, Q, 2) physical quadrature nodes.
        phi: (Q, 6) P2 basis values.
        dphi: (T, Q, 6, 2) physical P2 basis gradients.
        psi: (Q, 3) P1 basis values (barycentric coordinates).
    """
    dx: np.ndarray
    points: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    psi: np.ndarray


def _p2_basis(lam: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    P2 basis values (Q, 6) and the coefficients (Q, 6, 3) expressing their
    gradients in terms of the barycentric gradients.
    """
    n_q = len(lam)
    values = np.empty((n_q, 6))
    coeffs = np.zeros((n_q, 6, 3))
    for i in range(3):
        values[:, i] = lam[:, i] * (2.0 * lam[:, i] - 1.0)
        coeffs[:, i, i] = 4.0 * lam[:, i] - 1.0
    for k in range(3):
        a, b = (k + 1) % 3, (k + 2) % 3
        values[:, 3 + k] = 4.0 * lam[:, a] * lam[:, b]
        coeffs[:, 3 + k, a] = 4.0 * lam[:, b]
        coeffs[:, 3 + k, b] = 4.0 * lam[:, a]
    return values, coeffs


def element_geometry(mesh: Mesh, rule: Optional[QuadratureRule] = None
                     ) -> ElementGeometry:
    rule = rule or triangle_rule(5)
    vertices = mesh.points[mesh.triangles]
    d1 = vertices[:, 1] - vertices[:, 0]
    d2 = vertices[:, 2] - vertices[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]

    grad_lambda = np.empty((mesh.n_triangles, 3, 2))
    grad_lambda[:, 1, 0] = d2[:, 1] / det
    grad_lambda[:, 1, 1] = -d2[:, 0] / det
    grad_lambda[:, 2, 0] = -d1[:, 1] / det
    grad_lambda[:, 2, 1] = d1[:, 0] / det
    grad_lambda[:, 0] = -(grad_lambda[:, 1] + grad_lambda[:, 2])

    phi, coeffs = _p2_basis(rule.barycentric)
    dphi = np.einsum("qij,tjc->tqic", coeffs, grad_lambda)
    dx = np.abs(det)[:, None] * rule.weights[None, :]
    return ElementGeometry(dx=dx, points=rule.physical_points(vertices),
                           phi=phi, dphi=dphi, psi=rule.barycentric.copy())


@dataclass(frozen=True)
class DofMap:
    """
    Attributes:
        mesh: Underlying triangulation.
        pair: Element pair.
        n_scalar: Number of scalar P2 nodes (vertices + edges).
        n_velocity: 2 * n_scalar.
        n_pressure: Vertex count (TH) or 3 * triangle count (SV).
        scalar_dofs: (T, 6) P2 nodes of each triangle (vertices, then edges
            opposite each vertex).
        velocity_dofs: (T, 12) x-component dofs then y-component dofs.
        pressure_dofs: (T, 3) pressure dofs of each triangle.
        nodes: (n_scalar, 2) coordinates of the P2 nodes.
        dirichlet_dofs: Sorted constrained velocity dofs.
        dirichlet_values: Prescribed values at `dirichlet_dofs`.
        pressure_nullspace: True iff the whole velocity boundary is Dirichlet.
    """
    mesh: Mesh
    pair: ElementPair
    n_scalar: int
    n_velocity: int
    n_pressure: int
    scalar_dofs: np.ndarray
    velocity_dofs: np.ndarray
    pressure_dofs: np.ndarray
    nodes: np.ndarray
    dirichlet_dofs: np.ndarray
    dirichlet_values: np.ndarray
    pressure_nullspace: bool

    @cached_property
    def geometry(self) -> ElementGeometry:
        return element_geometry(self.mesh)

    @property
    def n_total(self) -> int:
        return self.n_velocity + self.n_pressure

    def interpolate_velocity(self, velocity: VectorField) -> np.ndarray:
        """Nodal P2 interpolant of a vector field."""
        ux, uy = velocity(self.nodes[:, 0], self.nodes[:, 1])
        return np.concatenate([np.broadcast_to(ux, self.n_scalar),
                               np.broadcast_to(uy, self.n_scalar)]).astype(float)

    def interpolate_pressure(self, pressure: ScalarField) -> np.ndarray:
        """Nodal P1 interpolant (continuous for TH, per triangle for SV)."""
        if self.pair is ElementPair.TAYLOR_HOOD:
            points = self.mesh.points
            return np.broadcast_to(pressure(points[:, 0], points[:, 1]),
                                   self.n_pressure).astype(float)
        vertices = self.mesh.points[self.mesh.triangles].reshape(-1, 2)
        return np.broadcast_to(pressure(vertices[:, 0], vertices[:, 1]),
                               self.n_pressure).astype(float)

    def evaluate_velocity(self, u: np.ndarray) -> np.ndarray:
        """(T, Q, 2) velocity at the quadrature nodes."""
        local = u[self.velocity_dofs]
        ux = local[:, :6] @ self.geometry.phi.T
        uy = local[:, 6:] @ self.geometry.phi.T
        return np.stack([ux, uy], axis=2)

    def evaluate_pressure(self, p: np.ndarray) -> np.ndarray:
        """(T, Q) pressure at the quadrature nodes."""
        return p[self.pressure_dofs] @ self.geometry.psi.T


def build_dofmap(mesh: Mesh, pair: ElementPair,
                 bcs: BoundaryConditionSet) -> DofMap:
    """
    Number the degrees of freedom of `pair` on `mesh` and evaluate the
    Dirichlet data of `bcs` at the constrained boundary nodes.

    Raises:
        ConfigurationError: SV on a mesh that is not an Alfeld split, or a
            boundary tag without prescription.
    """
    pair = ElementPair(pair)
    if pair is ElementPair.SCOTT_VOGELIUS and not mesh.alfeld:
        raise ConfigurationError(
            "Scott-Vogelius elements require an Alfeld-split mesh.")
    bcs.check_covers(mesh)

    n_vertices, n_tri = mesh.n_points, mesh.n_triangles
    n_scalar = n_vertices + mesh.n_edges
    scalar_dofs = np.hstack([mesh.triangles, n_vertices + mesh.triangle_edges])
    velocity_dofs = np.hstack([scalar_dofs, scalar_dofs + n_scalar])
    if pair is ElementPair.TAYLOR_HOOD:
        n_pressure = n_vertices
        pressure_dofs = mesh.triangles.copy()
    else:
        n_pressure = 3 * n_tri
        pressure_dofs = np.arange(n_pressure).reshape(n_tri, 3)

    nodes = np.vstack([mesh.points, mesh.points[mesh.edges].mean(axis=1)])

    # Constrained P2 nodes and the tag that prescribes their value.
    node_tags = np.concatenate([
        mesh.vertex_tags,
        np.where(mesh.edge_triangles[:, 1] < 0, mesh.edge_tags,
                 BoundaryTag.INTERIOR)])
    constrained, values_x, values_y = [], [], []
    for tag in BoundaryTag:
        if tag is BoundaryTag.INTERIOR or not bcs.is_dirichlet(tag):
            continue
        ids = np.flatnonzero(node_tags == tag)
        if not len(ids):
            continue
        ux, uy = bcs.prescriptions[tag](nodes[ids, 0], nodes[ids, 1])
        constrained.append(ids)
        values_x.append(np.broadcast_to(ux, ids.shape))
        values_y.append(np.broadcast_to(uy, ids.shape))
    if constrained:
        ids = np.concatenate(constrained)
        order = np.argsort(ids)
        ids = ids[order]
        vx = np.concatenate(values_x)[order]
        vy = np.concatenate(values_y)[order]
        dirichlet_dofs = np.concatenate([ids, ids + n_scalar])
        dirichlet_values = np.concatenate([vx, vy]).astype(float)
    else:
        dirichlet_dofs = np.zeros(0, dtype=np.int64)
        dirichlet_values = np.zeros(0)

    boundary_tags = mesh.edge_tags[mesh.boundary_edges]
    nullspace = all(bcs.is_dirichlet(BoundaryTag(int(t)))
                    for t in np.unique(boundary_tags))

    dofmap = DofMap(mesh=mesh, pair=pair, n_scalar=n_scalar,
                    n_velocity=2 * n_scalar, n_pressure=n_pressure,
                    scalar_dofs=scalar_dofs, velocity_dofs=velocity_dofs,
                    pressure_dofs=pressure_dofs, nodes=nodes,
                    dirichlet_dofs=dirichlet_dofs,
                    dirichlet_values=dirichlet_values,
                    pressure_nullspace=nullspace)
    logger.info(f"{pair.value} dof map: {dofmap.n_velocity} velocity, "
                f"{n_pressure} pressure, {len(dirichlet_dofs)} Dirichlet dofs")
    return dofmap


def _assemble(row_dofs: np.ndarray, col_dofs: np.ndarray, local: np.ndarray,
              shape) -> SparseMatrix:
    rows = np.broadcast_to(row_dofs[:, :, None], local.shape)
    cols = np.broadcast_to(col_dofs[:, None, :], local.shape)
    return csr_from_triplets(rows, cols, local, shape)


def _block_diagonal(block: np.ndarray) -> np.ndarray:
    n_tri, n = block.shape[:2]
    local = np.zeros((n_tri, 2 * n, 2 * n))
    local[:, :n, :n] = block
    local[:, n:, n:] = block
    return local


def assemble_vector_laplacian(dofmap: DofMap) -> SparseMatrix:
    """A_ij = (grad phi_j, grad phi_i), without viscosity."""
    geo = dofmap.geometry
    stiffness = np.einsum("tq,tqic,tqjc->tij", geo.dx, geo.dphi, geo.dphi)
    return _assemble(dofmap.velocity_dofs, dofmap.velocity_dofs,
                     _block_diagonal(stiffness),
                     (dofmap.n_velocity, dofmap.n_velocity))


def assemble_graddiv(dofmap: DofMap) -> SparseMatrix:
    """G_ij = (div phi_j, div phi_i), without the grad-div parameter."""
    geo = dofmap.geometry
    div = np.concatenate([geo.dphi[..., 0], geo.dphi[..., 1]], axis=2)
    local = np.einsum("tq,tqi,tqj->tij", geo.dx, div, div)
    return _assemble(dofmap.velocity_dofs, dofmap.velocity_dofs, local,
                     (dofmap.n_velocity, dofmap.n_velocity))


def assemble_divergence(dofmap: DofMap) -> SparseMatrix:
    """B_qj = (div phi_j, psi_q), shape (n_pressure, n_velocity)."""
    geo = dofmap.geometry
    div = np.concatenate([geo.dphi[..., 0], geo.dphi[..., 1]], axis=2)
    local = np.einsum("tq,qp,tqj->tpj", geo.dx, geo.psi, div)
    return _assemble(dofmap.pressure_dofs, dofmap.velocity_dofs, local,
                     (dofmap.n_pressure, dofmap.n_velocity))


def assemble_pressure_mass(dofmap: DofMap) -> SparseMatrix:
    geo = dofmap.geometry
    local = np.einsum("tq,qp,qr->tpr", geo.dx, geo.psi, geo.psi)
    return _assemble(dofmap.pressure_dofs, dofmap.pressure_dofs, local,
                     (dofmap.n_pressure, dofmap.n_pressure))


def assemble_velocity_mass(dofmap: DofMap) -> SparseMatrix:
    geo = dofmap.geometry
    mass = np.einsum("tq,qi,qj->tij", geo.dx, geo.phi, geo.phi)
    return _assemble(dofmap.velocity_dofs, dofmap.velocity_dofs,
                     _block_diagonal(mass),
                     (dofmap.n_velocity, dofmap.n_velocity))


def assemble_convection(dofmap: DofMap, u: np.ndarray) -> SparseMatrix:
    """
    Skew-symmetric convection operator N(u):
    N(u)_ij = b*(u, phi_j, phi_i)
            = 1/2 ((u.grad) phi_j, phi_i) - 1/2 ((u.grad) phi_i, phi_j).
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (dofmap.n_velocity,):
        raise DimensionError(
            f"Velocity has shape {u.shape}, expected ({dofmap.n_velocity},).")
    geo = dofmap.geometry
    uq = dofmap.evaluate_velocity(u)
    advection = np.einsum("tqc,tqbc->tqb", uq, geo.dphi)
    half = 0.5 * np.einsum("tq,qa,tqb->tab", geo.dx, geo.phi, advection)
    skew = half - half.transpose(0, 2, 1)
    return _assemble(dofmap.velocity_dofs, dofmap.velocity_dofs,
                     _block_diagonal(skew),
                     (dofmap.n_velocity, dofmap.n_velocity))


def assemble_rhs(dofmap: DofMap, f: Optional[VectorField]) -> np.ndarray:
    """Load vector (f, phi_i). `f=None` means a zero forcing."""
    if f is None:
        return np.zeros(dofmap.n_velocity)
    geo = dofmap.geometry
    fx, fy = f(geo.points[..., 0], geo.points[..., 1])
    fx = np.broadcast_to(fx, geo.dx.shape)
    fy = np.broadcast_to(fy, geo.dx.shape)
    local = np.concatenate([np.einsum("tq,qi,tq->ti", geo.dx, geo.phi, fx),
                            np.einsum("tq,qi,tq->ti", geo.dx, geo.phi, fy)],
                           axis=1)
    return np.bincount(dofmap.velocity_dofs.ravel(), weights=local.ravel(),
                       minlength=dofmap.n_velocity)


def apply_dirichlet(matrix, rhs: np.ndarray, dofmap: DofMap,
                    values: Optional[np.ndarray] = None
                    ) -> Tuple[SparseMatrix, np.ndarray]:
    """
    Impose the Dirichlet data of `dofmap` by symmetric elimination.

    Constrained rows and columns are zeroed, their diagonal set to one and
    their right-hand side to the prescribed value; the eliminated column
    contributions move to the right-hand side of the retained rows. The matrix
    may be a coupled velocity-pressure system whose leading block is the
    velocity block.

    Args:
        matrix: Square sparse matrix.
        rhs: Right-hand side.
        dofmap: Supplies the constrained dofs.
        values: Override of the prescribed values (e.g. zeros for an
            increment equation).

    Returns:
        Tuple[SparseMatrix, np.ndarray]: Constrained matrix and right-hand side.
    """
    dofs = dofmap.dirichlet_dofs
    values = dofmap.dirichlet_values if values is None else values
    matrix = sp.csr_matrix(matrix, copy=True)
    rhs = np.array(rhs, dtype=float, copy=True)
    if not len(dofs):
        return matrix, rhs
    n = matrix.shape[0]

    prescribed = np.zeros(n)
    prescribed[dofs] = values
    rhs -= matrix @ prescribed

    constrained = np.zeros(n, dtype=bool)
    constrained[dofs] = True
    rows = np.repeat(np.arange(n), np.diff(matrix.indptr))
    matrix.data[constrained[rows] | constrained[matrix.indices]] = 0.0
    matrix = matrix + sp.diags(constrained.astype(float), format="csr")
    matrix.sort_indices()
    rhs[dofs] = values
    return matrix, rhs


@dataclass(frozen=True)
class FemOperators:
    """The velocity-independent operators of one dof map."""
    dofmap: DofMap
    laplacian: SparseMatrix
    graddiv: SparseMatrix
    divergence: SparseMatrix
    pressure_mass: SparseMatrix
    velocity_mass: SparseMatrix


def assemble_operators(dofmap: DofMap) -> FemOperators:
    return FemOperators(
        dofmap=dofmap,
        laplacian=assemble_vector_laplacian(dofmap),
        graddiv=assemble_graddiv(dofmap),
        divergence=assemble_divergence(dofmap),
        pressure_mass=assemble_pressure_mass(dofmap),
        velocity_mass=assemble_velocity_mass(dofmap))


@dataclass(frozen=True)
class StateNorms:
    l2_velocity: float
    h1_seminorm_velocity: float
    l2_pressure: float
    divergence_l2: float
    h_norm: Optional[float] = None


def _energy(matrix: SparseMatrix, x: np.ndarray) -> float:
    return float(np.sqrt(max(float(x @ (matrix @ x)), 0.0)))


def norms(operators: FemOperators, u: np.ndarray, p: np.ndarray,
          alpha: Optional[float] = None) -> StateNorms:
    """
    Discrete norms of (u, p): ||u||, ||grad u||, ||p||, ||div u|| and, when
    `alpha` is given, ||(u, p)||_H = sqrt(||grad u||^2 + alpha ||p||^2).

    Raises:
        ConfigurationError: alpha <= 0.
    """
    if alpha is not None and not alpha > 0.0:
        raise ConfigurationError(f"H-norm needs alpha > 0, got {alpha}.")
    h1 = _energy(operators.laplacian, u)
    l2_p = _energy(operators.pressure_mass, p)
    h_norm = None if alpha is None else float(np.sqrt(h1 ** 2 + alpha * l2_p ** 2))
    return StateNorms(l2_velocity=_energy(operators.velocity_mass, u),
                      h1_seminorm_velocity=h1,
                      l2_pressure=l2_p,
                      divergence_l2=_energy(operators.graddiv, u),
                      h_norm=h_norm)
