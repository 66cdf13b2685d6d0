"""
Mesh Module

Structured 2D triangulations used by every experiment, and their barycentric
(Alfeld) refinement.

Functions:
- build_unit_square_mesh: Uniform triangulation of the unit square (cavity).
- build_step_channel_mesh: Triangulation of the 40x10 channel with a unit
  step at the bottom, optionally graded in x.
- alfeld_split: Replace every triangle by three triangles sharing its
  barycenter.
- export_mesh_vtk: Write a mesh to a legacy VTK file.
"""
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path
from typing import Callable, Dict, NamedTuple, Optional, Tuple, Union

import numpy as np
from loguru import logger

from ahflow.exceptions import ConfigurationError, MeshError
from ahflow.vtk import write_unstructured_grid

# Local edge k of a triangle is the edge opposite to local vertex k.
LOCAL_EDGES = np.array([[1, 2], [2, 0], [0, 1]])

CHANNEL_LENGTH = 40.0
CHANNEL_HEIGHT = 10.0
STEP_X = (5.0, 6.0)
STEP_HEIGHT = 1.0

_COORD_TOL = 1e-12


class BoundaryTag(IntEnum):
    """Tag carried by every mesh edge."""
    INTERIOR = 0
    LID = 1
    WALL = 2
    INFLOW = 3
    OUTFLOW = 4


# A vertex shared by boundary edges with different tags takes the first tag of
# this list. Lid first gives the "leaky" cavity corners.
VERTEX_TAG_PRIORITY = (BoundaryTag.LID, BoundaryTag.WALL, BoundaryTag.INFLOW,
                       BoundaryTag.OUTFLOW)


class Point2(NamedTuple):
    x: float
    y: float


class Triangle(NamedTuple):
    vertex_ids: Tuple[int, int, int]


EdgeTagger = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Mesh:
    """
    Conforming triangulation with tagged edges.

    Attributes:
        points: (N, 2) vertex coordinates.
        triangles: (T, 3) counter-clockwise vertex indices.
        edges: (E, 2) vertex pairs, sorted within each row, rows sorted.
        triangle_edges: (T, 3) edge index of the edge opposite each local vertex.
        edge_tags: (E,) BoundaryTag values.
        edge_triangles: (E, 2) adjacent triangles, -1 where there is none.
        alfeld: True when the mesh is the barycentric split of a macro mesh.
    """
    points: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    triangle_edges: np.ndarray
    edge_tags: np.ndarray
    edge_triangles: np.ndarray
    alfeld: bool = False

    @classmethod
    def from_triangles(cls, points: np.ndarray, triangles: np.ndarray,
                       tagger: EdgeTagger, alfeld: bool = False) -> "Mesh":
        """
        Build the edge table of a triangulation and tag its boundary edges.

        Args:
            points: (N, 2) vertex coordinates.
            triangles: (T, 3) counter-clockwise vertex indices.
            tagger: Called with the (Eb, 2) vertex pairs and (Eb, 2) midpoints
                of the boundary edges; returns their tags.
            alfeld: Whether the triangulation is an Alfeld split.

        Returns:
            Mesh: The validated mesh.
        """
        points = np.ascontiguousarray(points, dtype=float)
        triangles = np.ascontiguousarray(triangles, dtype=np.int64)
        n_tri = len(triangles)

        pairs = np.sort(triangles[:, LOCAL_EDGES], axis=2).reshape(-1, 2)
        edges, inverse = np.unique(pairs, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        triangle_edges = inverse.reshape(n_tri, 3)

        owner = np.repeat(np.arange(n_tri), 3)
        order = np.argsort(inverse, kind="stable")
        sorted_edges, sorted_owner = inverse[order], owner[order]
        first = np.ones(len(order), dtype=bool)
        first[1:] = sorted_edges[1:] != sorted_edges[:-1]
        edge_triangles = np.full((len(edges), 2), -1, dtype=np.int64)
        edge_triangles[sorted_edges[first], 0] = sorted_owner[first]
        edge_triangles[sorted_edges[~first], 1] = sorted_owner[~first]

        counts = np.bincount(inverse, minlength=len(edges))
        if np.any(counts > 2):
            raise MeshError(
                f"{int(np.sum(counts > 2))} edges are shared by more than two "
                "triangles")
        edge_tags = np.full(len(edges), BoundaryTag.INTERIOR, dtype=np.int8)
        boundary = counts == 1
        if np.any(boundary):
            midpoints = points[edges[boundary]].mean(axis=1)
            edge_tags[boundary] = tagger(edges[boundary], midpoints)

        for array in (points, triangles, edges, triangle_edges, edge_tags,
                      edge_triangles):
            array.setflags(write=False)
        mesh = cls(points, triangles, edges, triangle_edges, edge_tags,
                   edge_triangles, alfeld)
        mesh.validate()
        return mesh

    @property
    def n_points(self) -> int:
        return len(self.points)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def boundary_edges(self) -> np.ndarray:
        """Indices of the edges adjacent to a single triangle."""
        return np.flatnonzero(self.edge_triangles[:, 1] < 0)

    def point(self, index: int) -> Point2:
        x, y = self.points[index]
        return Point2(float(x), float(y))

    def triangle(self, index: int) -> Triangle:
        return Triangle(tuple(int(v) for v in self.triangles[index]))

    def signed_areas(self) -> np.ndarray:
        p = self.points[self.triangles]
        d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def has_tag(self, tag: BoundaryTag) -> bool:
        return bool(np.any(self.edge_tags == tag))

    @property
    def vertex_tags(self) -> np.ndarray:
        """
        Tag of every vertex: INTERIOR, or the highest priority tag among its
        boundary edges (see VERTEX_TAG_PRIORITY).
        """
        tags = np.full(self.n_points, BoundaryTag.INTERIOR, dtype=np.int8)
        boundary = self.boundary_edges
        for tag in reversed(VERTEX_TAG_PRIORITY):
            ids = self.edges[boundary[self.edge_tags[boundary] == tag]]
            tags[ids.ravel()] = tag
        return tags

    def edge_table(self) -> Dict[Tuple[int, int], Tuple[BoundaryTag, Tuple[int, ...]]]:
        """Edge -> (tag, adjacent triangles) as a plain dictionary."""
        return {
            (int(a), int(b)): (BoundaryTag(int(tag)),
                               tuple(int(t) for t in tris if t >= 0))
            for (a, b), tag, tris in zip(self.edges, self.edge_tags,
                                         self.edge_triangles)
        }

    def validate(self) -> None:
        """
        Check finiteness, positive areas, distinct vertices, conformity and
        boundary tag completeness.

        Raises:
            MeshError: On the first failed check.
        """
        if not np.all(np.isfinite(self.points)):
            raise MeshError("Mesh has non-finite coordinates.")
        tri = self.triangles
        if np.any((tri[:, 0] == tri[:, 1]) | (tri[:, 1] == tri[:, 2])
                  | (tri[:, 0] == tri[:, 2])):
            raise MeshError("Triangle with repeated vertex ids.")
        areas = self.signed_areas()
        if np.any(areas <= 0.0):
            bad = int(np.argmin(areas))
            raise MeshError(f"Triangle {bad} has non-positive area {areas[bad]:g}.")

        boundary = self.edge_triangles[:, 1] < 0
        interior_tags = self.edge_tags == BoundaryTag.INTERIOR
        if np.any(boundary & interior_tags):
            raise MeshError("Boundary edge tagged INTERIOR.")
        if np.any(~boundary & ~interior_tags):
            raise MeshError("Interior edge carries a boundary tag.")
        self._check_no_hanging_nodes()

    def _check_no_hanging_nodes(self, chunk: int = 64) -> None:
        # A hanging node shows up as a vertex lying inside a one-sided edge.
        edges = self.edges[self.boundary_edges]
        for start in range(0, len(edges), chunk):
            a = self.points[edges[start:start + chunk, 0]][:, None, :]
            b = self.points[edges[start:start + chunk, 1]][:, None, :]
            d = b - a
            r = self.points[None, :, :] - a
            length2 = np.sum(d * d, axis=2)
            cross = d[..., 0] * r[..., 1] - d[..., 1] * r[..., 0]
            t = np.sum(d * r, axis=2) / length2
            inside = ((np.abs(cross) <= 1e-10 * length2)
                      & (t > 1e-10) & (t < 1.0 - 1e-10))
            if np.any(inside):
                e, v = np.argwhere(inside)[0]
                raise MeshError(
                    f"Hanging node {int(v)} on boundary edge "
                    f"{tuple(int(i) for i in edges[start + e])}.")


def _check_divides_one(h: float, name: str) -> int:
    if not np.isfinite(h) or h <= 0:
        raise ConfigurationError(f"{name} must be positive, got {h}.")
    n = int(round(1.0 / h))
    if n < 1 or abs(n * h - 1.0) > 1e-9:
        raise ConfigurationError(f"{name}={h} does not divide 1 evenly.")
    return n


def build_unit_square_mesh(n: int) -> Mesh:
    """
    Uniform triangulation of the unit square with n cells per side, every cell
    split along its lower-left to upper-right diagonal.

    Edges on y=1 are tagged LID, the rest of the boundary WALL.
    """
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
        raise ConfigurationError(f"Subdivisions per side must be >= 1, got {n}.")
    n = int(n)
    coords = np.arange(n + 1) / n
    x, y = np.meshgrid(coords, coords, indexing="xy")
    points = np.column_stack([x.ravel(), y.ravel()])

    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    v00 = (j * (n + 1) + i).ravel()
    v10, v01 = v00 + 1, v00 + n + 1
    v11 = v01 + 1
    triangles = np.stack([np.column_stack([v00, v10, v11]),
                          np.column_stack([v00, v11, v01])],
                         axis=1).reshape(-1, 3)

    def tagger(_edges: np.ndarray, midpoints: np.ndarray) -> np.ndarray:
        return np.where(np.abs(midpoints[:, 1] - 1.0) < _COORD_TOL,
                        BoundaryTag.LID, BoundaryTag.WALL)

    mesh = Mesh.from_triangles(points, triangles, tagger)
    logger.debug(f"Unit square mesh n={n}: {mesh.n_points} vertices, "
                 f"{mesh.n_triangles} triangles")
    return mesh


def build_step_channel_mesh(h: float,
                            outflow_h: Optional[float] = None,
                            fine_length: Optional[float] = None) -> Mesh:
    """
    Structured triangulation of [0,40]x[0,10] minus the step [5,6]x[0,1].

    Args:
        h: Edge length; must divide 1 so the step is resolved exactly.
        outflow_h: Spacing in x downstream of `fine_length`. Defaults to `h`.
        fine_length: End of the region meshed with spacing `h` in x.
            Defaults to the channel length (uniform mesh).

    Returns:
        Mesh: Inflow edges (x=0) tagged INFLOW, outflow edges (x=40) OUTFLOW,
        everything else on the boundary (step faces included) WALL.
    """
    n_unit = _check_divides_one(h, "h")
    outflow_h = h if outflow_h is None else outflow_h
    fine_length = CHANNEL_LENGTH if fine_length is None else fine_length
    if not STEP_X[1] <= fine_length <= CHANNEL_LENGTH:
        raise ConfigurationError(
            f"fine_length must lie in [{STEP_X[1]}, {CHANNEL_LENGTH}], got "
            f"{fine_length}.")
    n_fine = int(round(fine_length * n_unit))
    if abs(n_fine / n_unit - fine_length) > 1e-9:
        raise ConfigurationError(
            f"fine_length={fine_length} is not a multiple of h={h}.")
    coarse = CHANNEL_LENGTH - fine_length
    n_coarse = int(round(coarse / outflow_h)) if outflow_h > 0 else -1
    if n_coarse < 0 or abs(n_coarse * outflow_h - coarse) > 1e-9:
        raise ConfigurationError(
            f"outflow_h={outflow_h} does not divide the coarse length {coarse}.")

    xs = np.arange(n_fine + 1) / n_unit
    if n_coarse:
        xs = np.concatenate([
            xs, fine_length + np.arange(1, n_coarse + 1) * outflow_h])
        xs[-1] = CHANNEL_LENGTH
    ys = np.arange(int(round(CHANNEL_HEIGHT * n_unit)) + 1) / n_unit
    nx, ny = len(xs) - 1, len(ys) - 1

    x, y = np.meshgrid(xs, ys, indexing="xy")
    grid_points = np.column_stack([x.ravel(), y.ravel()])
    i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
    i, j = i.ravel(), j.ravel()
    xc = 0.5 * (xs[i] + xs[i + 1])
    yc = 0.5 * (ys[j] + ys[j + 1])
    keep = ~((xc > STEP_X[0]) & (xc < STEP_X[1]) & (yc < STEP_HEIGHT))
    i, j = i[keep], j[keep]

    v00 = j * (nx + 1) + i
    v10, v01 = v00 + 1, v00 + nx + 1
    v11 = v01 + 1
    triangles = np.stack([np.column_stack([v00, v10, v11]),
                          np.column_stack([v00, v11, v01])],
                         axis=1).reshape(-1, 3)

    # Drop the vertices strictly inside the step.
    used, triangles = np.unique(triangles, return_inverse=True)
    triangles = triangles.reshape(-1, 3)
    points = grid_points[used]

    def tagger(_edges: np.ndarray, midpoints: np.ndarray) -> np.ndarray:
        tags = np.full(len(midpoints), BoundaryTag.WALL, dtype=np.int8)
        tags[np.abs(midpoints[:, 0]) < _COORD_TOL] = BoundaryTag.INFLOW
        tags[np.abs(midpoints[:, 0] - CHANNEL_LENGTH) < _COORD_TOL] = (
            BoundaryTag.OUTFLOW)
        return tags

    mesh = Mesh.from_triangles(points, triangles, tagger)
    logger.debug(f"Step channel mesh h={h}, outflow_h={outflow_h}: "
                 f"{mesh.n_points} vertices, {mesh.n_triangles} triangles")
    return mesh


def alfeld_split(mesh: Mesh) -> Mesh:
    """
    Barycentric refinement: every triangle (a, b, c) with barycenter g becomes
    (a, b, g), (b, c, g), (c, a, g). Vertex ids of the input are kept, the
    barycenters are appended in triangle order.
    """
    n_points, n_tri = mesh.n_points, mesh.n_triangles
    barycenters = mesh.points[mesh.triangles].mean(axis=1)
    points = np.vstack([mesh.points, barycenters])
    g = n_points + np.arange(n_tri)
    a, b, c = mesh.triangles.T
    triangles = np.stack([np.column_stack([a, b, g]),
                          np.column_stack([b, c, g]),
                          np.column_stack([c, a, g])], axis=1).reshape(-1, 3)

    parent_boundary = mesh.boundary_edges
    parent_keys = (mesh.edges[parent_boundary, 0] * n_points
                   + mesh.edges[parent_boundary, 1])
    order = np.argsort(parent_keys)
    parent_keys = parent_keys[order]
    parent_tags = mesh.edge_tags[parent_boundary][order]

    def tagger(edges: np.ndarray, _midpoints: np.ndarray) -> np.ndarray:
        keys = edges[:, 0] * n_points + edges[:, 1]
        pos = np.searchsorted(parent_keys, keys)
        pos = np.minimum(pos, len(parent_keys) - 1)
        if np.any(parent_keys[pos] != keys):
            raise MeshError("Alfeld split produced a boundary edge that is not "
                            "a boundary edge of the macro mesh.")
        return parent_tags[pos]

    split = Mesh.from_triangles(points, triangles, tagger, alfeld=True)
    logger.debug(f"Alfeld split: {n_tri} -> {split.n_triangles} triangles")
    return split


def export_mesh_vtk(mesh: Mesh, path: Union[str, Path]) -> Path:
    """Write the triangulation with per-cell areas to a legacy VTK file."""
    return write_unstructured_grid(
        path, mesh.points, mesh.triangles,
        cell_scalars={"area": mesh.signed_areas()},
        title=f"ahflow mesh: {mesh.n_triangles} triangles")
