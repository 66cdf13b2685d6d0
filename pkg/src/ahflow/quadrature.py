"""
Quadrature rules on the reference triangle {(x, y): x, y >= 0, x + y <= 1}.
"""
from dataclasses import dataclass

import numpy as np

REFERENCE_AREA = 0.5


@dataclass(frozen=True)
class QuadratureRule:
    """
    Attributes:
        barycentric: (Q, 3) barycentric coordinates of the nodes.
        weights: (Q,) positive weights summing to the reference area.
        degree: Polynomial degree integrated exactly.
    """
    barycentric: np.ndarray
    weights: np.ndarray
    degree: int

    @property
    def n_points(self) -> int:
        return len(self.weights)

    def physical_points(self, vertices: np.ndarray) -> np.ndarray:
        """
        Map the nodes to physical triangles.

        Args:
            vertices: (T, 3, 2) triangle vertex coordinates.

        Returns:
            np.ndarray: (T, Q, 2) node coordinates.
        """
        return np.einsum("qi,tic->tqc", self.barycentric, vertices)


def _strang_fix_7() -> QuadratureRule:
    # Seven point rule, exact for polynomials of degree 5.
    sqrt15 = np.sqrt(15.0)
    a1, b1 = (9.0 - 2.0 * sqrt15) / 21.0, (6.0 + sqrt15) / 21.0
    a2, b2 = (9.0 + 2.0 * sqrt15) / 21.0, (6.0 - sqrt15) / 21.0
    w0 = 9.0 / 40.0
    w1 = (155.0 + sqrt15) / 1200.0
    w2 = (155.0 - sqrt15) / 1200.0
    barycentric = np.array([
        [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
        [a1, b1, b1], [b1, a1, b1], [b1, b1, a1],
        [a2, b2, b2], [b2, a2, b2], [b2, b2, a2],
    ])
    weights = REFERENCE_AREA * np.array([w0, w1, w1, w1, w2, w2, w2])
    return QuadratureRule(barycentric, weights, degree=5)


DEGREE_5 = _strang_fix_7()


def triangle_rule(degree: int = 5) -> QuadratureRule:
    """Return a rule exact up to `degree` (only degree <= 5 is provided)."""
    if degree > DEGREE_5.degree:
        raise ValueError(f"No quadrature rule of degree {degree} available.")
    return DEGREE_5
