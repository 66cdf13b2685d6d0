"""
Testing `quadrature.py` (reference triangle rules).

Tests include:
- Weights sum to the reference area.
- Exact integration of every monomial up to degree 5.
- Mapping of the nodes to physical triangles.
"""
from math import factorial

import numpy as np
import pytest
from numpy.testing import assert_allclose

from ahflow.quadrature import REFERENCE_AREA, triangle_rule


def test_weights_sum_to_area():
    rule = triangle_rule(5)
    assert rule.n_points == 7
    assert_allclose(rule.weights.sum(), REFERENCE_AREA, rtol=1e-15)
    assert np.all(rule.weights > 0)
    assert_allclose(rule.barycentric.sum(axis=1), 1.0, rtol=1e-15)


@pytest.mark.parametrize("a, b", [(a, b) for a in range(6) for b in range(6) if a + b <= 5])
def test_monomials_are_exact(a, b):
    rule = triangle_rule(5)
    x, y = rule.barycentric[:, 1], rule.barycentric[:, 2]
    exact = factorial(a) * factorial(b) / factorial(a + b + 2)
    assert_allclose(np.sum(rule.weights * x ** a * y ** b), exact, rtol=1e-13)


def test_physical_points():
    rule = triangle_rule()
    vertices = np.array([[[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]]])
    points = rule.physical_points(vertices)
    assert points.shape == (1, 7, 2)
    assert_allclose(points[0, 0], [2.0 / 3.0, 2.0 / 3.0])


def test_degree_too_high():
    with pytest.raises(ValueError):
        triangle_rule(6)


if __name__ == "__main__":
    pytest.main([__file__])
