"""
Manufactured solutions on the unit square and discrete error norms.

The smooth solution derives from the stream function
psi = sin^2(pi x) sin^2(pi y), so the velocity is divergence free and vanishes
on the boundary; the pressure cos(pi x) cos(pi y) has zero mean.
"""
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np

from ahflow.fem import DofMap

PI = np.pi


@dataclass(frozen=True)
class ManufacturedSolution:
    """
    Attributes:
        velocity: (x, y) -> (u1, u2).
        velocity_gradient: (x, y) -> (du1/dx, du1/dy, du2/dx, du2/dy).
        pressure: (x, y) -> p.
        forcing: (x, y) -> (f1, f2).
    """
    velocity: Callable
    velocity_gradient: Callable
    pressure: Callable
    forcing: Callable


def _velocity(x, y):
    return (PI * np.sin(PI * x) ** 2 * np.sin(2 * PI * y),
            -PI * np.sin(2 * PI * x) * np.sin(PI * y) ** 2)


def _velocity_gradient(x, y):
    a, b = PI * x, PI * y
    return (PI ** 2 * np.sin(2 * a) * np.sin(2 * b),
            PI ** 2 * (1.0 - np.cos(2 * a)) * np.cos(2 * b),
            -PI ** 2 * np.cos(2 * a) * (1.0 - np.cos(2 * b)),
            -PI ** 2 * np.sin(2 * a) * np.sin(2 * b))


def _laplacian(x, y):
    return (2 * PI ** 3 * np.sin(2 * PI * y) * (2 * np.cos(2 * PI * x) - 1.0),
            -2 * PI ** 3 * np.sin(2 * PI * x) * (2 * np.cos(2 * PI * y) - 1.0))


def _pressure(x, y):
    return np.cos(PI * x) * np.cos(PI * y)


def _pressure_gradient(x, y):
    return (-PI * np.sin(PI * x) * np.cos(PI * y),
            -PI * np.cos(PI * x) * np.sin(PI * y))


def smooth_solution(nu: float = 1.0, nonlinear: bool = False,
                    forcing_scale: float = 1.0) -> ManufacturedSolution:
    """
    Trigonometric solution with forcing f = -nu lap u + grad p, plus (u.grad)u
    when `nonlinear`. `forcing_scale` multiplies the whole solution triple,
    keeping the Stokes forcing consistent (the convection term scales
    quadratically).
    """
    s = forcing_scale

    def velocity(x, y):
        u1, u2 = _velocity(x, y)
        return s * u1, s * u2

    def velocity_gradient(x, y):
        return tuple(s * g for g in _velocity_gradient(x, y))

    def pressure(x, y):
        return s * _pressure(x, y)

    def forcing(x, y):
        lap1, lap2 = _laplacian(x, y)
        px, py = _pressure_gradient(x, y)
        f1, f2 = s * (-nu * lap1 + px), s * (-nu * lap2 + py)
        if nonlinear:
            u1, u2 = velocity(x, y)
            d11, d12, d21, d22 = velocity_gradient(x, y)
            f1 = f1 + u1 * d11 + u2 * d12
            f2 = f2 + u1 * d21 + u2 * d22
        return f1, f2

    return ManufacturedSolution(velocity, velocity_gradient, pressure, forcing)


def polynomial_solution() -> ManufacturedSolution:
    """
    Stokes solution (unit viscosity) inside the P2/P1 spaces:
    u = (x^2 + 2xy, -(2xy + y^2)), p = x - 1/2, f = (-1, 2).
    """
    def velocity(x, y):
        return x ** 2 + 2 * x * y, -(2 * x * y + y ** 2)

    def velocity_gradient(x, y):
        return 2 * x + 2 * y, 2 * x, -2 * y, -(2 * x + 2 * y)

    def pressure(x, y):
        return x - 0.5

    def forcing(x, y):
        return -np.ones_like(x), 2.0 * np.ones_like(y)

    return ManufacturedSolution(velocity, velocity_gradient, pressure, forcing)


def discrete_errors(dofmap: DofMap, u: np.ndarray, p: np.ndarray,
                    exact: ManufacturedSolution) -> Tuple[float, float, float]:
    """
    L2 velocity, H1-seminorm velocity and L2 pressure errors, integrated with
    the degree-5 rule. The discrete pressure is compared after removing its
    mean, the exact pressure is assumed mean free.
    """
    geo = dofmap.geometry
    x, y = geo.points[..., 0], geo.points[..., 1]

    uq = dofmap.evaluate_velocity(u)
    u1, u2 = exact.velocity(x, y)
    l2_u = np.sum(geo.dx * ((uq[..., 0] - u1) ** 2 + (uq[..., 1] - u2) ** 2))

    local = u[dofmap.velocity_dofs]
    grad_x = np.einsum("ti,tqic->tqc", local[:, :6], geo.dphi)
    grad_y = np.einsum("ti,tqic->tqc", local[:, 6:], geo.dphi)
    d11, d12, d21, d22 = exact.velocity_gradient(x, y)
    h1_u = np.sum(geo.dx * ((grad_x[..., 0] - d11) ** 2 + (grad_x[..., 1] - d12) ** 2
                            + (grad_y[..., 0] - d21) ** 2 + (grad_y[..., 1] - d22) ** 2))

    pq = dofmap.evaluate_pressure(p)
    pq = pq - np.sum(geo.dx * pq) / np.sum(geo.dx)
    l2_p = np.sum(geo.dx * (pq - exact.pressure(x, y)) ** 2)
    return float(np.sqrt(l2_u)), float(np.sqrt(h1_u)), float(np.sqrt(l2_p))
