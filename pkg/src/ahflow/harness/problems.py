"""
Problem presets: mesh, boundary conditions and forcing of each experiment.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from loguru import logger

from ahflow.fem import BoundaryConditionSet, ElementPair, VectorField
from ahflow.harness.manufactured import ManufacturedSolution, smooth_solution
from ahflow.mesh import (Mesh, alfeld_split, build_step_channel_mesh,
                         build_unit_square_mesh)


class Problem(str, Enum):
    CAVITY = "cavity"
    STEP = "step"
    MMS = "mms"


@dataclass(frozen=True)
class ProblemSetup:
    mesh: Mesh
    bcs: BoundaryConditionSet
    forcing: Optional[VectorField]
    exact: Optional[ManufacturedSolution] = None


def build_problem(problem: Problem, h: float, element: ElementPair, nu: float,
                  outflow_h: Optional[float] = None,
                  fine_length: Optional[float] = None,
                  forcing_scale: float = 1.0) -> ProblemSetup:
    """
    Args:
        problem: cavity, step or mms.
        h: Mesh size (1/h subdivisions per unit length).
        element: SV meshes are Alfeld splits of the macro mesh.
        nu: Viscosity, used by the manufactured forcing.
        outflow_h: Step channel spacing behind `fine_length`.
        fine_length: End of the finely meshed part of the step channel.
        forcing_scale: Multiplies the forcing (and the manufactured solution).
    """
    problem = Problem(problem)
    if problem is Problem.STEP:
        mesh = build_step_channel_mesh(h, outflow_h, fine_length)
    else:
        mesh = build_unit_square_mesh(int(round(1.0 / h)))
    if ElementPair(element) is ElementPair.SCOTT_VOGELIUS:
        mesh = alfeld_split(mesh)

    exact = None
    forcing = None
    if problem is Problem.CAVITY:
        bcs = BoundaryConditionSet.cavity()
    elif problem is Problem.STEP:
        bcs = BoundaryConditionSet.step_channel()
    else:
        exact = smooth_solution(nu, nonlinear=True, forcing_scale=forcing_scale)
        bcs = BoundaryConditionSet.everywhere(exact.velocity)
        forcing = exact.forcing

    if forcing is None and forcing_scale != 1.0:
        logger.warning(f"forcing_scale={forcing_scale} has no effect on the "
                       f"unforced {problem.value} problem")
    logger.info(f"Problem {problem.value}: {mesh.n_triangles} triangles, "
                f"element {ElementPair(element).value}")
    return ProblemSetup(mesh=mesh, bcs=bcs, forcing=forcing, exact=exact)
