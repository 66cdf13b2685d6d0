"""
Runner Module

Functions:
- run_single: Mesh, dof map, assembly, Stokes start and nonlinear iteration of
  one RunSpec, with its CSV/VTK/summary artifacts.
- run_sweep: Every run of a SweepSpec (optionally in worker processes), plus
  the aggregated summary CSV, trace CSV and convergence plot.
- mms_convergence_study: Errors and observed orders of a manufactured
  solution over a list of mesh sizes.
"""
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from loguru import logger

from ahflow.anderson import GainTrace, accelerated_solve
from ahflow.config import Method, NsConfig
from ahflow.exceptions import AhflowError
from ahflow.fem import BoundaryConditionSet, DofMap, ElementPair, build_dofmap, norms
from ahflow.harness.exporters import (export_svg_plot, export_vtk,
                                      write_summary_csv, write_trace_csv)
from ahflow.harness.manufactured import discrete_errors, smooth_solution
from ahflow.harness.problems import build_problem
from ahflow.harness.specs import RunSpec, SweepSpec
from ahflow.mesh import alfeld_split, build_unit_square_mesh
from ahflow.solvers import (IterationTrace, NsSystem, State, Status,
                            assemble_system, fixed_point_solve,
                            solve_stokes_initial, stepper_for)


@dataclass
class RunSummary:
    run_id: str
    problem: str
    element: str
    method: str
    re: float
    rho: float
    alpha: float
    gamma: float
    depth: Optional[int]
    iterations: int
    status: str
    final_update: float
    divergence_l2: float
    velocity_h1: float
    pressure_l2: float
    velocity_h1_error: Optional[float] = None
    wall_s: float = 0.0
    error: Optional[str] = None


@dataclass
class RunResult:
    state: State
    trace: IterationTrace
    summary: RunSummary
    dofmap: DofMap
    gains: Optional[GainTrace] = None
    artifacts: Dict[str, Path] = field(default_factory=dict)


def _solve(spec: RunSpec, config: NsConfig) -> Tuple[State, IterationTrace,
                                                     Optional[GainTrace], NsSystem,
                                                     Optional[float]]:
    setup = build_problem(spec.problem, spec.h, spec.element, config.nu,
                          spec.outflow_h, spec.fine_length, spec.forcing_scale)
    dofmap = build_dofmap(setup.mesh, spec.element, setup.bcs)
    system = assemble_system(dofmap, setup.forcing)
    config.diagnostics()
    initial = solve_stokes_initial(system)
    stepper = stepper_for(config.method)

    aa = spec.anderson_config()
    gains = None
    if aa is None:
        state, trace = fixed_point_solve(initial, stepper, config, system)
    else:
        state, trace, gains = accelerated_solve(initial, stepper, config, aa, system)

    h1_error = None
    if setup.exact is not None:
        h1_error = discrete_errors(dofmap, state.u, state.p, setup.exact)[1]
    return state, trace, gains, system, h1_error


def run_single(spec: RunSpec, out_dir: Optional[Path] = None) -> RunResult:
    """
    Execute one run and write its artifacts to `out_dir` (default
    `spec.out / run_id`): trace.csv, solution.vtk and summary.csv.

    Raises:
        AhflowError: Re-raised with the run identifier prepended.
    """
    run_id = spec.identifier()
    out_dir = Path(out_dir) if out_dir is not None else Path(spec.out) / run_id
    config = spec.ns_config()
    logger.info(f"Run {run_id} started")
    start = time.perf_counter()
    try:
        state, trace, gains, system, h1_error = _solve(spec, config)
    except AhflowError as error:
        raise type(error)(f"run {run_id}: {error}") from error
    wall = time.perf_counter() - start

    final = norms(system.operators, state.u, state.p)
    last = trace.records[-1]
    summary = RunSummary(
        run_id=run_id, problem=spec.problem.value, element=spec.element.value,
        method=config.method.value, re=spec.re, rho=config.rho,
        alpha=config.alpha, gamma=config.gamma, depth=spec.depth,
        iterations=trace.iterations, status=trace.status.value,
        final_update=last.update_l2, divergence_l2=last.divergence_l2,
        velocity_h1=final.h1_seminorm_velocity, pressure_l2=final.l2_pressure,
        velocity_h1_error=h1_error, wall_s=wall)

    artifacts = {
        "trace": write_trace_csv(trace, run_id, out_dir / "trace.csv"),
        "summary": write_summary_csv([summary], out_dir / "summary.csv"),
    }
    if spec.export_vtk:
        artifacts["vtk"] = export_vtk(state, system.dofmap, out_dir / "solution.vtk")
    logger.info(f"Run {run_id}: {summary.status} after {summary.iterations} "
                f"iterations, ||div u||={summary.divergence_l2:.3e}, "
                f"{wall:.1f}s")
    return RunResult(state=state, trace=trace, summary=summary, dofmap=system.dofmap,
                     gains=gains, artifacts=artifacts)


def _sweep_member(spec: RunSpec, out_dir: Path) -> Tuple[RunSummary, pd.DataFrame]:
    run_id = spec.identifier()
    try:
        result = run_single(spec, out_dir / run_id)
        return result.summary, result.trace.to_frame(run_id)
    except Exception as error:
        logger.error(f"Run {run_id} failed: {error}")
        summary = RunSummary(
            run_id=run_id, problem=spec.problem.value, element=spec.element.value,
            method=spec.effective_method.value, re=spec.re, rho=spec.rho,
            alpha=spec.alpha if spec.alpha is not None else spec.re,
            gamma=spec.gamma, depth=spec.depth,
            iterations=0, status="Error", final_update=np.nan,
            divergence_l2=np.nan, velocity_h1=np.nan, pressure_l2=np.nan,
            error=str(error))
        return summary, pd.DataFrame(columns=["run_id"])


@dataclass
class SweepResult:
    summaries: pd.DataFrame
    traces: pd.DataFrame
    artifacts: Dict[str, Path] = field(default_factory=dict)


def run_sweep(spec: SweepSpec, out_dir: Optional[Path] = None) -> SweepResult:
    """
    Run the cartesian product of `spec`. Failed runs are recorded with status
    "Error" and the sweep continues; results are merged in expansion order.
    """
    runs = spec.expand()
    out_dir = Path(out_dir) if out_dir is not None else Path(spec.base.out) / spec.name
    logger.info(f"Sweep {spec.name}: {len(runs)} runs, {spec.workers} workers")

    if spec.workers > 1 and len(runs) > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            results = list(pool.map(_sweep_member, runs, [out_dir] * len(runs)))
    else:
        results = [_sweep_member(run, out_dir) for run in runs]

    summaries = [summary for summary, _ in results]
    frames = [frame for _, frame in results if len(frame)]
    traces = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame()

    artifacts = {"summary": write_summary_csv(summaries, out_dir / "summary.csv")}
    if len(traces):
        artifacts["traces"] = out_dir / "traces.csv"
        traces.to_csv(artifacts["traces"], index=False)
        series = {run_id: group["update_l2"].to_numpy()[1:]
                  for run_id, group in traces.groupby("run_id", sort=False)}
        artifacts["plot"] = out_dir / "convergence.svg"
        export_svg_plot(series, artifacts["plot"], title=spec.name)

    converged = sum(s.status == Status.CONVERGED.value for s in summaries)
    logger.info(f"Sweep {spec.name} done: {converged}/{len(summaries)} converged")
    return SweepResult(summaries=pd.DataFrame([s.__dict__ for s in summaries]),
                       traces=traces, artifacts=artifacts)


@dataclass
class MmsStudy:
    """Errors per mesh size and observed orders between the coarsest and finest mesh."""
    table: pd.DataFrame
    orders: Dict[str, float]


def mms_convergence_study(h_list: Sequence[float],
                          element: ElementPair = ElementPair.TAYLOR_HOOD,
                          nonlinear: bool = False, nu: float = 1.0,
                          tol: float = 1e-10, max_iters: int = 50) -> MmsStudy:
    """
    Solve the manufactured Stokes problem (unit viscosity) or, with
    `nonlinear`, the Navier-Stokes problem by Picard iteration on each mesh.

    Raises:
        AhflowError: A Picard solve did not converge.
    """
    element = ElementPair(element)
    exact = smooth_solution(nu if nonlinear else 1.0, nonlinear=nonlinear)
    bcs = BoundaryConditionSet.everywhere(exact.velocity)
    rows = []
    for h in h_list:
        mesh = build_unit_square_mesh(int(round(1.0 / h)))
        if element is ElementPair.SCOTT_VOGELIUS:
            mesh = alfeld_split(mesh)
        dofmap = build_dofmap(mesh, element, bcs)
        system = assemble_system(dofmap, exact.forcing)
        state = solve_stokes_initial(system)
        if nonlinear:
            config = NsConfig(nu=nu, method=Method.PICARD, element=element,
                              tol=tol, max_iters=max_iters)
            state, trace = fixed_point_solve(state, stepper_for(Method.PICARD),
                                             config, system)
            if trace.status is not Status.CONVERGED:
                raise AhflowError(f"Picard did not converge at h={h:g} "
                                  f"({trace.status.value}).")
        l2_u, h1_u, l2_p = discrete_errors(dofmap, state.u, state.p, exact)
        rows.append({"h": h, "velocity_l2": l2_u, "velocity_h1": h1_u,
                     "pressure_l2": l2_p,
                     "divergence_l2": norms(system.operators, state.u,
                                            state.p).divergence_l2})
        logger.info(f"MMS h={h:g}: |u-uh|_1={h1_u:.3e}, ||p-ph||={l2_p:.3e}")

    table = pd.DataFrame(rows)
    orders = {}
    if len(table) > 1:
        ratio = np.log(table["h"].iloc[0] / table["h"].iloc[-1])
        for column in ("velocity_l2", "velocity_h1", "pressure_l2"):
            orders[column] = float(
                np.log(table[column].iloc[0] / table[column].iloc[-1]) / ratio)
            table[f"{column}_order"] = np.concatenate([
                [np.nan],
                np.log(table[column].to_numpy()[:-1] / table[column].to_numpy()[1:])
                / np.log(table["h"].to_numpy()[:-1] / table["h"].to_numpy()[1:])])
    return MmsStudy(table=table, orders=orders)
