"""
Exporters Module

- write_trace_csv: Iteration trace as CSV (run_id,iter,update_l2,div_l2,theta,wall_ms,status).
- export_vtk: Velocity and pressure of a state as a legacy VTK grid.
- export_svg_plot: Semilog convergence plot, one line per run.
- write_summary_csv: One row per run summary.
"""
from dataclasses import asdict, is_dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence, Union

import numpy as np
import pandas as pd
from loguru import logger
from matplotlib.figure import Figure

from ahflow.exceptions import ConfigurationError
from ahflow.fem import DofMap
from ahflow.solvers import IterationTrace, State
from ahflow.vtk import write_unstructured_grid

TRACE_COLUMNS = ["run_id", "iter", "update_l2", "div_l2", "theta", "wall_ms", "status"]


def write_trace_csv(trace: IterationTrace, run_id: str, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    trace.to_frame(run_id)[TRACE_COLUMNS].to_csv(path, index=False)
    return path


def p2_subdivision(dofmap: DofMap) -> np.ndarray:
    """
    Split every triangle into four linear triangles through its edge midpoints,
    numbered like the scalar P2 nodes.
    """
    v0, v1, v2, m12, m20, m01 = dofmap.scalar_dofs.T
    cells = np.stack([np.column_stack([v0, m01, m20]),
                      np.column_stack([m01, v1, m12]),
                      np.column_stack([m20, m12, v2]),
                      np.column_stack([m01, m12, m20])], axis=1)
    return cells.reshape(-1, 3)


def export_vtk(state: State, dofmap: DofMap, path: Union[str, Path]) -> Path:
    """
    Write the velocity at every P2 node (vertices and edge midpoints) and the
    pressure at each macro triangle centroid, repeated over its four
    sub-triangles.
    """
    n = dofmap.n_scalar
    velocity = np.column_stack([state.u[:n], state.u[n:]])
    pressure = np.repeat(state.p[dofmap.pressure_dofs].mean(axis=1), 4)
    return write_unstructured_grid(
        path, dofmap.nodes, p2_subdivision(dofmap),
        point_vectors={"velocity": velocity},
        cell_scalars={"pressure": pressure},
        title=f"ahflow {dofmap.pair.value} solution")


def _update_series(trace: Union[IterationTrace, Sequence[float]]) -> np.ndarray:
    if isinstance(trace, IterationTrace):
        return np.array([r.update_l2 for r in trace.records[1:]])
    return np.asarray(trace, dtype=float)


def export_svg_plot(traces: Mapping[str, Union[IterationTrace, Sequence[float]]],
                    path: Union[str, Path], title: str = ""):
    """
    Plot iteration against ||u_k - u_{k-1}|| on a log scale.

    Args:
        traces: Run identifier -> trace (or update norm sequence).
        path: Destination SVG file.
        title: Optional axes title.

    Returns:
        matplotlib.figure.Figure: The plotted figure (already saved).

    Raises:
        ConfigurationError: No traces given.
    """
    if not traces:
        raise ConfigurationError("Cannot plot an empty set of traces.")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    fig = Figure(figsize=(6.4, 4.8))
    ax = fig.subplots()
    for run_id, trace in traces.items():
        series = _update_series(trace)
        ax.semilogy(np.arange(1, len(series) + 1), series, label=run_id, lw=1)
    ax.set_xlabel("iteration")
    ax.set_ylabel(r"$\|u_k - u_{k-1}\|$")
    if title:
        ax.set_title(title)
    ax.legend(fontsize="x-small")
    fig.savefig(path, format="svg", bbox_inches="tight")
    logger.debug(f"Wrote convergence plot of {len(traces)} runs to {path}")
    return fig


def write_summary_csv(summaries: Iterable, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = [asdict(s) if is_dataclass(s) else dict(s) for s in summaries]
    pd.DataFrame(rows).to_csv(path, index=False)
    return path
