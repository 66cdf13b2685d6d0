"""
Testing `harness/exporters.py` (CSV, VTK and SVG artifacts).

Tests include:
- Trace CSV columns and rows.
- P2 subdivision covering each element with four triangles.
- VTK export of a state on the P2 nodes.
- SVG convergence plot (one line per run, no pyplot figure, empty input rejected).
- Summary CSV from dataclasses and mappings.
"""
import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose

from ahflow.exceptions import ConfigurationError
from ahflow.fem import BoundaryConditionSet, build_dofmap
from ahflow.harness.exporters import (TRACE_COLUMNS, export_svg_plot, export_vtk,
                                      p2_subdivision, write_summary_csv,
                                      write_trace_csv)
from ahflow.mesh import alfeld_split, build_unit_square_mesh
from ahflow.solvers import IterationRecord, IterationTrace, State, Status


def _trace(updates):
    records = [IterationRecord(0, np.nan, np.nan, np.nan, 0.0, None, 0.0)]
    records += [IterationRecord(k, u, u, u, 0.0, None, float(k))
                for k, u in enumerate(updates, start=1)]
    return IterationTrace(records, Status.MAX_ITERS)


@pytest.fixture
def dofmap():
    return build_dofmap(build_unit_square_mesh(2), "TH", BoundaryConditionSet.cavity())


def test_trace_csv(tmp_path):
    path = write_trace_csv(_trace([1.0, 0.1, 0.01]), "demo", tmp_path / "a" / "trace.csv")
    frame = pd.read_csv(path)
    assert list(frame.columns) == TRACE_COLUMNS
    assert len(frame) == 4
    assert_allclose(frame["update_l2"].to_numpy()[1:], [1.0, 0.1, 0.01])
    assert set(frame["run_id"]) == {"demo"}


def test_p2_subdivision(dofmap):
    cells = p2_subdivision(dofmap)
    assert cells.shape == (4 * dofmap.mesh.n_triangles, 3)
    corners = dofmap.nodes[cells]
    areas = 0.5 * np.cross(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0])
    assert np.all(areas > 0)
    assert_allclose(areas.sum(), 1.0, rtol=1e-14)


def test_export_vtk(tmp_path, dofmap):
    state = State(u=np.zeros(dofmap.n_velocity), p=np.zeros(dofmap.n_pressure))
    text = export_vtk(state, dofmap, tmp_path / "solution.vtk").read_text()
    assert "POINTS 25 double" in text
    assert "CELLS 32 128" in text
    assert "VECTORS velocity double" in text
    assert "SCALARS pressure double 1" in text


def test_export_vtk_sv_pressure(tmp_path):
    mesh = alfeld_split(build_unit_square_mesh(1))
    dofmap = build_dofmap(mesh, "SV", BoundaryConditionSet.cavity())
    state = State(u=np.zeros(dofmap.n_velocity), p=np.arange(dofmap.n_pressure, dtype=float))
    lines = export_vtk(state, dofmap, tmp_path / "sv.vtk").read_text().splitlines()
    start = lines.index("SCALARS pressure double 1") + 2
    pressure = np.array(lines[start:start + 24], dtype=float)
    assert_allclose(pressure[:4], 1.0)
    assert_allclose(pressure[4:8], 4.0)


def test_svg_plot(tmp_path):
    path = tmp_path / "plots" / "convergence.svg"
    fig = export_svg_plot({"m0": _trace([1.0, 0.5, 0.25]), "m5": [1.0, 0.1]}, path,
                          title="demo")
    assert len(fig.axes[0].get_lines()) == 2
    assert fig.axes[0].get_yscale() == "log"
    assert "<svg" in path.read_text()
    # created outside pyplot
    assert fig.canvas.manager is None


def test_svg_plot_rejects_empty(tmp_path):
    with pytest.raises(ConfigurationError):
        export_svg_plot({}, tmp_path / "empty.svg")


def test_summary_csv(tmp_path):
    path = write_summary_csv([{"run_id": "a", "iterations": 3},
                              {"run_id": "b", "iterations": 5}], tmp_path / "summary.csv")
    frame = pd.read_csv(path)
    assert list(frame["iterations"]) == [3, 5]


if __name__ == "__main__":
    pytest.main([__file__])
