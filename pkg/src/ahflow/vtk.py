"""
Legacy ASCII VTK writer.

Writes triangulations as `UNSTRUCTURED_GRID` datasets (VTK file format
version 2.0) with optional point vector fields and cell scalar fields, which is
what external viewers need to draw streamlines and pressure contours.
"""
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np
from loguru import logger

VTK_TRIANGLE = 5


def write_unstructured_grid(
        path: Union[str, Path],
        points: np.ndarray,
        cells: np.ndarray,
        point_vectors: Optional[Dict[str, np.ndarray]] = None,
        cell_scalars: Optional[Dict[str, np.ndarray]] = None,
        title: str = "ahflow output") -> Path:
    """
    Write a triangle grid to a legacy ASCII VTK file.

    Args:
        path: Destination file. Parent directories are created.
        points: Array of shape (N, 2) with planar coordinates.
        cells: Array of shape (C, 3) with vertex indices of each triangle.
        point_vectors: Named (N, 2) planar vector fields.
        cell_scalars: Named (C,) scalar fields.
        title: Header line (single line, truncated to 255 characters).

    Returns:
        Path: The written file.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    points = np.asarray(points, dtype=float)
    cells = np.asarray(cells, dtype=np.int64)
    n_points, n_cells = len(points), len(cells)

    with open(path, "w", encoding="ascii") as f:
        f.write("# vtk DataFile Version 2.0\n")
        f.write(title.replace("\n", " ")[:255] + "\n")
        f.write("ASCII\n")
        f.write("DATASET UNSTRUCTURED_GRID\n")
        f.write(f"POINTS {n_points} double\n")
        np.savetxt(f, np.column_stack([points, np.zeros(n_points)]),
                   fmt="%.16e")
        f.write(f"CELLS {n_cells} {4 * n_cells}\n")
        np.savetxt(f, np.column_stack([np.full(n_cells, 3), cells]), fmt="%d")
        f.write(f"CELL_TYPES {n_cells}\n")
        np.savetxt(f, np.full(n_cells, VTK_TRIANGLE), fmt="%d")

        if point_vectors:
            f.write(f"POINT_DATA {n_points}\n")
            for name, values in point_vectors.items():
                values = np.asarray(values, dtype=float).reshape(n_points, 2)
                f.write(f"VECTORS {name} double\n")
                np.savetxt(f, np.column_stack([values, np.zeros(n_points)]),
                           fmt="%.16e")

        if cell_scalars:
            f.write(f"CELL_DATA {n_cells}\n")
            for name, values in cell_scalars.items():
                values = np.asarray(values, dtype=float).reshape(n_cells)
                f.write(f"SCALARS {name} double 1\n")
                f.write("LOOKUP_TABLE default\n")
                np.savetxt(f, values, fmt="%.16e")

    logger.debug(f"Wrote VTK grid with {n_points} points, {n_cells} cells "
                 f"to {path}")
    return path
