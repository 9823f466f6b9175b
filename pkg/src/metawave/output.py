"""Field snapshots and their legacy-VTK / CSV writers.

Floats are written with ``repr`` (shortest round-trip form), so identical
inputs give identical bytes and CSV files parse back exactly.
"""
import csv
import os
from dataclasses import dataclass

import numpy as np

CENTROID_REF = np.array([[1.0 / 3.0, 1.0 / 3.0]])


@dataclass
class FieldSnapshot:
    time: float
    mesh: object
    pressure: np.ndarray  # cell means, (n_cells,)
    velocity: np.ndarray = None  # values at centroids, (n_cells, 2)

    def __post_init__(self):
        self.pressure = np.asarray(self.pressure, dtype=float)
        if self.pressure.shape != (self.mesh.n_cells,):
            raise ValueError("pressure must hold one value per cell")
        if self.velocity is not None:
            self.velocity = np.asarray(self.velocity, dtype=float)
            if self.velocity.shape != (self.mesh.n_cells, 2):
                raise ValueError("velocity must be (n_cells, 2)")


def snapshot_from_state(state, t):
    """Cell-mean pressure and centroid velocity of a StateVector."""
    spaces = state.spaces
    n = spaces.mesh.n_cells
    p = state.p.reshape(n, -1)[:, 0]  # DG basis: phi_0 = 1, the rest has zero mean
    vel = spaces.V.cell_values(state.v, CENTROID_REF)[:, 0, :]
    return FieldSnapshot(float(t), spaces.mesh, p.copy(), vel)


def _f(x):
    return repr(float(x))


def format_vtk(snap, title="pressure snapshot"):
    mesh = snap.mesh
    lines = ["# vtk DataFile Version 3.0", f"{title} t={_f(snap.time)}", "ASCII",
             "DATASET UNSTRUCTURED_GRID", f"POINTS {mesh.n_vertices} double"]
    lines += [f"{_f(x)} {_f(y)} 0.0" for x, y in mesh.vertices]
    nc = mesh.n_cells
    lines.append(f"CELLS {nc} {4 * nc}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.cells]
    lines.append(f"CELL_TYPES {nc}")
    lines += ["5"] * nc
    lines += [f"CELL_DATA {nc}", "SCALARS pressure double 1", "LOOKUP_TABLE default"]
    lines += [_f(v) for v in snap.pressure]
    if snap.velocity is not None:
        lines.append("VECTORS velocity double")
        lines += [f"{_f(a)} {_f(b)} 0.0" for a, b in snap.velocity]
    return "\n".join(lines) + "\n"


def format_csv(snap):
    cen = snap.mesh.centroids()
    rows = [["cell", "x", "y", "p"] + (["vx", "vy"] if snap.velocity is not None else [])]
    for i in range(snap.mesh.n_cells):
        row = [str(i), _f(cen[i, 0]), _f(cen[i, 1]), _f(snap.pressure[i])]
        if snap.velocity is not None:
            row += [_f(snap.velocity[i, 0]), _f(snap.velocity[i, 1])]
        rows.append(row)
    return "".join(",".join(r) + "\n" for r in rows)


def write_snapshot(snap, path, fmt=None):
    """Write ``snap`` to ``path``; format from ``fmt`` or the file extension."""
    fmt = fmt or os.path.splitext(path)[1].lstrip(".").lower()
    if fmt == "vtk":
        text = format_vtk(snap)
    elif fmt == "csv":
        text = format_csv(snap)
    else:
        raise ValueError(f"unknown snapshot format {fmt!r}; use 'vtk' or 'csv'")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


def read_snapshot_csv(path):
    """Parse a CSV snapshot back into a dict of numpy arrays."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    out = {}
    for j, name in enumerate(header):
        col = [r[j] for r in rows]
        out[name] = np.array(col, dtype=int if name == "cell" else float)
    return out


def write_trace_csv(path, header, rows):
    """Generic CSV writer for time traces and tables."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(v if isinstance(v, str) else _f(v) if isinstance(v, float) else str(v)
                              for v in row) + "\n")
    return path
