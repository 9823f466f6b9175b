"""Scenario runs driven by a RunConfig, probes, and the slab experiments.

The slab experiments place a resonant layer inside a square and drive it
with a boundary plane wave.  :func:`phase_gradient_test` decides whether
the wave propagates backwards inside the layer: it takes the temporal
Fourier coefficient of p at the source frequency along a horizontal line
and compares the sign of its phase slope in the layer with that in the
region to its left.
"""
import logging
import os
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .assembly import assemble_blocks
from .config import SIDES, config_from_dict, make_source
from .fespace import MixedSpaces
from .material import MaterialField, validate
from .mesh import build_structured
from .output import snapshot_from_state, write_snapshot, write_trace_csv
from .stepper import EnergyObserver, Forcing, TimeGrid, build_cn_system, initial_state, run

log = logging.getLogger(__name__)


def side_masks(domain, pts, tol=None):
    """Boolean masks (one per side) of points lying on each side of the box."""
    x0, x1, y0, y1 = domain
    tol = 1e-9 * max(x1 - x0, y1 - y0) if tol is None else tol
    x, y = pts[..., 0], pts[..., 1]
    return {
        "left": np.abs(x - x0) <= tol,
        "right": np.abs(x - x1) <= tol,
        "bottom": np.abs(y - y0) <= tol,
        "top": np.abs(y - y1) <= tol,
    }


def _combined(domain, parts):
    """One boundary callable that dispatches on the side of each point."""
    funcs = [(p.sides, make_source(p.source)) for p in parts]

    def func(t, pts):
        masks = side_masks(domain, pts)
        out = np.zeros(pts.shape[:-1])
        for sides, f in funcs:
            sel = np.zeros(pts.shape[:-1], dtype=bool)
            for s in sides:
                sel |= masks[s]
            if sel.any():
                out = np.where(sel, f(t, pts), out)
        return out
    return func


@dataclass
class Problem:
    config: object
    mesh: object
    spaces: object
    material: object
    forcing: object
    grid: object


def build_problem(cfg):
    """Mesh, spaces, material, boundary forcing and time grid for a config."""
    domain = cfg.domain
    mesh = build_structured(domain, cfg.N)
    tol = 1e-9 * max(domain[1] - domain[0], domain[3] - domain[2])
    preds = {
        "left": lambda x, y: abs(x - domain[0]) <= tol,
        "right": lambda x, y: abs(x - domain[1]) <= tol,
        "bottom": lambda x, y: abs(y - domain[2]) <= tol,
        "top": lambda x, y: abs(y - domain[3]) <= tol,
    }
    mesh = mesh.classify_boundary([(s, preds[s]) for s in SIDES])
    spaces = MixedSpaces(mesh, cfg.pairing)
    m = cfg.material
    material = MaterialField.from_regions(
        mesh, m["regions"], rho_a=m["rho_a"], kappa_a=m["kappa_a"],
        omega_rho=m["omega_rho"], omega_kappa=m["omega_kappa"], gamma=m["gamma"])
    problems = validate(material)
    if problems:
        raise ValueError("invalid material: " + "; ".join(v.message for v in problems))

    def edges_of(kind):
        parts = [p for p in cfg.boundary if p.type == kind]
        edges = [mesh.edges_with_label(s) for p in parts for s in p.sides]
        edges = np.concatenate(edges) if edges else np.zeros(0, dtype=np.int64)
        return parts, np.sort(edges)

    d_parts, d_edges = edges_of("dirichlet")
    f_parts, f_edges = edges_of("flux")
    forcing = Forcing(
        p_D=_combined(domain, d_parts) if d_parts else None, dirichlet_edges=d_edges,
        v_N=_combined(domain, f_parts) if f_parts else None, neumann_edges=f_edges)
    if all(p.source.get("name") == "zero" for p in d_parts) and not f_parts:
        forcing.p_D = None
    return Problem(cfg, mesh, spaces, material, forcing, TimeGrid.from_dt(cfg.T, cfg.dt))


def probe_matrix(space, points):
    """Sparse P with (P @ coeffs)[j] = value of a scalar DG field at points[j]."""
    mesh = space.mesh
    J, det, x0 = mesh.jacobians()
    rows, cols, vals = [], [], []
    for j, pt in enumerate(np.asarray(points, dtype=float)):
        c = mesh.find_cell(pt, tol=1e-10)
        if c < 0:
            raise ValueError(f"probe point {pt.tolist()} lies outside the mesh")
        ref = np.linalg.solve(J[c], pt - x0[c])
        phi = space.ref.eval(ref[None, :])[0]
        rows += [j] * phi.size
        cols += space.cell_dofs[c].tolist()
        vals += phi.tolist()
    return sp.csr_matrix((vals, (rows, cols)), shape=(len(points), space.n_dofs))


def line_points(line):
    n = int(line.get("n", 101))
    xs = np.linspace(line["x0"], line["x1"], n)
    return np.column_stack([xs, np.full(n, float(line["y"]))])


@dataclass
class RunResult:
    config: object
    problem: object
    final: object
    snapshots: list = field(default_factory=list)
    energy: np.ndarray = None
    times: np.ndarray = None
    probes: np.ndarray = None  # (n_levels, n_probes)
    lines: list = field(default_factory=list)  # [(points, (n_levels, n_pts))]
    seconds: float = 0.0
    files: list = field(default_factory=list)


def run_config(cfg, out_dir=None, progress=None):
    """Run a configured scenario; optionally write snapshots/traces to ``out_dir``."""
    if isinstance(cfg, dict):
        cfg = config_from_dict(cfg)
    t0 = time.perf_counter()
    prob = build_problem(cfg)
    spaces, grid = prob.spaces, prob.grid
    system = build_cn_system(assemble_blocks(spaces, prob.material), grid.dt, prob.forcing)
    state = initial_state(spaces, prob.material, {})
    out = cfg.output
    snap_steps = set(out["snapshots"])
    probe_P = probe_matrix(spaces.Q, out["probes"]) if out["probes"] else None
    line_P = [(line_points(ln), probe_matrix(spaces.Q, line_points(ln))) for ln in out["probe_lines"]]
    res = RunResult(cfg, prob, None)
    times, probe_vals, line_vals = [], [], [[] for _ in line_P]
    energy_obs = EnergyObserver(prob.material, spaces) if out["energy"] else None

    def observe(n, t, U):
        times.append(t)
        p = U.p
        if probe_P is not None:
            probe_vals.append(probe_P @ p)
        for k, (_, P) in enumerate(line_P):
            line_vals[k].append(P @ p)
        if n in snap_steps:
            res.snapshots.append(snapshot_from_state(U, t))
        if energy_obs is not None:
            energy_obs(n, t, U)
        if progress is not None and n % max(1, grid.n_steps // 10) == 0:
            progress(n, t)

    res.final = run(system, state, prob.forcing, grid, observers=[observe])
    res.times = np.array(times)
    if probe_P is not None:
        res.probes = np.array(probe_vals)
    res.lines = [(pts, np.array(v)) for (pts, _), v in zip(line_P, line_vals)]
    if energy_obs is not None:
        res.energy = energy_obs.values
    res.seconds = time.perf_counter() - t0
    if out_dir is not None:
        res.files = write_outputs(res, out_dir)
    return res


def write_outputs(res, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    cfg = res.config
    files = []
    for snap in res.snapshots:
        n = int(round(snap.time / cfg.dt))
        for fmt in cfg.output["formats"]:
            path = os.path.join(out_dir, f"{cfg.name}_step{n:06d}.{fmt}")
            files.append(write_snapshot(snap, path, fmt))
    if res.energy is not None:
        path = os.path.join(out_dir, f"{cfg.name}_energy.csv")
        files.append(write_trace_csv(path, ["t", "E0"], zip(res.times.tolist(), res.energy.tolist())))
    if res.probes is not None:
        path = os.path.join(out_dir, f"{cfg.name}_probes.csv")
        header = ["t"] + [f"p{j}" for j in range(res.probes.shape[1])]
        rows = [[t] + list(map(float, row)) for t, row in zip(res.times.tolist(), res.probes)]
        files.append(write_trace_csv(path, header, rows))
    return files


# -- the slab experiments ------------------------------------------------------

SLAB_LEFT = (0.1, 0.55)
SLAB_LAYER = (0.62, 0.78)


def slab_source_omega(mu_f):
    """Angular frequency of the corner_plane source."""
    return 10.0 * np.pi * float(mu_f)


def slab_config(mu_f, N=50, dt=0.002, T=0.4, pairing="rtn1", probe_y=(0.5,), kappa_a=50.0):
    """Resonant layer [0.6, 0.8] x [0, 2] driven from the bottom-left corner.

    kappa_a = 50 (with rho_a = 1) gives sound speed 10/sqrt(2), the speed at
    which the boundary data is an exact plane wave of the background medium.
    """
    return {
        "name": f"slab_mu{mu_f:g}",
        "domain": [0.0, 2.0, 0.0, 2.0],
        "N": N,
        "pairing": pairing,
        "T": T,
        "dt": dt,
        "material": {
            "rho_a": 1.0, "kappa_a": float(kappa_a), "omega_rho": 40.0, "omega_kappa": 40.0, "gamma": 0.0,
            "regions": {"NIM": {"box": [0.6, 0.8, 0.0, 2.0], "Omega_rho": 80.0, "Omega_kappa": 80.0}},
        },
        "boundary": [{"sides": list(SIDES), "type": "dirichlet",
                      "source": {"name": "corner_plane", "mu_f": float(mu_f)}}],
        "output": {"snapshots": [0.2, 0.4], "formats": ["vtk", "csv"],
                   "probe_lines": [{"y": y, "x0": 0.0, "x1": 1.2, "n": 241} for y in probe_y],
                   "energy": False},
    }


def left_source_config(N=50, dt=0.002, T=0.48, pairing="rtn1", kappa_a=50.0):
    """Resonant layer [0.6, 1] x [0, 2] driven from the left side only."""
    return {
        "name": "left_source",
        "domain": [0.0, 2.0, 0.0, 2.0],
        "N": N,
        "pairing": pairing,
        "T": T,
        "dt": dt,
        "material": {
            "rho_a": 1.0, "kappa_a": float(kappa_a), "omega_rho": 80.0, "omega_kappa": 80.0, "gamma": 0.0,
            "regions": {"NIM": {"box": [0.6, 1.0, 0.0, 2.0], "Omega_rho": 80.0, "Omega_kappa": 80.0}},
        },
        "boundary": [
            {"sides": ["left"], "type": "dirichlet", "source": {"name": "left_gaussian"}},
            {"sides": ["right", "bottom", "top"], "type": "dirichlet", "source": {"name": "zero"}},
        ],
        "output": {"snapshots": [0.06, 0.16, 0.36, 0.48], "formats": ["vtk", "csv"]},
    }


@dataclass
class PhaseTest:
    slope_left: float
    slope_layer: float
    amp_left: float
    amp_layer: float

    @property
    def reversed(self):
        return bool(np.sign(self.slope_left) == -np.sign(self.slope_layer) != 0)


def phase_slopes(times, values, xs, omega, window):
    """Temporal Fourier coefficient at ``omega`` over ``window`` and its phase slope.

    Returns (coefficients, fitted slope of unwrapped phase in x).
    """
    times = np.asarray(times)
    sel = (times >= window[0] - 1e-12) & (times <= window[1] + 1e-12)
    c = np.exp(1j * omega * times[sel]) @ values[sel]
    phase = np.unwrap(np.angle(c))
    slope = np.polyfit(xs, phase, 1)[0] if len(xs) > 1 else 0.0
    return c, float(slope)


def phase_gradient_test(times, values, xs, omega, left, layer, window):
    """Compare phase slopes of p along a horizontal line in two x-intervals."""
    xs = np.asarray(xs)
    out = []
    for lo, hi in (left, layer):
        m = (xs > lo) & (xs < hi)
        c, slope = phase_slopes(times, values[:, m], xs[m], omega, window)
        out.append((slope, float(np.mean(np.abs(c)))))
    return PhaseTest(out[0][0], out[1][0], out[0][1], out[1][1])


def slab_phase_test(result, mu_f, window=(0.2, 0.4), line=0):
    """Phase-gradient test on a finished slab run (left region vs layer)."""
    pts, vals = result.lines[line]
    return phase_gradient_test(result.times, vals, pts[:, 0], slab_source_omega(mu_f),
                               SLAB_LEFT, SLAB_LAYER, window)
