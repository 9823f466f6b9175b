"""Manufactured solution, error norms and convergence studies.

The exact fields start from

    w = ((1 + sin t)(x^2 y + x y^2), cos(2t)(x + y + cos x)),   r = cos(3t) x y

and the remaining fields follow from the auxiliary equations with zero
right-hand side:

    u = w_t,  v = u_t + omega_rho^2 w,  q = r_t,  p = q_t + gamma q + omega_kappa^2 r,

while f and g are whatever makes the first two equations hold.
"""
import csv
import io
import time
from dataclasses import dataclass, field

import numpy as np

from .assembly import assemble_blocks
from .fespace import MixedSpaces
from .material import MaterialField
from .mesh import build_structured
from .postprocess import PressurePostprocessor
from .quadrature import quadrature
from .stepper import Forcing, TimeGrid, build_cn_system, initial_state, run

UNIT_SQUARE = (0.0, 1.0, 0.0, 1.0)
MMS_SLAB = (3.0 / 8.0, 5.0 / 8.0, 0.0, 1.0)


class ExactSolution:
    """Closed-form fields; each method takes (t, pts) with pts (..., 2)."""

    def __init__(self, omega_rho=1.0, omega_kappa=1.0, gamma=0.0, rho_a=1.0, kappa_a=1.0,
                 Omega_rho=1.0, Omega_kappa=1.0, box=MMS_SLAB):
        self.omega_rho = float(omega_rho)
        self.omega_kappa = float(omega_kappa)
        self.gamma = float(gamma)
        self.rho_a = float(rho_a)
        self.kappa_a = float(kappa_a)
        self.Omega_rho = float(Omega_rho)
        self.Omega_kappa = float(Omega_kappa)
        self.box = box

    def _inside(self, x, y):
        x0, x1, y0, y1 = self.box
        return (x > x0) & (x < x1) & (y > y0) & (y < y1)

    def rho_u(self, pts):
        x, y = pts[..., 0], pts[..., 1]
        return np.where(self._inside(x, y), self.rho_a * self.Omega_rho**2, 0.0)

    def rho_q(self, pts):
        x, y = pts[..., 0], pts[..., 1]
        return np.where(self._inside(x, y), self.Omega_kappa**2 / self.kappa_a, 0.0)

    @staticmethod
    def _S(x, y):
        return x * x * y + x * y * y

    @staticmethod
    def _C(x, y):
        return x + y + np.cos(x)

    def w(self, t, pts):
        x, y = pts[..., 0], pts[..., 1]
        return np.stack([(1 + np.sin(t)) * self._S(x, y), np.cos(2 * t) * self._C(x, y)], -1)

    def u(self, t, pts):
        x, y = pts[..., 0], pts[..., 1]
        return np.stack([np.cos(t) * self._S(x, y), -2 * np.sin(2 * t) * self._C(x, y)], -1)

    def v(self, t, pts):
        x, y = pts[..., 0], pts[..., 1]
        o2 = self.omega_rho**2
        a = -np.sin(t) + o2 * (1 + np.sin(t))
        b = (o2 - 4.0) * np.cos(2 * t)
        return np.stack([a * self._S(x, y), b * self._C(x, y)], -1)

    def v_t(self, t, pts):
        x, y = pts[..., 0], pts[..., 1]
        o2 = self.omega_rho**2
        a = (o2 - 1.0) * np.cos(t)
        b = -2.0 * (o2 - 4.0) * np.sin(2 * t)
        return np.stack([a * self._S(x, y), b * self._C(x, y)], -1)

    def div_v(self, t, pts):
        x, y = pts[..., 0], pts[..., 1]
        o2 = self.omega_rho**2
        a = -np.sin(t) + o2 * (1 + np.sin(t))
        b = (o2 - 4.0) * np.cos(2 * t)
        return a * (2 * x * y + y * y) + b

    def r(self, t, pts):
        return np.cos(3 * t) * pts[..., 0] * pts[..., 1]

    def q(self, t, pts):
        return -3 * np.sin(3 * t) * pts[..., 0] * pts[..., 1]

    def _p_coef(self, t):
        return (self.omega_kappa**2 - 9.0) * np.cos(3 * t) - 3.0 * self.gamma * np.sin(3 * t)

    def _p_t_coef(self, t):
        return -3.0 * (self.omega_kappa**2 - 9.0) * np.sin(3 * t) - 9.0 * self.gamma * np.cos(3 * t)

    def p(self, t, pts):
        return self._p_coef(t) * pts[..., 0] * pts[..., 1]

    def p_t(self, t, pts):
        return self._p_t_coef(t) * pts[..., 0] * pts[..., 1]

    def grad_p(self, t, pts):
        a = self._p_coef(t)
        return np.stack([a * pts[..., 1], a * pts[..., 0]], -1)

    def f(self, t, pts):
        return (self.rho_a * self.v_t(t, pts) + self.grad_p(t, pts)
                + self.rho_u(pts)[..., None] * self.u(t, pts))

    def g(self, t, pts):
        return self.p_t(t, pts) / self.kappa_a + self.div_v(t, pts) + self.rho_q(pts) * self.q(t, pts)

    def field(self, name):
        return getattr(self, name)


def make_exact(omega_rho=1.0, omega_kappa=1.0, gamma=0.0, box=MMS_SLAB, **kw):
    return ExactSolution(omega_rho=omega_rho, omega_kappa=omega_kappa, gamma=gamma, box=box, **kw)


def mms_material(mesh, exact):
    return MaterialField.from_regions(
        mesh, {"NIM": {"box": exact.box, "Omega_rho": exact.Omega_rho,
                       "Omega_kappa": exact.Omega_kappa}},
        rho_a=exact.rho_a, kappa_a=exact.kappa_a,
        omega_rho=exact.omega_rho, omega_kappa=exact.omega_kappa, gamma=exact.gamma)


def weighted_error(space, coeffs, exact, weight=None, quad_degree=10):
    """sqrt(int weight |exact - discrete|^2) with per-cell weights (default 1)."""
    mesh = space.mesh
    q = quadrature(quad_degree)
    x = mesh.map_points(q.points)
    diff = np.asarray(exact(x)) - space.cell_values(coeffs, q.points)
    sq = diff**2 if diff.ndim == 2 else np.sum(diff**2, axis=-1)
    per_cell = mesh.jacobians()[1] * (sq @ q.weights)
    if weight is not None:
        per_cell = per_cell * np.asarray(weight)
    return float(np.sqrt(per_cell.sum()))


def rates(errors):
    """log2 ratios between consecutive halved levels; None for the first."""
    out = [None]
    for a, b in zip(errors[:-1], errors[1:]):
        out.append(float(np.log2(a / b)) if a > 0 and b > 0 else float("nan"))
    return out


ERROR_FIELDS = ("v", "u", "w", "p", "p*", "q", "r")


@dataclass
class LevelResult:
    N: int
    h: float
    dt: float
    errors: dict
    seconds: float


@dataclass
class ConvergenceReport:
    pairing: str
    dt_policy: str
    T: float
    levels: list = field(default_factory=list)

    def errors(self, name):
        return [lv.errors[name] for lv in self.levels]

    def rates(self, name):
        return rates(self.errors(name))

    def final_rate(self, name):
        return self.rates(name)[-1]

    def to_csv(self):
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["N", "h", "dt"] + [c for f in ERROR_FIELDS for c in (f"err_{f}", f"rate_{f}")])
        table = {f: self.rates(f) for f in ERROR_FIELDS}
        for i, lv in enumerate(self.levels):
            row = [lv.N, f"{lv.h:.6e}", f"{lv.dt:.6e}"]
            for f in ERROR_FIELDS:
                r = table[f][i]
                row += [f"{lv.errors[f]:.6e}", "" if r is None else f"{r:.4f}"]
            wr.writerow(row)
        return buf.getvalue()

    def to_table(self):
        """Aligned text table: errors and rates per level, two field groups."""
        lines = [f"pairing={self.pairing} dt={self.dt_policy} T={self.T}"]
        for group in (("v", "u", "w", "p"), ("p*", "q", "r")):
            head = f"{'1/h':>5}" + "".join(f"{'|' + g + '-' + g + '_h|':>12}{'rate':>7}" for g in group)
            lines.append(head)
            for i, lv in enumerate(self.levels):
                row = f"{lv.N:>5}"
                for g in group:
                    r = self.rates(g)[i]
                    row += f"{lv.errors[g]:>12.2e}" + (f"{'--':>7}" if r is None else f"{r:>7.2f}")
                lines.append(row)
        return "\n".join(lines)


def run_mms_level(pairing, N, dt_policy="h", T=0.25, exact=None):
    """Solve the manufactured problem on one mesh; returns a LevelResult."""
    exact = exact or make_exact()
    if N % 8:
        raise ValueError(f"N={N}: the strip interfaces at x = 3/8, 5/8 need N divisible by 8")
    t0 = time.perf_counter()
    mesh = build_structured(UNIT_SQUARE, N).classify_boundary([("D", lambda x, y: True)])
    spaces = MixedSpaces(mesh, pairing)
    material = mms_material(mesh, exact)
    h = 1.0 / N
    dt = {"h": h, "h2": h * h}[dt_policy]
    grid = TimeGrid.from_dt(T, dt)
    forcing = Forcing(f=exact.f, g=exact.g, p_D=exact.p, dirichlet_edges=mesh.edges_with_label("D"))
    blocks = assemble_blocks(spaces, material)
    system = build_cn_system(blocks, grid.dt, forcing)
    fields = {name: (lambda x, name=name: exact.field(name)(0.0, x)) for name in ("v", "p", "u", "w", "q", "r")}
    state = initial_state(spaces, material, fields, zero_aux_on_pim=False)

    post = PressurePostprocessor(spaces, material)
    last = {}

    def keep_last(n, U_n, U_np1):
        if n == grid.n_steps - 1:
            last["pair"] = (U_n, U_np1)

    final = run(system, state, forcing, grid, callback=keep_last)
    t_n = grid.time(grid.n_steps - 1)
    t_np1 = grid.time(grid.n_steps)
    f_half = lambda x: 0.5 * (exact.f(t_n, x) + exact.f(t_np1, x))  # noqa: E731
    ps = post(*last["pair"], grid.dt, f_half, t_half=T - 0.5 * grid.dt)

    errors = {}
    for name in ("v", "u", "w", "p", "q", "r"):
        errors[name] = weighted_error(spaces.spaces[name], final.block(name),
                                      lambda x, name=name: exact.field(name)(T, x))
    errors["p*"] = weighted_error(ps.p_star.space, ps.p_star.coeffs,
                                  lambda x: exact.p(ps.time, x))
    return LevelResult(N, h, grid.dt, errors, time.perf_counter() - t0)


def convergence_study(pairing, levels=(8, 16, 32, 64), dt_policy=None, T=0.25, exact=None,
                      progress=None):
    """Error ladder over structured meshes; dt = h (k = 0) or h^2 (k = 1) by default."""
    if dt_policy is None:
        dt_policy = "h" if pairing.lower() in ("bdm1", "rtn0") else "h2"
    report = ConvergenceReport(pairing.lower(), dt_policy, T)
    for N in levels:
        lv = run_mms_level(pairing, N, dt_policy, T, exact)
        report.levels.append(lv)
        if progress is not None:
            progress(lv)
    return report
