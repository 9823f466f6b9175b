"""Crank-Nicolson time stepping of the six-field mixed system.

With M the block-diagonal mass and K the coupling matrix, one step solves

    (M/dt + K/2) U^{n+1} = (M/dt - K/2) U^n + (F^n + F^{n+1}) / 2

using a sparse LU factorization computed once and reused every step.
"""
import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .assembly import (assemble_blocks, assemble_boundary_load, assemble_load,
                       normal_bc_values)
from .fespace import StateVector, interpolate_canonical, project_l2
from .material import PIM, energy

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class TimeGrid:
    T: float
    n_steps: int

    def __post_init__(self):
        if not (isinstance(self.n_steps, (int, np.integer)) and self.n_steps >= 0):
            raise ValueError(f"n_steps must be a nonnegative integer, got {self.n_steps!r}")
        if self.n_steps and not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T}")

    @property
    def dt(self):
        return self.T / self.n_steps if self.n_steps else 0.0

    def time(self, n):
        return n * self.dt

    @classmethod
    def from_dt(cls, T, dt):
        if not dt > 0:
            raise ValueError(f"time step must be positive, got {dt}")
        n = int(round(T / dt))
        if n < 1 or abs(n * dt - T) > 1e-9 * max(T, 1.0):
            raise ValueError(f"T={T} is not an integer multiple of dt={dt}")
        return cls(float(T), n)


class Forcing:
    """Volume sources f, g and boundary data p_D (natural), v_N (essential).

    Every callable has signature ``func(t, pts)``.
    """

    def __init__(self, f=None, g=None, p_D=None, dirichlet_edges=(), v_N=None,
                 neumann_edges=()):
        self.f = f
        self.g = g
        self.p_D = p_D
        self.dirichlet_edges = np.asarray(dirichlet_edges, dtype=np.int64)
        self.v_N = v_N
        self.neumann_edges = np.asarray(neumann_edges, dtype=np.int64)

    @property
    def is_zero(self):
        return self.f is None and self.g is None and self.p_D is None and self.v_N is None

    def load(self, spaces, t):
        """Right-hand side vector F(t) over all six blocks."""
        out = np.zeros(spaces.n_dofs)
        sv, sp_ = spaces.slices["v"], spaces.slices["p"]
        if self.f is not None:
            out[sv] += assemble_load(spaces.V, lambda x: self.f(t, x))
        if self.p_D is not None and self.dirichlet_edges.size:
            out[sv] += assemble_boundary_load(spaces.V, lambda x: self.p_D(t, x),
                                              self.dirichlet_edges)
        if self.g is not None:
            out[sp_] += assemble_load(spaces.Q, lambda x: self.g(t, x))
        return out

    def constrained(self, spaces, t):
        """(dofs, values) of essential normal-flux constraints at time t."""
        if self.neumann_edges.size == 0:
            return np.zeros(0, dtype=np.int64), np.zeros(0)
        vN = self.v_N if self.v_N is not None else (lambda t, x: np.zeros(x.shape[:-1]))
        return normal_bc_values(spaces.V, self.neumann_edges, lambda x: vN(t, x))


class CNSystem:
    """Factor-once Crank-Nicolson operator pair for fixed mesh, material, dt."""

    def __init__(self, blocks, dt, fixed_dofs=None, residual_tol=1e-10):
        if dt == 0:
            raise ValueError("dt must be nonzero")
        self.blocks = blocks
        self.spaces = blocks.spaces
        self.dt = float(dt)
        self.residual_tol = residual_tol
        M = blocks.mass()
        K = blocks.stiffness()
        if M.shape != K.shape:
            raise ValueError("mass and coupling blocks differ in shape")
        self.M, self.K = M, K
        self.A = (M / self.dt + 0.5 * K).tocsr()
        self.A_rhs = (M / self.dt - 0.5 * K).tocsr()
        n = self.A.shape[0]
        fixed = np.zeros(0, dtype=np.int64) if fixed_dofs is None else np.unique(fixed_dofs)
        self.fixed = fixed
        mask = np.ones(n, dtype=bool)
        mask[fixed] = False
        self.free = np.flatnonzero(mask)
        self._A_rows = self.A[self.free] if fixed.size else self.A
        A_ff = self._A_rows[:, self.free] if fixed.size else self.A
        self.A_fd = self._A_rows[:, fixed] if fixed.size else None
        try:
            self.lu = splu(A_ff.tocsc(), permc_spec="COLAMD")
        except RuntimeError as exc:
            raise SolverError(f"factorization failed: {exc}") from exc

    @property
    def n_dofs(self):
        return self.A.shape[0]

    def solve(self, rhs, fixed_values=None):
        """Solve A x = rhs with the constrained DOFs set to ``fixed_values``."""
        x = np.zeros(self.n_dofs)
        b = rhs[self.free]
        scale = np.linalg.norm(b)
        if self.fixed.size:
            xd = np.zeros(self.fixed.size) if fixed_values is None else np.asarray(fixed_values)
            x[self.fixed] = xd
            b = b - self.A_fd @ xd
            scale = max(scale, np.linalg.norm(b))
        x[self.free] = self.lu.solve(b)
        if self.residual_tol is not None:
            Ax = self._A_rows @ x
            res = Ax - rhs[self.free]
            scale = max(scale, np.linalg.norm(Ax), 1e-300)
            rel = np.linalg.norm(res) / scale
            if rel > self.residual_tol and np.linalg.norm(res) > 1e-280:
                raise SolverError(f"linear solve residual {rel:.3e} exceeds {self.residual_tol:.1e}")
        return x

    def step(self, U, load_n=None, load_np1=None, fixed_values=None):
        """Advance one step; ``U`` may be a StateVector or a flat array."""
        data = U.data if isinstance(U, StateVector) else np.asarray(U)
        rhs = self.A_rhs @ data
        if load_n is not None:
            rhs += 0.5 * load_n
        if load_np1 is not None:
            rhs += 0.5 * load_np1
        new = self.solve(rhs, fixed_values)
        return StateVector(self.spaces, new) if isinstance(U, StateVector) else new


def build_cn_system(blocks, dt, forcing=None, **kw):
    """CN system; essential normal-flux DOFs of ``forcing`` are eliminated."""
    fixed = None
    if forcing is not None and forcing.neumann_edges.size:
        fixed, _ = forcing.constrained(blocks.spaces, 0.0)
    return CNSystem(blocks, dt, fixed_dofs=fixed, **kw)


def initial_state(spaces, material, fields, zero_aux_on_pim=True):
    """Discrete initial data.

    ``fields`` maps field names to callables on physical points (missing
    fields start at zero).  v uses the canonical interpolant, the other
    fields L2 projections; auxiliary fields are zeroed on PIM cells.
    """
    state = StateVector(spaces)
    for name, func in fields.items():
        if func is None:
            continue
        space = spaces.spaces[name]
        if name == "v":
            vals = interpolate_canonical(space, func).coeffs
        else:
            vals = project_l2(space, func).coeffs
        state.data[spaces.slices[name]] = vals
    if zero_aux_on_pim:
        pim = material.region == PIM
        for name in ("u", "w", "q", "r"):
            blk = state.block(name).reshape(material.n_cells, -1)
            blk[pim] = 0.0
    return state


class EnergyObserver:
    """Records E0 at every time level."""

    def __init__(self, material, spaces):
        from .assembly import assemble_mass
        self.material = material
        self.mass_v = assemble_mass(spaces.V, material.rho_a)
        self.records = []

    def __call__(self, n, t, state):
        self.records.append((n, t, energy(state, self.material, self.mass_v)))

    @property
    def values(self):
        return np.array([r[2] for r in self.records])


class StateRecorder:
    """Keeps copies of the state at selected step indices (all if None)."""

    def __init__(self, steps=None):
        self.steps = None if steps is None else set(steps)
        self.records = []

    def __call__(self, n, t, state):
        if self.steps is None or n in self.steps:
            self.records.append((n, t, state.copy()))


def run(system, state, forcing=None, grid=None, observers=(), callback=None):
    """Advance ``state`` over ``grid``; observers are called at every level.

    Returns the final state.  ``callback(n, U_n, U_np1)`` sees consecutive
    states (used by post-processing).
    """
    if grid is None:
        raise ValueError("a TimeGrid is required")
    if grid.n_steps and abs(grid.dt - system.dt) > 1e-14 * abs(system.dt):
        raise SolverError(f"system factored for dt={system.dt}, grid has dt={grid.dt}")
    spaces = system.spaces
    forcing = forcing or Forcing()
    for obs in observers:
        obs(0, 0.0, state)
    if grid.n_steps == 0:
        return state
    zero = forcing.is_zero
    load_n = None if zero else forcing.load(spaces, grid.time(0))
    for n in range(grid.n_steps):
        t1 = grid.time(n + 1)
        load_np1 = None if zero else forcing.load(spaces, t1)
        fixed_vals = None
        if system.fixed.size:
            dofs, vals = forcing.constrained(spaces, t1)
            fixed_vals = np.empty(system.fixed.size)
            fixed_vals[np.searchsorted(system.fixed, dofs)] = vals
        new = system.step(state, load_n, load_np1, fixed_vals)
        if callback is not None:
            callback(n, state, new)
        state = new
        load_n = load_np1
        for obs in observers:
            obs(n + 1, t1, state)
    return state


def simulate(spaces, material, fields, grid, forcing=None, observers=()):
    """Assemble, factor and run in one call; returns (final_state, system)."""
    blocks = assemble_blocks(spaces, material)
    system = build_cn_system(blocks, grid.dt, forcing)
    state = initial_state(spaces, material, fields)
    if forcing is not None and system.fixed.size:
        dofs, vals = forcing.constrained(spaces, 0.0)
        state.data[dofs] = vals
    final = run(system, state, forcing, grid, observers)
    return final, system
