"""Structural checks of the discrete scheme: energy, zero data, PIM independence.

All audits run on the unit square with a resonant strip in the middle and
p = 0 imposed weakly on the whole boundary (so the boundary load vanishes).
"""
from dataclasses import dataclass

import numpy as np

from .assembly import assemble_blocks
from .fespace import MixedSpaces, StateVector
from .material import MaterialField
from .mesh import unit_square
from .stepper import EnergyObserver, TimeGrid, build_cn_system, run

AUDIT_STRIP = (0.25, 0.75, 0.0, 1.0)


def audit_material(mesh, gamma=0.0):
    """Piecewise-constant coefficients with a NIM strip and varying rho_a, kappa_a."""
    return MaterialField.from_regions(
        mesh, {"NIM": {"box": AUDIT_STRIP, "Omega_rho": 1.5, "Omega_kappa": 2.0,
                       "rho_a": 2.0, "kappa_a": 0.5}},
        rho_a=1.0, kappa_a=1.0, omega_rho=1.3, omega_kappa=0.7, gamma=gamma)


def random_state(spaces, material, seed=0, zero_aux_on_pim=True):
    """Random coefficients in every block; auxiliary fields vanish on PIM cells."""
    rng = np.random.default_rng(seed)
    U = StateVector(spaces, rng.standard_normal(spaces.n_dofs))
    if zero_aux_on_pim:
        pim = material.region == "PIM"
        for name in ("u", "w", "q", "r"):
            U.block(name).reshape(material.n_cells, -1)[pim] = 0.0
    return U


@dataclass
class EnergyAudit:
    pairing: str
    gamma: float
    dt: float
    energy: np.ndarray

    @property
    def max_relative_drift(self):
        return float(np.max(np.abs(self.energy - self.energy[0])) / self.energy[0])

    @property
    def max_relative_increase(self):
        e = self.energy
        return float(np.max((e[1:] - e[:-1]) / e[:-1])) if e.size > 1 else 0.0


def energy_audit(pairing, N=16, n_steps=200, dt=0.01, gamma=0.0, seed=0):
    """E0 trace for random admissible data with zero sources."""
    mesh = unit_square(N)
    spaces = MixedSpaces(mesh, pairing)
    material = audit_material(mesh, gamma)
    system = build_cn_system(assemble_blocks(spaces, material), dt)
    obs = EnergyObserver(material, spaces)
    run(system, random_state(spaces, material, seed), grid=TimeGrid(n_steps * dt, n_steps),
        observers=[obs])
    return EnergyAudit(pairing, gamma, dt, obs.values)


def zero_data_step(pairing, N=8, dt=0.01):
    """Per-block max-norm of U^1 from U^0 = 0 with no sources."""
    mesh = unit_square(N)
    spaces = MixedSpaces(mesh, pairing)
    material = audit_material(mesh)
    system = build_cn_system(assemble_blocks(spaces, material), dt)
    U1 = system.step(StateVector(spaces))
    return {name: float(np.max(np.abs(U1.block(name)), initial=0.0)) for name in spaces.slices}


def pim_independence(pairing, N=8, n_steps=50, dt=0.01, seed=0):
    """Largest relative v/p difference between runs differing only in PIM auxiliary data."""
    mesh = unit_square(N)
    spaces = MixedSpaces(mesh, pairing)
    material = audit_material(mesh)
    system = build_cn_system(assemble_blocks(spaces, material), dt)
    A = random_state(spaces, material, seed)
    B = A.copy()
    rng = np.random.default_rng(seed + 1)
    pim = material.region == "PIM"
    for name in ("u", "w", "q", "r"):
        blk = B.block(name).reshape(material.n_cells, -1)
        blk[pim] = rng.standard_normal(blk[pim].shape)
    worst = 0.0
    for _ in range(n_steps):
        A, B = system.step(A), system.step(B)
        for name in ("v", "p"):
            a, b = A.block(name), B.block(name)
            worst = max(worst, float(np.linalg.norm(a - b) / max(np.linalg.norm(a), 1e-300)))
    return worst
