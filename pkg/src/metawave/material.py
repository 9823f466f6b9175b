"""Piecewise-constant Drude coefficients, derived weights and the energy E0."""
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

PIM = "PIM"


class Violation(NamedTuple):
    kind: str
    cells: tuple
    message: str


@dataclass(frozen=True)
class MaterialField:
    """Cell-wise coefficients of the metamaterial model.

    ``rho_a``, ``kappa_a``, ``Omega_rho``, ``Omega_kappa`` and ``region`` are
    per-cell arrays; the resonance frequencies and damping are constants.
    The weights rho_u, rho_w, rho_q, rho_r are derived on construction.
    """

    rho_a: np.ndarray
    kappa_a: np.ndarray
    Omega_rho: np.ndarray
    Omega_kappa: np.ndarray
    omega_rho: float = 1.0
    omega_kappa: float = 1.0
    gamma: float = 0.0
    region: np.ndarray = None
    rho_u: np.ndarray = field(init=False, repr=False)
    rho_w: np.ndarray = field(init=False, repr=False)
    rho_q: np.ndarray = field(init=False, repr=False)
    rho_r: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        arrays = {}
        n = None
        for name in ("rho_a", "kappa_a", "Omega_rho", "Omega_kappa"):
            a = np.array(getattr(self, name), dtype=float)
            if a.ndim != 1:
                raise ValueError(f"{name} must be a per-cell 1D array")
            if n is not None and a.size != n:
                raise ValueError(f"{name} has {a.size} entries, expected {n}")
            n = a.size
            a.setflags(write=False)
            arrays[name] = a
        region = self.region
        if region is None:
            region = np.where((arrays["Omega_rho"] == 0) & (arrays["Omega_kappa"] == 0), PIM, "NIM")
        region = np.asarray(region, dtype=object)
        if region.shape != (n,):
            raise ValueError("region must label every cell")
        arrays["region"] = region
        for k, v in arrays.items():
            object.__setattr__(self, k, v)
        with np.errstate(divide="ignore", invalid="ignore"):
            kinv = 1.0 / arrays["kappa_a"]
            w = {
                "rho_u": arrays["rho_a"] * arrays["Omega_rho"] ** 2,
                "rho_w": arrays["rho_a"] * self.omega_rho**2 * arrays["Omega_rho"] ** 2,
                "rho_q": kinv * arrays["Omega_kappa"] ** 2,
                "rho_r": kinv * self.omega_kappa**2 * arrays["Omega_kappa"] ** 2,
            }
        for k, v in w.items():
            v.setflags(write=False)
            object.__setattr__(self, k, v)

    @property
    def n_cells(self):
        return self.rho_a.size

    @property
    def kappa_inv(self):
        return 1.0 / self.kappa_a

    @property
    def pim_cells(self):
        return np.flatnonzero(self.region == PIM)

    def updated(self, **changes):
        """Copy with some primitive coefficients replaced; weights are re-derived."""
        return replace(self, **changes)

    @classmethod
    def uniform(cls, n_cells, rho_a=1.0, kappa_a=1.0, Omega_rho=0.0, Omega_kappa=0.0, **kw):
        full = lambda v: np.full(n_cells, float(v))  # noqa: E731
        return cls(full(rho_a), full(kappa_a), full(Omega_rho), full(Omega_kappa), **kw)

    @classmethod
    def from_regions(cls, mesh, boxes, rho_a=1.0, kappa_a=1.0, Omega_rho=0.0,
                     Omega_kappa=0.0, omega_rho=1.0, omega_kappa=1.0, gamma=0.0):
        """Build from labelled boxes.

        ``boxes`` maps label -> dict with key ``box`` = (xmin, xmax, ymin, ymax)
        and optional overrides of ``rho_a``, ``kappa_a``, ``Omega_rho``,
        ``Omega_kappa``.  Cells outside every box get the scalar defaults and
        the PIM label.
        """
        labels = mesh.cell_regions({k: v["box"] for k, v in boxes.items()}, default=PIM)
        vals = {}
        defaults = dict(rho_a=rho_a, kappa_a=kappa_a, Omega_rho=Omega_rho, Omega_kappa=Omega_kappa)
        for name, d in defaults.items():
            a = np.full(mesh.n_cells, float(d))
            for lab, spec in boxes.items():
                if name in spec:
                    a[labels == lab] = float(spec[name])
            vals[name] = a
        return cls(vals["rho_a"], vals["kappa_a"], vals["Omega_rho"], vals["Omega_kappa"],
                   omega_rho=float(omega_rho), omega_kappa=float(omega_kappa),
                   gamma=float(gamma), region=labels)


def validate(material):
    """List of :class:`Violation`; empty when the coefficients are admissible."""
    out = []

    def check(kind, mask, message):
        cells = tuple(int(c) for c in np.flatnonzero(mask))
        if cells:
            out.append(Violation(kind, cells, message))

    m = material
    check("rho_a", ~(m.rho_a > 0) | ~np.isfinite(m.rho_a), "rho_a must be positive")
    check("kappa_a", ~(m.kappa_a > 0) | ~np.isfinite(m.kappa_a), "kappa_a must be positive")
    check("Omega_rho", ~(m.Omega_rho >= 0), "Omega_rho must be nonnegative")
    check("Omega_kappa", ~(m.Omega_kappa >= 0), "Omega_kappa must be nonnegative")
    pim = m.region == PIM
    check("pim", pim & ((m.Omega_rho != 0) | (m.Omega_kappa != 0)),
          "Omega_rho and Omega_kappa must vanish on PIM cells")
    check("nim", ~pim & ~((m.Omega_rho > 0) & (m.Omega_kappa > 0)),
          "Omega_rho and Omega_kappa must be positive on NIM cells")
    for name in ("omega_rho", "omega_kappa"):
        val = getattr(m, name)
        if not (np.isfinite(val) and val > 0):
            out.append(Violation(name, (), f"{name} must be a positive constant, got {val}"))
    if not (np.isfinite(m.gamma) and m.gamma >= 0):
        out.append(Violation("gamma", (), f"gamma must be nonnegative, got {m.gamma}"))
    return out


def energy_terms(state, material, mass_v=None):
    """Squared weighted norms of the six fields, keyed by field name.

    ``mass_v`` may pass a pre-assembled rho_a-weighted V_h mass matrix.
    """
    from .assembly import assemble_mass

    spaces = state.spaces
    if material.n_cells != spaces.mesh.n_cells:
        raise ValueError("state and material live on different meshes")
    v = state.v
    Mv = assemble_mass(spaces.V, material.rho_a) if mass_v is None else mass_v
    area = 0.5 * spaces.mesh.jacobians()[1]

    def dg(name, weight):
        blk = state.block(name).reshape(material.n_cells, -1)
        return float(np.sum(weight * area * np.sum(blk**2, axis=1)))

    return {
        "v": float(v @ (Mv @ v)),
        "p": dg("p", material.kappa_inv),
        "u": dg("u", material.rho_u),
        "w": dg("w", material.rho_w),
        "q": dg("q", material.rho_q),
        "r": dg("r", material.rho_r),
    }


def energy(state, material, mass_v=None):
    """E0: square root of the sum of the weighted squared norms."""
    return float(np.sqrt(sum(energy_terms(state, material, mass_v).values())))
