"""Run configuration: JSON schema, validation and boundary-source formulas.

A configuration is a JSON object::

    {
      "domain": [0, 2, 0, 2],          # xmin, xmax, ymin, ymax
      "N": 50,                         # N x N squares, each bisected
      "pairing": "rtn1",
      "T": 0.4,
      "dt": 0.002,                     # or "h" / "h2"
      "material": {...},               # optional, see MATERIAL_DEFAULTS
      "boundary": [...],               # optional, default: p_D = 0 on every side
      "output": {...}                  # optional, see OUTPUT_DEFAULTS
    }

Unknown keys anywhere are rejected so that typos never pass silently.
"""
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .fespace import PAIRINGS

log = logging.getLogger(__name__)

SIDES = ("left", "right", "bottom", "top")

MATERIAL_DEFAULTS = {
    "rho_a": 1.0,
    "kappa_a": 1.0,
    "omega_rho": 1.0,
    "omega_kappa": 1.0,
    "gamma": 0.0,
    "regions": {},
}
REGION_KEYS = {"box", "rho_a", "kappa_a", "Omega_rho", "Omega_kappa"}
BOUNDARY_KEYS = {"sides", "type", "source"}
OUTPUT_DEFAULTS = {
    "snapshots": [],
    "formats": ["csv"],
    "probes": [],
    "probe_lines": [],
    "energy": False,
}
TOP_KEYS = {"domain", "N", "pairing", "T", "dt", "material", "boundary", "output", "name"}
REQUIRED = ("domain", "N", "pairing", "T", "dt")


class ConfigError(ValueError):
    """Schema violation; the message names the offending key path."""


# -- boundary sources ----------------------------------------------------------

def _corner_plane(t, x, y, mu_f=18.0, amplitude=10.0, speed=10.0, x_cut=0.6):
    on = (t > x + y) & (x < x_cut)
    return np.where(on, amplitude * np.sin(mu_f * np.pi * (x + y - speed * t)), 0.0)


def _left_gaussian(t, x, y, amplitude=10.0, freq=20.0, speed=10.0, y_cut=0.1):
    arg = freq * np.pi * (x * x + (y - 1.0) ** 2 - speed * t)
    return np.where(y - 1.0 < y_cut, amplitude * np.exp(-(1.0 + np.sin(arg))), 0.0)


def _zero(t, x, y):
    return np.zeros(np.broadcast(x, y).shape)


def _constant(t, x, y, value=0.0):
    return np.full(np.broadcast(x, y).shape, float(value))


SOURCES = {
    "corner_plane": _corner_plane,
    "left_gaussian": _left_gaussian,
    "zero": _zero,
    "constant": _constant,
}


def source_pD(name, params, t, x, y):
    """Evaluate a named boundary source at time t and points (x, y)."""
    try:
        func = SOURCES[name]
    except KeyError:
        raise ConfigError(f"unknown source {name!r}; choose from {sorted(SOURCES)}") from None
    try:
        return func(t, np.asarray(x, float), np.asarray(y, float), **(params or {}))
    except TypeError as exc:
        raise ConfigError(f"bad parameters for source {name!r}: {exc}") from None


def make_source(spec):
    """Callable (t, pts) from a {"name": ..., **params} mapping."""
    spec = dict(spec)
    name = spec.pop("name", None)
    if name is None:
        raise ConfigError("boundary source needs a 'name'")
    source_pD(name, spec, 0.0, 0.0, 0.0)  # fail early on bad names/params
    return lambda t, pts: source_pD(name, spec, t, pts[..., 0], pts[..., 1])


# -- the configuration object ---------------------------------------------------

@dataclass
class BoundaryPart:
    sides: tuple
    type: str  # "dirichlet" (p = p_D, natural) or "flux" (v.n = value, essential)
    source: dict


@dataclass
class RunConfig:
    domain: tuple
    N: int
    pairing: str
    T: float
    dt: float
    material: dict
    boundary: list
    output: dict
    name: str = "run"
    warnings: list = field(default_factory=list)

    @property
    def n_steps(self):
        return int(round(self.T / self.dt))

    def to_dict(self):
        return {
            "name": self.name,
            "domain": list(self.domain),
            "N": self.N,
            "pairing": self.pairing,
            "T": self.T,
            "dt": self.dt,
            "material": self.material,
            "boundary": [{"sides": list(b.sides), "type": b.type, "source": b.source}
                         for b in self.boundary],
            # snapshots are stored as step indices; write them back as times
            "output": {**self.output, "snapshots": [n * self.dt for n in self.output["snapshots"]]},
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _reject_unknown(obj, allowed, where):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected an object, got {type(obj).__name__}")
    extra = sorted(set(obj) - set(allowed))
    if extra:
        raise ConfigError(f"{where}: unknown key(s) {extra}; allowed {sorted(allowed)}")


def _number(value, where, positive=False, nonneg=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(f"{where}: expected a finite number, got {value!r}")
    if positive and not value > 0:
        raise ConfigError(f"{where}: must be positive, got {value}")
    if nonneg and value < 0:
        raise ConfigError(f"{where}: must be nonnegative, got {value}")
    return float(value)


def _box(value, where):
    if not (isinstance(value, (list, tuple)) and len(value) == 4):
        raise ConfigError(f"{where}: expected [xmin, xmax, ymin, ymax]")
    b = tuple(_number(v, f"{where}[{i}]") for i, v in enumerate(value))
    if not (b[0] < b[1] and b[2] < b[3]):
        raise ConfigError(f"{where}: empty box {list(b)}")
    return b


def _parse_material(raw):
    _reject_unknown(raw, MATERIAL_DEFAULTS, "material")
    mat = {**MATERIAL_DEFAULTS, **raw}
    for key in ("rho_a", "kappa_a", "omega_rho", "omega_kappa"):
        mat[key] = _number(mat[key], f"material.{key}", positive=True)
    mat["gamma"] = _number(mat["gamma"], "material.gamma", nonneg=True)
    regions = {}
    if not isinstance(mat["regions"], dict):
        raise ConfigError("material.regions: expected an object of label -> region")
    for label, reg in mat["regions"].items():
        where = f"material.regions.{label}"
        _reject_unknown(reg, REGION_KEYS, where)
        if "box" not in reg:
            raise ConfigError(f"{where}: missing 'box'")
        out = {"box": list(_box(reg["box"], where + ".box"))}
        for key in REGION_KEYS - {"box"}:
            if key in reg:
                out[key] = _number(reg[key], f"{where}.{key}", nonneg=True)
        regions[label] = out
    mat["regions"] = regions
    return mat


def _parse_boundary(raw):
    if raw is None:
        return [BoundaryPart(SIDES, "dirichlet", {"name": "zero"})]
    if not isinstance(raw, list) or not raw:
        raise ConfigError("boundary: expected a non-empty list of parts")
    parts, seen = [], {}
    for i, part in enumerate(raw):
        where = f"boundary[{i}]"
        _reject_unknown(part, BOUNDARY_KEYS, where)
        sides = part.get("sides", list(SIDES))
        if isinstance(sides, str):
            sides = list(SIDES) if sides == "all" else [sides]
        for s in sides:
            if s not in SIDES:
                raise ConfigError(f"{where}.sides: unknown side {s!r}; choose from {SIDES}")
            if s in seen:
                raise ConfigError(f"{where}.sides: side {s!r} already assigned by boundary[{seen[s]}]")
            seen[s] = i
        kind = part.get("type", "dirichlet")
        if kind not in ("dirichlet", "flux"):
            raise ConfigError(f"{where}.type: expected 'dirichlet' or 'flux', got {kind!r}")
        source = part.get("source", {"name": "zero"})
        if not isinstance(source, dict):
            raise ConfigError(f"{where}.source: expected an object with a 'name'")
        try:
            make_source(source)
        except ConfigError as exc:
            raise ConfigError(f"{where}.source: {exc}") from None
        parts.append(BoundaryPart(tuple(sides), kind, dict(source)))
    missing = [s for s in SIDES if s not in seen]
    if missing:
        raise ConfigError(f"boundary: sides {missing} have no condition")
    return parts


def _parse_output(raw, T, dt, warnings):
    _reject_unknown(raw, OUTPUT_DEFAULTS, "output")
    out = {**OUTPUT_DEFAULTS, **raw}
    snaps = []
    for i, t in enumerate(out["snapshots"]):
        t = _number(t, f"output.snapshots[{i}]", nonneg=True)
        if t > T * (1 + 1e-12):
            raise ConfigError(f"output.snapshots[{i}]: time {t} beyond T={T}")
        n = int(round(t / dt))
        if abs(n * dt - t) > 1e-9 * max(1.0, t):
            msg = f"snapshot time {t} rounded to grid time {n * dt:.12g}"
            log.warning(msg)
            warnings.append(msg)
        snaps.append(n)
    out["snapshots"] = sorted(set(snaps))
    for fmt in out["formats"]:
        if fmt not in ("csv", "vtk"):
            raise ConfigError(f"output.formats: unknown format {fmt!r}")
    for i, p in enumerate(out["probes"]):
        if not (isinstance(p, (list, tuple)) and len(p) == 2):
            raise ConfigError(f"output.probes[{i}]: expected [x, y]")
    for i, line in enumerate(out["probe_lines"]):
        _reject_unknown(line, {"y", "x0", "x1", "n"}, f"output.probe_lines[{i}]")
    if not isinstance(out["energy"], bool):
        raise ConfigError("output.energy: expected true or false")
    return out


def config_from_dict(raw):
    """Validate a decoded configuration mapping into a :class:`RunConfig`."""
    _reject_unknown(raw, TOP_KEYS, "config")
    missing = [k for k in REQUIRED if k not in raw]
    if missing:
        raise ConfigError(f"config: missing required key(s) {missing}")
    domain = _box(raw["domain"], "domain")
    N = raw["N"]
    if isinstance(N, bool) or not isinstance(N, int) or N < 1:
        raise ConfigError(f"N: expected a positive integer, got {N!r}")
    pairing = str(raw["pairing"]).lower()
    if pairing not in PAIRINGS:
        raise ConfigError(f"pairing: unknown {raw['pairing']!r}; choose from {sorted(PAIRINGS)}")
    T = _number(raw["T"], "T", positive=True)
    dt = raw["dt"]
    if dt in ("h", "h2"):
        h = max(domain[1] - domain[0], domain[3] - domain[2]) / N
        dt = h if dt == "h" else h * h
    dt = _number(dt, "dt", positive=True)
    n = int(round(T / dt))
    if n < 1 or abs(n * dt - T) > 1e-9 * T:
        raise ConfigError(f"dt: T={T} is not an integer multiple of dt={dt}")
    warnings = []
    return RunConfig(
        domain=domain, N=N, pairing=pairing, T=T, dt=dt,
        material=_parse_material(raw.get("material", {})),
        boundary=_parse_boundary(raw.get("boundary")),
        output=_parse_output(raw.get("output", {}), T, dt, warnings),
        name=str(raw.get("name", "run")),
        warnings=warnings,
    )


def parse_config(text):
    """Parse JSON text; decoding errors report line and column."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return config_from_dict(raw)


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
