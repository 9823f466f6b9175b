"""Quadrature rules on the reference triangle and the unit interval.

Reference triangle: vertices (0, 0), (1, 0), (0, 1); area 1/2.
"""
from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations

import numpy as np
from scipy.special import roots_jacobi

MAX_DEGREE = 10


@dataclass(frozen=True)
class QuadratureRule:
    """Points in barycentric coordinates, weights summing to 1/2."""

    barycentric: np.ndarray  # (npts, 3)
    weights: np.ndarray  # (npts,)
    degree: int

    @property
    def points(self):
        """Cartesian reference coordinates, shape (npts, 2)."""
        return self.barycentric[:, 1:].copy()

    def __len__(self):
        return self.weights.size


def _collapsed_rule(n):
    # Duffy map (s, t) -> (s (1 - t), t); the Jacobian (1 - t) is absorbed by
    # Gauss-Jacobi(alpha=1) on t.
    xs, ws = np.polynomial.legendre.leggauss(n)
    xs = 0.5 * (xs + 1.0)
    ws = 0.5 * ws
    ts, wt = roots_jacobi(n, 1.0, 0.0)
    ts = 0.5 * (ts + 1.0)
    wt = wt / 4.0
    s, t = np.meshgrid(xs, ts, indexing="ij")
    w = np.outer(ws, wt)
    x = s * (1.0 - t)
    y = t
    return np.column_stack([x.ravel(), y.ravel()]), w.ravel()


@lru_cache(maxsize=None)
def quadrature(degree):
    """Symmetric rule exact for polynomials of total degree <= ``degree``.

    Built from a collapsed Gauss rule averaged over the six symmetries of the
    triangle; coincident points are merged, so degree 1 is the centroid rule.
    """
    if not isinstance(degree, (int, np.integer)) or not 1 <= degree <= MAX_DEGREE:
        raise ValueError(f"quadrature degree must be an integer in [1, {MAX_DEGREE}], got {degree!r}")
    n = (int(degree) + 2) // 2
    pts, wts = _collapsed_rule(n)
    bary = np.column_stack([1.0 - pts[:, 0] - pts[:, 1], pts[:, 0], pts[:, 1]])
    acc = {}
    for perm in permutations(range(3)):
        for b, w in zip(bary[:, perm], wts):
            key = tuple(np.round(b, 13))
            if key in acc:
                acc[key][1] += w / 6.0
            else:
                acc[key] = [b, w / 6.0]
    keys = sorted(acc)
    bary_out = np.array([acc[k][0] for k in keys])
    w_out = np.array([acc[k][1] for k in keys])
    bary_out.setflags(write=False)
    w_out.setflags(write=False)
    return QuadratureRule(bary_out, w_out, int(degree))


@lru_cache(maxsize=None)
def gauss_interval(npts):
    """Gauss-Legendre points and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(npts)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w
