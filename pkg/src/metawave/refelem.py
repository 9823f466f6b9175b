"""Reference-triangle elements: RTN_k, BDM_k (H(div)) and scalar/vector DG.

Every basis is stored as a coefficient table over the monomials
x^a y^b (a + b <= D) on the reference triangle with vertices
(0, 0), (1, 0), (0, 1).  H(div) bases are nodal with respect to

* edge moments  int_e (v . n_e) L_m(s) ds, m = 0..(edge degree), with n_e the
  outward unit normal, s in [0, 1] running from the lower to the higher local
  vertex and L_m the shifted Legendre polynomial;
* interior moments int_K v . z for z in P_{k-1}^2 (RTN_k) or in the first-kind
  Nedelec space of degree l-2 (BDM_l).

DG bases are L2-orthogonal with phi_0 == 1 and int phi_i^2 = |K|, so the cell
mean is the first coefficient.
"""
from dataclasses import dataclass
from functools import lru_cache
from math import factorial

import numpy as np
from scipy.special import eval_sh_legendre

from .quadrature import gauss_interval, quadrature

REF_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
# local edge e is opposite local vertex e, oriented low -> high local index
REF_EDGES = ((1, 2), (0, 2), (0, 1))
REF_NORMALS = np.array([[1.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
REF_NORMALS[0] /= np.sqrt(2.0)
REF_EDGE_LENGTHS = np.array([np.sqrt(2.0), 1.0, 1.0])

SUPPORTED = {
    "RTN": (0, 1, 2),
    "BDM": (1, 2, 3),
    "DG": (0, 1, 2, 3, 4),
    "DGV": (0, 1, 2, 3),
}


@dataclass(frozen=True)
class ElementFamily:
    """Element kind and the polynomial index in its name (RTN0, BDM1, P2...)."""

    kind: str
    degree: int

    def __post_init__(self):
        if self.kind not in SUPPORTED:
            raise ValueError(f"unknown element kind {self.kind!r}")
        if self.degree not in SUPPORTED[self.kind]:
            raise ValueError(f"unsupported {self.kind} degree {self.degree}")

    @property
    def is_hdiv(self):
        return self.kind in ("RTN", "BDM")

    @property
    def k(self):
        """Index k of the companion pressure space P_k."""
        return self.degree - 1 if self.kind == "BDM" else self.degree

    @property
    def delta(self):
        """Superconvergence offset: 1 for BDM, 0 otherwise."""
        return 1 if self.kind == "BDM" else 0

    @property
    def poly_degree(self):
        """Maximal total degree of the local polynomials."""
        return self.degree + 1 if self.kind == "RTN" else self.degree

    def __str__(self):
        name = {"DG": "P", "DGV": "P"}.get(self.kind, self.kind)
        suffix = "^2" if self.kind == "DGV" else ""
        return f"{name}{self.degree}{suffix}"


def exponents(D):
    """Monomial exponents (a, b) with a + b <= D, graded order."""
    return [(n - b, b) for n in range(D + 1) for b in range(n + 1)]


def monomial_integral(a, b):
    """Exact integral of x^a y^b over the reference triangle."""
    return factorial(a) * factorial(b) / factorial(a + b + 2)


def monomials(pts, D):
    """Values and first derivatives of all monomials of degree <= D.

    Returns three arrays of shape (npts, nmono).
    """
    pts = np.atleast_2d(pts)
    x, y = pts[:, 0:1], pts[:, 1:2]
    exps = np.array(exponents(D))
    a, b = exps[:, 0], exps[:, 1]
    val = x**a * y**b
    with np.errstate(divide="ignore", invalid="ignore"):
        dx = np.where(a > 0, a * x ** np.maximum(a - 1, 0) * y**b, 0.0)
        dy = np.where(b > 0, b * x**a * y ** np.maximum(b - 1, 0), 0.0)
    return val, dx, dy


def _vector_monomials(D):
    """Coefficient tables (n, 2, nmono) spanning P_D^2, first component first."""
    nm = len(exponents(D))
    out = np.zeros((2 * nm, 2, nm))
    for i in range(nm):
        out[i, 0, i] = 1.0
        out[nm + i, 1, i] = 1.0
    return out


def _embed(coeffs, D_from, D_to):
    """Re-express coefficient tables over a larger monomial set."""
    idx = {e: i for i, e in enumerate(exponents(D_to))}
    cols = [idx[e] for e in exponents(D_from)]
    out = np.zeros(coeffs.shape[:-1] + (len(idx),))
    out[..., cols] = coeffs
    return out


def _homogeneous(D):
    return [(D - b, b) for b in range(D + 1)]


def _rtn_span(l):
    """Spanning set of RTN_l = P_l^2 + x P~_l, over monomials of degree l+1."""
    D = l + 1
    base = _embed(_vector_monomials(l), l, D)
    idx = {e: i for i, e in enumerate(exponents(D))}
    extra = np.zeros((l + 1, 2, len(idx)))
    for j, (a, b) in enumerate(_homogeneous(l)):
        extra[j, 0, idx[(a + 1, b)]] = 1.0
        extra[j, 1, idx[(a, b + 1)]] = 1.0
    return np.concatenate([base, extra])


def _nedelec_span(l):
    """First-kind Nedelec N_l = P_l^2 + (-y, x) P~_l, over degree l+1."""
    D = l + 1
    base = _embed(_vector_monomials(l), l, D)
    idx = {e: i for i, e in enumerate(exponents(D))}
    extra = np.zeros((l + 1, 2, len(idx)))
    for j, (a, b) in enumerate(_homogeneous(l)):
        extra[j, 0, idx[(a, b + 1)]] = -1.0
        extra[j, 1, idx[(a + 1, b)]] = 1.0
    return np.concatenate([base, extra])


class ReferenceElement:
    """Nodal basis, DOF functionals and evaluation on the reference triangle."""

    def __init__(self, family):
        self.family = family
        self.D = family.poly_degree
        if family.is_hdiv:
            self._build_hdiv()
        else:
            self._build_dg()

    # -- construction -------------------------------------------------------
    def _build_hdiv(self):
        fam = self.family
        if fam.kind == "RTN":
            span = _rtn_span(fam.degree)
            self.edge_degree = fam.degree
            self._interior = (
                _embed(_vector_monomials(fam.degree - 1), fam.degree - 1, self.D)
                if fam.degree >= 1 else None
            )
        else:
            span = _vector_monomials(fam.degree)
            self.edge_degree = fam.degree
            self._interior = (
                _embed(_nedelec_span(fam.degree - 2), fam.degree - 1, self.D)
                if fam.degree >= 2 else None
            )
        self.n_edge_dofs = self.edge_degree + 1
        self.n_interior = 0 if self._interior is None else self._interior.shape[0]
        self.dim = 3 * self.n_edge_dofs + self.n_interior
        if span.shape[0] != self.dim:
            raise AssertionError("span/functional count mismatch")
        self._edge_pts = gauss_interval(max(self.D + self.edge_degree + 1, 8))
        self._quad = quadrature(min(2 * self.D + 2, 10))
        V = self._apply_polys(span)
        self.vandermonde = V
        self.coeffs = np.einsum("sci,sj->jci", span, np.linalg.inv(V))

    def _build_dg(self):
        fam = self.family
        D = self.D
        exps = exponents(D)
        G = np.array([[monomial_integral(a1 + a2, b1 + b2) for (a2, b2) in exps]
                      for (a1, b1) in exps])
        # Gram-Schmidt in graded order: phi_0 = 1 and int phi_i phi_j = delta_ij / 2
        L = np.linalg.cholesky(2.0 * G)
        scalar = np.linalg.inv(L)  # rows: orthonormal basis in monomial coefficients
        scalar *= np.sign(scalar[np.arange(len(exps)), np.arange(len(exps))])[:, None]
        self.n_scalar = len(exps)
        self.n_edge_dofs = 0
        self.n_interior = self.n_scalar if fam.kind == "DG" else 2 * self.n_scalar
        self.dim = self.n_interior
        self._quad = quadrature(min(2 * D + 2, 10))
        if fam.kind == "DG":
            self.coeffs = scalar
        else:
            nm = len(exps)
            c = np.zeros((2 * nm, 2, nm))
            c[:nm, 0, :] = scalar
            c[nm:, 1, :] = scalar
            self.coeffs = c
        self.vandermonde = self._apply_polys(self.coeffs)

    # -- evaluation ---------------------------------------------------------
    @property
    def is_vector(self):
        return self.family.kind != "DG"

    def eval(self, pts):
        """Basis values: (npts, dim, 2) for vector families, (npts, dim) for scalar."""
        val, _, _ = monomials(pts, self.D)
        if self.is_vector:
            return np.einsum("pm,icm->pic", val, self.coeffs)
        return val @ self.coeffs.T

    def div(self, pts):
        """Divergence of each vector basis function, shape (npts, dim)."""
        _, dx, dy = monomials(pts, self.D)
        return dx @ self.coeffs[:, 0, :].T + dy @ self.coeffs[:, 1, :].T

    def grad(self, pts):
        """Gradients of scalar basis functions, shape (npts, dim, 2)."""
        if self.is_vector:
            raise TypeError("grad is defined for scalar families only")
        _, dx, dy = monomials(pts, self.D)
        return np.stack([dx @ self.coeffs.T, dy @ self.coeffs.T], axis=-1)

    # -- DOF functionals ----------------------------------------------------
    def edge_points(self, e):
        """Reference points, weights (times edge length) and parameters on edge e."""
        s, w = self._edge_pts
        a, b = REF_EDGES[e]
        pts = REF_VERTICES[a] + np.outer(s, REF_VERTICES[b] - REF_VERTICES[a])
        return pts, w * REF_EDGE_LENGTHS[e], s

    def apply_dofs(self, func):
        """Apply all DOF functionals to ``func`` (reference points -> values)."""
        if not self.family.is_hdiv:
            q = self._quad
            vals = np.asarray(func(q.points))
            basis = self.eval(q.points)
            if self.is_vector:
                return 2.0 * np.einsum("q,qc,qic->i", q.weights, vals, basis)
            return 2.0 * np.einsum("q,q,qi->i", q.weights, vals, basis)
        out = []
        for e in range(3):
            pts, w, s = self.edge_points(e)
            vn = np.asarray(func(pts)) @ REF_NORMALS[e]
            for m in range(self.n_edge_dofs):
                out.append(np.sum(w * vn * eval_sh_legendre(m, s)))
        if self.n_interior:
            q = self._quad
            vals = np.asarray(func(q.points))
            tests = np.einsum("pm,icm->pic", monomials(q.points, self.D)[0], self._interior)
            out.extend(np.einsum("q,qc,qic->i", q.weights, vals, tests))
        return np.array(out)

    def _apply_polys(self, coeffs):
        cols = []
        for c in coeffs:
            if c.ndim == 2:
                f = lambda p, c=c: monomials(p, self.D)[0] @ c.T  # noqa: E731
            else:
                f = lambda p, c=c: monomials(p, self.D)[0] @ c  # noqa: E731
            cols.append(self.apply_dofs(f))
        return np.array(cols).T

    def __repr__(self):
        return f"ReferenceElement({self.family}, dim={self.dim})"


@lru_cache(maxsize=None)
def make_reference(family):
    """Cached reference element for an :class:`ElementFamily`."""
    if not isinstance(family, ElementFamily):
        raise TypeError("expected an ElementFamily")
    return ReferenceElement(family)


def parse_family(name):
    """'RTN1' / 'BDM2' / 'P1' / 'P1^2' -> ElementFamily."""
    name = name.strip().upper()
    if name.startswith("RTN"):
        return ElementFamily("RTN", int(name[3:]))
    if name.startswith("BDM"):
        return ElementFamily("BDM", int(name[3:]))
    if name.startswith("P"):
        if name.endswith("^2"):
            return ElementFamily("DGV", int(name[1:-2]))
        return ElementFamily("DG", int(name[1:]))
    raise ValueError(f"cannot parse element name {name!r}")
