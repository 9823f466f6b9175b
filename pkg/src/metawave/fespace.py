"""Global finite element spaces, interpolation and L2 projection.

User fields are callables ``f(pts)`` taking points of shape (..., 2) and
returning (...) for scalars or (..., 2) for vectors.
"""
import numpy as np
from scipy.special import eval_sh_legendre

from .quadrature import gauss_interval, quadrature
from .refelem import ElementFamily, make_reference, monomials

DEFAULT_QUAD_DEGREE = 10


class FESpace:
    """A global space on a mesh for one element family.

    H(div) DOFs are numbered edge-major (edge index, then moment order),
    followed by interior DOFs cell by cell.  DG DOFs are cell-major blocks.
    """

    def __init__(self, mesh, family):
        if isinstance(family, str):
            from .refelem import parse_family
            family = parse_family(family)
        if not isinstance(family, ElementFamily):
            raise TypeError("family must be an ElementFamily")
        self.mesh = mesh
        self.family = family
        self.ref = make_reference(family)
        nc = mesh.n_cells
        dim = self.ref.dim
        if family.is_hdiv:
            ned, nint = self.ref.n_edge_dofs, self.ref.n_interior
            self.n_edge_dofs = mesh.n_edges * ned
            self.n_dofs = self.n_edge_dofs + nc * nint
            dofs = np.empty((nc, dim), dtype=np.int64)
            signs = np.empty((nc, dim))
            m = np.arange(ned)
            parity = (-1.0) ** m
            for e in range(3):
                sl = slice(e * ned, (e + 1) * ned)
                dofs[:, sl] = mesh.cell_edges[:, e:e + 1] * ned + m
                flip = np.where(mesh.cell_edge_flips[:, e:e + 1], parity, 1.0)
                signs[:, sl] = mesh.cell_edge_signs[:, e:e + 1] * flip
            dofs[:, 3 * ned:] = self.n_edge_dofs + np.arange(nc)[:, None] * nint + np.arange(nint)
            signs[:, 3 * ned:] = 1.0
        else:
            self.n_edge_dofs = 0
            self.n_dofs = nc * dim
            dofs = np.arange(nc * dim, dtype=np.int64).reshape(nc, dim)
            signs = np.ones((nc, dim))
        self.cell_dofs = dofs
        self.cell_signs = signs
        self.cell_dofs.setflags(write=False)
        self.cell_signs.setflags(write=False)
        self._J, self._det, self._x0 = mesh.jacobians()

    @property
    def is_hdiv(self):
        return self.family.is_hdiv

    @property
    def is_vector(self):
        return self.ref.is_vector

    @property
    def dim_local(self):
        return self.ref.dim

    def __repr__(self):
        return f"FESpace({self.family}, ndofs={self.n_dofs})"

    # -- mapped basis -------------------------------------------------------
    def basis_values(self, ref_pts, cells=None):
        """Physical basis values at mapped reference points, signs applied.

        Returns (nc, npts, dim, 2) for vector spaces, (nc, npts, dim) for scalar.
        """
        cells = slice(None) if cells is None else cells
        hat = self.ref.eval(ref_pts)
        s = self.cell_signs[cells]
        if self.is_hdiv:
            J = self._J[cells]
            det = self._det[cells]
            vals = np.einsum("cab,pib->cpia", J, hat) / det[:, None, None, None]
            return vals * s[:, None, :, None]
        if self.is_vector:
            n = len(self._det[cells])
            return np.broadcast_to(hat, (n,) + hat.shape)
        n = len(self._det[cells])
        return np.broadcast_to(hat, (n,) + hat.shape)

    def basis_divergence(self, ref_pts, cells=None):
        """Physical divergence (nc, npts, dim) of H(div) basis functions."""
        if not self.is_hdiv:
            raise TypeError("divergence is defined for H(div) spaces")
        cells = slice(None) if cells is None else cells
        dhat = self.ref.div(ref_pts)
        return dhat[None] / self._det[cells][:, None, None] * self.cell_signs[cells][:, None, :]

    def basis_gradient(self, ref_pts, cells=None):
        """Physical gradients (nc, npts, dim, 2) of scalar DG basis functions."""
        cells = slice(None) if cells is None else cells
        ghat = self.ref.grad(ref_pts)
        Jinv = np.linalg.inv(self._J[cells])
        return np.einsum("cba,pib->cpia", Jinv, ghat)

    def function(self, coeffs=None):
        return FEFunction(self, coeffs)

    # -- interpolation / projection -----------------------------------------
    def interpolate(self, func, quad_degree=DEFAULT_QUAD_DEGREE):
        """Canonical interpolant (H(div)) or L2 projection (DG)."""
        if self.is_hdiv:
            return interpolate_canonical(self, func)
        return project_l2(self, func, quad_degree=quad_degree)

    def cell_values(self, coeffs, ref_pts):
        """Evaluate a coefficient vector at mapped reference points of every cell."""
        c = np.asarray(coeffs)[self.cell_dofs]
        if self.is_hdiv:
            return np.einsum("cpia,ci->cpa", self.basis_values(ref_pts), c)
        hat = self.ref.eval(ref_pts)
        if self.is_vector:
            return np.einsum("pia,ci->cpa", hat, c)
        return c @ hat.T

    def cell_divergence(self, coeffs, ref_pts):
        c = np.asarray(coeffs)[self.cell_dofs]
        return np.einsum("cpi,ci->cp", self.basis_divergence(ref_pts), c)


class FEFunction:
    """A coefficient vector tied to an :class:`FESpace`."""

    def __init__(self, space, coeffs=None):
        self.space = space
        if coeffs is None:
            coeffs = np.zeros(space.n_dofs)
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (space.n_dofs,):
            raise ValueError(f"coefficient length {coeffs.shape} != ({space.n_dofs},)")
        self.coeffs = coeffs

    def evaluate(self, cell, point):
        """Value at a physical point inside ``cell``."""
        space = self.space
        J, det, x0 = space._J[cell], space._det[cell], space._x0[cell]
        ref = np.linalg.solve(J, np.asarray(point, float) - x0)
        lam = np.array([1 - ref.sum(), ref[0], ref[1]])
        if np.any(lam < -1e-10):
            raise ValueError(f"point {point} is not inside cell {cell}")
        c = self.coeffs[space.cell_dofs[cell]]
        hat = space.ref.eval(ref[None])[0]
        if space.is_hdiv:
            return (J @ (hat * space.cell_signs[cell][:, None]).T @ c) / det
        if space.is_vector:
            return hat.T @ c
        return float(hat @ c)

    def __call__(self, point):
        cell = self.space.mesh.find_cell(point)
        if cell < 0:
            raise ValueError(f"point {point} outside the mesh")
        return self.evaluate(cell, point)


def interpolate_canonical(space, func, n_edge_pts=8, quad_degree=DEFAULT_QUAD_DEGREE):
    """Canonical RTN/BDM interpolant: apply the global DOF functionals to ``func``."""
    if not space.is_hdiv:
        raise TypeError("canonical interpolation needs an H(div) space")
    mesh = space.mesh
    ref = space.ref
    ned = ref.n_edge_dofs
    out = np.zeros(space.n_dofs)

    s, w = gauss_interval(max(n_edge_pts, ref.D + ned))
    ev = mesh.vertices[mesh.edges]
    pts = ev[:, None, 0] + s[None, :, None] * (ev[:, None, 1] - ev[:, None, 0])
    vals = np.asarray(func(pts))
    vn = np.einsum("eqa,ea->eq", vals, mesh.edge_normals())
    L = np.array([eval_sh_legendre(m, s) for m in range(ned)])
    out[:space.n_edge_dofs] = (np.einsum("eq,q,mq->em", vn, w, L)
                               * mesh.edge_lengths()[:, None]).ravel()

    if ref.n_interior:
        q = quadrature(quad_degree)
        x = mesh.map_points(q.points)
        vals = np.asarray(func(x))
        J, det = space._J, space._det
        # pulled-back field vhat = det J^{-1} v
        vhat = np.einsum("cab,cpb->cpa", np.linalg.inv(J), vals) * det[:, None, None]
        tests = np.einsum("pm,icm->pic", monomials(q.points, ref.D)[0], ref._interior)
        mom = np.einsum("p,cpa,pia->ci", q.weights, vhat, tests)
        out[space.n_edge_dofs:] = mom.ravel()
    return FEFunction(space, out)


def project_l2(space, func, weight=None, quad_degree=DEFAULT_QUAD_DEGREE):
    """L2 projection onto a DG space, optionally of ``weight * func``.

    ``weight`` is a per-cell array.  Uses the orthogonality of the DG basis:
    the local mass matrix is |K| times the identity.
    """
    if space.is_hdiv:
        raise TypeError("project_l2 needs a DG space")
    mesh = space.mesh
    q = quadrature(quad_degree)
    x = mesh.map_points(q.points)
    vals = np.asarray(func(x), dtype=float)
    hat = space.ref.eval(q.points)
    if space.is_vector:
        loc = np.einsum("p,cpa,pia->ci", q.weights, vals, hat)
    else:
        loc = np.einsum("p,cp,pi->ci", q.weights, vals, hat)
    # int_K f phi = det * sum w f phi ; divided by |K| = det / 2
    loc *= 2.0
    if weight is not None:
        loc *= np.asarray(weight, float)[:, None]
    return FEFunction(space, loc.ravel())


PAIRINGS = {
    "bdm1": ("BDM1", "P0", "P1^2"),
    "rtn0": ("RTN0", "P0", "P0^2"),
    "bdm2": ("BDM2", "P1", "P2^2"),
    "rtn1": ("RTN1", "P1", "P1^2"),
}

FIELDS = ("v", "p", "u", "w", "q", "r")


class MixedSpaces:
    """The product space V_h x Q_h x W_h x W_h x Q_h x Q_h of one pairing."""

    def __init__(self, mesh, pairing):
        key = pairing.lower()
        if key not in PAIRINGS:
            raise ValueError(f"unknown pairing {pairing!r}; choose from {sorted(PAIRINGS)}")
        self.mesh = mesh
        self.pairing = key
        vname, qname, wname = PAIRINGS[key]
        self.V = FESpace(mesh, vname)
        self.Q = FESpace(mesh, qname)
        self.W = FESpace(mesh, wname)
        spaces = (self.V, self.Q, self.W, self.W, self.Q, self.Q)
        sizes = [s.n_dofs for s in spaces]
        offs = np.concatenate([[0], np.cumsum(sizes)])
        self.spaces = dict(zip(FIELDS, spaces))
        self.slices = {f: slice(int(offs[i]), int(offs[i + 1])) for i, f in enumerate(FIELDS)}
        self.n_dofs = int(offs[-1])

    @property
    def k(self):
        return self.V.family.k

    def __repr__(self):
        return f"MixedSpaces({self.pairing}, ndofs={self.n_dofs})"


class StateVector:
    """The six coefficient blocks (v, p, u, w, q, r) stored in one flat array."""

    def __init__(self, spaces, data=None):
        self.spaces = spaces
        if data is None:
            data = np.zeros(spaces.n_dofs)
        data = np.asarray(data, dtype=float)
        if data.shape != (spaces.n_dofs,):
            raise ValueError(f"state length {data.shape} != ({spaces.n_dofs},)")
        self.data = data

    def block(self, name):
        return self.data[self.spaces.slices[name]]

    def function(self, name):
        return FEFunction(self.spaces.spaces[name], self.block(name))

    def copy(self):
        return StateVector(self.spaces, self.data.copy())

    def __getattr__(self, name):
        if name in FIELDS:
            return self.block(name)
        raise AttributeError(name)

    @classmethod
    def from_blocks(cls, spaces, **blocks):
        state = cls(spaces)
        for name, vals in blocks.items():
            state.data[spaces.slices[name]] = vals
        return state
