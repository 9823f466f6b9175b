"""Element-local pressure reconstruction p* in P_{k+2}.

On each cell K, p* solves

    (grad p*, grad z)_K = (f^{n+1/2} - rho_a (v^{n+1} - v^n)/dt - rho_u u^{n+1/2}, grad z)_K

for all z in P_{k+2}(K), with the cell mean of p* equal to that of
p_h^{n+1/2}.  The result approximates p(t_n + dt/2).
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .fespace import FEFunction, FESpace
from .quadrature import quadrature
from .refelem import ElementFamily


@dataclass
class PostState:
    p_star: FEFunction
    time: float


def reconstruction_space(spaces):
    """Q_h^*: discontinuous P_{k+2} on the same mesh."""
    return FESpace(spaces.mesh, ElementFamily("DG", spaces.k + 2))


class PressurePostprocessor:
    """Precomputed local solves of Q_h^* for one mesh, pairing and material.

    Apart from the source term, p* depends linearly on (v^{n+1} - v^n)/dt
    and u^{n+1/2}; both maps are assembled once as block-sparse matrices,
    so each call costs two sparse mat-vecs.
    """

    def __init__(self, spaces, material, quad_degree=None):
        self.spaces = spaces
        self.material = material
        self.space = reconstruction_space(spaces)
        k = spaces.k
        self.quad = quadrature(min(quad_degree or 2 * (k + 2) + 2, 10))
        mesh = spaces.mesh
        pts = self.quad.points
        det = mesh.jacobians()[1]
        self._x = mesh.map_points(pts)
        grad = self.space.basis_gradient(pts)[:, :, 1:, :]  # (nc, nq, dim-1, 2)
        wdet = self.quad.weights[None, :] * det[:, None]
        S = np.einsum("cp,cpia,cpja->cij", wdet, grad, grad)
        # phi_0 == 1 is the only constant; the other basis functions have zero
        # mean, so the mean constraint fixes coefficient 0 and the remaining
        # block is SPD.
        Sinv = np.linalg.inv(S)
        Gv = np.einsum("cp,cpia,cpja->cij", wdet, grad, spaces.V.basis_values(pts))
        Gu = np.einsum("cp,cpia,pja->cij", wdet, grad, spaces.W.ref.eval(pts))
        Av = -material.rho_a[:, None, None] * (Sinv @ Gv)
        Au = -material.rho_u[:, None, None] * (Sinv @ Gu)
        nc, dim = mesh.n_cells, self.space.ref.dim
        rows = (np.arange(nc)[:, None] * dim + 1 + np.arange(dim - 1))
        self._Av = _block_sparse(rows, spaces.V.cell_dofs, Av, (nc * dim, spaces.V.n_dofs))
        self._Au = _block_sparse(rows, spaces.W.cell_dofs, Au, (nc * dim, spaces.W.n_dofs))
        self._Sinv = Sinv
        self._grad = grad
        self._wdet = wdet
        self._nc, self._dim = nc, dim

    def __call__(self, U_n, U_np1, dt, f_half=None, t_half=None):
        dv = (U_np1.v - U_n.v) / dt
        u_half = 0.5 * (U_n.u + U_np1.u)
        p_half = 0.5 * (U_n.p + U_np1.p)
        coeffs = self._Av @ dv + self._Au @ u_half
        coeffs = coeffs.reshape(self._nc, self._dim)
        if f_half is not None:
            rhs = np.einsum("cp,cpa,cpia->ci", self._wdet, np.asarray(f_half(self._x)), self._grad)
            coeffs[:, 1:] += np.einsum("cij,cj->ci", self._Sinv, rhs)
        coeffs[:, 0] = p_half.reshape(self._nc, -1)[:, 0]
        return PostState(FEFunction(self.space, coeffs.ravel()), t_half)


def _block_sparse(rows, cols, blocks, shape):
    r = np.broadcast_to(rows[:, :, None], blocks.shape)
    c = np.broadcast_to(cols[:, None, :], blocks.shape)
    return sp.csr_matrix((blocks.ravel(), (r.ravel(), c.ravel())), shape=shape)


def postprocess_pressure(spaces, U_n, U_np1, material, dt, f_half=None, t_half=None):
    """One-shot p* for two consecutive CN states."""
    return PressurePostprocessor(spaces, material)(U_n, U_np1, dt, f_half, t_half)
