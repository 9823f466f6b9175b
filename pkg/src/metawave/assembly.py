"""Sparse assembly of the mass, divergence and coupling blocks.

All integrands are polynomial on each cell because coefficients are
piecewise constant, so every matrix below is integrated exactly.
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .quadrature import gauss_interval, quadrature
from .refelem import REF_EDGES, REF_VERTICES

FIELDS = ("v", "p", "u", "w", "q", "r")


def _rule_for(*spaces):
    return quadrature(min(max(1, sum(s.ref.D for s in spaces) + 2), 10))


def _check_weight(weight, n_cells):
    if weight is None:
        return np.ones(n_cells)
    w = np.broadcast_to(np.asarray(weight, dtype=float), (n_cells,))
    bad = np.flatnonzero(~(w >= 0))
    if bad.size:
        raise ValueError(f"negative or invalid weight on cells {bad[:10].tolist()}")
    return w


def _scatter(rows_space, cols_space, local):
    """COO -> CSR from local (nc, nrow, ncol) blocks already carrying signs."""
    r = np.broadcast_to(rows_space.cell_dofs[:, :, None], local.shape)
    c = np.broadcast_to(cols_space.cell_dofs[:, None, :], local.shape)
    mat = sp.coo_matrix((local.ravel(), (r.ravel(), c.ravel())),
                        shape=(rows_space.n_dofs, cols_space.n_dofs)).tocsr()
    mat.sum_duplicates()
    mat.eliminate_zeros()
    return mat


def assemble_mass(space, weight=None):
    """(weight phi_j, phi_i) over ``space``; weight is per-cell and >= 0."""
    mesh = space.mesh
    w = _check_weight(weight, mesh.n_cells)
    q = _rule_for(space, space)
    det = mesh.jacobians()[1]
    if space.is_hdiv:
        J = space._J
        hat = space.ref.eval(q.points)
        G = np.einsum("cab,cad->cbd", J, J)
        loc = np.einsum("p,pia,cab,pjb->cij", q.weights, hat, G, hat) / det[:, None, None]
        s = space.cell_signs
        loc *= s[:, :, None] * s[:, None, :]
    else:
        hat = space.ref.eval(q.points)
        if space.is_vector:
            ref_loc = np.einsum("p,pia,pja->ij", q.weights, hat, hat)
        else:
            ref_loc = np.einsum("p,pi,pj->ij", q.weights, hat, hat)
        loc = det[:, None, None] * ref_loc[None]
    loc = 0.5 * (loc + loc.transpose(0, 2, 1))
    loc *= w[:, None, None]
    return _scatter(space, space, loc)


def assemble_div(V, Q):
    """B[i, j] = (div phi_j, psi_i): Q_h rows, V_h columns."""
    if V.mesh is not Q.mesh:
        raise ValueError("spaces live on different meshes")
    q = _rule_for(V, Q)
    dhat = V.ref.div(q.points)
    psi = Q.ref.eval(q.points)
    # det J cancels between the Piola divergence and the measure
    ref_loc = np.einsum("p,pi,pj->ij", q.weights, psi, dhat)
    loc = ref_loc[None] * V.cell_signs[:, None, :]
    return _scatter(Q, V, loc)


def assemble_cross(V, W, weight=None):
    """X[i, j] = (weight phi_j, chi_i): W_h rows, V_h columns."""
    if V.mesh is not W.mesh:
        raise ValueError("spaces live on different meshes")
    w = _check_weight(weight, V.mesh.n_cells)
    q = _rule_for(V, W)
    hat = V.ref.eval(q.points)
    chi = W.ref.eval(q.points)
    # (1/det) J phihat against chi, times det from the measure
    loc = np.einsum("p,pia,cab,pjb->cij", q.weights, chi, V._J, hat)
    loc *= V.cell_signs[:, None, :] * w[:, None, None]
    return _scatter(W, V, loc)


def assemble_load(space, func, quad_degree=10):
    """Load vector (func, phi_i) for a callable on physical points."""
    mesh = space.mesh
    q = quadrature(quad_degree)
    x = mesh.map_points(q.points)
    vals = np.asarray(func(x), dtype=float)
    det = mesh.jacobians()[1]
    phi = space.basis_values(q.points)
    if space.is_vector:
        loc = np.einsum("p,cpa,cpia->ci", q.weights, vals, phi)
    else:
        loc = np.einsum("p,cp,cpi->ci", q.weights, vals, phi)
    loc *= det[:, None]
    out = np.zeros(space.n_dofs)
    np.add.at(out, space.cell_dofs.ravel(), loc.ravel())
    return out


def _boundary_traces(V, edges, npts):
    """Quadrature data on boundary edges: points, weights (ds), normal traces.

    Returns (x, w, phin, dofs) with x (nb, nq, 2), w (nb, nq), phin
    (nb, nq, dim) the outward normal trace of each local basis function, and
    dofs (nb, dim).
    """
    mesh = V.mesh
    edges = np.asarray(edges, dtype=np.int64)
    s, ws = gauss_interval(npts)
    cells = mesh.edge_cells[edges, 0]
    if np.any(mesh.edge_cells[edges, 1] >= 0):
        raise ValueError("boundary load requested on interior edges")
    loc_e = np.argmax(mesh.cell_edges[cells] == edges[:, None], axis=1)
    a = np.array([REF_EDGES[e][0] for e in range(3)])[loc_e]
    b = np.array([REF_EDGES[e][1] for e in range(3)])[loc_e]
    ref_pts = REF_VERTICES[a][:, None, :] + s[None, :, None] * (REF_VERTICES[b] - REF_VERTICES[a])[:, None, :]
    J, det, x0 = V._J[cells], V._det[cells], V._x0[cells]
    x = x0[:, None, :] + np.einsum("cij,cpj->cpi", J, ref_pts)
    nb, nq = ref_pts.shape[:2]
    hat = V.ref.eval(ref_pts.reshape(-1, 2)).reshape(nb, nq, V.ref.dim, 2)
    phys = np.einsum("cab,cpib->cpia", J, hat) / det[:, None, None, None]
    phys *= V.cell_signs[cells][:, None, :, None]
    n_out = mesh.edge_normals()[edges] * mesh.cell_edge_signs[cells, loc_e][:, None]
    phin = np.einsum("cpia,ca->cpi", phys, n_out)
    w = ws[None, :] * mesh.edge_lengths()[edges][:, None]
    return x, w, phin, V.cell_dofs[cells]


def assemble_boundary_load(V, p_D, edges, npts=8):
    """-int_{Gamma_D} p_D (phi_i . n) ds over the listed boundary edges."""
    out = np.zeros(V.n_dofs)
    if len(edges) == 0:
        return out
    x, w, phin, dofs = _boundary_traces(V, edges, npts)
    vals = np.asarray(p_D(x), dtype=float)
    loc = -np.einsum("cp,cp,cpi->ci", w, vals, phin)
    np.add.at(out, dofs.ravel(), loc.ravel())
    return out


def normal_bc_values(V, edges, v_N, npts=8):
    """Edge DOF values imposing v . n = v_N (n outward) on the listed edges.

    Returns (dofs, values) for the edge-moment DOFs of those edges.
    """
    from scipy.special import eval_sh_legendre

    mesh = V.mesh
    edges = np.asarray(edges, dtype=np.int64)
    ned = V.ref.n_edge_dofs
    if edges.size == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    s, ws = gauss_interval(npts)
    ev = mesh.vertices[mesh.edges[edges]]
    x = ev[:, None, 0] + s[None, :, None] * (ev[:, None, 1] - ev[:, None, 0])
    cells = mesh.edge_cells[edges, 0]
    loc_e = np.argmax(mesh.cell_edges[cells] == edges[:, None], axis=1)
    orient = mesh.cell_edge_signs[cells, loc_e].astype(float)  # n_out . n_global
    vals = np.asarray(v_N(x), dtype=float) * orient[:, None]
    L = np.array([eval_sh_legendre(m, s) for m in range(ned)])
    mom = np.einsum("eq,q,mq->em", vals, ws, L) * mesh.edge_lengths()[edges][:, None]
    dofs = edges[:, None] * ned + np.arange(ned)
    return dofs.ravel(), mom.ravel()


@dataclass
class SystemBlocks:
    """Every matrix of the semi-discrete system for one mesh and material."""

    spaces: object
    M_v: sp.csr_matrix  # (rho_a v, v')
    M_p: sp.csr_matrix  # (kappa_a^{-1} p, p')
    M_W: sp.csr_matrix  # (u, u') on W_h
    M_Q: sp.csr_matrix  # (q, q') on Q_h
    B: sp.csr_matrix  # (div v, p')
    X: sp.csr_matrix  # (v, u'): W_h x V_h
    X_rho: sp.csr_matrix  # (rho_u v, u'): W_h x V_h
    C_qp: sp.csr_matrix  # (rho_q q, p') on Q_h
    omega_rho: float
    omega_kappa: float
    gamma: float

    def mass(self):
        """Block-diagonal time-derivative matrix in (v, p, u, w, q, r) order."""
        return sp.block_diag([self.M_v, self.M_p, self.M_W, self.M_W, self.M_Q, self.M_Q],
                             format="csr")

    def stiffness(self):
        """All non-time-derivative couplings, signs as in the weak form."""
        B, X, Xr = self.B, self.X, self.X_rho
        MW, MQ = self.M_W, self.M_Q
        wr2, wk2, g = self.omega_rho**2, self.omega_kappa**2, self.gamma
        Z = None
        rows = [
            [Z, -B.T, Xr.T, Z, Z, Z],
            [B, Z, Z, Z, self.C_qp, Z],
            [-X, Z, Z, wr2 * MW, Z, Z],
            [Z, Z, -MW, Z, Z, Z],
            [Z, -MQ, Z, Z, g * MQ if g else Z, wk2 * MQ],
            [Z, Z, Z, Z, -MQ, Z],
        ]
        sizes = [self.M_v.shape[0], self.M_p.shape[0], MW.shape[0], MW.shape[0],
                 MQ.shape[0], MQ.shape[0]]
        # block matrices need at least one entry per block row/col to infer shapes
        for i in range(6):
            if all(b is None for b in rows[i]):
                rows[i][i] = sp.csr_matrix((sizes[i], sizes[i]))
        K = sp.bmat(rows, format="csr")
        if K.shape != (sum(sizes), sum(sizes)):
            raise ValueError("block dimension mismatch")
        return K


def assemble_blocks(spaces, material):
    """Assemble :class:`SystemBlocks` for a pairing and a material."""
    if material.n_cells != spaces.mesh.n_cells:
        raise ValueError("material and mesh disagree on the number of cells")
    V, Q, W = spaces.V, spaces.Q, spaces.W
    return SystemBlocks(
        spaces=spaces,
        M_v=assemble_mass(V, material.rho_a),
        M_p=assemble_mass(Q, material.kappa_inv),
        M_W=assemble_mass(W),
        M_Q=assemble_mass(Q),
        B=assemble_div(V, Q),
        X=assemble_cross(V, W),
        X_rho=assemble_cross(V, W, material.rho_u),
        C_qp=assemble_mass(Q, material.rho_q),
        omega_rho=float(material.omega_rho),
        omega_kappa=float(material.omega_kappa),
        gamma=float(material.gamma),
    )
