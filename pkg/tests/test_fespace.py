import numpy as np
import pytest

from metawave.fespace import (FEFunction, FESpace, MixedSpaces, StateVector, interpolate_canonical,
                              project_l2)
from metawave.mesh import Mesh, build_structured, unit_square
from metawave.mms import weighted_error
from metawave.quadrature import gauss_interval, quadrature

HDIV = ["RTN0", "RTN1", "RTN2", "BDM1", "BDM2", "BDM3"]
DIV_RANGE = {"RTN0": "P0", "RTN1": "P1", "RTN2": "P2", "BDM1": "P0", "BDM2": "P1", "BDM3": "P2"}


def pointwise(fef):
    """Vectorised evaluation of an FEFunction at arbitrary physical points."""
    def f(pts):
        flat = pts.reshape(-1, 2)
        vals = np.array([fef(p) for p in flat])
        return vals.reshape(pts.shape[:-1] + vals.shape[1:])
    return f


def smooth_field(x):
    return np.stack([np.sin(x[..., 0]) * np.cos(x[..., 1]), x[..., 0] ** 2 * x[..., 1]], -1)


def smooth_div(x):
    return np.cos(x[..., 0]) * np.cos(x[..., 1]) + x[..., 0] ** 2


@pytest.mark.parametrize("name", HDIV)
def test_constant_field_reproduced(name):
    V = FESpace(unit_square(3), name)
    I = interpolate_canonical(V, lambda x: np.broadcast_to([1.0, 0.0], x.shape).copy())
    q = quadrature(4)
    vals = V.cell_values(I.coeffs, q.points)
    assert np.allclose(vals[..., 0], 1.0, atol=1e-12)
    assert np.allclose(vals[..., 1], 0.0, atol=1e-12)


@pytest.mark.parametrize("name", ["RTN0", "RTN1", "BDM1", "BDM2"])
def test_discrete_member_reproduced(name):
    V = FESpace(unit_square(2), name)
    c = np.random.default_rng(0).standard_normal(V.n_dofs)
    I = interpolate_canonical(V, pointwise(FEFunction(V, c)))
    assert np.allclose(I.coeffs, c, atol=1e-10)


@pytest.mark.parametrize("name", HDIV)
def test_commuting_diagram(name):
    mesh = unit_square(8)
    V = FESpace(mesh, name)
    Q = FESpace(mesh, DIV_RANGE[name])
    rng = np.random.default_rng(1)
    fields = [(smooth_field, smooth_div)]
    for _ in range(10):
        a, b, c, d = rng.uniform(-3, 3, 4)
        fields.append((
            lambda x, a=a, b=b, c=c, d=d: np.stack([np.sin(a * x[..., 0] + b * x[..., 1]),
                                                    np.cos(c * x[..., 0] - d * x[..., 1])], -1),
            lambda x, a=a, b=b, c=c, d=d: (a * np.cos(a * x[..., 0] + b * x[..., 1])
                                           + d * np.sin(c * x[..., 0] - d * x[..., 1])),
        ))
    q = quadrature(10)
    for v, div_v in fields:
        I = interpolate_canonical(V, v)
        P = project_l2(Q, div_v)
        diff = V.cell_divergence(I.coeffs, q.points) - Q.cell_values(P.coeffs, q.points)
        err = np.sqrt(np.sum(mesh.jacobians()[1] * (diff**2 @ q.weights)))
        assert err <= 1e-10


@pytest.mark.parametrize("name", HDIV)
def test_normal_trace_continuity(name):
    mesh = build_structured((0.0, 1.5, -0.5, 1.0), 4)
    V = FESpace(mesh, name)
    c = np.random.default_rng(2).standard_normal(V.n_dofs)
    f = FEFunction(V, c)
    s, _ = gauss_interval(5)
    normals = mesh.edge_normals()
    worst = 0.0
    for e in mesh.interior_edges:
        a, b = mesh.vertices[mesh.edges[e]]
        for t in s:
            x = a + t * (b - a)
            c0, c1 = mesh.edge_cells[e]
            jump = (f.evaluate(c0, x) - f.evaluate(c1, x)) @ normals[e]
            worst = max(worst, abs(jump))
    assert worst <= 1e-10


@pytest.mark.parametrize("name", HDIV)
def test_mapped_divergence_theorem(name):
    mesh = Mesh([[0.1, 0.2], [1.3, 0.5], [0.4, 1.1]], [[0, 1, 2]])
    V = FESpace(mesh, name)
    q = quadrature(10)
    lhs = (mesh.jacobians()[1][0] * q.weights) @ V.basis_divergence(q.points)[0]
    s, w = gauss_interval(8)
    rhs = np.zeros(V.ref.dim)
    for e, (i, j) in enumerate(((1, 2), (0, 2), (0, 1))):
        a, b = mesh.vertices[i], mesh.vertices[j]
        t = b - a
        n = np.array([t[1], -t[0]]) / np.linalg.norm(t)
        if n @ (0.5 * (a + b) - mesh.centroids()[0]) < 0:
            n = -n
        for si, wi in zip(s, w):
            x = a + si * t
            ref = np.linalg.solve(V._J[0], x - V._x0[0])
            vals = V.basis_values(ref[None])[0, 0]
            rhs += wi * np.linalg.norm(t) * (vals @ n)
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_piola_identity_and_scaling():
    ref_mesh = Mesh([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]])
    V = FESpace(ref_mesh, "BDM1")
    pts = np.array([[0.2, 0.3], [0.6, 0.1]])
    signs = V.cell_signs[0]
    assert np.allclose(V.basis_values(pts)[0], V.ref.eval(pts) * signs[None, :, None])
    s = 3.0
    big = Mesh([[0, 0], [s, 0], [0, s]], [[0, 1, 2]])
    W = FESpace(big, "BDM1")
    assert np.allclose(W.basis_divergence(pts)[0], V.basis_divergence(pts)[0] / s**2)
    assert np.allclose(W.basis_values(pts)[0], V.basis_values(pts)[0] / s)


@pytest.mark.parametrize("name,k", [("P0", 0), ("P1", 1), ("P2", 2), ("P1^2", 1)])
def test_projection_reproduces_polynomials_and_is_idempotent(name, k):
    mesh = unit_square(3)
    S = FESpace(mesh, name)
    rng = np.random.default_rng(3)
    exps = [(i - j, j) for i in range(k + 1) for j in range(i + 1)]
    a = rng.standard_normal(len(exps))

    def poly(x):
        return sum(c * x[..., 0] ** i * x[..., 1] ** j for c, (i, j) in zip(a, exps))

    if S.is_vector:
        func = lambda x: np.stack([poly(x), 2 * poly(x)], -1)  # noqa: E731
    else:
        func = poly
    P = project_l2(S, func)
    q = quadrature(8)
    vals = S.cell_values(P.coeffs, q.points)
    assert np.allclose(vals, func(mesh.map_points(q.points)), atol=1e-12)
    again = project_l2(S, lambda x: np.array([[P.evaluate(c, xi) for xi in xc] for c, xc in enumerate(x)]))
    assert np.allclose(again.coeffs, P.coeffs, atol=1e-12)


def test_projection_of_x_onto_p0_is_centroid():
    mesh = Mesh([[0.1, 0.2], [1.3, 0.5], [0.4, 1.1]], [[0, 1, 2]])
    P = project_l2(FESpace(mesh, "P0"), lambda x: x[..., 0])
    assert P.coeffs[0] == pytest.approx(mesh.centroids()[0, 0], rel=1e-14)


@pytest.mark.parametrize("name,k", [("P0", 0), ("P1", 1), ("P2", 2)])
def test_projection_rate(name, k):
    f = lambda x: np.sin(3 * x[..., 0]) * np.exp(x[..., 1])  # noqa: E731
    errs = []
    for N in (8, 16, 32):
        S = FESpace(unit_square(N), name)
        errs.append(weighted_error(S, project_l2(S, f).coeffs, f))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(rates - (k + 1)) < 0.15)


def test_weighted_projection():
    mesh = unit_square(2)
    S = FESpace(mesh, "P1")
    w = np.arange(mesh.n_cells, dtype=float)
    f = lambda x: x[..., 0] + x[..., 1]  # noqa: E731
    assert np.allclose(project_l2(S, f, weight=w).coeffs.reshape(mesh.n_cells, -1),
                       w[:, None] * project_l2(S, f).coeffs.reshape(mesh.n_cells, -1))


def test_evaluate_zero_and_unit_coefficients():
    mesh = unit_square(2)
    V = FESpace(mesh, "RTN1")
    pt = mesh.centroids()[3]
    assert np.allclose(FEFunction(V).evaluate(3, pt), 0.0)
    i = 5
    c = np.zeros(V.n_dofs)
    c[V.cell_dofs[3, i]] = 1.0
    expected = V.basis_values(np.array([[1 / 3, 1 / 3]]), cells=[3])[0, 0, i]
    assert np.allclose(FEFunction(V, c).evaluate(3, pt), expected)
    with pytest.raises(ValueError):
        FEFunction(V, c).evaluate(3, [0.99, 0.01])


@pytest.mark.parametrize("name,order", [("RTN0", 1), ("BDM1", 2), ("RTN1", 2), ("BDM2", 3)])
def test_interpolation_round_trip_accuracy(name, order):
    errs = []
    for N in (4, 8):
        V = FESpace(unit_square(N), name)
        I = interpolate_canonical(V, smooth_field)
        rng = np.random.default_rng(4)
        pts = rng.uniform(0.05, 0.95, (20, 2))
        errs.append(max(np.linalg.norm(I(p) - smooth_field(p)) for p in pts))
    assert errs[1] < errs[0]
    assert errs[1] < 0.1 * (1 / 8) ** order * 10


def test_wrong_coefficient_length():
    with pytest.raises(ValueError):
        FEFunction(FESpace(unit_square(1), "P0"), np.zeros(3))


def test_mixed_spaces_layout():
    mesh = unit_square(2)
    sp = MixedSpaces(mesh, "rtn1")
    assert sp.k == 1
    sizes = {f: s.stop - s.start for f, s in sp.slices.items()}
    assert sizes["u"] == sizes["w"] == sp.W.n_dofs
    assert sizes["p"] == sizes["q"] == sizes["r"] == sp.Q.n_dofs
    assert sum(sizes.values()) == sp.n_dofs
    U = StateVector.from_blocks(sp, p=np.ones(sp.Q.n_dofs))
    assert np.all(U.p == 1) and np.all(U.v == 0)
    with pytest.raises(ValueError):
        MixedSpaces(mesh, "taylor-hood")
