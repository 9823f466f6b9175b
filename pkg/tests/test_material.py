import numpy as np
import pytest

from metawave.fespace import MixedSpaces, StateVector, interpolate_canonical, project_l2
from metawave.material import MaterialField, energy, energy_terms, validate
from metawave.mesh import build_structured, unit_square


def constant_state(spaces, v=(1.0, 0.0), p=1.0, u=(0.0, 0.0), w=(0.0, 0.0), q=0.0, r=0.0):
    const = lambda c: (lambda x: np.broadcast_to(np.asarray(c, float), x.shape[:-1] + np.shape(c)).copy())  # noqa: E731
    U = StateVector(spaces)
    U.data[spaces.slices["v"]] = interpolate_canonical(spaces.V, const(v)).coeffs
    for name, val in (("p", p), ("q", q), ("r", r)):
        U.data[spaces.slices[name]] = project_l2(spaces.Q, const(val)).coeffs
    for name, val in (("u", u), ("w", w)):
        U.data[spaces.slices[name]] = project_l2(spaces.W, const(val)).coeffs
    return U


def test_zero_state_energy():
    sp = MixedSpaces(unit_square(2), "bdm1")
    assert energy(StateVector(sp), MaterialField.uniform(sp.mesh.n_cells)) == 0.0


@pytest.mark.parametrize("pairing", ["rtn0", "bdm1", "rtn1", "bdm2"])
def test_unit_constants_energy(pairing):
    sp = MixedSpaces(unit_square(3), pairing)
    mat = MaterialField.uniform(sp.mesh.n_cells)
    assert energy(constant_state(sp), mat) ** 2 == pytest.approx(2.0, rel=1e-12)


def test_piecewise_energy_closed_form():
    mesh = unit_square(4)
    sp = MixedSpaces(mesh, "rtn1")
    mat = MaterialField.from_regions(
        mesh, {"NIM": {"box": (0.25, 0.75, 0.0, 1.0), "Omega_rho": 2.0, "Omega_kappa": 3.0, "rho_a": 2.0}},
        kappa_a=0.5, omega_rho=1.5, omega_kappa=0.5)
    U = constant_state(sp, v=(1.0, 2.0), p=3.0, u=(1.0, 1.0), w=(0.0, 2.0), q=2.0, r=1.0)
    # PIM half: rho_a = 1, kappa_a = 0.5, no auxiliary weights
    pim = 0.5 * (1.0 * 5.0 + 2.0 * 9.0)
    # NIM half: rho_u = 2*4, rho_w = 2*2.25*4, rho_q = 2*9, rho_r = 2*0.25*9
    nim = 0.5 * (2.0 * 5.0 + 2.0 * 9.0 + 8.0 * 2.0 + 18.0 * 4.0 + 18.0 * 4.0 + 4.5 * 1.0)
    assert energy(U, mat) ** 2 == pytest.approx(pim + nim, rel=1e-12)
    terms = energy_terms(U, mat)
    assert set(terms) == {"v", "p", "u", "w", "q", "r"}


def test_energy_is_a_seminorm():
    mesh = unit_square(3)
    sp = MixedSpaces(mesh, "bdm1")
    mat = MaterialField.from_regions(mesh, {"NIM": {"box": (0, 1 / 3, 0, 1), "Omega_rho": 1, "Omega_kappa": 1}})
    rng = np.random.default_rng(0)
    for _ in range(5):
        a = StateVector(sp, rng.standard_normal(sp.n_dofs))
        b = StateVector(sp, rng.standard_normal(sp.n_dofs))
        s = rng.uniform(-3, 3)
        assert energy(StateVector(sp, s * a.data), mat) == pytest.approx(abs(s) * energy(a, mat), rel=1e-12)
        assert energy(StateVector(sp, a.data + b.data), mat) <= energy(a, mat) + energy(b, mat) + 1e-12


def test_mesh_mismatch():
    sp = MixedSpaces(unit_square(2), "rtn0")
    with pytest.raises(ValueError):
        energy(StateVector(sp), MaterialField.uniform(3))


def slab_material(**kw):
    mesh = build_structured((0, 2, 0, 2), 50)
    return MaterialField.from_regions(
        mesh, {"NIM": {"box": (0.6, 0.8, 0.0, 2.0), "Omega_rho": 80.0, "Omega_kappa": 80.0}},
        omega_rho=40.0, omega_kappa=40.0, **kw)


def test_slab_coefficients_valid():
    mat = slab_material()
    assert validate(mat) == []
    assert np.all(mat.rho_u[mat.region == "NIM"] == 6400.0)
    assert np.all(mat.rho_w[mat.region == "NIM"] == 6400.0 * 1600.0)


def test_zero_kappa_reported():
    mat = MaterialField.uniform(8)
    kappa = mat.kappa_a.copy()
    kappa[5] = 0.0
    issues = validate(mat.updated(kappa_a=kappa))
    assert [(v.kind, v.cells) for v in issues] == [("kappa_a", (5,))]


def test_negative_Omega_reported():
    mat = MaterialField.uniform(4, Omega_rho=-1.0, Omega_kappa=1.0)
    kinds = {v.kind for v in validate(mat)}
    assert "Omega_rho" in kinds


def test_pim_label_with_resonance_reported():
    mat = MaterialField.uniform(3, Omega_rho=1.0, Omega_kappa=1.0, region=np.array(["PIM"] * 3))
    assert {v.kind for v in validate(mat)} == {"pim"}


def test_nonpositive_constants_reported():
    mat = MaterialField.uniform(2, omega_rho=0.0, gamma=-1.0)
    kinds = {v.kind for v in validate(mat)}
    assert {"omega_rho", "gamma"} <= kinds


def test_weights_rederived_after_update():
    mat = MaterialField.uniform(4, rho_a=2.0, kappa_a=4.0, Omega_rho=1.0, Omega_kappa=2.0,
                                omega_rho=3.0, omega_kappa=0.5)
    new = mat.updated(Omega_rho=np.full(4, 2.0), kappa_a=np.full(4, 2.0))
    assert np.array_equal(new.rho_u, new.rho_a * new.Omega_rho**2)
    assert np.array_equal(new.rho_w, new.rho_a * new.omega_rho**2 * new.Omega_rho**2)
    assert np.array_equal(new.rho_q, new.Omega_kappa**2 / new.kappa_a)
    assert np.array_equal(new.rho_r, new.omega_kappa**2 * new.Omega_kappa**2 / new.kappa_a)
    assert np.all(new.rho_u == 8.0) and np.all(new.rho_q == 2.0)


def test_material_arrays_frozen():
    mat = MaterialField.uniform(3)
    with pytest.raises(ValueError):
        mat.rho_a[0] = 2.0
