import time

import numpy as np
import pytest

from metawave.assembly import assemble_blocks
from metawave.audit import audit_material, random_state
from metawave.fespace import MixedSpaces, StateVector, project_l2
from metawave.mesh import unit_square
from metawave.mms import convergence_study, weighted_error
from metawave.postprocess import PressurePostprocessor, postprocess_pressure, reconstruction_space
from metawave.quadrature import quadrature
from metawave.stepper import CNSystem

PAIRINGS = ["bdm1", "rtn0", "bdm2", "rtn1"]


def cell_means(space, coeffs):
    q = quadrature(8)
    vals = space.cell_values(coeffs, q.points)
    return 2.0 * vals @ q.weights


@pytest.mark.parametrize("pairing", PAIRINGS)
def test_reconstruction_space_degree(pairing):
    spaces = MixedSpaces(unit_square(2), pairing)
    assert reconstruction_space(spaces).family.degree == spaces.k + 2


@pytest.mark.parametrize("pairing", PAIRINGS)
def test_constant_pressure_reproduced(pairing):
    mesh = unit_square(4)
    spaces = MixedSpaces(mesh, pairing)
    material = audit_material(mesh)
    U = StateVector(spaces)
    U.block("p")[:] = project_l2(spaces.Q, lambda x: 3.5 * np.ones(x.shape[:-1])).coeffs
    ps = postprocess_pressure(spaces, U, U.copy(), material, 0.1)
    q = quadrature(6)
    np.testing.assert_allclose(ps.p_star.space.cell_values(ps.p_star.coeffs, q.points), 3.5, atol=1e-12)


@pytest.mark.parametrize("pairing", PAIRINGS)
def test_polynomial_pressure_recovered_from_source(pairing):
    # v, u frozen at zero and f = grad P with P in P_{k+2}: p* = P exactly
    mesh = unit_square(4)
    spaces = MixedSpaces(mesh, pairing)
    k = spaces.k
    material = audit_material(mesh)
    P = lambda x: x[..., 0] ** (k + 2) - 2 * x[..., 0] * x[..., 1] ** (k + 1) + x[..., 1]  # noqa: E731

    def gradP(x):
        X, Y = x[..., 0], x[..., 1]
        return np.stack([(k + 2) * X ** (k + 1) - 2 * Y ** (k + 1),
                         -2 * (k + 1) * X * Y**k + 1.0], -1)

    U = StateVector(spaces)
    U.block("p")[:] = project_l2(spaces.Q, P).coeffs
    ps = postprocess_pressure(spaces, U, U.copy(), material, 0.1, f_half=gradP)
    assert weighted_error(ps.p_star.space, ps.p_star.coeffs, P) <= 1e-12


@pytest.mark.parametrize("pairing", PAIRINGS)
def test_cell_means_preserved(pairing):
    mesh = unit_square(8)
    spaces = MixedSpaces(mesh, pairing)
    material = audit_material(mesh)
    A = random_state(spaces, material, seed=1)
    B = random_state(spaces, material, seed=2)
    ps = PressurePostprocessor(spaces, material)(A, B, 0.05)
    p_half = 0.5 * (A.p + B.p)
    np.testing.assert_allclose(cell_means(ps.p_star.space, ps.p_star.coeffs),
                               cell_means(spaces.Q, p_half), atol=1e-12)


@pytest.mark.parametrize("pairing", ["rtn0", "bdm2"])
def test_locality(pairing):
    mesh = unit_square(8)
    spaces = MixedSpaces(mesh, pairing)
    material = audit_material(mesh)
    post = PressurePostprocessor(spaces, material)
    A = random_state(spaces, material, seed=4)
    B = random_state(spaces, material, seed=5)
    base = post(A, B, 0.1).p_star.coeffs.reshape(mesh.n_cells, -1)
    edge = mesh.interior_edges[7]
    C = B.copy()
    C.v[spaces.V.ref.n_edge_dofs * edge] += 1.0
    pert = post(A, C, 0.1).p_star.coeffs.reshape(mesh.n_cells, -1)
    changed = np.flatnonzero(np.abs(pert - base).max(axis=1) > 0)
    assert set(changed) == set(mesh.edge_cells[edge].tolist())


@pytest.mark.parametrize("pairing", ["bdm1", "rtn1", "bdm2"])
def test_cost_below_tenth_of_a_step(pairing):
    mesh = unit_square(32)
    spaces = MixedSpaces(mesh, pairing)
    material = audit_material(mesh)
    system = CNSystem(assemble_blocks(spaces, material), 0.01)
    post = PressurePostprocessor(spaces, material)
    U = random_state(spaces, material)
    V = system.step(U)

    def best(f, reps=7):
        times = []
        for _ in range(reps):
            t0 = time.perf_counter()
            f()
            times.append(time.perf_counter() - t0)
        return min(times)

    t_step = best(lambda: system.step(U))
    t_post = best(lambda: post(U, V, 0.01))
    assert t_post <= 0.1 * t_step, (t_post, t_step)


def test_rtn_reconstruction_beats_pressure():
    rep = convergence_study("rtn0", levels=(8, 16), dt_policy="h2")
    assert all(a < b for a, b in zip(rep.errors("p*"), rep.errors("p")))
    assert rep.final_rate("p*") >= rep.final_rate("p")
    assert rep.final_rate("p*") > 1.8
