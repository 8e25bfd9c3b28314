import math

import numpy as np
import pytest
import scipy.optimize
from hypothesis import given, settings
from hypothesis import strategies as st

from bellkit.core_stats import CHSH_SCENARIO, CorrelatorVector, correlators, white_noise
from bellkit.errors import SuperQuantumS, WrongScenario
from bellkit.ns_boxes import pr_box
from bellkit.quantum_bell import PAULI_OPTIMAL, singlet_behavior
from bellkit.quantum_kernel import born_behavior, random_density_matrix, random_dichotomic
from bellkit.quantum_set import (
    MomentMatrix,
    arcsin_criterion,
    block_optimize_marginal,
    correlator_moment_matrix,
    macroscopic_covariance,
    ml_feasibility,
    npa_q1_matrix,
    q1_feasibility,
    randomness_bound,
    randomness_curve_achievability,
)

R = 1 / math.sqrt(2)
TSIRELSON_POINT = CorrelatorVector(np.array([[R, R], [R, -R]]))
PR = CorrelatorVector(np.array([[1.0, 1.0], [1.0, -1.0]]))


def test_tsirelson_point_has_unique_completion():
    mm = correlator_moment_matrix(TSIRELSON_POINT)
    res = q1_feasibility(mm)
    assert res.feasible
    assert abs(res.best_min_eigenvalue) <= 1e-9
    assert np.allclose(res.witness_assignment, 0, atol=1e-5)
    for u in ([0.01, 0], [0, -0.01], [0.01, 0.01]):
        assert mm.min_eig(np.array(u)) < 0


def test_zero_correlators():
    res = q1_feasibility(correlator_moment_matrix(CorrelatorVector(np.zeros((2, 2)))))
    assert res.feasible
    assert res.best_min_eigenvalue == pytest.approx(1, abs=1e-9)
    assert np.allclose(res.witness_assignment, 0, atol=1e-5)


def test_pr_correlators_infeasible():
    res = q1_feasibility(correlator_moment_matrix(PR))
    assert not res.feasible
    assert res.best_min_eigenvalue < -0.1


def test_moment_matrix_wrong_scenario():
    with pytest.raises(WrongScenario):
        correlator_moment_matrix(CorrelatorVector(np.zeros((3, 2))))


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_born_correlators_are_feasible(seed):
    rng = np.random.default_rng(seed)
    da, db = int(rng.integers(2, 5)), int(rng.integers(2, 5))
    rho = random_density_matrix(da * db, rng)
    b = born_behavior(rho, [random_dichotomic(da, rng) for _ in range(2)],
                      [random_dichotomic(db, rng) for _ in range(2)], dims=(da, db))
    assert q1_feasibility(correlator_moment_matrix(correlators(b)), tol=1e-9).feasible


def test_arcsin_examples():
    sat = arcsin_criterion(TSIRELSON_POINT)
    assert sat.lhs == math.pi and sat.satisfied
    pr = arcsin_criterion(PR)
    assert pr.lhs == pytest.approx(2 * math.pi) and not pr.satisfied
    assert arcsin_criterion(CorrelatorVector(np.zeros((2, 2)))).lhs == 0


def test_arcsin_is_relabeling_invariant():
    # Moving the minus sign to another entry is a relabeling of settings.
    moved = CorrelatorVector(np.array([[-R, R], [R, R]]))
    assert arcsin_criterion(moved).lhs == pytest.approx(math.pi)


@pytest.mark.slow
def test_q1_agrees_with_arcsin_on_random_vectors():
    rng = np.random.default_rng(2009)
    checked = 0
    while checked < 1000:
        # Half uniform in the cube, half shrunk toward the quantum boundary.
        e = rng.uniform(-1, 1, size=(2, 2))
        if checked % 2:
            e *= rng.uniform(0.5, 1.0)
        c = CorrelatorVector(e)
        arc = arcsin_criterion(c)
        if abs(arc.lhs - math.pi) < 1e-6:
            continue
        res = q1_feasibility(correlator_moment_matrix(c), tol=1e-9)
        assert res.feasible == arc.satisfied, (e, arc.lhs, res.best_min_eigenvalue)
        checked += 1


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=100, deadline=None)
def test_min_eigenvalue_is_concave(seed):
    rng = np.random.default_rng(seed)
    n = 5
    base = rng.uniform(-1, 1, size=(n, n))
    base = (base + base.T) / 2
    free = ((0, 1), (2, 4), (1, 3))
    mm = MomentMatrix(base, free, ((-1.0, 1.0),) * 3)
    u, v = rng.uniform(-1, 1, size=(2, 3))
    mid = mm.min_eig((u + v) / 2)
    assert mid >= (mm.min_eig(u) + mm.min_eig(v)) / 2 - 1e-10


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=20, deadline=None)
def test_ascent_matches_grid_search_with_three_free_entries(seed):
    rng = np.random.default_rng(seed)
    base = np.eye(5) + 0.4 * rng.uniform(-1, 1, size=(5, 5))
    base = (base + base.T) / 2
    mm = MomentMatrix(base, ((0, 1), (2, 3), (1, 4)), ((-1.0, 1.0),) * 3)
    res = q1_feasibility(mm)
    g = np.linspace(-1, 1, 21)
    U = np.stack(np.meshgrid(g, g, g, indexing="ij"), axis=-1).reshape(-1, 3)
    assert res.best_min_eigenvalue >= mm.min_eig(U).max() - 1e-9
    assert mm.min_eig(res.witness_assignment) == pytest.approx(res.best_min_eigenvalue, abs=1e-12)


def test_npa_matrix_separates_singlet_and_pr():
    singlet = singlet_behavior(PAULI_OPTIMAL.alice, PAULI_OPTIMAL.bob)
    assert q1_feasibility(npa_q1_matrix(singlet)).feasible
    assert not q1_feasibility(npa_q1_matrix(pr_box())).feasible
    assert q1_feasibility(npa_q1_matrix(white_noise(CHSH_SCENARIO))).feasible


@pytest.mark.parametrize("s,p", [(2 * math.sqrt(2), 0.5), (2.0, 1.0), (1.5, 1.0),
                                 (math.sqrt(6), 0.5 * (1 + math.sqrt(0.5)))])
def test_randomness_bound_values(s, p):
    assert randomness_bound(s) == pytest.approx(p, abs=1e-15)


def test_randomness_bound_rejects_super_quantum():
    with pytest.raises(SuperQuantumS):
        randomness_bound(2.9)
    assert randomness_bound(2 * math.sqrt(2) + 5e-10) == 0.5


def test_randomness_bound_monotone():
    s = np.linspace(2, 2 * math.sqrt(2), 2001)
    p = np.array([randomness_bound(x) for x in s])
    assert np.all(np.diff(p) < 0)


@pytest.mark.parametrize("theta", [math.pi / 4, math.pi / 8, 0.05, 0.6])
def test_curve_is_achieved(theta):
    pt = randomness_curve_achievability(theta)
    assert pt.on_curve
    assert pt.p_marginal == pytest.approx(0.5 * (1 + math.cos(2 * theta)), abs=1e-12)


def test_curve_limit_at_small_theta():
    pt = randomness_curve_achievability(1e-6)
    assert pt.s == pytest.approx(2, abs=1e-10) and pt.p_marginal == pytest.approx(1, abs=1e-10)


@pytest.mark.slow
@pytest.mark.parametrize("s", [2.0, 2.5, 2 * math.sqrt(2)])
def test_constrained_search_oracle(s):
    assert block_optimize_marginal(s) == pytest.approx(randomness_bound(s), abs=1e-4)


def test_covariance_white_noise_is_diagonal():
    mm = macroscopic_covariance(white_noise(CHSH_SCENARIO))
    assert np.allclose(mm.base, np.diag(np.diag(mm.base)))
    assert np.allclose(np.diag(mm.base), 0.25)
    assert ml_feasibility(white_noise(CHSH_SCENARIO)).feasible


def test_covariance_entries_for_pr_box():
    mm = macroscopic_covariance(pr_box())
    # Rows A0:0, A1:0, B0:0, B1:0; P(00|xy) - 1/4 is 1/4 unless x = y = 1.
    assert np.allclose(mm.base[:2, 2:], [[0.25, 0.25], [0.25, -0.25]])
    assert mm.free == ((0, 1), (2, 3))
    res = ml_feasibility(pr_box())
    assert not res.feasible


def test_macroscopic_locality_on_quantum_and_pr():
    singlet = singlet_behavior(PAULI_OPTIMAL.alice, PAULI_OPTIMAL.bob)
    assert ml_feasibility(singlet).feasible
    assert not ml_feasibility(pr_box()).feasible


def factorization_oracle(mm, seed=0, restarts=3):
    """max t subject to M(u) - t·1 = L Lᵀ, solved with SLSQP from a few starts."""
    n, k = mm.size, len(mm.free)
    tri = np.tril_indices(n)
    lo = np.array([b[0] for b in mm.bounds])
    hi = np.array([b[1] for b in mm.bounds])

    def unpack(z):
        L = np.zeros((n, n))
        L[tri] = z[k + 1:]
        return z[:k], z[k], L

    def residual(z):
        u, t, L = unpack(z)
        return (mm.matrix(u) - t * np.eye(n) - L @ L.T)[tri]

    rng = np.random.default_rng(seed)
    best = -np.inf
    for _ in range(restarts):
        u0 = rng.uniform(lo, hi) * 0.1
        t0 = np.linalg.eigvalsh(mm.matrix(u0))[0] - 1e-3
        z0 = np.concatenate([u0, [t0], np.linalg.cholesky(mm.matrix(u0) - t0 * np.eye(n))[tri]])
        res = scipy.optimize.minimize(
            lambda z: -z[k], z0, jac=lambda z: -np.eye(z.size)[k], method="SLSQP",
            constraints=[{"type": "eq", "fun": residual}],
            bounds=list(zip(lo, hi)) + [(None, None)] * (1 + len(tri[0])),
            options={"ftol": 1e-14, "maxiter": 2000},
        )
        u, _, _ = unpack(res.x)
        best = max(best, float(np.linalg.eigvalsh(mm.matrix(np.clip(u, lo, hi)))[0]))
    return best


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=15, deadline=None)
def test_ascent_matches_factorization_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 7))
    base = np.eye(n) + rng.uniform(-0.6, 0.6, size=(n, n))
    base = (base + base.T) / 2
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    free = tuple(pairs[i] for i in rng.choice(len(pairs), size=int(rng.integers(3, 6)), replace=False))
    mm = MomentMatrix(base, free, ((-1.0, 1.0),) * len(free))
    res = q1_feasibility(mm)
    assert res.best_min_eigenvalue >= factorization_oracle(mm) - 1e-8


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=5, deadline=None)
def test_macroscopic_locality_holds_for_quantum_three_outcome(seed):
    rng = np.random.default_rng(seed)
    rho = random_density_matrix(9, rng)

    def povm():
        u = np.linalg.qr(rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)))[0]
        return [np.outer(u[:, k], u[:, k].conj()) for k in range(3)]

    b = born_behavior(rho, [povm(), povm()], [povm(), povm()])
    res = ml_feasibility(b, tol=1e-8)
    assert res.feasible
    assert res.best_min_eigenvalue == pytest.approx(factorization_oracle(macroscopic_covariance(b)), abs=1e-8)
