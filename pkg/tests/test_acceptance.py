"""One test per acceptance criterion, each with its own time budget."""

import time
from contextlib import contextmanager

import numpy as np
import pytest

from bellkit.cli import load_behavior
from bellkit.core_stats import (
    CHSH_SCENARIO,
    CorrelatorVector,
    Scenario,
    chsh_value,
    correlators,
    no_signaling_residual,
    white_noise,
)
from bellkit.local_polytope import chsh_facets, lv_membership
from bellkit.lv_simulators import (
    BUILTIN_STRATEGIES,
    RunConfig,
    detection_cheat,
    memory_lv_run,
    simulate_toner_bacon,
    simulate_werner_half,
    werner_half_expected,
)
from bellkit.ns_boxes import (
    ChainedSpec,
    chained_quantum_behavior,
    chained_value,
    d_points,
    leggett_marginal_bound,
    local_fraction_bound,
    majority_vote_coarse_grain,
    pr_box,
    pr_rac_strategy,
    pr_uniqueness_check,
    rac_classical_bruteforce,
    rac_play,
    random_ns_behavior,
)
from bellkit.quantum_bell import (
    PAULI_OPTIMAL,
    SchmidtCoeffs,
    born_chsh,
    gisin_embedding,
    horodecki_max_chsh,
    pure_state_max_chsh,
    singlet_behavior,
    tripartite_unique_state,
    tsirelson_norm,
)
from bellkit.quantum_kernel import DensityMatrix, bloch_operator, psi_theta, random_dichotomic
from bellkit.quantum_set import (
    arcsin_criterion,
    block_optimize_marginal,
    correlator_moment_matrix,
    ml_feasibility,
    q1_feasibility,
    randomness_bound,
    randomness_curve_achievability,
)
from bellkit.rng import stream
from bellkit.self_testing import direct_sum_singlet_state, swap_isometry

SEED = 20091212
TSIRELSON = 2 * np.sqrt(2)


@contextmanager
def budget(seconds):
    t0 = time.perf_counter()
    yield
    elapsed = time.perf_counter() - t0
    assert elapsed < seconds, f"took {elapsed:.1f} s, budget {seconds} s"


def random_pairs(n, rng):
    def unit():
        v = rng.standard_normal(3)
        return v / np.linalg.norm(v)

    return [(unit(), unit()) for _ in range(n)]


@pytest.mark.acceptance(1, "correlator polytope has 16 facets: 8 trivial, 8 CHSH with bound 2")
def test_01_polytope_facets():
    with budget(1.0):
        facets = chsh_facets()
    assert len(facets) == 16
    trivial = [f for f in facets if f.trivial]
    chsh = [f for f in facets if not f.trivial]
    assert len(trivial) == 8 and len(chsh) == 8
    assert all(f.bound == 1 and sorted(np.abs(f.normal)) == [0, 0, 0, 1] for f in trivial)
    for f in chsh:
        n = np.array(f.normal)
        assert f.bound == 2
        assert np.all(np.abs(n) == 1)
        assert np.sum(n < 0) % 2 == 1  # one or three minus signs
    assert len({f.normal for f in facets}) == 16


@pytest.mark.acceptance(2, "Tsirelson bound at Pauli settings and under random search")
def test_02_tsirelson():
    with budget(30.0):
        ops = [bloch_operator(v) for v in (*PAULI_OPTIMAL.alice, *PAULI_OPTIMAL.bob)]
        assert abs(tsirelson_norm(*ops) - TSIRELSON) <= 1e-9
        rng = stream(SEED, 2)
        worst = 0.0
        for _ in range(1000):
            da, db = (int(v) for v in rng.integers(1, 9, 2))
            quad = [random_dichotomic(da, rng), random_dichotomic(da, rng),
                    random_dichotomic(db, rng), random_dichotomic(db, rng)]
            worst = max(worst, tsirelson_norm(*quad))
    assert worst <= TSIRELSON + 1e-9


@pytest.mark.acceptance(3, "maximal CHSH of pure two-qubit states matches Born rule")
def test_03_horodecki_pure():
    with budget(5.0):
        for theta in np.linspace(0, np.pi / 4, 50):
            rho = DensityMatrix.pure(psi_theta(theta))
            res = horodecki_max_chsh(rho)
            formula = 2 * np.sqrt(1 + np.sin(2 * theta) ** 2)
            assert abs(res.s_max - formula) <= 1e-8
            assert abs(born_chsh(rho, res.settings) - formula) <= 1e-8
            assert abs(pure_state_max_chsh(theta) - formula) <= 1e-12


@pytest.mark.acceptance(4, "embedded qubit settings violate CHSH iff the state is entangled")
def test_04_gisin():
    with budget(10.0):
        rng = stream(SEED, 4)
        for i in range(100):
            d = int(rng.integers(2, 6))
            c = np.abs(rng.standard_normal(d))
            if i % 10 == 0:
                c[1:] = 0.0  # product states
            c = np.sort(c)[::-1] / np.linalg.norm(c)
            res = gisin_embedding(SchmidtCoeffs(c))
            assert (res.s_value > 2) == (c[1] > 0)
            assert (res.s_born > 2) == (c[1] > 0)
            assert abs(res.s_value - res.s_born) <= 1e-8


@pytest.mark.acceptance(5, "Werner W=1/2 local model reproduces its statistics within 4 se")
def test_05_werner_lv():
    pairs = random_pairs(8, stream(SEED, 5))
    with budget(60.0):
        rep = simulate_werner_half(pairs, RunConfig(1_000_000, SEED))
    for st, (a, b) in zip(rep.settings, pairs):
        p = st.counts / st.shots
        exp = werner_half_expected(a, b)
        se = np.sqrt(exp * (1 - exp) / st.shots)
        assert np.all(np.abs(p - exp) <= 4 * se), (p, exp)


@pytest.mark.acceptance(6, "one-bit model reproduces singlet correlators and the λ density")
def test_06_toner_bacon():
    pairs = random_pairs(8, stream(SEED, 6))
    with budget(120.0):
        rep = simulate_toner_bacon(pairs, RunConfig(1_000_000, SEED))
    for st, (a, b) in zip(rep.settings, pairs):
        target = -float(np.dot(a, b))
        assert abs(st.estimates["mean_ab"] - target) <= 4 * st.stderr["mean_ab"], (st.estimates["mean_ab"], target)
    for dens in rep.extras["density"]:
        assert dens["p_value"] > 0.001


@pytest.mark.acceptance(7, "post-selection fakes S=4 while the full sample stays local")
def test_07_detection_cheat():
    with budget(60.0):
        rep = detection_cheat(RunConfig(1_000_000, SEED))
    assert abs(rep.post_selected_S - 4) <= 3 * rep.post_selected_se
    assert rep.full_sample_S <= 2 + 4 * rep.full_sample_se


@pytest.mark.acceptance(8, "adaptive local strategies with memory stay below CHSH 2 + 4σ")
def test_08_memory():
    with budget(120.0):
        reports = [memory_lv_run(cls(), RunConfig(1_000_000, SEED)) for cls in BUILTIN_STRATEGIES.values()]
    for rep in reports:
        assert rep.S <= 2 + 4 * rep.se, (rep.strategy, rep.S, rep.se)


@pytest.mark.acceptance(9, "arcsin saturation and Q1 threshold v = 1/√2")
def test_09_quantum_set():
    with budget(30.0):
        r = 1 / np.sqrt(2)
        sat = arcsin_criterion(CorrelatorVector(np.array([[r, r], [r, -r]])))
        assert sat.lhs == np.pi and sat.satisfied
        lo, hi = 0.5, 1.0
        while hi - lo > 1e-6:
            v = 0.5 * (lo + hi)
            c = CorrelatorVector(v * np.array([[1.0, 1.0], [1.0, -1.0]]))
            if q1_feasibility(correlator_moment_matrix(c)).feasible:
                lo = v
            else:
                hi = v
    assert abs(0.5 * (lo + hi) - r) <= 1e-4


@pytest.mark.acceptance(10, "randomness bound: endpoints, achievability and numerical oracle")
def test_10_randomness():
    with budget(120.0):
        assert randomness_bound(2.0) == 1.0
        assert randomness_bound(TSIRELSON) == 0.5
        for theta in np.linspace(np.pi / 200, np.pi / 4, 50):
            pt = randomness_curve_achievability(theta)
            assert pt.on_curve, (theta, pt)
        for s in np.linspace(2.0, TSIRELSON, 10):
            assert abs(block_optimize_marginal(s) - randomness_bound(s)) <= 1e-4, s


@pytest.mark.acceptance(11, "swap circuit extracts Φ+ and every σm⊗σn Φ+ with fidelity 1")
def test_11_self_testing():
    labels = [(m, n) for m in "1xz" for n in "1xz"]
    rng = stream(SEED, 11)
    with budget(10.0):
        cases = [[1.0]]
        for k in (2, 3, 4):
            c = rng.standard_normal(k)
            cases.append(list(c / np.linalg.norm(c)))
        cases.append([1 / np.sqrt(2)] * 2)
        for c in cases:
            inst = direct_sum_singlet_state(c)
            for pair in labels:
                res = swap_isometry(inst, None if pair == ("1", "1") else pair)
                assert abs(res.fidelity - 1) <= 1e-10, (c, pair, res.fidelity)


@pytest.mark.acceptance(12, "chained inequality: quantum value and vanishing local fraction")
def test_12_chained():
    with budget(10.0):
        for M in range(2, 9):
            value = chained_value(chained_quantum_behavior(M), ChainedSpec(M))
            assert abs(value - M * (1 + np.cos(np.pi / (2 * M)))) <= 1e-10
        M = 32
        bound = local_fraction_bound(M * (1 + np.cos(np.pi / (2 * M))), 2 * M - 1, 2 * M)
        assert abs(bound - M * (1 - np.cos(np.pi / (2 * M)))) <= 1e-12
        assert abs(bound / (np.pi**2 / (8 * M)) - 1) <= 0.05


@pytest.mark.acceptance(13, "no-signaling behaviors obey the marginal-bias bound")
def test_13_leggett():
    violations = 0
    with budget(60.0):
        for M in (2, 3, 4):
            rng = stream(SEED, 13, M)
            for _ in range(1000):
                res = leggett_marginal_bound(random_ns_behavior(Scenario(M, 2, M, 2), rng), ChainedSpec(M))
                violations += not res.bound_holds
    assert violations == 0


@pytest.mark.acceptance(14, "tripartite state: exact marginals, CHSH(AB) > 2 iff cos²α > 1/√2")
def test_14_tripartite():
    with budget(10.0):
        for alpha in np.linspace(0.05, np.pi / 2 - 0.05, 30):
            res = tripartite_unique_state(alpha)
            assert res.residual_ac <= 1e-10 and res.residual_bc <= 1e-10
            if abs(np.cos(alpha) ** 2 - 1 / np.sqrt(2)) > 1e-6:
                assert (res.s_ab > 2) == (np.cos(alpha) ** 2 > 1 / np.sqrt(2))
        lo, hi = 1e-3, np.pi / 2 - 1e-3  # s_ab > 2 at lo, <= 2 at hi
        while hi - lo > 1e-12:
            mid = 0.5 * (lo + hi)
            if tripartite_unique_state(mid).s_ab > 2:
                lo = mid
            else:
                hi = mid
    assert abs(np.cos(lo) ** 2 - 1 / np.sqrt(2)) <= 1e-6


@pytest.mark.acceptance(15, "PR box: CHSH 4, unique no-signaling mixture, RAC 1 vs 3/4")
def test_15_pr_box():
    with budget(30.0):
        assert chsh_value(correlators(pr_box())) == 4.0
        assert all(no_signaling_residual(d) == 1.0 for d in d_points())
        u = pr_uniqueness_check()
        assert u.unique
        assert rac_play(pr_rac_strategy()) == 1.0
        brute = rac_classical_bruteforce()
    assert brute.best == 0.75 and brute.pairs == 256


@pytest.mark.acceptance(16, "majority vote keeps the PR box; Γ test separates singlet and PR")
def test_16_macroscopic_locality():
    with budget(120.0):
        res = majority_vote_coarse_grain(pr_box(), 101, RunConfig(100_000, SEED))
        diff = np.abs(res.behavior.table - pr_box().table)
        assert np.all(diff <= 3 * res.stderr)
        singlet = singlet_behavior(PAULI_OPTIMAL.alice, PAULI_OPTIMAL.bob)
        assert ml_feasibility(singlet).feasible
        assert not ml_feasibility(pr_box()).feasible


@pytest.mark.acceptance(17, "fixtures classified, seeded runs reproducible, no-signaling checks")
def test_17_property_suite():
    expected = {"prbox": False, "singlet-chsh-optimal": False, "werner-0.5": True, "white-noise": True}
    for name, inside in expected.items():
        b = load_behavior(name)
        assert lv_membership(b).inside == inside, name
        assert no_signaling_residual(b) <= 1e-12
    assert no_signaling_residual(white_noise(CHSH_SCENARIO)) == 0.0
    assert no_signaling_residual(chained_quantum_behavior(5)) <= 1e-12

    pairs = random_pairs(2, stream(SEED, 17))
    cfg = RunConfig(200_000, 1234)
    runs = [
        lambda: simulate_werner_half(pairs, cfg).to_dict(),
        lambda: simulate_toner_bacon(pairs, cfg).to_dict(),
        lambda: detection_cheat(cfg).to_dict(),
        lambda: memory_lv_run(BUILTIN_STRATEGIES["greedy"](), RunConfig(20_000, 1234)).to_dict(),
        lambda: majority_vote_coarse_grain(pr_box(), 11, cfg).behavior.table.tolist(),
    ]
    for fn in runs:
        assert fn() == fn()
