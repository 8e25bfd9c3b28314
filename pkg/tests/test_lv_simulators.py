import math

import numpy as np
import pytest

from bellkit.core_stats import chsh_value, correlators
from bellkit.errors import BadVector
from bellkit.local_polytope import lv_membership
from bellkit.lv_simulators import (
    BUILTIN_STRATEGIES,
    ConstantStrategy,
    LeakedSettings,
    RunConfig,
    abs_density_bin_probs,
    detection_cheat,
    memory_lv_run,
    pair_stats,
    simulate_anticorrelation_lv,
    simulate_single_qubit_lv,
    simulate_toner_bacon,
    simulate_werner_half,
    werner_half_expected,
)

Z = np.array([0.0, 0.0, 1.0])
X = np.array([1.0, 0.0, 0.0])
SHOTS = 200_000


def grid(alice, bob):
    return [(a, b) for a in alice for b in bob]


def test_single_qubit_pole_is_deterministic():
    r = simulate_single_qubit_lv(Z, [Z], RunConfig(100_000, seed=1))
    assert r.settings[0].estimates["mean_a"] == 1.0


@pytest.mark.parametrize("m,a,expected", [
    (Z, (Z + math.sqrt(3) * X) / 2, 0.5),
    (np.zeros(3), X, 0.0),
    (np.array([0.3, 0.4, 0.0]), np.array([0.6, 0.8, 0.0]), 0.5),
])
def test_single_qubit_mean(m, a, expected):
    s = simulate_single_qubit_lv(m, [a], RunConfig(SHOTS, seed=2)).settings[0]
    assert abs(s.estimates["mean_a"] - expected) <= 3 * s.stderr["mean_a"]


def test_single_qubit_rejects_long_vector():
    with pytest.raises(BadVector):
        simulate_single_qubit_lv([1.0, 1.0, 0.0], [Z], RunConfig(10))


def test_anticorrelation_model():
    b = simulate_anticorrelation_lv(Z, Z)
    assert np.allclose(correlators(b).values, -1)
    b = simulate_anticorrelation_lv(Z, X)
    assert np.allclose(correlators(b).values, [[-1, 0], [0, -1]])
    v = np.array([1.0, 0.0, 1.0]) / math.sqrt(2)
    b = simulate_anticorrelation_lv(Z, v)
    e = correlators(b).values
    assert np.allclose(e, [[-1, -1 / math.sqrt(2)], [-1 / math.sqrt(2), -1]])
    assert np.allclose(b.alice_marginals(), 0.5) and np.allclose(b.bob_marginals(), 0.5)
    assert lv_membership(b).inside


def test_werner_half_matches_closed_form():
    d = np.array([math.sin(math.pi / 4), 0, math.cos(math.pi / 4)])
    pairs = [(Z, Z), (Z, X), (Z, d)]
    r = simulate_werner_half(pairs, RunConfig(SHOTS, seed=3))
    assert werner_half_expected(Z, Z)[0, 0] == 0.125
    assert np.allclose(werner_half_expected(Z, X), 0.25)
    for (a, b), s in zip(pairs, r.settings):
        p = np.array([[s.estimates[f"p{i}{j}"] for j in range(2)] for i in range(2)])
        se = np.array([[s.stderr[f"p{i}{j}"] for j in range(2)] for i in range(2)])
        assert np.all(np.abs(p - werner_half_expected(a, b)) <= 4 * se + 1e-12)
    s = r.settings[2]
    assert abs(s.estimates["mean_ab"] + math.cos(math.pi / 4) / 2) <= 3 * s.stderr["mean_ab"]


def test_toner_bacon_correlators_and_density():
    t = 3 * math.pi / 8
    b_dir = np.array([math.sin(t), 0, math.cos(t)])
    pairs = [(Z, Z), (Z, X), (Z, b_dir)]
    r = simulate_toner_bacon(pairs, RunConfig(SHOTS, seed=4))
    for (a, b), s in zip(pairs, r.settings):
        assert abs(s.estimates["mean_ab"] + a @ b) <= 4 * s.stderr["mean_ab"]
        assert abs(s.estimates["mean_a"]) <= 4 * s.stderr["mean_a"]
        assert abs(s.estimates["mean_b"]) <= 4 * s.stderr["mean_b"]
    for entry in r.extras["density"]:
        assert entry["p_value"] > 1e-3
        assert sum(entry["histogram"]) == SHOTS


def test_abs_density_bins_sum_to_one():
    p = abs_density_bin_probs(10)
    assert p.sum() == pytest.approx(1)
    # ∫_{0.8}^{1} |t| dt / 1 = 0.18
    assert p[-1] == pytest.approx(0.18)


def test_toner_bacon_reaches_tsirelson():
    r2 = 1 / math.sqrt(2)
    alice = [Z, X]
    bob = [-(Z + X) * r2, -(Z - X) * r2]
    r = simulate_toner_bacon(grid(alice, bob), RunConfig(SHOTS, seed=5))
    e = np.array([s.estimates["mean_ab"] for s in r.settings])
    se = math.sqrt(sum(s.stderr["mean_ab"] ** 2 for s in r.settings))
    assert abs(e[0] + e[1] + e[2] - e[3] - 2 * math.sqrt(2)) <= 3 * se


def test_werner_half_estimate_is_local():
    r2 = 1 / math.sqrt(2)
    alice, bob = [Z, X], [(Z + X) * r2, (Z - X) * r2]
    cfg = RunConfig(SHOTS, seed=6)
    r = simulate_werner_half(grid(alice, bob), cfg)
    b = r.behavior(2, 2)
    tol = 5 * max(v for s in r.settings for v in s.stderr.values())
    assert lv_membership(b, tol=tol).inside


def test_reproducible_with_seed():
    cfg = RunConfig(50_000, seed=99, threads=1)
    a = simulate_toner_bacon([(Z, X)], cfg).to_dict()
    b = simulate_toner_bacon([(Z, X)], RunConfig(50_000, seed=99, threads=4)).to_dict()
    assert a == b
    c = simulate_toner_bacon([(Z, X)], RunConfig(50_000, seed=100)).to_dict()
    assert a != c


def test_stderr_matches_sample_standard_deviation():
    r = simulate_werner_half([(Z, X)], RunConfig(SHOTS, seed=7))
    s = r.settings[0]
    c = s.counts
    same, diff = c[0, 0] + c[1, 1], c[0, 1] + c[1, 0]
    values = np.concatenate([np.ones(same), -np.ones(diff)])
    assert s.stderr["mean_ab"] == pytest.approx(values.std(ddof=1) / math.sqrt(len(values)), rel=1e-2)


def test_pair_stats_fields():
    s = pair_stats(0, Z, X, [[10, 0], [0, 30]])
    assert s.estimates["mean_ab"] == 1.0
    assert s.estimates["mean_a"] == -0.5
    assert s.stderr["mean_ab"] == 0.0


def test_detection_cheat():
    r = detection_cheat(RunConfig(SHOTS, seed=8))
    assert r.post_selected_S == 4.0
    assert r.full_sample_S <= 2 + 4 * r.full_sample_se
    assert r.reply_rate == pytest.approx(0.5, abs=0.01)
    # Each λ refuses on exactly one x, never on the other.
    assert r.replies.sum() < r.counts.sum()


def test_memory_constant_strategy():
    r = memory_lv_run(ConstantStrategy(), RunConfig(20_000, seed=9))
    assert r.S <= 2 + 4 * r.se


@pytest.mark.parametrize("name", sorted(BUILTIN_STRATEGIES))
def test_memory_builtins_respect_bound(name):
    r = memory_lv_run(BUILTIN_STRATEGIES[name](), RunConfig(50_000, seed=10))
    assert r.S <= 2 + 4 * r.se
    assert r.counts.sum() == 50_000


def test_leaked_settings_violate():
    r = memory_lv_run(LeakedSettings(), RunConfig(20_000, seed=11), leak=True)
    assert r.S == 4.0
