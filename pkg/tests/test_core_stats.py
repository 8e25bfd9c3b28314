import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bellkit.core_stats import (
    CHSH_SCENARIO,
    BellInequality,
    Behavior,
    CorrelatorVector,
    Scenario,
    behavior_from_correlators,
    behavior_from_table,
    bell_value,
    chsh_inequality,
    chsh_value,
    correlators,
    no_signaling_residual,
    ns_dimension,
    white_noise,
)
from bellkit.errors import NonBinaryOutcomes, NormalizationError, ShapeMismatch, TooLarge, WrongScenario
from bellkit.local_polytope import enumerate_deterministic, strategy_behavior


def singlet_table(alpha, beta):
    """P(a,b|x,y) = (1 - ab cos(α_x - β_y))/4 written out by hand."""
    t = np.zeros((2, 2, 2, 2))
    for x in range(2):
        for y in range(2):
            c = math.cos(alpha[x] - beta[y])
            for a in range(2):
                for b in range(2):
                    sa, sb = 1 - 2 * a, 1 - 2 * b
                    t[x, y, a, b] = (1 - sa * sb * c) / 4
    return t


def pr_table():
    t = np.zeros((2, 2, 2, 2))
    for x in range(2):
        for y in range(2):
            for a in range(2):
                for b in range(2):
                    t[x, y, a, b] = 0.5 if (a ^ b) == (x & y) else 0.0
    return t


def test_scenario_validation():
    with pytest.raises(ValueError):
        Scenario(0, 2, 2, 2)
    with pytest.raises(TooLarge):
        Scenario(64, 2, 1, 2)
    assert Scenario.parse("2,2,3,2") == Scenario(2, 2, 3, 2)
    assert Scenario(2, 3, 4, 5).shape == (2, 4, 3, 5)


def test_white_noise_has_zero_correlators():
    b = white_noise(CHSH_SCENARIO)
    assert np.allclose(correlators(b).values, 0)


def test_bad_normalization_rejected():
    t = np.full((2, 2, 2, 2), 0.25)
    t[1, 0] *= 0.9
    with pytest.raises(NormalizationError):
        behavior_from_table(CHSH_SCENARIO, t)


def test_shape_mismatch_rejected():
    with pytest.raises(ShapeMismatch):
        behavior_from_table(CHSH_SCENARIO, np.full((2, 2, 4), 0.25))


def test_clamping_inside_band():
    t = np.full((2, 2, 2, 2), 0.25)
    t[0, 0, 0, 0] += 5e-13
    t[0, 0, 1, 1] -= 5e-13
    t[1, 1] = [[0.5 + 5e-13, -5e-13], [0.0, 0.5]]
    b = behavior_from_table(CHSH_SCENARIO, t)
    assert b.table.min() >= 0
    assert np.allclose(b.table.sum(axis=(2, 3)), 1, atol=1e-15)


def test_behavior_is_immutable():
    b = white_noise(CHSH_SCENARIO)
    with pytest.raises(ValueError):
        b.table[0, 0, 0, 0] = 1.0


@pytest.mark.parametrize("alpha,beta", [((0, math.pi / 2), (math.pi / 4, -math.pi / 4)), ((0.3, 1.1), (2.0, -0.4))])
def test_singlet_table_is_valid(alpha, beta):
    b = behavior_from_table(CHSH_SCENARIO, singlet_table(alpha, beta))
    assert no_signaling_residual(b) < 1e-12
    expected = [[-math.cos(a - bb) for bb in beta] for a in alpha]
    assert np.allclose(correlators(b).values, expected, atol=1e-14)


def test_singlet_equal_directions_anticorrelated():
    b = behavior_from_table(CHSH_SCENARIO, singlet_table((0.7, 0.7), (0.7, 0.7)))
    assert np.allclose(correlators(b).values, -1)


def test_signaling_deterministic_point():
    # Bob outputs Alice's input at y = 1.
    t = np.zeros((2, 2, 2, 2))
    for x in range(2):
        t[x, 0, 0, 0] = 1
        t[x, 1, 0, x] = 1
    assert no_signaling_residual(behavior_from_table(CHSH_SCENARIO, t)) == 1.0


def test_pr_box():
    b = behavior_from_table(CHSH_SCENARIO, pr_table())
    assert no_signaling_residual(b) == 0.0
    assert correlators(b).flat().tolist() == [1, 1, 1, -1]
    assert bell_value(chsh_inequality(), b) == 4.0
    assert bell_value(chsh_inequality("probability"), b) == pytest.approx(4.0, abs=1e-15)


def test_non_binary_correlators():
    with pytest.raises(NonBinaryOutcomes):
        correlators(white_noise(Scenario(2, 3, 2, 2)))


@pytest.mark.parametrize(
    "values,expected",
    [((1, 1, 1, -1), 4.0), ((1, 1, 1, 1), 2.0), ((1 / math.sqrt(2),) * 3 + (-1 / math.sqrt(2),), 2 * math.sqrt(2))],
)
def test_chsh_value(values, expected):
    assert chsh_value(CorrelatorVector.from_flat(values)) == pytest.approx(expected, abs=1e-15)


def test_chsh_wrong_scenario():
    with pytest.raises(WrongScenario):
        chsh_value(CorrelatorVector.from_flat([0, 0, 0], 3, 1))


@pytest.mark.parametrize("s,d", [(Scenario(2, 2, 2, 2), 8), (Scenario(1, 2, 1, 2), 3), (Scenario(3, 2, 3, 2), 15),
                                 (Scenario(2, 3, 2, 3), 24)])
def test_ns_dimension(s, d):
    assert ns_dimension(s) == d


def test_chsh_over_deterministic_strategies():
    values = sorted({round(bell_value(chsh_inequality(), strategy_behavior(d, CHSH_SCENARIO)))
                     for d in enumerate_deterministic(CHSH_SCENARIO)})
    assert max(values) == 2
    assert min(values) == -2
    assert set(values) <= {-4, -2, 0, 2, 4}


def test_deterministic_correlator_product_is_one():
    for d in enumerate_deterministic(CHSH_SCENARIO):
        assert np.prod(correlators(strategy_behavior(d, CHSH_SCENARIO)).values) == 1


def test_zero_inequality():
    z = BellInequality(np.zeros((2, 2)), 0.0, 0.0, "correlator")
    assert bell_value(z, behavior_from_table(CHSH_SCENARIO, pr_table())) == 0.0


def test_bell_value_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        bell_value(chsh_inequality(), white_noise(Scenario(3, 2, 2, 2)))


def test_bell_inequality_bounds_checked():
    with pytest.raises(ValueError):
        BellInequality(np.ones((2, 2)), 3.0, 2.0, "correlator")


def test_json_round_trip():
    b = behavior_from_table(CHSH_SCENARIO, singlet_table((0.1, 1.3), (0.4, 2.9)))
    back = Behavior.from_dict(json.loads(json.dumps(b.to_dict())))
    assert np.array_equal(back.table, b.table)
    c = correlators(b)
    assert np.array_equal(CorrelatorVector.from_dict(json.loads(json.dumps(c.to_dict()))).values, c.values)


correlator_vectors = st.lists(st.floats(-1, 1), min_size=4, max_size=4)


@given(correlator_vectors)
def test_correlator_round_trip(values):
    c = CorrelatorVector.from_flat(values)
    b = behavior_from_correlators(c)
    assert np.allclose(correlators(b).values, c.values, atol=1e-12)
    assert np.allclose(b.alice_marginals(), 0.5)


@given(correlator_vectors, correlator_vectors, st.floats(0, 1))
@settings(max_examples=50)
def test_chsh_is_linear_under_mixing(u, v, w):
    bu = behavior_from_correlators(CorrelatorVector.from_flat(u))
    bv = behavior_from_correlators(CorrelatorVector.from_flat(v))
    mixed = chsh_value(correlators(bu.mix(bv, w)))
    assert mixed == pytest.approx((1 - w) * chsh_value(correlators(bu)) + w * chsh_value(correlators(bv)), abs=1e-12)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=30)
def test_marginals_agree_for_ns_mixtures(seed):
    rng = np.random.default_rng(seed)
    strategies = enumerate_deterministic(CHSH_SCENARIO)
    w = rng.dirichlet(np.ones(len(strategies)))
    t = sum(wi * strategy_behavior(d, CHSH_SCENARIO).table for wi, d in zip(w, strategies))
    b = behavior_from_table(CHSH_SCENARIO, t)
    assert no_signaling_residual(b) < 1e-12
    assert np.allclose(b.table[:, 0].sum(axis=2), b.table[:, 1].sum(axis=2), atol=1e-12)
