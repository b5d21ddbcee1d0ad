import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gbsc import core
from gbsc.core import (
    NIL,
    Arm,
    BetaParams,
    ConfigurationError,
    Decision,
    DimensionMismatchError,
    action_confidences,
    advance_epoch,
    confidence_of,
    export_priors,
    new_model,
    pooled_confidence,
    sample_node,
    select_arm,
    update,
)


def brute_force_pool(values, k):
    """Reference for the top-k average: sort, slice, average by hand."""
    if len(values) == 0:
        return 0.5
    ordered = sorted(values)[::-1]
    chosen = ordered[: min(k, len(ordered))]
    total = 0.0
    for v in chosen:
        total += v
    return total / len(chosen)


def full_context(model, value="a"):
    return [value] * model.num_subsets


# --- construction ---------------------------------------------------------


def test_new_model_mushroom_shape():
    model = new_model(22, 3)
    assert model.num_subsets == 22 and model.k == 3 and model.epoch == 1
    rows = export_priors(model)
    assert len(rows) == 22
    assert all(value is NIL and a == 1 and b == 1 for _, value, a, b in rows)


def test_new_model_minimal():
    model = new_model(1, 1)
    assert model.num_subsets == 1
    assert export_priors(model) == [(0, None, 1.0, 1.0)]


@pytest.mark.parametrize("k", [0, 23, -1])
def test_new_model_rejects_bad_k(k):
    with pytest.raises(ConfigurationError):
        new_model(22, k)


def test_beta_params_validation():
    with pytest.raises(ConfigurationError):
        BetaParams(0.5, 1.0)
    with pytest.raises(ConfigurationError):
        BetaParams(1.0, float("nan"))
    assert BetaParams().mean == 0.5


# --- sampling --------------------------------------------------------------


@pytest.mark.parametrize(
    "alpha, beta",
    [(1.0, 1.0), (6.0, 1.0), (1.0, 36.0)],
)
def test_sample_node_mean(alpha, beta):
    rng = np.random.default_rng(7)
    params = BetaParams(alpha, beta)
    draws = np.array([sample_node(params, rng) for _ in range(100_000)])
    assert abs(draws.mean() - alpha / (alpha + beta)) < 0.005
    assert np.all((draws >= 0) & (draws <= 1))


def test_sample_node_uses_one_uniform():
    a = np.random.default_rng(3)
    b = np.random.default_rng(3)
    sample_node(BetaParams(4, 9), a)
    b.random()
    assert a.random() == b.random()


def test_uniform_prior_is_identity_map():
    # Beta(1, 1) inversion returns the uniform itself
    rng = np.random.default_rng(0)
    u = np.random.default_rng(0).random()
    assert sample_node(BetaParams(), rng) == pytest.approx(u, abs=1e-12)


# --- confidence ------------------------------------------------------------


@pytest.mark.parametrize(
    "raw, action, value",
    [(0.9, Arm.PLAY, 0.9), (0.3, Arm.NO_PLAY, 0.7), (0.5, Arm.PLAY, 0.5)],
)
def test_confidence_of(raw, action, value):
    c = confidence_of(raw, 4)
    assert c.action == action and c.value == pytest.approx(value) and c.subset_index == 4
    assert c.raw_sample == raw


@given(st.floats(min_value=1e-9, max_value=1 - 1e-9))
def test_confidence_folding(s):
    a, b = confidence_of(s, 0), confidence_of(1 - s, 0)
    assert a.value == pytest.approx(b.value, abs=1e-12)
    assert 0.5 <= a.value <= 1


@pytest.mark.parametrize(
    "values, k, expected",
    [
        ([0.9, 0.8, 0.7, 0.6], 3, 0.8),
        ([0.55], 3, 0.55),
        ([0.6, 0.55], 3, 0.575),
        ([], 3, 0.5),
        ([0.7], 1, 0.7),
        ([0.95], 1, 0.95),
    ],
)
def test_pooled_confidence_examples(values, k, expected):
    assert pooled_confidence(values, k) == pytest.approx(expected)


@settings(max_examples=300, deadline=None)
@given(
    st.lists(st.floats(min_value=0.001, max_value=0.999), min_size=1, max_size=30),
    st.integers(min_value=1, max_value=30),
)
def test_pool_samples_matches_brute_force(samples, k):
    k = min(k, len(samples))
    play, no_play, play_mask, no_play_mask = core.pool_samples(np.array([samples]), k)
    play_vals = [s for s in samples if s >= 0.5]
    no_play_vals = [1 - s for s in samples if s < 0.5]
    assert play[0] == pytest.approx(brute_force_pool(play_vals, k), abs=1e-12)
    assert no_play[0] == pytest.approx(brute_force_pool(no_play_vals, k), abs=1e-12)
    # contributors: disjoint, at most k each, drawn from the right side
    assert not np.any(play_mask & no_play_mask)
    assert play_mask.sum() == min(k, len(play_vals))
    assert no_play_mask.sum() == min(k, len(no_play_vals))
    assert all(samples[i] >= 0.5 for i in np.flatnonzero(play_mask[0]))


def test_action_confidences_partition(rng):
    model = new_model(22, 22)
    conf = action_confidences(model, full_context(model), rng)
    assert len(conf.play_contributors) + len(conf.no_play_contributors) == 22
    assert set(conf.play_contributors).isdisjoint(conf.no_play_contributors)


def test_action_confidences_dimension_check(rng):
    with pytest.raises(DimensionMismatchError):
        action_confidences(new_model(22, 3), ["a"] * 21, rng)


def test_action_confidences_consume_subset_count(rng):
    model = new_model(5, 2)
    other = np.random.default_rng(12345)
    action_confidences(model, ["a"] * 5, rng)
    other.random(5)
    assert rng.random() == other.random()


# --- selection -------------------------------------------------------------


def test_first_epoch_always_explores():
    model = new_model(22, 3)
    rng = np.random.default_rng(1)
    decisions = [select_arm(model, full_context(model), rng) for _ in range(500)]
    assert all(d.explored for d in decisions)
    plays = sum(d.arm == Arm.PLAY for d in decisions)
    assert 200 < plays < 300


def test_exploit_probability_at_large_epoch():
    # one subset whose node sits near 1: exploitation always picks play
    model = new_model(1, 1)
    update(model, ["x"], Arm.PLAY, 500.0)
    model.epoch = 1000
    n = 1_000_000
    batch = core.select_many(model, np.tile(model.encode(["x"]), (n, 1)), np.random.default_rng(5))
    assert np.all(batch.play > batch.no_play)
    expected = (1 - 1 / 1000) + 0.5 / 1000
    freq = np.mean(batch.arms == Arm.PLAY)
    sigma = math.sqrt(expected * (1 - expected) / n)
    assert abs(freq - expected) < 3 * sigma


def test_tie_breaks_to_no_play():
    model = new_model(2, 1)
    # node samples 0.5 exactly on both: play pool {0.5, 0.5}, no-play empty (0.5)
    uniforms = np.array([[0.5, 0.5, 0.99, 0.0]])
    model.epoch = 10
    batch = core.decide_encoded(model, model.encode(["a", "b"])[None, :], uniforms)
    assert batch.play[0] == batch.no_play[0] == 0.5
    assert not batch.explored[0]
    assert batch.arms[0] == Arm.NO_PLAY


def test_select_arm_does_not_mutate(rng):
    model = new_model(22, 3)
    before = export_priors(model)
    select_arm(model, full_context(model, "q"), rng)
    assert export_priors(model) == before


def test_select_many_equals_sequential_select_arm(dataset):
    model = new_model(22, 3)
    for m in dataset.mushrooms[:300]:
        update(model, m.context, Arm.PLAY, -35.0 if m.poisonous else 5.0)
    model.epoch = 3
    contexts = [m.context for m in dataset.mushrooms[1000:1200]]
    seq_rng = np.random.default_rng(11)
    sequential = [select_arm(model, c, seq_rng) for c in contexts]
    batch = core.select_many(model, model.encode_many(contexts), np.random.default_rng(11))
    assert [d.arm for d in sequential] == batch.arms.tolist()
    assert [d.explored for d in sequential] == batch.explored.tolist()


def test_decide_one_matches_batch(dataset):
    model = new_model(22, 2)
    rng = np.random.default_rng(2)
    for m in dataset.mushrooms[::40]:
        update(model, m.context, Arm.PLAY, -35.0 if m.poisonous else 5.0)
    for epoch in (1, 2, 5, 50):
        model.epoch = epoch
        for m in dataset.mushrooms[5::97]:
            slots = model.encode(m.context)
            u = rng.random(24)
            batch = core.decide_encoded(model, slots[None, :], u[None, :])
            if abs(batch.play[0] - batch.no_play[0]) > 1e-12:
                assert core.decide_one(model, slots, u) == batch.arms[0]


@pytest.mark.parametrize("epoch", [2, 4])
def test_exploration_rate(epoch):
    model = new_model(3, 1)
    model.epoch = epoch
    n = 100_000
    batch = core.select_many(model, np.zeros((n, 3), dtype=np.intp) + model.nil_slots(), np.random.default_rng(epoch))
    p = 1 / epoch
    assert abs(batch.explored.mean() - p) < 3 * math.sqrt(p * (1 - p) / n)


def test_argmax_scale_invariance():
    rng = np.random.default_rng(4)
    play, no_play = rng.uniform(0.5, 1, 1000), rng.uniform(0.5, 1, 1000)
    for c in (0.1, 3.0, 1e6):
        assert np.array_equal(play > no_play, c * play > c * no_play)


# --- update ----------------------------------------------------------------


def test_update_positive_reward():
    model = new_model(22, 3)
    ctx = full_context(model, "x")
    update(model, ctx, Arm.PLAY, 5.0)
    assert all(model.params(s, "x") == BetaParams(6, 1) for s in range(22))
    assert model.params(0, NIL) == BetaParams(1, 1)


def test_update_negative_reward():
    model = new_model(22, 3)
    ctx = full_context(model, "x")
    update(model, ctx, Decision(Arm.PLAY, False, None), -35.0)
    assert all(model.params(s, "x") == BetaParams(1, 36) for s in range(22))


def test_update_no_play_is_noop():
    model = new_model(22, 3)
    ctx = full_context(model, "x")
    update(model, ctx, Arm.PLAY, 5.0)
    before = export_priors(model)
    update(model, ctx, Arm.NO_PLAY, 0.0)
    update(model, ctx, Arm.PLAY, 0.0)
    assert export_priors(model) == before


def test_update_touches_nil_nodes():
    model = new_model(3, 1)
    update(model, ["a", NIL, "b"], Arm.PLAY, 5.0)
    assert model.params(1, NIL) == BetaParams(6, 1)
    assert model.params(0, NIL) == BetaParams(1, 1)


def test_update_rejects_non_finite():
    with pytest.raises(ValueError):
        update(new_model(1, 1), ["a"], Arm.PLAY, float("inf"))


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.sampled_from("abc"), min_size=4, max_size=4),
    st.lists(st.sampled_from("abc"), min_size=4, max_size=4),
    st.floats(min_value=-50, max_value=50).filter(lambda r: abs(r) >= 0.01),
)
def test_update_monotone_and_local(history, ctx, reward):
    model = new_model(4, 2)
    update(model, history, Arm.PLAY, 5.0)
    update(model, [v if v != "a" else "c" for v in history], Arm.PLAY, -35.0)
    before = {(s, v): (a, b) for s, v, a, b in export_priors(model)}
    update(model, ctx, Arm.PLAY, reward)
    after = {(s, v): (a, b) for s, v, a, b in export_priors(model)}
    mass = 0.0
    for (s, v), (a, b) in after.items():
        a0, b0 = before.get((s, v), (1.0, 1.0))
        if ctx[s] == v:
            mass += (a - a0) + (b - b0)
            if reward > 0:
                assert a / (a + b) > a0 / (a0 + b0)
            else:
                assert a / (a + b) < a0 / (a0 + b0)
        else:
            assert (a, b) == (a0, b0)
    assert mass == pytest.approx(4 * abs(reward))


def test_mushroom_mass_conservation(dataset):
    model = new_model(22, 3)
    m = dataset.mushrooms[0]
    update(model, m.context, Arm.PLAY, -35.0)
    rows = export_priors(model)
    assert sum(a - 1 + b - 1 for _, _, a, b in rows) == 22 * 35


# --- epochs and export -----------------------------------------------------


def test_advance_epoch():
    model = new_model(22, 3)
    advance_epoch(model)
    assert model.epoch == 2 and model.exploration_rate == 0.5
    for _ in range(8):
        advance_epoch(model)
    assert model.epoch == 10 and model.exploration_rate == pytest.approx(0.1)


def test_export_after_update(dataset):
    model = new_model(22, 3)
    m = dataset.mushrooms[0]
    update(model, m.context, Arm.PLAY, 5.0)
    rows = export_priors(model)
    assert len(rows) == model.node_count() == 44
    assert sum(a == 6 for _, _, a, _ in rows) == 22
    # ordering: by subset, nil first
    assert [r[0] for r in rows] == sorted(r[0] for r in rows)
    assert all(rows[2 * s][1] is NIL for s in range(22))


def test_determinism(dataset):
    def run(seed):
        model = new_model(22, 2)
        rng = np.random.default_rng(seed)
        arms = []
        for i in range(200):
            m = dataset.mushrooms[int(rng.integers(len(dataset)))]
            d = select_arm(model, m.context, rng)
            arms.append(d.arm)
            update(model, m.context, d, (-35.0 if m.poisonous else 5.0) if d.arm == Arm.PLAY else 0.0)
            if i % 50 == 49:
                advance_epoch(model)
        return arms, export_priors(model)

    assert run(9) == run(9)
    assert run(9) != run(10)


def test_copy_is_independent():
    model = new_model(2, 1)
    clone = model.copy()
    update(clone, ["a", "b"], Arm.PLAY, 5.0)
    assert model.node_count() == 2 and clone.node_count() == 4
