import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from clipsim.model import LayerShape, ModelWeights, init_model, mlp_shapes
from clipsim.pruning import (
    InvarianceState,
    deterministic_share,
    drop_count,
    init_threshold,
    invariance,
    neuron_invariance,
    ordered_dropout,
    random_dropout,
    round_half_up,
    select_invariant,
    select_slack,
)


def _perturbed(w, scale, seed):
    rng = np.random.default_rng(seed)
    return ModelWeights.from_flat(w.shapes, w.flatten() * (1 + scale * rng.normal(size=w.total_len)))


def test_invariance_examples():
    assert invariance(2.0, 2.1) == pytest.approx(0.05, abs=1e-9)
    assert invariance(3.0, 3.0) == 0.0
    assert invariance(0.0, 0.01) == pytest.approx(1e6, rel=1e-6)


def test_neuron_invariance_identity_and_locality():
    shapes = mlp_shapes(3, [4, 2], 2)
    w = init_model(shapes, 0)
    st_ = InvarianceState(prev_weights=w)
    assert not neuron_invariance(st_, w.copy()).any()
    cur = w.copy()
    W, b = cur.layer(0)
    W[2] += 0.1
    inv = neuron_invariance(st_, cur)
    assert np.flatnonzero(inv).tolist() == [2]


def test_neuron_invariance_brute_force():
    shapes = mlp_shapes(3, [4, 2], 2)
    prev = init_model(shapes, 1)
    cur = _perturbed(prev, 0.3, 2)
    got = neuron_invariance(InvarianceState(prev_weights=prev), cur)
    expect = []
    for l in range(2):
        Wp, bp = prev.layer(l)
        Wc, bc = cur.layer(l)
        Wn_p, _ = prev.layer(l + 1)
        Wn_c, _ = cur.layer(l + 1)
        for j in range(Wp.shape[0]):
            vals = [abs(Wc[j, i] - Wp[j, i]) / (abs(Wp[j, i]) + 1e-8) for i in range(Wp.shape[1])]
            vals.append(abs(bc[j] - bp[j]) / (abs(bp[j]) + 1e-8))
            vals += [abs(Wn_c[o, j] - Wn_p[o, j]) / (abs(Wn_p[o, j]) + 1e-8) for o in range(Wn_p.shape[0])]
            expect.append(sum(vals) / len(vals))
    np.testing.assert_allclose(got, expect, rtol=1e-12)


def test_neuron_invariance_errors():
    with pytest.raises(ValueError):
        neuron_invariance(InvarianceState(), init_model(mlp_shapes(2, [2], 2), 0))
    with pytest.raises(ValueError):
        neuron_invariance(InvarianceState(prev_weights=init_model(mlp_shapes(2, [2], 2), 0)), init_model(mlp_shapes(2, [3], 2), 0))


def test_threshold_is_mean_and_set_once():
    shapes = mlp_shapes(8, [64], 4)
    prev = init_model(shapes, 3)
    cur = _perturbed(prev, 0.1, 4)
    st_ = InvarianceState(prev_weights=prev, round=2)
    thr = init_threshold(st_, cur)
    assert thr == pytest.approx(float(np.mean(neuron_invariance(st_, cur))), rel=1e-12)
    with pytest.raises(ValueError):
        init_threshold(st_, cur)
    with pytest.raises(ValueError):
        init_threshold(InvarianceState(prev_weights=prev, round=3), cur)


def test_threshold_of_equal_invariances():
    shapes = [LayerShape(1, 2), LayerShape(2, 1)]
    prev = ModelWeights(tuple(shapes), [np.ones(4), np.ones(3)])
    cur = ModelWeights(tuple(shapes), [np.full(4, 1.5), np.full(3, 1.5)])
    st_ = InvarianceState(prev_weights=prev, round=2)
    assert init_threshold(st_, cur) == pytest.approx(0.5, abs=1e-7)


def test_round_half_up():
    assert [round_half_up(x) for x in (0.5, 1.5, 2.5, 2.4999, 10 * (1 - 0.7))] == [1, 2, 3, 2, 3]
    assert drop_count(64, 0.5) == 32
    assert drop_count(10, 0.7) == 3


def _state_with_candidates(n_hidden, candidates, round_id=3, seed=0):
    """A state whose neuron invariances sit below the threshold exactly on ``candidates``."""
    shapes = mlp_shapes(2, [n_hidden], 2)
    prev = init_model(shapes, seed)
    cur = prev.copy()
    W, b = cur.layer(0)
    for j in range(n_hidden):
        if j not in candidates:
            W[j] *= 3.0
    st_ = InvarianceState(prev_weights=prev, threshold=0.5, round=round_id)
    return st_, cur


def test_select_from_enough_candidates():
    st_, cur = _state_with_candidates(10, {1, 2, 3, 4})
    d = select_invariant(st_, cur, 0.7, seed=1)
    assert len(d.to_drop) == 3 and d.to_drop <= {1, 2, 3, 4}
    assert d.slack_count == 0
    assert st_.prev_drop == d.to_drop


def test_select_with_slack():
    st_, cur = _state_with_candidates(10, {5})
    d = select_invariant(st_, cur, 0.7, seed=1)
    assert 5 in d.to_drop and len(d.to_drop) == 3 and d.slack_count == 2


def test_select_nothing_at_full_model():
    st_, cur = _state_with_candidates(10, {5})
    assert select_invariant(st_, cur, 1.0, seed=0).to_drop == frozenset()


def test_select_preconditions():
    st_, cur = _state_with_candidates(10, {5}, round_id=2)
    with pytest.raises(ValueError):
        select_invariant(st_, cur, 0.7, 0)
    st_, cur = _state_with_candidates(10, {5})
    with pytest.raises(ValueError):
        select_invariant(st_, cur, 0.4, 0, floor=0.5)


def test_select_is_deterministic():
    a, cur = _state_with_candidates(12, {0, 3})
    b, _ = _state_with_candidates(12, {0, 3})
    assert select_invariant(a, cur, 0.5, 9) == select_invariant(b, cur, 0.5, 9)


def test_select_keeps_every_layer_alive():
    shapes = mlp_shapes(2, [3, 8], 2)
    prev = init_model(shapes, 0)
    st_ = InvarianceState(prev_weights=prev, threshold=1.0, round=3)
    for seed in range(30):
        d = select_invariant(st_, prev.copy(), 0.5, seed)
        assert len(d.to_drop) == drop_count(11, 0.5)
        d.mask(shapes).validate(shapes)


def test_slack_uniform_early():
    st_ = InvarianceState(round=3, prev_drop=frozenset({0, 1, 2, 3}))
    s = select_slack(st_, 10, 4, seed=0, exclude=frozenset({9}))
    assert len(s) == 4 and 9 not in s
    picks = [frozenset(select_slack(st_, 10, 4, seed=k)) for k in range(200)]
    assert len(set(picks)) > 50


def test_slack_split_between_prev_and_random():
    gains = [0.05] * 5 + [0.01] * 5
    assert deterministic_share(gains) == pytest.approx(0.2)
    prev = frozenset(range(20, 40))
    st_ = InvarianceState(round=11, prev_drop=prev, acc_gains=gains)
    for seed in range(20):
        s = select_slack(st_, 64, 10, seed)
        assert len(s) == 10
        assert len(s & prev) >= 2


def test_slack_fully_from_prev_when_gains_hold():
    gains = [0.01] * 5 + [0.02] * 5
    st_ = InvarianceState(round=11, prev_drop=frozenset(range(6)), acc_gains=gains)
    s = select_slack(st_, 64, 4, 0)
    assert s <= set(range(6))
    s = select_slack(st_, 64, 10, 0)
    assert set(range(6)) <= s and len(s) == 10


def test_slack_errors():
    st_ = InvarianceState(round=3)
    with pytest.raises(ValueError):
        select_slack(st_, 5, 6, 0)
    with pytest.raises(ValueError):
        select_slack(st_, 5, -1, 0)


def test_deterministic_share_clamps():
    assert deterministic_share([0.1] * 5 + [-0.1] * 5) == 0.0
    assert deterministic_share([0.0] * 10) == 1.0
    assert deterministic_share([-0.1] * 10) == 1.0


def test_deterministic_share_non_increasing_for_decreasing_gains():
    gains = list(0.1 * 0.8 ** np.arange(30))
    shares = [deterministic_share(gains[:r]) for r in range(5, 31)]
    assert all(a >= b - 1e-15 for a, b in zip(shares, shares[1:]))


def test_random_dropout_counts_and_frequencies():
    assert random_dropout(64, 1.0, 0).to_drop == frozenset()
    assert len(random_dropout(64, 0.5, 0).to_drop) == 32
    counts = np.zeros(16)
    trials, p = 10_000, 0.75
    for s in range(trials):
        for j in random_dropout(16, p, s).to_drop:
            counts[j] += 1
    sigma = np.sqrt(trials * (1 - p) * p)
    assert np.all(np.abs(counts - trials * (1 - p)) <= 3 * sigma + 1)


def test_ordered_dropout_tail():
    assert ordered_dropout(8, 0.75).to_drop == frozenset({6, 7})
    assert ordered_dropout(8, 1.0).to_drop == frozenset()
    d = ordered_dropout([64, 32], 0.5)
    assert d.to_drop == frozenset(range(32, 64)) | frozenset(range(64 + 16, 96))


@given(st.lists(st.integers(2, 40), min_size=1, max_size=3), st.floats(0.5, 1.0))
def test_baseline_cardinality(sizes, p):
    n = sum(sizes)
    target = drop_count(n, p)
    assert len(random_dropout(sizes, p, 0).to_drop) == target
    od = ordered_dropout(sizes, p)
    assert len(od.to_drop) == min(target, n - len(sizes))


def test_ordered_dropout_moves_overflow():
    d = ordered_dropout([2, 40], 1 - 40 / 42)
    assert len(d.to_drop) == 40
    assert d.to_drop == frozenset({1}) | frozenset(range(3, 42))


def test_decision_row():
    d = random_dropout(10, 0.7, 1)
    assert d.csv_row(4, 2) == [4, 2, "random", "0.7", 3, 0]
