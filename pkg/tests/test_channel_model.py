import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_channel
from oracles import error_matrix_loops, rho
from remote_stability import channel_model as cm


def test_gilbert_elliott_layout():
    ch = cm.gilbert_elliott(0.7, 0.8)
    assert ch.n_states == 2 and ch.num_freq == 1
    assert np.allclose(ch.trans, [[0.7, 0.3], [0.2, 0.8]])
    assert np.array_equal(ch.labels[:, 0], [0, 1])
    assert np.array_equal(ch.all_off_states(), [0])


def test_rows_must_be_stochastic():
    with pytest.raises(cm.ChannelModelError):
        cm.MarkovChannelModel([[0.5, 0.4], [0.5, 0.5]], [[0], [1]])
    with pytest.raises(cm.ChannelModelError):
        cm.MarkovChannelModel([[1.2, -0.2], [0.5, 0.5]], [[0], [1]])


def test_labels_must_be_binary_for_binary_kind():
    with pytest.raises(cm.ChannelModelError):
        cm.MarkovChannelModel([[0.5, 0.5], [0.5, 0.5]], [[0.3], [1]])


def test_ergodicity_checks():
    with pytest.raises(cm.ChannelModelError):
        cm.MarkovChannelModel([[1.0, 0.0], [0.5, 0.5]], [[0], [1]])  # reducible
    with pytest.raises(cm.ChannelModelError):
        cm.MarkovChannelModel([[0.0, 1.0], [1.0, 0.0]], [[0], [1]])  # periodic
    cm.MarkovChannelModel([[0.0, 1.0], [1.0, 0.0]], [[0], [1]], validate_ergodic=False)


def test_hidden_kind_drop_probs():
    ch = cm.MarkovChannelModel([[0.5, 0.5], [0.2, 0.8]], [[0.9, 0.1], [0.2, 0.6]], kind=cm.HIDDEN)
    assert np.allclose(ch.drop_probs, [[0.9, 0.1], [0.2, 0.6]])
    with pytest.raises(cm.ChannelModelError):
        cm.error_matrix(ch, (1, 1))


@given(st.integers(0, 10_000), st.integers(1, 3))
@settings(max_examples=60, deadline=None)
def test_error_matrix_matches_loops(seed, n_freq):
    rng = np.random.default_rng(seed)
    ch = random_channel(rng, n_freq)
    v = tuple(int(x) for x in rng.integers(1, n_freq + 1, size=ch.n_states))
    e = cm.error_matrix(ch, v)
    assert np.allclose(e, error_matrix_loops(ch.trans, ch.labels, v))
    assert np.allclose(e + cm.success_matrix(ch, v), ch.trans)
    assert np.all(e >= 0) and np.all(e <= ch.trans + 1e-15)


def test_selection_validation():
    ch = cm.gilbert_elliott(0.5, 0.5)
    with pytest.raises(ValueError):
        cm.error_matrix(ch, (0, 1))
    with pytest.raises(ValueError):
        cm.error_matrix(ch, (1,))
    with pytest.raises(ValueError):
        cm.error_matrix(ch, (2, 1))


def test_current_state_drop_matrix_is_row_masked(rng):
    ch = random_channel(rng, 2)
    v = (1, 2, 1, 2)
    vm = cm.current_state_drop_matrix(ch, v) @ ch.trans
    for i in range(4):
        off = ch.labels[i, v[i] - 1] == 0
        assert np.allclose(vm[i], ch.trans[i] if off else 0.0)


def test_best_current_selection_picks_on_frequency(rng):
    ch = random_channel(rng, 2)
    v = cm.best_current_selection(ch)
    for i, f in enumerate(v):
        if ch.labels[i].any():
            assert ch.labels[i, f - 1] == 1
        else:
            assert f == 1


def test_redundant_matrix_keeps_all_off_columns(rng):
    ch = random_channel(rng, 2)
    r = cm.redundant_error_matrix(ch)
    assert np.allclose(r[:, 0], ch.trans[:, 0])
    assert np.allclose(r[:, 1:], 0.0)


def test_compose_independent_kron_and_labels():
    f1, f2 = cm.factor_from_alphas(0.3, 0.9), cm.factor_from_alphas(0.6, 0.2)
    ch = cm.compose_independent([f1, f2])
    assert np.allclose(ch.trans, np.kron(f1, f2))
    assert ch.labels.tolist() == [[0, 0], [0, 1], [1, 0], [1, 1]]
    # marginal of frequency 1 from any state follows f1
    for i in range(4):
        off1 = ch.trans[i, :2].sum()
        assert off1 == pytest.approx(f1[int(ch.labels[i, 0]), 0])


def test_compose_independent_limits():
    f = cm.factor_from_alphas(0.5, 0.5)
    with pytest.raises(cm.ChannelModelError):
        cm.compose_independent([f] * 11)
    with pytest.raises(cm.ChannelModelError):
        cm.compose_independent([])
    with pytest.raises(cm.ChannelModelError):
        cm.compose_independent([np.eye(3) / 3])


def test_compose_endpoints_need_opt_out():
    f = cm.factor_from_alphas(1.0, 0.5)
    with pytest.raises(cm.ChannelModelError):
        cm.compose_independent([f, cm.factor_from_alphas(0.5, 0.5)])
    cm.compose_independent([f, cm.factor_from_alphas(0.5, 0.5)], validate_ergodic=False)


def test_sample_transition_frequencies():
    ch = cm.gilbert_elliott(0.7, 0.8)
    rng = np.random.default_rng(0)
    draws = [cm.sample_transition(ch, 0, rng) for _ in range(20000)]
    assert np.mean(draws) == pytest.approx(0.3, abs=0.015)


def test_random_transition_regimes(rng):
    u = cm.random_transition(rng, 4, "uniform")
    d = cm.random_transition(rng, 4, "dominant")
    assert np.allclose(u.sum(axis=1), 1) and np.allclose(d.sum(axis=1), 1)
    assert np.all(d.max(axis=1) > 0.9)
    with pytest.raises(ValueError):
        cm.random_transition(rng, 4, "other")


def test_selection_vectors_lexicographic():
    ch = random_channel(np.random.default_rng(1), 2)
    vecs = list(ch.selection_vectors())
    assert len(vecs) == 2 ** 4
    assert vecs[0] == (1, 1, 1, 1) and vecs[1] == (1, 1, 1, 2) and vecs == sorted(vecs)


def test_memoryless_redundant_radius():
    ch = cm.compose_independent([cm.factor_from_alphas(0.3, 0.7)] * 2)
    assert rho(cm.redundant_error_matrix(ch)) == pytest.approx(0.09)
