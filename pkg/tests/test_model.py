import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gasc.corpus import Snippet
from gasc.errors import InputError, ModelError
from gasc.model import (ModelConfig, ModelState, TrajectorySpec, forward_simulate, log_joint,
                        log_likelihood, log_prior, pack_snippets, softmax_slice, temporal_log_prior)


def snip(t, g, ctx, i=0):
    return Snippet(f"s{i}", t, g, tuple(ctx), f"d{i}")


def test_softmax_examples():
    np.testing.assert_allclose(softmax_slice(np.zeros(4)), [0.25] * 4)
    np.testing.assert_allclose(softmax_slice([math.log(9), 0.0]), [0.9, 0.1], rtol=1e-12)


@settings(max_examples=100, deadline=None)
@given(arrays(float, st.integers(1, 12), elements=st.floats(-50, 50)), st.floats(-100, 100))
def test_softmax_normalized_and_shift_invariant(x, c):
    p = softmax_slice(x)
    assert abs(p.sum() - 1) < 1e-12 and np.all(p >= 0)
    np.testing.assert_allclose(softmax_slice(x + c), p, atol=1e-12)


def tiny_state(T=2, K=1, G=1, V=2):
    return ModelState(np.zeros((T, K, V)), np.zeros((T, G, K)), 1.0, np.zeros(0, dtype=np.int64))


def test_log_joint_single_snippet():
    cfg = ModelConfig(K=1, G=1, T=2, V=2)
    st_ = tiny_state()
    st_.z = np.array([0])
    lj = log_joint(st_, [snip(0, 0, [1])], cfg)
    assert lj - log_prior(st_, cfg) == pytest.approx(math.log(1.0) + math.log(0.5), abs=1e-12)


def test_log_joint_empty_and_additive():
    cfg = ModelConfig(K=2, G=1, T=2, V=3)
    rng = np.random.default_rng(0)
    st_ = ModelState(rng.normal(size=(2, 2, 3)), rng.normal(size=(2, 1, 2)), 2.0, np.zeros(0, dtype=np.int64))
    assert log_joint(st_, [], cfg) == pytest.approx(log_prior(st_, cfg))
    a = [snip(0, 0, [0, 1], 0), snip(1, 0, [2], 1)]
    b = [snip(1, 0, [1, 1], 2)]
    st_.z = np.array([0, 1])
    la = log_joint(st_, a, cfg)
    st_.z = np.array([0, 1, 1])
    lab = log_joint(st_, a + b, cfg)
    lb = log_likelihood(st_, pack_snippets(b, 3), np.array([1]))
    assert lab == pytest.approx(la + lb, abs=1e-10)
    # duplicating a snippet adds its term once more
    st_.z = np.array([0, 1, 1, 1])
    assert log_joint(st_, a + b + b, cfg) == pytest.approx(lab + lb, abs=1e-10)


def test_log_joint_dimension_mismatch():
    with pytest.raises(ModelError):
        log_joint(tiny_state(V=3), [], ModelConfig(K=1, G=1, T=2, V=2))


def test_temporal_prior_constant_path():
    x = np.full((4, 3), 0.7)
    lp = temporal_log_prior(x, 5.0, sigma0=2.0)
    init = 3 * (-0.5 * (0.7 / 2.0) ** 2 - math.log(2.0) - 0.5 * math.log(2 * math.pi))
    inc = 9 * 0.5 * (math.log(5.0) - math.log(2 * math.pi))
    assert lp == pytest.approx(init + inc)


def test_temporal_prior_doubling_increment():
    prec, d = 3.0, 0.4
    a = temporal_log_prior(np.array([[0.0], [d]]), prec)
    b = temporal_log_prior(np.array([[0.0], [2 * d]]), prec)
    assert a - b == pytest.approx(1.5 * prec * d * d)


def test_temporal_prior_monotone_in_precision():
    x = np.array([[0.0], [1.0], [0.5]])
    vals = [temporal_log_prior(x, p) for p in (1.0, 10.0, 100.0)]
    # the quadratic penalty dominates once precision exceeds 1 / mean squared increment
    assert vals[1] > vals[2]
    with pytest.raises(InputError):
        temporal_log_prior(x[:1], 1.0)


def test_forward_simulate_examples():
    sim = forward_simulate(ModelConfig(K=1, G=2, T=3, V=5), n_snippets_per_bin=20, seed=1)
    assert np.all(sim.true_z == 0) and len(sim.snippets) == 60
    empty = forward_simulate(ModelConfig(K=2, G=1, T=2, V=5), n_snippets_per_bin=0, seed=1)
    assert empty.snippets == [] and np.allclose(empty.true_state.phi.sum(-1), 1)


def test_forward_simulate_binomial_split():
    T, V = 2, 4
    psi = np.array([[0.5, 0.5, 0, 0], [0, 0, 0.5, 0.5]])
    spec = TrajectorySpec(phi=np.full((T, 1, 2), 0.5), psi=np.broadcast_to(psi, (T, 2, V)).copy())
    sim = forward_simulate(ModelConfig(K=2, G=1, T=T, V=V), spec, np.array([[10000], [0]]), seed=2)
    n = sim.true_z.size
    assert abs(sim.true_z.sum() - n / 2) <= 3 * math.sqrt(n * 0.25)
    # disjoint supports: every snippet's words identify its sense
    for s, z in zip(sim.snippets, sim.true_z):
        assert all((w >= 2) == bool(z) for w in s.context)


def test_forward_simulate_is_reproducible_and_checks_dims():
    cfg = ModelConfig(K=3, G=2, T=3, V=7)
    a = forward_simulate(cfg, n_snippets_per_bin=30, seed=5)
    b = forward_simulate(cfg, n_snippets_per_bin=30, seed=5)
    assert a.snippets == b.snippets and np.array_equal(a.true_state.chi, b.true_state.chi)
    with pytest.raises(InputError):
        forward_simulate(cfg, TrajectorySpec(phi=np.full((2, 2, 3), 1 / 3)), 5, seed=0)


def test_word_frequencies_match_mixture():
    T, K, V = 2, 2, 5
    rng = np.random.default_rng(3)
    psi = rng.dirichlet(np.ones(V), size=(T, K))
    phi = np.array([[[0.3, 0.7]], [[0.6, 0.4]]])
    sim = forward_simulate(ModelConfig(K=K, G=1, T=T, V=V), TrajectorySpec(phi=phi, psi=psi),
                           np.array([[4000], [4000]]), seed=4)
    for t in range(T):
        words = np.concatenate([s.context for s in sim.snippets if s.time_bin == t])
        freq = np.bincount(words, minlength=V) / words.size
        expected = phi[t, 0] @ psi[t]
        se = np.sqrt(expected * (1 - expected) / words.size)
        # words within a snippet share a sense, so allow for the cluster inflation
        assert np.all(np.abs(freq - expected) < 6 * se * math.sqrt(10))


def test_state_json_round_trip():
    sim = forward_simulate(ModelConfig(K=2, G=2, T=3, V=4), n_snippets_per_bin=5, seed=0)
    st_ = sim.true_state
    back = ModelState.from_json(st_.to_json())
    assert np.array_equal(back.chi, st_.chi) and np.array_equal(back.zeta, st_.zeta)
    assert back.kappa_phi == st_.kappa_phi and np.array_equal(back.z, st_.z)
    with pytest.raises(InputError):
        ModelState.from_dict({"format": "other"})
