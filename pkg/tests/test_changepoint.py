import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gasc.changepoint import (ChangeDecision, Evidence, decisions_to_tsv, detect_change,
                              detect_change_batch, read_predictions)
from gasc.errors import InputError
from gasc.gibbs import PosteriorTrajectory


def two_sense(means, stds):
    """Trajectory with one genre and two complementary senses."""
    m = np.asarray(means, dtype=float)
    s = np.broadcast_to(np.asarray(stds, dtype=float), m.shape)
    mean = np.stack([m, 1 - m], axis=-1)[:, None, :]
    std = np.stack([s, s], axis=-1)[:, None, :]
    return PosteriorTrajectory(mean, std, n_samples=100)


def test_constant_trajectory_unchanged():
    d = detect_change(two_sense([0.3] * 4, 0.05))
    assert d == ChangeDecision(False)


def test_rising_sense_detected():
    d = detect_change(two_sense([0.05, 0.10, 0.45, 0.60], [0.05, 0.03, 0.04, 0.05]))
    assert d.changed
    e = d.evidence
    assert (e.sense, e.genre, e.t1, e.t2, e.direction) == (0, 0, 0, 3, "rise")
    assert e.magnitude == pytest.approx(0.55)


def test_small_shift_with_wide_std_unchanged():
    assert not detect_change(two_sense([0.5, 0.4], 0.2)).changed


def test_tie_counts_as_changed():
    assert detect_change(two_sense([0.5, 0.25], 0.125)).changed
    assert not detect_change(two_sense([0.5, 0.25], 0.125 + 1e-9)).changed


def test_rise_then_fall_needs_any_pair():
    traj = two_sense([0.1, 0.8, 0.1], 0.05)
    assert detect_change(traj).changed
    assert not detect_change(traj, rule="endpoints").changed


def test_sigma_variants():
    # diff 0.3; stds 0.05 and 0.20 -> max 0.20, pooled ~0.146, min 0.05
    traj = PosteriorTrajectory(np.array([[[0.2, 0.8]], [[0.5, 0.5]]]),
                               np.array([[[0.05, 0.05]], [[0.20, 0.20]]]), 10)
    assert not detect_change(traj, sigma="max").changed
    assert detect_change(traj, sigma="pooled").changed
    assert detect_change(traj, sigma="either").changed


def test_any_genre_suffices():
    mean = np.array([[[0.5, 0.5], [0.2, 0.8]], [[0.5, 0.5], [0.7, 0.3]]])
    d = detect_change(PosteriorTrajectory(mean, np.full(mean.shape, 0.05), 10))
    assert d.changed and d.evidence.genre == 1


def test_errors():
    with pytest.raises(InputError):
        detect_change(two_sense([0.5], 0.1))
    with pytest.raises(InputError):
        detect_change(two_sense([0.5, 0.5], 0.1), rule="middle")
    with pytest.raises(InputError):
        detect_change(two_sense([0.5, 0.5], 0.1), sigma="median")
    with pytest.raises(ValueError):
        ChangeDecision(True)
    with pytest.raises(ValueError):
        ChangeDecision(False, Evidence(0, 0, 0, 1, "rise", 0.5))


def test_batch_isolates_errors_and_sorts():
    trajs = {f"w{i:02d}": two_sense([0.1, 0.1 + 0.02 * i], 0.05) for i in range(40)}
    trajs["bad"] = two_sense([0.5], 0.1)
    decisions, errors = detect_change_batch(trajs)
    assert list(decisions) == sorted(f"w{i:02d}" for i in range(40))
    assert list(errors) == ["bad"]
    assert [decisions[f"w{i:02d}"].changed for i in range(40)] == [i >= 5 for i in range(40)]
    single, _ = detect_change_batch({"only": two_sense([0.3, 0.3], 0.05)})
    assert list(single) == ["only"]
    with pytest.raises(InputError):
        detect_change_batch({})


def test_tsv_round_trip():
    decisions, _ = detect_change_batch({
        "rise": two_sense([0.05, 0.10, 0.45, 0.60], 0.05),
        "flat": two_sense([0.3, 0.3], 0.05),
    })
    text = decisions_to_tsv(decisions)
    lines = text.splitlines()
    assert lines[0].split("\t") == ["lemma", "changed", "sense", "genre", "t1", "t2",
                                    "direction", "magnitude"]
    assert lines[1] == "flat\t0\t\t\t\t\t\t"
    assert lines[2].startswith("rise\t1\t0\t0\t0\t3\trise\t")
    assert read_predictions(text) == {"flat": False, "rise": True}
    with pytest.raises(InputError, match="line 2"):
        read_predictions("lemma\tchanged\nx\tmaybe\n")
    with pytest.raises(InputError, match="duplicate"):
        read_predictions("x\t1\nx\t0\n")


trajectories = st.tuples(st.integers(2, 5), st.integers(1, 3), st.integers(2, 4), st.integers(0, 2 ** 32 - 1))


def random_traj(T, G, K, seed):
    rng = np.random.default_rng(seed)
    mean = rng.dirichlet(np.ones(K), size=(T, G))
    std = rng.uniform(0.0, 0.3, size=(T, G, K))
    return PosteriorTrajectory(mean, std, 10)


@settings(max_examples=150, deadline=None)
@given(trajectories, st.floats(1.0, 5.0))
def test_inflating_std_never_creates_change(shape, factor):
    traj = random_traj(*shape)
    wider = PosteriorTrajectory(traj.mean, traj.std * factor, 10)
    for rule in ("any-pair", "endpoints"):
        for sigma in ("max", "pooled", "either"):
            if detect_change(wider, rule=rule, sigma=sigma).changed:
                assert detect_change(traj, rule=rule, sigma=sigma).changed


@settings(max_examples=150, deadline=None)
@given(trajectories)
def test_time_reversal_swaps_direction(shape):
    traj = random_traj(*shape)
    T = traj.T
    rev = PosteriorTrajectory(traj.mean[::-1], traj.std[::-1], 10)
    a, b = detect_change(traj), detect_change(rev)
    assert a.changed == b.changed
    if a.changed:
        ea, eb = a.evidence, b.evidence
        assert eb.magnitude == pytest.approx(ea.magnitude, abs=1e-15)
        # the reversed evidence maps back to a qualifying tuple of opposite direction
        t1, t2 = T - 1 - eb.t2, T - 1 - eb.t1
        diff = traj.mean[t2, eb.genre, eb.sense] - traj.mean[t1, eb.genre, eb.sense]
        assert ("rise" if diff > 0 else "drop") != eb.direction
        assert abs(diff) == pytest.approx(eb.magnitude, abs=1e-15)


def test_decision_depends_only_on_arrays():
    traj = random_traj(4, 2, 3, 7)
    copy = PosteriorTrajectory(traj.mean.copy(), traj.std.copy(), 999, ["a", "b"])
    assert detect_change(traj) == detect_change(copy) == detect_change(traj)
