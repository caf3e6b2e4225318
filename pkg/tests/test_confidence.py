import math

import numpy as np
import pytest

from fairalloc import ConfidenceState, InputError, UnpulledArmError, confidence_bonus


def test_record_running_mean():
    st = ConfidenceState(2, alpha=3.0, sigma=1.0)
    st.record(0, 2.0)
    assert st.counts[0] == 1 and st.means[0] == 2.0
    st.record(0, 4.0)
    assert st.counts[0] == 2 and st.means[0] == 3.0


def test_constant_stream_mean_exact():
    st = ConfidenceState(1)
    for _ in range(1000):
        st.record(0, 1.0)
    assert abs(st.means[0] - 1.0) <= 1e-12


def test_bonus_formula_at_t_e():
    # mu_hat=0, T=1, sigma=1, alpha=3, t=e: bonus = sqrt(6)
    assert confidence_bonus(1.0, 3.0, math.e, 1) == pytest.approx(math.sqrt(6.0), abs=1e-12)


def test_zero_sigma_collapse():
    st = ConfidenceState(1, alpha=3.0, sigma=0.0)
    st.record(0, 5.0)
    st.set_epoch(17)
    assert st.ucb(0) == st.lcb(0) == 5.0


def test_doubling_count_halves_bonus():
    b1 = confidence_bonus(1.0, 3.0, 50, 1)
    b4 = confidence_bonus(1.0, 3.0, 50, 4)
    assert b4 == pytest.approx(b1 / 2.0, rel=1e-12)


def test_bonus_monotone_in_count_and_epoch():
    for t in (2, 5, 50):
        bonuses = [confidence_bonus(1.0, 3.0, t, c) for c in (1, 2, 5, 10)]
        assert all(a > b for a, b in zip(bonuses, bonuses[1:]))
    for c in (1, 3):
        by_t = [confidence_bonus(1.0, 3.0, t, c) for t in (2, 5, 50, 500)]
        assert all(a <= b for a, b in zip(by_t, by_t[1:]))


def test_alpha_validation():
    with pytest.raises(InputError):
        ConfidenceState(1, alpha=2.0)


def test_unpulled_arm_error():
    st = ConfidenceState(2)
    st.record(0, 1.0)
    st.set_epoch(5)
    with pytest.raises(UnpulledArmError):
        st.ucb(1)
    with pytest.raises(UnpulledArmError):
        st.ucb_vector()


def test_non_finite_sample_rejected():
    st = ConfidenceState(1)
    with pytest.raises(InputError):
        st.record(0, float("nan"))


def test_replay_reproduces_bounds_bitwise():
    rng = np.random.default_rng(7)
    samples = rng.standard_normal(200)
    arms = rng.integers(0, 3, size=200)

    def run():
        st = ConfidenceState(3, alpha=3.0, sigma=1.0)
        out = []
        for t, (a, x) in enumerate(zip(arms, samples), start=1):
            st.record(int(a), float(x))
            if t >= 3 and np.all(st.counts > 0):
                st.set_epoch(t)
                out.append((st.ucb_vector().copy(), st.lcb_vector().copy()))
        return out

    first, second = run(), run()
    for (u1, l1), (u2, l2) in zip(first, second):
        assert np.array_equal(u1, u2) and np.array_equal(l1, l2)


def test_vector_bounds_match_scalar():
    st = ConfidenceState(3, alpha=2.5, sigma=1.3)
    rng = np.random.default_rng(1)
    for _ in range(20):
        arm = int(rng.integers(3))
        st.record(arm, float(rng.standard_normal()))
    for _ in range(3):  # cover every arm at least once
        for arm in range(3):
            st.record(arm, 0.1)
    st.set_epoch(30)
    np.testing.assert_allclose(
        st.ucb_vector(), [st.ucb(a) for a in range(3)], rtol=0, atol=0
    )
    np.testing.assert_allclose(
        st.lcb_vector(), [st.lcb(a) for a in range(3)], rtol=0, atol=0
    )
    assert np.all(st.ucb_vector() >= st.lcb_vector())
