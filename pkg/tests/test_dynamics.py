import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lrtransport.dynamics import (Trajectory, center_site, default_times, evolve, propagate,
                                  stationary_tail_stats, stationary_variance, variance_of,
                                  variance_trace)
from lrtransport.model import ChainSpec, build_hamiltonian, sample_disorder
from lrtransport.spectral import eig_hermitian


def _spectrum(n, w, gamma, seed=0):
    spec = ChainSpec(n, 1.0, gamma)
    return eig_hermitian(build_hamiltonian(spec, sample_disorder(spec, w, seed, 0)))


def test_initial_state_is_localized():
    hs = _spectrum(11, 2.0, 1.0)
    traj = propagate(hs, 5, [0.0, 1.0])
    assert traj.probabilities[0, 5] == pytest.approx(1.0, abs=1e-14)
    assert traj.variance[0] == pytest.approx(0.0, abs=1e-12)


def test_dimer_rabi_oscillation():
    hs = _spectrum(2, 0.0, 0.0)
    t = np.linspace(0, 10, 101)
    traj = propagate(hs, 0, t)
    assert np.allclose(traj.probabilities[:, 1], np.sin(t) ** 2, atol=1e-13)


def test_ballistic_spreading_of_clean_chain():
    # sum_n n^2 J_n(2t)^2 = 2 t^2 on the infinite chain; no reflection before t ~ N/4
    n = 2001
    hs = _spectrum(n, 0.0, 0.0)
    t = np.linspace(0.5, 100, 60)
    traj = propagate(hs, center_site(n), t)
    assert np.allclose(traj.variance, 2 * t * t, rtol=1e-2)


@settings(max_examples=20)
@given(st.integers(2, 80), st.floats(0, 100), st.floats(0, 5), st.integers(0, 99))
def test_norm_bound_and_time_reversal(n, w, gamma, seed):
    hs = _spectrum(n, w, gamma, seed)
    t = np.r_[0.0, np.logspace(-2, 4, 30)]
    traj = propagate(hs, center_site(n), t)
    assert np.allclose(traj.probabilities.sum(axis=1), 1, atol=1e-10)
    assert np.all(traj.variance <= (n * n - 1) / 4 + 1e-9)
    # evolve forward to t, then back by -t with the same spectral decomposition
    amp = evolve(hs, center_site(n), [37.5])[0]
    vecs = hs.eigenvectors
    back = vecs @ (np.exp(1j * hs.eigenvalues * 37.5) * (vecs.T @ amp))
    target = np.zeros(n)
    target[center_site(n)] = 1.0
    assert np.allclose(back, target, atol=1e-9)


def test_evolve_rejects_bad_site_and_unsorted_times():
    hs = _spectrum(5, 1.0, 0.0)
    with pytest.raises(ValueError):
        evolve(hs, 5, [0.0])
    with pytest.raises(ValueError):
        propagate(hs, 0, [1.0, 0.0])


def test_variance_of_reference_distributions():
    n = 21
    delta = np.zeros((1, n))
    delta[0, 3] = 1.0
    uniform = np.full((1, n), 1.0 / n)
    assert variance_of(delta)[0] == 0.0
    assert variance_of(uniform)[0] == pytest.approx((n * n - 1) / 12, rel=1e-13)


def test_ensemble_variance_averages_distributions_first():
    n = 9
    t = np.array([0.0])
    a = np.zeros((1, n))
    a[0, 0] = 1.0
    b = np.zeros((1, n))
    b[0, -1] = 1.0
    trajs = [Trajectory(t, a, variance_of(a)), Trajectory(t, b, variance_of(b))]
    assert variance_trace(trajs)[0] == 0.0
    assert variance_trace(trajs, ensemble=True)[0] == pytest.approx(((n - 1) / 2) ** 2)
    assert variance_trace(trajs[0])[0] == 0.0


def test_oscillation_at_collective_frequency():
    # the extended ground state beats against the band at frequency N gamma / 2
    n = 1001
    hs = _spectrum(n, 0.1, 1.0)
    t = np.linspace(0, 1, 4001)
    s = propagate(hs, center_site(n), t).variance
    s = s - np.polyval(np.polyfit(t, s, 3), t)
    freq = 2 * np.pi * np.fft.rfftfreq(len(t), t[1] - t[0])
    power = np.abs(np.fft.rfft(s * np.hanning(len(t))))
    peak = freq[5 + np.argmax(power[5:])]
    assert peak == pytest.approx(n / 2, rel=0.05)


def test_stationary_variance_of_constant_trace():
    t = np.linspace(0, 2e4, 301)
    assert stationary_variance(t, np.full_like(t, 3.5)) == pytest.approx(3.5)
    with pytest.raises(ValueError):
        stationary_variance(t, t, (10.0, 5.0))
    with pytest.raises(ValueError):
        stationary_variance(t[:10], t[:10])


def test_tail_stats_of_uniform_distribution():
    n = 50
    t = np.linspace(500, 1e4, 5)
    p = np.full((len(t), n), 1.0 / n)
    avg, typ = stationary_tail_stats([Trajectory(t, p, variance_of(p))], exclude=n // 2)
    assert avg == pytest.approx(1 / n, rel=1e-12)
    assert typ == pytest.approx(1 / n, rel=1e-12)


def test_default_times():
    t = default_times()
    assert t[0] == 0.0 and t[-1] == pytest.approx(1e4)
    assert np.all(np.diff(t) > 0)
    assert center_site(1001) == 500
