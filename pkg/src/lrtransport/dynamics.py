"""Closed-system wave-packet spreading from a single site.

Propagation uses the spectral decomposition of H, so any time is exact
and no step size enters.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .analysis import centered_variance
from .spectral import HermitianSpectrum

DEFAULT_WINDOW = (500.0, 1.0e4)


def default_times(n_log: int = 400, t_min: float = 1e-2, t_max: float = 1e4,
                  n_early: int = 50) -> np.ndarray:
    """Log-spaced grid plus a linear early-time refinement, starting at t = 0."""
    early = np.linspace(0.0, t_min * 10, n_early, endpoint=False)
    return np.unique(np.r_[early, np.logspace(math.log10(t_min), math.log10(t_max), n_log)])


def center_site(n: int) -> int:
    """0-based index of site ceil(N/2)."""
    return (n + 1) // 2 - 1


@dataclass
class Trajectory:
    times: np.ndarray
    probabilities: np.ndarray   # (len(times), N)
    variance: np.ndarray

    def to_csv(self, path, snapshot_times: Optional[Sequence[float]] = None) -> None:
        """Columns t, sigma2; optional |psi_j|^2 snapshots go to ``<path>.snapshots.csv``."""
        np.savetxt(path, np.column_stack([self.times, self.variance]), delimiter=",",
                   fmt="%.17g", header="t,sigma2", comments="")
        if snapshot_times:
            idx = [int(np.argmin(np.abs(self.times - t))) for t in snapshot_times]
            rows = np.column_stack([self.times[idx], self.probabilities[idx]])
            head = "t," + ",".join(f"p{j + 1}" for j in range(self.probabilities.shape[1]))
            np.savetxt(f"{path}.snapshots.csv", rows, delimiter=",", fmt="%.17g",
                       header=head, comments="")


def evolve(h_spec: HermitianSpectrum, psi0: int, times) -> np.ndarray:
    """Amplitudes psi_j(t) = sum_n exp(-i E_n t) <j|n><n|psi0>, shape (len(times), N)."""
    n = h_spec.dim
    if not 0 <= psi0 < n:
        raise ValueError(f"initial site {psi0} outside chain of {n}")
    times = np.asarray(times, dtype=float)
    vecs = h_spec.eigenvectors
    weights = vecs[psi0, :]
    phases = np.exp(-1j * np.outer(times, h_spec.eigenvalues))
    return (phases * weights[None, :]) @ vecs.T


def propagate(h_spec: HermitianSpectrum, psi0: int, times) -> Trajectory:
    """Site probabilities and variance of a packet started on site ``psi0`` (0-based)."""
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) < 0):
        raise ValueError("time grid must be sorted")
    amp = evolve(h_spec, psi0, times)
    prob = amp.real ** 2 + amp.imag ** 2
    return Trajectory(times, prob, variance_of(prob))


def variance_of(prob: np.ndarray) -> np.ndarray:
    """sigma^2 per row of a (times, N) probability array."""
    return centered_variance(prob.T)


def variance_trace(traj: Trajectory | Iterable[Trajectory], ensemble: bool = False) -> np.ndarray:
    """sigma^2(t); with ``ensemble`` the distributions are averaged first, then the moments."""
    if isinstance(traj, Trajectory):
        return variance_of(traj.probabilities)
    trajs = list(traj)
    if not trajs:
        raise ValueError("no trajectories")
    if ensemble:
        mean_prob = sum(t.probabilities for t in trajs) / len(trajs)
        return variance_of(mean_prob)
    return np.mean([variance_of(t.probabilities) for t in trajs], axis=0)


def stationary_variance(times: np.ndarray, trace: np.ndarray,
                        window: tuple[float, float] = DEFAULT_WINDOW) -> float:
    """Time average of sigma^2 over ``window`` (trapezoid on the sampled points)."""
    t_a, t_b = window
    if not t_b > t_a:
        raise ValueError("window must have t_b > t_a")
    times = np.asarray(times, dtype=float)
    if times[0] > t_a or times[-1] < t_b:
        raise ValueError("window outside the sampled time range")
    sel = (times >= t_a) & (times <= t_b)
    t, s = times[sel], np.asarray(trace)[sel]
    if len(t) == 1:
        return float(s[0])
    return float(np.trapezoid(s, t) / (t[-1] - t[0]))


@dataclass
class TailStats:
    """Running sums for the stationary tail statistics (mergeable)."""

    prob_sum: float = 0.0
    log_sum: float = 0.0
    count: int = 0

    def add(self, prob: np.ndarray, exclude: int) -> None:
        """Accumulate every site but ``exclude`` from rows of ``prob`` (times, N)."""
        mask = np.ones(prob.shape[1], dtype=bool)
        mask[exclude] = False
        tail = prob[:, mask]
        tiny = np.finfo(float).tiny
        self.prob_sum += float(tail.sum())
        self.log_sum += float(np.log(np.maximum(tail, tiny)).sum())
        self.count += tail.size

    def merge(self, other: "TailStats") -> "TailStats":
        return TailStats(self.prob_sum + other.prob_sum, self.log_sum + other.log_sum,
                         self.count + other.count)

    @property
    def average(self) -> float:
        return self.prob_sum / self.count

    @property
    def typical(self) -> float:
        return math.exp(self.log_sum / self.count)


def stationary_tail_stats(trajectories: Iterable[Trajectory], exclude: int,
                          window: tuple[float, float] = DEFAULT_WINDOW) -> tuple[float, float]:
    """(average, typical) of |psi_j|^2 over non-central sites, realizations and window times."""
    stats = TailStats()
    for traj in trajectories:
        sel = (traj.times >= window[0]) & (traj.times <= window[1])
        if not np.any(sel):
            raise ValueError("no samples inside the stationary window")
        stats.add(traj.probabilities[sel], exclude)
    if stats.count == 0:
        raise ValueError("no trajectories")
    return stats.average, stats.typical
