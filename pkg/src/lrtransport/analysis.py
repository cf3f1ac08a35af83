"""Eigenstate observables, disorder thresholds and the gapped-regime basis.

Site coordinates run over 1..N. ``HermitianSpectrum`` eigenvectors are the
columns of ``eigenvectors``; the ground state is the lowest eigenvalue.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np
from scipy.fft import dct

from .model import ChainSpec, DisorderRealization, ModelKind, build_hamiltonian
from .model import effective_long_range_coupling
from .spectral import HermitianSpectrum, eig_hermitian, energy_gap

# Band-centre localization length of the 1D Anderson model: xi = XI_COEFF * (omega/W)^2.
XI_COEFF = 105.2


@dataclass(frozen=True)
class ThresholdSet:
    """Disorder scales separating the transport regimes (energies in the input unit)."""

    n: int
    omega: float
    gamma: float
    w1: float
    w2: float
    w_gap: float
    gamma_gap: Optional[float] = None

    def xi(self, w: float) -> float:
        return localization_length(w, self.omega)


def localization_length(w: float, omega: float) -> float:
    """xi(W) = 105.2 (omega / W)^2 in lattice units."""
    if not w > 0:
        raise ValueError("localization length needs W > 0")
    return XI_COEFF * (omega / w) ** 2


def thresholds(n: int, omega: float, gamma: float, w: Optional[float] = None) -> ThresholdSet:
    """W1, W2, W_gap and, if ``w`` is given, the coupling gamma_gap(W) that closes the gap."""
    if n < 2:
        raise ValueError("thresholds need n >= 2")
    if not omega > 0 or gamma < 0:
        raise ValueError("need omega > 0 and gamma >= 0")
    log_n = math.log(n)
    w1 = math.sqrt(2.0 * XI_COEFF * log_n / n) * omega
    w2 = math.sqrt(2.0 * XI_COEFF * log_n) * omega
    w_gap = 0.5 * gamma * n * log_n
    gamma_gap = None if w is None else 2.0 * w / (n * log_n)
    return ThresholdSet(n=n, omega=omega, gamma=gamma, w1=w1, w2=w2, w_gap=w_gap,
                        gamma_gap=gamma_gap)


def gap_analytic(w: float, n: int, gamma: float) -> float:
    """Delta = W / (exp(2W / (N gamma)) - 1); tends to N gamma / 2 as W -> 0."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    if w < 0:
        raise ValueError("W must be nonnegative")
    if w == 0:
        return 0.5 * n * gamma
    x = 2.0 * w / (n * gamma)
    return w / math.expm1(x)


# -- variances ---------------------------------------------------------------

def centered_variance(prob: np.ndarray) -> np.ndarray:
    """sum_j (j - <x>)^2 p_j along axis 0; two passes avoid cancellation at large <x>."""
    x = np.arange(1, prob.shape[0] + 1, dtype=float)
    mean = x @ prob
    dev = x.reshape((-1,) + (1,) * (prob.ndim - 1)) - mean
    return np.sum(dev * dev * prob, axis=0)


def state_variances(vectors: np.ndarray) -> np.ndarray:
    """sigma^2 = <x^2> - <x>^2 for each column state."""
    return centered_variance(np.abs(vectors) ** 2)


def excited_state_variance(spec: HermitianSpectrum, exclude_ground: bool = True) -> float:
    """Mean site-space variance over the eigenstates, optionally without the lowest one."""
    if spec.dim < 2:
        raise ValueError("variance needs N >= 2")
    vecs = spec.eigenvectors[:, 1:] if exclude_ground else spec.eigenvectors
    return float(np.mean(state_variances(vecs)))


# -- averaged shape ------------------------------------------------------------

@dataclass
class ShapeProfile:
    """Peak-aligned average of |Psi|^2, indexed by the relative site k = -M..M."""

    probabilities: np.ndarray
    count: int
    window_fraction: float = 0.20

    @property
    def half_width(self) -> int:
        return (len(self.probabilities) - 1) // 2

    @property
    def k(self) -> np.ndarray:
        m = self.half_width
        return np.arange(-m, m + 1)

    def to_csv(self, path) -> None:
        np.savetxt(path, np.column_stack([self.k, self.probabilities]), delimiter=",",
                   fmt=["%d", "%.17g"], header="k,mean_prob", comments="")

    def log_slope(self, k_min: int, k_max: int) -> float:
        """Least-squares slope of ln<|Psi|^2> against |k| on k_min <= |k| <= k_max."""
        k = self.k
        p = self.probabilities
        sel = (np.abs(k) >= k_min) & (np.abs(k) <= k_max) & (p > 0)
        if sel.sum() < 2:
            raise ValueError("not enough positive points for a slope")
        return float(np.polyfit(np.abs(k[sel]), np.log(p[sel]), 1)[0])


@dataclass
class ShapeAccumulator:
    """Mergeable running sum for :func:`averaged_shape`."""

    n_sites: int
    window_fraction: float = 0.20
    exclude_ground: bool = True
    total: np.ndarray = field(init=False)
    count: int = 0

    def __post_init__(self):
        self.total = np.zeros(2 * self.half_width + 1)

    @property
    def half_width(self) -> int:
        return (self.n_sites + 1) // 2

    def window(self) -> tuple[int, int]:
        """0-based inclusive range of admissible peak sites (central window)."""
        n = self.n_sites
        span = max(1, int(round(self.window_fraction * n)))
        lo = (n - span) // 2
        return lo, lo + span - 1

    def add_vectors(self, vectors: np.ndarray) -> int:
        prob = np.abs(np.asarray(vectors)) ** 2
        if prob.shape[0] != self.n_sites:
            raise ValueError("vector length does not match the accumulator")
        peaks = np.argmax(prob, axis=0)
        lo, hi = self.window()
        keep = np.nonzero((peaks >= lo) & (peaks <= hi))[0]
        m = self.half_width
        n = self.n_sites
        for col in keep:
            p0 = peaks[col]
            # site j lands at profile index m + (j - p0); overhang is dropped
            start = m - p0
            a = max(0, -start)
            b = min(n, len(self.total) - start)
            self.total[start + a:start + b] += prob[a:b, col]
        self.count += len(keep)
        return len(keep)

    def add(self, spec: HermitianSpectrum) -> int:
        vecs = spec.eigenvectors[:, 1:] if self.exclude_ground else spec.eigenvectors
        return self.add_vectors(vecs)

    def merge(self, other: "ShapeAccumulator") -> "ShapeAccumulator":
        if (other.n_sites, other.window_fraction) != (self.n_sites, self.window_fraction):
            raise ValueError("cannot merge accumulators with different settings")
        out = ShapeAccumulator(self.n_sites, self.window_fraction, self.exclude_ground)
        out.total = self.total + other.total
        out.count = self.count + other.count
        return out

    def profile(self) -> ShapeProfile:
        if self.count == 0:
            raise ValueError("no eigenfunction peaked inside the central window")
        return ShapeProfile(self.total / self.count, self.count, self.window_fraction)


def averaged_shape(spectra: Iterable[HermitianSpectrum], window_fraction: float = 0.20,
                   exclude_ground: bool = True) -> ShapeProfile:
    """Average peak-aligned |Psi|^2 over all states peaked in the central window."""
    acc = None
    for spec in spectra:
        if acc is None:
            acc = ShapeAccumulator(spec.dim, window_fraction, exclude_ground)
        acc.add(spec)
    if acc is None:
        raise ValueError("averaged_shape needs at least one realization")
    return acc.profile()


# -- tails -------------------------------------------------------------------

@dataclass(frozen=True)
class TailAmplitude:
    """Tail probabilities of one realization, away from each state's peak."""

    average: float      # mean over states of the mean tail |Psi|^2
    log_mean: float     # mean of ln|Psi|^2 over all tail components
    states: int

    @property
    def typical(self) -> float:
        return math.exp(self.log_mean)


def default_exclusion(w: float, omega: float, n: int) -> int:
    """Peak half-width max(1, ceil(3 xi)) capped at N/10."""
    xi = localization_length(w, omega) if w > 0 else math.inf
    half = max(1, math.ceil(3.0 * xi)) if math.isfinite(xi) else n
    return int(min(half, max(1, n // 10)))


def tail_amplitude(spec: HermitianSpectrum, peak_exclusion_halfwidth: int,
                   exclude_ground: bool = True) -> TailAmplitude:
    """Average and log-average of |Psi|^2 outside |j - peak| <= halfwidth."""
    n = spec.eigenvectors.shape[0]
    if not 0 <= peak_exclusion_halfwidth < n:
        raise ValueError("exclusion window must be smaller than the chain")
    vecs = spec.eigenvectors[:, 1:] if exclude_ground else spec.eigenvectors
    prob = vecs * vecs if np.isrealobj(vecs) else np.abs(vecs) ** 2
    peaks = np.argmax(prob, axis=0)
    sites = np.arange(n)[:, None]
    outside = np.abs(sites - peaks[None, :]) > peak_exclusion_halfwidth
    counts = outside.sum(axis=0)
    if np.any(counts == 0):
        raise ValueError("exclusion window covers every site of some state")
    per_state = np.where(outside, prob, 0.0).sum(axis=0) / counts
    with np.errstate(divide="ignore"):
        logs = np.log(np.where(outside, prob, 1.0))
    # exact zeros (symmetric states) would send the log-mean to -inf; clip at the double floor
    logs = np.maximum(logs, math.log(np.finfo(float).tiny))
    log_mean = float(np.where(outside, logs, 0.0).sum() / counts.sum())
    return TailAmplitude(float(per_state.mean()), log_mean, vecs.shape[1])


# -- gapped-regime basis -------------------------------------------------------

def uniform_state(n: int) -> np.ndarray:
    return np.full(n, 1.0 / math.sqrt(n))


def complement_basis(n: int) -> np.ndarray:
    """Orthonormal cosine modes k = 1..N-1; together with the uniform state they span R^N."""
    modes = dct(np.eye(n), type=2, norm="ortho", axis=0)
    # row k of the transform is the k-th cosine mode; row 0 is the uniform state
    return modes[1:].T.copy()


@dataclass(frozen=True)
class PerturbativeBasis:
    """Uniform state plus the N-1 states diagonalizing H in its orthogonal complement."""

    d_state: np.ndarray
    mu_states: np.ndarray       # columns, site basis
    mu_energies: np.ndarray
    h_vector: np.ndarray        # <d|H0|mu>, signed
    h_norm: np.ndarray          # normalization from the resolvent sum, positive
    zeta: float
    d_energy: float             # -gamma (N - 1)/2 + zeta
    flagged: np.ndarray         # states where the resolvent form broke down

    def spectrum(self) -> HermitianSpectrum:
        """The basis as an eigensystem with the d-mu coupling dropped, sorted by energy."""
        vals = np.r_[self.d_energy, self.mu_energies]
        vecs = np.column_stack([self.d_state, self.mu_states])
        order = np.argsort(vals, kind="stable")
        return HermitianSpectrum(vals[order], vecs[:, order])


def perturbative_states(h0_spec: HermitianSpectrum, gamma: float, *,
                        breakdown_tol: float = 1e-12) -> PerturbativeBasis:
    """States of the chain plus all-to-all hopping that decouple from the uniform state.

    ``h0_spec`` is the eigensystem of the short-range part H0. In the space
    orthogonal to |d> the all-to-all term is the constant gamma/2, so
    H~ = P H0 P + gamma/2. Each eigenstate of H~ is rebuilt from the
    resolvent of H0 acting on |d>; where a denominator vanishes the state is
    flagged and taken directly from the diagonalization of H~.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    eps = h0_spec.eigenvalues
    v = h0_spec.eigenvectors
    n = len(eps)
    d = uniform_state(n)
    b = complement_basis(n)
    bv = b.T @ v                                   # <mu_basis|n>
    h_tilde = (bv * eps[None, :]) @ bv.T + 0.5 * gamma * np.eye(n - 1)
    h_tilde = 0.5 * (h_tilde + h_tilde.T)
    tspec = eig_hermitian(h_tilde)
    direct = b @ tspec.eigenvectors                 # site basis
    dn = v.T @ d                                    # <n|d>
    zeta = float(np.sum(eps * dn * dn))
    h_vec = (dn * eps) @ (v.T @ direct)             # <d|H0|mu>
    # the gamma/2 shift cancels in every denominator; work with eigenvalues of P H0 P
    lam, denom = _refine_roots(eps, dn * dn, tspec.eigenvalues - 0.5 * gamma)
    e_mu = lam + 0.5 * gamma
    small = np.abs(denom) < breakdown_tol * gamma
    flagged = np.any(small & (np.abs(dn)[:, None] > 0), axis=0) | (np.abs(h_vec) < 1e-300)
    safe = np.where(small, 1.0, denom)
    coef = np.where(small, 0.0, dn[:, None] / safe)         # <n|mu> / h_mu
    h_norm = 1.0 / np.sqrt(np.maximum(np.sum(coef * coef, axis=0), 1e-300))
    mu = v @ (coef * (np.sign(h_vec) * h_norm)[None, :])
    mu[:, flagged] = direct[:, flagged]
    # one reorthogonalization pass against |d> removes the roundoff left by the resolvent sum
    mu -= np.outer(d, d @ mu)
    mu /= np.linalg.norm(mu, axis=0)[None, :]
    d_energy = -0.5 * gamma * (n - 1) + zeta
    return PerturbativeBasis(d, mu, e_mu, h_vec, h_norm, zeta, d_energy, flagged)


def _refine_roots(poles: np.ndarray, weights: np.ndarray, roots: np.ndarray,
                  steps: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """Newton-polish the roots of sum_n w_n / (p_n - e) = 0.

    Each root is carried as an offset from its nearest pole so that the
    denominators p_n - e keep full relative precision near that pole.
    Returns the roots and the (poles, roots) matrix of denominators.
    """
    near = np.argmin(np.abs(poles[:, None] - roots[None, :]), axis=0)
    gaps = poles[:, None] - poles[near][None, :]        # p_n - p_k, exact for close poles
    delta = roots - poles[near]
    for _ in range(steps):
        den = gaps - delta[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            f = np.sum(weights[:, None] / den, axis=0)
            fp = np.sum(weights[:, None] / (den * den), axis=0)
            step = f / fp
        reach = 0.5 * np.min(np.abs(den), axis=0)
        ok = np.isfinite(step) & (np.abs(step) < reach)
        delta = np.where(ok, delta - step, delta)
    return poles[near] + delta, gaps - delta[None, :]


def anderson_part(spec: ChainSpec, dis: DisorderRealization) -> HermitianSpectrum:
    """Eigensystem of the short-range chain underlying ``spec``."""
    base = ChainSpec(spec.n_sites, spec.omega, 0.0, ModelKind.ANDERSON)
    return eig_hermitian(build_hamiltonian(base, dis))


# -- cavity versus long-range ----------------------------------------------------

@dataclass
class CavityComparison:
    gap_numeric: float
    gap_formula: float
    gamma_eff: float
    cavity_levels: np.ndarray       # non-polaritonic levels, ascending
    longrange_levels: np.ndarray    # excited levels, ascending
    cavity_shape: ShapeAccumulator
    longrange_shape: ShapeAccumulator

    @property
    def level_difference(self) -> float:
        return float(np.max(np.abs(self.cavity_levels - self.longrange_levels)))


def polariton_gap(n: int, g: float, omega: float) -> float:
    """sqrt(N g^2 + omega^2) - omega."""
    return math.sqrt(n * g * g + omega * omega) - abs(omega)


def _photon_weight(vecs: np.ndarray) -> np.ndarray:
    return vecs[-1, :] ** 2


def cavity_longrange_overlap(spec: ChainSpec, dis: DisorderRealization,
                             window_fraction: float = 0.20) -> CavityComparison:
    """Cavity chain versus the long-range chain with gamma_eff = 2 g / sqrt(N), same disorder.

    The two polaritons are the cavity eigenstates with the largest photon
    weight; the remaining N - 1 are compared with the long-range excited states.
    The numeric gap is the distance from the lower polariton to the lowest
    non-polaritonic level.
    """
    if spec.kind is not ModelKind.CAVITY:
        raise ValueError("cavity spec required")
    n, g = spec.n_sites, spec.cavity.g
    gamma_eff = effective_long_range_coupling(g, n)
    cav = eig_hermitian(build_hamiltonian(spec, dis))
    lr_spec = ChainSpec(n, spec.omega, gamma_eff, ModelKind.LONG_RANGE)
    lr = eig_hermitian(build_hamiltonian(lr_spec, dis))
    weight = _photon_weight(cav.eigenvectors)
    pol = np.sort(np.argsort(weight)[-2:])
    rest = np.setdiff1d(np.arange(n + 1), pol)
    cav_levels = cav.eigenvalues[rest]
    gap = float(cav_levels[0] - cav.eigenvalues[pol[0]])
    cav_acc = ShapeAccumulator(n, window_fraction, exclude_ground=False)
    cav_acc.add_vectors(cav.eigenvectors[:n, rest])
    lr_acc = ShapeAccumulator(n, window_fraction, exclude_ground=True)
    lr_acc.add(lr)
    return CavityComparison(gap, polariton_gap(n, g, spec.omega), gamma_eff, cav_levels,
                            lr.eigenvalues[1:], cav_acc, lr_acc)


def numeric_gap(spec: HermitianSpectrum) -> float:
    return energy_gap(spec.eigenvalues)
