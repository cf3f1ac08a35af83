"""Transfer time, steady-state current and two-lead transmission.

All quantities use hbar = 1: times in 1/energy, currents in energy.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import scipy.linalg as sla

from .model import OpenSystemConfig
from .rankupdate import open_spectrum
from .spectral import (BiorthogonalSpectrum, HermitianSpectrum, ProjectedSpectrum,
                       SpectralError, eig_biorthogonal)

CURRENT_FLOOR = 1e-300
LINDBLAD_MAX_DIM = 64

Spectrum = Union[BiorthogonalSpectrum, ProjectedSpectrum]


class TransportError(RuntimeError):
    """A realization whose observable is undefined (zero-width level, divergent integral)."""


@dataclass
class TransportRecord:
    tau: float
    current: float
    log_current: float
    t_int: Optional[float] = None
    t_of_e: Optional[tuple[np.ndarray, np.ndarray]] = None
    variance: Optional[float] = None
    gap: Optional[float] = None
    realization: tuple[int, int, float] = (0, 0, 0.0)


def _rows(spec: Spectrum, a: int, b: int) -> tuple[np.ndarray, np.ndarray]:
    """(<a|r_k>, <r~_k|b>) for every pole k."""
    if isinstance(spec, BiorthogonalSpectrum):
        return spec.right[a, :], spec.left[b, :].conj()
    return spec.row(a)[0], spec.row(b)[1]


def _width_floor(spec: Spectrum) -> float:
    # Dense solves carry an absolute eigenvalue error ~eps*||H||; the secular
    # solver resolves widths relative to themselves.
    if isinstance(spec, BiorthogonalSpectrum):
        return 1e-14 * max(1.0, float(np.max(np.abs(spec.eigenvalues))))
    return 0.0


def log_transfer_time(spec: Spectrum, source: int, drain: int, gamma_d: float) -> float:
    """Natural log of the mean transfer time, from the pole expansion.

    tau = gamma_d * sum_{k,k'} a_k a_k'^* / [-(z_k - z_k'^*)^2] with
    a_k = <drain|r_k><r~_k|source>. The sum is rescaled by the widths so that
    levels with vanishing width overflow only in the final log. Returns ``inf``
    when the source overlaps a level of zero (underflowed) width.
    """
    if not gamma_d > 0:
        raise TransportError("no drain: tau diverges")
    z = spec.eigenvalues
    r_drain, _ = _rows(spec, drain, drain)
    _, l_src = _rows(spec, source, source)
    a = r_drain * l_src
    widths = -2.0 * z.imag
    floor = _width_floor(spec)
    # population the source leaves on a level without width never reaches the drain
    trapped = (np.abs(l_src) > 0) & (widths <= floor)
    if np.any(trapped):
        if floor > 0:
            raise TransportError("level reachable from the source has a width below "
                                 "the dense solver's resolution")
        return math.inf
    keep = np.abs(a) > 0
    z, a, widths = z[keep], a[keep], widths[keep]
    if z.size == 0:
        raise TransportError("source decoupled from every decaying level")
    # b_k = a_k / Gamma_k ; kernel K = Gamma_k Gamma_k' / [-(z_k - z_k'^*)^2], |K| <= 1
    b = a / widths
    bmax = np.max(np.abs(b))
    if not np.isfinite(bmax):
        logs = np.log(np.abs(a)) - np.log(widths)
        shift = np.max(logs)
        b = np.exp(logs - shift) * np.exp(1j * np.angle(a))
        log_scale = 2.0 * shift
    else:
        b = b / bmax
        log_scale = 2.0 * math.log(bmax)
    diff = z[:, None] - z.conj()[None, :]
    # divide before multiplying: Gamma^2 itself can underflow while Gamma / diff cannot
    kern = -(widths[:, None] / diff) * (widths[None, :] / diff)
    total = gamma_d * (b @ kern @ b.conj())
    if not np.isfinite(total):
        raise TransportError(f"transfer-time sum is not finite ({total})")
    if total.real <= 0:
        raise TransportError(f"non-positive transfer-time sum {total}")
    if abs(total.imag) > 1e-8 * abs(total.real):
        raise TransportError(f"transfer-time sum has imaginary residue {total.imag:.3e}")
    return log_scale + math.log(total.real)


def transfer_time(spec: Spectrum, source: int, drain: int, gamma_d: float) -> float:
    """Mean time to leave through the drain for an excitation started on ``source``.

    Sites are 0-based. Returns ``inf`` if tau overflows a double or the source
    overlaps a level whose width is zero or below the double range.
    """
    lt = log_transfer_time(spec, source, drain, gamma_d)
    return math.exp(lt) if lt < 709.0 else math.inf


def steady_current(tau: float, gamma_p: float) -> float:
    """I = gamma_p / (gamma_p * tau + 1) (hbar = 1)."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    if gamma_p < 0:
        raise ValueError("gamma_p must be nonnegative")
    if math.isinf(tau):
        return 0.0 if gamma_p == 0 else CURRENT_FLOOR
    return gamma_p / (gamma_p * tau + 1.0)


def log_steady_current(log_tau: float, gamma_p: float) -> float:
    """log I computed from log tau without overflow."""
    if gamma_p <= 0:
        return -math.inf
    lg = math.log(gamma_p)
    return lg - np.logaddexp(lg + log_tau, 0.0)


def lindblad_steady_current(h: np.ndarray, open_cfg: OpenSystemConfig,
                            n_sites: Optional[int] = None) -> float:
    """Stationary current from the full Lindblad equation (dense Liouvillian).

    Basis {|0>, |1>, ..., |d>} with |0> the vacuum; pump |1><0| at rate
    gamma_p on the source, drain |0><N| at rate gamma_d on the drain site.
    Only meant as an oracle: the solve is O(d^6).
    """
    h = np.asarray(h, dtype=float)
    d = h.shape[0] + 1
    if d > LINDBLAD_MAX_DIM:
        raise ValueError(f"Liouvillian oracle limited to {LINDBLAD_MAX_DIM - 1} states")
    gp, gd = open_cfg.gamma_p, open_cfg.gamma_d
    if gp == 0 and gd == 0:
        raise ValueError("singular Liouvillian: both rates vanish")
    src, drn = open_cfg.sites(h.shape[0] if n_sites is None else n_sites)
    src, drn = src + 1, drn + 1
    ham = np.zeros((d, d))
    ham[1:, 1:] = h
    jumps = []
    if gp > 0:
        lp = np.zeros((d, d))
        lp[src, 0] = math.sqrt(gp / 2.0)
        jumps.append(lp)
    if gd > 0:
        ld = np.zeros((d, d))
        ld[0, drn] = math.sqrt(gd / 2.0)
        jumps.append(ld)
    eye = np.eye(d)
    # column-stacking: vec(A X B) = (B^T kron A) vec(X)
    liou = -1j * (np.kron(eye, ham) - np.kron(ham.T, eye))
    for jop in jumps:
        jj = jop.T @ jop
        liou += 2.0 * np.kron(jop.conj(), jop) - np.kron(eye, jj) - np.kron(jj.T, eye)
    rhs = np.zeros(d * d, dtype=complex)
    # replace the vacuum-population equation by Tr(rho) = 1
    liou[0, :] = 0.0
    liou[0, np.arange(d) * (d + 1)] = 1.0
    rhs[0] = 1.0
    with warnings.catch_warnings():
        # rcond ~1e-17 is expected at strong disorder; refinement recovers accuracy
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu = sla.lu_factor(liou, check_finite=False)
        vec = sla.lu_solve(lu, rhs)
        vec += sla.lu_solve(lu, rhs - liou @ vec)
    rho_nn = vec[drn * (d + 1)].real
    return gd * rho_nn


def transmission_at(spec: Spectrum, e, nu: float, source: int = 0,
                    drain: Optional[int] = None) -> np.ndarray:
    """|Z(E)|^2 with Z = nu sum_r <source|r><r~|drain> / (E - z_r)."""
    drain = (_dim(spec) - 1) if drain is None else drain
    r_src, _ = _rows(spec, source, source)
    _, l_drn = _rows(spec, drain, drain)
    amp = r_src * l_drn
    e = np.atleast_1d(np.asarray(e, dtype=float))
    z = spec.eigenvalues
    widths = -2.0 * z.imag
    if nu > 0 and np.any(widths <= 0):
        near = np.min(np.abs(e[:, None] - z[None, :]), axis=1)
        if np.any(near < 1e-14 * max(1.0, float(np.max(np.abs(z))))):
            raise TransportError("energy coincides with an undamped level")
    zval = nu * ((1.0 / (e[:, None] - z[None, :])) @ amp)
    return np.abs(zval) ** 2


def integrated_transmission(spec: Spectrum, nu: float, source: int = 0,
                            drain: Optional[int] = None) -> float:
    """Closed-form integral of T(E) over the real line."""
    if nu == 0:
        return 0.0
    drain = (_dim(spec) - 1) if drain is None else drain
    r_src, _ = _rows(spec, source, source)
    _, l_drn = _rows(spec, drain, drain)
    amp = r_src * l_drn
    z = spec.eigenvalues
    widths = -2.0 * z.imag
    if np.any(widths[np.abs(amp) > 0] <= _width_floor(spec)):
        raise TransportError("zero-width resonance: integrated transmission diverges")
    en = z.real
    denom = 0.5 * (widths[:, None] + widths[None, :]) - 1j * (en[None, :] - en[:, None])
    total = 2.0 * math.pi * nu * nu * (amp @ (1.0 / denom) @ amp.conj())
    if abs(total.imag) > 1e-8 * max(abs(total.real), 1e-300):
        raise TransportError(f"integrated transmission has imaginary residue {total.imag:.3e}")
    return float(total.real)


def _dim(spec: Spectrum) -> int:
    if isinstance(spec, BiorthogonalSpectrum):
        return spec.dim
    raise ValueError("drain site must be given explicitly for a projected spectrum")


# -- hot-path helpers used by the ensemble driver ---------------------------

def drain_spectrum(hspec: HermitianSpectrum, h: Optional[np.ndarray], source: int, drain: int,
                   gamma_d: float) -> Spectrum:
    """Poles with a drain on ``drain``: secular solver, dense fallback."""
    try:
        return open_spectrum(hspec, [drain], 0.5 * gamma_d, [source, drain])
    except SpectralError:
        if h is None:
            raise
        heff = np.asarray(h, dtype=complex).copy()
        heff[drain, drain] -= 0.5j * gamma_d
        return eig_biorthogonal(heff).project([source, drain])


def scattering_spectrum(hspec: HermitianSpectrum, h: Optional[np.ndarray], source: int,
                        drain: int, nu: float) -> Spectrum:
    """Poles with two leads of strength ``nu`` on ``source`` and ``drain``."""
    try:
        return open_spectrum(hspec, [source, drain], 0.5 * nu, [source, drain])
    except SpectralError:
        if h is None:
            raise
        heff = np.asarray(h, dtype=complex).copy()
        heff[source, source] -= 0.5j * nu
        heff[drain, drain] -= 0.5j * nu
        return eig_biorthogonal(heff).project([source, drain])
