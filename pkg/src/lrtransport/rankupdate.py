"""Poles of ``H - i*kappa*sum_s |s><s|`` from the eigensystem of ``H``.

For one or two damped sites the effective matrix is a low-rank update of
the real symmetric ``H``. In the eigenbasis of ``H`` it reads
``diag(E) - i*kappa*U U^T`` with ``U`` the (N, m) block of eigenvector
components on the damped sites, so its eigenvalues are the roots of
``det(I + i*kappa*U^T (z - E)^{-1} U)``. All N roots are found together by
Aberth iteration in O(N^2) per sweep.

Each root is stored as an offset from the unperturbed level it started
from, ``z_k = E_k + delta_k``. The secular function is deflated at that pole
before evaluation, so a width far below eps*||H|| (a level localized away
from the damped sites) is resolved to the accuracy of its eigenvector weight
on those sites. A dense complex eigensolver only reaches an absolute
accuracy of ~eps*||H|| on every eigenvalue.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .spectral import HermitianSpectrum, ProjectedSpectrum, SpectralError

_EPS = np.finfo(float).eps


def _pole_inverse(e, own, delta):
    """1/(z_k - E_n) for the roots ``own`` with the own-pole column zeroed."""
    rows = np.arange(own.size)
    d = (e[own][:, None] - e[None, :]) + delta[:, None]
    d[rows, own] = 1.0
    inv = 1.0 / d
    inv[rows, own] = 0.0
    return inv


def _secular_terms(e, own, delta, c, kappa):
    """Deflated secular value h, its derivative and the pole sum for roots ``own``.

    The secular determinant times (z - E_own) is regular at the own pole, so
    tiny offsets are resolved without cancellation.
    """
    inv = _pole_inverse(e, own, delta)
    inv2 = inv * inv
    psum = inv.sum(axis=1)
    m = c.shape[1]
    ck = c[own]
    ik = 1j * kappa
    if m == 1:
        w = c[:, 0] ** 2
        s = inv @ w
        ds = -(inv2 @ w)
        f1 = 1.0 + ik * s
        df1 = ik * ds
        wk = ck[:, 0] ** 2
        h = ik * wk + delta * f1
        dh = f1 + delta * df1
        return h, dh, psum
    # m == 2: det(A + u u^T) = det A + u^T adj(A) u for 2x2 A.
    c0, c1 = c[:, 0], c[:, 1]
    g00, g01, g11 = inv @ (c0 * c0), inv @ (c0 * c1), inv @ (c1 * c1)
    d00, d01, d11 = -(inv2 @ (c0 * c0)), -(inv2 @ (c0 * c1)), -(inv2 @ (c1 * c1))
    a00, a01, a11 = 1.0 + ik * g00, ik * g01, 1.0 + ik * g11
    b00, b01, b11 = ik * d00, ik * d01, ik * d11
    det = a00 * a11 - a01 * a01
    ddet = b00 * a11 + a00 * b11 - 2.0 * a01 * b01
    u0, u1 = ck[:, 0], ck[:, 1]
    quad = u0 * u0 * a11 - 2.0 * u0 * u1 * a01 + u1 * u1 * a00
    dquad = u0 * u0 * b11 - 2.0 * u0 * u1 * b01 + u1 * u1 * b00
    h = delta * det + ik * quad
    dh = det + delta * ddet + ik * dquad
    return h, dh, psum


def secular_roots(e: np.ndarray, c: np.ndarray, kappa: float, *,
                  maxiter: int = 200, rtol: float = 4 * _EPS) -> np.ndarray:
    """Offsets ``delta_k`` such that ``E_k + delta_k`` are the N eigenvalues."""
    e = np.asarray(e, dtype=float)
    c = np.asarray(c, dtype=float)
    n, m = c.shape
    if m not in (1, 2):
        raise ValueError("only rank-1 and rank-2 updates are supported")
    if n > 1 and np.min(np.diff(e)) <= 64 * _EPS * max(1.0, np.max(np.abs(e))):
        raise SpectralError("degenerate levels: secular solver needs distinct eigenvalues")
    delta = -1j * kappa * np.sum(c * c, axis=1)
    delta = delta.astype(complex)
    active = np.arange(n)
    last = np.zeros(n)
    for _ in range(maxiter):
        if active.size == 0:
            return delta
        h, dh, psum = _secular_terms(e, active, delta[active], c, kappa)
        rows = np.arange(active.size)
        zdiff = (e[active][:, None] - e[None, :]) + delta[active][:, None] - delta[None, :]
        zdiff[rows, active] = 1.0
        aberth = 1.0 / zdiff
        aberth[rows, active] = 0.0
        asum = aberth.sum(axis=1)
        with np.errstate(all="ignore"):
            newton = h / (dh + h * psum)
            step = newton / (1.0 - newton * asum)
        if not np.all(np.isfinite(step)):
            raise SpectralError("secular iteration produced non-finite step")
        delta[active] -= step
        scale = np.maximum(np.abs(delta[active]), np.finfo(float).tiny)
        last[active] = np.abs(step) / scale
        active = active[last[active] > rtol]
    # Roundoff can stall the last bits; a relative step below 1e-10 is converged.
    if active.size and np.max(last[active]) > 1e-10:
        raise SpectralError(f"secular iteration did not converge for {active.size} roots")
    return delta


def _null_vectors(e, c, kappa, delta):
    """Null vector of delta*M(z) per root (length-m coefficient on the coupling block)."""
    n, m = c.shape
    if m == 1:
        return np.ones((n, 1), dtype=complex)
    out = np.empty((n, 2), dtype=complex)
    for lo in range(0, n, 512):
        act = np.arange(lo, min(n, lo + 512))
        inv = _pole_inverse(e, act, delta[act])
        c0, c1 = c[:, 0], c[:, 1]
        ik = 1j * kappa
        dl = delta[act]
        u0, u1 = c[act, 0], c[act, 1]
        b00 = dl * (1.0 + ik * (inv @ (c0 * c0))) + ik * u0 * u0
        b01 = dl * (ik * (inv @ (c0 * c1))) + ik * u0 * u1
        b11 = dl * (1.0 + ik * (inv @ (c1 * c1))) + ik * u1 * u1
        v1 = np.stack([-b01, b00], axis=1)
        v2 = np.stack([b11, -b01], axis=1)
        pick = np.linalg.norm(v1, axis=1) >= np.linalg.norm(v2, axis=1)
        out[act] = np.where(pick[:, None], v1, v2)
    return out


def open_spectrum(hspec: HermitianSpectrum, damped_sites: Sequence[int], kappa: float,
                  probe_sites: Sequence[int], *, check: bool = True) -> ProjectedSpectrum:
    """Poles of ``H - i*kappa*sum_{s in damped_sites}|s><s|`` and probe-site components.

    Raises ``SpectralError`` when the iteration fails or the trace sum rule is
    violated; callers fall back to a dense decomposition.
    """
    e = hspec.eigenvalues
    vecs = hspec.eigenvectors
    damped = [int(s) for s in damped_sites]
    probes = tuple(int(s) for s in probe_sites)
    c = np.ascontiguousarray(vecs[damped, :].T)
    n = len(e)
    delta = secular_roots(e, c, kappa)
    if check:
        spread = max(1.0, float(np.max(np.abs(e))))
        width_sum = -float(np.sum(delta.imag))
        target = kappa * float(np.sum(c * c))
        if abs(width_sum - target) > 1e-9 * max(target, 1e-300) + 1e-12 * _EPS * spread:
            raise SpectralError(f"trace rule violated: sum widths {width_sum} vs {target}")
        if abs(float(np.sum(delta.real))) > 1e-9 * spread * n:
            raise SpectralError("trace rule violated on real parts")
    coef = _null_vectors(e, c, kappa, delta)
    rows = vecs[list(probes), :]
    right = np.empty((len(probes), n), dtype=complex)
    for lo in range(0, n, 512):
        act = np.arange(lo, min(n, lo + 512))
        de = e[act][:, None] - e[None, :]
        d = de + delta[act][:, None]
        d[np.arange(act.size), act] = 1.0
        # y_kn = delta_k (U_n . coef_k) / (z_k - E_n), y_kk = U_k . coef_k
        proj = c @ coef[act].T                      # (N, block)
        y = (delta[act][:, None] * proj.T) / d
        y[np.arange(act.size), act] = proj.T[np.arange(act.size), act]
        amax = np.max(np.abs(y), axis=1)
        if not np.all(np.isfinite(amax)):
            raise SpectralError("non-finite eigenvector components")
        # a level with no weight on the damped sites is left untouched by the update
        dead = amax == 0
        if np.any(dead):
            rows_dead = np.nonzero(dead)[0]
            y[rows_dead, :] = 0.0
            y[rows_dead, act[rows_dead]] = 1.0
            amax[dead] = 1.0
        y /= amax[:, None]
        norm = np.sqrt(np.einsum("kn,kn->k", y, y))
        if np.any(np.abs(norm) < 1e-150):
            raise SpectralError("vanishing bilinear norm: nearly defective eigenvalue")
        right[:, act] = (rows @ y.T) / norm[None, :]
    z = e + delta
    order = np.lexsort((z.imag, z.real))
    right = right[:, order]
    # Complex symmetric: <r~_k|s> = <s|r_k> for the bilinear normalisation.
    return ProjectedSpectrum(z[order], probes, right, right.copy())
