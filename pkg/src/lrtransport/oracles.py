"""Brute-force reference computations used to validate the closed forms.

Nothing here touches eigenvectors: the transfer time is integrated from a
propagated wave function and the transmission from direct resolvent solves.
These are slow and meant for small systems in tests and ``oracle-check``.
"""
from __future__ import annotations

import math

import numpy as np
import scipy.linalg as sla
from scipy import integrate


def resolvent_transmission(heff: np.ndarray, e, nu: float, source: int = 0,
                           drain: int | None = None) -> np.ndarray:
    """|nu * (E - Heff)^{-1}_{source, drain}|^2 from a linear solve per energy."""
    heff = np.asarray(heff, dtype=complex)
    n = heff.shape[0]
    drain = n - 1 if drain is None else drain
    e = np.atleast_1d(np.asarray(e, dtype=float))
    eye = np.eye(n)
    rhs = np.zeros(n, dtype=complex)
    rhs[drain] = 1.0
    mats = e[:, None, None] * eye[None] - heff[None]
    cols = np.linalg.solve(mats, np.broadcast_to(rhs, (len(e), n))[..., None])[..., 0]
    return np.abs(nu * cols[:, source]) ** 2


def _survival_rows(p: np.ndarray, drain: int, block: int) -> np.ndarray:
    """Rows <drain| P^j for j = 0..block-1, stacked."""
    n = p.shape[0]
    rows = np.empty((block, n), dtype=complex)
    row = np.zeros(n, dtype=complex)
    row[drain] = 1.0
    for j in range(block):
        rows[j] = row
        row = row @ p
    return rows


def _drain_signal(heff, source, drain, dt, tol, max_steps, block=2048):
    """Samples of |<drain|exp(-i Heff t)|source>|^2 on t = j*dt until the norm decays."""
    n = heff.shape[0]
    p = sla.expm(-1j * dt * heff)
    pb = np.linalg.matrix_power(p, block)
    rows = _survival_rows(p, drain, block)
    psi = np.zeros(n, dtype=complex)
    psi[source] = 1.0
    chunks = []
    steps = 0
    while True:
        chunks.append(np.abs(rows @ psi) ** 2)
        psi = pb @ psi
        steps += block
        if float(np.vdot(psi, psi).real) < tol:
            chunks.append(np.abs(rows[:1] @ psi) ** 2)
            break
        if steps > max_steps:
            raise RuntimeError("wave function did not decay within the step budget")
    return np.concatenate(chunks)


def _simpson(y: np.ndarray, h: float) -> float:
    return h / 3.0 * float(y[0] + y[-1] + 4.0 * y[1:-1:2].sum() + 2.0 * y[2:-1:2].sum())


def quadrature_transfer_time(heff: np.ndarray, gamma_d: float, source: int = 0,
                             drain: int | None = None, *, steps_per_unit: float = 10.0,
                             tol: float = 1e-18, max_steps: int = 50_000_000) -> float:
    """tau = gamma_d * int_0^inf t |<drain|psi(t)>|^2 dt on a uniform grid.

    The step is ``1 / (steps_per_unit * ||Heff||)``; the integral is Simpson on
    that grid and on the grid of twice the spacing, combined by Richardson
    extrapolation. Integration stops once the surviving norm drops below ``tol``.
    """
    heff = np.asarray(heff, dtype=complex)
    drain = heff.shape[0] - 1 if drain is None else drain
    scale = max(float(np.linalg.norm(heff, 2)), gamma_d, 1e-300)
    dt = 1.0 / (steps_per_unit * scale)
    y = _drain_signal(heff, source, drain, dt, tol, max_steps)
    # pad with zeros (the signal has decayed) so both grids have an even interval count
    y = np.append(y, np.zeros((-(len(y) - 1)) % 4))
    f = dt * np.arange(len(y)) * y
    fine = _simpson(f, dt)
    coarse = _simpson(f[::2], 2.0 * dt)
    return gamma_d * (16.0 * fine - coarse) / 15.0


def quadrature_integrated_transmission(heff: np.ndarray, nu: float, source: int = 0,
                                       drain: int | None = None, *,
                                       epsrel: float = 1e-11) -> float:
    """int T(E) dE by adaptive quadrature over resonance-adapted panels.

    The complex eigenvalues of ``heff`` only place the panel breakpoints;
    the integrand itself is a resolvent solve.
    """
    heff = np.asarray(heff, dtype=complex)
    z = np.linalg.eigvals(heff)
    widths = np.maximum(-2.0 * z.imag, 1e-300)

    def f(x):
        return float(resolvent_transmission(heff, x, nu, source, drain)[0])

    marks = [z.real]
    for k in (0.5, 2.0, 8.0, 32.0, 128.0):
        marks += [z.real - k * widths, z.real + k * widths]
    pts = np.unique(np.concatenate(marks))
    lo, hi = float(pts[0]), float(pts[-1])
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        if b - a <= 1e-15 * max(1.0, abs(a)):
            continue
        val, _ = integrate.quad(f, a, b, epsabs=0.0, epsrel=epsrel, limit=200)
        total += val
    for a, b in ((-math.inf, lo), (hi, math.inf)):
        val, _ = integrate.quad(f, a, b, epsabs=0.0, epsrel=epsrel, limit=200)
        total += val
    return total
