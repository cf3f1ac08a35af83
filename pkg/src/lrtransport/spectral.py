"""Dense Hermitian and biorthogonal eigendecompositions."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg as sla


class SpectralError(RuntimeError):
    """Eigensolver failure or an (almost) defective non-Hermitian matrix."""


@dataclass(frozen=True)
class HermitianSpectrum:
    eigenvalues: np.ndarray   # ascending
    eigenvectors: np.ndarray  # columns, eigenvectors[:, k] <-> eigenvalues[k]

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)


@dataclass(frozen=True)
class ProjectedSpectrum:
    """Complex eigenvalues plus eigenvector components on a few sites only.

    ``right[i, k] = <s_i|r_k>`` and ``left[i, k] = <r~_k|s_i>`` for
    ``s_i = sites[i]``, with the pairing normalised as <r~_k|r_k> = 1. This is
    all that the transfer-time and transmission formulas consume.
    """

    eigenvalues: np.ndarray
    sites: tuple[int, ...]
    right: np.ndarray
    left: np.ndarray

    def row(self, site: int) -> tuple[np.ndarray, np.ndarray]:
        i = self.sites.index(site)
        return self.right[i], self.left[i]


@dataclass(frozen=True)
class BiorthogonalSpectrum:
    """Eigenvalues E_k - i Gamma_k / 2 with paired right/left eigenvectors.

    ``left[:, k]`` is the ket |r~_k>, so that <r~_k|x> = left[:, k].conj() @ x
    and ``left.conj().T @ right`` is the identity.
    """

    eigenvalues: np.ndarray
    right: np.ndarray
    left: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)

    @property
    def widths(self) -> np.ndarray:
        return -2.0 * self.eigenvalues.imag

    def project(self, sites: Sequence[int]) -> ProjectedSpectrum:
        sites = tuple(int(s) for s in sites)
        idx = list(sites)
        return ProjectedSpectrum(self.eigenvalues, sites,
                                 self.right[idx, :].copy(),
                                 self.left[idx, :].conj().copy())


def eig_hermitian(h: np.ndarray) -> HermitianSpectrum:
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError("matrix must be square")
    try:
        vals, vecs = sla.eigh(h, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SpectralError(_diagnostics(h, exc)) from exc
    return HermitianSpectrum(vals, vecs)


def eig_tridiagonal(diag: np.ndarray, off: np.ndarray) -> HermitianSpectrum:
    """Symmetric tridiagonal solve; much cheaper than dense for the Anderson chain."""
    if len(diag) == 1:
        return HermitianSpectrum(np.asarray(diag, float).copy(), np.ones((1, 1)))
    try:
        vals, vecs = sla.eigh_tridiagonal(diag, off)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SpectralError(f"tridiagonal eigensolver failed: {exc}") from exc
    return HermitianSpectrum(vals, vecs)


def _diagnostics(a: np.ndarray, exc: Exception) -> str:
    finite = bool(np.all(np.isfinite(a)))
    norm = float(np.linalg.norm(a)) if finite else float("nan")
    cond = float(np.linalg.cond(a)) if finite else float("nan")
    return f"eigensolver failed ({exc}); finite={finite} fro_norm={norm:.3e} cond={cond:.3e}"


def eig_biorthogonal(heff: np.ndarray, *, pairing_tol: float = 1e-8) -> BiorthogonalSpectrum:
    """Right/left eigenvectors of a non-Hermitian matrix, sorted by real part.

    Complex-symmetric input (every drain/scattering matrix built from a real
    symmetric Hamiltonian) reuses the right eigenvectors: the left ket is then
    conj(r_k) / conj(r_k^T r_k). Anything else goes through LAPACK's joint
    left/right solve, which returns the pairs already matched.
    """
    a = np.asarray(heff, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    scale = max(float(np.linalg.norm(a, 2)), np.finfo(float).tiny)
    try:
        if np.array_equal(a, a.T):
            vals, right = sla.eig(a, right=True, check_finite=True)
            bilinear = np.einsum("ik,ik->k", right, right)
            pair = bilinear
            left = right.conj() / bilinear.conj()
        else:
            vals, vl, right = sla.eig(a, left=True, right=True, check_finite=True)
            pair = np.einsum("ik,ik->k", vl.conj(), right)
            left = vl / pair.conj()
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SpectralError(_diagnostics(a, exc)) from exc

    # A vanishing <l|r> for unit-norm l, r is the signature of a defective
    # (exceptional-point) eigenvalue: the pairing cannot be normalised.
    if np.min(np.abs(pair)) < pairing_tol * np.finfo(float).eps ** 0.5:
        raise SpectralError("left/right pairing failed: matrix is (nearly) defective")
    order = np.lexsort((vals.imag, vals.real))
    vals, right, left = vals[order], right[:, order], left[:, order]
    gram = left.conj().T @ right
    err = np.max(np.abs(gram - np.eye(len(vals)))) if len(vals) else 0.0
    if err > pairing_tol * max(1.0, scale):
        raise SpectralError(f"biorthogonality violated by {err:.2e}; matrix nearly defective")
    return BiorthogonalSpectrum(vals, right, left)


def energy_gap(eigenvalues: Sequence[float]) -> float:
    """Largest nearest-neighbour spacing: max_i min_{j != i} |E_i - E_j|."""
    e = np.sort(np.asarray(eigenvalues, dtype=float))
    if len(e) < 2:
        raise ValueError("energy gap needs at least two levels")
    d = np.diff(e)
    nearest = np.minimum(np.r_[np.inf, d], np.r_[d, np.inf])
    return float(np.max(nearest))
