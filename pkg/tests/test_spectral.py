import numpy as np
import pytest
from hypothesis import given, strategies as st

from lrtransport.model import ChainSpec, OpenSystemConfig, build_effective, build_hamiltonian
from lrtransport.model import sample_disorder
from lrtransport.spectral import (SpectralError, eig_biorthogonal, eig_hermitian,
                                  eig_tridiagonal, energy_gap)


def _drain(n, w, gamma, seed, gamma_d=1.0):
    spec = ChainSpec(n, 1.0, gamma)
    h = build_hamiltonian(spec, sample_disorder(spec, w, seed, 0))
    return h, build_effective(h, OpenSystemConfig(gamma_d=gamma_d))


def test_hermitian_two_site():
    s = eig_hermitian(np.array([[0.0, 2.0], [2.0, 0.0]]))
    assert np.allclose(s.eigenvalues, [-2, 2])
    assert np.allclose(np.abs(s.eigenvectors), 1 / np.sqrt(2))
    assert s.eigenvectors[0, 0] * s.eigenvectors[1, 0] < 0


def test_hermitian_diagonal():
    d = np.array([3.0, -1.0, 2.0])
    s = eig_hermitian(np.diag(d))
    assert np.array_equal(s.eigenvalues, np.sort(d))
    assert np.allclose(np.abs(s.eigenvectors), np.eye(3)[:, [1, 2, 0]])


def test_all_to_all_hundred():
    spec = ChainSpec(100, 0.0, 1.0)
    s = eig_hermitian(build_hamiltonian(spec, sample_disorder(spec, 0.0, 0, 0)))
    assert s.eigenvalues[0] == pytest.approx(-49.5)
    assert np.allclose(s.eigenvalues[1:], 0.5)


@given(st.integers(2, 40), st.floats(0, 1e3), st.floats(0, 5), st.integers(0, 999))
def test_hermitian_invariants(n, w, gamma, seed):
    spec = ChainSpec(n, 1.0, gamma)
    h = build_hamiltonian(spec, sample_disorder(spec, w, seed, 0))
    s = eig_hermitian(h)
    norm = np.linalg.norm(h, 2)
    resid = h @ s.eigenvectors - s.eigenvectors * s.eigenvalues
    assert np.max(np.linalg.norm(resid, axis=0)) <= 1e-10 * max(norm, 1e-300) + 1e-300
    assert np.allclose(s.eigenvectors.T @ s.eigenvectors, np.eye(n), atol=1e-12)


def test_tridiagonal_matches_dense():
    spec = ChainSpec(30, 1.0, 0.0, "anderson")
    dis = sample_disorder(spec, 5.0, 1, 0)
    h = build_hamiltonian(spec, dis)
    t = eig_tridiagonal(dis.epsilon, np.ones(29))
    assert np.allclose(t.eigenvalues, eig_hermitian(h).eigenvalues, atol=1e-12)


def test_biorthogonal_hermitian_limit():
    h, _ = _drain(6, 2.0, 0.5, 3)
    b = eig_biorthogonal(h)
    assert np.allclose(b.eigenvalues.imag, 0, atol=1e-13)
    assert np.allclose(b.left, b.right, atol=1e-12)
    assert np.allclose(b.eigenvalues.real, eig_hermitian(h).eigenvalues, atol=1e-10 * np.linalg.norm(h, 2))


def test_biorthogonal_uniform_damping():
    nu, om = 0.6, 1.3
    b = eig_biorthogonal(np.array([[-0.5j * nu, om], [om, -0.5j * nu]]))
    assert np.allclose(b.eigenvalues, [-om - 0.5j * nu, om - 0.5j * nu])
    assert np.allclose(np.abs(b.right), 1 / np.sqrt(2))


@given(st.integers(2, 30), st.floats(0, 1e3), st.floats(0, 5), st.integers(0, 999),
       st.floats(0.1, 10))
def test_biorthogonal_invariants(n, w, gamma, seed, gamma_d):
    _, heff = _drain(n, w, gamma, seed, gamma_d)
    b = eig_biorthogonal(heff)
    assert np.allclose(b.left.conj().T @ b.right, np.eye(n), atol=1e-10)
    assert np.linalg.norm(b.right @ b.left.conj().T - np.eye(n)) < 1e-8
    assert np.all(b.eigenvalues.imag <= 1e-14 * max(1.0, w))
    assert np.all(np.diff(b.eigenvalues.real) >= 0)
    assert b.widths.sum() == pytest.approx(gamma_d, rel=1e-10)


def test_general_matrix_path():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    b = eig_biorthogonal(a)
    assert np.allclose(b.left.conj().T @ b.right, np.eye(6), atol=1e-10)
    assert np.allclose(a @ b.right, b.right * b.eigenvalues, atol=1e-10)


def test_defective_matrix_rejected():
    with pytest.raises(SpectralError):
        eig_biorthogonal(np.array([[1.0, 1.0], [0.0, 1.0]]))


# moderate disorder keeps every width well above the dense solver's roundoff
@given(st.integers(2, 8), st.floats(0.1, 5), st.floats(0, 3), st.integers(0, 999))
def test_overlap_identity_for_drain(n, w, gamma, seed):
    # <r_k'|r_k> = gamma_d <r_k'|N><N|r_k> / [i (E_k - conj(E_k'))]
    gd = 0.8
    _, heff = _drain(n, w, gamma, seed, gd)
    b = eig_biorthogonal(heff)
    r, z = b.right, b.eigenvalues
    lhs = r.conj().T @ r
    rhs = gd * np.outer(r[-1].conj(), r[-1]) / (1j * (z[None, :] - z.conj()[:, None]))
    assert np.allclose(lhs, rhs, atol=1e-8, rtol=1e-8)


def test_energy_gap():
    assert energy_gap([-0.5, 0.5]) == 1.0
    assert energy_gap(np.arange(10) * 0.3) == pytest.approx(0.3)
    assert energy_gap([-10.0, 0.0, 0.1, 0.2]) == 10.0
    with pytest.raises(ValueError):
        energy_gap([1.0])
