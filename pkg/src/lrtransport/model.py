"""Hamiltonians of disordered chains with long-range hopping or a cavity mode.

Energies are in units of the nearest-neighbour hopping ``omega`` (hbar = 1)
unless a caller chooses to work in eV; nothing here depends on the unit.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

RNG_NAME = "numpy.random.Philox(4x64-10)"

# 2*pi * Debye^2 * eV / nm^3 expressed in eV^2 (Gaussian units):
# 1 D = 1e-18 statC cm, 1 nm^3 = 1e-21 cm^3, 1 eV = 1.602176634e-12 erg.
DEBYE2_PER_NM3_IN_EV = 1e-15 / 1.602176634e-12  # 6.24150907446e-4
CAVITY_COUPLING_CONSTANT = 2.0 * math.pi * DEBYE2_PER_NM3_IN_EV  # 3.92165581113e-3


class ModelKind(str, enum.Enum):
    ANDERSON = "anderson"
    LONG_RANGE = "longrange"
    CAVITY = "cavity"


class EffectiveMode(str, enum.Enum):
    DRAIN = "drain"
    SCATTERING = "scattering"


def cavity_coupling(mu: float, omega_c: float, v_c: float) -> float:
    """Single-emitter coupling ``g = sqrt(2 pi mu^2 hbar omega_c / V_c)``.

    Parameters
    ----------
    mu : float
        Transition dipole in Debye.
    omega_c : float
        Photon energy hbar*omega_c in eV.
    v_c : float
        Mode volume in nm^3.

    Returns
    -------
    float
        g in eV.
    """
    for name, val in (("mu", mu), ("omega_c", omega_c), ("v_c", v_c)):
        if not val > 0:
            raise ValueError(f"{name} must be positive, got {val!r}")
    return math.sqrt(CAVITY_COUPLING_CONSTANT * mu * mu * omega_c / v_c)


def effective_long_range_coupling(g: float, n: int) -> float:
    """Long-range hopping that reproduces the polaritonic gap: 2 g / sqrt(N)."""
    if n < 1 or not g > 0:
        raise ValueError("need n >= 1 and g > 0")
    return 2.0 * g / math.sqrt(n)


@dataclass(frozen=True)
class CavityParams:
    g: float
    mu: Optional[float] = None
    omega_c: Optional[float] = None
    v_c: Optional[float] = None

    def __post_init__(self):
        if not self.g > 0:
            raise ValueError("cavity coupling g must be positive")
        given = (self.mu, self.omega_c, self.v_c)
        if all(x is not None for x in given):
            expected = cavity_coupling(*given)
            if abs(self.g - expected) > 1e-12 * expected:
                raise ValueError(f"g={self.g} inconsistent with dipole formula ({expected})")

    @classmethod
    def from_dipole(cls, mu: float, omega_c: float, v_c: float) -> "CavityParams":
        return cls(g=cavity_coupling(mu, omega_c, v_c), mu=mu, omega_c=omega_c, v_c=v_c)


@dataclass(frozen=True)
class ChainSpec:
    n_sites: int
    omega: float = 1.0
    gamma: float = 0.0
    kind: ModelKind = ModelKind.LONG_RANGE
    cavity: Optional[CavityParams] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind(self.kind))
        if int(self.n_sites) != self.n_sites or self.n_sites < 1:
            raise ValueError("n_sites must be a positive integer")
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        if (self.kind is ModelKind.CAVITY) != (self.cavity is not None):
            raise ValueError("cavity parameters required iff kind is CAVITY")

    @property
    def dim(self) -> int:
        """Hilbert-space dimension (chain sites plus the photon for the cavity)."""
        return self.n_sites + (1 if self.kind is ModelKind.CAVITY else 0)

    def label(self) -> str:
        if self.kind is ModelKind.CAVITY:
            return f"cavity_N{self.n_sites}_g{self.cavity.g:.6g}"
        return f"{self.kind.value}_N{self.n_sites}_gamma{self.gamma:.6g}"


@dataclass(frozen=True)
class DisorderRealization:
    w: float
    seed: int
    index: int
    epsilon: np.ndarray = field(repr=False)

    @property
    def n_sites(self) -> int:
        return len(self.epsilon)


@dataclass(frozen=True)
class OpenSystemConfig:
    """Pump/drain rates and lead coupling; sites are 1-based, drain defaults to N."""

    gamma_p: float = 1.0
    gamma_d: float = 1.0
    nu: float = 1.0
    source_site: int = 1
    drain_site: Optional[int] = None

    def __post_init__(self):
        for name in ("gamma_p", "gamma_d", "nu"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    def sites(self, n_sites: int) -> tuple[int, int]:
        """0-based (source, drain) indices for a chain of ``n_sites``."""
        drain = n_sites if self.drain_site is None else self.drain_site
        src = self.source_site
        if not (1 <= src <= n_sites and 1 <= drain <= n_sites):
            raise ValueError(f"sites ({src}, {drain}) outside chain of {n_sites}")
        if src == drain and n_sites > 1:
            raise ValueError("source and drain must differ")
        return src - 1, drain - 1


def _stream(seed: int, index: int) -> np.random.Generator:
    # Counter-based: the key fixes the stream, no hidden state carried between calls.
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, index & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def unit_draws(n: int, seed: int, index: int) -> np.ndarray:
    """First ``n`` uniform [0, 1) draws of the (seed, index) stream."""
    return _stream(seed, index).random(n)


def sample_disorder(spec: ChainSpec, w: float, seed: int, index: int) -> DisorderRealization:
    """On-site energies uniform on [-w/2, w/2), a pure function of (seed, index, w, N)."""
    if w < 0:
        raise ValueError("disorder strength must be nonnegative")
    u = unit_draws(spec.n_sites, seed, index)
    eps = w * (u - 0.5)
    eps.setflags(write=False)
    return DisorderRealization(w=float(w), seed=int(seed), index=int(index), epsilon=eps)


def anderson_matrix(epsilon: np.ndarray, omega: float) -> np.ndarray:
    n = len(epsilon)
    h = np.diag(np.asarray(epsilon, dtype=float))
    if n > 1:
        idx = np.arange(n - 1)
        h[idx, idx + 1] = omega
        h[idx + 1, idx] = omega
    return h


def build_hamiltonian(spec: ChainSpec, dis: DisorderRealization) -> np.ndarray:
    """Dense real symmetric Hamiltonian for one disorder draw.

    The cavity model appends the photon state as the last basis vector, at
    exact resonance (zero energy) and coupled with ``g`` to every site.
    """
    if dis.n_sites != spec.n_sites:
        raise ValueError(f"disorder has {dis.n_sites} sites, spec has {spec.n_sites}")
    n = spec.n_sites
    if spec.kind is ModelKind.CAVITY:
        h = np.zeros((n + 1, n + 1))
        h[:n, :n] = anderson_matrix(dis.epsilon, spec.omega)
        h[:n, n] = spec.cavity.g
        h[n, :n] = spec.cavity.g
        return h
    h = anderson_matrix(dis.epsilon, spec.omega)
    if spec.kind is ModelKind.LONG_RANGE and spec.gamma != 0.0:
        off = -0.5 * spec.gamma
        diag = h.diagonal().copy()
        h += off
        h[np.diag_indices(n)] = diag
    return h


def build_effective(h: np.ndarray, open_cfg: OpenSystemConfig,
                    mode: EffectiveMode | str = EffectiveMode.DRAIN,
                    n_sites: Optional[int] = None) -> np.ndarray:
    """Add the anti-Hermitian drain (or two-lead) term to ``h``.

    ``n_sites`` is the chain length when ``h`` carries extra non-site states
    (the cavity photon); it defaults to the matrix dimension.
    """
    mode = EffectiveMode(mode)
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError("h must be square")
    n = h.shape[0] if n_sites is None else n_sites
    src, drn = open_cfg.sites(n)
    heff = h.astype(complex)
    if mode is EffectiveMode.DRAIN:
        heff[drn, drn] -= 0.5j * open_cfg.gamma_d
    else:
        heff[src, src] -= 0.5j * open_cfg.nu
        heff[drn, drn] -= 0.5j * open_cfg.nu
    return heff


def dump_matrix(m: np.ndarray, path) -> None:
    """Row-major dense text dump with 17 significant digits (debugging aid)."""
    m = np.asarray(m)
    fmt = "%.17g%+.17gj" if np.iscomplexobj(m) else "%.17g"
    if np.iscomplexobj(m):
        rows = [" ".join(fmt % (z.real, z.imag) for z in row) for row in m]
        with open(path, "w") as fh:
            fh.write("\n".join(rows) + "\n")
    else:
        np.savetxt(path, m, fmt=fmt)
