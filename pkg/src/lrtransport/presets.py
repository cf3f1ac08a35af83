"""Named parameter sets for reproducing the published figures.

Each preset is a flat dict of CLI option names; explicit flags and config
files override it. Energies are in units of omega unless ``units`` is ``ev``.
"""
from __future__ import annotations

import math

_GC = 3.188          # collective cavity coupling, eV
_OMEGA_EV = 0.0124   # nearest-neighbour hopping, eV

PRESETS: dict[str, dict] = {
    # typical current versus disorder, long-range chain
    "2a": dict(command="current", model="longrange", n=[10_000], omega=1.0, gamma=1.0,
               gamma_p=1.0, gamma_d=1.0, w_grid="1e-2:1e5:36", realizations=100),
    # average excited-state variance versus disorder
    "2b": dict(command="current", model="longrange", n=[10_000], omega=1.0, gamma=1.0,
               w_grid="1e-2:1e5:36", realizations=100, observables=["variance"]),
    # cavity chain against its long-range equivalent
    "3a": dict(command="cavity-compare", model="pair", n=[10_000], omega=_OMEGA_EV,
               gc=_GC, units="ev", gamma_p=_OMEGA_EV, gamma_d=_OMEGA_EV,
               w_grid="1.24e-4:1240:36", budget=1_000_000),
    # size scaling of the typical current in the plateau
    "3b": dict(command="current", model="longrange", n=[100, 200, 400, 800, 1600, 3200],
               omega=1.0, gamma=1.0, w_grid="100:100:1", budget=1_000_000),
    # numeric gap versus the analytic estimate
    "s1": dict(command="gap", model="longrange", n=[100, 1000], omega=1.0, gamma=1.0,
               w_grid="100:100:1", realizations=100),
    # integrated transmission versus disorder
    "s3": dict(command="transmission", model="longrange", n=[1000], omega=1.0, gamma=1.0,
               nu=1.0, w_grid="1e-2:1e5:22", realizations=100),
    # Lindblad and non-Hermitian current, small chain
    "s4": dict(command="current", model="longrange", n=[40], omega=1.0, gamma=10.0,
               gamma_p=1.0, gamma_d=1.0, w_grid="1e-2:1e6:40", realizations=100),
    # averaged eigenfunction shapes
    "s5": dict(command="shape", model="longrange", n=[1000], omega=1.0, gamma=1.0,
               w_grid="1e-1:1e4:6", realizations=20),
    # cavity versus long-range shapes
    "s9": dict(command="cavity-compare", model="pair", n=[1000], omega=_OMEGA_EV,
               g=0.1008, units="ev", w_grid="1.24e-3:124:6", realizations=100,
               observables=["shape"]),
    # wave-packet spreading
    "s11": dict(command="dynamics", model="longrange", n=[1001], omega=1.0, gamma=1.0,
                w_grid="1:1e3:4", realizations=10),
    # stationary tails of the spread packet
    "s13": dict(command="dynamics", model="longrange", n=[250, 500, 1000], omega=1.0, gamma=1.0,
                w_grid="200:400:2", realizations=20),
    # self-averaging of the current in the plateau
    "s21": dict(command="current", model="longrange", n=[100, 200, 400, 800, 1600, 3200, 6400],
                omega=1.0, gamma=1.0, w_grid="100:100:1", realizations=100),
}


def preset(name: str) -> dict:
    try:
        return dict(PRESETS[name])
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def cavity_g_from_collective(gc: float, n: int) -> float:
    """Single-emitter coupling for a given collective coupling sqrt(N) g."""
    return gc / math.sqrt(n)
