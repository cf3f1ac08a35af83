"""Disorder sweeps: per-realization observables, mergeable statistics, checkpoints."""
from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import platform
import struct
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterator, Optional, Sequence

import numpy as np

from . import __version__
from .analysis import (ShapeAccumulator, default_exclusion, excited_state_variance,
                       tail_amplitude)
from .dynamics import DEFAULT_WINDOW, TailStats, center_site, propagate, stationary_variance
from .dynamics import variance_of
from .model import (RNG_NAME, CavityParams, ChainSpec, ModelKind, OpenSystemConfig,
                    build_hamiltonian, sample_disorder)
from .spectral import HermitianSpectrum, SpectralError, eig_hermitian, energy_gap
from .transport import (CURRENT_FLOOR, TransportError, TransportRecord, drain_spectrum,
                        integrated_transmission, log_steady_current, log_transfer_time,
                        scattering_spectrum)

log = logging.getLogger(__name__)

SCALAR_OBSERVABLES = ("current", "t_int", "variance", "gap", "tails")
PROFILE_OBSERVABLES = ("shape", "dynamics")
OBSERVABLES = SCALAR_OBSERVABLES + PROFILE_OBSERVABLES
LOG_CURRENT_FLOOR = math.log(CURRENT_FLOOR)


# -- statistics ------------------------------------------------------------------

@dataclass
class SummaryAccumulator:
    """Count, mean and M2 (Chan et al. merge) for values and their logs."""

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0
    log_count: int = 0
    log_mean: float = 0.0
    log_m2: float = 0.0
    min: float = math.inf
    max: float = -math.inf
    excluded: int = 0

    def add(self, value: float, log_value: Optional[float] = None, *,
            linear_only: bool = False) -> None:
        """Add one value; ``log_value`` overrides ln(value) (e.g. when value underflowed)."""
        if linear_only:
            merged = self.merge(SummaryAccumulator(1, value, 0.0, 0, 0.0, 0.0, value, value))
            self.__dict__.update(merged.__dict__)
            return
        if log_value is None:
            log_value = math.log(value) if value > 0 else None
        if not math.isfinite(value) or (log_value is not None and not math.isfinite(log_value)):
            self.excluded += 1
            return
        part = SummaryAccumulator(1, value, 0.0, 0, 0.0, 0.0, value, value)
        if log_value is not None:
            part.log_count, part.log_mean = 1, log_value
        else:
            part.excluded = 1   # nonpositive: kept for the linear stats, not for the log stats
        merged = self.merge(part)
        self.__dict__.update(merged.__dict__)

    def merge(self, other: "SummaryAccumulator") -> "SummaryAccumulator":
        n, mean, m2 = _chan(self.count, self.mean, self.m2, other.count, other.mean, other.m2)
        ln, lmean, lm2 = _chan(self.log_count, self.log_mean, self.log_m2,
                               other.log_count, other.log_mean, other.log_m2)
        return SummaryAccumulator(n, mean, m2, ln, lmean, lm2, min(self.min, other.min),
                                  max(self.max, other.max), self.excluded + other.excluded)

    def summary(self) -> "EnsembleSummary":
        return EnsembleSummary.from_accumulator(self)


def _chan(na, ma, qa, nb, mb, qb):
    n = na + nb
    if n == 0:
        return 0, 0.0, 0.0
    if na == 0:
        return nb, mb, qb
    if nb == 0:
        return na, ma, qa
    delta = mb - ma
    mean = (na * ma + nb * mb) / n
    m2 = qa + qb + delta * delta * na * nb / n
    return n, mean, m2


@dataclass(frozen=True)
class EnsembleSummary:
    count: int
    mean: float
    typical: float
    max: float
    min: float
    rms: float
    rms_over_mean: float
    mean_log: float
    rms_log: float
    rms_log_over_abs_mean_log: float
    excluded: int

    @classmethod
    def from_accumulator(cls, acc: SummaryAccumulator) -> "EnsembleSummary":
        if acc.count == 0:
            nan = math.nan
            return cls(0, nan, nan, nan, nan, nan, nan, nan, nan, nan, acc.excluded)
        rms = math.sqrt(max(acc.m2, 0.0) / acc.count)
        if acc.log_count:
            rms_log = math.sqrt(max(acc.log_m2, 0.0) / acc.log_count)
            typical = math.exp(acc.log_mean)
            rel_log = rms_log / abs(acc.log_mean) if acc.log_mean != 0 else math.inf
            mean_log = acc.log_mean
        else:
            rms_log = typical = rel_log = mean_log = math.nan
        rel = rms / acc.mean if acc.mean != 0 else math.inf
        out = cls(acc.count, acc.mean, typical, acc.max, acc.min, rms, rel, mean_log,
                  rms_log, rel_log, acc.excluded)
        out.check()
        return out

    def check(self) -> None:
        """Jensen and range invariants; slack covers roundoff in the running means."""
        if not math.isfinite(self.typical) or self.typical == 0:
            return
        slack = 1e-12
        if self.typical > self.mean * (1 + slack) and self.min > 0:
            raise AssertionError(f"typical {self.typical} exceeds mean {self.mean}")
        if self.min > 0 and not (self.min * (1 - slack) <= self.typical <= self.max * (1 + slack)):
            raise AssertionError("typical outside [min, max]")

    FIELDS = ("mean", "typical", "max", "min", "rms", "rms_over_mean", "mean_log", "rms_log",
              "rms_log_over_abs_mean_log", "count", "excluded")


def summarize(values: Sequence[float], log_values: Optional[Sequence[float]] = None) -> EnsembleSummary:
    """Summary statistics of positive values (log statistics from ``log_values`` if given)."""
    if len(values) == 0:
        raise ValueError("summarize needs at least one value")
    acc = SummaryAccumulator()
    for i, v in enumerate(values):
        acc.add(float(v), None if log_values is None else float(log_values[i]))
    return acc.summary()


# -- configuration -----------------------------------------------------------------

@dataclass
class SweepConfig:
    models: list[ChainSpec]
    w_grid: list[float]
    realizations: Optional[int] = 100
    budget: Optional[int] = None          # N_r * N held fixed when set
    open: OpenSystemConfig = field(default_factory=OpenSystemConfig)
    observables: tuple[str, ...] = ("current",)
    seed: int = 0
    common_disorder: bool = False         # reuse the same unit draws at every (model, W)
    keep_raw: bool = False
    tail_exclusion: Optional[int] = None  # None: default_exclusion(W)
    window_fraction: float = 0.20
    times: Optional[list[float]] = None   # dynamics grid; None: window-only grid
    dynamics_window: tuple[float, float] = DEFAULT_WINDOW

    def __post_init__(self):
        self.observables = tuple(self.observables)
        bad = set(self.observables) - set(OBSERVABLES)
        if bad:
            raise ValueError(f"unknown observables {sorted(bad)}")
        if (self.realizations is None) == (self.budget is None):
            raise ValueError("give exactly one of realizations or budget")
        if any(w < 0 for w in self.w_grid):
            raise ValueError("disorder strengths must be nonnegative")
        self.w_grid = [float(w) for w in self.w_grid]

    def realizations_for(self, spec: ChainSpec) -> int:
        if self.budget is not None:
            return max(1, self.budget // spec.n_sites)
        return int(self.realizations)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["models"] = [_spec_dict(m) for m in self.models]
        d["open"] = asdict(self.open)
        d["observables"] = list(self.observables)
        d["dynamics_window"] = list(self.dynamics_window)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SweepConfig":
        d = dict(d)
        d["models"] = [_spec_from_dict(m) for m in d["models"]]
        d["open"] = OpenSystemConfig(**d.get("open", {}))
        if "dynamics_window" in d:
            d["dynamics_window"] = tuple(d["dynamics_window"])
        return cls(**d)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=float)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _spec_dict(spec: ChainSpec) -> dict:
    d = {"n_sites": spec.n_sites, "omega": spec.omega, "gamma": spec.gamma,
         "kind": spec.kind.value}
    if spec.cavity is not None:
        d["cavity"] = asdict(spec.cavity)
    return d


def _spec_from_dict(d: dict) -> ChainSpec:
    d = dict(d)
    cav = d.pop("cavity", None)
    return ChainSpec(cavity=CavityParams(**cav) if cav else None, **d)


def realization_seed(master: int, model_index: int, w_index: int, r: int) -> int:
    """64-bit seed from (master, model point, W index, realization index)."""
    h = hashlib.blake2b(struct.pack("<qqqq", master, model_index, w_index, r), digest_size=8)
    return int.from_bytes(h.digest(), "little")


# -- per-realization work --------------------------------------------------------------

@dataclass
class RealizationResult:
    index: int
    seed: int
    values: dict            # observable -> (value, log_value or None)
    record: Optional[TransportRecord] = None
    shape: Optional[ShapeAccumulator] = None
    prob: Optional[np.ndarray] = None       # dynamics: (times, N)
    tail_log: Optional[float] = None
    dyn_tails: Optional[TailStats] = None
    error: Optional[str] = None


def _times_for(cfg: SweepConfig) -> np.ndarray:
    if cfg.times is not None:
        return np.asarray(cfg.times, dtype=float)
    t_a, t_b = cfg.dynamics_window
    return np.linspace(t_a, t_b, 200)


def evaluate_realization(cfg: SweepConfig, model_index: int, w_index: int, r: int
                         ) -> RealizationResult:
    """All requested observables for one disorder draw; errors are captured, not raised."""
    spec = cfg.models[model_index]
    w = cfg.w_grid[w_index]
    if cfg.common_disorder:
        seed = realization_seed(cfg.seed, 0, 0, r)
    else:
        seed = realization_seed(cfg.seed, model_index, w_index, r)
    out = RealizationResult(index=r, seed=seed, values={})
    try:
        dis = sample_disorder(ChainSpec(spec.n_sites, spec.omega, spec.gamma,
                                        ModelKind.ANDERSON), w, seed, r)
        h = build_hamiltonian(spec, dis)
        hspec = eig_hermitian(h)
        n = spec.n_sites
        src, drn = cfg.open.sites(n)
        chain_only = _chain_spectrum(hspec, spec)
        record = TransportRecord(tau=math.nan, current=math.nan, log_current=math.nan,
                                 realization=(seed, r, w))
        if "current" in cfg.observables:
            sp = drain_spectrum(hspec, h, src, drn, cfg.open.gamma_d)
            lt = log_transfer_time(sp, src, drn, cfg.open.gamma_d)
            # reported currents are floored at CURRENT_FLOOR (tau beyond the double range)
            lc = max(float(log_steady_current(lt, cfg.open.gamma_p)), LOG_CURRENT_FLOOR)
            record.tau = math.exp(lt) if lt < 709 else math.inf
            record.log_current = lc
            record.current = math.exp(lc)
            out.values["current"] = (record.current, lc)
        if "t_int" in cfg.observables:
            sp = scattering_spectrum(hspec, h, src, drn, cfg.open.nu)
            record.t_int = integrated_transmission(sp, cfg.open.nu, src, drn)
            out.values["t_int"] = (record.t_int, None)
        if "variance" in cfg.observables:
            record.variance = excited_state_variance(chain_only, exclude_ground=True)
            out.values["variance"] = (record.variance, None)
        if "gap" in cfg.observables:
            record.gap = energy_gap(hspec.eigenvalues)
            out.values["gap"] = (record.gap, None)
        if "tails" in cfg.observables:
            half = cfg.tail_exclusion
            if half is None:
                half = default_exclusion(w, spec.omega, n) if spec.omega > 0 else 1
            tails = tail_amplitude(chain_only, half, exclude_ground=True)
            out.values["tails"] = (tails.average, None)
            out.tail_log = tails.log_mean
        if "shape" in cfg.observables:
            acc = ShapeAccumulator(n, cfg.window_fraction, exclude_ground=True)
            acc.add(chain_only)
            out.shape = acc
        if "dynamics" in cfg.observables:
            traj = propagate(chain_only, center_site(n), _times_for(cfg))
            out.prob = traj.probabilities
            in_window = (traj.times >= cfg.dynamics_window[0]) & (traj.times <= cfg.dynamics_window[1])
            out.dyn_tails = TailStats()
            out.dyn_tails.add(traj.probabilities[in_window], center_site(n))
            out.values["dynamics"] = (stationary_variance(traj.times, traj.variance,
                                                          cfg.dynamics_window), None)
        out.record = record
    except (SpectralError, TransportError, FloatingPointError) as exc:
        out.error = f"{type(exc).__name__}: {exc}"
        log.warning("realization excluded: model=%d W=%g r=%d seed=%d: %s",
                    model_index, w, r, seed, out.error)
    return out


def _chain_spectrum(hspec, spec: ChainSpec):
    """Eigensystem restricted to chain sites; for the cavity, drop the two polaritons."""
    if spec.kind is not ModelKind.CAVITY:
        return hspec
    vecs = hspec.eigenvectors
    photon = vecs[-1, :] ** 2
    pol = np.argsort(photon)[-2:]
    keep = np.setdiff1d(np.arange(hspec.dim), pol)
    sub = vecs[:-1, keep]
    sub = sub / np.linalg.norm(sub, axis=0)[None, :]
    # the lower polariton plays the ground state's role, so keep it first for exclude_ground
    lower = pol[np.argmin(hspec.eigenvalues[pol])]
    lv = vecs[:-1, lower] / np.linalg.norm(vecs[:-1, lower])
    return HermitianSpectrum(np.r_[hspec.eigenvalues[lower], hspec.eigenvalues[keep]],
                             np.column_stack([lv, sub]))


# -- sweep ------------------------------------------------------------------------------

@dataclass
class SweepPoint:
    model_index: int
    w_index: int
    spec: ChainSpec
    w: float
    realizations: int
    accumulators: dict                  # observable -> SummaryAccumulator
    tail_log: Optional[SummaryAccumulator] = None
    shape: Optional[ShapeAccumulator] = None
    dynamics_prob: Optional[np.ndarray] = None   # summed probabilities
    dynamics_times: Optional[np.ndarray] = None
    dynamics_tails: Optional[TailStats] = None
    raw: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    elapsed: float = 0.0

    @property
    def summaries(self) -> dict:
        return {k: acc.summary() for k, acc in self.accumulators.items()}

    def tail_typical(self) -> float:
        return math.exp(self.tail_log.mean) if self.tail_log and self.tail_log.count else math.nan

    def ensemble_variance_trace(self) -> np.ndarray:
        """sigma^2(t) of the disorder-averaged distribution."""
        ok = self.realizations - len(self.errors)
        return variance_of(self.dynamics_prob / max(ok, 1))

    def to_json(self) -> dict:
        d = {"model_index": self.model_index, "w_index": self.w_index, "w": self.w,
             "realizations": self.realizations, "elapsed": self.elapsed,
             "accumulators": {k: asdict(a) for k, a in self.accumulators.items()},
             "errors": self.errors}
        if self.tail_log is not None:
            d["tail_log"] = asdict(self.tail_log)
        if self.shape is not None:
            d["shape"] = {"total": self.shape.total.tolist(), "count": self.shape.count}
        if self.dynamics_prob is not None:
            d["dynamics_prob"] = self.dynamics_prob.tolist()
            d["dynamics_times"] = self.dynamics_times.tolist()
        if self.dynamics_tails is not None:
            d["dynamics_tails"] = asdict(self.dynamics_tails)
        return d

    @classmethod
    def from_json(cls, d: dict, cfg: SweepConfig) -> "SweepPoint":
        spec = cfg.models[d["model_index"]]
        pt = cls(d["model_index"], d["w_index"], spec, d["w"], d["realizations"],
                 {k: SummaryAccumulator(**a) for k, a in d["accumulators"].items()},
                 errors=d.get("errors", []), elapsed=d.get("elapsed", 0.0))
        if "tail_log" in d:
            pt.tail_log = SummaryAccumulator(**d["tail_log"])
        if "shape" in d:
            acc = ShapeAccumulator(spec.n_sites, cfg.window_fraction, True)
            acc.total = np.asarray(d["shape"]["total"], dtype=float)
            acc.count = d["shape"]["count"]
            pt.shape = acc
        if "dynamics_prob" in d:
            pt.dynamics_prob = np.asarray(d["dynamics_prob"], dtype=float)
            pt.dynamics_times = np.asarray(d["dynamics_times"], dtype=float)
        if "dynamics_tails" in d:
            pt.dynamics_tails = TailStats(**d["dynamics_tails"])
        return pt


def _evaluate_chunk(args):
    cfg_dict, mi, wi, rs = args
    cfg = SweepConfig.from_dict(cfg_dict)
    return [evaluate_realization(cfg, mi, wi, r) for r in rs]


def _reduce(cfg: SweepConfig, mi: int, wi: int, results: list[RealizationResult]) -> SweepPoint:
    spec = cfg.models[mi]
    scalars = [o for o in cfg.observables if o in SCALAR_OBSERVABLES or o == "dynamics"]
    pt = SweepPoint(mi, wi, spec, cfg.w_grid[wi], len(results),
                    {o: SummaryAccumulator() for o in scalars})
    if "tails" in cfg.observables:
        pt.tail_log = SummaryAccumulator()
    if "shape" in cfg.observables:
        pt.shape = ShapeAccumulator(spec.n_sites, cfg.window_fraction, True)
    for res in sorted(results, key=lambda x: x.index):
        if res.error is not None:
            for acc in pt.accumulators.values():
                acc.excluded += 1
            pt.errors.append({"index": res.index, "seed": res.seed, "error": res.error})
            continue
        for obs, (val, lval) in res.values.items():
            pt.accumulators[obs].add(val, lval)
        if res.tail_log is not None:
            pt.tail_log.add(res.tail_log, linear_only=True)
        if res.shape is not None:
            pt.shape = pt.shape.merge(res.shape)
        if res.prob is not None:
            pt.dynamics_prob = res.prob if pt.dynamics_prob is None else pt.dynamics_prob + res.prob
            pt.dynamics_times = _times_for(cfg)
        if res.dyn_tails is not None:
            pt.dynamics_tails = (res.dyn_tails if pt.dynamics_tails is None
                                 else pt.dynamics_tails.merge(res.dyn_tails))
        if cfg.keep_raw and res.record is not None:
            pt.raw.append(res.record)
    return pt


class CheckpointMismatch(RuntimeError):
    """Resume refused because the stored config hash differs."""


def _load_checkpoint(path: Path, cfg: SweepConfig) -> dict:
    if not path.exists():
        return {}
    data = json.loads(path.read_text())
    if data.get("config_hash") != cfg.config_hash():
        raise CheckpointMismatch(f"checkpoint {path} was written for a different configuration")
    return {(p["model_index"], p["w_index"]): p for p in data.get("points", [])}


def _save_checkpoint(path: Path, cfg: SweepConfig, done: dict) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    pts = [done[k] for k in sorted(done)]
    tmp.write_text(json.dumps({"config_hash": cfg.config_hash(), "points": pts}))
    os.replace(tmp, path)


def run_sweep(cfg: SweepConfig, *, workers: int = 1, checkpoint: Optional[Path] = None,
              resume: bool = False) -> Iterator[SweepPoint]:
    """Yield one reduced :class:`SweepPoint` per (model, W), in grid order.

    Realizations are split across ``workers`` processes and reduced in index
    order, so results do not depend on the worker count. With ``checkpoint``
    the state is written after each point; ``resume`` reloads finished points.
    """
    done: dict = {}
    if checkpoint is not None:
        checkpoint = Path(checkpoint)
        if resume:
            done = _load_checkpoint(checkpoint, cfg)
        elif checkpoint.exists():
            checkpoint.unlink()
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for mi, spec in enumerate(cfg.models):
            nr = cfg.realizations_for(spec)
            for wi in range(len(cfg.w_grid)):
                if (mi, wi) in done:
                    yield SweepPoint.from_json(done[(mi, wi)], cfg)
                    continue
                t0 = time.perf_counter()
                if pool is None:
                    results = [evaluate_realization(cfg, mi, wi, r) for r in range(nr)]
                else:
                    chunks = np.array_split(np.arange(nr), min(nr, workers * 4))
                    jobs = [(cfg.to_dict(), mi, wi, [int(r) for r in c]) for c in chunks if len(c)]
                    results = [res for part in pool.map(_evaluate_chunk, jobs) for res in part]
                pt = _reduce(cfg, mi, wi, results)
                pt.elapsed = time.perf_counter() - t0
                if checkpoint is not None:
                    done[(mi, wi)] = pt.to_json()
                    _save_checkpoint(checkpoint, cfg, done)
                yield pt
    finally:
        if pool is not None:
            pool.shutdown()


# -- output ---------------------------------------------------------------------------

def write_summary_csv(points: Sequence[SweepPoint], observable: str, path, *,
                      units: str = "omega", energy_scale: float = 1.0) -> None:
    """One row per point: model params, W, statistics, count, excluded (17 significant digits).

    ``energy_scale`` converts W back to the output unit.
    """
    cols = ["model", "n_sites", "omega", "gamma", "g", "W"] + list(EnsembleSummary.FIELDS)
    with open(path, "w") as fh:
        fh.write(f"# units: energies in {units}; currents and rates in {units}/hbar\n")
        fh.write(",".join(cols) + "\n")
        for pt in points:
            if observable not in pt.accumulators:
                continue
            s = pt.summaries[observable]
            g = pt.spec.cavity.g if pt.spec.cavity is not None else math.nan
            row = [pt.spec.kind.value, pt.spec.n_sites, pt.spec.omega, pt.spec.gamma, g,
                   pt.w * energy_scale] + [getattr(s, f) for f in EnsembleSummary.FIELDS]
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % v


def write_manifest(path, *, command: str, config: dict, points: Sequence[SweepPoint] = (),
                   seeds: Optional[dict] = None, started: Optional[float] = None,
                   extra: Optional[dict] = None) -> dict:
    """JSON manifest with config echo, seeds, RNG, versions, wall clock and per-point timing."""
    now = time.time()
    man = {
        "command": command,
        "config": config,
        "seeds": seeds or {},
        "rng": RNG_NAME,
        "seed_derivation": "blake2b-64(master, model_index, w_index, realization)",
        "artifact_version": __version__,
        "numpy_version": np.__version__,
        "python": platform.python_version(),
        "platform": platform.platform(),
        "started": started if started is not None else now,
        "finished": now,
        "wall_clock_s": (now - started) if started is not None else 0.0,
        "points": [{"model_index": p.model_index, "w": p.w, "realizations": p.realizations,
                    "excluded": len(p.errors), "elapsed_s": p.elapsed} for p in points],
    }
    if extra:
        man.update(extra)
    with open(path, "w") as fh:
        json.dump(man, fh, indent=2, default=float)
    return man
