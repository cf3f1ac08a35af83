"""Command-line front end.

Precedence, lowest first: built-in defaults, ``--figure`` preset, ``--config``
YAML file, explicit flags. With ``--units ev`` every energy input (omega,
gamma, g, W, rates) is in eV and is converted to units of omega before the
run; outputs are always in units of omega and say so in their header row.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import yaml

from . import __version__
from .analysis import gap_analytic, thresholds
from .dynamics import default_times, stationary_variance
from .ensemble import (CheckpointMismatch, SweepConfig, realization_seed, run_sweep,
                       write_manifest, write_summary_csv)
from .model import (CavityParams, ChainSpec, ModelKind, OpenSystemConfig, build_effective,
                    build_hamiltonian, cavity_coupling, effective_long_range_coupling,
                    sample_disorder)
from .presets import cavity_g_from_collective, preset

log = logging.getLogger("lrtransport")

DEFAULTS = dict(model="longrange", n=[100], omega=1.0, gamma=1.0, w_grid="1e-2:1e5:22",
                w=None, realizations=None, budget=None, gamma_p=1.0, gamma_d=1.0, nu=1.0,
                seed=0, threads=1, out_dir="out", units="omega", resume=False, g=None,
                gc=None, mu=None, omega_c=None, v_c=None, common_disorder=False,
                observables=None, analytic=False, times=None, window="500:1e4",
                exclusion=None, energies=None)

COMMANDS = ("current", "transmission", "shape", "tails", "dynamics", "gap", "thresholds",
            "cavity-compare", "oracle-check")


class ConfigError(ValueError):
    """Bad configuration; reported with exit status 2."""


def parse_grid(text: str) -> list[float]:
    """``start:stop:count`` (log-spaced) or a comma list of values."""
    text = str(text).strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"grid {text!r} must be start:stop:count")
        a, b, c = float(parts[0]), float(parts[1]), int(parts[2])
        if c < 1 or a <= 0 or b <= 0:
            raise ConfigError("log grid needs positive bounds and count >= 1")
        if c == 1:
            return [a]
        return list(np.logspace(math.log10(a), math.log10(b), c))
    return [float(x) for x in text.split(",") if x.strip()]


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    a = common.add_argument
    a("--config", type=Path, help="YAML file with option values (keys as flag names)")
    a("--figure", help="named preset, e.g. 2a, 3a, s4")
    a("--model", choices=["anderson", "longrange", "cavity", "pair"])
    a("--n", type=int, nargs="+", help="chain length(s)")
    a("--omega", type=float, help="nearest-neighbour hopping")
    a("--gamma", type=float, help="long-range hopping")
    a("--g", type=float, help="single-emitter cavity coupling")
    a("--gc", type=float, help="collective cavity coupling sqrt(N) g")
    a("--mu", type=float, help="transition dipole (Debye)")
    a("--omega-c", type=float, help="photon energy (eV)")
    a("--v-c", type=float, help="mode volume (nm^3)")
    a("--w-grid", help="disorder grid start:stop:count (log) or comma list")
    a("--w", type=float, help="single disorder strength (overrides --w-grid)")
    g = common.add_mutually_exclusive_group()
    g.add_argument("--realizations", type=int, help="disorder realizations per point")
    g.add_argument("--budget", type=int, help="keep realizations * N fixed")
    a("--gamma-p", type=float, help="pumping rate")
    a("--gamma-d", type=float, help="drain rate")
    a("--nu", type=float, help="lead coupling")
    a("--seed", type=int, help="master seed")
    a("--threads", type=int, help="worker processes")
    a("--out-dir", type=Path, help="output directory")
    a("--units", choices=["omega", "ev"])
    a("--resume", action="store_true", default=None, help="continue from the checkpoint")
    a("--common-disorder", action="store_true", default=None,
      help="reuse the same unit draws for every model and W")
    a("--analytic", action="store_true", default=None, help="gap: also print the estimate")
    a("--times", help="dynamics: output times start:stop:count (log) or comma list")
    a("--window", help="stationary window t_a:t_b (dynamics)")
    a("--exclusion", type=int, help="tails: peak half-width (default from xi)")
    a("--energies", help="transmission: energy grid lo:hi:count (linear) for T(E)")
    a("-v", "--verbose", action="store_true", default=None)
    p = argparse.ArgumentParser(prog="lrtransport", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return p


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults, preset, config file and flags into one option dict."""
    opts = dict(DEFAULTS)
    if args.figure:
        try:
            pre = preset(args.figure)
        except KeyError as exc:
            raise ConfigError(str(exc)) from None
        pre.pop("command", None)
        opts.update(pre)
    if args.config:
        try:
            data = yaml.safe_load(Path(args.config).read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a mapping")
        data = {k.replace("-", "_"): v for k, v in data.items()}
        unknown = set(data) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        if "n" in data and not isinstance(data["n"], list):
            data["n"] = [data["n"]]
        opts.update(data)
    for key, val in vars(args).items():
        if key in ("config", "figure", "command", "verbose") or val is None:
            continue
        opts[key] = val
    if args.realizations is not None:
        opts["budget"] = None
    if args.budget is not None:
        opts["realizations"] = None
    if opts["realizations"] is None and opts["budget"] is None:
        opts["realizations"] = 100
    return opts


def _energy_scale(opts: dict) -> float:
    if opts["units"] == "ev":
        if not opts["omega"] or opts["omega"] <= 0:
            raise ConfigError("--units ev needs a positive --omega to set the energy unit")
        return float(opts["omega"])
    return 1.0


def _cavity_g(opts: dict, n: int) -> Optional[float]:
    if opts["g"] is not None:
        return float(opts["g"])
    if opts["gc"] is not None:
        return cavity_g_from_collective(float(opts["gc"]), n)
    if None not in (opts["mu"], opts["omega_c"], opts["v_c"]):
        return cavity_coupling(opts["mu"], opts["omega_c"], opts["v_c"])
    return None


def build_models(opts: dict) -> list[ChainSpec]:
    """Chain specs in units of omega (one per N, two per N for the cavity pair)."""
    scale = _energy_scale(opts)
    omega = float(opts["omega"]) / scale
    models = []
    for n in opts["n"]:
        kind = opts["model"]
        if kind in ("cavity", "pair"):
            g = _cavity_g(opts, n)
            if g is None:
                raise ConfigError("cavity model needs --g, --gc or --mu/--omega-c/--v-c")
            g /= scale
            models.append(ChainSpec(n, omega, 0.0, ModelKind.CAVITY, CavityParams(g)))
            if kind == "pair":
                models.append(ChainSpec(n, omega, effective_long_range_coupling(g, n),
                                        ModelKind.LONG_RANGE))
        elif kind == "anderson":
            models.append(ChainSpec(n, omega, 0.0, ModelKind.ANDERSON))
        else:
            models.append(ChainSpec(n, omega, float(opts["gamma"]) / scale,
                                    ModelKind.LONG_RANGE))
    return models


def sweep_config(opts: dict, observables: Sequence[str]) -> SweepConfig:
    scale = _energy_scale(opts)
    grid = [opts["w"]] if opts["w"] is not None else parse_grid(opts["w_grid"])
    open_cfg = OpenSystemConfig(gamma_p=opts["gamma_p"] / scale, gamma_d=opts["gamma_d"] / scale,
                                nu=opts["nu"] / scale)
    times = parse_grid(opts["times"]) if opts["times"] else None
    window = tuple(float(x) for x in str(opts["window"]).split(":"))
    if len(window) != 2:
        raise ConfigError("--window must be t_a:t_b")
    try:
        return SweepConfig(models=build_models(opts), w_grid=[w / scale for w in grid],
                           realizations=opts["realizations"], budget=opts["budget"],
                           open=open_cfg, observables=tuple(opts["observables"] or observables),
                           seed=int(opts["seed"]), common_disorder=bool(opts["common_disorder"]),
                           tail_exclusion=opts["exclusion"], times=times,
                           dynamics_window=window)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _units_note(opts: dict) -> str:
    if opts["units"] == "ev":
        return f"omega (1 omega = {opts['omega']} eV)"
    return "omega"


def _run(cmd: str, opts: dict, observables: Sequence[str]):
    cfg = sweep_config(opts, observables)
    out = Path(opts["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    started = time.time()
    points = []
    ckpt = out / f"{cmd}.checkpoint.json"
    for pt in run_sweep(cfg, workers=max(1, int(opts["threads"])), checkpoint=ckpt,
                        resume=bool(opts["resume"])):
        points.append(pt)
        log.info("%s N=%d W=%.4g done in %.1fs (%d excluded)", pt.spec.kind.value,
                 pt.spec.n_sites, pt.w, pt.elapsed, len(pt.errors))
    seeds = {"master": cfg.seed,
             "example_realization_seed": realization_seed(cfg.seed, 0, 0, 0)}
    return cfg, out, points, seeds, started


def _write_scalar_outputs(cmd, opts, cfg, out, points, seeds, started, extra=None):
    units = _units_note(opts)
    for obs in cfg.observables:
        if obs in ("shape",):
            continue
        write_summary_csv(points, obs, out / f"{cmd}_{obs}.csv", units=units)
    write_manifest(out / f"{cmd}_manifest.json", command=cmd, config=cfg.to_dict(),
                   points=points, seeds=seeds, started=started,
                   extra={"options": _jsonable(opts), **(extra or {})})


def _jsonable(opts: dict) -> dict:
    return json.loads(json.dumps(opts, default=str))


def cmd_current(opts: dict, cmd: str = "current") -> int:
    cfg, out, points, seeds, started = _run(cmd, opts, ["current"])
    _write_scalar_outputs(cmd, opts, cfg, out, points, seeds, started)
    for pt in points:
        if "current" in pt.accumulators:
            s = pt.summaries["current"]
            print(f"{pt.spec.label()} W={pt.w:.6g} I_typ={s.typical:.6e} mean={s.mean:.6e}")
    return 0


def cmd_transmission(opts: dict) -> int:
    cfg, out, points, seeds, started = _run("transmission", opts, ["t_int"])
    extra = {}
    if opts["energies"]:
        from .spectral import eig_biorthogonal
        from .transport import transmission_at
        lo, hi, cnt = opts["energies"].split(":")
        e = np.linspace(float(lo), float(hi), int(cnt))
        spec = cfg.models[0]
        seed = realization_seed(cfg.seed, 0, 0, 0)
        dis = sample_disorder(spec, cfg.w_grid[0], seed, 0)
        h = build_hamiltonian(spec, dis)
        heff = build_effective(h, cfg.open, "scattering", n_sites=spec.n_sites)
        t = transmission_at(eig_biorthogonal(heff), e, cfg.open.nu, *cfg.open.sites(spec.n_sites))
        np.savetxt(out / "transmission_curve.csv", np.column_stack([e, t]), delimiter=",",
                   fmt="%.17g", header=f"# units: {_units_note(opts)}\nE,T", comments="")
        extra["curve"] = {"model_index": 0, "w": cfg.w_grid[0], "seed": seed, "index": 0}
    _write_scalar_outputs("transmission", opts, cfg, out, points, seeds, started, extra)
    for pt in points:
        s = pt.summaries["t_int"]
        print(f"{pt.spec.label()} W={pt.w:.6g} T_int_mean={s.mean:.6e} N*T_int={pt.spec.n_sites * s.mean:.6e}")
    return 0


def cmd_shape(opts: dict) -> int:
    cfg, out, points, seeds, started = _run("shape", opts, ["shape"])
    for pt in points:
        prof = pt.shape.profile()
        name = out / f"shape_{pt.spec.label()}_W{pt.w:.6g}.csv"
        prof.to_csv(name)
        print(f"{name.name}: {prof.count} states")
    _write_scalar_outputs("shape", opts, cfg, out, points, seeds, started)
    return 0


def cmd_tails(opts: dict) -> int:
    cfg, out, points, seeds, started = _run("tails", opts, ["tails"])
    with open(out / "tails.csv", "w") as fh:
        fh.write(f"# units: energies in {_units_note(opts)}\n")
        fh.write("model,n_sites,gamma,W,average,typical,realizations,excluded\n")
        for pt in points:
            s = pt.summaries["tails"]
            fh.write(f"{pt.spec.kind.value},{pt.spec.n_sites},{pt.spec.gamma:.17g},{pt.w:.17g},"
                     f"{s.mean:.17g},{pt.tail_typical():.17g},{s.count},{s.excluded}\n")
            print(f"{pt.spec.label()} W={pt.w:.6g} tail_avg={s.mean:.4e} "
                  f"tail_typ={pt.tail_typical():.4e}")
    _write_scalar_outputs("tails", opts, cfg, out, points, seeds, started)
    return 0


def cmd_dynamics(opts: dict) -> int:
    if not opts["times"]:
        opts = dict(opts, times=",".join(repr(float(t)) for t in default_times()))
    cfg, out, points, seeds, started = _run("dynamics", opts, ["dynamics", "variance"])
    for pt in points:
        trace = pt.ensemble_variance_trace()
        name = out / f"dynamics_{pt.spec.label()}_W{pt.w:.6g}.csv"
        np.savetxt(name, np.column_stack([pt.dynamics_times, trace]), delimiter=",",
                   fmt="%.17g", header=f"# units: t in hbar/omega\nt,sigma2", comments="")
        print(f"{name.name}: sigma2(0)={trace[0]:.3g} stationary="
              f"{stationary_variance(pt.dynamics_times, trace, cfg.dynamics_window):.6g} "
              f"excited={pt.summaries['variance'].mean:.6g}")
    with open(out / "dynamics_tails.csv", "w") as fh:
        fh.write(f"# units: energies in {_units_note(opts)}; probabilities dimensionless\n")
        fh.write("model,n_sites,gamma,W,stationary_variance,tail_average,tail_typical\n")
        for pt in points:
            sv = stationary_variance(pt.dynamics_times, pt.ensemble_variance_trace(),
                                     cfg.dynamics_window)
            tails = pt.dynamics_tails
            fh.write(f"{pt.spec.kind.value},{pt.spec.n_sites},{pt.spec.gamma:.17g},{pt.w:.17g},"
                     f"{sv:.17g},{tails.average:.17g},{tails.typical:.17g}\n")
    _write_scalar_outputs("dynamics", opts, cfg, out, points, seeds, started)
    return 0


def cmd_gap(opts: dict) -> int:
    cfg, out, points, seeds, started = _run("gap", opts, ["gap"])
    for pt in points:
        s = pt.summaries["gap"]
        line = f"{pt.spec.label()} W={pt.w:.6g} gap_mean={s.mean:.6f}"
        if opts["analytic"] and pt.spec.gamma > 0:
            line += f" analytic={gap_analytic(pt.w, pt.spec.n_sites, pt.spec.gamma):.6f}"
        print(line)
    _write_scalar_outputs("gap", opts, cfg, out, points, seeds, started)
    return 0


def cmd_gap_analytic_only(opts: dict) -> int:
    scale = _energy_scale(opts)
    for n in opts["n"]:
        w = opts["w"] if opts["w"] is not None else parse_grid(opts["w_grid"])[0]
        val = gap_analytic(w / scale, n, opts["gamma"] / scale)
        print(f"N={n} W={w / scale:.6g} analytic_gap={val:.6f} (units {_units_note(opts)})")
    return 0


def cmd_thresholds(opts: dict) -> int:
    """Printed in the input energy unit."""
    for n in opts["n"]:
        w = opts["w"]
        t = thresholds(n, opts["omega"], opts["gamma"], w)
        print(f"N={n} W1={t.w1:.6g} W2={t.w2:.6g} W_gap={t.w_gap:.6g}"
              + (f" gamma_gap={t.gamma_gap:.6g}" if t.gamma_gap is not None else "")
              + (f" xi(W)={t.xi(w):.6g}" if w else ""))
    return 0


def cmd_cavity_compare(opts: dict) -> int:
    if opts["model"] != "pair":
        opts = dict(opts, model="pair")
    obs = opts["observables"] or ["current"]
    cfg, out, points, seeds, started = _run("cavity_compare", opts, obs)
    from .analysis import cavity_longrange_overlap
    gaps = []
    for spec in cfg.models:
        if spec.kind is ModelKind.CAVITY:
            cmp0 = cavity_longrange_overlap(spec, sample_disorder(spec, 0.0, 0, 0))
            gaps.append({"n_sites": spec.n_sites, "g": spec.cavity.g,
                         "gap_numeric": cmp0.gap_numeric, "gap_formula": cmp0.gap_formula})
            print(f"N={spec.n_sites} W=0 polariton gap numeric={cmp0.gap_numeric:.12g} "
                  f"formula={cmp0.gap_formula:.12g}")
    for pt in points:
        if pt.shape is not None:
            pt.shape.profile().to_csv(out / f"shape_{pt.spec.label()}_W{pt.w:.6g}.csv")
        if "current" in pt.accumulators:
            s = pt.summaries["current"]
            print(f"{pt.spec.label()} W={pt.w:.6g} I_typ={s.typical:.6e}")
    _write_scalar_outputs("cavity_compare", opts, cfg, out, points, seeds, started,
                          {"polariton_gap_w0": gaps})
    return 0


def cmd_oracle_check(opts: dict) -> int:
    """Closed forms against the brute-force oracles on a few small random chains."""
    from .oracles import quadrature_integrated_transmission, quadrature_transfer_time
    from .spectral import eig_biorthogonal
    from .transport import (integrated_transmission, lindblad_steady_current,
                            steady_current, transfer_time)
    rng = np.random.default_rng(int(opts["seed"]))
    worst = {"lindblad": 0.0, "tau": 0.0, "t_int": 0.0}
    open_cfg = OpenSystemConfig(opts["gamma_p"], opts["gamma_d"], opts["nu"])
    count = opts["realizations"] or 5
    for i in range(count):
        n = int(rng.integers(2, 9))
        spec = ChainSpec(n, 1.0, float(rng.uniform(0, 3)))
        dis = sample_disorder(spec, float(rng.uniform(0.1, 3)), int(opts["seed"]), i)
        h = build_hamiltonian(spec, dis)
        drain = build_effective(h, open_cfg, "drain")
        tau = transfer_time(eig_biorthogonal(drain), 0, n - 1, open_cfg.gamma_d)
        cur = steady_current(tau, open_cfg.gamma_p)
        worst["lindblad"] = max(worst["lindblad"],
                                abs(lindblad_steady_current(h, open_cfg) / cur - 1))
        worst["tau"] = max(worst["tau"],
                           abs(quadrature_transfer_time(drain, open_cfg.gamma_d) / tau - 1))
        scat = build_effective(h, open_cfg, "scattering")
        tint = integrated_transmission(eig_biorthogonal(scat), open_cfg.nu)
        worst["t_int"] = max(worst["t_int"],
                             abs(quadrature_integrated_transmission(scat, open_cfg.nu) / tint - 1))
    limits = {"lindblad": 1e-8, "tau": 1e-6, "t_int": 1e-5}
    ok = True
    for k, v in worst.items():
        flag = "ok" if v <= limits[k] else "FAIL"
        ok &= v <= limits[k]
        print(f"{k:9s} max relative error {v:.3e} (limit {limits[k]:.0e}) {flag}")
    return 0 if ok else 1


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        opts = resolve(args)
        cmd = args.command
        if cmd == "thresholds":
            return cmd_thresholds(opts)
        if cmd == "gap" and opts["analytic"] and opts["realizations"] == 0:
            return cmd_gap_analytic_only(opts)
        handler = {"current": cmd_current, "transmission": cmd_transmission,
                   "shape": cmd_shape, "tails": cmd_tails, "dynamics": cmd_dynamics,
                   "gap": cmd_gap, "cavity-compare": cmd_cavity_compare,
                   "oracle-check": cmd_oracle_check}[cmd]
        return handler(opts)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CheckpointMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime abort; the checkpoint keeps finished points
        log.exception("run aborted")
        print(f"error: run aborted ({type(exc).__name__}: {exc}); "
              "finished points are in the checkpoint, rerun with --resume", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
