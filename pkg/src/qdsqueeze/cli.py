"""Command-line front end.

Exit codes: 0 success, 1 configuration error, 2 integration-quality error
(or a failed ``validate``), 3 truncation convergence failure.
"""
from __future__ import annotations

import argparse
import configparser
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, ConvergenceError, IntegrationError, QDSqueezeError, TruncationError
from .lindblad import convergence_check
from .model import SystemParams
from .scenarios import (FIG6_AXES, FIG8_AXES, SCENARIOS, Axis, ScenarioConfig, _jsonable,
                        apply_overrides, default_output_dir, optimal_epsilon_curve, run_scenario,
                        sweep_grid)

log = logging.getLogger("qdsqueeze")

EXIT_OK, EXIT_CONFIG, EXIT_INTEGRATION, EXIT_CONVERGENCE = 0, 1, 2, 3

# config key -> (target, type). Targets prefixed with "." are run settings, not parameters.
CONFIG_KEYS = {
    "scenario": (".scenario", str),
    "g_ab_mev": ("g_ab", float),
    "g_bc_mev": ("g_bc", float),
    "delta_gbc_mev": ("delta_gbc", float),
    "g_ac_mev": ("g_ac", float),
    "gamma_a_mev": ("gamma_a", float),
    "gamma_b_mev": ("gamma_b", float),
    "gamma_c_mev": ("gamma_c", float),
    "epsilon_mev": ("epsilon", float),
    "delta_a_mev": ("delta_a", float),
    "delta_b_mev": ("delta_b", float),
    "delta_c_mev": ("delta_c", float),
    "omega_0_ev": ("omega_0", float),
    "n_ph": ("n_ph", int),
    "n_pl": ("n_pl", int),
    "num_pn": ("num_pn", int),
    "squeeze_r": ("squeeze_r", float),
    "squeeze_theta_rad": ("squeeze_theta", float),
    "t_end_fs": (".t_end", float),
    "dt_out_fs": (".dt_out", float),
    "workers": (".workers", int),
}
_SUFFIXES = ("_mev", "_ev", "_fs", "_rad", "_s", "_ps", "_mev_fs")


def _stem(key: str) -> str:
    for suf in sorted(_SUFFIXES, key=len, reverse=True):
        if key.endswith(suf):
            return key[: -len(suf)]
    return key


_STEMS = {_stem(k): k for k in CONFIG_KEYS}


def read_config_file(path) -> tuple[dict, dict, list[str]]:
    """Parse ``key = value`` lines (an optional ``[run]`` header is allowed).

    Returns parameter overrides, run settings and the list of violations.
    """
    text = Path(path).read_text()
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    if not text.lstrip().startswith("["):
        text = "[run]\n" + text
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    overrides, settings, problems = {}, {}, []
    for section in parser.sections():
        for key, raw in parser.items(section):
            if key not in CONFIG_KEYS:
                known = _STEMS.get(_stem(key))
                if known is not None:
                    problems.append(f"unit-suffix mismatch: {key!r} should be {known!r}")
                else:
                    problems.append(f"unknown key {key!r}")
                continue
            target, typ = CONFIG_KEYS[key]
            try:
                value = typ(raw)
            except ValueError:
                problems.append(f"{key} = {raw!r} is not a valid {typ.__name__}")
                continue
            if target.startswith("."):
                settings[target[1:]] = value
            else:
                overrides[target] = value
    return overrides, settings, problems


def load_config(path, scenario: str | None = None) -> ScenarioConfig:
    """Resolve a config file into a ScenarioConfig; absent keys keep their defaults.

    Every violation (unknown keys, unit suffixes, bad values, out-of-range
    parameters) is collected and raised together.
    """
    overrides, settings, problems = read_config_file(path)
    scen = settings.pop("scenario", None) or scenario or "pump"
    try:
        base = SystemParams()
        if scen.startswith("pulse"):
            base = base.replace(n_ph=6)
        apply_overrides(base, overrides)
    except ConfigError as exc:
        problems += exc.violations
    try:
        cfg = ScenarioConfig(scen, overrides, settings.get("t_end"), settings.get("dt_out", 0.5),
                             workers=settings.get("workers", 1))
    except ConfigError as exc:
        problems += [v for v in exc.violations if v not in problems]
        cfg = None
    if problems:
        raise ConfigError(problems)
    return cfg


def _add_param_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("parameter overrides (meV unless noted)")
    g.add_argument("--g-ab", type=float)
    g.add_argument("--g-bc", type=float)
    g.add_argument("--delta-gbc", type=float)
    g.add_argument("--g-ac", type=float)
    g.add_argument("--gamma-a", type=float)
    g.add_argument("--gamma-b", type=float)
    g.add_argument("--gamma-c", type=float)
    g.add_argument("--epsilon", type=float)
    g.add_argument("--delta-a", type=float)
    g.add_argument("--n-ph", type=int)
    g.add_argument("--n-pl", type=int)
    g.add_argument("--num-pn", type=int)
    g.add_argument("--squeeze-r", type=float)
    g.add_argument("--squeeze-theta", type=float, help="radians")
    g.add_argument("--t-end", type=float, help="fs")
    g.add_argument("--dt-out", type=float, help="fs")
    p.add_argument("--config", type=Path, help="key = value file with unit-suffixed keys")
    p.add_argument("--out", type=Path, help="output directory (default $QDSQUEEZE_OUTPUT_DIR)")
    p.add_argument("--workers", type=int, help="parallel processes for sweeps")
    p.add_argument("--check-convergence", action="store_true",
                   help="rerun at n_ph+2 and n_pl+1 first; exit 3 if concurrence shifts by >= 1e-3")
    p.add_argument("--gnuplot", action="store_true", help="also write a gnuplot script")


_FLAG_PARAMS = ("g_ab", "g_bc", "delta_gbc", "g_ac", "gamma_a", "gamma_b", "gamma_c", "epsilon",
                "delta_a", "n_ph", "n_pl", "num_pn", "squeeze_r", "squeeze_theta")

_COMMAND_SCENARIO = {
    "pulse": "pulse",
    "pulse-reduced": "pulse-reduced",
    "pump": "pump",
    "two-pn": "two-pn",
    "mismatch": "mismatch",
    "detuning": "detuning-study",
    "damping": "damping-study",
    "epsilon": "epsilon-study",
}

FIGURES = {
    2: ("pulse", None),
    3: ("pulse-reduced", None),
    4: ("pump", None),
    5: ("damping-study", None),
    6: ("epsilon-study", FIG6_AXES),
    7: ("two-pn", None),
    8: ("mismatch", FIG8_AXES),
    9: ("detuning-study", None),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qdsqueeze", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"qdsqueeze {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMAND_SCENARIO:
        _add_param_flags(sub.add_parser(name, help=f"run the {_COMMAND_SCENARIO[name]} scenario"))
    sw = sub.add_parser("sweep", help="max concurrence on a 2-D grid of pumped runs")
    _add_param_flags(sw)
    sw.add_argument("--axis1", default=FIG6_AXES[0].spec(), help="name:start:stop:count")
    sw.add_argument("--axis2", default=FIG6_AXES[1].spec(), help="name:start:stop:count")
    fig = sub.add_parser("figure", help="preset reproducing one figure (2-9)")
    fig.add_argument("number", type=int, choices=sorted(FIGURES))
    fig.add_argument("--skip-sweep", action="store_true", help="figures 6 and 8: omit the 930-point map")
    _add_param_flags(fig)
    sub.add_parser("validate", help="run the invariant and oracle checks")
    return parser


def _resolve(args, scenario: str) -> ScenarioConfig:
    if args.config is not None:
        cfg = load_config(args.config, scenario)
        if cfg.scenario != scenario and scenario in SCENARIOS:
            cfg = ScenarioConfig(scenario, cfg.overrides, cfg.t_end, cfg.dt_out, workers=cfg.workers)
    else:
        cfg = ScenarioConfig(scenario)
    overrides = dict(cfg.overrides)
    for name in _FLAG_PARAMS:
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    t_end = args.t_end if args.t_end is not None else cfg.t_end
    dt_out = args.dt_out if args.dt_out is not None else cfg.dt_out
    workers = args.workers if args.workers is not None else cfg.workers
    out = args.out if args.out is not None else default_output_dir()
    resolved = ScenarioConfig(scenario, overrides, t_end, dt_out, out, workers=workers)
    resolved.base_params()  # validate before any computation
    return resolved


def _convergence(cfg: ScenarioConfig) -> None:
    p = cfg.base_params()
    mode = "pulse" if cfg.scenario.startswith("pulse") else "pump"
    report = convergence_check(p, cfg.t_end, mode, dt_out=cfg.dt_out)
    print(f"convergence: n_ph+2 shift {report.deviations['n_ph']:.2e}, "
          f"n_pl+1 shift {report.deviations['n_pl']:.2e}", file=sys.stderr)


def _summarize(result) -> None:
    for label, tr in result.trajectories.items():
        t, c = tr.peak()
        steady = result.steady_concurrence.get(label)
        extra = "" if steady is None else f", steady {steady:.4f}"
        print(f"{result.scenario} [{label}]: peak concurrence {c:.4f} at {t:g} fs{extra}")


def _run_sweep(cfg: ScenarioConfig, a1: Axis, a2: Axis, name: str) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{name}.csv"
    cmap = sweep_grid(a1, a2, cfg.base_params(), workers=cfg.workers, csv_path=csv_path,
                      t_end=cfg.t_end, dt_out=cfg.dt_out)
    manifest = {
        "artifact": "qdsqueeze",
        "version": __version__,
        "sweep": {"axis1": a1.spec(), "axis2": a2.spec(), "points": len(a1.values) * len(a2.values)},
        "params": _jsonable(cfg.base_params().to_dict()),
        "t_end_fs": cfg.t_end,
        "dt_out_fs": cfg.dt_out,
        "failed_points": int(sum(str(s).startswith("error") for s in cmap.status.ravel())),
        "files": [csv_path.name],
    }
    if "epsilon" in (a1.name, a2.name):
        other, best_eps, best_c = optimal_epsilon_curve(cmap)
        other_name = a2.name if a1.name == "epsilon" else a1.name
        opt = out / f"{name}_optimal_epsilon.csv"
        np.savetxt(opt, np.column_stack([other, best_eps, best_c]), delimiter=",", fmt="%.12g",
                   header=f"{other_name},epsilon_opt,max_concurrence", comments="")
        manifest["files"].append(opt.name)
    (out / f"{name}_manifest.json").write_text(json.dumps(manifest, indent=2))
    print(f"sweep {a1.spec()} x {a2.spec()}: best max concurrence {np.nanmax(cmap.max_concurrence):.4f}; "
          f"wrote {csv_path}")
    return csv_path


def gnuplot_script(result, out_dir: Path, name: str) -> Path:
    lines = ["set datafile separator ','", "set key autotitle columnhead", "set xlabel 't (fs)'",
             "set terminal pngcairo size 900,600", f"set output '{name}.png'",
             "set multiplot layout 2,1"]
    files = result.files if result.files else []
    pops = [f"'{f}' using 1:{c} with lines" for f in files[:1] for c in range(2, 6)]
    lines.append("set ylabel 'Bell populations'")
    lines.append("plot " + ", ".join(pops))
    lines.append("set ylabel 'concurrence, D'")
    curves = []
    for f in files:
        curves.append(f"'{f}' using 1:7 with lines title '{f} C'")
        curves.append(f"'{f}' using 1:6 with lines dt 2 title '{f} D'")
    lines.append("plot " + ", ".join(curves))
    lines.append("unset multiplot")
    path = out_dir / f"{name}.gp"
    path.write_text("\n".join(lines) + "\n")
    return path


def _run(args) -> int:
    if args.command == "validate":
        from .validate import run_checks
        checks = run_checks()
        for c in checks:
            print(c.line())
        return EXIT_OK if all(c.passed for c in checks) else EXIT_INTEGRATION

    if args.command == "sweep":
        cfg = _resolve(args, "pump")
        if args.check_convergence:
            _convergence(cfg)
        _run_sweep(cfg, Axis.parse(args.axis1), Axis.parse(args.axis2), "sweep")
        return EXIT_OK

    if args.command == "figure":
        scenario, axes = FIGURES[args.number]
    else:
        scenario, axes = _COMMAND_SCENARIO[args.command], None
    cfg = _resolve(args, scenario)
    if args.check_convergence:
        _convergence(cfg)
    result = run_scenario(cfg)
    _summarize(result)
    if args.command == "figure":
        if args.gnuplot:
            gnuplot_script(result, Path(cfg.out_dir), f"figure{args.number}")
        if axes is not None and not args.skip_sweep:
            sweep_cfg = ScenarioConfig("pump", cfg.overrides, cfg.t_end, cfg.dt_out, cfg.out_dir,
                                       workers=cfg.workers)
            _run_sweep(sweep_cfg, axes[0], axes[1], f"figure{args.number}_sweep")
    elif args.gnuplot:
        gnuplot_script(result, Path(cfg.out_dir), scenario)
    print(f"wrote {', '.join(result.files)} to {cfg.out_dir}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _run(args)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return EXIT_CONFIG
    except TruncationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except IntegrationError as exc:
        print(f"integration error: {exc}", file=sys.stderr)
        for k, v in exc.diagnostics.items():
            print(f"  {k} = {v}", file=sys.stderr)
        return EXIT_INTEGRATION
    except QDSqueezeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION


if __name__ == "__main__":
    sys.exit(main())
