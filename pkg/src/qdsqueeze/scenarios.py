"""Named experiments, parameter sweeps and result files."""
from __future__ import annotations

import csv
import dataclasses
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, QDSqueezeError
from .lindblad import ATOL, RTOL, Trajectory, simulate, steady_state_for
from .model import SqueezeParams, SystemParams
from .observables import concurrence_of_state
from .reduced import run_reduced

log = logging.getLogger(__name__)

SCENARIOS = (
    "pulse",
    "pulse-reduced",
    "pump",
    "damping-study",
    "epsilon-study",
    "two-pn",
    "mismatch",
    "detuning-study",
)

PULSE_N_PH = 6
# Direct steady-state solves above this Liouville dimension run out of memory
# (sparse LU fill-in); larger runs report the final-time value instead.
STEADY_DIRECT_MAX = 12000

_FLOAT_FIELDS = {f.name for f in dataclasses.fields(SystemParams)
                 if f.type in ("float", float)}
_INT_FIELDS = {"n_ph", "n_pl", "num_pn"}
OVERRIDE_KEYS = _FLOAT_FIELDS | _INT_FIELDS | {"squeeze_r", "squeeze_theta"}


def check_overrides(overrides: dict) -> list[str]:
    """Type-check parameter overrides; returns every violation found."""
    out = []
    for key, value in overrides.items():
        if key not in OVERRIDE_KEYS:
            out.append(f"unknown parameter {key!r}")
        elif key in _INT_FIELDS:
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                out.append(f"{key} must be an integer, got {value!r}")
        elif isinstance(value, bool) or not isinstance(value, (int, float, np.number)):
            out.append(f"{key} must be a number, got {value!r}")
    return out


def apply_overrides(base: SystemParams, overrides: dict) -> SystemParams:
    problems = check_overrides(overrides)
    if problems:
        raise ConfigError(problems)
    kw = {k: v for k, v in overrides.items() if k not in ("squeeze_r", "squeeze_theta")}
    if "squeeze_r" in overrides or "squeeze_theta" in overrides:
        sq = base.squeeze
        kw["squeeze"] = SqueezeParams(
            float(overrides.get("squeeze_r", sq.r)), float(overrides.get("squeeze_theta", sq.theta))
        )
    try:
        return base.replace(**kw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


@dataclass
class ScenarioConfig:
    """Scenario id plus parameter overrides applied on top of the defaults.

    Pulse-type scenarios default to ``n_ph=6``; everything else uses the
    ``SystemParams`` defaults.
    """

    scenario: str
    overrides: dict = field(default_factory=dict)
    t_end: float | None = None
    dt_out: float = 0.5
    out_dir: Path | None = None
    steady: bool = True
    workers: int = 1

    def __post_init__(self):
        problems = []
        if self.scenario not in SCENARIOS:
            problems.append(f"unknown scenario {self.scenario!r}; expected one of {', '.join(SCENARIOS)}")
        problems += check_overrides(self.overrides)
        if self.t_end is not None and not self.t_end > 0:
            problems.append(f"t_end must be > 0, got {self.t_end}")
        if not self.dt_out > 0:
            problems.append(f"dt_out must be > 0, got {self.dt_out}")
        if int(self.workers) != self.workers or self.workers < 1:
            problems.append(f"workers must be a positive integer, got {self.workers}")
        if problems:
            raise ConfigError(problems)

    def base_params(self) -> SystemParams:
        base = SystemParams()
        if self.scenario.startswith("pulse"):
            base = base.replace(n_ph=PULSE_N_PH)
        return apply_overrides(base, self.overrides)


# Each variant: (label, mode, parameter changes). Mode "reduced" runs the non-Hermitian model.
def _variants(scenario: str):
    if scenario == "pulse":
        return [("pulse", "pulse", {})]
    if scenario == "pulse-reduced":
        return [("lindblad", "pulse", {}), ("reduced", "reduced", {})]
    if scenario == "pump":
        return [("pump", "pump", {})]
    if scenario == "damping-study":
        return [(f"gamma_a={g:g}", "pump", {"gamma_a": g}) for g in (10.0, 40.0, 100.0)]
    if scenario == "epsilon-study":
        return [(f"epsilon={e:g}", "pump", {"epsilon": e}) for e in (5.0, 10.0, 20.0)]
    if scenario == "two-pn":
        return [(f"num_pn={n}", "pump", {"num_pn": n}) for n in (1, 2)]
    if scenario == "mismatch":
        return [(f"delta_gbc={d:g}", "pump", {"delta_gbc": d}) for d in (0.0, 30.0)]
    if scenario == "detuning-study":
        return [
            (f"gamma_a={g:g},delta_a={d:g}", "pump", {"gamma_a": g, "delta_a": d})
            for g in (10.0, 60.0)
            for d in (0.0, 50.0)
        ]
    raise ConfigError(f"unknown scenario {scenario!r}")


@dataclass
class ScenarioResult:
    scenario: str
    trajectories: dict[str, Trajectory]
    params: dict[str, SystemParams]
    steady_concurrence: dict[str, float]
    steady_method: dict[str, str] = field(default_factory=dict)
    elapsed_s: float = 0.0
    files: list[str] = field(default_factory=list)

    def __getitem__(self, label: str) -> Trajectory:
        return self.trajectories[label]

    def manifest(self, config: ScenarioConfig) -> dict:
        return {
            "artifact": "qdsqueeze",
            "version": __version__,
            "scenario": self.scenario,
            "overrides": config.overrides,
            "t_end_fs": config.t_end,
            "dt_out_fs": config.dt_out,
            "tolerances": {"rtol": RTOL, "atol": ATOL},
            "runs": {
                label: {
                    "params": _jsonable(self.params[label].to_dict()),
                    "mode": tr.meta.get("mode", tr.meta.get("model")),
                    "peak_time_fs": tr.peak()[0],
                    "peak_concurrence": tr.peak()[1],
                    "steady_concurrence": self.steady_concurrence.get(label),
                    "steady_method": self.steady_method.get(label),
                }
                for label, tr in self.trajectories.items()
            },
            "files": self.files,
            "elapsed_s": self.elapsed_s,
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    return obj


def _slug(label: str) -> str:
    return label.replace("=", "").replace(",", "_").replace(".", "p")


def run_scenario(config: ScenarioConfig) -> ScenarioResult:
    """Run every variant of a scenario; write CSVs and a manifest when ``out_dir`` is set."""
    t0 = time.perf_counter()
    base = config.base_params()
    trajs, params, steady, method = {}, {}, {}, {}
    for label, mode, changes in _variants(config.scenario):
        p = base.replace(**changes)
        params[label] = p
        if mode == "reduced":
            tr = run_reduced(p, 500.0 if config.t_end is None else config.t_end, config.dt_out)
        else:
            tr = simulate(p, mode, config.t_end, config.dt_out)
            if config.steady:
                if mode == "pulse":
                    steady[label], method[label] = 0.0, "vacuum"  # undriven: everything decays
                elif p.space.total_dim**2 <= STEADY_DIRECT_MAX:
                    steady[label] = concurrence_of_state(steady_state_for(p))
                    method[label] = "direct"
                else:
                    steady[label], method[label] = float(tr.concurrence[-1]), "final-time"
        trajs[label] = tr
    result = ScenarioResult(config.scenario, trajs, params, steady, method,
                            time.perf_counter() - t0)
    if config.out_dir is not None:
        write_result(result, config)
    return result


def write_result(result: ScenarioResult, config: ScenarioConfig) -> Path:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for label, tr in result.trajectories.items():
        name = result.scenario if len(result.trajectories) == 1 else f"{result.scenario}_{_slug(label)}"
        path = out / f"{name}.csv"
        tr.to_csv(path)
        result.files.append(path.name)
    manifest = out / f"{result.scenario}_manifest.json"
    manifest.write_text(json.dumps(_jsonable(result.manifest(config)), indent=2))
    return manifest


# --- sweeps ---------------------------------------------------------------------------------

@dataclass(frozen=True)
class Axis:
    name: str
    values: tuple[float, ...]

    @classmethod
    def parse(cls, spec: str) -> "Axis":
        """``name:start:stop:count`` -> evenly spaced values including both ends."""
        parts = spec.split(":")
        if len(parts) != 4:
            raise ConfigError(f"axis spec {spec!r} must be name:start:stop:count")
        name, start, stop, count = parts
        if name not in _FLOAT_FIELDS:
            raise ConfigError(f"axis {name!r} is not a real-valued parameter")
        try:
            start, stop, count = float(start), float(stop), int(count)
        except ValueError as exc:
            raise ConfigError(f"bad axis spec {spec!r}: {exc}") from exc
        if count < 1:
            raise ConfigError(f"axis {name!r} needs at least one point")
        return cls(name, tuple(float(v) for v in np.linspace(start, stop, count)))

    def spec(self) -> str:
        return f"{self.name}:{self.values[0]:g}:{self.values[-1]:g}:{len(self.values)}"


# Default grids: 31 x 30 = 930 points each.
FIG6_AXES = (Axis("g_ab", tuple(np.linspace(0, 200, 31))),
             Axis("epsilon", tuple(np.linspace(25 / 30, 25, 30))))
FIG8_AXES = (Axis("epsilon", tuple(np.linspace(25 / 30, 25, 30))),
             Axis("delta_gbc", tuple(np.linspace(-30, 30, 31))))

SWEEP_COLUMNS = ("axis1", "axis2", "max_concurrence", "t_peak_fs", "steady_concurrence", "status")
SWEEP_MIN_EIG_STRIDE = 20


@dataclass
class MaxConcurrenceMap:
    axis1: Axis
    axis2: Axis
    max_concurrence: np.ndarray  # shape (len(axis1), len(axis2)); NaN for failed points
    t_peak: np.ndarray
    steady: np.ndarray
    status: np.ndarray

    def row(self, value: float) -> np.ndarray:
        i = int(np.argmin(np.abs(np.asarray(self.axis1.values) - value)))
        return self.max_concurrence[i]


def sweep_point(base: SystemParams, name1: str, v1: float, name2: str, v2: float,
                t_end: float | None = None, dt_out: float = 0.5) -> tuple:
    """One grid point: pump run, max concurrence, its time, and the final-time concurrence."""
    try:
        p = base.replace(**{name1: v1, name2: v2})
        tr = simulate(p, "pump", t_end, dt_out, min_eig_stride=SWEEP_MIN_EIG_STRIDE)
        t_pk, c_pk = tr.peak()
        status = "ok"
        if tr.top_fock_pop is not None and tr.top_fock_pop.max() > 1e-3:
            status = "truncation-warning"
        return (v1, v2, c_pk, t_pk, float(tr.concurrence[-1]), status)
    except QDSqueezeError as exc:
        return (v1, v2, float("nan"), float("nan"), float("nan"),
                f"error: {type(exc).__name__}: {exc}".replace("\n", " "))


def _point_task(args):
    return sweep_point(*args)


def _read_done(csv_path: Path) -> dict:
    done = {}
    if csv_path.exists():
        with csv_path.open() as fh:
            for row in csv.DictReader(fh):
                try:
                    key = (float(row["axis1"]), float(row["axis2"]))
                except (KeyError, ValueError):
                    continue
                done[key] = (key[0], key[1], float(row["max_concurrence"]), float(row["t_peak_fs"]),
                             float(row["steady_concurrence"]), row["status"])
    return done


def _fmt(v):
    return v if isinstance(v, str) else f"{v:.12g}"


def sweep_grid(axis1: Axis | str, axis2: Axis | str, base: SystemParams | None = None, *,
               workers: int = 1, csv_path: str | Path | None = None, t_end: float | None = None,
               dt_out: float = 0.5) -> MaxConcurrenceMap:
    """Max-over-time concurrence of the pumped system on a 2-D grid.

    Points are appended to ``csv_path`` as they finish, and points already in
    the file are skipped, so an interrupted sweep resumes where it stopped.
    The returned map is assembled by grid index, independent of completion
    order.  Failed points are recorded with their error and NaN values.
    """
    a1 = Axis.parse(axis1) if isinstance(axis1, str) else axis1
    a2 = Axis.parse(axis2) if isinstance(axis2, str) else axis2
    if a1.name == a2.name:
        raise ConfigError("sweep axes must differ")
    base = SystemParams() if base is None else base
    grid = [(v1, v2) for v1 in a1.values for v2 in a2.values]

    done = {}
    fh = writer = None
    if csv_path is not None:
        csv_path = Path(csv_path)
        csv_path.parent.mkdir(parents=True, exist_ok=True)
        done = _read_done(csv_path)
        fresh = not csv_path.exists() or csv_path.stat().st_size == 0
        fh = csv_path.open("a", newline="")
        writer = csv.writer(fh)
        if fresh:
            writer.writerow(SWEEP_COLUMNS)
    todo = [(base, a1.name, v1, a2.name, v2, t_end, dt_out)
            for v1, v2 in grid if (float(_fmt(v1)), float(_fmt(v2))) not in done]
    log.info("sweep %s x %s: %d points, %d to run", a1.spec(), a2.spec(), len(grid), len(todo))

    results = dict(done)

    def record(res):
        results[(float(_fmt(res[0])), float(_fmt(res[1])))] = res
        if writer is not None:
            writer.writerow([_fmt(v) for v in res])
            fh.flush()

    try:
        if workers > 1 and len(todo) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                for res in pool.map(_point_task, todo, chunksize=1):
                    record(res)
        else:
            for args in todo:
                record(sweep_point(*args))
    finally:
        if fh is not None:
            fh.close()

    shape = (len(a1.values), len(a2.values))
    cmax, tpk, steady = np.full(shape, np.nan), np.full(shape, np.nan), np.full(shape, np.nan)
    status = np.empty(shape, dtype=object)
    for i, v1 in enumerate(a1.values):
        for j, v2 in enumerate(a2.values):
            res = results[(float(_fmt(v1)), float(_fmt(v2)))]
            cmax[i, j], tpk[i, j], steady[i, j], status[i, j] = res[2], res[3], res[4], res[5]
    return MaxConcurrenceMap(a1, a2, cmax, tpk, steady, status)


def optimal_epsilon_curve(cmap: MaxConcurrenceMap, eps_axis: str = "epsilon"):
    """For each value of the other axis, the epsilon with the largest max concurrence.

    Ties (and all-NaN rows) resolve to the smallest epsilon.  Returns
    ``(other_values, best_epsilon, best_concurrence)``.
    """
    if cmap.axis1.name == eps_axis:
        data, eps, other = cmap.max_concurrence.T, np.asarray(cmap.axis1.values), cmap.axis2.values
    elif cmap.axis2.name == eps_axis:
        data, eps, other = cmap.max_concurrence, np.asarray(cmap.axis2.values), cmap.axis1.values
    else:
        raise ConfigError(f"map has no {eps_axis!r} axis")
    order = np.argsort(eps, kind="stable")
    data, eps = data[:, order], eps[order]
    filled = np.where(np.isnan(data), -np.inf, data)
    best = np.argmax(filled, axis=1)  # first maximum -> smallest epsilon
    best_c = filled[np.arange(len(best)), best]
    best_c = np.where(np.isinf(best_c), np.nan, best_c)
    return np.asarray(other), eps[best], best_c


def default_output_dir() -> Path:
    return Path(os.environ.get("QDSQUEEZE_OUTPUT_DIR", "qdsqueeze-output"))


__all__ = [
    "SCENARIOS",
    "ScenarioConfig",
    "ScenarioResult",
    "run_scenario",
    "Axis",
    "FIG6_AXES",
    "FIG8_AXES",
    "MaxConcurrenceMap",
    "sweep_grid",
    "sweep_point",
    "optimal_epsilon_curve",
    "default_output_dir",
]
