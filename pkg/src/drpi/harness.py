"""Experiment harness: config schema, batch episode runner, statistics, IO.

Config files are flat ``key = value`` text with dotted sections
(``model.*``, ``cost.*``, ``run.*``, ``robust.*``, ``search.*``); ``#``
starts a comment and unknown keys are errors. Vectors are comma separated
and rectangles are ``xmin,ymin,xmax,ymax``.

Outputs under the configured directory:

``summary.json``
    per-scheme statistics (floats at 17 significant digits).
``episodes.csv``
    header ``episode,scheme,status,arrive_time_s,realized_state_cost,
    realized_total_cost``; arrive time is empty for unsuccessful episodes.
``traj/<scheme>/traj_<episode>.csv``
    per-step states and controls, written when trajectory saving is on.

Episodes are independent given their seed spec, so they can run on a
process pool; results are merged in episode order and all statistics and
files are byte-identical for any worker count.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .controller import (STATUS_COLLISION, STATUS_SUCCESS, STATUS_TIMEOUT,
                         EpisodeRecord, run_episode)
from .costs import CostModel, Rect, navigation_cost
from .models import DynamicsModel, make_model
from .rollout import SeedSpec
from .solver import SearchConfig
from .uncertainty import RobustnessConfig

__all__ = [
    "ConfigError", "ExperimentConfig", "SchemeSummary",
    "default_config", "parse_config", "load_config", "dump_config",
    "build_model", "build_cost", "summarize", "run_experiment",
    "nearest_rank_percentile", "format_float",
]


class ConfigError(ValueError):
    """Malformed experiment configuration; the message names the field."""


def format_float(x: float) -> str:
    """Floats with 17 significant digits (lossless round trip)."""
    return format(float(x), ".17g")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one experiment needs; see module docstring for the file schema."""

    model_family: str = "double_integrator"
    model_a: float = 0.0
    model_b: float = 1.0
    model_sigma: float = 1.0
    c1: float = 1e-2
    c2: float = 1e2
    c3: float = 1e2
    target: tuple[float, float] = (0.0, 0.0)
    goal_radius: float = 0.5
    obstacle: tuple[float, float, float, float] = (-2.5, 0.5, -0.5, 2.5)
    boundary: tuple[float, float, float, float] = (-5.0, -5.0, 5.0, 5.0)
    terminal_weight: float = 10.0
    control_weight: float = 1e-3
    initial_state: tuple[float, ...] = (-3.5, 2.5, 0.0, 0.0)
    true_drift: tuple[float, ...] = (0.3, -0.3)
    dt: float = 0.05
    horizon_s: float = 25.0
    samples: int = 1000
    episodes: int = 100
    schemes: tuple[str, ...] = ("drpi", "pic")
    master_seed: int = 20260810
    workers: int = 1
    save_trajectories: bool = False
    out_dir: str = "out"
    robust: RobustnessConfig = field(default_factory=RobustnessConfig)
    search: SearchConfig = field(default_factory=SearchConfig)

    @property
    def K(self) -> int:
        k = round(self.horizon_s / self.dt)
        if k < 1 or abs(k * self.dt - self.horizon_s) > 1e-9 * max(1.0, self.horizon_s):
            raise ConfigError(f"run.dt={self.dt} must divide run.horizon_s="
                              f"{self.horizon_s} into a positive step count")
        return k


def default_config(model_family: str = "double_integrator") -> ExperimentConfig:
    """Benchmark defaults for a model family."""
    if model_family == "unicycle":
        return ExperimentConfig(model_family="unicycle",
                                initial_state=(-3.5, 2.5, -math.pi / 4))
    if model_family == "double_integrator":
        return ExperimentConfig()
    raise ConfigError(f"no benchmark defaults for model.family={model_family!r}")


# --- flat key=value schema ------------------------------------------------

def _parse_bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("true", "1", "yes", "on"):
        return True
    if v in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_floats(s: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in s.split(","))


def _fmt_floats(v) -> str:
    return ",".join(format_float(x) for x in v)


def _parse_schemes(s: str) -> tuple[str, ...]:
    v = s.strip().lower()
    if v == "both":
        return ("drpi", "pic")
    out = tuple(tok.strip() for tok in v.split(","))
    for tok in out:
        if tok not in ("drpi", "pic"):
            raise ValueError(f"unknown scheme {tok!r}")
    return out


def _fmt_schemes(v: tuple[str, ...]) -> str:
    return "both" if set(v) == {"drpi", "pic"} and len(v) == 2 else ",".join(v)


def _rect4(s: str) -> tuple[float, float, float, float]:
    v = _parse_floats(s)
    if len(v) != 4:
        raise ValueError("rectangle needs xmin,ymin,xmax,ymax")
    return v


# key -> (attribute path, parser, formatter)
_SCHEMA = {
    "model.family": ("model_family", str.strip, str),
    "model.a": ("model_a", float, format_float),
    "model.b": ("model_b", float, format_float),
    "model.sigma": ("model_sigma", float, format_float),
    "cost.c1": ("c1", float, format_float),
    "cost.c2": ("c2", float, format_float),
    "cost.c3": ("c3", float, format_float),
    "cost.target": ("target", _parse_floats, _fmt_floats),
    "cost.goal_radius": ("goal_radius", float, format_float),
    "cost.obstacle": ("obstacle", _rect4, _fmt_floats),
    "cost.boundary": ("boundary", _rect4, _fmt_floats),
    "cost.terminal_weight": ("terminal_weight", float, format_float),
    "cost.control_weight": ("control_weight", float, format_float),
    "run.initial_state": ("initial_state", _parse_floats, _fmt_floats),
    "run.true_drift": ("true_drift", _parse_floats, _fmt_floats),
    "run.dt": ("dt", float, format_float),
    "run.horizon_s": ("horizon_s", float, format_float),
    "run.samples": ("samples", int, str),
    "run.episodes": ("episodes", int, str),
    "run.scheme": ("schemes", _parse_schemes, _fmt_schemes),
    "run.master_seed": ("master_seed", int, str),
    "run.workers": ("workers", int, str),
    "run.save_trajectories": ("save_trajectories", _parse_bool,
                              lambda v: "true" if v else "false"),
    "run.out_dir": ("out_dir", str.strip, str),
    "robust.gamma": ("robust.gamma", float, format_float),
    "robust.epsilon": ("robust.epsilon", float, format_float),
    "robust.schedule": ("robust.schedule", str.strip, str),
    "search.grid_points": ("search.grid_points", int, str),
    "search.rel_tol": ("search.rel_tol", float, format_float),
    "search.theta_max_factor": ("search.theta_max_factor", float, format_float),
}


def _get_attr(cfg: ExperimentConfig, path: str):
    obj = cfg
    for part in path.split("."):
        obj = getattr(obj, part)
    return obj


def parse_config(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Parse flat dotted key=value text; unknown keys raise ConfigError."""
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, rhs = line.partition("=")
        key = key.strip()
        if key not in _SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        path, parser, _ = _SCHEMA[key]
        try:
            values[path] = parser(rhs.strip())
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}") from None

    cfg = base or ExperimentConfig()
    robust_kwargs = {}
    search_kwargs = {}
    top_kwargs = {}
    for path, val in values.items():
        if path.startswith("robust."):
            robust_kwargs[path.split(".", 1)[1]] = val
        elif path.startswith("search."):
            search_kwargs[path.split(".", 1)[1]] = val
        else:
            top_kwargs[path] = val
    try:
        if robust_kwargs:
            top_kwargs["robust"] = replace(cfg.robust, **robust_kwargs)
        if search_kwargs:
            top_kwargs["search"] = replace(cfg.search, **search_kwargs)
        cfg = replace(cfg, **top_kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    validate_config(cfg)
    return cfg


def load_config(path: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read(), base=base)


def dump_config(cfg: ExperimentConfig) -> str:
    """Emit the full config in schema order; parse(dump(c)) == c."""
    lines = []
    for key, (path, _, fmt) in _SCHEMA.items():
        lines.append(f"{key} = {fmt(_get_attr(cfg, path))}")
    return "\n".join(lines) + "\n"


def validate_config(cfg: ExperimentConfig) -> None:
    _ = cfg.K
    if cfg.episodes < 1:
        raise ConfigError("run.episodes must be at least 1")
    if cfg.samples < 1:
        raise ConfigError("run.samples must be at least 1")
    if cfg.workers < 1:
        raise ConfigError("run.workers must be at least 1")
    model = build_model(cfg)
    if len(cfg.initial_state) != model.n:
        raise ConfigError(f"run.initial_state needs {model.n} entries for "
                          f"model.family={cfg.model_family}")
    if len(cfg.true_drift) != model.p:
        raise ConfigError(f"run.true_drift needs {model.p} entries")
    build_cost(cfg)


def build_model(cfg: ExperimentConfig) -> DynamicsModel:
    if cfg.model_family == "scalar_lq":
        raise ConfigError("model.family=scalar_lq is an oracle model, not a "
                          "navigation benchmark")
    try:
        return make_model(cfg.model_family)
    except Exception as exc:
        raise ConfigError(f"model.family: {exc}") from None


def build_cost(cfg: ExperimentConfig) -> CostModel:
    model = make_model(cfg.model_family)
    ox0, oy0, ox1, oy1 = cfg.obstacle
    bx0, by0, bx1, by1 = cfg.boundary
    try:
        return navigation_cost(
            state_dim=model.n,
            R=cfg.control_weight * np.eye(model.k),
            c1=cfg.c1, c2=cfg.c2, c3=cfg.c3,
            target=cfg.target, goal_radius=cfg.goal_radius,
            obstacle=Rect((ox0, oy0), (ox1, oy1)),
            boundary=Rect((bx0, by0), (bx1, by1)),
            terminal_weight=cfg.terminal_weight,
        )
    except Exception as exc:
        raise ConfigError(f"cost.*: {exc}") from None


# --- statistics -------------------------------------------------------------

def nearest_rank_percentile(values, pct: float) -> float:
    """Nearest-rank percentile: the ceil(pct/100 * n)-th order statistic."""
    arr = np.sort(np.asarray(values, dtype=float))
    if arr.size == 0:
        raise ValueError("percentile of empty data")
    rank = max(1, math.ceil(pct / 100.0 * arr.size))
    return float(arr[rank - 1])


@dataclass(frozen=True)
class SchemeSummary:
    """Aggregate statistics of one scheme's episodes.

    Arrive statistics are over successful episodes only (population
    standard deviation, nearest-rank 95th percentile) and None when there
    are no successes.
    """

    episodes: int
    successes: int
    collisions: int
    timeouts: int
    success_rate: float
    arrive_mean: float | None
    arrive_std: float | None
    arrive_p95: float | None

    def as_dict(self) -> dict:
        return {
            "episodes": self.episodes,
            "successes": self.successes,
            "collisions": self.collisions,
            "timeouts": self.timeouts,
            "success_rate": self.success_rate,
            "arrive_mean": self.arrive_mean,
            "arrive_std": self.arrive_std,
            "arrive_p95": self.arrive_p95,
        }


def summarize(records, dt: float) -> SchemeSummary:
    """Aggregate a sequence of episode records into scheme statistics."""
    records = list(records)
    if not records:
        raise ValueError("summarize needs at least one episode record")
    if not dt > 0:
        raise ValueError("dt must be positive")
    arrive = [r.arrive_time for r in records if r.status == STATUS_SUCCESS]
    n_succ = len(arrive)
    n_coll = sum(1 for r in records if r.status == STATUS_COLLISION)
    n_time = sum(1 for r in records if r.status == STATUS_TIMEOUT)
    if n_succ:
        arr = np.asarray(arrive, dtype=float)
        mean = float(arr.mean())
        std = float(arr.std())  # population std
        p95 = nearest_rank_percentile(arr, 95.0)
    else:
        mean = std = p95 = None
    return SchemeSummary(
        episodes=len(records),
        successes=n_succ,
        collisions=n_coll,
        timeouts=n_time,
        success_rate=100.0 * n_succ / len(records),
        arrive_mean=mean,
        arrive_std=std,
        arrive_p95=p95,
    )


# --- experiment runner ------------------------------------------------------

def _episode_task(args):
    cfg, scheme, episode = args
    model = build_model(cfg)
    cm = build_cost(cfg)
    rec = run_episode(
        model, cm, scheme,
        true_mu=np.asarray(cfg.true_drift),
        x0=np.asarray(cfg.initial_state),
        K=cfg.K, M=cfg.samples, dt=cfg.dt,
        rc=cfg.robust,
        seed=SeedSpec(cfg.master_seed, episode=episode),
        search=cfg.search,
    )
    return scheme, episode, rec


def _json_write(obj, fh, indent=0):
    pad = "  " * indent
    if isinstance(obj, dict):
        fh.write("{\n")
        for i, (key, val) in enumerate(obj.items()):
            fh.write(f'{pad}  "{key}": ')
            _json_write(val, fh, indent + 1)
            fh.write(",\n" if i < len(obj) - 1 else "\n")
        fh.write(pad + "}")
    elif isinstance(obj, bool):
        fh.write("true" if obj else "false")
    elif obj is None:
        fh.write("null")
    elif isinstance(obj, int):
        fh.write(str(obj))
    elif isinstance(obj, float):
        fh.write(format_float(obj))
    else:
        fh.write(f'"{obj}"')


def write_summary_json(path: str, summary: dict[str, SchemeSummary]) -> None:
    payload = {scheme: s.as_dict() for scheme, s in summary.items()}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        _json_write(payload, fh)
        fh.write("\n")


def write_episodes_csv(path: str, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["episode", "scheme", "status", "arrive_time_s",
                         "realized_state_cost", "realized_total_cost"])
        for episode, scheme, rec in rows:
            writer.writerow([
                episode, scheme, rec.status,
                "" if rec.arrive_time is None else format_float(rec.arrive_time),
                format_float(rec.realized_state_cost),
                format_float(rec.realized_total_cost),
            ])


def write_trajectory_csv(path: str, rec: EpisodeRecord, dt: float) -> None:
    n = rec.states.shape[1]
    k = rec.controls.shape[1]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["step", "t"] + [f"x{i}" for i in range(n)]
                        + [f"u{i}" for i in range(k)])
        for step, state in enumerate(rec.states):
            if step < len(rec.controls):
                ctrl = [format_float(v) for v in rec.controls[step]]
            else:
                ctrl = [""] * k
            writer.writerow([step, format_float(step * dt)]
                            + [format_float(v) for v in state] + ctrl)


def run_experiment(cfg: ExperimentConfig) -> dict[str, SchemeSummary]:
    """Run all configured episodes per scheme, write outputs, return summaries.

    Episode e of every scheme uses the seed spec (master_seed, e), so the
    schemes face identical realized disturbances. With ``workers > 1``
    episodes run on a process pool; results are merged in (scheme,
    episode) order so outputs do not depend on the worker count.
    """
    validate_config(cfg)
    tasks = [(cfg, scheme, ep)
             for scheme in cfg.schemes for ep in range(cfg.episodes)]
    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_episode_task, tasks))
    else:
        results = [_episode_task(t) for t in tasks]

    by_scheme: dict[str, list[EpisodeRecord]] = {s: [] for s in cfg.schemes}
    for scheme, _episode, rec in results:
        by_scheme[scheme].append(rec)

    summary = {scheme: summarize(records, cfg.dt)
               for scheme, records in by_scheme.items()}

    os.makedirs(cfg.out_dir, exist_ok=True)
    write_summary_json(os.path.join(cfg.out_dir, "summary.json"), summary)
    rows = [(episode, scheme, rec) for scheme, episode, rec in results]
    write_episodes_csv(os.path.join(cfg.out_dir, "episodes.csv"), rows)
    if cfg.save_trajectories:
        for scheme, episode, rec in results:
            tdir = os.path.join(cfg.out_dir, "traj", scheme)
            os.makedirs(tdir, exist_ok=True)
            write_trajectory_csv(os.path.join(tdir, f"traj_{episode}.csv"),
                                 rec, cfg.dt)
    return summary
