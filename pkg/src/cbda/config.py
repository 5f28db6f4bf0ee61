"""Declarative run configuration (YAML or JSON).

Schema (unknown keys are errors)::

    scenario:
      num_images: 100            # required
      height: 64                 # required
      width: 64                  # required
      num_classes: 5             # required
      class_frequencies: [0.6, 0.2, 0.1, 0.07, 0.03]   # required, sums to 1
      spatial_granularity: 8
      noise_schedule: null       # null -> linspace(0.8, 0.4, num_al_iterations)
      seed: 0
    schedule:
      budget_fraction: 0.05
      num_al_iterations: 5
      goal_distribution: null    # null -> uniform
      epsilon: 1.0e-6
    run:
      strategy: cbda             # image | ra | da | cbra | cbda
      heuristic: entropy         # entropy | margin | region-impurity | random
      count_mode: ground_truth   # ground_truth | pseudo
      pin_weights: false
      radius: 1
      histogram_bins: 10
      workers: 1
      binary_labels: false
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from pathlib import Path

import yaml

from .core import COUNT_MODES, BudgetSchedule, DatasetShape
from .errors import CBDAError, ConfigError
from .heuristics import HEURISTICS
from .persistence import canonical_hash
from .scenario import LOOP_STRATEGIES, ScenarioConfig, default_noise_schedule

DEFAULTS = {
    "scenario": {
        "num_images": None,
        "height": None,
        "width": None,
        "num_classes": None,
        "class_frequencies": None,
        "spatial_granularity": 8,
        "noise_schedule": None,
        "seed": 0,
    },
    "schedule": {
        "budget_fraction": 0.05,
        "num_al_iterations": 5,
        "goal_distribution": None,
        "epsilon": 1e-6,
    },
    "run": {
        "strategy": "cbda",
        "heuristic": "entropy",
        "count_mode": "ground_truth",
        "pin_weights": False,
        "radius": 1,
        "histogram_bins": 10,
        "workers": 1,
        "binary_labels": False,
    },
}

_REQUIRED = ("num_images", "height", "width", "num_classes", "class_frequencies")

# fields that determine the ground truth maps
_SCENARIO_IDENTITY = ("num_images", "height", "width", "num_classes", "class_frequencies", "spatial_granularity", "seed")


@dataclass
class RunConfig:
    raw: dict

    @property
    def scenario(self) -> dict:
        return self.raw["scenario"]

    @property
    def schedule(self) -> dict:
        return self.raw["schedule"]

    @property
    def run(self) -> dict:
        return self.raw["run"]

    @property
    def budget_fraction(self) -> float:
        return float(self.schedule["budget_fraction"])

    @property
    def scenario_hash(self) -> str:
        return canonical_hash({k: self.scenario[k] for k in _SCENARIO_IDENTITY})

    @property
    def config_hash(self) -> str:
        return canonical_hash(self.raw)

    def dataset_shape(self) -> DatasetShape:
        s = self.scenario
        return DatasetShape(s["num_images"], s["height"], s["width"], s["num_classes"])

    def scenario_config(self) -> ScenarioConfig:
        s = self.scenario
        return ScenarioConfig(
            self.dataset_shape(), tuple(s["class_frequencies"]), s["spatial_granularity"],
            tuple(s["noise_schedule"]), s["seed"],
        )

    def budget_schedule(self) -> BudgetSchedule:
        sch = self.schedule
        goal = sch["goal_distribution"]
        try:
            return BudgetSchedule(
                sch["budget_fraction"], sch["num_al_iterations"],
                None if goal is None else tuple(goal), sch["epsilon"], self.scenario["num_classes"],
            )
        except CBDAError as exc:
            raise ConfigError(str(exc), "schedule") from exc


def _merge(defaults: dict, given: dict, prefix: str = "") -> dict:
    if not isinstance(given, dict):
        raise ConfigError(f"section {prefix or '<root>'} must be a mapping", prefix or None)
    out = copy.deepcopy(defaults)
    for key, value in given.items():
        path = f"{prefix}.{key}" if prefix else key
        if key not in defaults:
            raise ConfigError(f"unknown configuration key {path!r}", path)
        if isinstance(defaults[key], dict):
            out[key] = _merge(defaults[key], value or {}, path)
        else:
            out[key] = value
    return out


def build_config(data: dict, overrides: dict | None = None) -> RunConfig:
    """Merge ``data`` and dotted-key ``overrides`` over defaults and validate."""
    raw = _merge(DEFAULTS, data or {})
    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        section, key = dotted.split(".")
        raw[section][key] = value
    _validate(raw)
    return RunConfig(raw)


def load_config(path, overrides: dict | None = None) -> RunConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML/JSON: {exc}") from exc
    return build_config(data or {}, overrides)


def _validate(raw: dict) -> None:
    sc, sch, run = raw["scenario"], raw["schedule"], raw["run"]
    for key in _REQUIRED:
        if sc[key] is None:
            raise ConfigError(f"scenario.{key} is required", f"scenario.{key}")
    for key in ("num_images", "height", "width", "num_classes", "spatial_granularity"):
        if not isinstance(sc[key], int) or isinstance(sc[key], bool) or sc[key] < 1:
            raise ConfigError(f"scenario.{key} must be a positive integer", f"scenario.{key}")
    if not isinstance(sc["seed"], int) or isinstance(sc["seed"], bool):
        raise ConfigError("scenario.seed must be an integer", "scenario.seed")
    freqs = sc["class_frequencies"]
    if not isinstance(freqs, list) or len(freqs) != sc["num_classes"]:
        raise ConfigError("scenario.class_frequencies must list num_classes values", "scenario.class_frequencies")
    if any(not isinstance(f, (int, float)) or f < 0 for f in freqs) or abs(math.fsum(freqs) - 1.0) > 1e-9:
        raise ConfigError(
            f"scenario.class_frequencies must be non-negative and sum to 1 (sum={math.fsum(freqs)!r})",
            "scenario.class_frequencies",
        )

    n_iter = sch["num_al_iterations"]
    if not isinstance(n_iter, int) or isinstance(n_iter, bool) or n_iter < 1:
        raise ConfigError("schedule.num_al_iterations must be a positive integer", "schedule.num_al_iterations")
    b = sch["budget_fraction"]
    if not isinstance(b, (int, float)) or isinstance(b, bool) or not (0.0 <= b <= 1.0):
        raise ConfigError("schedule.budget_fraction must lie in [0, 1]", "schedule.budget_fraction")
    eps = sch["epsilon"]
    if not isinstance(eps, (int, float)) or not (0.0 < eps < 1.0):
        raise ConfigError("schedule.epsilon must lie in (0, 1)", "schedule.epsilon")
    goal = sch["goal_distribution"]
    if goal is not None:
        if (not isinstance(goal, list) or len(goal) != sc["num_classes"]
                or any(not isinstance(g, (int, float)) or g < 0 for g in goal)
                or abs(math.fsum(goal) - 1.0) > 1e-9):
            raise ConfigError(
                "schedule.goal_distribution must list num_classes non-negative values summing to 1",
                "schedule.goal_distribution",
            )

    if sc["noise_schedule"] is None:
        sc["noise_schedule"] = list(default_noise_schedule(n_iter))
    noise = sc["noise_schedule"]
    if not isinstance(noise, list) or len(noise) != n_iter:
        raise ConfigError("scenario.noise_schedule must have num_al_iterations entries", "scenario.noise_schedule")

    strategy = str(run["strategy"]).upper()
    if strategy not in LOOP_STRATEGIES:
        raise ConfigError(
            f"unknown strategy {run['strategy']!r}; valid: {', '.join(s.lower() for s in LOOP_STRATEGIES)}",
            "run.strategy",
        )
    run["strategy"] = strategy.lower()
    if run["heuristic"] not in HEURISTICS:
        raise ConfigError(f"unknown heuristic {run['heuristic']!r}; valid: {', '.join(HEURISTICS)}", "run.heuristic")
    if run["count_mode"] not in COUNT_MODES:
        raise ConfigError(f"run.count_mode must be one of {', '.join(COUNT_MODES)}", "run.count_mode")
    for key in ("radius", "histogram_bins", "workers"):
        if not isinstance(run[key], int) or run[key] < 1:
            raise ConfigError(f"run.{key} must be a positive integer", f"run.{key}")

    # scenario-level checks (granularity, noise monotonicity) live in ScenarioConfig
    ScenarioConfig(
        DatasetShape(sc["num_images"], sc["height"], sc["width"], sc["num_classes"]),
        tuple(freqs), sc["spatial_granularity"], tuple(noise), sc["seed"],
    )
