"""Experiment configuration: parsing, validation and normalization.

A config is a JSON object. Exactly one instance source is allowed:

    {"instance": {"builtin": "E1"}}
    {"instance": {"models": {"symbols": [...], "probs": [[...], ...]},
                  "target": {"probs": [...]}}}
    {"instance": {"corpus": "path", "orders": [0, 1], "epsilon": 0.01}}

The grid is either explicit (``{"lambda": [...], "omega": [[...], ...]}``) or
automatic (``omega_count``, ``omega_range``, ``lambda_count``, ``lambda_padding``).
:meth:`ExperimentConfig.normalized` returns the config with instance, grid
and alpha resolved to explicit values, which is what reports echo.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ConfigError
from .grids import (
    DEFAULT_ALPHA_FACTOR,
    DEFAULT_OMEGA_RANGE,
    GridSpec,
    auto_lambda_range,
    default_alpha,
    omega_grid,
)
from .instances import Instance, instance_downsized, instance_e1
from .mixing import PenaltyConfig
from .models import ContextModelSet, SmoothingConfig, estimate_context_models, make_distribution

SOLVERS = ("brute", "brute_penalized", "sa", "anneal", "grand")
BUILTINS = {"E1": instance_e1, "E1-downsized": instance_downsized}
TOP_KEYS = {"instance", "grid", "alpha", "alpha_factor", "solver", "sa", "schedule",
            "gap_samples", "resupply", "seed", "out"}


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def _positive(value, name) -> float:
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number, got {value!r}") from None
    _require(np.isfinite(v) and v > 0, f"{name} must be finite and > 0, got {value!r}")
    return v


@dataclass
class ExperimentConfig:
    raw: dict = field(default_factory=dict)
    base_dir: Path = Path(".")

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
        return cls.from_dict(raw, path.parent)

    @classmethod
    def from_dict(cls, raw: dict, base_dir=".") -> "ExperimentConfig":
        _require(isinstance(raw, dict), "config must be a JSON object")
        unknown = set(raw) - TOP_KEYS
        _require(not unknown, f"unknown config keys: {sorted(unknown)}")
        cfg = cls(copy.deepcopy(raw), Path(base_dir))
        cfg.validate()
        return cfg

    # ------------------------------------------------------------ accessors
    @property
    def seed(self) -> int:
        return int(self.raw.get("seed", 0))

    @property
    def solver(self) -> str:
        return self.raw.get("solver", "brute")

    @property
    def instance_source(self) -> str:
        inst = self.raw.get("instance", {"builtin": "E1"})
        sources = [k for k in ("builtin", "models", "corpus") if k in inst]
        _require(len(sources) == 1, f"exactly one instance source required, got {sources or 'none'}")
        return sources[0]

    def validate(self) -> None:
        inst = self.raw.get("instance", {"builtin": "E1"})
        _require(isinstance(inst, dict), "instance must be an object")
        source = self.instance_source
        if source == "builtin":
            _require(inst["builtin"] in BUILTINS, f"unknown builtin instance {inst['builtin']!r}")
        elif source == "models":
            _require("target" in inst, "inline models need a target distribution")
        else:
            path = self.corpus_path()
            _require(path.is_file(), f"corpus file not found: {path}")
            orders = inst.get("orders", [0])
            _require(isinstance(orders, list) and orders, "orders must be a non-empty list")
        _require(self.solver in SOLVERS, f"solver must be one of {SOLVERS}, got {self.solver!r}")
        if self.raw.get("alpha") is not None and self.raw["alpha"] != 0:
            _positive(self.raw["alpha"], "alpha")
        if "alpha_factor" in self.raw:
            _positive(self.raw["alpha_factor"], "alpha_factor")
        sched = self.raw.get("schedule", {})
        if sched:
            total = float(sched.get("T", 100.0))
            dt = _positive(sched.get("dt", 0.01), "schedule.dt")
            _require(total >= 0, "schedule.T must be >= 0")
            _require(total == 0 or dt <= total, f"schedule.dt={dt} exceeds T={total}")
        res = self.raw.get("resupply", {})
        if res:
            for dt in res.get("dts", []):
                _positive(dt, "resupply.dts entry")
            _positive(res.get("T", 1.0), "resupply.T")
            _require(int(res.get("inner_steps", 64)) >= 1, "resupply.inner_steps must be >= 1")
        grid = self.raw.get("grid", {})
        _require(isinstance(grid, dict), "grid must be an object")
        if "omega" not in grid:
            _require(int(grid.get("omega_count", 3)) >= 1, "omega_count must be >= 1")
            _require(int(grid.get("lambda_count", 33)) >= 2, "lambda_count must be >= 2")
            _require(float(grid.get("lambda_padding", 0.2)) >= 0, "lambda_padding must be >= 0")

    def corpus_path(self) -> Path:
        p = Path(self.raw["instance"]["corpus"])
        return p if p.is_absolute() else self.base_dir / p

    # ------------------------------------------------------------ resolution
    def instance(self) -> Instance:
        inst = self.raw.get("instance", {"builtin": "E1"})
        source = self.instance_source
        if source == "builtin":
            return BUILTINS[inst["builtin"]]()
        if source == "models":
            models = ContextModelSet.from_dict(inst["models"])
            target = make_distribution(models.space, inst["target"]["probs"])
            return Instance(models, target, inst.get("name", "inline"))
        path = self.corpus_path()
        try:
            corpus = path.read_bytes()
        except OSError as exc:
            raise ConfigError(f"cannot read corpus {path}: {exc}") from None
        models, target = estimate_context_models(
            corpus,
            inst.get("orders", [0]),
            SmoothingConfig(float(inst.get("epsilon", 0.01))),
            int(inst.get("max_alphabet", 256)),
        )
        return Instance(models, target, str(path))

    def omega_values(self, models: ContextModelSet) -> tuple[np.ndarray, ...]:
        grid = self.raw.get("grid", {})
        if "omega" in grid:
            omegas = tuple(np.asarray(v, dtype=float) for v in grid["omega"])
            _require(len(omegas) == models.context_count,
                     f"grid has {len(omegas)} weight registers for {models.context_count} contexts")
            return omegas
        low, high = grid.get("omega_range", DEFAULT_OMEGA_RANGE)
        return omega_grid(models.context_count, int(grid.get("omega_count", 3)), low, high)

    def planned_grid_size(self, models: ContextModelSet) -> int:
        """Number of grid points the config asks for, computed without building lambda."""
        grid = self.raw.get("grid", {})
        size = int(np.prod([len(o) for o in self.omega_values(models)]))
        if grid.get("lambda") is not None:
            return size * len(grid["lambda"])
        return size * int(grid.get("lambda_count", 33))

    def grid_spec(self, models: ContextModelSet, with_lambda: bool = True) -> GridSpec:
        grid = self.raw.get("grid", {})
        omegas = self.omega_values(models)
        GridSpec(omegas)  # size check on the weight grid before building lambda
        if not with_lambda:
            return GridSpec(omegas)
        if grid.get("lambda") is not None:
            return GridSpec(omegas, grid["lambda"])
        count = int(grid.get("lambda_count", 33))
        _require(count * int(np.prod([len(o) for o in omegas])) <= GridSpec(omegas).cap,
                 "grid exceeds the enumeration cap")
        lams = auto_lambda_range(models, omegas, count, float(grid.get("lambda_padding", 0.2)))
        return GridSpec(omegas, lams)

    def alpha(self, inst: Instance, spec: GridSpec) -> float:
        """Explicit alpha (0 switches the penalty off), else the data-driven default."""
        if self.raw.get("alpha") is not None:
            alpha = float(self.raw["alpha"])
            return 0.0 if alpha == 0 else PenaltyConfig(alpha).alpha
        factor = float(self.raw.get("alpha_factor", DEFAULT_ALPHA_FACTOR))
        return default_alpha(inst.models, inst.target, spec, factor).alpha

    def normalized(self, inst: Instance, spec: GridSpec | None, alpha: float | None) -> dict:
        """Config with instance, grid and alpha made explicit, suitable for re-running."""
        out: dict[str, Any] = copy.deepcopy(self.raw)
        out.setdefault("solver", self.solver)
        out["seed"] = self.seed
        if self.instance_source == "builtin":
            out["instance"] = {"builtin": self.raw.get("instance", {"builtin": "E1"})["builtin"]}
        if spec is not None:
            out["grid"] = spec.to_dict()
            if out["grid"]["lambda"] is None:
                del out["grid"]["lambda"]
        if alpha is not None:
            out["alpha"] = alpha
            out.pop("alpha_factor", None)
        out.pop("out", None)
        return out
