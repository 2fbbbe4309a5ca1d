"""Finite grids over (lambda, w) and classical ground-state solvers on them.

Registers are ordered lambda first (when present), then one register per
context weight. Flat indices are row-major over that order, so lambda varies
slowest.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import GridTooLarge, IndexOutOfRange, InvalidGrid, Overflow
from .mixing import EXPONENT_CAP, PenaltyConfig, _check_target, lambda_of
from .models import ContextModelSet, Distribution

GRID_CAP = 2**20
TIE_TOL = 1e-12
DEFAULT_OMEGA_RANGE = (-2.0, 0.0)
DEFAULT_ALPHA_FACTOR = 50.0


def _value_set(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float).ravel()
    if arr.size == 0:
        raise InvalidGrid(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise InvalidGrid(f"{name} must be finite: {arr}")
    if np.any(np.diff(arr) <= 0.0):
        raise InvalidGrid(f"{name} must be strictly increasing: {arr}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class GridSpec:
    """Value sets for the lambda register and each weight register.

    ``lambda_values=None`` describes the lambda-free grid used when lambda is
    eliminated exactly through the partition function.
    """

    omega_values: tuple[np.ndarray, ...]
    lambda_values: np.ndarray | None = None
    cap: int = GRID_CAP

    def __post_init__(self):
        omegas = tuple(_value_set(v, f"omega[{i}]") for i, v in enumerate(self.omega_values))
        if not omegas:
            raise InvalidGrid("at least one weight register is required")
        object.__setattr__(self, "omega_values", omegas)
        if self.lambda_values is not None:
            object.__setattr__(self, "lambda_values", _value_set(self.lambda_values, "lambda"))
        if self.size > self.cap:
            raise GridTooLarge(f"grid has {self.size} points, cap is {self.cap}")

    @property
    def has_lambda(self) -> bool:
        return self.lambda_values is not None

    @property
    def registers(self) -> tuple[np.ndarray, ...]:
        if self.has_lambda:
            return (self.lambda_values,) + self.omega_values
        return self.omega_values

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(r) for r in self.registers)

    @property
    def size(self) -> int:
        return math.prod(self.shape)

    @property
    def context_count(self) -> int:
        return len(self.omega_values)

    def lambda_spacing(self) -> float:
        if not self.has_lambda or len(self.lambda_values) < 2:
            return 0.0
        return float(np.max(np.diff(self.lambda_values)))

    def point(self, flat: int) -> "GridPoint":
        return grid_point(self, flat)

    def values(self, point: "GridPoint") -> tuple[float | None, np.ndarray]:
        lam = None if point.lambda_index is None else float(self.lambda_values[point.lambda_index])
        w = np.array([om[k] for om, k in zip(self.omega_values, point.omega_indices)])
        return lam, w

    def value_arrays(self) -> tuple[np.ndarray | None, np.ndarray]:
        """Lambda values (or None) and weight rows for every flat index, in order."""
        mesh = np.meshgrid(*self.registers, indexing="ij")
        cols = [m.ravel() for m in mesh]
        if self.has_lambda:
            return cols[0], np.column_stack(cols[1:])
        return None, np.column_stack(cols)

    def to_dict(self) -> dict:
        return {
            "lambda": None if self.lambda_values is None else [float(v) for v in self.lambda_values],
            "omega": [[float(v) for v in om] for om in self.omega_values],
        }

    @classmethod
    def from_dict(cls, data: dict, cap: int = GRID_CAP) -> "GridSpec":
        return cls(tuple(data["omega"]), data.get("lambda"), cap)


@dataclass(frozen=True)
class GridPoint:
    lambda_index: int | None
    omega_indices: tuple[int, ...]

    def indices(self) -> tuple[int, ...]:
        head = () if self.lambda_index is None else (self.lambda_index,)
        return head + tuple(self.omega_indices)


@dataclass(frozen=True)
class SolveResult:
    point: GridPoint
    energy: float
    ties: int
    flat_index: int

    def to_dict(self, spec: GridSpec) -> dict:
        lam, w = spec.values(self.point)
        return {
            "flat_index": self.flat_index,
            "lambda_index": self.point.lambda_index,
            "omega_indices": list(self.point.omega_indices),
            "lambda": lam,
            "omega": [float(v) for v in w],
            "energy": self.energy,
            "ties": self.ties,
        }


def joint_index(spec: GridSpec, p: GridPoint) -> int:
    idx = p.indices()
    if len(idx) != len(spec.shape) or (p.lambda_index is None) == spec.has_lambda:
        raise IndexOutOfRange(f"point {p} does not match grid registers {spec.shape}")
    for k, n in zip(idx, spec.shape):
        if not 0 <= k < n:
            raise IndexOutOfRange(f"index {k} outside register of size {n}")
    return int(np.ravel_multi_index(idx, spec.shape))


def grid_point(spec: GridSpec, flat: int) -> GridPoint:
    if not 0 <= flat < spec.size:
        raise IndexOutOfRange(f"flat index {flat} outside [0, {spec.size})")
    idx = tuple(int(k) for k in np.unravel_index(flat, spec.shape))
    if spec.has_lambda:
        return GridPoint(idx[0], idx[1:])
    return GridPoint(None, idx)


def omega_grid(context_count: int, count: int = 3, low: float = DEFAULT_OMEGA_RANGE[0],
               high: float = DEFAULT_OMEGA_RANGE[1]) -> tuple[np.ndarray, ...]:
    """Identical evenly spaced weight registers, by default spanning [-2, 0]."""
    if count < 1:
        raise InvalidGrid("weight grids need at least one point")
    values = np.linspace(low, high, count) if count > 1 else np.array([0.5 * (low + high)])
    return tuple(values.copy() for _ in range(context_count))


def auto_lambda_range(
    models: ContextModelSet,
    omega_values: Sequence[Sequence[float]],
    count: int,
    padding: float = 0.0,
) -> np.ndarray:
    """Evenly spaced lambda values bracketing ``lambda_of(w)`` over the whole weight grid."""
    if count < 2:
        raise InvalidGrid(f"lambda grid needs at least 2 points, got {count}")
    if padding < 0:
        raise InvalidGrid(f"padding must be >= 0, got {padding}")
    _, weights = GridSpec(tuple(omega_values)).value_arrays()
    lams = -logsumexp(weights @ models.code_lengths, axis=1)
    if not np.all(np.isfinite(lams)) or np.max(np.abs(lams)) > EXPONENT_CAP:
        raise Overflow("lambda range exceeds the exponent cap")
    return np.linspace(lams.min() - padding, lams.max() + padding, count)


# ---------------------------------------------------------------- energy tables

def constrained_table(models: ContextModelSet, target: Distribution, spec: GridSpec) -> np.ndarray:
    """Cross-entropy objective for every weight point of a lambda-free grid."""
    _check_target(models, target)
    _, weights = spec.value_arrays()
    a = weights @ models.code_lengths
    return logsumexp(a, axis=1) - a @ target.probs


def unconstrained_table(models: ContextModelSet, target: Distribution, spec: GridSpec) -> np.ndarray:
    _check_target(models, target)
    lams, weights = spec.value_arrays()
    if lams is None:
        raise InvalidGrid("unconstrained objective needs a lambda register")
    return -lams - weights @ (models.code_lengths @ target.probs)


def normalization_table(models: ContextModelSet, spec: GridSpec) -> np.ndarray:
    lams, weights = spec.value_arrays()
    s = lams[:, None] + weights @ models.code_lengths
    top = float(np.max(s))
    if top > EXPONENT_CAP:
        raise Overflow(f"exponent {top:.6g} exceeds the cap {EXPONENT_CAP}")
    return np.exp(s).sum(axis=1)


def penalized_table(
    models: ContextModelSet, target: Distribution, spec: GridSpec, penalty: PenaltyConfig | float
) -> np.ndarray:
    """Penalized energy for every (lambda, w) grid point. ``penalty`` 0 drops the term."""
    alpha = penalty.alpha if isinstance(penalty, PenaltyConfig) else float(penalty)
    base = unconstrained_table(models, target, spec)
    if alpha == 0.0:
        return base
    excess = normalization_table(models, spec) - 1.0
    return base + alpha * excess * excess


def default_alpha(models: ContextModelSet, target: Distribution, spec: GridSpec,
                  factor: float = DEFAULT_ALPHA_FACTOR) -> PenaltyConfig:
    """Penalty strength ``factor * (max E' - min E')`` over the grid."""
    table = unconstrained_table(models, target, spec)
    spread = float(table.max() - table.min())
    return PenaltyConfig(factor * spread if spread > 0 else factor)


# ---------------------------------------------------------------- solvers

def minimize_table(energies: np.ndarray, spec: GridSpec, tol: float = TIE_TOL) -> SolveResult:
    """Exact minimum of a full energy table; ties go to the smallest flat index."""
    energies = np.asarray(energies, dtype=float)
    if energies.shape != (spec.size,):
        raise InvalidGrid(f"energy table has shape {energies.shape}, grid size is {spec.size}")
    low = float(energies.min())
    tied = energies <= low + tol
    flat = int(np.argmax(tied))
    return SolveResult(grid_point(spec, flat), float(energies[flat]), int(tied.sum()), flat)


def enumerate_objective(objective: Callable[[GridPoint], float], spec: GridSpec) -> np.ndarray:
    return np.array([objective(grid_point(spec, k)) for k in range(spec.size)], dtype=float)


def brute_force_minimize(objective: Callable[[GridPoint], float], spec: GridSpec) -> SolveResult:
    """Exhaustive ground-state search over every grid point."""
    if spec.size > GRID_CAP:
        raise GridTooLarge(f"grid has {spec.size} points, enumeration cap is {GRID_CAP}")
    return minimize_table(enumerate_objective(objective, spec), spec)


def constrained_grid_minimize(
    models: ContextModelSet, target: Distribution, omega_values: Sequence[Sequence[float]]
) -> SolveResult:
    """Minimize the cross-entropy objective over the weight grid, lambda eliminated exactly."""
    spec = GridSpec(tuple(omega_values))
    return minimize_table(constrained_table(models, target, spec), spec)


def constrained_lambda(models: ContextModelSet, spec: GridSpec, point: GridPoint) -> float:
    return lambda_of(models, spec.values(point)[1])


@dataclass(frozen=True)
class CoolingSchedule:
    """Geometric cooling from ``t_start`` to ``t_end`` over ``steps`` proposals.

    Temperatures left as None are calibrated from the objective: ``t_start``
    from the mean uphill move on random probes, ``t_end`` as ``t_start * 1e-6``.
    """

    t_start: float | None = None
    t_end: float | None = None
    steps: int = 20000
    probes: int = 64


def _neighbours(idx: tuple[int, ...], shape: tuple[int, ...]) -> list[tuple[int, ...]]:
    out = []
    for r, n in enumerate(shape):
        for step in (-1, 1):
            k = idx[r] + step
            if 0 <= k < n:
                out.append(idx[:r] + (k,) + idx[r + 1:])
    return out


def simulated_annealing_minimize(
    objective: Callable[[GridPoint], float],
    spec: GridSpec,
    seed: int = 0,
    schedule: CoolingSchedule = CoolingSchedule(),
) -> SolveResult:
    """Metropolis search with single-register moves to adjacent grid values.

    Deterministic for a given seed. Returns the best point seen; ``ties``
    counts visited points within the tie tolerance of it.
    """
    rng = np.random.default_rng(seed)
    shape = spec.shape
    cache: dict[tuple[int, ...], float] = {}

    def energy(idx):
        if idx not in cache:
            cache[idx] = float(objective(_to_point(spec, idx)))
        return cache[idx]

    def random_index():
        return tuple(int(rng.integers(n)) for n in shape)

    if spec.size == 1:
        idx = (0,) * len(shape)
        return SolveResult(_to_point(spec, idx), energy(idx), 1, 0)

    t_start, t_end = schedule.t_start, schedule.t_end
    if t_start is None:
        uphill = []
        for _ in range(schedule.probes):
            idx = random_index()
            nb = _neighbours(idx, shape)
            d = energy(nb[rng.integers(len(nb))]) - energy(idx)
            if d != 0.0:
                uphill.append(abs(d))
        # initial acceptance of an average uphill move about 0.8
        t_start = (np.mean(uphill) if uphill else 1.0) / -math.log(0.8)
    if t_end is None:
        t_end = t_start * 1e-6
    cooling = (t_end / t_start) ** (1.0 / max(schedule.steps - 1, 1))

    current = random_index()
    e_cur = energy(current)
    best, e_best = current, e_cur
    temp = t_start
    for _ in range(schedule.steps):
        nb = _neighbours(current, shape)
        cand = nb[rng.integers(len(nb))]
        e_cand = energy(cand)
        delta = e_cand - e_cur
        if delta <= 0.0 or rng.random() < math.exp(-delta / temp):
            current, e_cur = cand, e_cand
            if e_cur < e_best or (e_cur == e_best and cand < best):
                best, e_best = cand, e_cur
        temp *= cooling

    ties = sum(1 for e in cache.values() if e <= e_best + TIE_TOL)
    flat = int(np.ravel_multi_index(best, shape))
    return SolveResult(_to_point(spec, best), e_best, ties, flat)


def _to_point(spec: GridSpec, idx: tuple[int, ...]) -> GridPoint:
    if spec.has_lambda:
        return GridPoint(idx[0], tuple(idx[1:]))
    return GridPoint(None, tuple(idx))


def objective_from_table(table: np.ndarray, spec: GridSpec) -> Callable[[GridPoint], float]:
    """Wrap a precomputed energy table as a point objective."""
    return lambda p: float(table[joint_index(spec, p)])
