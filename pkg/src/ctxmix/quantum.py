"""Dense simulation of linear-schedule quantum annealing on the (lambda, w) grid.

The problem Hamiltonian is diagonal in the grid basis. The driver is a sum of
path-graph hoppings, one per register, so its propagator factorizes into small
per-register matrices. Units: hbar = 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceFailure, DimensionMismatch, GridTooLarge, StepTooLarge, ValidationError
from .grids import GRID_CAP, TIE_TOL, GridSpec, penalized_table, unconstrained_table
from .mixing import PenaltyConfig
from .models import ContextModelSet, Distribution

DENSE_CAP = 4096
# below this dimension the driver propagator is applied in its dense eigenbasis
SMALL_DRIVER = 512
NORM_TOL = 1e-9
DRIFT_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class DiagonalHamiltonian:
    spec: GridSpec
    energies: np.ndarray

    def __post_init__(self):
        e = np.array(self.energies, dtype=float)
        if e.shape != (self.spec.size,):
            raise DimensionMismatch(f"{e.shape} energies for a grid of {self.spec.size} points")
        if not np.all(np.isfinite(e)):
            raise ValidationError("Hamiltonian energies must be finite")
        e.setflags(write=False)
        object.__setattr__(self, "energies", e)

    @property
    def dim(self) -> int:
        return self.energies.shape[0]

    def ground_set(self, tol: float = TIE_TOL) -> np.ndarray:
        return np.flatnonzero(self.energies <= self.energies.min() + tol)


def _check_size(spec: GridSpec, cap: int = GRID_CAP) -> None:
    if spec.size > cap:
        raise GridTooLarge(f"grid has {spec.size} points, cap is {cap}")


def build_diagonal_hamiltonian(models: ContextModelSet, target: Distribution, spec: GridSpec,
                               penalty: PenaltyConfig | float) -> DiagonalHamiltonian:
    _check_size(spec)
    return DiagonalHamiltonian(spec, penalized_table(models, target, spec, penalty))


def build_unpenalized_hamiltonian(models: ContextModelSet, target: Distribution,
                                  spec: GridSpec) -> DiagonalHamiltonian:
    """Diagonal of the unpenalized problem; its ground state always sits at the top lambda."""
    _check_size(spec)
    return DiagonalHamiltonian(spec, unconstrained_table(models, target, spec))


def path_hopping(n: int, amplitude: float = 1.0) -> np.ndarray:
    a = np.zeros((n, n))
    k = np.arange(n - 1)
    a[k, k + 1] = a[k + 1, k] = -amplitude
    return a


@dataclass(frozen=True, eq=False)
class DriverHamiltonian:
    """Kronecker sum of nearest-neighbour hoppings, one path graph per register."""

    spec: GridSpec
    amplitude: float = 1.0
    _eig: tuple = field(init=False, repr=False)
    _dense: tuple | None = field(init=False, repr=False)

    def __post_init__(self):
        eig = tuple(np.linalg.eigh(path_hopping(n, self.amplitude)) for n in self.spec.shape)
        object.__setattr__(self, "_eig", eig)
        dense = None
        if self.spec.size <= SMALL_DRIVER:
            levels, vectors = np.zeros(1), np.ones((1, 1))
            for lam, q in eig:
                levels = np.add.outer(levels, lam).ravel()
                vectors = np.kron(vectors, q)
            dense = (levels, vectors)
        object.__setattr__(self, "_dense", dense)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.spec.shape

    @property
    def dim(self) -> int:
        return self.spec.size

    def register_matrices(self) -> list[np.ndarray]:
        return [path_hopping(n, self.amplitude) for n in self.shape]

    def matrix(self) -> np.ndarray:
        if self.dim > DENSE_CAP:
            raise GridTooLarge(f"dense driver of dimension {self.dim} exceeds {DENSE_CAP}")
        out = np.zeros((self.dim, self.dim))
        for r, a in enumerate(self.register_matrices()):
            before = math.prod(self.shape[:r])
            after = math.prod(self.shape[r + 1:])
            out += np.kron(np.kron(np.eye(before), a), np.eye(after))
        return out

    def apply(self, psi: np.ndarray) -> np.ndarray:
        """``V psi`` for a vector (or a stack whose leading axis is the grid index)."""
        return self._apply_factors(psi, self.register_matrices(), accumulate=True)

    def propagator_factors(self, theta: float) -> list[np.ndarray]:
        """Per-register factors of ``exp(-i theta V)``."""
        return [(q * np.exp(-1j * theta * lam)) @ q.T for lam, q in self._eig]

    def evolve(self, psi: np.ndarray, theta: float) -> np.ndarray:
        """``exp(-i theta V) psi``."""
        if self._dense is not None:
            levels, q = self._dense
            phase = np.exp(-1j * theta * levels)
            coeffs = q.T @ psi
            if psi.ndim > 1:
                phase = phase.reshape((-1,) + (1,) * (psi.ndim - 1))
            return q @ (phase * coeffs)
        return self._apply_factors(psi, self.propagator_factors(theta), accumulate=False)

    def _apply_factors(self, psi, factors, accumulate):
        psi = np.asarray(psi)
        rest = psi.shape[1:]
        t = psi.reshape(self.shape + rest)
        if accumulate:
            total = np.zeros(t.shape, dtype=np.result_type(t, float))
            for r, a in enumerate(factors):
                total += np.moveaxis(np.tensordot(a, t, axes=([1], [r])), 0, r)
            return total.reshape(psi.shape)
        for r, a in enumerate(factors):
            t = np.moveaxis(np.tensordot(a, t, axes=([1], [r])), 0, r)
        return t.reshape(psi.shape)

    def ground_energy(self) -> float:
        return float(sum(lam[0] for lam, _ in self._eig))

    def spectral_gap(self) -> float:
        gaps = [lam[1] - lam[0] for lam, _ in self._eig if len(lam) > 1]
        return float(min(gaps)) if gaps else 0.0


def build_driver(spec: GridSpec, amplitude: float = 1.0) -> DriverHamiltonian:
    return DriverHamiltonian(spec, amplitude)


class StateVector:
    """Unit-norm complex amplitudes over grid points."""

    def __init__(self, amplitudes, tol: float = NORM_TOL):
        amps = np.array(amplitudes, dtype=complex).ravel()
        norm2 = float(np.vdot(amps, amps).real)
        if abs(norm2 - 1.0) > tol:
            raise ValidationError(f"state has squared norm {norm2}")
        amps.setflags(write=False)
        self.amplitudes = amps

    def __len__(self) -> int:
        return self.amplitudes.shape[0]

    @property
    def populations(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def density(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())


def driver_ground_state(v: DriverHamiltonian) -> StateVector:
    """Product of the per-register path-graph ground states, sign-fixed positive."""
    psi = np.ones(1)
    for lam, q in v._eig:
        g = q[:, 0]
        psi = np.kron(psi, g if g.sum() > 0 else -g)
    residual = np.linalg.norm(v.apply(psi) - v.ground_energy() * psi)
    if residual > 1e-10 or np.any(psi <= 0.0):
        raise ConvergenceFailure(f"driver ground state residual {residual:.3g}")
    return StateVector(psi / np.linalg.norm(psi))


@dataclass(frozen=True)
class AnnealSchedule:
    """Linear interpolation ``s = t/T`` from the driver (s=0) to the problem (s=1)."""

    total_time: float
    dt: float

    def __post_init__(self):
        if not self.total_time > 0:
            raise ValidationError(f"total time must be > 0, got {self.total_time}")
        if not 0 < self.dt <= self.total_time:
            raise ValidationError(f"need 0 < dt <= T, got dt={self.dt}, T={self.total_time}")
        n = round(self.total_time / self.dt)
        if abs(n * self.dt - self.total_time) > 1e-9 * self.total_time:
            raise ValidationError(f"T={self.total_time} is not a whole number of steps dt={self.dt}")

    @property
    def steps(self) -> int:
        return round(self.total_time / self.dt)

    def s(self, t: float) -> float:
        return t / self.total_time


@dataclass
class Evolution:
    state: StateVector
    # (t, s, amplitudes) snapshots, including t=0 and t=T, when sampling was requested
    samples: list = field(default_factory=list)


def split_step(psi, energies, v: DriverHamiltonian, s_mid: float, dt: float):
    """One symmetric step: problem half-step, driver full step, problem half-step."""
    half = np.exp(-0.5j * dt * s_mid * energies)
    if psi.ndim > 1:
        half = half.reshape((-1,) + (1,) * (psi.ndim - 1))
    psi = half * psi
    psi = v.evolve(psi, (1.0 - s_mid) * dt)
    return half * psi


def evolve_schedule(h: DiagonalHamiltonian, v: DriverHamiltonian, sched: AnnealSchedule,
                    psi0: StateVector, sample_every: int | None = None) -> Evolution:
    """Integrate ``i d/dt psi = (s H + (1 - s) V) psi`` from ``psi0`` over the schedule.

    Each step evaluates the schedule at its midpoint and applies a symmetric
    split of the diagonal and driver parts, so every factor is exactly unitary.
    """
    if h.dim != v.dim or len(psi0) != h.dim:
        raise DimensionMismatch("Hamiltonian, driver and state dimensions differ")
    psi = np.array(psi0.amplitudes)
    n, dt = sched.steps, sched.dt
    samples = []
    if sample_every:
        samples.append((0.0, 0.0, psi.copy()))
    for k in range(n):
        s_mid = sched.s((k + 0.5) * dt)
        psi = split_step(psi, h.energies, v, s_mid, dt)
        if sample_every and ((k + 1) % sample_every == 0 or k + 1 == n):
            t = (k + 1) * dt
            if not samples or samples[-1][0] != t:
                samples.append((t, sched.s(t), psi / np.linalg.norm(psi)))
    norm = float(np.linalg.norm(psi))
    if abs(norm - 1.0) > DRIFT_TOL:
        raise StepTooLarge(f"norm drifted to {norm} over {n} steps")
    return Evolution(StateVector(psi / norm), samples)


def success_probability(psi: StateVector | np.ndarray, ground_set) -> float:
    amps = psi.amplitudes if isinstance(psi, StateVector) else np.asarray(psi)
    idx = np.asarray(list(ground_set), dtype=int)
    if idx.size and (idx.min() < 0 or idx.max() >= amps.shape[0]):
        raise DimensionMismatch("ground-set index outside the state")
    return float(np.sum(np.abs(amps[idx]) ** 2))


def energy_expectation(psi, h: DiagonalHamiltonian) -> float:
    amps = psi.amplitudes if isinstance(psi, StateVector) else np.asarray(psi)
    return float(np.abs(amps) ** 2 @ h.energies)


def instantaneous_hamiltonian(h: DiagonalHamiltonian, v: DriverHamiltonian, s: float) -> np.ndarray:
    return s * np.diag(h.energies) + (1.0 - s) * v.matrix()


def minimum_gap_diagnostic(h: DiagonalHamiltonian, v: DriverHamiltonian, samples: int = 101,
                           degeneracy: int = 1) -> list[tuple[float, float]]:
    """Level gaps of ``s H + (1 - s) V`` on ``samples`` evenly spaced ``s``.

    With the default ``degeneracy=1`` this is the gap between the two lowest
    levels. A ``g``-fold degenerate final ground space closes that gap at
    ``s = 1``; passing ``degeneracy=g`` reports ``max_{1<=k<=g} e[k] - e[k-1]``
    instead, the widest gap cutting off at most ``g`` low levels from the rest.
    That is the driver gap near ``s = 0`` and the band gap ``e[g] - e[g-1]``
    once the ground manifold has formed, and it ignores degenerate excited
    driver levels at ``s = 0``.
    """
    if h.dim > DENSE_CAP:
        raise GridTooLarge(f"dense eigensolve of dimension {h.dim} exceeds {DENSE_CAP}")
    grid = np.linspace(0.0, 1.0, samples)
    if h.dim <= degeneracy:
        return [(float(s), 0.0) for s in grid]
    vm = v.matrix()
    out = []
    for s in grid:
        ev = np.linalg.eigvalsh(s * np.diag(h.energies) + (1.0 - s) * vm)
        out.append((float(s), float(np.max(np.diff(ev[:degeneracy + 1])))))
    return out
