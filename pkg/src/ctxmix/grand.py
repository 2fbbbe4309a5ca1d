"""The grand Hamiltonian on grid (x) three symbol registers, and resupply dynamics.

Basis ordering of the grand space: grid flat index slowest, then the symbol
registers x0, x1, x2. The grand Hamiltonian is diagonal in this basis.
Averaging it against nu = mu (x) I/|X| (x) I/|X| over the three registers
gives back the penalized grid Hamiltonian exactly. Evolving the full space
and then re-imposing the product form with a fresh nu after every interval
reproduces the effective grid dynamics up to an error linear in the interval.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, GridTooLarge, Overflow, StepTooLarge, ValidationError
from .grids import GridSpec
from .mixing import EXPONENT_CAP, PenaltyConfig
from .models import ContextModelSet, Distribution, SampleSpace
from .quantum import (
    DRIFT_TOL,
    AnnealSchedule,
    DiagonalHamiltonian,
    DriverHamiltonian,
    StateVector,
    build_diagonal_hamiltonian,
    build_driver,
    driver_ground_state,
    evolve_schedule,
)

GRAND_CAP = 4096
REGISTERS = ("x0", "x1", "x2")
HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-10
PSD_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class GrandSpaceLayout:
    grid: GridSpec
    space: SampleSpace
    cap: int = GRAND_CAP

    def __post_init__(self):
        if self.dim > self.cap:
            raise GridTooLarge(f"grand dimension {self.dim} exceeds the dense cap {self.cap}")

    @property
    def symbols(self) -> int:
        return self.space.size

    @property
    def register_dim(self) -> int:
        return self.symbols**3

    @property
    def dim(self) -> int:
        return self.grid.size * self.symbols**3

    @property
    def factor_dims(self) -> dict[str, int]:
        x = self.symbols
        return {"grid": self.grid.size, "x0": x, "x1": x, "x2": x}


class DensityOperator:
    """Hermitian, positive semidefinite, unit-trace matrix.

    ``factors`` names the tensor factors in order, e.g. ``("grid", "x0", "x1", "x2")``.
    """

    def __init__(self, matrix, factors: tuple[str, ...] = ("grid",), dims: tuple[int, ...] | None = None,
                 check: bool = True):
        m = np.array(matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionMismatch(f"density matrix must be square, got {m.shape}")
        if dims is None:
            dims = (m.shape[0],) if len(factors) == 1 else None
        if dims is None or len(dims) != len(factors) or math.prod(dims) != m.shape[0]:
            raise DimensionMismatch(f"factor dims {dims} do not match matrix of size {m.shape[0]}")
        self.matrix = m
        self.factors = tuple(factors)
        self.dims = tuple(int(d) for d in dims)
        if check:
            self.validate()

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def validate(self) -> None:
        m = self.matrix
        if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL:
            raise ValidationError("density matrix is not Hermitian")
        tr = np.trace(m)
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValidationError(f"density matrix has trace {tr}")
        low = float(np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0])
        if low < -PSD_TOL:
            raise ValidationError(f"density matrix has eigenvalue {low}")

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T))[0])

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def tensor(self, other: "DensityOperator", check: bool = False) -> "DensityOperator":
        return DensityOperator(np.kron(self.matrix, other.matrix), self.factors + other.factors,
                               self.dims + other.dims, check=check)


def pure_density(psi: StateVector) -> DensityOperator:
    return DensityOperator(psi.density())


def build_nu(target: Distribution, layout: GrandSpaceLayout) -> DensityOperator:
    """``mu (x) I/|X| (x) I/|X|`` on the three symbol registers."""
    if target.space != layout.space:
        raise DimensionMismatch("target distribution and layout use different sample spaces")
    x = layout.symbols
    weights = np.kron(target.probs, np.full(x * x, 1.0 / (x * x)))
    return DensityOperator(np.diag(weights), REGISTERS, (x, x, x))


@dataclass(frozen=True, eq=False)
class GrandHamiltonian:
    """Diagonal of the grand Hamiltonian, stored with shape (grid, x0, x1, x2)."""

    layout: GrandSpaceLayout
    energies: np.ndarray

    @property
    def flat(self) -> np.ndarray:
        return self.energies.ravel()

    @property
    def dim(self) -> int:
        return self.energies.size


def build_grand_hamiltonian(models: ContextModelSet, layout: GrandSpaceLayout,
                            penalty: PenaltyConfig | float) -> GrandHamiltonian:
    """Entry at (lambda, w, x, x', x''):

        -(lam + a(x)) + alpha * (|X|^2 e^{lam + a(x')} e^{lam + a(x'')} - 2|X| e^{lam + a(x')} + 1)

    with ``a(x) = sum_i w_i eta_i(x)``.
    """
    if models.space != layout.space:
        raise DimensionMismatch("models and layout use different sample spaces")
    spec = layout.grid
    if spec.size * layout.register_dim > layout.cap:
        raise GridTooLarge(f"grand dimension exceeds the dense cap {layout.cap}")
    alpha = penalty.alpha if isinstance(penalty, PenaltyConfig) else float(penalty)
    lams, weights = spec.value_arrays()
    if lams is None:
        raise ValidationError("the grand Hamiltonian needs a lambda register")
    s = lams[:, None] + weights @ models.code_lengths  # (grid, x)
    x = layout.symbols
    linear = -s[:, :, None, None]
    if alpha == 0.0:
        energies = np.broadcast_to(linear, (spec.size, x, x, x)).copy()
    else:
        if float(np.max(s)) > EXPONENT_CAP:
            raise Overflow(f"exponent {np.max(s):.6g} exceeds the cap {EXPONENT_CAP}")
        e = np.exp(s)
        e1 = e[:, None, :, None]
        e2 = e[:, None, None, :]
        energies = linear + alpha * (x * x * e1 * e2 - 2 * x * e1 + 1.0)
    energies.setflags(write=False)
    return GrandHamiltonian(layout, energies)


def partial_trace_dims(matrix: np.ndarray, dims: tuple[int, ...], keep: tuple[int, ...]) -> np.ndarray:
    """Trace out every tensor factor whose position is not in ``keep``."""
    n = len(dims)
    t = matrix.reshape(dims + dims)
    row = list(range(n))
    col = [i if i not in keep else n + i for i in range(n)]
    out_axes = [i for i in range(n) if i in keep] + [n + i for i in range(n) if i in keep]
    reduced = np.einsum(t, row + col, out_axes)
    d = math.prod(dims[i] for i in keep)
    return reduced.reshape(d, d)


def partial_trace(rho: DensityOperator, keep) -> DensityOperator:
    """Reduced state on the factors named in ``keep`` (a name or an iterable of names)."""
    names = (keep,) if isinstance(keep, str) else tuple(keep)
    unknown = set(names) - set(rho.factors)
    if unknown:
        raise DimensionMismatch(f"unknown factors {sorted(unknown)}; state has {rho.factors}")
    idx = tuple(i for i, f in enumerate(rho.factors) if f in names)
    if not idx:
        return DensityOperator(np.array([[np.trace(rho.matrix)]]), ("scalar",), (1,), check=False)
    reduced = partial_trace_dims(rho.matrix, rho.dims, idx)
    return DensityOperator(reduced, tuple(rho.factors[i] for i in idx),
                           tuple(rho.dims[i] for i in idx), check=False)


def effective_hamiltonian_via_trace(g: GrandHamiltonian, nu: DensityOperator,
                                    layout: GrandSpaceLayout) -> DiagonalHamiltonian:
    """Register trace of ``(I (x) nu) G``, returned as a diagonal grid Hamiltonian.

    Both operators are diagonal, so the trace is the nu-weighted sum of the
    grand diagonal over register configurations for each grid point.
    """
    if nu.dim != layout.register_dim or g.dim != layout.dim:
        raise DimensionMismatch("nu, grand Hamiltonian and layout dimensions disagree")
    nu_diag = np.real(np.diag(nu.matrix))
    weighted = g.energies.reshape(layout.grid.size, layout.register_dim) * nu_diag[None, :]
    return DiagonalHamiltonian(layout.grid, weighted.sum(axis=1))


@dataclass(frozen=True)
class ResupplyConfig:
    """Interval between fresh copies of nu, and integrator steps inside each interval."""

    dt_resupply: float
    inner_steps: int = 64

    def __post_init__(self):
        if not self.dt_resupply > 0:
            raise ValidationError(f"resupply interval must be > 0, got {self.dt_resupply}")
        if self.inner_steps < 1:
            raise ValidationError("need at least one inner step per interval")

    def intervals(self, total_time: float) -> int:
        n = round(total_time / self.dt_resupply)
        if n < 1 or abs(n * self.dt_resupply - total_time) > 1e-9 * total_time:
            raise ValidationError(
                f"resupply interval {self.dt_resupply} does not divide T={total_time}"
            )
        return n


def _grand_split_step(m: np.ndarray, energies: np.ndarray, v: DriverHamiltonian,
                      grid_dim: int, s_mid: float, h: float) -> np.ndarray:
    """Apply one symmetric split step of ``s G + (1 - s) V (x) I`` to the columns of ``m``."""
    half = np.exp(-0.5j * h * s_mid * energies)[:, None]
    m = half * m
    cols = m.shape[1]
    m = v.evolve(m.reshape(grid_dim, -1), (1.0 - s_mid) * h).reshape(-1, cols)
    return half * m


@dataclass
class ResupplyRun:
    times: list
    reduced: list  # DensityOperator on the grid after each interval


def evolve_grand_with_resupply(g: GrandHamiltonian, v: DriverHamiltonian, nu: DensityOperator,
                               layout: GrandSpaceLayout, sched: AnnealSchedule,
                               resupply: ResupplyConfig, psi0: StateVector) -> ResupplyRun:
    """Evolve ``|psi0><psi0| (x) nu`` on the grand space, resupplying nu every interval.

    Each interval integrates ``s G + (1 - s) V (x) I`` with ``inner_steps``
    symmetric split steps, then replaces the state by
    ``tr_registers(rho) (x) nu``. Time advances continuously across intervals.
    """
    if g.layout is not layout and g.dim != layout.dim:
        raise DimensionMismatch("grand Hamiltonian does not match the layout")
    n_grid = layout.grid.size
    if v.dim != n_grid or len(psi0) != n_grid or nu.dim != layout.register_dim:
        raise DimensionMismatch("driver, initial state or nu do not match the layout")
    intervals = resupply.intervals(sched.total_time)
    h = resupply.dt_resupply / resupply.inner_steps
    energies = g.flat
    grand_dims = (n_grid, layout.register_dim)
    nu_m = nu.matrix

    reduced = psi0.density()
    times, states = [], []
    for j in range(intervals):
        rho = np.kron(reduced, nu_m)
        t0 = j * resupply.dt_resupply
        for k in range(resupply.inner_steps):
            s_mid = sched.s(t0 + (k + 0.5) * h)
            rho = _grand_split_step(rho, energies, v, n_grid, s_mid, h)
            rho = _grand_split_step(rho.conj().T, energies, v, n_grid, s_mid, h).conj().T
        reduced = partial_trace_dims(rho, grand_dims, (0,))
        drift = abs(np.trace(reduced) - 1.0)
        if drift > DRIFT_TOL:
            raise StepTooLarge(f"trace drifted by {drift:.3g} in interval {j}")
        reduced = 0.5 * (reduced + reduced.conj().T)
        times.append((j + 1) * resupply.dt_resupply)
        states.append(DensityOperator(reduced, check=False))
    return ResupplyRun(times, states)


def compare_dynamics(reduced: DensityOperator, reference: StateVector) -> float:
    """Trace distance ``0.5 * || rho - |ref><ref| ||_1``."""
    if reduced.dim != len(reference):
        raise DimensionMismatch("reduced state and reference have different dimensions")
    diff = reduced.matrix - reference.density()
    ev = np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))
    return float(0.5 * np.sum(np.abs(ev)))


def reference_dynamics(h_eff: DiagonalHamiltonian, v: DriverHamiltonian, total_time: float,
                       dt_resupply: float, psi0: StateVector, refine: int = 64) -> StateVector:
    """Effective grid dynamics integrated at ``dt_resupply / refine``."""
    return evolve_schedule(h_eff, v, AnnealSchedule(total_time, dt_resupply / refine), psi0).state


def resupply_error_scaling(models: ContextModelSet, target: Distribution, spec: GridSpec,
                           penalty: PenaltyConfig | float, total_time: float, dts,
                           inner_steps: int = 64) -> list[dict]:
    """Trace distance at ``t = T`` between resupplied and effective dynamics, per interval.

    Rows carry ``dt``, ``trace_distance`` and ``ratio_vs_prev`` (previous
    row's distance over this row's; None on the first row).
    """
    layout = GrandSpaceLayout(spec, models.space)
    g = build_grand_hamiltonian(models, layout, penalty)
    nu = build_nu(target, layout)
    h_eff = build_diagonal_hamiltonian(models, target, spec, penalty)
    v = build_driver(spec)
    psi0 = driver_ground_state(v)
    rows, prev = [], None
    for dt in dts:
        sched = AnnealSchedule(total_time, dt)
        run = evolve_grand_with_resupply(g, v, nu, layout, sched, ResupplyConfig(dt, inner_steps), psi0)
        ref = reference_dynamics(h_eff, v, total_time, dt, psi0, inner_steps)
        err = compare_dynamics(run.reduced[-1], ref)
        rows.append({"dt": float(dt), "trace_distance": err,
                     "ratio_vs_prev": None if prev is None or err == 0 else prev / err})
        prev = err
    return rows
