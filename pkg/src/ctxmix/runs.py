"""Command implementations behind the CLI. Each returns a JSON-ready report dict.

Reports contain no wall-clock data so that a re-run of the echoed config is
byte-identical; timings are returned separately.
"""
from __future__ import annotations

import time
from typing import Any

import numpy as np

from . import grand, grids, mixing, quantum
from .config import ExperimentConfig
from .errors import ConfigError, GridTooLarge
from .grids import CoolingSchedule, GridSpec
from .instances import Instance
from .models import entropy


def _instance_dict(inst: Instance) -> dict:
    out = inst.models.to_dict()
    out["target"] = [float(p) for p in inst.target.probs]
    return out


def _mixture_summary(inst: Instance, w) -> dict:
    models, target = inst.models, inst.target
    mix = mixing.max_entropy_mix(models, w)
    return {
        "mixture": [float(p) for p in mix.probs],
        "cross_entropy": mixing.cross_entropy_objective(models, target, w),
        "divergence": mixing.divergence_objective(models, target, w),
        "target_entropy": entropy(target),
        "lambda_of_omega": mixing.lambda_of(models, w),
        "mean_code_length": [mixing.mean_code_length(models, w, i) for i in range(models.context_count)],
        "excess_code_length": [mixing.excess_code_length(models, w, i) for i in range(models.context_count)],
    }


def models_command(cfg: ExperimentConfig) -> tuple[dict, dict]:
    if cfg.instance_source != "corpus":
        raise ConfigError("the models command needs a corpus instance source")
    inst = cfg.instance()
    report = {
        "command": "models",
        "config": cfg.normalized(inst, None, None),
        "models": inst.models.to_dict(),
        "target": inst.target.to_dict(),
    }
    return report, {}


def solve_command(cfg: ExperimentConfig) -> tuple[dict, dict]:
    start = time.perf_counter()
    inst = cfg.instance()
    models, target = inst.models, inst.target
    solver = cfg.solver
    diagnostics: dict[str, Any] = {}
    if solver == "brute":
        spec = cfg.grid_spec(models, with_lambda=False)
        alpha = None
        result = grids.minimize_table(grids.constrained_table(models, target, spec), spec)
        objective = "cross_entropy"
    elif solver in ("brute_penalized", "sa"):
        spec = cfg.grid_spec(models)
        alpha = cfg.alpha(inst, spec)
        table = grids.penalized_table(models, target, spec, alpha)
        objective = "penalized"
        if solver == "brute_penalized":
            result = grids.minimize_table(table, spec)
        else:
            sa = cfg.raw.get("sa", {})
            schedule = CoolingSchedule(sa.get("t_start"), sa.get("t_end"), int(sa.get("steps", 20000)))
            result = grids.simulated_annealing_minimize(
                grids.objective_from_table(table, spec), spec, cfg.seed, schedule)
            diagnostics["brute_force_energy"] = float(table.min())
        lam, w = spec.values(result.point)
        diagnostics["normalization_residual"] = mixing.normalization_sum(models, lam, w) - 1.0
        diagnostics["lambda_spacing"] = spec.lambda_spacing()
        ref = grids.constrained_grid_minimize(models, target, spec.omega_values)
        diagnostics["constrained_reference"] = ref.to_dict(GridSpec(spec.omega_values))
    else:
        raise ConfigError(f"solve does not run solver {solver!r}")
    _, w = spec.values(result.point)
    report = {
        "command": "solve",
        "config": cfg.normalized(inst, spec, alpha),
        "instance": _instance_dict(inst),
        "objective": objective,
        "solution": result.to_dict(spec),
        "at_solution": _mixture_summary(inst, w),
        "diagnostics": diagnostics,
    }
    return report, {"seconds": time.perf_counter() - start}


def _schedule_cfg(cfg: ExperimentConfig) -> tuple[float, float, int | None]:
    sched = cfg.raw.get("schedule", {})
    total = float(sched.get("T", 100.0))
    dt = float(sched.get("dt", 0.01))
    every = sched.get("sample_every")
    return total, dt, None if every is None else int(every)


def anneal_command(cfg: ExperimentConfig) -> tuple[dict, dict]:
    start = time.perf_counter()
    inst = cfg.instance()
    planned = cfg.planned_grid_size(inst.models)
    if planned > quantum.DENSE_CAP:
        raise GridTooLarge(f"grid of {planned} points exceeds the dense cap {quantum.DENSE_CAP}")
    spec = cfg.grid_spec(inst.models)
    total, dt, every = _schedule_cfg(cfg)
    alpha = cfg.alpha(inst, spec)
    h = quantum.build_diagonal_hamiltonian(inst.models, inst.target, spec, alpha)
    v = quantum.build_driver(spec)
    psi0 = quantum.driver_ground_state(v)
    ground = h.ground_set()

    rows = []
    if total == 0:
        final = psi0
    else:
        evo = quantum.evolve_schedule(h, v, quantum.AnnealSchedule(total, dt), psi0, every)
        final = evo.state
        for t, s, amps in evo.samples:
            rows.append({"t": t, "s": s,
                         "success_probability": quantum.success_probability(amps, ground),
                         "energy_expectation": quantum.energy_expectation(amps, h)})

    gaps = []
    samples = int(cfg.raw.get("gap_samples", 0))
    if samples:
        gaps = quantum.minimum_gap_diagnostic(h, v, samples, degeneracy=len(ground))
    best = grids.minimize_table(h.energies, spec)
    diagnostics: dict[str, Any] = {
        "initial_success_probability": quantum.success_probability(psi0, ground),
        "driver_ground_energy": v.ground_energy(),
    }
    if gaps:
        s_min, g_min = min(gaps, key=lambda g: g[1])
        diagnostics["minimum_gap"] = {"s": s_min, "gap": g_min, "degeneracy": int(len(ground))}
    report = {
        "command": "anneal",
        "config": cfg.normalized(inst, spec, alpha),
        "instance": _instance_dict(inst),
        "ground_set": [int(k) for k in ground],
        "ground_energy": float(h.energies.min()),
        "solution": best.to_dict(spec),
        "success_probability": quantum.success_probability(final, ground),
        "energy_expectation": quantum.energy_expectation(final, h),
        "final_populations": [float(p) for p in final.populations],
        "at_solution": _mixture_summary(inst, spec.values(best.point)[1]),
        "diagnostics": diagnostics,
    }
    extras = {"seconds": time.perf_counter() - start, "trajectory": rows, "gaps": gaps}
    return report, extras


def grand_command(cfg: ExperimentConfig) -> tuple[dict, dict]:
    start = time.perf_counter()
    inst = cfg.instance()
    planned = cfg.planned_grid_size(inst.models) * inst.models.space.size**3
    if planned > grand.GRAND_CAP:
        raise GridTooLarge(f"grand dimension {planned} exceeds the dense cap {grand.GRAND_CAP}")
    spec = cfg.grid_spec(inst.models)
    layout = grand.GrandSpaceLayout(spec, inst.models.space)
    alpha = cfg.alpha(inst, spec)
    res = cfg.raw.get("resupply", {})
    dts = [float(d) for d in res.get("dts", [0.2, 0.1, 0.05])]
    total = float(res.get("T", 1.0))
    inner = int(res.get("inner_steps", 64))

    g = grand.build_grand_hamiltonian(inst.models, layout, alpha)
    nu = grand.build_nu(inst.target, layout)
    via_trace = grand.effective_hamiltonian_via_trace(g, nu, layout)
    direct = quantum.build_diagonal_hamiltonian(inst.models, inst.target, spec, alpha)
    deviation = float(np.max(np.abs(via_trace.energies - direct.energies)))
    rows = grand.resupply_error_scaling(inst.models, inst.target, spec, alpha, total, dts, inner)

    report = {
        "command": "grand",
        "config": cfg.normalized(inst, spec, alpha),
        "instance": _instance_dict(inst),
        "grand_dimension": layout.dim,
        "identity_max_deviation": deviation,
        "scaling": rows,
    }
    return report, {"seconds": time.perf_counter() - start}
