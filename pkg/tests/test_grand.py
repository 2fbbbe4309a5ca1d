import math

import numpy as np
import pytest

import oracles
from ctxmix import grand, grids, quantum
from ctxmix.errors import DimensionMismatch, GridTooLarge, ValidationError
from ctxmix.grand import DensityOperator, GrandSpaceLayout, ResupplyConfig
from ctxmix.grids import GridSpec
from ctxmix.instances import instance_e1, instance_e1_grid, random_instance
from ctxmix.models import ContextModelSet, make_distribution, uniform
from ctxmix.quantum import AnnealSchedule, StateVector
from ctxmix.verify import GOLDENS, downsized_grid


def e1_layout(spec=None):
    e1 = instance_e1()
    return e1, GrandSpaceLayout(spec or instance_e1_grid(), e1.models.space)


def test_nu_examples():
    e1, layout = e1_layout()
    nu = grand.build_nu(uniform(e1.models.space), layout)
    assert np.allclose(nu.matrix, np.eye(8) / 8, atol=1e-16)
    nu = grand.build_nu(e1.target, layout)
    assert nu.matrix[0, 0] == pytest.approx(0.2, abs=1e-16)
    assert np.allclose(np.diag(nu.matrix), np.kron([0.8, 0.2], np.full(4, 0.25)))
    rng = np.random.default_rng(0)
    for _ in range(5):
        inst = random_instance(rng, 3, 1)
        nu = grand.build_nu(inst.target, GrandSpaceLayout(GridSpec(([0.0],), [0.0]), inst.models.space))
        assert nu.trace() == pytest.approx(1.0, abs=1e-15)
        nu.validate()


def test_layout_cap():
    e1 = instance_e1()
    big = GridSpec(grids.omega_grid(2, 9), np.linspace(0, 1, 8))
    with pytest.raises(GridTooLarge):
        GrandSpaceLayout(big, e1.models.space)
    inst, spec = downsized_grid()
    assert GrandSpaceLayout(spec, inst.models.space).dim == 32


def test_grand_entries_match_definition():
    e1, layout = e1_layout()
    alpha = 3.0
    g = grand.build_grand_hamiltonian(e1.models, layout, alpha)
    rows = [m.probs.tolist() for m in e1.models.models]
    spec = layout.grid
    for flat in range(0, spec.size, 5):
        lam, w = spec.values(spec.point(flat))
        for x, x1, x2 in [(0, 0, 0), (1, 0, 1), (0, 1, 1), (1, 1, 0)]:
            ref = float(oracles.grand_entry(rows, lam, w.tolist(), alpha, x, x1, x2))
            assert g.energies[flat, x, x1, x2] == pytest.approx(ref, rel=1e-13, abs=1e-13)


def test_grand_golden_entry():
    e1 = instance_e1()
    layout = GrandSpaceLayout(GridSpec(((-1.0,), (-2.0,)), [math.log(2.0)]), e1.models.space)
    value = float(grand.build_grand_hamiltonian(e1.models, layout, 10.0).energies[0, 0, 0, 0])
    rows = [m.probs.tolist() for m in e1.models.models]
    ref = float(oracles.grand_entry(rows, math.log(2.0), [-1.0, -2.0], 10.0, 0, 0, 0))
    assert ref == pytest.approx(GOLDENS["e1_grand_entry"], abs=1e-15)
    assert value == pytest.approx(ref, abs=1e-13)


def test_grand_without_penalty_ignores_spectator_registers():
    e1, layout = e1_layout()
    g = grand.build_grand_hamiltonian(e1.models, layout, 0.0)
    lams, weights = layout.grid.value_arrays()
    a = weights @ e1.models.code_lengths
    for x in range(2):
        block = g.energies[:, x]
        assert np.all(block == block[:, :1, :1])
        assert np.allclose(block[:, 0, 0], -(lams + a[:, x]), atol=1e-15)
    # mu-average of the first term is E'
    avg = g.energies[:, :, 0, 0] @ e1.target.probs
    assert np.allclose(avg, grids.unconstrained_table(e1.models, e1.target, layout.grid), atol=1e-14)


def test_density_operator_validation():
    DensityOperator(np.diag([0.25, 0.75]))
    with pytest.raises(ValidationError):
        DensityOperator(np.diag([0.5, 0.6]))
    with pytest.raises(ValidationError):
        DensityOperator(np.array([[0.5, 0.1], [0.2, 0.5]]))
    with pytest.raises(ValidationError):
        DensityOperator(np.diag([1.2, -0.2]))


def random_density(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    m = a @ a.conj().T
    return m / np.trace(m)


def test_partial_trace_product_and_full():
    rng = np.random.default_rng(4)
    a, b = random_density(rng, 3), random_density(rng, 4)
    rho = DensityOperator(a, ("A",)).tensor(DensityOperator(b, ("B",)), check=True)
    assert np.allclose(grand.partial_trace(rho, "A").matrix, a, atol=1e-14)
    assert np.allclose(grand.partial_trace(rho, ["B"]).matrix, b, atol=1e-14)
    total = grand.partial_trace(rho, [])
    assert total.matrix.shape == (1, 1)
    assert total.matrix[0, 0] == pytest.approx(1.0, abs=1e-14)
    with pytest.raises(DimensionMismatch):
        grand.partial_trace(rho, "C")


def test_partial_trace_initial_product_state():
    inst, spec = downsized_grid()
    layout = GrandSpaceLayout(spec, inst.models.space)
    psi0 = quantum.driver_ground_state(quantum.build_driver(spec))
    rho0 = grand.pure_density(psi0).tensor(grand.build_nu(inst.target, layout), check=True)
    kept = grand.partial_trace(rho0, "grid")
    assert np.allclose(kept.matrix, psi0.density(), atol=1e-15)


def test_partial_trace_matches_index_sum_oracle():
    rng = np.random.default_rng(8)
    dims = (3, 2, 2, 2)
    rho = random_density(rng, math.prod(dims))
    for keep in range(4):
        fast = grand.partial_trace_dims(rho, dims, (keep,))
        assert np.allclose(fast, oracles.dense_partial_trace(rho, dims, keep), atol=1e-14)


def test_effective_hamiltonian_via_dense_trace():
    # the full operator route: tr_registers[(I (x) nu) G] with explicit matrices
    e1, layout = e1_layout()
    alpha = 4.0
    g = grand.build_grand_hamiltonian(e1.models, layout, alpha)
    nu = grand.build_nu(e1.target, layout)
    product = np.kron(np.eye(layout.grid.size), nu.matrix) @ np.diag(g.flat)
    dims = (layout.grid.size, 2, 2, 2)
    reduced = oracles.dense_partial_trace(product, dims, 0)
    direct = quantum.build_diagonal_hamiltonian(e1.models, e1.target, layout.grid, alpha)
    assert np.max(np.abs(reduced - np.diag(direct.energies))) < 1e-12
    via = grand.effective_hamiltonian_via_trace(g, nu, layout)
    assert np.max(np.abs(via.energies - direct.energies)) < 1e-12


def test_effective_hamiltonian_without_penalty_is_e_prime():
    e1, layout = e1_layout()
    g = grand.build_grand_hamiltonian(e1.models, layout, 0.0)
    via = grand.effective_hamiltonian_via_trace(g, grand.build_nu(e1.target, layout), layout)
    assert np.max(np.abs(via.energies - grids.unconstrained_table(e1.models, e1.target, layout.grid))) < 1e-12


@pytest.mark.parametrize("alpha", [0.5, 10.0])
def test_effective_hamiltonian_e1(alpha):
    e1, layout = e1_layout()
    g = grand.build_grand_hamiltonian(e1.models, layout, alpha)
    via = grand.effective_hamiltonian_via_trace(g, grand.build_nu(e1.target, layout), layout)
    direct = quantum.build_diagonal_hamiltonian(e1.models, e1.target, layout.grid, alpha)
    assert np.max(np.abs(direct.energies)) < 1e3
    assert np.max(np.abs(via.energies - direct.energies)) < 1e-12


def test_effective_hamiltonian_e1_default_alpha_to_rounding():
    # energies reach ~2e4 here, so agreement is limited to a few ulps of that scale
    e1, layout = e1_layout()
    alpha = grids.default_alpha(e1.models, e1.target, layout.grid)
    g = grand.build_grand_hamiltonian(e1.models, layout, alpha)
    via = grand.effective_hamiltonian_via_trace(g, grand.build_nu(e1.target, layout), layout)
    direct = quantum.build_diagonal_hamiltonian(e1.models, e1.target, layout.grid, alpha)
    scale = np.spacing(np.max(np.abs(direct.energies)))
    assert np.max(np.abs(via.energies - direct.energies)) <= 8 * scale


def test_effective_hamiltonian_all_uniform():
    models = ContextModelSet.from_probs([0, 1, 2], [[1 / 3] * 3, [1 / 3] * 3])
    mu = uniform(models.space)
    omegas = grids.omega_grid(2, 3)
    spec = GridSpec(omegas, [-1.0, 0.0, 1.0])
    layout = GrandSpaceLayout(spec, models.space)
    alpha = 2.0
    via = grand.effective_hamiltonian_via_trace(grand.build_grand_hamiltonian(models, layout, alpha),
                                                grand.build_nu(mu, layout), layout)
    lams, w = spec.value_arrays()
    ln3 = math.log(3)
    closed = -lams - ln3 * w.sum(axis=1) + alpha * (3 * np.exp(lams + ln3 * w.sum(axis=1)) - 1) ** 2
    assert np.allclose(via.energies, closed, atol=1e-12)


def test_resupply_config():
    with pytest.raises(ValidationError):
        ResupplyConfig(0.0)
    with pytest.raises(ValidationError):
        ResupplyConfig(0.1, inner_steps=0)
    with pytest.raises(ValidationError):
        ResupplyConfig(0.3).intervals(1.0)
    assert ResupplyConfig(0.25).intervals(1.0) == 4


def test_resupply_matches_mixture_of_unitaries_oracle():
    inst, spec = downsized_grid()
    layout = GrandSpaceLayout(spec, inst.models.space)
    alpha = 1.0
    g = grand.build_grand_hamiltonian(inst.models, layout, alpha)
    nu = grand.build_nu(inst.target, layout)
    v = quantum.build_driver(spec)
    psi0 = quantum.driver_ground_state(v)
    total, dt, inner = 1.0, 0.25, 4
    run = grand.evolve_grand_with_resupply(g, v, nu, layout, AnnealSchedule(total, dt),
                                           ResupplyConfig(dt, inner), psi0)
    ref = oracles.resupply_channel_oracle(g.energies.reshape(spec.size, -1), np.real(np.diag(nu.matrix)),
                                          oracles.driver_matrix(spec.shape), psi0.amplitudes, total, dt, inner)
    assert len(run.reduced) == 4
    assert np.allclose(run.reduced[-1].matrix, ref, atol=1e-12)
    run.reduced[-1].validate()


def test_resupply_exact_when_registers_decouple():
    models = ContextModelSet.from_probs([0, 1], [[0.5, 0.5]])
    target = make_distribution(models.space, [0.8, 0.2])
    omegas = (np.array([-2.0, -1.0]),)
    spec = GridSpec(omegas, grids.auto_lambda_range(models, omegas, 2, 0.0))
    rows = grand.resupply_error_scaling(models, target, spec, 0.0, 1.0, (0.5, 0.25, 0.2, 0.1))
    assert all(r["trace_distance"] < 1e-9 for r in rows)


def test_resupply_error_shrinks_linearly():
    inst, spec = downsized_grid()
    rows = grand.resupply_error_scaling(inst.models, inst.target, spec, 1.0, 1.0, (0.2, 0.1, 0.05))
    assert rows[0]["ratio_vs_prev"] is None
    for r in rows[1:]:
        assert 1.5 <= r["ratio_vs_prev"] <= 2.5


def test_single_short_interval_tracks_reference():
    inst, spec = downsized_grid()
    errs = [grand.resupply_error_scaling(inst.models, inst.target, spec, 1.0, dt, [dt])[0]["trace_distance"]
            for dt in (0.02, 0.01)]
    # one interval of length dt: the deviation vanishes faster than dt
    assert errs[1] < errs[0] / 3.0
    assert errs[1] < 1e-4


def test_compare_dynamics_examples():
    a = StateVector([1.0, 0.0])
    b = StateVector([0.0, 1.0])
    assert grand.compare_dynamics(grand.pure_density(a), a) == pytest.approx(0.0, abs=1e-15)
    assert grand.compare_dynamics(grand.pure_density(b), a) == pytest.approx(1.0, abs=1e-15)
    mixed = DensityOperator(0.9 * a.density() + 0.1 * b.density())
    assert grand.compare_dynamics(mixed, a) == pytest.approx(0.1, abs=1e-15)
    rng = np.random.default_rng(2)
    psi = rng.normal(size=4) + 1j * rng.normal(size=4)
    phi = StateVector(psi / np.linalg.norm(psi))
    overlap = abs(np.vdot(phi.amplitudes, StateVector([1, 0, 0, 0]).amplitudes)) ** 2
    pure_td = grand.compare_dynamics(grand.pure_density(phi), StateVector([1, 0, 0, 0]))
    assert pure_td == pytest.approx(math.sqrt(1 - overlap), abs=1e-12)


def test_grand_requires_lambda_register():
    e1 = instance_e1()
    layout = GrandSpaceLayout(GridSpec(grids.omega_grid(2, 3)), e1.models.space)
    with pytest.raises(ValidationError):
        grand.build_grand_hamiltonian(e1.models, layout, 1.0)
