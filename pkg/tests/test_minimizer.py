import numpy as np
import pandas as pd
import pytest

from aggmin.energy import build_interaction, free_energy
from aggmin.errors import CFLViolation, NonFiniteError
from aggmin.flows import SchemeName, make_scheme
from aggmin.flows.descent import ProjectedDescent, project_mass
from aggmin.flows.finite_volume import FiniteVolume
from aggmin.minimizer import (
    TRACE_COLUMNS,
    FlowConfig,
    Outcome,
    boundary_mass,
    infimum_estimate,
    minimize,
    stationarity_check,
    step_finite_volume,
    step_projected_descent,
    subadditivity_probe,
    trichotomy_diagnose,
    write_result,
)
from aggmin.models import ExponentialKernel, PowerEntropy
from aggmin.radial import Profile, RadialGrid
from aggmin.rearrangement import is_nonincreasing
from aggmin.utils.io import read_commented_csv

BENCH = FlowConfig(tol_stat=1e-7, max_steps=20000)


@pytest.fixture(scope='module')
def bound_state(quadratic, op_exp):
    """Descent to the minimizer for 2 chi < ||K||_1, mass 1."""
    return minimize(Profile.gaussian(op_exp.grid, 1.0, 1.0), quadratic, op_exp, BENCH)


def _trace(**rows):
    base = {c: 0.0 for c in TRACE_COLUMNS}
    base.update(mass=1.0, sup=1.0, residual=1.0)
    return pd.DataFrame([{**base, **row} for row in rows.values()])


# --- Steps ---

def test_project_mass():
    rng = np.random.default_rng(1)
    values = rng.random(50)
    g = rng.normal(size=50)
    weights = rng.random(50) + 0.1
    new, mu = project_mass(values, g, 0.3, weights, 2.0)
    assert np.all(new >= 0)
    assert np.dot(new, weights) == pytest.approx(2.0, rel=1e-13)
    assert g.min() <= mu <= g.max()


def test_non_finite_first_variation_is_rejected():
    grid = RadialGrid(d=2, R=4.0, N=40)
    u = Profile.gaussian(grid)
    g = np.zeros(grid.N)
    g[3] = np.nan
    with pytest.raises(NonFiniteError):
        project_mass(u.values, g, 0.25, grid.volumes, u.mass())


def test_finite_volume_flags_non_finite_density(quadratic, op_exp, monkeypatch):
    monkeypatch.setattr(FiniteVolume, 'fluxes', lambda self, phi, op, values: np.full(op.grid.N + 1, np.nan))
    u = Profile.gaussian(op_exp.grid, 1.0, 1.0)
    tau = 0.1 * FiniteVolume().admissible_step(quadratic, op_exp, u)
    with pytest.raises(NonFiniteError):
        step_finite_volume(quadratic, op_exp, u, tau)


def test_projected_descent_step(quadratic, op_exp):
    u = Profile.gaussian(op_exp.grid, 1.0, 2.0)
    new = step_projected_descent(quadratic, op_exp, u, 0.25)
    assert new.mass() == pytest.approx(1.0, rel=1e-13)
    assert free_energy(quadratic, op_exp, new).F <= free_energy(quadratic, op_exp, u).F


def test_make_scheme():
    assert isinstance(make_scheme('projected_descent'), ProjectedDescent)
    scheme = make_scheme(SchemeName.FINITE_VOLUME, cfl=0.2)
    assert isinstance(scheme, FiniteVolume)
    assert scheme.cfl == 0.2
    with pytest.raises(ValueError):
        make_scheme('gradient_ascent')


def test_finite_volume_rejects_large_step(quadratic, op_exp):
    u = Profile.gaussian(op_exp.grid, 1.0, 1.0)
    limit = FiniteVolume().admissible_step(quadratic, op_exp, u)
    assert 0 < limit < np.inf
    with pytest.raises(CFLViolation):
        step_finite_volume(quadratic, op_exp, u, 10 * limit)


def test_finite_volume_keeps_constant_profile():
    grid = RadialGrid(d=3, R=5.0, N=64)
    op = build_interaction(grid, ExponentialKernel(c=0.0, a=1.0, d=3))
    u = Profile(grid, np.full(grid.N, 0.2))
    new = step_finite_volume(PowerEntropy(m=2), op, u, 1e-4)
    assert np.array_equal(new.values, u.values)


def test_porous_medium_sup_decreases():
    grid = RadialGrid(d=2, R=10.0, N=128)
    op = build_interaction(grid, ExponentialKernel(c=0.0, a=1.0, d=2))
    phi = PowerEntropy(m=2)
    scheme = FiniteVolume()
    u = Profile.gaussian(grid, 1.0, 1.0)
    energy = free_energy(phi, op, u)
    sups = [u.sup()]
    for _ in range(50):
        u, energy, _ = scheme.advance(phi, op, u, energy, 1.0)
        sups.append(u.sup())
    assert np.all(np.diff(sups) < 0)


BENCHMARKS = [
    ('quadratic', 1.0, 2),
    ('quadratic', 1 / (4 * np.pi), 2),
    ('cubic', 1.0, 2),
    ('quadratic', 1.0, 3),
]


@pytest.mark.parametrize(('entropy', 'c', 'd'), BENCHMARKS)
def test_finite_volume_conserves_mass(entropy, c, d, request):
    phi = request.getfixturevalue(entropy)
    grid = RadialGrid(d=d, R=10.0, N=128)
    op = build_interaction(grid, ExponentialKernel(c=c, a=1.0, d=d))
    scheme = FiniteVolume()
    u = Profile.gaussian(grid, 1.0, 1.0)
    M = u.mass()
    energy = free_energy(phi, op, u)
    mass_error, rise = 0.0, -np.inf
    for _ in range(10_000):
        F = energy.F
        u, energy, _ = scheme.advance(phi, op, u, energy, 1.0)
        assert np.all(u.values >= 0)
        mass_error = max(mass_error, abs(u.mass() - M))
        rise = max(rise, (energy.F - F) / abs(F))
    assert mass_error <= 1e-10 * M
    assert rise <= 1e-10


# --- Diagnostics ---

def test_stationarity_of_zero_profile(quadratic, op_exp):
    report = stationarity_check(Profile.zeros(op_exp.grid), quadratic, op_exp)
    assert report.degenerate


def test_boundary_mass():
    grid = RadialGrid(d=2, R=10.0, N=100)
    u = Profile(grid, np.ones(100))
    assert boundary_mass(u, 0.1) == pytest.approx(np.pi * (100 - 81), rel=1e-12)
    assert boundary_mass(Profile.gaussian(grid), 0.1) < 1e-12


def test_diagnose_vanishing_first():
    trace = _trace(a=dict(step=0, sup=1e-3, F=0.0, boundary_mass=0.9))
    assert trichotomy_diagnose(trace, FlowConfig()) is Outcome.VANISHING


def test_diagnose_negative_energy_is_not_vanishing():
    trace = _trace(a=dict(step=0, sup=1e-3, F=-1.0))
    assert trichotomy_diagnose(trace, FlowConfig()) is Outcome.MAX_ITER


def test_diagnose_dichotomy():
    trace = _trace(a=dict(step=0, sup=0.1, F=-1.0, boundary_mass=0.6))
    assert trichotomy_diagnose(trace, FlowConfig()) is Outcome.DICHOTOMY_SATURATION


def test_diagnose_stationary_needs_flat_energy():
    flat = _trace(a=dict(step=0, F=-1.0), b=dict(step=100, F=-1.0, residual=1e-9))
    assert trichotomy_diagnose(flat, FlowConfig()) is Outcome.STATIONARY
    moving = _trace(a=dict(step=0, F=-1.0), b=dict(step=100, F=-1.1, residual=1e-9))
    assert trichotomy_diagnose(moving, FlowConfig()) is Outcome.MAX_ITER
    rough = _trace(a=dict(step=0, F=-1.0), b=dict(step=100, F=-1.0, residual=1e-3))
    assert trichotomy_diagnose(rough, FlowConfig()) is Outcome.MAX_ITER


# --- Minimization ---

def test_bound_state(bound_state):
    assert bound_state.outcome is Outcome.STATIONARY
    assert bound_state.I_M < 0
    assert bound_state.residual < 1e-4
    u = bound_state.profile
    assert is_nonincreasing(u, tol=1e-6 * u.sup())
    assert u.mass() == pytest.approx(1.0, rel=1e-10)
    assert np.all(np.diff(bound_state.trace['F']) <= 0)
    assert list(bound_state.trace.columns) == TRACE_COLUMNS


def test_restart_from_stationary_profile(bound_state, quadratic, op_exp):
    again = minimize(bound_state.profile, quadratic, op_exp, BENCH)
    assert again.outcome is Outcome.STATIONARY
    assert again.steps <= 1
    assert again.I_M == pytest.approx(bound_state.I_M, rel=1e-10)


@pytest.mark.slow
def test_finite_volume_agrees_with_descent(bound_state, quadratic, op_exp):
    config = FlowConfig(scheme=SchemeName.FINITE_VOLUME, tol_stat=1e-9, max_steps=60_000, log_every=100)
    flow = minimize(Profile.gaussian(op_exp.grid, 1.0, 1.0), quadratic, op_exp, config)
    assert flow.outcome in (Outcome.STATIONARY, Outcome.MAX_ITER)
    assert flow.I_M == pytest.approx(bound_state.I_M, rel=1e-2)
    assert flow.mass == pytest.approx(flow.profile.mass(), rel=1e-8)


def test_no_minimizer_below_threshold(quadratic, op_weak):
    estimate = infimum_estimate(1.0, quadratic, op_weak, BENCH)
    assert estimate.vanishing
    assert estimate.value == 0
    assert estimate.outcomes == [Outcome.VANISHING] * 3
    K1 = op_weak.kernel.l1()
    for result in estimate.results:
        S, F = result.trace['S'], result.trace['F']
        assert np.all(F >= (1 - K1 / 2) * S - 1e-3 * S)


def test_larger_mass_binds_more(quadratic, op_exp):
    one = infimum_estimate(1.0, quadratic, op_exp, BENCH, widths=[1.0])
    two = infimum_estimate(2.0, quadratic, op_exp, BENCH, widths=[1.0])
    assert two.value < one.value < 0
    assert one.value - two.value > 10 * BENCH.tol_stat
    # F is 2-homogeneous for a quadratic entropy
    assert two.value == pytest.approx(4 * one.value, rel=1e-6)


def test_pure_diffusion_vanishes(cubic):
    grid = RadialGrid(d=2, R=20.0, N=128)
    op = build_interaction(grid, ExponentialKernel(c=0.0, a=1.0, d=2))
    config = FlowConfig()
    result = minimize(Profile.gaussian(grid, 1.0, 1.0), cubic, op, config)
    assert result.outcome is Outcome.VANISHING
    assert result.I_M >= 0
    assert result.profile.sup() < config.tol_sup


def test_minimize_rejects_bad_start(quadratic, op_exp):
    with pytest.raises(ValueError):
        minimize(Profile.zeros(op_exp.grid), quadratic, op_exp)
    other = Profile.gaussian(RadialGrid(d=2, R=5.0, N=32))
    with pytest.raises(ValueError):
        minimize(other, quadratic, op_exp)


def test_resymmetrized_descent(quadratic, op_exp, bound_state):
    config = FlowConfig(tol_stat=1e-7, resymmetrize_every=50)
    ring = Profile.from_function(op_exp.grid, lambda r: np.exp(-((r - 3) ** 2))).with_mass(1.0)
    result = minimize(ring, quadratic, op_exp, config)
    assert result.outcome is Outcome.STATIONARY
    assert result.I_M == pytest.approx(bound_state.I_M, rel=1e-3)


@pytest.mark.slow
def test_strict_subadditivity(quadratic, op_exp):
    df = subadditivity_probe(1.0, [0.25, 0.5], quadratic, op_exp, BENCH, widths=[1.0])
    assert np.all(df['gap'] > 0)
    # I_M = M^2 I_1 for a quadratic entropy
    expected = -2 * df['alpha'] * (1 - df['alpha']) * df['I_M']
    np.testing.assert_allclose(df['gap'], expected, rtol=1e-4)


def test_subadditivity_rejects_bad_fraction(quadratic, op_exp):
    with pytest.raises(ValueError):
        subadditivity_probe(1.0, [1.0], quadratic, op_exp)


def test_write_result(tmp_path, bound_state):
    write_result(bound_state, tmp_path, '0', ['aggmin test'])
    comments, trace = read_commented_csv(tmp_path / 'trace_0.csv')
    assert comments == ['aggmin test']
    assert list(trace.columns) == TRACE_COLUMNS
    back = Profile.read_csv(tmp_path / 'profile_0.csv')
    np.testing.assert_allclose(back.values, bound_state.profile.values, rtol=1e-15)
    summary = (tmp_path / 'summary_0.txt').read_text()
    assert 'outcome = stationary\n' in summary


def test_constant_first_variation_is_a_fixed_point():
    grid = RadialGrid(d=2, R=4.0, N=40)
    u = Profile.gaussian(grid)
    new, mu = project_mass(u.values, np.full(grid.N, 0.7), 0.25, grid.volumes, u.mass())
    assert mu == pytest.approx(0.7, rel=1e-12)
    np.testing.assert_allclose(new, u.values, rtol=1e-12)


def test_random_profile_is_not_stationary(quadratic, op_exp):
    u = Profile.from_function(op_exp.grid, lambda r: np.exp(-((r - 4) ** 2)))
    report = stationarity_check(u, quadratic, op_exp)
    assert not report.degenerate
    assert report.residual > 1e-4


def test_converged_profile_is_stationary(bound_state, quadratic, op_exp):
    report = stationarity_check(bound_state.profile, quadratic, op_exp)
    assert report.residual == bound_state.residual
    assert report.mu < 0


@pytest.mark.slow
def test_refinement_of_bound_state(bound_state, quadratic, exp_kernel):
    grid = RadialGrid(d=2, R=10.0, N=512)
    op = build_interaction(grid, exp_kernel)
    config = FlowConfig(tau=0.125, tol_stat=1e-7, max_steps=40000)
    fine = minimize(Profile.gaussian(grid, 1.0, 1.0), quadratic, op, config)
    assert fine.outcome is Outcome.STATIONARY
    assert fine.I_M == pytest.approx(bound_state.I_M, rel=1e-2)


def test_residual_forms(bound_state, quadratic, op_exp):
    u = bound_state.profile
    report = stationarity_check(u, quadratic, op_exp)
    support = u.values > 1e-12 * u.sup()
    volume = op_exp.grid.volumes[support].sum()
    assert 0 <= report.residual_l1 <= report.residual * volume * (1 + 1e-12)
    assert bound_state.trace['residual_l1'].iloc[-1] == report.residual_l1
    summary = bound_state.summary()
    assert summary['residual_form'] == 'max'
    assert summary['residual_l1'] == report.residual_l1
