"""Energy-dissipating descent for F over densities of fixed mass, with trichotomy diagnostics."""
from __future__ import annotations
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import StrEnum
from pathlib import Path

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt

from aggmin.energy import FreeEnergyReport, InteractionOperator, first_variation, free_energy
from aggmin.errors import LineSearchStall
from aggmin.flows import SchemeName, make_scheme
from aggmin.flows.descent import ProjectedDescent
from aggmin.flows.finite_volume import FiniteVolume
from aggmin.models import EntropyBase
from aggmin.radial import Profile
from aggmin.rearrangement import symmetric_decreasing_rearrangement
from aggmin.utils.io import write_commented_csv, write_key_values

logger = logging.getLogger(__name__)

TRACE_COLUMNS = [
    'step', 'S', 'W', 'F', 'sup', 'mass', 'mass_error',
    'boundary_mass', 'concentration', 'residual', 'residual_l1', 'tau',
]


class Outcome(StrEnum):
    STATIONARY = 'stationary'
    VANISHING = 'vanishing'
    DICHOTOMY_SATURATION = 'dichotomy_saturation'
    MAX_ITER = 'max_iter'


class FlowConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra='forbid')

    scheme: SchemeName = SchemeName.PROJECTED_DESCENT
    # initial/maximal step; the finite-volume scheme also caps it by the CFL bound
    tau: PositiveFloat = 0.25
    cfl: float = Field(0.4, gt=0, le=1)
    max_steps: PositiveInt = 20000
    tol_stat: PositiveFloat = 1e-8
    tol_sup: PositiveFloat = 5e-3
    tol_F: PositiveFloat = 1e-6
    theta_b: float = Field(0.5, gt=0, lt=1)
    boundary_fraction: float = Field(0.1, gt=0, lt=1)
    resymmetrize_every: int = Field(0, ge=0)
    widths: list[PositiveFloat] = Field(default_factory=lambda: [0.5, 1.0, 2.0], min_length=1)
    window: PositiveInt = 100
    log_every: PositiveInt = 10


@dataclass(frozen=True)
class StationarityReport:
    """Formal Euler-Lagrange check Phi'(u) - K*u = mu on supp u.

    residual is max_i u_i |g_i - mu| / M and drives the stationary rule;
    residual_l1 is the mass-weighted sum_i w_i u_i |g_i - mu| / M.
    """
    mu: float
    residual: float
    residual_l1: float
    degenerate: bool


@dataclass
class MinimizeResult:
    profile: Profile
    trace: pd.DataFrame
    outcome: Outcome
    residual: float
    I_M: float
    mass: float
    steps: int

    def summary(self) -> dict:
        last = self.trace.iloc[-1]
        return {
            'outcome': str(self.outcome),
            'I_M': self.I_M,
            'mass': self.mass,
            'steps': self.steps,
            'residual': self.residual,
            'residual_l1': float(last['residual_l1']),
            'residual_form': 'max',
            'S': float(last['S']),
            'W': float(last['W']),
            'sup': float(last['sup']),
            'mass_error': float(last['mass_error']),
            'boundary_mass': float(last['boundary_mass']),
        }


@dataclass
class InfimumEstimate:
    value: float
    vanishing: bool
    widths: list[float]
    results: list[MinimizeResult] = field(default_factory=list, repr=False)

    @property
    def outcomes(self) -> list[Outcome]:
        return [r.outcome for r in self.results]


# --- Steps ---

def step_finite_volume(phi: EntropyBase, op: InteractionOperator, u: Profile, tau: float, cfl: float = 0.4) -> Profile:
    """One explicit finite-volume step; raises CFLViolation when tau is not admissible."""
    return FiniteVolume(cfl=cfl).step(phi, op, u, tau)


def step_projected_descent(phi: EntropyBase, op: InteractionOperator, u: Profile, tau: float) -> Profile:
    """One projected step with backtracking until F does not increase; raises LineSearchStall."""
    new, _, _ = ProjectedDescent().advance(phi, op, u, free_energy(phi, op, u), tau)
    return new


# --- Diagnostics ---

def stationarity_check(u: Profile, phi: EntropyBase, op: InteractionOperator, tol: float = 1e-12) -> StationarityReport:
    M = u.mass()
    support = u.values > tol * u.sup()
    if M == 0 or not support.any():
        return StationarityReport(mu=math.nan, residual=math.nan, residual_l1=math.nan, degenerate=True)
    g = first_variation(phi, op, u)
    weights = (u.values * u.grid.volumes)[support]
    mu = float(np.dot(g[support], weights) / weights.sum())
    deviation = np.abs(g[support] - mu) * u.values[support]
    return StationarityReport(
        mu=mu,
        residual=float(np.max(deviation)) / M,
        residual_l1=float(np.dot(deviation, u.grid.volumes[support])) / M,
        degenerate=False,
    )


def boundary_mass(u: Profile, fraction: float = 0.1) -> float:
    """Mass in the outer `fraction` of radii."""
    return u.mass() - u.concentration((1 - fraction) * u.grid.R)


def trichotomy_diagnose(trace: pd.DataFrame, config: FlowConfig) -> Outcome:
    """Terminal outcome of a trace, or MAX_ITER when no rule fires yet.

    Rules in order: vanishing (small sup, F not below -tol_F), dichotomy/saturation
    (boundary annulus holds more than theta_b of the mass), stationary (small
    residual and relative change of F below tol_stat over the last `window` steps).
    """
    last = trace.iloc[-1]
    if last['sup'] < config.tol_sup and last['F'] > -config.tol_F:
        return Outcome.VANISHING
    if last['boundary_mass'] > config.theta_b * last['mass']:
        return Outcome.DICHOTOMY_SATURATION
    if last['residual'] < config.tol_stat:
        earlier = trace[trace['step'] <= last['step'] - config.window]
        ref = earlier.iloc[-1] if len(earlier) else trace.iloc[0]
        if abs(last['F'] - ref['F']) <= config.tol_stat * abs(last['F']):
            return Outcome.STATIONARY
    return Outcome.MAX_ITER


# --- Driver ---

def _row(step: int, u: Profile, energy: FreeEnergyReport, M: float, stat: StationarityReport, tau: float, config: FlowConfig) -> dict:
    mass = u.mass()
    return {
        'step': step,
        'S': energy.S,
        'W': energy.W,
        'F': energy.F,
        'sup': u.sup(),
        'mass': mass,
        'mass_error': mass - M,
        'boundary_mass': boundary_mass(u, config.boundary_fraction),
        'concentration': u.concentration(min(1.0, u.grid.R)),
        'residual': stat.residual,
        'residual_l1': stat.residual_l1,
        'tau': tau,
    }


def minimize(u0: Profile, phi: EntropyBase, op: InteractionOperator, config: FlowConfig | None = None) -> MinimizeResult:
    config = config or FlowConfig()
    if u0.grid != op.grid:
        raise ValueError('initial profile and operator live on different grids')
    M = u0.mass()
    if not M > 0:
        raise ValueError('initial profile must carry positive mass')

    scheme = make_scheme(config.scheme, cfl=config.cfl)
    u = u0
    energy = free_energy(phi, op, u)
    tau = config.tau
    rows = [_row(0, u, energy, M, stationarity_check(u, phi, op), tau, config)]
    outcome = trichotomy_diagnose(pd.DataFrame(rows), config)
    step = 0

    while outcome is Outcome.MAX_ITER and step < config.max_steps:
        step += 1
        try:
            u, energy, used = scheme.advance(phi, op, u, energy, tau)
        except LineSearchStall:
            logger.info('line search stalled, treating iterate as stationary', extra={'step': step})
            rows.append(_row(step, u, energy, M, stationarity_check(u, phi, op), 0.0, config))
            outcome = Outcome.STATIONARY
            break
        tau = min(1.5 * used, config.tau)

        if config.resymmetrize_every and step % config.resymmetrize_every == 0:
            u = symmetric_decreasing_rearrangement(u)
            energy = free_energy(phi, op, u)

        if step % config.log_every == 0 or step == config.max_steps:
            rows.append(_row(step, u, energy, M, stationarity_check(u, phi, op), used, config))
            outcome = trichotomy_diagnose(pd.DataFrame(rows), config)
            if step % (config.log_every * 100) == 0:
                logger.debug('descent progress', extra={'step': step, 'F': energy.F, 'tau': used})

    trace = pd.DataFrame(rows, columns=TRACE_COLUMNS)
    if trace.iloc[-1]['step'] != step:
        rows.append(_row(step, u, energy, M, stationarity_check(u, phi, op), tau, config))
        trace = pd.DataFrame(rows, columns=TRACE_COLUMNS)
    residual = float(trace.iloc[-1]['residual'])
    logger.info(
        'minimize finished',
        extra={'outcome': str(outcome), 'steps': step, 'F': energy.F, 'residual': residual, 'scheme': str(config.scheme)},
    )
    return MinimizeResult(
        profile=u, trace=trace, outcome=outcome, residual=residual,
        I_M=energy.F, mass=M, steps=step,
    )


def infimum_estimate(
    M: float,
    phi: EntropyBase,
    op: InteractionOperator,
    config: FlowConfig | None = None,
    widths: list[float] | None = None,
    jobs: int = 1,
) -> InfimumEstimate:
    """min of the final F over Gaussian starts of mass M; 0 when every start vanishes."""
    if not M > 0:
        raise ValueError(f'mass must be positive, got {M}')
    config = config or FlowConfig()
    widths = list(widths or config.widths)

    def run(width):
        return minimize(Profile.gaussian(op.grid, M, width), phi, op, config)

    with ThreadPoolExecutor(max_workers=max(jobs, 1)) as pool:
        results = list(pool.map(run, widths))

    if all(r.outcome is Outcome.VANISHING for r in results):
        return InfimumEstimate(0.0, True, widths, results)
    return InfimumEstimate(min(r.I_M for r in results), False, widths, results)


def subadditivity_probe(
    M: float,
    fractions: list[float],
    phi: EntropyBase,
    op: InteractionOperator,
    config: FlowConfig | None = None,
    widths: list[float] | None = None,
) -> pd.DataFrame:
    """gap = I_{aM} + I_{(1-a)M} - I_M for each a; strict sub-additivity is gap > 0."""
    if not all(0 < a < 1 for a in fractions):
        raise ValueError(f'fractions must lie in (0, 1), got {fractions}')
    cache: dict[float, float] = {}

    def I(mass):
        if mass not in cache:
            cache[mass] = infimum_estimate(mass, phi, op, config, widths).value
        return cache[mass]

    rows = []
    for a in fractions:
        whole, part, rest = I(M), I(a * M), I((1 - a) * M)
        rows.append({'alpha': a, 'I_M': whole, 'I_part': part, 'I_rest': rest, 'gap': part + rest - whole})
    return pd.DataFrame(rows)


def write_result(result: MinimizeResult, out_dir: str | Path, stem: str, comments: list[str] | None = None) -> None:
    """trace_<stem>.csv, profile_<stem>.csv and summary_<stem>.txt under out_dir."""
    out_dir = Path(out_dir)
    comments = comments or []
    write_commented_csv(result.trace, out_dir / f'trace_{stem}.csv', comments)
    result.profile.to_csv(out_dir / f'profile_{stem}.csv', comments)
    write_key_values(result.summary(), out_dir / f'summary_{stem}.txt', comments)
