"""Regime classification, the mass-invariant scaling probe and the critical-mass bound."""
from __future__ import annotations
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import StrEnum

import numpy as np
import pandas as pd

from aggmin.energy import InteractionOperator, build_interaction, free_energy, ghls_check
from aggmin.errors import SupportOverflow
from aggmin.models import EntropyBase, KernelBase
from aggmin.radial import Profile, RadialGrid
from aggmin.utils.io import format_key_values
from aggmin.utils.sampling import random_profiles

logger = logging.getLogger(__name__)

DELTAS = (0.25, 1.0, 4.0)


class Regime(StrEnum):
    EXISTS_CHI_ZERO = 'exists_chi_zero'
    EXISTS_CHI_POSITIVE = 'exists_chi_positive'
    NO_MINIMIZER = 'no_minimizer'
    LARGE_MASS = 'large_mass'
    SLOW_DECAY = 'slow_decay'
    BOUNDARY = 'boundary_2chi_eq_K1'
    INDETERMINATE = 'indeterminate'


@dataclass(frozen=True)
class C0Estimate:
    """Ensemble maximum of lhs/mid in the HLS chain; a lower bound on the sharp C0."""
    value: float
    degenerate: bool
    p: float
    delta: float
    samples: int


@dataclass
class CriticalityReport:
    mstar: float
    chi: float
    K1: float
    liminf: float
    subcritical_ok: bool
    regime: Regime
    Mc: float
    mass: float
    delta: float
    C0: float
    weak_norm: float
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        out = asdict(self)
        out['regime'] = str(self.regime)
        out['notes'] = '; '.join(self.notes)
        return out

    def to_text(self) -> str:
        return format_key_values(self.to_dict())


# --- Hypothesis checks ---

def check_large_mass(phi: EntropyBase, nu: float) -> bool:
    """Phi(t z) <= t^nu Phi(z) for t >= 1, sampled on t in [1, 1e3], z in [1e-3, 1e3]."""
    if not 1 < nu < 2:
        raise ValueError(f'nu must lie in (1, 2), got {nu}')
    t = np.geomspace(1.0, 1e3, 61)[:, None]
    z = np.geomspace(1e-3, 1e3, 61)[None, :]
    return bool(np.all(phi.phi(t * z) <= t**nu * phi.phi(z) * (1 + 1e-12)))


def check_slow_decay(K: KernelBase, alpha: float, phi: EntropyBase) -> bool:
    """K(t r) >= t^-alpha K(r) for t >= 1 (sampled) and Phi(z) = o(z^{1 + alpha/d}) at 0."""
    if not 0 < alpha < K.d:
        raise ValueError(f'alpha must lie in (0, {K.d}), got {alpha}')
    t = np.geomspace(1.0, 1e3, 61)[:, None]
    r = np.geomspace(1e-3, 1e2, 61)[None, :]
    with np.errstate(under='ignore'):
        decay = bool(np.all(K(t * r) >= t ** (-alpha) * K(r) * (1 - 1e-12)))
    return decay and phi.small_exponent > 1 + alpha / K.d


def critical_mass_bound(phi: EntropyBase, K: KernelBase, delta: float, C0_est: float) -> float:
    """Largest M with liminf Phi(z)/z^{m*} > C0 ||K 1_{B_delta}||_{p,inf} M^{2-m*} / 2."""
    mstar = K.mstar()
    if mstar == 1:
        # bounded kernel: superlinear Phi always dominates
        return math.inf
    liminf = phi.liminf_ratio(mstar)
    if math.isinf(liminf):
        return math.inf
    if liminf == 0:
        return 0.0
    weak = K.weak_lp(K.singularity_index, delta)
    if weak == 0 or C0_est == 0:
        return math.inf
    return (2 * liminf / (C0_est * weak)) ** (1 / (2 - mstar))


def estimate_C0(
    K: KernelBase,
    p: float,
    delta: float,
    ensemble_size: int = 200,
    seed: int = 0,
    grid: RadialGrid | None = None,
) -> C0Estimate:
    if K.amplitude == 0:
        logger.warning('zero kernel amplitude, C0 estimate is degenerate')
        return C0Estimate(0.0, True, p, delta, 0)
    grid = grid or RadialGrid(d=K.d, R=2 * delta, N=256)
    op_delta = build_interaction(grid, K.truncated(delta))
    weak = K.weak_lp(p, delta)
    best = 0.0
    for u in random_profiles(grid, ensemble_size, seed):
        best = max(best, ghls_check(u, K, p, delta, op_delta=op_delta, weak_norm=weak).c0_sample)
    logger.debug('estimated C0', extra={'C0': best, 'p': p, 'delta': delta, 'samples': ensemble_size})
    return C0Estimate(best, False, p, delta, ensemble_size)


# --- Classification ---

def _subcriticality(phi, K, M, delta, C0_est):
    """Most favourable delta for liminf > C0 weak M^{2-m*} / 2; returns (ok, delta, weak, C0)."""
    mstar = K.mstar()
    liminf = phi.liminf_ratio(mstar)
    if math.isinf(liminf):
        return True, delta, math.nan, C0_est
    deltas = sorted({*DELTAS, float(delta)})
    p = K.singularity_index
    best = None
    for delta in deltas:
        weak = K.weak_lp(p, delta)
        C0 = C0_est if C0_est is not None else estimate_C0(K, p, delta).value
        margin = liminf - 0.5 * C0 * weak * M ** (2 - mstar)
        if best is None or margin > best[0]:
            best = (margin, delta, weak, C0)
    margin, delta, weak, C0 = best
    return margin > 0, delta, weak, C0


def classify(
    phi: EntropyBase,
    K: KernelBase,
    M: float,
    delta: float = 1.0,
    C0_est: float | None = None,
    nu: float | None = None,
    alpha: float | None = None,
) -> CriticalityReport:
    if not M > 0:
        raise ValueError(f'mass must be positive, got {M}')
    if not delta > 0:
        raise ValueError(f'delta must be positive, got {delta}')

    mstar = K.mstar()
    chi = phi.chi()
    K1 = K.l1()
    ok, delta, weak, C0 = _subcriticality(phi, K, M, delta, C0_est)
    notes = []
    if C0 is not None and not math.isnan(weak):
        source = 'supplied' if C0_est is not None else 'ensemble lower bound'
        notes.append(f'subcriticality checked with C0 = {C0:.6g} ({source}); the sharp constant is unknown')

    chi0 = phi.quadratic_coefficient
    if chi0 is not None and K1 < 2 * chi0:
        regime = Regime.NO_MINIMIZER
        notes.append('S is a multiple of ||u||_2^2 and ||K||_1 < 2 chi: I_M = 0 with no minimizer')
    elif chi == 0 and ok:
        regime = Regime.EXISTS_CHI_ZERO
    elif 0 < chi < math.inf and 2 * chi < K1 and ok:
        regime = Regime.EXISTS_CHI_POSITIVE
    elif alpha is not None and check_slow_decay(K, alpha, phi):
        regime = Regime.SLOW_DECAY
    elif nu is not None and check_large_mass(phi, nu):
        regime = Regime.LARGE_MASS
        notes.append('existence for sufficiently large mass; no threshold is available')
    elif 0 < chi < math.inf and math.isclose(2 * chi, K1, rel_tol=1e-12):
        regime = Regime.BOUNDARY
        notes.append('2 chi = ||K||_1: no existence claim either way')
    else:
        regime = Regime.INDETERMINATE
        if 0 < chi < math.inf and 2 * chi > K1:
            notes.append('2 chi > ||K||_1 without a quadratic entropy')
    if not K.integrable_away_from_origin:
        notes.append('K is not integrable away from the origin, ||K||_1 = inf')

    report = CriticalityReport(
        mstar=mstar,
        chi=chi,
        K1=K1,
        liminf=phi.liminf_ratio(mstar),
        subcritical_ok=ok,
        regime=regime,
        Mc=critical_mass_bound(phi, K, delta, C0) if C0 is not None else math.inf,
        mass=M,
        delta=delta,
        C0=C0 if C0 is not None else math.nan,
        weak_norm=weak,
        notes=notes,
    )
    logger.info('classified', extra={'regime': str(regime), 'chi': chi, 'K1': K1, 'mstar': mstar})
    return report


# --- Scaling probe ---

@dataclass
class ScalingProbeResult:
    trace: pd.DataFrame
    negative_found: bool
    exponent: float
    S_exponent: float
    W_exponent: float
    overflow: list[float] = field(default_factory=list)

    def summary(self) -> dict:
        return {
            'negative_found': self.negative_found,
            'exponent': self.exponent,
            'S_exponent': self.S_exponent,
            'W_exponent': self.W_exponent,
            'overflow': ' '.join(f'{lam:g}' for lam in self.overflow),
        }


def _slope(lam: np.ndarray, y: np.ndarray) -> float:
    keep = y > 0
    if keep.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(lam[keep]), np.log(y[keep]), 1)[0])


def scaling_probe(
    phi_profile: Profile,
    phi: EntropyBase,
    op: InteractionOperator,
    lambdas: list[float],
    jobs: int = 1,
) -> ScalingProbeResult:
    """F along the mass-invariant dilation lam^d u(lam x), for lam in (0, 1].

    The exponent is the log-log slope of |F| over the smallest decade of lam
    where F < 0; S and W exponents are fitted over the same window.
    """
    lambdas = sorted({float(lam) for lam in lambdas}, reverse=True)
    if not lambdas or lambdas[-1] <= 0 or lambdas[0] > 1:
        raise ValueError(f'scaling factors must lie in (0, 1], got {lambdas}')

    def evaluate(lam):
        try:
            report = free_energy(phi, op, phi_profile.rescale_mass_invariant(lam))
        except SupportOverflow as e:
            logger.warning('support overflow in scaling probe', extra={'lam': lam, 'lost': e.lost})
            return lam, None
        return lam, report

    with ThreadPoolExecutor(max_workers=max(jobs, 1)) as pool:
        results = list(pool.map(evaluate, lambdas))

    rows = [{'lam': lam, **rep.to_dict()} for lam, rep in results if rep is not None]
    overflow = [lam for lam, rep in results if rep is None]
    trace = pd.DataFrame(rows, columns=['lam', 'S', 'W', 'F'])

    negative = trace[trace['F'] < 0]
    exponent = S_exp = W_exp = math.nan
    if len(negative):
        window = trace[trace['lam'] <= 10 * negative['lam'].min()]
        window = window[window['F'] < 0]
        lam = window['lam'].to_numpy()
        exponent = _slope(lam, -window['F'].to_numpy())
        S_exp = _slope(lam, window['S'].to_numpy())
        W_exp = _slope(lam, window['W'].to_numpy())

    return ScalingProbeResult(
        trace=trace,
        negative_found=bool(len(negative)),
        exponent=exponent,
        S_exponent=S_exp,
        W_exponent=W_exp,
        overflow=overflow,
    )
