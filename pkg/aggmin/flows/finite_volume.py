import logging
import math

import numpy as np

from aggmin.energy import FreeEnergyReport, InteractionOperator, free_energy
from aggmin.errors import CFLCollapse, CFLViolation, NonFiniteError
from aggmin.flows import Scheme
from aggmin.models import EntropyBase
from aggmin.radial import Profile

logger = logging.getLogger(__name__)


class FiniteVolume(Scheme):
    """Explicit upwind scheme for u_t + div(u grad K*u) = lap P(u) on the annuli.

    P(z) = z Phi'(z) - Phi(z) is the pressure (u^m for Phi = z^m / (m-1)), so
    the flux at the interface between cells i and i+1 is

        J = A [u_upw v + (P_i - P_{i+1}) / dr],   v = ((K*u)_{i+1} - (K*u)_i) / dr,

    with u_upw taken from the side v points away from. J vanishes at r = 0 and r = R.
    """

    def __init__(self, cfl: float = 0.4, tau_floor: float = 1e-14, rtol: float = 1e-10):
        if not 0 < cfl <= 1:
            raise ValueError(f'CFL number must lie in (0, 1], got {cfl}')
        self.cfl = cfl
        self.tau_floor = tau_floor
        self.rtol = rtol

    def _geometry(self, op: InteractionOperator) -> float:
        """max_i (A_{i-1/2} + A_{i+1/2}) dr / (2 w_i): 1 in d=2, 3/2 at the centre cell in d=3."""
        g = op.grid
        a = g.interface_areas
        return float(np.max((a[:-1] + a[1:]) * g.dr / (2 * g.volumes)))

    def admissible_step(self, phi: EntropyBase, op: InteractionOperator, u: Profile) -> float:
        """CFL step: tau <= cfl / (geometry (max|v| / dr + 2 max P'(u) / dr^2))."""
        dr = op.grid.dr
        v = np.diff(op.apply(u.values)) / dr
        rate = float(np.max(np.abs(v), initial=0.0)) / dr + 2 * float(np.max(phi.pressure_prime(u.values))) / dr**2
        if rate == 0:
            return math.inf
        return self.cfl / (self._geometry(op) * rate)

    def fluxes(self, phi: EntropyBase, op: InteractionOperator, values: np.ndarray) -> np.ndarray:
        """Outward fluxes at the N+1 cell edges."""
        g = op.grid
        v = np.diff(op.apply(values)) / g.dr
        upwind = np.where(v > 0, values[:-1], values[1:])
        pressure = phi.pressure(values)
        J = np.zeros(g.N + 1)
        J[1:-1] = g.interface_areas[1:-1] * (upwind * v + (pressure[:-1] - pressure[1:]) / g.dr)
        return J

    def step(self, phi, op, u, tau):
        limit = self.admissible_step(phi, op, u)
        if tau > limit * (1 + 1e-12):
            raise CFLViolation(f'tau={tau:.3e} exceeds the CFL bound {limit:.3e}')
        J = self.fluxes(phi, op, u.values)
        new = u.values - tau / op.grid.volumes * np.diff(J)
        if not np.all(np.isfinite(new)):
            raise NonFiniteError(f'step of tau={tau:.3e} produces a non-finite density')
        # rounding below zero in cells that are already empty
        scale = u.sup()
        new = np.where((new < 0) & (new > -1e-14 * scale), 0.0, new)
        if np.any(new < 0):
            raise CFLViolation(f'step of tau={tau:.3e} produces negative density {new.min():.3e}')
        return Profile(op.grid, new)

    def advance(self, phi, op, u, energy, tau):
        tau = min(tau, self.admissible_step(phi, op, u))
        tol = self.rtol * abs(energy.F)
        while tau >= self.tau_floor:
            try:
                new = self.step(phi, op, u, tau)
            except CFLViolation as e:
                logger.debug('rejected step', extra={'tau': tau, 'reason': str(e)})
                tau /= 2
                continue
            report = free_energy(phi, op, new)
            if report.F <= energy.F + tol:
                return new, report, tau
            logger.debug('energy increase, halving step', extra={'tau': tau, 'dF': report.F - energy.F})
            tau /= 2
        raise CFLCollapse(f'no admissible step above tau={self.tau_floor:g}')
