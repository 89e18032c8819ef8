import logging

import numpy as np

from aggmin.energy import first_variation, free_energy
from aggmin.errors import LineSearchStall, NonFiniteError
from aggmin.flows import Scheme
from aggmin.radial import Profile

logger = logging.getLogger(__name__)

BISECTIONS = 64
HALVINGS = 40


def project_mass(values: np.ndarray, g: np.ndarray, tau: float, weights: np.ndarray, mass: float) -> tuple[np.ndarray, float]:
    """u(mu) = max(0, values - tau (g - mu)) with mu chosen so that sum w u(mu) = mass.

    mass(mu) is continuous and nondecreasing, and [min g, max g] brackets the root.
    """
    if not (np.all(np.isfinite(values)) and np.all(np.isfinite(g))):
        raise NonFiniteError('first variation or density is not finite')
    lo, hi = float(g.min()), float(g.max())
    for _ in range(BISECTIONS):
        mu = 0.5 * (lo + hi)
        if np.dot(np.maximum(values - tau * (g - mu), 0.0), weights) < mass:
            lo = mu
        else:
            hi = mu
    mu = 0.5 * (lo + hi)
    new = np.maximum(values - tau * (g - mu), 0.0)
    total = np.dot(new, weights)
    if total > 0:
        new = new * (mass / total)
    return new, mu


class ProjectedDescent(Scheme):
    """Projected first-variation descent on {u >= 0, mass(u) = M} with backtracking."""

    def step(self, phi, op, u, tau):
        g = first_variation(phi, op, u)
        new, _ = project_mass(u.values, g, tau, op.grid.volumes, u.mass())
        return Profile(op.grid, new)

    def advance(self, phi, op, u, energy, tau):
        g = first_variation(phi, op, u)
        M = u.mass()
        for _ in range(HALVINGS):
            new, _ = project_mass(u.values, g, tau, op.grid.volumes, M)
            trial = Profile(op.grid, new)
            report = free_energy(phi, op, trial)
            if report.F <= energy.F:
                return trial, report, tau
            tau /= 2
        raise LineSearchStall(f'no descent after {HALVINGS} halvings (tau={tau:.3e})')
