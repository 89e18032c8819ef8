import logging

import numpy as np

from aggmin.radial import Profile

logger = logging.getLogger(__name__)


def is_nonincreasing(u: Profile, tol: float = 1e-12) -> bool:
    return bool(np.all(np.diff(u.values) <= tol))


def symmetric_decreasing_rearrangement(u: Profile) -> Profile:
    """Refill the annuli from the centre with the cell values in decreasing order.

    Cells sorted by value give a concave cumulative mass M(V) as a function of
    the filled volume V. Target cell i receives M(T_i) - M(T_{i-1}) where T_i is
    the volume of the ball up to edge i, so a source cell straddling a target
    boundary contributes to both sides in proportion to its volume.
    """
    values = u.values
    if np.all(np.diff(values) <= 0):
        return u
    w = u.grid.volumes
    order = np.argsort(-values, kind='stable')
    filled = np.concatenate(([0.0], np.cumsum(w[order])))
    mass = np.concatenate(([0.0], np.cumsum(values[order] * w[order])))
    target = np.concatenate(([0.0], np.cumsum(w)))
    target[-1] = filled[-1]

    out = np.diff(np.interp(target, filled, mass)) / w
    # concavity makes the averages nonincreasing up to rounding
    out = np.maximum(np.minimum.accumulate(out), 0.0)
    return Profile(u.grid, out)


def lp_tolerance(u: Profile, p: float) -> float:
    """Bound on | ||u*||_p - ||u||_p | from splitting one cell per level."""
    return 2 * u.sup() * float(u.grid.volumes.max()) ** (1 / p)
