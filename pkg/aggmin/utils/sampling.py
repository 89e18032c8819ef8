import numpy as np

from aggmin.radial import Profile, RadialGrid


def random_profile(grid: RadialGrid, rng: np.random.Generator, mass: float | None = None) -> Profile:
    """Superposition of a few Gaussian rings and a flat plateau, support well inside the grid.

    Draws are neither monotone nor centred, which is what rearrangement and
    inequality checks need.
    """
    r = grid.centers
    values = np.zeros(grid.N)
    for _ in range(int(rng.integers(1, 5))):
        centre = rng.uniform(0.0, 0.6 * grid.R)
        width = rng.uniform(0.03, 0.25) * grid.R
        values += rng.uniform(0.1, 1.0) * np.exp(-(((r - centre) / width) ** 2))
    if rng.random() < 0.5:
        lo, hi = np.sort(rng.uniform(0.0, 0.7 * grid.R, size=2))
        values += rng.uniform(0.0, 0.5) * ((r >= lo) & (r < hi))
    values[r > 0.9 * grid.R] = 0.0
    u = Profile(grid, values)
    if mass is not None and u.mass() > 0:
        u = u.with_mass(mass)
    return u


def random_profiles(grid: RadialGrid, count: int, seed: int, mass: float | None = None) -> list[Profile]:
    rng = np.random.default_rng(seed)
    return [random_profile(grid, rng, mass) for _ in range(count)]
