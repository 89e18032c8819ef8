from __future__ import annotations
import logging
import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Literal

import numpy as np
import pandas as pd
from scipy.interpolate import PchipInterpolator
from scipy.special import gamma

from aggmin.errors import SupportOverflow
from aggmin.utils.io import read_commented_csv, write_commented_csv

logger = logging.getLogger(__name__)

type Dimension = Literal[2, 3]


def sphere_area(d: int) -> float:
    """Surface measure of the unit sphere S^{d-1}."""
    return 2 * math.pi ** (d / 2) / gamma(d / 2)


def ball_volume(d: int, radius: float = 1.0) -> float:
    return sphere_area(d) / d * radius**d


@dataclass(frozen=True)
class RadialGrid:
    """Uniform radial grid of N annular cells on [0, R] in dimension d."""

    d: Dimension
    R: float
    N: int

    def __post_init__(self):
        if self.d not in (2, 3):
            raise ValueError(f'dimension must be 2 or 3, got {self.d}')
        if not self.R > 0:
            raise ValueError(f'outer radius must be positive, got {self.R}')
        if self.N < 2:
            raise ValueError(f'need at least two cells, got {self.N}')

    @property
    def dr(self) -> float:
        return self.R / self.N

    @cached_property
    def sigma(self) -> float:
        return sphere_area(self.d)

    @cached_property
    def edges(self) -> np.ndarray:
        e = np.arange(self.N + 1, dtype=float) * self.dr
        e[-1] = self.R
        e.flags.writeable = False
        return e

    @cached_property
    def centers(self) -> np.ndarray:
        c = 0.5 * (self.edges[1:] + self.edges[:-1])
        c.flags.writeable = False
        return c

    @cached_property
    def volumes(self) -> np.ndarray:
        """Exact annulus volumes w_i."""
        e = self.edges
        w = self.sigma / self.d * (e[1:] ** self.d - e[:-1] ** self.d)
        w.flags.writeable = False
        return w

    @cached_property
    def line_weights(self) -> np.ndarray:
        """Radial line measure kappa_i = w_i / sigma_{d-1} (about r_i^{d-1} dr)."""
        k = self.volumes / self.sigma
        k.flags.writeable = False
        return k

    @cached_property
    def interface_areas(self) -> np.ndarray:
        """Sphere areas at the N+1 cell edges; zero at the origin."""
        a = self.sigma * self.edges ** (self.d - 1)
        a.flags.writeable = False
        return a

    @property
    def ball_volume(self) -> float:
        return ball_volume(self.d, self.R)

    def header(self) -> str:
        return f'd={self.d},R={self.R!r},N={self.N}'

    @classmethod
    def from_header(cls, line: str) -> RadialGrid:
        fields = dict(re.findall(r'(\w+)=([^,\s]+)', line))
        try:
            return cls(d=int(fields['d']), R=float(fields['R']), N=int(fields['N']))
        except KeyError as e:
            raise ValueError(f'profile header is missing {e}: {line!r}') from None


@dataclass(frozen=True, eq=False)
class Profile:
    """Nonnegative radially symmetric density sampled as cell averages on a grid."""

    grid: RadialGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        u = np.array(self.values, dtype=float)
        if u.shape != (self.grid.N,):
            raise ValueError(f'profile has shape {u.shape}, grid has {self.grid.N} cells')
        if not np.all(np.isfinite(u)):
            raise ValueError('profile values must be finite')
        if np.any(u < 0):
            raise ValueError(f'profile has negative values (min {u.min():.3e})')
        u.flags.writeable = False
        object.__setattr__(self, 'values', u)

    # --- Construction ---

    @classmethod
    def zeros(cls, grid: RadialGrid) -> Profile:
        return cls(grid, np.zeros(grid.N))

    @classmethod
    def from_function(cls, grid: RadialGrid, f: Callable[[np.ndarray], np.ndarray]) -> Profile:
        return cls(grid, np.asarray(f(grid.centers), dtype=float))

    @classmethod
    def cell_averages(cls, grid: RadialGrid, f: Callable[[np.ndarray], np.ndarray], order: int = 4) -> Profile:
        """(1/w_i) int_{annulus i} f(|x|) dx by Gauss-Legendre in r on every cell."""
        x, wts = np.polynomial.legendre.leggauss(order)
        lo, hi = grid.edges[:-1, None], grid.edges[1:, None]
        r = lo + 0.5 * (hi - lo) * (x + 1)
        integral = 0.5 * (hi - lo)[:, 0] * grid.sigma * ((f(r) * r ** (grid.d - 1)) @ wts)
        return cls(grid, integral / grid.volumes)

    @classmethod
    def gaussian(cls, grid: RadialGrid, mass: float = 1.0, width: float = 1.0) -> Profile:
        """Centred bump e^{-r^2/width^2}, normalised to the given discrete mass."""
        u = cls.from_function(grid, lambda r: np.exp(-(r / width) ** 2))
        return u.with_mass(mass)

    def with_values(self, values: np.ndarray) -> Profile:
        return Profile(self.grid, values)

    def with_mass(self, mass: float) -> Profile:
        current = self.mass()
        if current == 0:
            raise ValueError('cannot normalise the zero profile')
        return Profile(self.grid, self.values * (mass / current))

    def __mul__(self, factor: float) -> Profile:
        return Profile(self.grid, self.values * factor)

    __rmul__ = __mul__

    # --- Integrals ---

    def mass(self) -> float:
        return float(np.dot(self.values, self.grid.volumes))

    def lp_norm(self, p: float) -> float:
        if not p >= 1:
            raise ValueError(f'lp_norm needs p >= 1, got {p}')
        u = self.values
        top = float(u.max(initial=0.0))
        if math.isinf(p) or top == 0:
            return top
        # scale by the max so large p does not overflow
        s = float(np.dot((u / top) ** p, self.grid.volumes))
        return top * s ** (1 / p)

    def sup(self) -> float:
        return float(self.values.max(initial=0.0))

    def cumulative_mass(self) -> np.ndarray:
        """Mass inside each edge radius, length N+1, starting at 0."""
        return np.concatenate(([0.0], np.cumsum(self.values * self.grid.volumes)))

    def concentration(self, rho: float) -> float:
        """Mass inside B_rho(0); the partial cell contributes by volume fraction."""
        g = self.grid
        if not 0 <= rho <= g.R * (1 + 1e-12):
            raise ValueError(f'concentration radius must lie in [0, {g.R}], got {rho}')
        rho = min(rho, g.R)
        if rho == g.R:
            return self.mass()
        k = int(np.searchsorted(g.edges, rho, side='right')) - 1
        inner = self.cumulative_mass()[k]
        partial = ball_volume(g.d, rho) - ball_volume(g.d, g.edges[k])
        return float(inner + self.values[k] * partial)

    # --- Scaling ---

    def rescale_mass_invariant(self, lam: float, tol: float = 1e-6) -> Profile:
        """u_lam(r) = lam^d u(lam r), resampled mass-conservatively onto the same grid.

        The cumulative mass C(rho) is interpolated monotonically (PCHIP) through the
        edge values, and the rescaled cell masses are C(lam e_k) - C(lam e_{k-1}).
        Raises SupportOverflow when more than tol * mass falls outside the grid.
        """
        if not lam > 0:
            raise ValueError(f'scaling factor must be positive, got {lam}')
        if lam == 1:
            return self
        g = self.grid
        cum = self.cumulative_mass()
        total = cum[-1]
        if total == 0:
            return self
        interp = PchipInterpolator(g.edges, cum, extrapolate=False)
        x = np.minimum(lam * g.edges, g.R)
        c = interp(x)
        c[0] = 0.0
        c[x >= g.R] = total
        lost = total - c[-1]
        if lost > tol * total:
            raise SupportOverflow(lam, lost, total)
        cell_mass = np.maximum(np.diff(c), 0.0)
        return Profile(g, cell_mass / g.volumes)

    # --- Serialization ---

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'r': self.grid.centers, 'u': self.values})

    def to_csv(self, path: str | Path, comments: list[str] | None = None) -> None:
        write_commented_csv(self.to_frame(), path, [self.grid.header(), *(comments or [])])

    @classmethod
    def read_csv(cls, path: str | Path) -> Profile:
        comments, df = read_commented_csv(path)
        header = next((c for c in comments if c.startswith('d=')), None)
        if header is None:
            raise ValueError(f'{path}: missing grid header line "# d=..,R=..,N=.."')
        grid = RadialGrid.from_header(header)
        if len(df) != grid.N or 'u' not in df.columns:
            raise ValueError(f'{path}: expected {grid.N} rows with a "u" column')
        return cls(grid, df['u'].to_numpy(dtype=float))
