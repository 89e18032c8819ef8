from __future__ import annotations
import math
from typing import ClassVar, Literal

import numpy as np
from numpy.typing import ArrayLike
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, model_validator
from scipy.optimize import minimize_scalar
from scipy.special import gamma, gammainc, gammaincc

from aggmin.radial import Dimension, ball_volume, sphere_area


class KernelBase(BaseModel):
    """Radial, nonnegative, nonincreasing interaction potential K(|x|) on R^d.

    Subclasses describe the untruncated profile; `truncate` multiplies it by the
    indicator of the open ball B_truncate, which is how K 1_{B_delta} is represented.
    """
    model_config = ConfigDict(frozen=True, extra='forbid')

    d: Dimension = 2
    truncate: PositiveFloat | None = None

    # every catalog shape decays exponentially or has compact support
    integrable_away_from_origin: ClassVar[bool] = True

    # --- shape hooks ---

    def _profile(self, r: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _antiderivative(self, t: np.ndarray) -> np.ndarray:
        """Any fixed-base antiderivative of K(s) s."""
        raise NotImplementedError

    def _moment(self, rho: float) -> float:
        """int_0^rho K(t) t^{d-1} dt for the untruncated profile."""
        raise NotImplementedError

    def _level_radius(self, t: np.ndarray) -> np.ndarray:
        """sup{r : K(r) > t} for the untruncated profile."""
        raise NotImplementedError

    def _breakpoints(self) -> list[float]:
        return []

    @property
    def amplitude(self) -> float:
        raise NotImplementedError

    @property
    def singularity_index(self) -> float:
        """Weak-L^p index p of the local singularity; inf for bounded kernels."""
        return math.inf

    # --- truncation-aware evaluation ---

    def __call__(self, r: ArrayLike) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        with np.errstate(divide='ignore', over='ignore'):
            k = self._profile(r)
        if self.truncate is not None:
            k = np.where(r < self.truncate, k, 0.0)
        return k

    def antiderivative(self, t: ArrayLike) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.truncate is not None:
            t = np.minimum(t, self.truncate)
        with np.errstate(divide='ignore', invalid='ignore'):
            return self._antiderivative(t)

    def level_radius(self, t: ArrayLike) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        with np.errstate(divide='ignore'):
            rho = np.where(t > 0, self._level_radius(np.maximum(t, 1e-300)), np.inf)
        if self.truncate is not None:
            rho = np.minimum(rho, self.truncate)
        return rho

    def breakpoints(self) -> list[float]:
        points = self._breakpoints()
        if self.truncate is not None:
            points = [b for b in points if b < self.truncate] + [self.truncate]
        return points

    @property
    def bounded(self) -> bool:
        return math.isinf(self.singularity_index)

    def truncated(self, delta: float) -> KernelBase:
        """K 1_{B_delta}; nested truncations keep the smaller radius."""
        if self.truncate is not None:
            delta = min(delta, self.truncate)
        return self.model_copy(update={'truncate': float(delta)})

    def scaled(self, factor: float) -> KernelBase:
        return self.model_copy(update={'c': self.amplitude * factor})

    def in_dimension(self, d: int) -> KernelBase:
        return type(self).model_validate({**self.model_dump(), 'd': d})

    # --- integrability ---

    def l1(self, radius: float = math.inf) -> float:
        """||K 1_{B_radius}||_1 = sigma_{d-1} int_0^radius K(t) t^{d-1} dt."""
        if self.truncate is not None:
            radius = min(radius, self.truncate)
        if self.amplitude == 0:
            return 0.0
        return sphere_area(self.d) * self._moment(radius)

    def weak_lp(self, p: float, delta: float, samples: int = 2001) -> float:
        """sup_t t |{x in B_delta : K(|x|) > t}|^{1/p}.

        Level sets are balls whose radius comes from the inverse radial profile; the
        sup is located on a log sweep of t and refined with a bounded scalar search.
        Returns inf when the sweep keeps growing at its top end.
        """
        if not p > 1:
            raise ValueError(f'weak norm needs p > 1, got {p}')
        if not delta > 0:
            raise ValueError(f'delta must be positive, got {delta}')
        if self.amplitude == 0:
            return 0.0
        k = self.truncated(delta)
        omega = ball_volume(self.d)
        delta = k.truncate

        def objective(t):
            rho = k.level_radius(t)
            return t * (omega * rho**self.d) ** (1 / p)

        # just below the value at delta and at each jump, where sups sit for step profiles
        levels = [float(self._profile(np.array(np.nextafter(b, 0.0)))) for b in k.breakpoints()]
        levels = [np.nextafter(v, 0.0) for v in levels if v > 0]
        top = float(self._profile(np.array(0.0))) if self.bounded else math.inf
        lo = min(levels) if levels else top
        lo = min(lo, top) * 1e-6
        hi = np.nextafter(top, 0.0) if math.isfinite(top) else max(levels + [lo]) * 1e12
        sweep = np.unique(np.concatenate((np.geomspace(lo, hi, samples), levels)))
        values = objective(sweep)
        i = int(np.argmax(values))
        best = float(values[i])

        if not self.bounded and i == len(sweep) - 1:
            decade = objective(np.array([hi / 10]))[0]
            if best > decade * (1 + 1e-3):
                return math.inf

        lo_i, hi_i = sweep[max(i - 1, 0)], sweep[min(i + 1, len(sweep) - 1)]
        if hi_i > lo_i:
            res = minimize_scalar(
                lambda s: -objective(np.array([math.exp(s)]))[0],
                bounds=(math.log(lo_i), math.log(hi_i)),
                method='bounded',
                options={'xatol': 1e-10},
            )
            best = max(best, -float(res.fun))
        return best

    def mstar(self) -> float:
        p = self.singularity_index
        return 1.0 if math.isinf(p) else (p + 1) / p

    def record(self) -> dict:
        return self.model_dump(mode='json')


class ExponentialKernel(KernelBase):
    shape: Literal['exponential'] = 'exponential'
    c: float = Field(1.0, ge=0)
    a: PositiveFloat = 1.0

    @property
    def amplitude(self) -> float:
        return self.c

    def _profile(self, r):
        return self.c * np.exp(-r / self.a)

    def _antiderivative(self, t):
        return -self.c * self.a * np.exp(-t / self.a) * (t + self.a)

    def _moment(self, rho):
        full = self.a**self.d * gamma(self.d)
        return self.c * full * (1.0 if math.isinf(rho) else gammainc(self.d, rho / self.a))

    def _level_radius(self, t):
        return np.where(t < self.c, self.a * np.log(self.c / t), 0.0)


class GaussianKernel(KernelBase):
    shape: Literal['gaussian'] = 'gaussian'
    c: float = Field(1.0, ge=0)
    a: PositiveFloat = 1.0

    @property
    def amplitude(self) -> float:
        return self.c

    def _profile(self, r):
        return self.c * np.exp(-((r / self.a) ** 2))

    def _antiderivative(self, t):
        return -0.5 * self.c * self.a**2 * np.exp(-((t / self.a) ** 2))

    def _moment(self, rho):
        h = self.d / 2
        full = 0.5 * self.a**self.d * gamma(h)
        return self.c * full * (1.0 if math.isinf(rho) else gammainc(h, (rho / self.a) ** 2))

    def _level_radius(self, t):
        return np.where(t < self.c, self.a * np.sqrt(np.log(np.maximum(self.c / t, 1.0))), 0.0)


class TophatKernel(KernelBase):
    shape: Literal['tophat'] = 'tophat'
    c: float = Field(1.0, ge=0)
    radius: PositiveFloat = 1.0

    @property
    def amplitude(self) -> float:
        return self.c

    def _profile(self, r):
        return np.where(r < self.radius, self.c, 0.0)

    def _antiderivative(self, t):
        return 0.5 * self.c * np.minimum(t, self.radius) ** 2

    def _moment(self, rho):
        return self.c * min(rho, self.radius) ** self.d / self.d

    def _level_radius(self, t):
        return np.where(t < self.c, self.radius, 0.0)

    def _breakpoints(self):
        return [self.radius]


class PowerLawKernel(KernelBase):
    """c r^{-beta} inside `cutoff`, continued by c cutoff^{-beta} e^{-(r - cutoff)} outside.

    cutoff=None gives the pure power law, which is not integrable at infinity.
    """
    shape: Literal['power_law'] = 'power_law'
    c: float = Field(1.0, ge=0)
    beta: PositiveFloat = 1.0
    cutoff: PositiveFloat | None = 1.0

    @model_validator(mode='after')
    def _locally_integrable(self):
        if not self.beta < self.d:
            raise ValueError(f'power_law needs 0 < beta < d for local integrability (beta={self.beta}, d={self.d})')
        return self

    @property
    def amplitude(self) -> float:
        return self.c

    @property
    def singularity_index(self) -> float:
        return self.d / self.beta

    @property
    def integrable_away_from_origin(self) -> bool:
        return self.cutoff is not None or self.truncate is not None

    @property
    def _ref(self) -> float:
        return 1.0 if self.cutoff is None else self.cutoff

    @property
    def _edge_value(self) -> float:
        return self.c * self._ref ** (-self.beta)

    def _profile(self, r):
        inner = self.c * r ** (-self.beta)
        if self.cutoff is None:
            return inner
        outer = self._edge_value * np.exp(-(r - self.cutoff))
        return np.where(r <= self.cutoff, inner, outer)

    def _inner_antiderivative(self, t):
        # int_ref^t c s^{1-beta} ds
        b, ref = self.beta, self._ref
        if b == 2:
            return self.c * np.log(t / ref)
        return self.c * (t ** (2 - b) - ref ** (2 - b)) / (2 - b)

    def _antiderivative(self, t):
        inner = self._inner_antiderivative(t)
        if self.cutoff is None:
            return inner
        rc = self.cutoff
        outer = self._edge_value * ((rc + 1) - np.exp(-(t - rc)) * (t + 1))
        return np.where(t <= rc, inner, outer)

    def _moment(self, rho):
        d, b = self.d, self.beta
        if self.cutoff is None:
            return math.inf if math.isinf(rho) else self.c * rho ** (d - b) / (d - b)
        rc = self.cutoff
        inner = self.c * min(rho, rc) ** (d - b) / (d - b)
        if rho <= rc:
            return inner
        # int_rc^rho e^{-(t-rc)} t^{d-1} dt through upper incomplete gammas
        upper = lambda x: gamma(d) * gammaincc(d, x)
        tail = math.exp(rc) * (upper(rc) - (0.0 if math.isinf(rho) else upper(rho)))
        return inner + self._edge_value * tail

    def _level_radius(self, t):
        inner = (self.c / t) ** (1 / self.beta)
        if self.cutoff is None:
            return inner
        outer = self.cutoff + np.log(np.maximum(self._edge_value / t, 1.0))
        return np.where(t >= self._edge_value, inner, outer)

    def _breakpoints(self):
        return [] if self.cutoff is None else [self.cutoff]
