from __future__ import annotations
import math
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, model_validator


class EntropyBase(BaseModel):
    """Entropy density Phi as a positive combination of powers z^e with e > 1.

    Every catalog form reduces to such a sum, so evaluation, the small-z
    coefficient chi and the growth exponents are computed from `terms()`.
    """
    model_config = ConfigDict(frozen=True, extra='forbid')

    def terms(self) -> list[tuple[float, float]]:
        raise NotImplementedError

    def _arrays(self) -> tuple[np.ndarray, np.ndarray]:
        coef, expo = zip(*self.terms())
        return np.array(coef), np.array(expo)

    def _sum(self, z: ArrayLike, f) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        out = np.zeros_like(z)
        for c, e in self.terms():
            out = out + f(c, e, z)
        return out

    def phi(self, z: ArrayLike) -> np.ndarray:
        return self._sum(z, lambda c, e, z: c * z**e)

    def phi_prime(self, z: ArrayLike) -> np.ndarray:
        return self._sum(z, lambda c, e, z: c * e * z ** (e - 1))

    def pressure(self, z: ArrayLike) -> np.ndarray:
        """P(z) = z Phi'(z) - Phi(z), so that u grad Phi'(u) = grad P(u)."""
        return self._sum(z, lambda c, e, z: c * (e - 1) * z**e)

    def pressure_prime(self, z: ArrayLike) -> np.ndarray:
        """P'(z) = z Phi''(z), finite at z = 0 for every exponent above 1."""
        return self._sum(z, lambda c, e, z: c * (e - 1) * e * z ** (e - 1))

    @property
    def small_exponent(self) -> float:
        """g_0, the exponent governing Phi as z -> 0."""
        return min(e for _, e in self.terms())

    @property
    def growth_exponent(self) -> float:
        """g_inf = lim log Phi(z) / log z as z -> inf."""
        return max(e for _, e in self.terms())

    def coefficient_of(self, exponent: float) -> float:
        return sum(c for c, e in self.terms() if e == exponent)

    def chi(self) -> float:
        """Coefficient of z^2 in Phi near 0: inf below 2, 0 above."""
        g0 = self.small_exponent
        if g0 < 2:
            return math.inf
        if g0 > 2:
            return 0.0
        return self.coefficient_of(2.0)

    def liminf_ratio(self, mstar: float) -> float:
        """liminf_{z -> inf} Phi(z) / z^{m*}."""
        g = self.growth_exponent
        if g > mstar:
            return math.inf
        if g < mstar:
            return 0.0
        return self.coefficient_of(g)

    @property
    def quadratic_coefficient(self) -> float | None:
        """chi_0 when Phi(z) = chi_0 z^2 exactly, so that S(u) = chi_0 ||u||_2^2."""
        if all(e == 2 for _, e in self.terms()):
            return self.coefficient_of(2.0)
        return None

    def record(self) -> dict:
        return self.model_dump(mode='json')


class PowerEntropy(EntropyBase):
    """coefficient z^m / (m - 1), the porous-medium entropy."""
    form: Literal['power'] = 'power'
    m: float = Field(gt=1)
    coefficient: PositiveFloat = 1.0

    def terms(self):
        return [(self.coefficient / (self.m - 1), float(self.m))]


class QuadraticEntropy(EntropyBase):
    form: Literal['quadratic'] = 'quadratic'
    chi0: PositiveFloat = 1.0

    def terms(self):
        return [(self.chi0, 2.0)]


class PowerSumEntropy(EntropyBase):
    form: Literal['power_sum'] = 'power_sum'
    terms_: list[tuple[PositiveFloat, float]] = Field(alias='terms', min_length=1)

    model_config = ConfigDict(frozen=True, extra='forbid', populate_by_name=True)

    @model_validator(mode='after')
    def _superlinear(self):
        bad = [e for _, e in self.terms_ if not e > 1]
        if bad:
            raise ValueError(f'power_sum exponents must exceed 1 so that Phi(z)/z -> 0 (got {bad})')
        return self

    def terms(self):
        return [(float(c), float(e)) for c, e in self.terms_]

    def record(self) -> dict:
        return self.model_dump(mode='json', by_alias=True)
