import math
from typing import Annotated, Union

import numpy as np
from numpy.typing import ArrayLike
from pydantic import Field, TypeAdapter

from aggmin.models.entropy import EntropyBase, PowerEntropy, PowerSumEntropy, QuadraticEntropy
from aggmin.models.kernels import (
    ExponentialKernel,
    GaussianKernel,
    KernelBase,
    PowerLawKernel,
    TophatKernel,
)

type Kernel = Annotated[
    Union[ExponentialKernel, GaussianKernel, TophatKernel, PowerLawKernel],
    Field(discriminator='shape'),
]
type EntropyLaw = Annotated[
    Union[PowerEntropy, QuadraticEntropy, PowerSumEntropy],
    Field(discriminator='form'),
]

kernel_adapter: TypeAdapter[Kernel] = TypeAdapter(Kernel)
entropy_adapter: TypeAdapter[EntropyLaw] = TypeAdapter(EntropyLaw)


def kernel_eval(K: KernelBase, r: ArrayLike) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError('kernel is evaluated at radii r >= 0')
    return K(r)


def kernel_l1(K: KernelBase, radius: float = math.inf) -> float:
    return K.l1(radius)


def kernel_weak_lp(K: KernelBase, p: float, delta: float) -> float:
    return K.weak_lp(p, delta)


def kernel_mstar(K: KernelBase) -> float:
    return K.mstar()


def phi_eval(phi: EntropyBase, z: ArrayLike) -> np.ndarray:
    return phi.phi(z)


def phi_prime(phi: EntropyBase, z: ArrayLike) -> np.ndarray:
    return phi.phi_prime(z)


def chi_of(phi: EntropyBase) -> float:
    return phi.chi()


__all__ = [
    'EntropyBase',
    'EntropyLaw',
    'ExponentialKernel',
    'GaussianKernel',
    'Kernel',
    'KernelBase',
    'PowerEntropy',
    'PowerLawKernel',
    'PowerSumEntropy',
    'QuadraticEntropy',
    'TophatKernel',
    'chi_of',
    'entropy_adapter',
    'kernel_adapter',
    'kernel_eval',
    'kernel_l1',
    'kernel_mstar',
    'kernel_weak_lp',
    'phi_eval',
    'phi_prime',
]
