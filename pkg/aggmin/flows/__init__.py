from __future__ import annotations
from enum import StrEnum

from aggmin.energy import FreeEnergyReport, InteractionOperator
from aggmin.models import EntropyBase
from aggmin.radial import Profile


class SchemeName(StrEnum):
    FINITE_VOLUME = 'finite_volume_pde'
    PROJECTED_DESCENT = 'projected_descent'


class Scheme:
    """Mass-preserving descent step for F."""

    def step(self, phi: EntropyBase, op: InteractionOperator, u: Profile, tau: float) -> Profile:
        raise NotImplementedError

    def advance(
        self,
        phi: EntropyBase,
        op: InteractionOperator,
        u: Profile,
        energy: FreeEnergyReport,
        tau: float,
    ) -> tuple[Profile, FreeEnergyReport, float]:
        """One accepted step from a trial size tau: (new profile, its energies, tau used)."""
        raise NotImplementedError


def make_scheme(name: SchemeName | str, cfl: float = 0.4) -> Scheme:
    from aggmin.flows.descent import ProjectedDescent
    from aggmin.flows.finite_volume import FiniteVolume

    match SchemeName(name):
        case SchemeName.FINITE_VOLUME:
            return FiniteVolume(cfl=cfl)
        case SchemeName.PROJECTED_DESCENT:
            return ProjectedDescent()
