"""Default parameter set for the urban roadside scenario."""

from __future__ import annotations

from .channel import BlockerStats, LognormalHeightModel
from .interference import InterfererField
from .scene import SuperimposedPPPModel, table_ii_classes
from .sensing import RadioConfig

# Roadside blocker statistics: equivalent radius, density per m^2 and
# lognormal height parameters.
BLOCKER_R0 = 0.9953
BLOCKER_DENSITY = 0.07
HEIGHT_MU0 = 1.1
HEIGHT_SIGMA0 = 0.13

# Co-channel devices per m (radial).  Radar receivers only see a small
# residual of neighbouring transmissions, hence the separate power.
INTERFERER_DENSITY = 5e-4
SENSING_LEAKAGE_POWER = 1e-9


def radio(**kw) -> RadioConfig:
    return RadioConfig(**kw)


def blockers(lambda0: float = BLOCKER_DENSITY) -> BlockerStats:
    return BlockerStats(BLOCKER_R0, lambda0, LognormalHeightModel(HEIGHT_MU0, HEIGHT_SIGMA0))


def sensing_field(density: float = INTERFERER_DENSITY) -> InterfererField:
    return InterfererField(density=density, per_device_power=SENSING_LEAKAGE_POWER)


def comm_field(density: float = INTERFERER_DENSITY) -> InterfererField:
    return InterfererField(density=density, per_device_power=1.0)


def ppp() -> SuperimposedPPPModel:
    return SuperimposedPPPModel()


def classes():
    return table_ii_classes()
