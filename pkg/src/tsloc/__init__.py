"""Opportunistic cooperative localization from packet reception timestamps."""
from tsloc.channel import SPEED_OF_LIGHT, ChannelParams, ErrorModel, propagation_delay, spatial_error
from tsloc.clocks import ClockParams, SlowErrorParams, local_timestamp, sample_clock
from tsloc.dataset import Dataset, ReceptionRecord
from tsloc.scene import LinkFlag, NodeRole, Scene, build_scene, distance
from tsloc.seeding import Seeder
from tsloc.simulate import (
    JitteredPeriodic,
    NoisyPrior,
    Poisson,
    generate_receptions,
    generate_schedule,
    perturb_priors,
)

__version__ = "0.1.0"

__all__ = [
    "SPEED_OF_LIGHT",
    "ChannelParams",
    "ClockParams",
    "Dataset",
    "ErrorModel",
    "JitteredPeriodic",
    "LinkFlag",
    "NodeRole",
    "NoisyPrior",
    "Poisson",
    "ReceptionRecord",
    "Scene",
    "Seeder",
    "SlowErrorParams",
    "build_scene",
    "distance",
    "generate_receptions",
    "generate_schedule",
    "local_timestamp",
    "perturb_priors",
    "propagation_delay",
    "sample_clock",
    "spatial_error",
]
