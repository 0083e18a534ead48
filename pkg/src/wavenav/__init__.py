"""Grid navigation: wavefront planning, fuzzy obstacle avoidance and a seeded simulator."""

from .errors import WavenavError
from .grid_map import GridSpec, OccupancyGrid, inflate, load_map
from .nav_controller import NavConfig, NavController, NavState, StopReason
from .robot_sim import Pose, VelocityCommand
from .wavefront import Metric, make_plan, propagate

__all__ = [
    "GridSpec",
    "Metric",
    "NavConfig",
    "NavController",
    "NavState",
    "OccupancyGrid",
    "Pose",
    "StopReason",
    "VelocityCommand",
    "WavenavError",
    "inflate",
    "load_map",
    "make_plan",
    "propagate",
]

__version__ = "0.1.0"
