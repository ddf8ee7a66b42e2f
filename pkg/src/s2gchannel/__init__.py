"""Site-specific LEO satellite-to-ground path loss over urban scenes."""

__version__ = "0.1.0"

from .geom import SatelliteGeometry, sat_direction, slant_range, to_local
from .gridsim import SegmentResult, SimulationConfig, simulate_area, simulate_segment
from .modelfit import LogLossRegressor, LogModel, evaluate, fit_elevation, fit_shifted, goodness
from .propagation import LinkBudgetConfig, free_space_loss, scenario_loss, total_path_loss, wall_loss
from .raytracer import RayPath, TracerConfig, aggregate_loss, knife_edge_loss, los_blocked, trace
from .scene import (
    BuildingFootprint,
    GeoBox,
    Scene,
    SceneError,
    Segment,
    avg_building_height,
    building_density,
    load_scene,
    partition,
    receiver_mesh,
)
from .synth import generate_manhattan

__all__ = [
    "BuildingFootprint",
    "GeoBox",
    "LinkBudgetConfig",
    "LogLossRegressor",
    "LogModel",
    "RayPath",
    "SatelliteGeometry",
    "Scene",
    "SceneError",
    "Segment",
    "SegmentResult",
    "SimulationConfig",
    "TracerConfig",
    "aggregate_loss",
    "avg_building_height",
    "building_density",
    "evaluate",
    "fit_elevation",
    "fit_shifted",
    "free_space_loss",
    "generate_manhattan",
    "goodness",
    "knife_edge_loss",
    "load_scene",
    "los_blocked",
    "partition",
    "receiver_mesh",
    "sat_direction",
    "scenario_loss",
    "slant_range",
    "to_local",
    "total_path_loss",
    "trace",
    "wall_loss",
]
