"""Per-segment simulation over receiver meshes and heat-map rasters."""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .geom import SatelliteGeometry
from .propagation import LinkBudgetConfig, free_space_loss, scenario_loss_array, wall_loss
from .raytracer import RayTracer, TracerConfig, aggregate_loss
from .scene import Scene, Segment, partition, receiver_mesh


@dataclass(frozen=True)
class SimulationConfig:
    """Everything a simulation run needs besides the scene and satellite."""

    link: LinkBudgetConfig = field(default_factory=LinkBudgetConfig)
    tracer: TracerConfig = field(default_factory=TracerConfig)
    mesh_n: int = 100
    rx_height: float = 1.0
    seg_size_deg: float = 0.005
    averaging: str = "db"

    def __post_init__(self):
        if self.averaging not in ("db", "linear"):
            raise ValueError(f"averaging must be 'db' or 'linear', got {self.averaging!r}")

    @classmethod
    def from_dict(cls, data: dict) -> SimulationConfig:
        data = dict(data)
        tracer = TracerConfig(**data.pop("tracer", {}))
        sim = data.pop("simulation", {})
        link = LinkBudgetConfig.from_dict(data)
        return cls(link=link, tracer=tracer, **sim)

    def to_dict(self) -> dict:
        out = self.link.to_dict()
        out["tracer"] = asdict(self.tracer)
        out["simulation"] = {
            "mesh_n": self.mesh_n,
            "rx_height": self.rx_height,
            "seg_size_deg": self.seg_size_deg,
            "averaging": self.averaging,
        }
        return out


def load_simulation_config(path) -> SimulationConfig:
    return SimulationConfig.from_dict(json.loads(Path(path).read_text()))


@dataclass
class SegmentResult:
    row: int
    col: int
    theta_elev: float
    azimuth: float
    pl_grid: np.ndarray = field(repr=False)
    mean_pl: float
    baseline_pl: float
    excess_loss: float
    mu: float
    h_avg: float
    los_fraction: float
    empty: bool = False

    def to_record(self) -> dict:
        return {
            "row": self.row,
            "col": self.col,
            "mu": self.mu,
            "h_avg": self.h_avg,
            "theta_elev": self.theta_elev,
            "azimuth": self.azimuth,
            "mean_pl_db": self.mean_pl,
            "baseline_pl_db": self.baseline_pl,
            "excess_loss_db": self.excess_loss,
            "los_fraction": self.los_fraction,
        }


def point_path_loss(
    scene: Scene,
    points: np.ndarray,
    sat: SatelliteGeometry,
    cfg: SimulationConfig,
    rect: tuple[float, float, float, float] | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Total path loss (dB) and LoS flag for each receiver in `points`."""
    link = cfg.link
    d_km = sat.slant_range_km
    l_fs = free_space_loss(link.f_c, d_km)
    clear_sky = l_fs + link.rain_loss + link.cloud_loss
    pl = np.full(len(points), clear_sky)
    los = np.ones(len(points), dtype=bool)
    if not scene.buildings or len(points) == 0:
        return pl, los

    direction = sat.direction
    if rect is None:
        lo, hi = points[:, :2].min(axis=0), points[:, :2].max(axis=0)
        rect = (lo[0], lo[1], hi[0], hi[1])
    horiz = math.hypot(direction[0], direction[1])
    reach = 0.0 if horiz == 0 else scene.max_top / (direction[2] / horiz)
    nearby = scene.buildings_near(rect, reach + 1.0)
    tracer = RayTracer(scene, direction, cfg.tracer, link.f_c, d_km, building_ids=nearby)

    blocked = tracer.los_blocked_many(points)
    los = ~blocked
    idx = np.flatnonzero(blocked)
    if len(idx) == 0:
        return pl, los
    l_ray = np.array([aggregate_loss(tracer.trace(points[i]), l_fs, link.deep_fade_cap) for i in idx])
    l_scen = scenario_loss_array(l_ray, wall_loss(link.f_c, link))
    pl[idx] = np.minimum(clear_sky + l_scen, link.deep_fade_cap)
    return pl, los


def _mean(values: np.ndarray, averaging: str) -> float:
    if averaging == "linear":
        return float(-10 * np.log10(np.mean(10 ** (-values / 10))))
    return float(np.mean(values))


def simulate_segment(
    scene: Scene,
    segment: Segment,
    sat: SatelliteGeometry,
    cfg: SimulationConfig | None = None,
) -> SegmentResult:
    """Simulate one segment and its building-free baseline.

    The baseline runs the same pipeline on the scene with its buildings
    removed, averaged over the same active receivers.
    """
    cfg = cfg or SimulationConfig()
    mesh = segment.receiver_points
    if mesh is None or mesh.n != cfg.mesh_n:
        mesh = receiver_mesh(scene, segment, cfg.mesh_n, cfg.rx_height)
    active = ~mesh.interior
    pts = mesh.points[active]

    grid = np.full(mesh.n * mesh.n, np.nan)
    if len(pts) == 0:
        return SegmentResult(
            segment.row, segment.col, sat.elevation, sat.azimuth, grid.reshape(mesh.n, mesh.n),
            math.nan, math.nan, math.nan, segment.mu, segment.h_avg, math.nan, empty=True,
        )

    pl, los = point_path_loss(scene, pts, sat, cfg, segment.rect)
    base, _ = point_path_loss(scene.without_buildings(), pts, sat, cfg, segment.rect)
    grid[active] = pl
    mean_pl = _mean(pl, cfg.averaging)
    baseline = _mean(base, cfg.averaging)
    return SegmentResult(
        row=segment.row,
        col=segment.col,
        theta_elev=sat.elevation,
        azimuth=sat.azimuth,
        pl_grid=grid.reshape(mesh.n, mesh.n),
        mean_pl=mean_pl,
        baseline_pl=baseline,
        excess_loss=mean_pl - baseline,
        mu=segment.mu,
        h_avg=segment.h_avg,
        los_fraction=float(los.mean()),
    )


def _simulate_one(args):
    return simulate_segment(*args)


def stitch(results: list[SegmentResult], rows: int, cols: int) -> np.ndarray:
    """Assemble per-segment grids into one raster, north row first."""
    n = results[0].pl_grid.shape[0]
    raster = np.full((rows * n, cols * n), np.nan)
    for res in results:
        # segment grids run south to north; flip so the raster reads like a map
        r0 = (rows - 1 - res.row) * n
        raster[r0 : r0 + n, res.col * n : (res.col + 1) * n] = res.pl_grid[::-1]
    return raster


def simulate_area(
    scene: Scene,
    grid: list[list[Segment]] | None,
    sat: SatelliteGeometry,
    cfg: SimulationConfig | None = None,
    workers: int = 1,
) -> tuple[list[SegmentResult], np.ndarray]:
    """Simulate every segment; returns results in (row, col) order and the stitched raster."""
    cfg = cfg or SimulationConfig()
    if grid is None:
        grid = partition(scene, cfg.seg_size_deg)
    segments = [seg for line in grid for seg in line]
    jobs = [(scene, seg, sat, cfg) for seg in segments]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_simulate_one, jobs))
    else:
        results = [_simulate_one(job) for job in jobs]
    results.sort(key=lambda r: (r.row, r.col))
    raster = stitch(results, len(grid), len(grid[0]))
    return results, raster


# -- file formats ---------------------------------------------------------


def fmt(x: float) -> str:
    """Six significant digits; NaN for missing values."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "NaN"
    return f"{x:.6g}"


def round6(x):
    if isinstance(x, float):
        return x if math.isnan(x) or math.isinf(x) else float(f"{x:.6g}")
    return x


def export_heatmap(raster: np.ndarray, path) -> None:
    """Write a raster as row-major CSV with NaN for building cells."""
    raster = np.atleast_2d(raster)
    if raster.size == 0:
        raise ValueError("raster is empty")
    lines = [",".join(fmt(float(v)) for v in row) for row in raster]
    Path(path).write_text("\n".join(lines) + "\n")


def import_heatmap(path) -> np.ndarray:
    rows = [line.split(",") for line in Path(path).read_text().splitlines() if line.strip()]
    return np.array([[float(v) for v in row] for row in rows])


def write_results(results: list[SegmentResult], path) -> None:
    """Per-segment results as a JSON array (input format of the fitter)."""
    records = []
    for res in results:
        rec = {k: round6(v) for k, v in res.to_record().items()}
        # JSON has no NaN; empty segments carry null statistics
        records.append({k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in rec.items()})
    Path(path).write_text(json.dumps(records, indent=1) + "\n")


def read_results(path) -> list[dict]:
    data = json.loads(Path(path).read_text())
    if not isinstance(data, list):
        raise ValueError(f"{path}: expected a JSON array of segment records")
    return data
