"""Building scenes, segment grids and per-segment environment metrics.

Scene files are JSON::

    {
      "origin": {"lat_deg": 51.55, "lon_deg": -0.08},
      "bbox": {"lat_min": ..., "lat_max": ..., "lon_min": ..., "lon_max": ...},
      "terrain_height_m": 0.0,
      "buildings": [{"height_m": 12.0, "footprint": [[x, y], ...]}, ...]
    }

Footprints are in the local planar frame (meters east/north of ``origin``).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import shapely
from shapely.geometry import Polygon, box
from shapely.ops import unary_union

from .geom import to_local

# Slack for float noise when checking that footprints sit inside the bbox.
_BBOX_TOL_M = 1e-6


class SceneError(ValueError):
    """Invalid scene file or scene contents."""


@dataclass(frozen=True)
class BuildingFootprint:
    vertices: tuple[tuple[float, float], ...]
    height: float

    def __post_init__(self):
        if len(self.vertices) < 3:
            raise SceneError(f"footprint needs at least 3 vertices, got {len(self.vertices)}")
        if not self.height > 0:
            raise SceneError(f"building height must be positive, got {self.height}")

    @cached_property
    def polygon(self) -> Polygon:
        return Polygon(self.vertices)


@dataclass(frozen=True)
class GeoBox:
    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float

    def __post_init__(self):
        if not (self.lat_max > self.lat_min and self.lon_max > self.lon_min):
            raise SceneError(f"bbox spans must be positive: {self}")

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.lat_min + self.lat_max), 0.5 * (self.lon_min + self.lon_max))


@dataclass(frozen=True)
class Scene:
    """Immutable set of extruded building prisms."""

    buildings: tuple[BuildingFootprint, ...]
    origin: tuple[float, float]
    bbox: GeoBox
    terrain_height: float = 0.0

    def local_rect(self, gbox: GeoBox) -> tuple[float, float, float, float]:
        """(xmin, ymin, xmax, ymax) of a geodetic box in the local frame."""
        x0, y0 = to_local(self.origin, (gbox.lat_min, gbox.lon_min))
        x1, y1 = to_local(self.origin, (gbox.lat_max, gbox.lon_max))
        return x0, y0, x1, y1

    def without_buildings(self) -> Scene:
        return Scene((), self.origin, self.bbox, self.terrain_height)

    @cached_property
    def footprint_union(self):
        return unary_union([b.polygon for b in self.buildings])

    @cached_property
    def tree(self) -> shapely.STRtree:
        return shapely.STRtree([b.polygon for b in self.buildings])

    @cached_property
    def edges(self) -> np.ndarray:
        """Wall edges as an (E, 4) array of ax, ay, bx, by."""
        rows = [
            (*vs[i], *vs[(i + 1) % len(vs)])
            for vs in (b.vertices for b in self.buildings)
            for i in range(len(vs))
        ]
        return np.array(rows, dtype=float).reshape(-1, 4)

    @cached_property
    def edge_building(self) -> np.ndarray:
        return np.repeat(np.arange(len(self.buildings)), [len(b.vertices) for b in self.buildings])

    @cached_property
    def edge_index(self) -> np.ndarray:
        """Index of each edge within its own footprint."""
        return np.concatenate([np.arange(len(b.vertices)) for b in self.buildings] or [np.zeros(0, int)])

    @cached_property
    def edge_top(self) -> np.ndarray:
        heights = np.array([b.height for b in self.buildings], dtype=float)
        return self.terrain_height + heights[self.edge_building]

    @cached_property
    def building_bounds(self) -> np.ndarray:
        """(B, 4) array of xmin, ymin, xmax, ymax per footprint."""
        if not self.buildings:
            return np.zeros((0, 4))
        return np.array([b.polygon.bounds for b in self.buildings])

    @cached_property
    def max_top(self) -> float:
        return self.terrain_height + max((b.height for b in self.buildings), default=0.0)

    def buildings_near(self, rect: tuple[float, float, float, float], margin: float) -> np.ndarray:
        """Indices of buildings whose bounds come within `margin` of `rect`."""
        bb = self.building_bounds
        x0, y0, x1, y1 = rect
        hit = (
            (bb[:, 0] <= x1 + margin)
            & (bb[:, 2] >= x0 - margin)
            & (bb[:, 1] <= y1 + margin)
            & (bb[:, 3] >= y0 - margin)
        )
        return np.flatnonzero(hit)


@dataclass(frozen=True)
class ReceiverMesh:
    """n*n receiver points; ``interior`` marks points inside a footprint."""

    n: int
    points: np.ndarray
    interior: np.ndarray

    @property
    def active(self) -> np.ndarray:
        return self.points[~self.interior]

    @property
    def n_active(self) -> int:
        return int((~self.interior).sum())


@dataclass(frozen=True)
class Segment:
    row: int
    col: int
    bbox: GeoBox
    rect: tuple[float, float, float, float]
    mu: float = 0.0
    h_avg: float = 0.0
    receiver_points: ReceiverMesh | None = field(default=None, compare=False)

    @property
    def area(self) -> float:
        x0, y0, x1, y1 = self.rect
        return (x1 - x0) * (y1 - y0)


def _ccw(vertices: list[tuple[float, float]]) -> list[tuple[float, float]]:
    # drop a closing vertex if the exporter repeated the first point
    if len(vertices) > 3 and vertices[0] == vertices[-1]:
        vertices = vertices[:-1]
    area2 = sum(
        vertices[i][0] * vertices[(i + 1) % len(vertices)][1]
        - vertices[(i + 1) % len(vertices)][0] * vertices[i][1]
        for i in range(len(vertices))
    )
    return vertices if area2 > 0 else vertices[::-1]


def validate_scene(scene: Scene) -> None:
    x0, y0, x1, y1 = scene.local_rect(scene.bbox)
    for i, b in enumerate(scene.buildings):
        poly = b.polygon
        if not poly.is_valid or poly.area <= 0:
            raise SceneError(f"building {i}: footprint is not a simple polygon")
        bx0, by0, bx1, by1 = poly.bounds
        if (
            bx0 < x0 - _BBOX_TOL_M
            or by0 < y0 - _BBOX_TOL_M
            or bx1 > x1 + _BBOX_TOL_M
            or by1 > y1 + _BBOX_TOL_M
        ):
            raise SceneError(f"building {i}: footprint lies outside the scene bbox")


def scene_from_dict(data: dict) -> Scene:
    try:
        origin = (float(data["origin"]["lat_deg"]), float(data["origin"]["lon_deg"]))
        bb = data["bbox"]
        gbox = GeoBox(float(bb["lat_min"]), float(bb["lat_max"]), float(bb["lon_min"]), float(bb["lon_max"]))
        terrain = float(data.get("terrain_height_m", 0.0))
        raw = data["buildings"]
    except (KeyError, TypeError, ValueError) as exc:
        raise SceneError(f"malformed scene: {exc}") from exc

    buildings = []
    for i, item in enumerate(raw):
        try:
            verts = [(float(x), float(y)) for x, y in item["footprint"]]
            height = float(item["height_m"])
        except (KeyError, TypeError, ValueError) as exc:
            raise SceneError(f"building {i}: malformed entry ({exc})") from exc
        if len(verts) < 3:
            raise SceneError(f"building {i}: footprint has {len(verts)} vertices, need at least 3")
        if not height > 0:
            raise SceneError(f"building {i}: non-positive height {height}")
        buildings.append(BuildingFootprint(tuple(_ccw(verts)), height))

    scene = Scene(tuple(buildings), origin, gbox, terrain)
    validate_scene(scene)
    return scene


def scene_to_dict(scene: Scene) -> dict:
    return {
        "origin": {"lat_deg": scene.origin[0], "lon_deg": scene.origin[1]},
        "bbox": {
            "lat_min": scene.bbox.lat_min,
            "lat_max": scene.bbox.lat_max,
            "lon_min": scene.bbox.lon_min,
            "lon_max": scene.bbox.lon_max,
        },
        "terrain_height_m": scene.terrain_height,
        "buildings": [
            {"height_m": b.height, "footprint": [list(v) for v in b.vertices]} for b in scene.buildings
        ],
    }


def load_scene(path) -> Scene:
    """Read and validate a scene file."""
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SceneError(f"{path}: not valid JSON ({exc})") from exc
    return scene_from_dict(data)


def save_scene(scene: Scene, path) -> None:
    Path(path).write_text(json.dumps(scene_to_dict(scene), indent=1) + "\n")


def _clipped(scene: Scene, rect: tuple[float, float, float, float]):
    """Yield (building, clipped polygon) for footprints overlapping `rect`."""
    cell = box(*rect)
    for i in sorted(scene.tree.query(cell)):
        b = scene.buildings[i]
        part = b.polygon.intersection(cell)
        if part.area > 0:
            yield b, part


def building_density(scene: Scene, segment: Segment) -> float:
    """Fraction of the segment area covered by the union of footprints."""
    if not scene.buildings:
        return 0.0
    parts = [part for _, part in _clipped(scene, segment.rect)]
    if not parts:
        return 0.0
    covered = unary_union(parts).area
    return min(1.0, covered / segment.area)


def avg_building_height(scene: Scene, segment: Segment) -> float:
    """Clipped-area-weighted mean height of buildings touching the segment."""
    if not scene.buildings:
        return 0.0
    weights, heights = [], []
    for b, part in _clipped(scene, segment.rect):
        weights.append(part.area)
        heights.append(b.height)
    if not weights:
        return 0.0
    return float(np.average(heights, weights=weights))


def receiver_mesh(scene: Scene, segment: Segment, n: int = 100, rx_height: float = 1.0) -> ReceiverMesh:
    """Cell-centred n x n grid over the segment at ``terrain + rx_height``.

    Points on or inside a footprint are flagged interior.
    """
    if n < 1:
        raise ValueError(f"mesh size must be >= 1, got {n}")
    if not rx_height > 0:
        raise ValueError(f"receiver height must be positive, got {rx_height}")
    x0, y0, x1, y1 = segment.rect
    xs = x0 + (np.arange(n) + 0.5) * (x1 - x0) / n
    ys = y0 + (np.arange(n) + 0.5) * (y1 - y0) / n
    # row-major, south to north, west to east
    gx, gy = np.meshgrid(xs, ys)
    gx, gy = gx.ravel(), gy.ravel()
    z = np.full(gx.shape, scene.terrain_height + rx_height)
    if scene.buildings:
        interior = shapely.intersects_xy(scene.footprint_union, gx, gy)
    else:
        interior = np.zeros(gx.shape, dtype=bool)
    return ReceiverMesh(n, np.column_stack([gx, gy, z]), np.asarray(interior, dtype=bool))


def grid_shape(bbox: GeoBox, seg_size_deg: float) -> tuple[int, int]:
    if not seg_size_deg > 0:
        raise ValueError(f"segment size must be positive, got {seg_size_deg}")
    # tiny slack so spans that are exact multiples survive float rounding
    rows = math.floor((bbox.lat_max - bbox.lat_min) / seg_size_deg + 1e-9)
    cols = math.floor((bbox.lon_max - bbox.lon_min) / seg_size_deg + 1e-9)
    return rows, cols


def partition(
    scene: Scene,
    seg_size_deg: float = 0.005,
    mesh_n: int | None = None,
    rx_height: float = 1.0,
) -> list[list[Segment]]:
    """Split the scene bbox into full-size segments from the south-west corner.

    Row 0 is the southernmost row. Residual slivers are dropped. When
    `mesh_n` is given each segment also carries its receiver mesh.
    """
    rows, cols = grid_shape(scene.bbox, seg_size_deg)
    if rows < 1 or cols < 1:
        raise ValueError("no full segment fits inside the scene bbox")
    grid = []
    for r in range(rows):
        line = []
        for c in range(cols):
            gbox = GeoBox(
                scene.bbox.lat_min + r * seg_size_deg,
                scene.bbox.lat_min + (r + 1) * seg_size_deg,
                scene.bbox.lon_min + c * seg_size_deg,
                scene.bbox.lon_min + (c + 1) * seg_size_deg,
            )
            seg = Segment(r, c, gbox, scene.local_rect(gbox))
            mu = building_density(scene, seg)
            h = avg_building_height(scene, seg)
            mesh = receiver_mesh(scene, seg, mesh_n, rx_height) if mesh_n else None
            line.append(Segment(r, c, gbox, seg.rect, mu, h, mesh))
        grid.append(line)
    return grid
