"""Seeded synthetic city scenes (Manhattan street grid)."""

from __future__ import annotations

import math

import numpy as np

from .scene import BuildingFootprint, GeoBox, Scene, validate_scene


def generate_manhattan(
    density: float,
    mean_height: float,
    *,
    height_spread: float = 0.0,
    street_width: float = 12.0,
    block_pitch: float = 60.0,
    rows: int = 1,
    cols: int = 1,
    seg_size_deg: float = 0.005,
    center: tuple[float, float] = (51.554, -0.0848),
    jitter: bool = True,
    seed: int = 0,
) -> Scene:
    """Build a scene of ``rows x cols`` segments tiled with city blocks.

    Every block holds one rectangular building covering ``density`` of the
    block, so each segment's building density equals the target exactly.
    Heights are drawn uniformly within ``mean_height * (1 +/- height_spread)``
    and rescaled per segment so the segment mean equals ``mean_height``.

    Raises ValueError when the density does not leave ``street_width`` of
    open ground between neighbouring buildings.
    """
    if not 0 <= density <= 1:
        raise ValueError(f"density must be in [0, 1], got {density}")
    if density > 0 and not mean_height > 0:
        raise ValueError(f"mean height must be positive, got {mean_height}")
    if not 0 <= height_spread < 1:
        raise ValueError(f"height_spread must be in [0, 1), got {height_spread}")
    rng = np.random.default_rng(seed)

    lat_c, lon_c = center
    gbox = GeoBox(
        lat_c - rows * seg_size_deg / 2,
        lat_c + rows * seg_size_deg / 2,
        lon_c - cols * seg_size_deg / 2,
        lon_c + cols * seg_size_deg / 2,
    )
    empty = Scene((), gbox.center, gbox, 0.0)
    if density == 0:
        return empty

    frac = math.sqrt(density)
    buildings = []
    for r in range(rows):
        for c in range(cols):
            seg_box = GeoBox(
                gbox.lat_min + r * seg_size_deg,
                gbox.lat_min + (r + 1) * seg_size_deg,
                gbox.lon_min + c * seg_size_deg,
                gbox.lon_min + (c + 1) * seg_size_deg,
            )
            x0, y0, x1, y1 = empty.local_rect(seg_box)
            kx = max(1, round((x1 - x0) / block_pitch))
            ky = max(1, round((y1 - y0) / block_pitch))
            px, py = (x1 - x0) / kx, (y1 - y0) / ky
            sx, sy = frac * px, frac * py
            slack_x, slack_y = px - sx - street_width, py - sy - street_width
            if slack_x < 0 or slack_y < 0:
                limit = (1 - street_width / min(px, py)) ** 2
                raise ValueError(f"density {density} infeasible with {street_width} m streets (limit {limit:.3f})")

            heights = mean_height * rng.uniform(1 - height_spread, 1 + height_spread, size=kx * ky)
            heights *= mean_height / heights.mean()
            if jitter:
                offsets = rng.uniform(0, 1, size=(kx * ky, 2)) * [slack_x, slack_y]
            else:
                offsets = np.tile([slack_x / 2, slack_y / 2], (kx * ky, 1))
            for k in range(kx * ky):
                i, j = k % kx, k // kx
                bx = x0 + i * px + street_width / 2 + offsets[k, 0]
                by = y0 + j * py + street_width / 2 + offsets[k, 1]
                verts = ((bx, by), (bx + sx, by), (bx + sx, by + sy), (bx, by + sy))
                buildings.append(BuildingFootprint(verts, float(heights[k])))

    scene = Scene(tuple(buildings), gbox.center, gbox, 0.0)
    validate_scene(scene)
    return scene
