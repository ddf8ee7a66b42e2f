"""Deterministic site-specific ray tracing under plane-wave illumination.

The satellite is far enough away that every receiver sees the same
direction of arrival. Paths are traced backwards from the receiver: the
line of sight, image-method specular reflections off building walls, and
a single knife-edge diffraction over the dominant roof edge in the
vertical plane of arrival.

Path lengths are measured from the receiver to a reference wavefront (a
plane normal to the arrival direction above the scene), so length
differences between paths are exact and the common remainder out to the
satellite is carried by the slant range.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .geom import slant_range
from .propagation import free_space_loss
from .scene import Scene

C_LIGHT = 299_792_458.0
# parametric slack used to step off the surface a leg starts or ends on
_EPS = 1e-9


@dataclass(frozen=True)
class Interaction:
    kind: str  # "reflection" | "diffraction"
    surface: str


@dataclass(frozen=True)
class RayPath:
    vertices: tuple[tuple[float, float, float], ...]
    interactions: tuple[Interaction, ...]
    length: float
    loss: float
    phase: float

    @property
    def kinds(self) -> str:
        return "+".join(i.kind for i in self.interactions) or "los"


@dataclass(frozen=True)
class TracerConfig:
    max_reflections: int = 2
    enable_diffraction: bool = True
    reflection_model: str = "fresnel"
    fixed_reflection_loss: float = 6.0
    relative_permittivity: float = 5.31

    def __post_init__(self):
        if self.max_reflections < 0:
            raise ValueError("max_reflections must be >= 0")
        if self.fixed_reflection_loss < 0:
            raise ValueError("fixed_reflection_loss must be >= 0")
        if self.reflection_model not in ("fresnel", "fixed"):
            raise ValueError(f"unknown reflection model {self.reflection_model!r}")
        if not self.relative_permittivity >= 1:
            raise ValueError("relative_permittivity must be >= 1")


def wavelength(f_c: float) -> float:
    """Wavelength in meters for a carrier in GHz."""
    return C_LIGHT / (f_c * 1e9)


def path_phase(length: float, f_c: float) -> float:
    return (2 * math.pi * length / wavelength(f_c)) % (2 * math.pi)


def knife_edge_loss(v: float) -> float:
    """Single knife-edge diffraction loss (dB) for clearance parameter v."""
    if v <= -0.78:
        return 0.0
    return 6.9 + 20 * math.log10(math.sqrt((v - 0.1) ** 2 + 1) + v - 0.1)


def diffraction_parameter(h_e: float, d1: float, d2: float, wavelength_m: float) -> float:
    """Fresnel-Kirchhoff v for an edge `h_e` m above the direct path.

    d1 and d2 are the distances (m) from the edge to each terminal.
    """
    return h_e * math.sqrt(2 * (d1 + d2) / (wavelength_m * d1 * d2))


def reflection_loss(cos_incidence: float, cfg: TracerConfig) -> float:
    """Specular reflection loss, perpendicular polarisation."""
    if cfg.reflection_model == "fixed":
        return cfg.fixed_reflection_loss
    c = min(max(cos_incidence, 0.0), 1.0)
    root = math.sqrt(cfg.relative_permittivity - (1 - c * c))
    gamma = abs((c - root) / (c + root))
    if gamma == 0.0:
        return math.inf
    return -20 * math.log10(gamma)


def aggregate_loss(rays, l_fs_ref: float, deep_fade_cap: float = 240.0) -> float:
    """Coherent multipath loss relative to the free-space reference.

    Field amplitudes 10**(-loss/20) are summed with their phases; the
    total power loss is clamped at `deep_fade_cap`. An empty ray list
    returns ``inf`` (fully blocked).
    """
    rays = list(rays)
    if not rays:
        return math.inf
    loss = np.array([r.loss for r in rays])
    phase = np.array([r.phase for r in rays])
    field = np.sum(10 ** (-loss / 20) * np.exp(-1j * phase))
    mag = abs(field)
    total = deep_fade_cap if mag == 0 else min(-20 * math.log10(mag), deep_fade_cap)
    return total - l_fs_ref


def _elevation_of(direction: np.ndarray) -> float:
    return math.degrees(math.asin(max(-1.0, min(1.0, float(direction[2])))))


class _Walls:
    """Wall edges of a subset of a scene, as flat arrays."""

    def __init__(self, scene: Scene, building_ids=None):
        if building_ids is None:
            mask = np.ones(len(scene.edge_building), dtype=bool)
        else:
            mask = np.isin(scene.edge_building, np.asarray(building_ids, dtype=int))
        e = scene.edges[mask]
        self.a = e[:, 0:2]
        self.b = e[:, 2:4]
        self.vec = self.b - self.a
        lengths = np.hypot(self.vec[:, 0], self.vec[:, 1])
        # outward normal of a counter-clockwise footprint edge
        self.normal = np.column_stack([self.vec[:, 1], -self.vec[:, 0]]) / np.where(lengths > 0, lengths, 1.0)[:, None]
        self.top = scene.edge_top[mask]
        self.building = scene.edge_building[mask]
        self.index = scene.edge_index[mask]
        self.len2 = lengths**2

    def __len__(self):
        return len(self.top)

    def subset(self, keep: np.ndarray) -> _Walls:
        out = object.__new__(_Walls)
        for name in ("a", "b", "vec", "normal", "top", "building", "index", "len2"):
            setattr(out, name, getattr(self, name)[keep])
        return out

    def surface_id(self, k: int) -> str:
        return f"b{int(self.building[k])}:e{int(self.index[k])}"

    def crossings(self, origins: np.ndarray, step: np.ndarray) -> np.ndarray:
        """Parameter t at which origin + t*step crosses each wall (horizontally).

        origins: (P, 2) or (2,); step: (P, 2) or (2,). Returns (P, E) with
        ``inf`` for no crossing.
        """
        o = np.atleast_2d(origins)[:, None, :]
        d = np.atleast_2d(step)[:, None, :]
        e = self.vec[None, :, :]
        ap = self.a[None, :, :] - o
        denom = d[..., 0] * e[..., 1] - d[..., 1] * e[..., 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (ap[..., 0] * e[..., 1] - ap[..., 1] * e[..., 0]) / denom
            s = (ap[..., 0] * d[..., 1] - ap[..., 1] * d[..., 0]) / denom
        ok = (denom != 0) & (s >= 0) & (s <= 1)
        return np.where(ok, t, np.inf)

    def blocked(self, origin: np.ndarray, step: np.ndarray, t_min: float, t_max: float) -> bool:
        """Whether the 3D leg origin + t*step, t in (t_min, t_max), passes through a prism."""
        if len(self) == 0 or (step[0] == 0 and step[1] == 0):
            return False
        t = self.crossings(origin[:2], step[:2])[0]
        hit = (t > t_min) & (t < t_max)
        if not hit.any():
            return False
        z = origin[2] + t[hit] * step[2]
        return bool(np.any(z < self.top[hit]))


class RayTracer:
    """Traces paths to receivers in one scene for one arrival direction."""

    def __init__(
        self,
        scene: Scene,
        direction,
        cfg: TracerConfig | None = None,
        f_c: float = 3.4,
        slant_range_km: float | None = None,
        building_ids=None,
    ):
        self.scene = scene
        self.dir = np.asarray(direction, dtype=float)
        if not self.dir[2] > 0:
            raise ValueError("arrival direction must point upwards")
        self.cfg = cfg or TracerConfig()
        self.f_c = f_c
        self.wavelength = wavelength(f_c)
        if slant_range_km is None:
            slant_range_km = slant_range(550.0, _elevation_of(self.dir))
        self.slant_m = slant_range_km * 1000.0
        self.l_fs_ref = free_space_loss(f_c, slant_range_km)
        self.walls = _Walls(scene, building_ids)
        horiz = math.hypot(self.dir[0], self.dir[1])
        self.tan_elev = math.inf if horiz == 0 else self.dir[2] / horiz
        # reference wavefront p . dir = s0 lies above and beyond the scene
        x0, y0, x1, y1 = scene.local_rect(scene.bbox)
        corners = np.array([[x, y, scene.max_top + 1.0] for x in (x0, x1) for y in (y0, y1)])
        self.s0 = float(np.max(corners @ self.dir)) + 1.0

    # -- line of sight -------------------------------------------------

    def los_blocked_many(self, points: np.ndarray, chunk: int = 2048) -> np.ndarray:
        """Blockage flag for each receiver in `points` (P, 3)."""
        points = np.atleast_2d(points)
        out = np.zeros(len(points), dtype=bool)
        if len(self.walls) == 0 or math.isinf(self.tan_elev):
            return out
        step = self.dir[:2]
        for lo in range(0, len(points), chunk):
            p = points[lo : lo + chunk]
            t = self.walls.crossings(p[:, :2], step)
            z = p[:, 2:3] + t * self.dir[2]
            out[lo : lo + chunk] = np.any((t > _EPS) & np.isfinite(t) & (z < self.walls.top[None, :]), axis=1)
        return out

    def los_blocked(self, rx) -> bool:
        return bool(self.los_blocked_many(np.asarray(rx, dtype=float)[None, :])[0])

    # -- path bookkeeping ------------------------------------------------

    def _ref_length(self, p: np.ndarray) -> float:
        return self.s0 - float(p @ self.dir)

    def _exit(self, p: np.ndarray) -> np.ndarray:
        return p + self._ref_length(p) * self.dir

    def _make_path(self, rx, points, interactions, extra_loss) -> RayPath:
        legs = [np.linalg.norm(points[i + 1] - points[i]) for i in range(len(points) - 1)]
        length = float(sum(legs)) + self._ref_length(points[-1])
        excess = length - self._ref_length(rx)
        loss = free_space_loss(self.f_c, (self.slant_m + excess) / 1000.0) + extra_loss
        verts = [*points, self._exit(points[-1])]
        return RayPath(
            vertices=tuple(tuple(float(c) for c in v) for v in verts),
            interactions=tuple(interactions),
            length=length,
            loss=loss,
            phase=path_phase(length, self.f_c),
        )

    def los_path(self, rx: np.ndarray) -> RayPath:
        return RayPath(
            vertices=(tuple(map(float, rx)), tuple(map(float, self._exit(rx)))),
            interactions=(),
            length=self._ref_length(rx),
            loss=self.l_fs_ref,
            phase=path_phase(self._ref_length(rx), self.f_c),
        )

    def _nearby(self, rx: np.ndarray) -> _Walls:
        if math.isinf(self.tan_elev):
            return self.walls.subset(np.zeros(len(self.walls), dtype=bool))
        reach = max(self.scene.max_top - rx[2], 0.0) / self.tan_elev
        p = rx[:2]
        ap = p[None, :] - self.walls.a
        w = np.clip(np.einsum("ij,ij->i", ap, self.walls.vec) / np.where(self.walls.len2 > 0, self.walls.len2, 1), 0, 1)
        dist = np.hypot(*(ap - w[:, None] * self.walls.vec).T)
        return self.walls.subset(dist <= reach + 1e-9)

    # -- reflections -----------------------------------------------------

    def _reflections(self, rx: np.ndarray, walls: _Walls, order: int) -> list[RayPath]:
        n_w = len(walls)
        if n_w == 0 or order < 1:
            return []
        combos = np.array(list(itertools.product(range(n_w), repeat=order)), dtype=int).reshape(-1, order)
        if order > 1:
            combos = combos[np.all(combos[:, 1:] != combos[:, :-1], axis=1)]
        if len(combos) == 0:
            return []
        k = len(combos)
        normals = np.concatenate([walls.normal, np.zeros((n_w, 1))], axis=1)

        # g[j]: direction of travel back toward the sky after reflection j
        g = [np.broadcast_to(self.dir, (k, 3))]
        ok = np.ones(k, dtype=bool)
        cos_inc = []
        for j in range(order):
            n = normals[combos[:, j]]
            dn = np.einsum("ij,ij->i", g[-1], n)
            ok &= dn > 1e-12
            cos_inc.append(dn)
            g.append(g[-1] - 2 * dn[:, None] * n)

        # backtrack from the receiver through walls order-1 .. 0
        pos = np.broadcast_to(rx, (k, 3)).copy()
        hits = [None] * order
        for j in reversed(range(order)):
            w = combos[:, j]
            n = normals[w]
            a = np.concatenate([walls.a[w], np.zeros((k, 1))], axis=1)
            front = np.einsum("ij,ij->i", pos - a, n)
            gn = np.einsum("ij,ij->i", g[j + 1], n)
            with np.errstate(divide="ignore", invalid="ignore"):
                s = front / -gn
            ok &= (front > 1e-9) & (gn < 0)
            s = np.where(ok, s, 0.0)
            q = pos + s[:, None] * g[j + 1]
            along = np.einsum("ij,ij->i", q[:, :2] - walls.a[w], walls.vec[w]) / walls.len2[w]
            ok &= (along >= 0) & (along <= 1) & (q[:, 2] <= walls.top[w]) & (q[:, 2] >= self.scene.terrain_height)
            hits[j] = q
            pos = q

        paths = []
        for idx in np.flatnonzero(ok):
            pts = [rx] + [hits[j][idx] for j in reversed(range(order))]
            if any(
                walls.blocked(pts[i], pts[i + 1] - pts[i], _EPS, 1 - _EPS) for i in range(len(pts) - 1)
            ):
                continue
            if walls.blocked(pts[-1], self.dir, _EPS, math.inf):
                continue
            extra = sum(reflection_loss(float(cos_inc[j][idx]), self.cfg) for j in range(order))
            inter = [
                Interaction("reflection", walls.surface_id(int(combos[idx, j]))) for j in reversed(range(order))
            ]
            paths.append(self._make_path(rx, pts, inter, extra))
        return paths

    # -- diffraction -----------------------------------------------------

    def _diffraction(self, rx: np.ndarray, walls: _Walls) -> list[RayPath]:
        if len(walls) == 0 or math.isinf(self.tan_elev):
            return []
        horiz = self.dir[:2] / math.hypot(self.dir[0], self.dir[1])
        x = walls.crossings(rx[:2], horiz)[0]
        valid = np.isfinite(x) & (x > 1e-9)
        if not valid.any():
            return []
        slope = np.where(valid, (walls.top - rx[2]) / np.where(valid, x, 1.0), -np.inf)
        k = int(np.argmax(slope))
        if slope[k] <= self.tan_elev:
            return []
        xk = float(x[k])
        edge = np.array([rx[0] + xk * horiz[0], rx[1] + xk * horiz[1], float(walls.top[k])])
        h_e = edge[2] - (rx[2] + xk * self.tan_elev)
        d2 = float(np.linalg.norm(edge - rx))
        v = diffraction_parameter(h_e, self.slant_m, d2, self.wavelength)
        inter = [Interaction("diffraction", walls.surface_id(k) + ":roof")]
        return [self._make_path(rx, [rx, edge], inter, knife_edge_loss(v))]

    # -- public ----------------------------------------------------------

    def trace(self, rx) -> list[RayPath]:
        rx = np.asarray(rx, dtype=float)
        walls = self._nearby(rx)
        paths = []
        for order in range(1, self.cfg.max_reflections + 1):
            paths.extend(self._reflections(rx, walls, order))
        blocked = walls.blocked(rx, self.dir, _EPS, math.inf)
        if blocked and self.cfg.enable_diffraction:
            paths.extend(self._diffraction(rx, walls))
        paths.sort(key=lambda p: (p.length, tuple((i.kind, i.surface) for i in p.interactions)))
        if not blocked:
            paths.insert(0, self.los_path(rx))
        return paths


def los_blocked(scene: Scene, rx, direction) -> bool:
    """True if the upward ray from `rx` along `direction` hits a building."""
    return RayTracer(scene, direction, slant_range_km=550.0).los_blocked(rx)


def trace(
    scene: Scene,
    rx,
    direction,
    cfg: TracerConfig | None = None,
    f_c: float = 3.4,
    altitude_km: float = 550.0,
) -> list[RayPath]:
    """All traced paths to `rx`: line of sight first, then by length."""
    direction = np.asarray(direction, dtype=float)
    d = slant_range(altitude_km, _elevation_of(direction))
    return RayTracer(scene, direction, cfg, f_c, d).trace(rx)


def write_ray_dump(records, path) -> None:
    """Write (receiver index, RayPath) records as CSV."""
    with open(path, "w") as fh:
        fh.write("rx_index,interactions,length_m,loss_db,phase_rad\n")
        for idx, ray in records:
            fh.write(f"{idx},{ray.kinds},{ray.length:.6f},{ray.loss:.6f},{ray.phase:.6f}\n")


__all__ = [
    "Interaction",
    "RayPath",
    "RayTracer",
    "TracerConfig",
    "aggregate_loss",
    "diffraction_parameter",
    "knife_edge_loss",
    "los_blocked",
    "reflection_loss",
    "trace",
    "wavelength",
    "write_ray_dump",
]
