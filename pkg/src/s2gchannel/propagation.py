"""Closed-form link-budget terms and their composition into total path loss.

All losses are in dB, frequencies in GHz, distances in km.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

# 20*log10(4*pi*1e9*1e3/c): constant for f in GHz and d in km
FSPL_CONST_GHZ_KM = 92.45


@dataclass(frozen=True)
class LinkBudgetConfig:
    f_c: float = 3.4
    rain_loss: float = 0.0
    cloud_loss: float = 0.0
    glass_fraction: float = 0.7
    concrete_fraction: float = 0.3
    wall_factor: float = 2.0
    deep_fade_cap: float = 240.0

    def __post_init__(self):
        if not self.f_c > 0:
            raise ValueError(f"f_c must be positive, got {self.f_c}")
        if self.rain_loss < 0 or self.cloud_loss < 0:
            raise ValueError("rain and cloud losses must be non-negative")
        if not math.isclose(self.glass_fraction + self.concrete_fraction, 1.0, abs_tol=1e-12):
            raise ValueError("glass_fraction + concrete_fraction must equal 1")
        if not self.deep_fade_cap > 0:
            raise ValueError("deep_fade_cap must be positive")

    @classmethod
    def from_dict(cls, data: dict) -> LinkBudgetConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown link-budget fields: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in data.items()})

    def to_dict(self) -> dict:
        return asdict(self)


def load_config(path) -> LinkBudgetConfig:
    return LinkBudgetConfig.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class PathLossBreakdown:
    L_fs: float
    L_r: float
    L_c: float
    L_ray: float
    L_wall: float
    L_scen: float
    PL_total: float
    los: bool


def free_space_loss(f_c: float, d: float) -> float:
    """Free-space path loss for `f_c` in GHz and `d` in km."""
    if not (f_c > 0 and d > 0):
        raise ValueError(f"frequency and distance must be positive (f_c={f_c}, d={d})")
    return FSPL_CONST_GHZ_KM + 20 * math.log10(f_c) + 20 * math.log10(d)


def glass_loss(f_c: float) -> float:
    """IRR glass penetration loss."""
    return 23 + 0.3 * f_c


def concrete_loss(f_c: float) -> float:
    return 5 + 4 * f_c


def o2i_penetration_loss(l_glass: float, l_concrete: float, glass_fraction=0.7, concrete_fraction=0.3) -> float:
    """Outdoor-to-indoor building penetration loss for a glass/concrete mix."""
    mix = glass_fraction * 10 ** (-l_glass / 10) + concrete_fraction * 10 ** (-l_concrete / 10)
    return 5 - 10 * math.log10(mix)


def wall_loss(f_c: float, cfg: LinkBudgetConfig | None = None) -> float:
    """Loss of a path passing through a building (two building envelopes)."""
    cfg = cfg or LinkBudgetConfig()
    if not f_c > 0:
        raise ValueError(f"f_c must be positive, got {f_c}")
    o2i = o2i_penetration_loss(glass_loss(f_c), concrete_loss(f_c), cfg.glass_fraction, cfg.concrete_fraction)
    return cfg.wall_factor * o2i


def scenario_loss(l_ray: float, l_wall: float) -> float:
    """Combine the around-the-building and through-the-building branches.

    Transmittances add, so the result never exceeds either branch. An
    infinite argument is a fully blocked branch.
    """
    t = 0.0
    for loss in (l_ray, l_wall):
        if not math.isinf(loss):
            t += 10 ** (-loss / 10)
    if t == 0.0:
        return math.inf
    return -10 * math.log10(t)


def total_path_loss(
    l_fs: float,
    cfg: LinkBudgetConfig,
    los: bool,
    l_ray: float = math.inf,
    l_wall: float | None = None,
) -> PathLossBreakdown:
    """Sum of free-space, rain, cloud and (NLoS only) scenario loss.

    PL_total is clamped at ``cfg.deep_fade_cap``.
    """
    if l_wall is None:
        l_wall = wall_loss(cfg.f_c, cfg)
    l_scen = 0.0 if los else scenario_loss(l_ray, l_wall)
    pl = l_fs + cfg.rain_loss + cfg.cloud_loss + l_scen
    if pl > cfg.deep_fade_cap:
        pl = cfg.deep_fade_cap
        l_scen = pl - (l_fs + cfg.rain_loss + cfg.cloud_loss)
    return PathLossBreakdown(
        L_fs=l_fs,
        L_r=cfg.rain_loss,
        L_c=cfg.cloud_loss,
        L_ray=0.0 if los else l_ray,
        L_wall=l_wall,
        L_scen=l_scen,
        PL_total=pl,
        los=los,
    )


def scenario_loss_array(l_ray: np.ndarray, l_wall: float) -> np.ndarray:
    """Vectorised :func:`scenario_loss` for many ray losses against one wall term."""
    l_ray = np.asarray(l_ray, dtype=float)
    t = np.where(np.isinf(l_ray), 0.0, 10 ** (-np.where(np.isinf(l_ray), 0.0, l_ray) / 10))
    t = t + (0.0 if math.isinf(l_wall) else 10 ** (-l_wall / 10))
    with np.errstate(divide="ignore"):
        return np.where(t > 0, -10 * np.log10(np.where(t > 0, t, 1.0)), np.inf)
