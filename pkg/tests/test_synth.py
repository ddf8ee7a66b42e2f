import numpy as np
import pytest

from s2gchannel.scene import partition, save_scene
from s2gchannel.synth import generate_manhattan


def test_zero_density_is_empty():
    assert generate_manhattan(0.0, 8.9).buildings == ()


@pytest.mark.parametrize("mu", [0.05, 0.3, 0.5])
def test_measured_density_matches_target(mu):
    scene = generate_manhattan(mu, 8.9, rows=2, cols=2, seed=1)
    for line in partition(scene, 0.005):
        for seg in line:
            assert seg.mu == pytest.approx(mu, abs=0.02)
            assert seg.h_avg == pytest.approx(8.9, rel=1e-9)


def test_height_spread_keeps_mean():
    scene = generate_manhattan(0.3, 12.0, height_spread=0.5, seed=3)
    hs = np.array([b.height for b in scene.buildings])
    assert hs.min() < 12 < hs.max()
    assert hs.mean() == pytest.approx(12.0)


def test_same_seed_same_bytes(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    save_scene(generate_manhattan(0.3, 8.9, height_spread=0.3, seed=7), a)
    save_scene(generate_manhattan(0.3, 8.9, height_spread=0.3, seed=7), b)
    assert a.read_bytes() == b.read_bytes()
    save_scene(generate_manhattan(0.3, 8.9, height_spread=0.3, seed=8), b)
    assert a.read_bytes() != b.read_bytes()


def test_streets_stay_open():
    scene = generate_manhattan(0.5, 10, seed=2)
    polys = [b.polygon for b in scene.buildings]
    gaps = [p.distance(q) for i, p in enumerate(polys) for q in polys[i + 1:] if p.distance(q) < 30]
    assert min(gaps) >= 12.0 - 1e-6


def test_infeasible_density():
    with pytest.raises(ValueError, match="infeasible"):
        generate_manhattan(0.9, 8.9)


@pytest.mark.parametrize("kw", [dict(density=1.5), dict(density=0.3, mean_height=0), dict(density=0.3, height_spread=1.0)])
def test_rejects(kw):
    kw.setdefault("mean_height", 8.9)
    with pytest.raises(ValueError):
        generate_manhattan(**kw)
