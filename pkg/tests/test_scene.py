import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_scene, rect
from oracles import point_in_polygon, rect_overlap_area
from s2gchannel.scene import (
    GeoBox,
    SceneError,
    avg_building_height,
    building_density,
    grid_shape,
    load_scene,
    partition,
    receiver_mesh,
    scene_to_dict,
)

PAPER_BBOX = GeoBox(51.5115, 51.5965, -0.1772, 0.0076)


def one_segment(scene):
    (seg,) = partition(scene, 0.01)[0]
    return seg


def write(tmp_path, data, name="scene.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return p


def scene_dict(buildings):
    return {
        "origin": {"lat_deg": 51.55, "lon_deg": 0.0},
        "bbox": {"lat_min": 51.545, "lat_max": 51.555, "lon_min": -0.005, "lon_max": 0.005},
        "terrain_height_m": 0.0,
        "buildings": buildings,
    }


class TestLoad:
    def test_two_buildings(self, tmp_path):
        data = scene_dict(
            [
                {"height_m": 10, "footprint": [[0, 0], [10, 0], [10, 10], [0, 10]]},
                {"height_m": 5, "footprint": [[20, 20], [30, 20], [25, 30]]},
            ]
        )
        scene = load_scene(write(tmp_path, data))
        assert len(scene.buildings) == 2

    def test_empty(self, tmp_path):
        scene = load_scene(write(tmp_path, scene_dict([])))
        assert scene.buildings == ()

    def test_two_vertex_polygon_names_building_0(self, tmp_path):
        data = scene_dict([{"height_m": 10, "footprint": [[0, 0], [10, 0]]}])
        with pytest.raises(SceneError, match="building 0"):
            load_scene(write(tmp_path, data))

    def test_non_positive_height(self, tmp_path):
        data = scene_dict(
            [
                {"height_m": 10, "footprint": [[0, 0], [10, 0], [10, 10]]},
                {"height_m": 0, "footprint": [[0, 0], [10, 0], [10, 10]]},
            ]
        )
        with pytest.raises(SceneError, match="building 1"):
            load_scene(write(tmp_path, data))

    def test_outside_bbox(self, tmp_path):
        data = scene_dict([{"height_m": 10, "footprint": [[0, 0], [5000, 0], [5000, 10]]}])
        with pytest.raises(SceneError, match="building 0.*outside"):
            load_scene(write(tmp_path, data))

    def test_self_intersecting(self, tmp_path):
        data = scene_dict([{"height_m": 10, "footprint": [[0, 0], [10, 10], [10, 0], [0, 10]]}])
        with pytest.raises(SceneError, match="building 0"):
            load_scene(write(tmp_path, data))

    def test_parse_failure(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        with pytest.raises(SceneError):
            load_scene(p)

    def test_clockwise_footprint_is_reoriented(self, tmp_path):
        data = scene_dict([{"height_m": 10, "footprint": [[0, 0], [0, 10], [10, 10], [10, 0]]}])
        scene = load_scene(write(tmp_path, data))
        assert scene.buildings[0].polygon.exterior.is_ccw

    def test_round_trip(self, tmp_path):
        data = scene_dict([{"height_m": 7.5, "footprint": [[0, 0], [10, 0], [10, 10], [0, 10]]}])
        scene = load_scene(write(tmp_path, data))
        assert scene_to_dict(scene) == data


class TestPartition:
    def test_paper_bbox(self):
        assert grid_shape(PAPER_BBOX, 0.005) == (17, 36)

    def test_single_segment(self, empty_scene):
        grid = partition(empty_scene, 0.01)
        assert len(grid) == 1 and len(grid[0]) == 1

    @pytest.mark.parametrize("size", [0.0, -0.001])
    def test_bad_size(self, empty_scene, size):
        with pytest.raises(ValueError):
            partition(empty_scene, size)

    def test_no_full_segment(self, empty_scene):
        with pytest.raises(ValueError):
            partition(empty_scene, 0.02)

    def test_anchored_south_west(self, empty_scene):
        grid = partition(empty_scene, 0.004)
        assert len(grid) == 2 and len(grid[0]) == 2
        assert grid[0][0].bbox.lat_min == empty_scene.bbox.lat_min
        assert grid[0][0].bbox.lon_min == empty_scene.bbox.lon_min
        assert grid[1][0].bbox.lat_min > grid[0][0].bbox.lat_min

    def test_deterministic(self, tmp_path):
        data = scene_dict([{"height_m": 10, "footprint": [[0, 0], [100, 0], [100, 100], [0, 100]]}])
        p = write(tmp_path, data)
        a = partition(load_scene(p), 0.005)
        b = partition(load_scene(p), 0.005)
        assert a == b


class TestDensityAndHeight:
    def test_full_cover(self):
        scene = make_scene([(rect(-400, -600, 400, 600), 10.0)])
        seg = one_segment(scene)
        assert building_density(scene, seg) == pytest.approx(1.0)
        assert avg_building_height(scene, seg) == 10.0

    def test_empty(self, empty_scene):
        seg = one_segment(empty_scene)
        assert building_density(empty_scene, seg) == 0.0
        assert avg_building_height(empty_scene, seg) == 0.0

    def test_half_cover_matches_clip_oracle(self):
        probe = one_segment(make_scene())
        x0, y0, x1, y1 = probe.rect
        xm = 0.5 * (x0 + x1)
        b = (x0 - 50, y0 - 50, xm, y1 + 50)
        scene = make_scene([(rect(*b), 12.0)])
        seg = one_segment(scene)
        expected = rect_overlap_area(b, seg.rect) / seg.area
        assert expected == pytest.approx(0.5)
        assert building_density(scene, seg) == pytest.approx(expected, abs=1e-12)

    def test_weighted_mean_equal_areas(self):
        scene = make_scene([(rect(0, 0, 20, 20), 8.0), (rect(50, 50, 70, 70), 12.0)])
        assert avg_building_height(scene, one_segment(scene)) == pytest.approx(10.0)

    def test_weighted_mean_oracle(self):
        blds = [(rect(0, 0, 30, 10), 6.0), (rect(50, 50, 60, 60), 20.0)]
        scene = make_scene(blds)
        w = np.array([300.0, 100.0])
        assert avg_building_height(scene, one_segment(scene)) == pytest.approx(np.average([6, 20], weights=w))

    def test_overlapping_buildings_counted_once(self):
        scene = make_scene([(rect(0, 0, 20, 20), 8.0), (rect(10, 0, 30, 20), 8.0)])
        seg = one_segment(scene)
        assert building_density(scene, seg) * seg.area == pytest.approx(600.0)


boxes = st.tuples(
    st.floats(-340, 300), st.floats(-550, 500), st.floats(5, 200), st.floats(5, 200), st.floats(1, 60)
)


@settings(max_examples=40, deadline=None)
@given(st.lists(boxes, min_size=1, max_size=6), boxes)
def test_density_monotone_and_bounded(existing, extra):
    def to_b(b):
        x, y, w, h, z = b
        return rect(x, y, min(x + w, 345), min(y + h, 555)), z

    scene = make_scene([to_b(b) for b in existing])
    bigger = make_scene([to_b(b) for b in existing + [extra]])
    grid = partition(scene, 0.0025)
    grid2 = partition(bigger, 0.0025)
    total = 0.0
    for line, line2 in zip(grid, grid2):
        for s, s2 in zip(line, line2):
            assert 0 <= s.mu <= 1
            assert s2.mu >= s.mu - 1e-12
            total += s.mu * s.area
            if s.h_avg > 0:
                hs = [b.height for b in scene.buildings]
                assert min(hs) - 1e-9 <= s.h_avg <= max(hs) + 1e-9
            else:
                assert s.mu == 0
    assert total <= scene.footprint_union.area + 1e-6


class TestReceiverMesh:
    def test_empty_segment_full_mesh(self, empty_scene):
        mesh = receiver_mesh(empty_scene, one_segment(empty_scene), 100, 1.0)
        assert mesh.points.shape == (10_000, 3)
        assert mesh.n_active == 10_000
        assert np.all(mesh.points[:, 2] == 1.0)

    def test_fully_covered(self):
        scene = make_scene([(rect(-400, -600, 400, 600), 10.0)])
        mesh = receiver_mesh(scene, one_segment(scene), 100, 1.0)
        assert mesh.n_active == 0
        assert mesh.interior.sum() == 10_000

    def test_west_half_against_pip_oracle(self):
        x0, y0, x1, y1 = one_segment(make_scene()).rect
        poly = rect(x0 - 10, y0 - 10, 0.5 * (x0 + x1), y1 + 10)
        scene = make_scene([(poly, 10.0)])
        mesh = receiver_mesh(scene, one_segment(scene), 100, 1.0)
        oracle_inside = sum(point_in_polygon(x, y, poly) for x, y, _ in mesh.points)
        assert mesh.interior.sum() == oracle_inside
        assert mesh.n_active == pytest.approx(5000, abs=100)

    def test_active_points_outside_all_footprints(self):
        polys = [rect(-100, -100, -20, 40), ((10, 10), (80, 20), (40, 90)), rect(100, -300, 160, -250)]
        scene = make_scene([(p, 10.0) for p in polys])
        mesh = receiver_mesh(scene, one_segment(scene), 60, 1.5)
        for x, y, z in mesh.active:
            assert z == 1.5
            assert not any(point_in_polygon(x, y, p) for p in polys)

    @pytest.mark.parametrize("n,h", [(0, 1.0), (10, 0.0)])
    def test_rejects(self, empty_scene, n, h):
        with pytest.raises(ValueError):
            receiver_mesh(empty_scene, one_segment(empty_scene), n, h)
