import pytest

from s2gchannel.scene import BuildingFootprint, GeoBox, Scene

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


def rect(x0, y0, x1, y1):
    return ((x0, y0), (x1, y0), (x1, y1), (x0, y1))


def make_scene(buildings=(), half_deg=0.005, center=(51.55, 0.0)):
    lat, lon = center
    bbox = GeoBox(lat - half_deg, lat + half_deg, lon - half_deg, lon + half_deg)
    return Scene(tuple(BuildingFootprint(v, h) for v, h in buildings), center, bbox, 0.0)


@pytest.fixture
def empty_scene():
    return make_scene()


@pytest.fixture
def wall_scene():
    """A 30 m slab along x in [-10, 0], effectively infinite in y."""
    return make_scene([(rect(-10, -300, 0, 300), 30.0)])
