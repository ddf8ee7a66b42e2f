"""Independent reference computations used to freeze expected values.

Nothing here imports the package under test.
"""

import cmath
import math

from scipy.optimize import brentq

RE_KM = 6371.0


def slant_range_law_of_cosines(altitude_km, elevation_deg):
    """Solve (Re+a)^2 = Re^2 + d^2 - 2 Re d cos(90deg + elev) for d numerically."""
    re, a = RE_KM, altitude_km
    el = math.radians(elevation_deg)

    def f(d):
        return re**2 + d**2 - 2 * re * d * math.cos(math.pi / 2 + el) - (re + a) ** 2

    return brentq(f, 0.0, 10 * (re + a), xtol=1e-12)


def horizon_range(altitude_km):
    return math.sqrt(2 * RE_KM * altitude_km + altitude_km**2)


def arc_length_m(delta_deg, lat_deg=None):
    s = math.radians(delta_deg) * RE_KM * 1000
    return s if lat_deg is None else s * math.cos(math.radians(lat_deg))


def point_in_polygon(x, y, poly):
    """Even-odd ray casting."""
    inside = False
    n = len(poly)
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            xc = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x < xc:
                inside = not inside
    return inside


def rect_overlap_area(a, b):
    """Overlap area of two axis-aligned rectangles (xmin, ymin, xmax, ymax)."""
    w = min(a[2], b[2]) - max(a[0], b[0])
    h = min(a[3], b[3]) - max(a[1], b[1])
    return max(w, 0.0) * max(h, 0.0)


def ray_hits_box(rx, d, box_min, box_max):
    """Slab test for the ray rx + t d, t > 0, against an axis-aligned box."""
    t0, t1 = 1e-12, math.inf
    for i in range(3):
        if abs(d[i]) < 1e-15:
            if not box_min[i] <= rx[i] <= box_max[i]:
                return False
            continue
        ta = (box_min[i] - rx[i]) / d[i]
        tb = (box_max[i] - rx[i]) / d[i]
        t0 = max(t0, min(ta, tb))
        t1 = min(t1, max(ta, tb))
        if t0 > t1:
            return False
    return True


def mirror_point(p, plane_point, normal):
    """Reflect 3D point p across the plane through plane_point with unit normal."""
    dist = sum((p[i] - plane_point[i]) * normal[i] for i in range(3))
    return tuple(p[i] - 2 * dist * normal[i] for i in range(3))


def line_plane(p, d, plane_point, normal):
    t = sum((plane_point[i] - p[i]) * normal[i] for i in range(3)) / sum(d[i] * normal[i] for i in range(3))
    return tuple(p[i] + t * d[i] for i in range(3))


def phasor_loss_db(losses_db, phases):
    """-20 log10 |sum 10^(-L/20) e^{-j phi}|, computed term by term."""
    total = 0j
    for loss, phi in zip(losses_db, phases):
        total += 10 ** (-loss / 20) * cmath.exp(-1j * phi)
    return -20 * math.log10(abs(total))
