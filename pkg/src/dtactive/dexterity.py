"""Grasp-analysis calculations for the active-surface fingertip.

Three closed-form results and one numeric one:

* minimum graspable radius of a plain roller fingertip (r = R/4),
* minimum graspable radius of a flat-plane fingertip with a rounded corner
  (bisection on a geometric contact test),
* anti-torsion torque capacity of a flat contact patch,
* lifting force available when pinching an object near the corner.

Lengths in mm, forces in N, torques in N*mm.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import UngraspableError
from .geometry import (
    max_boundary_distance,
    polygon_area,
    polygon_centroid,
    polygon_polar_moment,
)

# Fingertip cross-section calibrated so the shipped minimum graspable radius
# is 2.81 mm (arc-contact mode governs; the plane-edge mode kicks in only for
# larger protrusions). See configs/default.yaml.
DEFAULT_CORNER_RADIUS = 11.0
DEFAULT_PLANE_PROTRUSION = 2.0
DEFAULT_PLANE_HALF_LENGTH = 17.25
DEFAULT_TABLE_CLEARANCE = 0.16


@dataclass(frozen=True)
class CornerGeometry:
    """Cross-section of one fingertip near its lower corner, fully closed.

    The flat tactile plane is vertical; with the gripper fully closed the two
    plane faces meet on the centerline. The corner arc (radius
    ``corner_radius``) is tangent to the plane line and to the bottom face,
    which sits ``table_clearance`` above the table. The plane's material edge
    extends ``plane_protrusion`` below the arc's tangency point, which is what
    makes the corner "not perfectly regular".
    """

    corner_radius: float = DEFAULT_CORNER_RADIUS
    plane_protrusion: float = DEFAULT_PLANE_PROTRUSION
    plane_half_length: float = DEFAULT_PLANE_HALF_LENGTH
    table_clearance: float = DEFAULT_TABLE_CLEARANCE

    def __post_init__(self):
        if self.corner_radius <= 0:
            raise ValueError("corner_radius must be > 0")
        if self.plane_protrusion < 0 or self.plane_protrusion > self.corner_radius + self.table_clearance:
            raise ValueError("plane_protrusion must be in [0, corner_radius + table_clearance]")
        if self.plane_half_length <= self.corner_radius:
            raise ValueError("plane_half_length must exceed corner_radius")
        if self.table_clearance < 0:
            raise ValueError("table_clearance must be >= 0")


@dataclass
class ContactRegion:
    """Planar contact patch between object and tactile plane.

    ``boundary``: (V, 2) vertices, counter-clockwise, simple (caller contract).
    ``rotation_center``: the assumed center of in-plane twist; defaults to the
    patch centroid, the symmetric conservative choice.
    """

    boundary: np.ndarray
    rotation_center: np.ndarray | None = None

    def __post_init__(self):
        self.boundary = np.asarray(self.boundary, dtype=float)
        if self.boundary.ndim != 2 or self.boundary.shape[1] != 2 or len(self.boundary) < 3:
            raise ValueError("boundary must be a (V, 2) array with V >= 3")
        if polygon_area(self.boundary) <= 0:
            raise ValueError("boundary must be counter-clockwise with positive area")
        if self.rotation_center is None:
            self.rotation_center = polygon_centroid(self.boundary)
        else:
            self.rotation_center = np.asarray(self.rotation_center, dtype=float)
            if not _point_in_polygon(self.rotation_center, self.boundary):
                raise ValueError("rotation_center must lie inside or on the boundary")


@dataclass(frozen=True)
class GraspLoad:
    normal_force: float
    friction_coefficient: float

    def __post_init__(self):
        if self.normal_force < 0:
            raise ValueError("normal_force must be >= 0")
        if self.friction_coefficient < 0:
            raise ValueError("friction_coefficient must be >= 0")


def _point_in_polygon(p: np.ndarray, verts: np.ndarray, tol: float = 1e-9) -> bool:
    x1, y1 = verts[:, 0], verts[:, 1]
    x2, y2 = np.roll(x1, -1), np.roll(y1, -1)
    # on-boundary counts as inside
    dx, dy = x2 - x1, y2 - y1
    seg_len2 = dx * dx + dy * dy
    t = np.clip(((p[0] - x1) * dx + (p[1] - y1) * dy) / np.where(seg_len2 > 0, seg_len2, 1.0), 0, 1)
    d2 = (x1 + t * dx - p[0]) ** 2 + (y1 + t * dy - p[1]) ** 2
    if np.min(d2) <= tol * tol:
        return True
    crosses = ((y1 > p[1]) != (y2 > p[1])) & (
        p[0] < x1 + (p[1] - y1) * dx / np.where(dy != 0, dy, 1.0)
    )
    return bool(np.sum(crosses) % 2 == 1)


def min_radius_roller(corner_radius: float) -> float:
    """Smallest object radius a plain cylindrical roller pair can pick off a table."""
    if corner_radius <= 0:
        raise ValueError("corner_radius must be > 0")
    return corner_radius / 4.0


def _fingertip_contact_margin(r: float, geom: CornerGeometry) -> float:
    """Signed contact margin for a circle of radius r resting on the table.

    Positive means the circle touches or overlaps the closed fingertip;
    strictly increasing in r, which makes bisection valid.
    """
    center = np.array([0.0, r])
    # arc tangent to the plane line x=0 and to the bottom face
    arc_c = np.array([geom.corner_radius, geom.table_clearance + geom.corner_radius])
    # closest point on the quarter arc spanning [180, 270] degrees around arc_c;
    # the direction from arc_c to the circle center always has dx < 0, so the
    # only clamp needed is at the plane-tangency end (180 degrees)
    d = center - arc_c
    ang = np.arctan2(d[1], d[0])
    if ang > 0:
        ang = np.pi
    arc_pt = arc_c + geom.corner_radius * np.array([np.cos(ang), np.sin(ang)])
    dist_arc = float(np.linalg.norm(center - arc_pt))
    # the plane's material edge juts plane_protrusion below the tangency point
    y_edge = geom.table_clearance + geom.corner_radius - geom.plane_protrusion
    dist_edge = abs(r - y_edge)
    return r - min(dist_arc, dist_edge)


def min_radius_flat_corner(
    geom: CornerGeometry, tol: float = 1e-6, r_max: float = 100.0, max_iter: int = 200
) -> float:
    """Smallest circle radius the fully closed fingertip pair still touches.

    Bisection on the (monotone) contact margin; raises UngraspableError if
    even r_max makes no contact.
    """
    lo, hi = 0.0, r_max
    if _fingertip_contact_margin(hi, geom) < 0:
        raise UngraspableError(f"no contact for any radius <= {r_max} mm")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if _fingertip_contact_margin(mid, geom) >= 0:
            hi = mid
        else:
            lo = mid
        if hi - lo < tol:
            break
    return hi


def anti_torsion_torque(region: ContactRegion, load: GraspLoad) -> float:
    """Twist torque two flat patches can resist before the far edge slips.

    T = 2 mu F I_p / (L_m A0), with I_p the polar second moment about the
    rotation center, L_m the farthest boundary distance from it, and A0 the
    patch area. Exact polygon formulas throughout.
    """
    a0 = polygon_area(region.boundary)
    if a0 <= 0:
        raise ValueError("contact region has zero area")
    o = region.rotation_center
    ip = polygon_polar_moment(region.boundary, o)
    lm = max_boundary_distance(region.boundary, o)
    if lm <= 0:
        raise ValueError("rotation center coincides with the whole boundary")
    return 2.0 * load.friction_coefficient * load.normal_force * ip / (lm * a0)


def lifting_force(normal_force: float, mu: float, corner_radius: float, object_radius: float) -> float:
    """Signed vertical force a closed pair can apply to a pinched object.

    alpha = arctan(R/r - 1) is the contact-normal inclination; negative return
    means the pair cannot lift the object.
    """
    if object_radius <= 0:
        raise ValueError("object_radius must be > 0")
    if corner_radius < object_radius:
        raise ValueError("corner_radius must be >= object_radius")
    if normal_force < 0:
        raise ValueError("normal_force must be >= 0")
    alpha = np.arctan(corner_radius / object_radius - 1.0)
    friction = mu * normal_force
    return float(2.0 * (friction * np.cos(alpha) - normal_force * np.sin(alpha)))


def disk_region(radius: float, n: int = 720, center=(0.0, 0.0)) -> ContactRegion:
    """Regular n-gon approximation of a disk contact patch."""
    ang = 2.0 * np.pi * np.arange(n) / n
    verts = np.stack([center[0] + radius * np.cos(ang), center[1] + radius * np.sin(ang)], axis=1)
    return ContactRegion(boundary=verts)


def square_region(side: float, center=(0.0, 0.0)) -> ContactRegion:
    h = side / 2.0
    verts = np.array(
        [[center[0] - h, center[1] - h], [center[0] + h, center[1] - h],
         [center[0] + h, center[1] + h], [center[0] - h, center[1] + h]]
    )
    return ContactRegion(boundary=verts)
