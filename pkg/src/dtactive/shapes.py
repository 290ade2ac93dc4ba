"""The 12-object rolling library: three trained categories plus novel shapes.

Category A are circles (easy to roll), B regular polygons (flat faces resist
rolling), C mixed smooth shapes, N novel shapes held out of training. All
boundaries are star-shaped polygons about their area centroid, vertices
counter-clockwise in mm. Sizes sit between the minimum graspable radius and
the 30 mm envelope.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import is_simple_star_shaped, polygon_centroid

SMOOTH_N = 256  # vertices for curved boundaries

TRAINED_IDS = ("A1", "A2", "A3", "B1", "B2", "B3", "C1", "C2", "C3")
NOVEL_IDS = ("N1", "N2", "N3")
ALL_IDS = TRAINED_IDS + NOVEL_IDS


@dataclass(frozen=True)
class ObjectShape:
    id: str
    description: str
    vertices: np.ndarray  # (V, 2), centroid at the origin, CCW

    @property
    def category(self) -> str:
        return self.id[0]

    @property
    def is_novel(self) -> bool:
        return self.category == "N"

    def radii(self) -> np.ndarray:
        return np.linalg.norm(self.vertices, axis=1)

    def min_radius(self) -> float:
        return float(np.min(self.radii()))

    def max_radius(self) -> float:
        return float(np.max(self.radii()))

    def vertical_extent(self, theta: float = 0.0) -> float:
        c, s = np.cos(theta), np.sin(theta)
        y = self.vertices[:, 0] * s + self.vertices[:, 1] * c
        return float(y.max() - y.min())


def _recenter(verts: np.ndarray) -> np.ndarray:
    return verts - polygon_centroid(verts)


def _circle(radius: float, n: int = SMOOTH_N) -> np.ndarray:
    ang = 2.0 * np.pi * np.arange(n) / n
    return np.stack([radius * np.cos(ang), radius * np.sin(ang)], axis=1)


def _regular_polygon(circumradius: float, sides: int) -> np.ndarray:
    ang = 2.0 * np.pi * np.arange(sides) / sides + np.pi / sides
    return np.stack([circumradius * np.cos(ang), circumradius * np.sin(ang)], axis=1)


def _ellipse(a: float, b: float, n: int = SMOOTH_N) -> np.ndarray:
    ang = 2.0 * np.pi * np.arange(n) / n
    return np.stack([a * np.cos(ang), b * np.sin(ang)], axis=1)


def _radial(fn, n: int = SMOOTH_N) -> np.ndarray:
    ang = 2.0 * np.pi * np.arange(n) / n
    r = fn(ang)
    return _recenter(np.stack([r * np.cos(ang), r * np.sin(ang)], axis=1))


def _stadium(half_width: float, radius: float, n_arc: int = 96, n_edge: int = 32) -> np.ndarray:
    """Rectangle with semicircular caps; total width 2*(half_width+radius)."""
    right = np.linspace(-np.pi / 2, np.pi / 2, n_arc, endpoint=False)
    left = np.linspace(np.pi / 2, 3 * np.pi / 2, n_arc, endpoint=False)
    pts = []
    pts.append(np.stack([half_width + radius * np.cos(right), radius * np.sin(right)], axis=1))
    top_x = np.linspace(half_width, -half_width, n_edge, endpoint=False)
    pts.append(np.stack([top_x, np.full(n_edge, radius)], axis=1))
    pts.append(np.stack([-half_width + radius * np.cos(left), radius * np.sin(left)], axis=1))
    bot_x = np.linspace(-half_width, half_width, n_edge, endpoint=False)
    pts.append(np.stack([bot_x, np.full(n_edge, -radius)], axis=1))
    return np.concatenate(pts, axis=0)


def build_object_library() -> list[ObjectShape]:
    """Twelve shapes, ids A1..A3, B1..B3, C1..C3, N1..N3. Deterministic."""
    shapes = [
        ObjectShape("A1", "circle d=20 mm", _circle(10.0)),
        ObjectShape("A2", "circle d=25 mm", _circle(12.5)),
        ObjectShape("A3", "circle d=30 mm", _circle(15.0)),
        ObjectShape("B1", "square, 25 mm circumdiameter", _regular_polygon(12.5, 4)),
        ObjectShape("B2", "hexagon, 25 mm circumdiameter", _regular_polygon(12.5, 6)),
        ObjectShape("B3", "octagon, 25 mm circumdiameter", _regular_polygon(12.5, 8)),
        ObjectShape("C1", "ellipse 30x20 mm", _ellipse(15.0, 10.0)),
        ObjectShape(
            "C2",
            "rounded triangle (three-lobe profile)",
            _radial(lambda a: 11.0 * (1.0 + 0.18 * np.cos(3.0 * a))),
        ),
        ObjectShape("C3", "stadium 30x20 mm", _stadium(5.0, 10.0)),
        ObjectShape("N1", "regular pentagon, 24 mm circumdiameter", _regular_polygon(12.0, 5)),
        ObjectShape(
            "N2",
            "superellipse 24x18 mm, n=3.5",
            _superellipse(12.0, 9.0, 3.5),
        ),
        ObjectShape(
            "N3",
            "asymmetric blob",
            _radial(
                lambda a: 10.0
                * (1.0 + 0.15 * np.sin(2.0 * a + 0.7) + 0.08 * np.cos(3.0 * a - 0.3) + 0.05 * np.sin(5.0 * a))
            ),
        ),
    ]
    for s in shapes:
        if not is_simple_star_shaped(s.vertices, np.zeros(2)):
            raise AssertionError(f"shape {s.id} is not star-shaped about its centroid")
    return shapes


def _superellipse(a: float, b: float, power: float, n: int = SMOOTH_N) -> np.ndarray:
    ang = 2.0 * np.pi * np.arange(n) / n
    c, s = np.cos(ang), np.sin(ang)
    x = a * np.sign(c) * np.abs(c) ** (2.0 / power)
    y = b * np.sign(s) * np.abs(s) ** (2.0 / power)
    return _recenter(np.stack([x, y], axis=1))


def get_object(object_id: str) -> ObjectShape:
    for s in build_object_library():
        if s.id == object_id:
            return s
    raise KeyError(f"unknown object id: {object_id}")
