"""Planar polygon utilities shared by the grasp analysis and the simulator.

All lengths are in mm. Polygons are (V, 2) float arrays of vertices,
counter-clockwise, not repeated at the end.
"""

from __future__ import annotations

import numpy as np


def polygon_area(verts: np.ndarray) -> float:
    """Signed shoelace area (positive for counter-clockwise vertices)."""
    x, y = verts[:, 0], verts[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    return 0.5 * float(np.sum(x * yn - xn * y))


def polygon_centroid(verts: np.ndarray) -> np.ndarray:
    """Area centroid of a simple polygon."""
    x, y = verts[:, 0], verts[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = 0.5 * np.sum(cross)
    if a == 0.0:
        raise ValueError("degenerate polygon: zero area")
    cx = np.sum((x + xn) * cross) / (6.0 * a)
    cy = np.sum((y + yn) * cross) / (6.0 * a)
    return np.array([cx, cy])


def polygon_polar_moment(verts: np.ndarray, about: np.ndarray) -> float:
    """Polar second moment of area about `about`, exact Green's-theorem form.

    I_p = Ixx + Iyy with the standard per-edge polygon formulas, evaluated on
    vertices translated so `about` is the origin.
    """
    v = verts - np.asarray(about, dtype=float)
    x, y = v[:, 0], v[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    ixx = np.sum(cross * (y * y + y * yn + yn * yn)) / 12.0
    iyy = np.sum(cross * (x * x + x * xn + xn * xn)) / 12.0
    return float(ixx + iyy)


def max_boundary_distance(verts: np.ndarray, about: np.ndarray) -> float:
    """Largest distance from `about` to the polygon boundary (attained at a vertex)."""
    d = np.linalg.norm(verts - np.asarray(about, dtype=float), axis=1)
    return float(np.max(d))


def rotate(verts: np.ndarray, theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    rot = np.array([[c, -s], [s, c]])
    return verts @ rot.T


def is_simple_star_shaped(verts: np.ndarray, about: np.ndarray, tol: float = 1e-9) -> bool:
    """True if every ray from `about` crosses the boundary exactly once.

    Sufficient check: vertex angles about the point, after unwrapping, are
    strictly increasing and span exactly one turn.
    """
    v = verts - np.asarray(about, dtype=float)
    ang = np.arctan2(v[:, 1], v[:, 0])
    d = np.diff(np.concatenate([ang, ang[:1]]))
    d = np.mod(d, 2.0 * np.pi)
    if np.any(d <= tol) or np.any(d >= 2.0 * np.pi - tol):
        return False
    return abs(np.sum(d) - 2.0 * np.pi) < 1e-6


def silhouette(verts: np.ndarray, cols: np.ndarray):
    """Vertical extents of a polygon at each column x-position.

    Returns (y_bot, y_top, hit): per-column min/max boundary y and a bool mask
    of columns the polygon actually crosses. Columns outside the polygon's
    x-range have hit=False and undefined extents.

    `cols` must be a uniformly spaced ascending grid; each edge is scattered
    onto the contiguous column range it spans, so cost scales with covered
    columns rather than vertices x columns. Adjacent edges share their vertex
    x exactly, which keeps coverage gap-free at the shared column.
    """
    w = len(cols)
    c0 = cols[0]
    pitch = cols[1] - cols[0] if w > 1 else 1.0
    x1, y1 = verts[:, 0], verts[:, 1]
    x2, y2 = np.roll(x1, -1), np.roll(y1, -1)
    dx = x2 - x1
    dy = y2 - y1
    ok = np.abs(dx) > 1e-12
    xlo = np.minimum(x1, x2)
    xhi = np.maximum(x1, x2)
    jlo = np.clip(np.ceil((xlo - c0) / pitch), 0, w).astype(np.int64)
    jhi = np.clip(np.floor((xhi - c0) / pitch), -1, w - 1).astype(np.int64)
    counts = np.where(ok, np.maximum(0, jhi - jlo + 1), 0)
    y_top = np.full(w, -np.inf)
    y_bot = np.full(w, np.inf)
    total = int(counts.sum())
    if total > 0:
        eidx = np.repeat(np.arange(len(verts)), counts)
        starts = np.cumsum(counts) - counts
        within = np.arange(total) - np.repeat(starts, counts)
        j = jlo[eidx] + within
        t = np.clip((cols[j] - x1[eidx]) / dx[eidx], 0.0, 1.0)
        yj = y1[eidx] + t * dy[eidx]
        np.maximum.at(y_top, j, yj)
        np.minimum.at(y_bot, j, yj)
    hit = y_top > -np.inf
    return y_bot, y_top, hit


def silhouette_bruteforce(verts: np.ndarray, cols: np.ndarray):
    """Reference O(V*W) silhouette used to cross-check the scatter version."""
    x1, y1 = verts[:, 0], verts[:, 1]
    x2, y2 = np.roll(x1, -1), np.roll(y1, -1)
    dx = x2 - x1
    dy = y2 - y1
    c = cols[None, :]
    spans = (x1[:, None] - c) * (x2[:, None] - c) <= 0.0
    ok = spans & (np.abs(dx)[:, None] > 1e-12)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (c - x1[:, None]) / dx[:, None]
    t = np.clip(t, 0.0, 1.0)
    y = y1[:, None] + t * dy[:, None]
    y_top = np.where(ok, y, -np.inf).max(axis=0)
    y_bot = np.where(ok, y, np.inf).min(axis=0)
    hit = ok.any(axis=0)
    return y_bot, y_top, hit
