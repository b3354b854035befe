"""Vectorized planar segment predicates.

Obstacles are stored as an ``(O, 2, 2)`` array of segment endpoints. All
intersection tests are closed: touching within ``EPS`` counts as a hit.
"""

from __future__ import annotations

import numpy as np

EPS = 1e-9


def as_segments(obstacles) -> np.ndarray:
    arr = np.asarray(obstacles, dtype=float)
    if arr.size == 0:
        return np.zeros((0, 2, 2))
    return arr.reshape(-1, 2, 2)


def _cross(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


def point_segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance from points ``p`` to segments ``a``-``b`` (broadcasting)."""
    ab = b - a
    denom = np.einsum("...i,...i->...", ab, ab)
    t = np.einsum("...i,...i->...", p - a, ab) / np.where(denom > 0, denom, 1.0)
    t = np.clip(np.where(denom > 0, t, 0.0), 0.0, 1.0)
    proj = a + t[..., None] * ab
    return np.linalg.norm(p - proj, axis=-1)


def segments_intersect(p1, p2, q1, q2, eps: float = EPS) -> np.ndarray:
    """Closed intersection test between segments ``p1p2`` and ``q1q2``.

    Inputs broadcast against each other; the result has the broadcast shape
    without the trailing coordinate axis.
    """
    p1, p2, q1, q2 = (np.asarray(x, dtype=float) for x in (p1, p2, q1, q2))
    r = p2 - p1
    s = q2 - q1
    o1 = _cross(r, q1 - p1)
    o2 = _cross(r, q2 - p1)
    o3 = _cross(s, p1 - q1)
    o4 = _cross(s, p2 - q1)
    proper = (o1 * o2 < 0) & (o3 * o4 < 0)
    touch = (
        (point_segment_distance(q1, p1, p2) <= eps)
        | (point_segment_distance(q2, p1, p2) <= eps)
        | (point_segment_distance(p1, q1, q2) <= eps)
        | (point_segment_distance(p2, q1, q2) <= eps)
    )
    return proper | touch


def segments_blocked(a: np.ndarray, b: np.ndarray, obstacles: np.ndarray) -> np.ndarray:
    """For ``K`` segments ``a[k]``-``b[k]``, whether any obstacle is hit."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    obs = as_segments(obstacles)
    if obs.shape[0] == 0:
        return np.zeros(a.shape[:-1], dtype=bool)
    hits = segments_intersect(a[..., None, :], b[..., None, :], obs[:, 0], obs[:, 1])
    return hits.any(axis=-1)


def in_bounds(p: np.ndarray, bounds) -> np.ndarray:
    xmin, xmax, ymin, ymax = bounds
    p = np.asarray(p, dtype=float)
    return (
        (p[..., 0] >= xmin) & (p[..., 0] <= xmax) & (p[..., 1] >= ymin) & (p[..., 1] <= ymax)
    )
