"""Even-odd polygon rasterization for annotation masks."""

from __future__ import annotations

import numpy as np


def rasterize_polygon(vertices, shape: tuple[int, int]) -> np.ndarray:
    """Fill a polygon into an HxW boolean mask, even-odd rule.

    A pixel is inside when a leftward ray from its center crosses the
    polygon boundary an odd number of times. Vertices are (u, v) pairs;
    self-intersecting polygons are fine, fewer than 3 vertices are not.
    """
    verts = np.asarray(vertices, dtype=np.float64)
    if verts.ndim != 2 or verts.shape[1] != 2 or len(verts) < 3:
        raise ValueError("polygon needs at least 3 (u, v) vertices")
    h, w = shape
    mask = np.zeros((h, w), dtype=bool)
    u0 = max(int(np.floor(verts[:, 0].min())) - 1, 0)
    u1 = min(int(np.ceil(verts[:, 0].max())) + 1, w - 1)
    v0 = max(int(np.floor(verts[:, 1].min())) - 1, 0)
    v1 = min(int(np.ceil(verts[:, 1].max())) + 1, h - 1)
    if u0 > u1 or v0 > v1:
        return mask
    px = np.arange(u0, u1 + 1) + 0.5
    py = np.arange(v0, v1 + 1) + 0.5
    gx, gy = np.meshgrid(px, py)
    crossings = np.zeros(gx.shape, dtype=np.int64)
    n = len(verts)
    for i in range(n):
        x1, y1 = verts[i]
        x2, y2 = verts[(i + 1) % n]
        if y1 == y2:
            continue  # horizontal edges never cross a horizontal ray
        spans = (y1 > gy) != (y2 > gy)
        x_at = x1 + (gy - y1) * (x2 - x1) / (y2 - y1)
        crossings += (spans & (gx > x_at)).astype(np.int64)
    mask[v0:v1 + 1, u0:u1 + 1] = (crossings % 2) == 1
    return mask
