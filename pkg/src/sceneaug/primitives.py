"""Procedural mesh factories for the asset pools.

All primitives are authored at table scale (meters) with the bounding-box
bottom-center at the origin, matching the loader convention.
"""

from __future__ import annotations

import math

import numpy as np

from .rasterizer import TriMesh


def _mesh(verts, tris) -> TriMesh:
    return TriMesh(np.asarray(verts, dtype=np.float64), np.asarray(tris, dtype=np.int64))


def merge(*meshes: TriMesh) -> TriMesh:
    verts = []
    tris = []
    offset = 0
    for m in meshes:
        verts.append(m.vertices)
        tris.append(m.triangles + offset)
        offset += len(m.vertices)
    return _mesh(np.concatenate(verts), np.concatenate(tris))


def extrude_polygon(points_xy, height: float) -> TriMesh:
    """Extrude a star-shaped polygon (fanned from its centroid) upward."""
    pts = np.asarray(points_xy, dtype=np.float64)
    n = len(pts)
    center = pts.mean(axis=0)
    verts = []
    for z in (0.0, height):
        verts.append([center[0], center[1], z])
        for x, y in pts:
            verts.append([x, y, z])
    tris = []
    top = n + 1
    for i in range(n):
        j = (i + 1) % n
        tris.append((0, 1 + j, 1 + i))  # bottom cap
        tris.append((top, top + 1 + i, top + 1 + j))  # top cap
        a, b = 1 + i, 1 + j
        tris.append((a, b, top + 1 + i))  # wall
        tris.append((b, top + 1 + j, top + 1 + i))
    return _mesh(verts, tris).recentered()


def box(width: float, depth: float, height: float) -> TriMesh:
    hw, hd = width / 2, depth / 2
    return extrude_polygon([(-hw, -hd), (hw, -hd), (hw, hd), (-hw, hd)], height)


def regular_prism(sides: int, radius: float, height: float) -> TriMesh:
    pts = [(radius * math.cos(2 * math.pi * i / sides),
            radius * math.sin(2 * math.pi * i / sides)) for i in range(sides)]
    return extrude_polygon(pts, height)


def cylinder(radius: float, height: float, segments: int = 24) -> TriMesh:
    return regular_prism(segments, radius, height)


def cone(radius: float, height: float, segments: int = 24) -> TriMesh:
    verts = [[0.0, 0.0, height]]
    for i in range(segments):
        a = 2 * math.pi * i / segments
        verts.append([radius * math.cos(a), radius * math.sin(a), 0.0])
    verts.append([0.0, 0.0, 0.0])
    bottom_center = len(verts) - 1
    tris = []
    for i in range(segments):
        j = (i + 1) % segments
        tris.append((0, 1 + i, 1 + j))
        tris.append((bottom_center, 1 + j, 1 + i))
    return _mesh(verts, tris).recentered()


def frustum(r_bottom: float, r_top: float, height: float, segments: int = 24) -> TriMesh:
    verts = []
    for r, z in ((r_bottom, 0.0), (r_top, height)):
        for i in range(segments):
            a = 2 * math.pi * i / segments
            verts.append([r * math.cos(a), r * math.sin(a), z])
    verts.append([0.0, 0.0, 0.0])
    verts.append([0.0, 0.0, height])
    bc, tc = len(verts) - 2, len(verts) - 1
    tris = []
    for i in range(segments):
        j = (i + 1) % segments
        tris.append((i, j, segments + i))
        tris.append((j, segments + j, segments + i))
        tris.append((bc, j, i))
        tris.append((tc, segments + i, segments + j))
    return _mesh(verts, tris).recentered()


def dome(radius: float, height: float, segments: int = 20, rings: int = 6) -> TriMesh:
    """Squashed hemisphere: circular footprint, rounded top."""
    verts = []
    for k in range(rings):
        phi = (math.pi / 2) * k / rings
        r = radius * math.cos(phi)
        z = height * math.sin(phi)
        for i in range(segments):
            a = 2 * math.pi * i / segments
            verts.append([r * math.cos(a), r * math.sin(a), z])
    verts.append([0.0, 0.0, height])
    apex = len(verts) - 1
    tris = []
    for k in range(rings - 1):
        for i in range(segments):
            j = (i + 1) % segments
            a0, b0 = k * segments + i, k * segments + j
            a1, b1 = (k + 1) * segments + i, (k + 1) * segments + j
            tris.append((a0, b0, a1))
            tris.append((b0, b1, a1))
    last = (rings - 1) * segments
    for i in range(segments):
        j = (i + 1) % segments
        tris.append((last + i, last + j, apex))
    return _mesh(verts, tris).recentered()


def ring(r_outer: float, r_inner: float, height: float, segments: int = 24) -> TriMesh:
    """Annular block (hole in the middle)."""
    verts = []
    for r in (r_outer, r_inner):
        for z in (0.0, height):
            for i in range(segments):
                a = 2 * math.pi * i / segments
                verts.append([r * math.cos(a), r * math.sin(a), z])
    n = segments

    def idx(shell, level, i):
        return shell * 2 * n + level * n + (i % n)

    tris = []
    for i in range(segments):
        j = i + 1
        # top face between shells
        tris.append((idx(0, 1, i), idx(0, 1, j), idx(1, 1, i)))
        tris.append((idx(0, 1, j), idx(1, 1, j), idx(1, 1, i)))
        # bottom face
        tris.append((idx(0, 0, i), idx(1, 0, i), idx(0, 0, j)))
        tris.append((idx(0, 0, j), idx(1, 0, i), idx(1, 0, j)))
        # outer and inner walls
        tris.append((idx(0, 0, i), idx(0, 0, j), idx(0, 1, i)))
        tris.append((idx(0, 0, j), idx(0, 1, j), idx(0, 1, i)))
        tris.append((idx(1, 0, i), idx(1, 1, i), idx(1, 0, j)))
        tris.append((idx(1, 0, j), idx(1, 1, i), idx(1, 1, j)))
    return _mesh(verts, tris).recentered()


def plus_block(width: float, arm: float, height: float) -> TriMesh:
    """Plus/cross-shaped prism; width is the full span, arm the bar thickness."""
    return merge(box(width, arm, height), box(arm, width, height)).recentered()


def frame(width: float, depth: float, height: float, thickness: float) -> TriMesh:
    """Hollow rectangle built from four bars."""
    hw, hd, t = width / 2, depth / 2, thickness
    top = box(width, t, height)
    bot = box(width, t, height)
    left = box(t, depth - 2 * t, height)
    right = box(t, depth - 2 * t, height)
    parts = [
        _mesh(top.vertices + [0, hd - t / 2, 0], top.triangles),
        _mesh(bot.vertices + [0, -(hd - t / 2), 0], bot.triangles),
        _mesh(left.vertices + [-(hw - t / 2), 0, 0], left.triangles),
        _mesh(right.vertices + [hw - t / 2, 0, 0], right.triangles),
    ]
    return merge(*parts).recentered()


def star_prism(points: int, r_outer: float, r_inner: float, height: float) -> TriMesh:
    pts = []
    for i in range(points * 2):
        r = r_outer if i % 2 == 0 else r_inner
        a = math.pi * i / points
        pts.append((r * math.cos(a), r * math.sin(a)))
    return extrude_polygon(pts, height)


def wedge(width: float, depth: float, height: float) -> TriMesh:
    """Triangular prism (ramp profile along x)."""
    hw, hd = width / 2, depth / 2
    verts = [
        [-hw, -hd, 0], [hw, -hd, 0], [hw, hd, 0], [-hw, hd, 0],
        [-hw, -hd, height], [-hw, hd, height],
    ]
    tris = [
        (0, 2, 1), (0, 3, 2),          # bottom
        (0, 1, 4), (1, 2, 5), (1, 5, 4), (2, 3, 5),  # ramp + walls
        (0, 4, 3), (3, 4, 5),
    ]
    return _mesh(verts, tris).recentered()
