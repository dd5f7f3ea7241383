"""Triangle meshes and their orthographic top-down rasterization.

Meshes are rasterized directly in the top-down frame: each triangle's XY
footprint is filled with a top-left edge rule and the per-cell upper
surface (max interpolated z) becomes the height patch. Model frame
convention: bounding-box bottom-center at the origin, so a placement
means "resting on the table at this point".
"""

from __future__ import annotations

from dataclasses import dataclass
import math
import os

import numpy as np

from .errors import DegenerateMeshError, EmptyMeshError, ObjParseError
from .geometry import TopDownConfig
from .util import frozen_array

MASK_HEIGHT_EPS = 1e-6


@dataclass(frozen=True)
class TriMesh:
    """Indexed triangle mesh in meters."""

    vertices: np.ndarray  # (N, 3) float64
    triangles: np.ndarray  # (M, 3) int64

    def __post_init__(self):
        verts = frozen_array(self.vertices, np.float64)
        tris = frozen_array(self.triangles, np.int64)
        if verts.ndim != 2 or verts.shape[1] != 3:
            raise ValueError("vertices must be (N, 3)")
        if tris.ndim != 2 or tris.shape[1] != 3 or len(tris) == 0:
            raise EmptyMeshError("mesh needs at least one triangle")
        if not np.isfinite(verts).all():
            raise ValueError("vertices must be finite")
        if tris.min() < 0 or tris.max() >= len(verts):
            raise ValueError("triangle index out of range")
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "triangles", tris)

    def xy_extent(self) -> tuple[float, float]:
        mins = self.vertices.min(axis=0)
        maxs = self.vertices.max(axis=0)
        return float(maxs[0] - mins[0]), float(maxs[1] - mins[1])

    def recentered(self) -> "TriMesh":
        """Shift so the bounding-box bottom-center sits at the origin."""
        mins = self.vertices.min(axis=0)
        maxs = self.vertices.max(axis=0)
        shift = np.array([(mins[0] + maxs[0]) / 2, (mins[1] + maxs[1]) / 2, mins[2]])
        return TriMesh(self.vertices - shift, self.triangles)


@dataclass(frozen=True)
class Placement:
    """Where and how a mesh sits on the table."""

    center: tuple[float, float]
    yaw: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError("scale must be positive")


@dataclass(frozen=True)
class RenderPatch:
    """Full-size height/mask patch produced by rasterization."""

    height: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        hm = frozen_array(self.height, np.float32)
        mask = frozen_array(self.mask, bool)
        if hm.shape != mask.shape:
            raise ValueError("height and mask dims differ")
        if (hm < 0).any() or not np.isfinite(hm).all():
            raise ValueError("heights must be finite and non-negative")
        if not np.array_equal(mask, hm > MASK_HEIGHT_EPS):
            raise ValueError("mask must equal {height > eps}")
        object.__setattr__(self, "height", hm)
        object.__setattr__(self, "mask", mask)

    def bbox(self):
        """Tight (u0, v0, u1, v1) inclusive bbox of the mask, or None."""
        vs, us = np.nonzero(self.mask)
        if len(vs) == 0:
            return None
        return int(us.min()), int(vs.min()), int(us.max()), int(vs.max())


def parse_obj(text: str) -> TriMesh:
    """Parse the v/f subset of an OBJ document; other directives are ignored.

    Polygonal faces are fan-triangulated. The result is recentered to the
    bottom-center convention.
    """
    verts = []
    faces = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        if toks[0] == "v":
            if len(toks) < 4:
                raise ObjParseError(f"line {lineno}: vertex needs 3 coordinates")
            try:
                verts.append([float(t) for t in toks[1:4]])
            except ValueError:
                raise ObjParseError(f"line {lineno}: non-numeric vertex") from None
        elif toks[0] == "f":
            idx = []
            for tok in toks[1:]:
                first = tok.split("/", 1)[0]
                try:
                    i = int(first)
                except ValueError:
                    raise ObjParseError(f"line {lineno}: bad face index {tok!r}") from None
                if i <= 0:
                    raise ObjParseError(f"line {lineno}: face indices are 1-based, got {i}")
                idx.append(i - 1)
            if len(idx) < 3:
                raise ObjParseError(f"line {lineno}: face needs >= 3 vertices")
            for k in range(1, len(idx) - 1):
                faces.append((idx[0], idx[k], idx[k + 1]))
    if not faces:
        raise EmptyMeshError("no faces in OBJ content")
    nv = len(verts)
    for tri in faces:
        if max(tri) >= nv:
            raise ObjParseError(f"face index {max(tri) + 1} exceeds vertex count {nv}")
    mesh = TriMesh(np.array(verts, dtype=np.float64), np.array(faces, dtype=np.int64))
    return mesh.recentered()


def load_obj(path: str | os.PathLike) -> TriMesh:
    with open(path, "r", encoding="utf-8") as f:
        return parse_obj(f.read())


def write_obj(mesh: TriMesh, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for x, y, z in mesh.vertices:
            f.write(f"v {x:.9g} {y:.9g} {z:.9g}\n")
        for a, b, c in mesh.triangles:
            f.write(f"f {a + 1} {b + 1} {c + 1}\n")


def transform_vertices(mesh: TriMesh, placement: Placement) -> np.ndarray:
    """Apply scale, yaw about z, then translation onto the table plane."""
    s, yaw = placement.scale, placement.yaw
    cos, sin = math.cos(yaw), math.sin(yaw)
    v = mesh.vertices * s
    out = np.empty_like(v)
    out[:, 0] = cos * v[:, 0] - sin * v[:, 1] + placement.center[0]
    out[:, 1] = sin * v[:, 0] + cos * v[:, 1] + placement.center[1]
    out[:, 2] = v[:, 2]
    return out


def _edge(ax, ay, bx, by, px, py):
    return (bx - ax) * (py - ay) - (by - ay) * (px - ax)


def _tie_ok(ax, ay, bx, by) -> bool:
    # top-left fill rule in y-down pixel coords: horizontal top edges and
    # edges whose interior side faces +x own their boundary pixels
    dx, dy = bx - ax, by - ay
    return dy < 0 or (dy == 0 and dx > 0)


def rasterize(mesh: TriMesh, placement: Placement, config: TopDownConfig) -> RenderPatch:
    """Rasterize the placed mesh into a top-down height patch.

    Cell centers are tested against each triangle's XY footprint; covered
    cells take the maximum interpolated z across triangles. Raises
    DegenerateMeshError when no cell is covered.
    """
    world = transform_vertices(mesh, placement)
    px = (world[:, 0] - config.x_min) * config.resolution
    py = (world[:, 1] - config.y_min) * config.resolution
    pz = world[:, 2]

    h, w = config.height, config.width
    height = np.zeros((h, w), dtype=np.float64)
    covered_any = np.zeros((h, w), dtype=bool)

    for ia, ib, ic in mesh.triangles:
        ax, ay, az = px[ia], py[ia], pz[ia]
        bx, by, bz = px[ib], py[ib], pz[ib]
        cx, cy, cz = px[ic], py[ic], pz[ic]
        area2 = _edge(ax, ay, bx, by, cx, cy)
        if area2 == 0:
            continue  # vertical or degenerate footprint
        if area2 < 0:
            bx, by, bz, cx, cy, cz = cx, cy, cz, bx, by, bz
            area2 = -area2

        lo_u = max(int(math.ceil(min(ax, bx, cx) - 0.5)), 0)
        hi_u = min(int(math.floor(max(ax, bx, cx) - 0.5)), w - 1)
        lo_v = max(int(math.ceil(min(ay, by, cy) - 0.5)), 0)
        hi_v = min(int(math.floor(max(ay, by, cy) - 0.5)), h - 1)
        if lo_u > hi_u or lo_v > hi_v:
            continue

        us = np.arange(lo_u, hi_u + 1) + 0.5
        vs = np.arange(lo_v, hi_v + 1) + 0.5
        gu, gv = np.meshgrid(us, vs)
        e0 = _edge(bx, by, cx, cy, gu, gv)  # weight of vertex a
        e1 = _edge(cx, cy, ax, ay, gu, gv)  # weight of vertex b
        e2 = _edge(ax, ay, bx, by, gu, gv)  # weight of vertex c
        inside = (
            ((e0 > 0) | ((e0 == 0) & _tie_ok(bx, by, cx, cy)))
            & ((e1 > 0) | ((e1 == 0) & _tie_ok(cx, cy, ax, ay)))
            & ((e2 > 0) | ((e2 == 0) & _tie_ok(ax, ay, bx, by)))
        )
        if not inside.any():
            continue
        z = (e0 * az + e1 * bz + e2 * cz) / area2
        region = height[lo_v:hi_v + 1, lo_u:hi_u + 1]
        np.maximum(region, np.where(inside, z, -np.inf), out=region)
        covered_any[lo_v:hi_v + 1, lo_u:hi_u + 1] |= inside

    if not covered_any.any():
        raise DegenerateMeshError("transformed footprint covers zero cells")
    height[~covered_any] = 0.0
    height = np.maximum(height, 0.0)
    return RenderPatch(height=height.astype(np.float32), mask=height > MASK_HEIGHT_EPS)


def fit_scale_to_footprint(mesh: TriMesh, target_extent: tuple[float, float]) -> float:
    """Uniform scale so the mesh's XY bbox fits inside the target extent."""
    tw, th = target_extent
    if tw <= 0 or th <= 0:
        raise ValueError("target extents must be positive")
    mw, mh = mesh.xy_extent()
    if mw <= 0 or mh <= 0:
        raise DegenerateMeshError("mesh has zero XY extent")
    return min(tw / mw, th / mh)
