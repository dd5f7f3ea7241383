"""Pinhole camera model and orthographic top-down reprojection.

World frame: right-handed, z up, table plane at ``table_height``.
Image frame: ``u`` right (columns), ``v`` down (rows); pixel ``(u, v)``
represents the point at the center of its cell.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptyProjectionError, InvalidDepthError, OutOfBoundsError
from .util import frozen_array as _frozen

MAX_DEPTH_M = 10.0  # depths beyond this are sensor noise, treated as invalid


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point outside sensor")


@dataclass(frozen=True)
class CameraPose:
    """Rigid world-from-camera transform. Rotation must be orthonormal, det +1."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rot = np.asarray(self.rotation, dtype=np.float64)
        trans = np.asarray(self.translation, dtype=np.float64)
        if rot.shape != (3, 3) or trans.shape != (3,):
            raise ValueError("rotation must be 3x3 and translation a 3-vector")
        if not np.allclose(rot @ rot.T, np.eye(3), atol=1e-6):
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(rot) - 1.0) > 1e-6:
            raise ValueError("rotation determinant is not +1")
        object.__setattr__(self, "rotation", _frozen(rot, np.float64))
        object.__setattr__(self, "translation", _frozen(trans, np.float64))

    @classmethod
    def identity(cls) -> "CameraPose":
        return cls(np.eye(3), np.zeros(3))


@dataclass(frozen=True)
class RgbdFrame:
    """Aligned RGB + depth pair. Depth in meters, 0 = invalid sentinel.

    Depths outside (0, MAX_DEPTH_M] (including NaN) are coerced to the
    invalid sentinel at construction.
    """

    rgb: np.ndarray
    depth: np.ndarray
    intrinsics: CameraIntrinsics
    pose: CameraPose

    def __post_init__(self):
        rgb = np.asarray(self.rgb)
        depth = np.asarray(self.depth, dtype=np.float32)
        if rgb.ndim != 3 or rgb.shape[2] != 3 or rgb.dtype != np.uint8:
            raise ValueError("rgb must be HxWx3 uint8")
        if depth.shape != rgb.shape[:2]:
            raise ValueError("rgb and depth dimensions differ")
        if (rgb.shape[1], rgb.shape[0]) != (self.intrinsics.width, self.intrinsics.height):
            raise ValueError("image dimensions disagree with intrinsics")
        bad = ~np.isfinite(depth) | (depth < 0) | (depth > MAX_DEPTH_M)
        if bad.any():
            depth = np.where(bad, 0.0, depth)
        object.__setattr__(self, "rgb", _frozen(rgb, np.uint8))
        object.__setattr__(self, "depth", _frozen(depth, np.float32))


@dataclass(frozen=True)
class TopDownConfig:
    """Workspace bounds on the table plane and the raster resolution."""

    x_min: float = 0.0
    x_max: float = 0.64
    y_min: float = 0.0
    y_max: float = 0.32
    resolution: float = 500.0  # pixels per meter
    table_height: float = 0.0

    def __post_init__(self):
        if self.x_max <= self.x_min or self.y_max <= self.y_min:
            raise ValueError("workspace bounds must be ordered")
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")

    @property
    def width(self) -> int:
        return int(math.ceil((self.x_max - self.x_min) * self.resolution))

    @property
    def height(self) -> int:
        return int(math.ceil((self.y_max - self.y_min) * self.resolution))

    def to_dict(self) -> dict:
        return {
            "x_min": self.x_min,
            "x_max": self.x_max,
            "y_min": self.y_min,
            "y_max": self.y_max,
            "resolution": self.resolution,
            "table_height": self.table_height,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TopDownConfig":
        return cls(**{k: d[k] for k in (
            "x_min", "x_max", "y_min", "y_max", "resolution", "table_height")})


@dataclass(frozen=True)
class TopDownObservation:
    """Orthographic RGB + heightmap of the tabletop.

    Heightmap is meters above the table plane, non-negative everywhere.
    """

    rgb: np.ndarray
    heightmap: np.ndarray
    config: TopDownConfig = field(default_factory=TopDownConfig)

    def __post_init__(self):
        rgb = np.asarray(self.rgb)
        hm = np.asarray(self.heightmap, dtype=np.float32)
        shape = (self.config.height, self.config.width)
        if rgb.shape != shape + (3,) or rgb.dtype != np.uint8:
            raise ValueError(f"rgb must be {shape + (3,)} uint8, got {rgb.shape}")
        if hm.shape != shape:
            raise ValueError(f"heightmap must be {shape}, got {hm.shape}")
        if (hm < 0).any():
            raise ValueError("heightmap has negative entries")
        if not np.isfinite(hm).all():
            raise ValueError("heightmap has non-finite entries")
        object.__setattr__(self, "rgb", _frozen(rgb, np.uint8))
        object.__setattr__(self, "heightmap", _frozen(hm, np.float32))


def deproject_pixel(frame: RgbdFrame, u: int, v: int) -> np.ndarray:
    """Back-project pixel (u, v) through the pinhole model into world coords."""
    intr = frame.intrinsics
    if not (0 <= u < intr.width and 0 <= v < intr.height):
        raise OutOfBoundsError(f"pixel ({u}, {v}) outside {intr.width}x{intr.height}")
    d = float(frame.depth[v, u])
    if d <= 0.0:
        raise InvalidDepthError(f"no depth at pixel ({u}, {v})")
    cam = np.array([(u - intr.cx) * d / intr.fx, (v - intr.cy) * d / intr.fy, d])
    return frame.pose.rotation @ cam + frame.pose.translation


def world_to_topdown_px(config: TopDownConfig, x, y):
    """Map workspace coordinates (m) to top-down pixel indices (u, v).

    Accepts scalars or arrays; raises OutOfBoundsError if any input falls
    outside [min, max).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if ((x < config.x_min) | (x >= config.x_max) | (y < config.y_min) | (y >= config.y_max)).any():
        raise OutOfBoundsError("world coordinate outside workspace bounds")
    u = np.floor((x - config.x_min) * config.resolution).astype(np.int64)
    v = np.floor((y - config.y_min) * config.resolution).astype(np.int64)
    # guard the top edge: floor can hit width/height when x is a hair under x_max
    u = np.minimum(u, config.width - 1)
    v = np.minimum(v, config.height - 1)
    if x.ndim == 0:
        return int(u), int(v)
    return u, v


def topdown_px_to_world(config: TopDownConfig, u, v):
    """Map top-down pixel indices to the world coordinates of the cell center."""
    u = np.asarray(u)
    v = np.asarray(v)
    if ((u < 0) | (u >= config.width) | (v < 0) | (v >= config.height)).any():
        raise OutOfBoundsError("pixel outside top-down image")
    x = config.x_min + (u + 0.5) / config.resolution
    y = config.y_min + (v + 0.5) / config.resolution
    if u.ndim == 0:
        return float(x), float(y)
    return x, y


def nearest_fill_indices(occupied: np.ndarray) -> np.ndarray:
    """For every cell, the flat row-major index of the nearest occupied cell.

    Euclidean distance on cell centers; ties resolved toward the occupied
    cell with the lowest row-major index. Squared distances between grid
    cells are integers, so the tie comparison is exact.
    """
    occupied = np.asarray(occupied, dtype=bool)
    h, w = occupied.shape
    if not occupied.any():
        raise ValueError("no occupied cells to fill from")
    out = np.empty(h * w, dtype=np.int64)
    src_vu = np.argwhere(occupied)  # sorted row-major by construction
    src_flat = src_vu[:, 0] * w + src_vu[:, 1]
    out[src_flat] = src_flat
    empty_vu = np.argwhere(~occupied)
    if len(empty_vu) == 0:
        return out.reshape(h, w)
    tree = cKDTree(src_vu)
    n_src = len(src_vu)
    pending = np.arange(len(empty_vu))
    chosen = np.empty(len(empty_vu), dtype=np.int64)
    k = min(4, n_src)
    while len(pending):
        dist, idx = tree.query(empty_vu[pending], k=k)
        if k == 1:  # query drops the neighbor axis for k=1
            dist = dist[:, None]
            idx = idx[:, None]
        d2 = np.rint(dist * dist).astype(np.int64)
        # candidates tied with the nearest; if the last returned neighbor is
        # still tied there may be more beyond k, so re-query those wider
        tied = d2 == d2[:, :1]
        truncated = tied[:, -1] & (k < n_src)
        done = ~truncated
        if done.any():
            rows = np.where(done)[0]
            cand = np.where(tied[rows], src_flat[idx[rows]], np.iinfo(np.int64).max)
            chosen[pending[rows]] = cand.min(axis=1)
        pending = pending[truncated]
        k = min(k * 2, n_src)
    out[(~occupied).reshape(-1).nonzero()[0]] = chosen
    return out.reshape(h, w)


def build_topdown(frame: RgbdFrame, config: TopDownConfig) -> TopDownObservation:
    """Reproject an RGBD frame into the orthographic top-down observation.

    Every valid-depth pixel is deprojected; per top-down cell the highest
    point wins (z-buffer seen from above) and contributes its color. Height
    is clipped at the table plane. Cells no point landed in are filled from
    their nearest non-empty cell.
    """
    intr = frame.intrinsics
    depth = frame.depth
    valid = depth > 0
    if not valid.any():
        raise EmptyProjectionError("frame has no valid depth")
    vs, us = np.nonzero(valid)
    d = depth[vs, us].astype(np.float64)
    cam = np.stack([
        (us - intr.cx) * d / intr.fx,
        (vs - intr.cy) * d / intr.fy,
        d,
    ], axis=1)
    world = cam @ frame.pose.rotation.T + frame.pose.translation
    x, y, z = world[:, 0], world[:, 1], world[:, 2]

    inb = (
        (x >= config.x_min) & (x < config.x_max)
        & (y >= config.y_min) & (y < config.y_max)
    )
    if not inb.any():
        raise EmptyProjectionError("no point lands inside the workspace")
    x, y, z = x[inb], y[inb], z[inb]
    colors = frame.rgb[vs[inb], us[inb]]

    cu = np.minimum(np.floor((x - config.x_min) * config.resolution).astype(np.int64),
                    config.width - 1)
    cv = np.minimum(np.floor((y - config.y_min) * config.resolution).astype(np.int64),
                    config.height - 1)

    # z-buffer: stable sort ascending by z, later assignment wins per cell
    order = np.argsort(z, kind="stable")
    flat = cv[order] * config.width + cu[order]
    hmap = np.zeros(config.height * config.width, dtype=np.float64)
    rgb = np.zeros((config.height * config.width, 3), dtype=np.uint8)
    filled = np.zeros(config.height * config.width, dtype=bool)
    hmap[flat] = np.maximum(z[order] - config.table_height, 0.0)
    rgb[flat] = colors[order]
    filled[flat] = True

    hmap = hmap.reshape(config.height, config.width)
    rgb = rgb.reshape(config.height, config.width, 3)
    filled = filled.reshape(config.height, config.width)
    if not filled.all():
        src = nearest_fill_indices(filled).reshape(-1)
        hmap = hmap.reshape(-1)[src].reshape(config.height, config.width)
        rgb = rgb.reshape(-1, 3)[src].reshape(config.height, config.width, 3)
    return TopDownObservation(rgb=rgb, heightmap=hmap.astype(np.float32), config=config)
