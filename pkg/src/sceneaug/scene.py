"""Demonstration data model, dataset serialization, and the synthetic generator.

On-disk layout (format_version 1): one directory per demo holding rgb.png
(8-bit RGB), height.png (16-bit grayscale, millimeters above the table),
masks.png (indexed: 0 background, 1 pick, 2 place, 3+ distractors) and
demo.json; a dataset.json manifest sits next to the demo directories and is
written last as the commit point. Heightmaps are snapped to millimeter
resolution at Demo construction so serialization is lossless.
"""

from __future__ import annotations

import json
import os
import shutil
import uuid
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import imgio
from .errors import FormatError
from .geometry import TopDownConfig, TopDownObservation
from .util import canonical_json, frozen_array, stable_digest

FORMAT_VERSION = 1


def mask_centroid(mask: np.ndarray) -> tuple[int, int]:
    """Round-to-nearest centroid (u, v) of a non-empty bitmap."""
    vs, us = np.nonzero(mask)
    if len(vs) == 0:
        raise ValueError("centroid of empty mask")
    return int(np.floor(us.mean() + 0.5)), int(np.floor(vs.mean() + 0.5))


def snap_heightmap(hm: np.ndarray) -> np.ndarray:
    """Quantize heights to whole millimeters (the on-disk resolution)."""
    return (np.round(np.asarray(hm, dtype=np.float64) * 1000.0) / 1000.0).astype(np.float32)


@dataclass(frozen=True, eq=False)
class MaskSet:
    """Per-role object bitmaps; background is the complement of their union."""

    pick_object: np.ndarray
    place_target: np.ndarray
    distractors: tuple[np.ndarray, ...] = ()

    def __post_init__(self):
        pick = frozen_array(self.pick_object, bool)
        place = frozen_array(self.place_target, bool)
        dis = tuple(frozen_array(d, bool) for d in self.distractors)
        if pick.shape != place.shape or any(d.shape != pick.shape for d in dis):
            raise ValueError("all masks must share dimensions")
        object.__setattr__(self, "pick_object", pick)
        object.__setattr__(self, "place_target", place)
        object.__setattr__(self, "distractors", dis)

    def union(self) -> np.ndarray:
        out = self.pick_object | self.place_target
        for d in self.distractors:
            out = out | d
        return out

    def background(self) -> np.ndarray:
        return ~self.union()

    def __eq__(self, other):
        if not isinstance(other, MaskSet):
            return NotImplemented
        return (
            np.array_equal(self.pick_object, other.pick_object)
            and np.array_equal(self.place_target, other.place_target)
            and len(self.distractors) == len(other.distractors)
            and all(np.array_equal(a, b) for a, b in zip(self.distractors, other.distractors))
        )


@dataclass(frozen=True)
class PickPlaceAction:
    pick_px: tuple[int, int]
    place_px: tuple[int, int]

    def __post_init__(self):
        for name, px in (("pick_px", self.pick_px), ("place_px", self.place_px)):
            if len(px) != 2 or not all(isinstance(int(c), int) for c in px):
                raise ValueError(f"{name} must be an integer (u, v) pair")
        object.__setattr__(self, "pick_px", (int(self.pick_px[0]), int(self.pick_px[1])))
        object.__setattr__(self, "place_px", (int(self.place_px[0]), int(self.place_px[1])))


@dataclass(frozen=True)
class Provenance:
    kind: str  # "original" | "augmented"
    parent_id: Optional[str] = None
    plan_digest: Optional[str] = None

    def __post_init__(self):
        if self.kind not in ("original", "augmented"):
            raise ValueError(f"unknown provenance kind {self.kind!r}")
        if self.kind == "augmented" and (self.parent_id is None or self.plan_digest is None):
            raise ValueError("augmented provenance needs parent_id and plan_digest")

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "augmented":
            d["parent_id"] = self.parent_id
            d["plan_digest"] = self.plan_digest
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Provenance":
        return cls(d["kind"], d.get("parent_id"), d.get("plan_digest"))


@dataclass(frozen=True, eq=False)
class Demo:
    """One labeled demonstration. Masks/action may be absent while a demo
    awaits annotation; validation reports them as violations."""

    id: str
    obs: TopDownObservation
    masks: Optional[MaskSet]
    action: Optional[PickPlaceAction]
    task_text: str
    provenance: Provenance = field(default_factory=lambda: Provenance("original"))
    condition: Optional[str] = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("demo id must be non-empty")
        if not self.task_text:
            raise ValueError("task_text must be non-empty")
        snapped = snap_heightmap(self.obs.heightmap)
        if not np.array_equal(snapped, self.obs.heightmap):
            object.__setattr__(
                self, "obs",
                TopDownObservation(self.obs.rgb, snapped, self.obs.config))
        if self.masks is not None:
            shape = (self.obs.config.height, self.obs.config.width)
            if self.masks.pick_object.shape != shape:
                raise ValueError("mask dims disagree with observation")

    def __eq__(self, other):
        if not isinstance(other, Demo):
            return NotImplemented
        return (
            self.id == other.id
            and self.task_text == other.task_text
            and self.provenance == other.provenance
            and self.condition == other.condition
            and self.action == other.action
            and self.obs.config == other.obs.config
            and np.array_equal(self.obs.rgb, other.obs.rgb)
            and np.array_equal(self.obs.heightmap, other.obs.heightmap)
            and self.masks == other.masks
        )


def validate_demo(demo: Demo) -> list[str]:
    """Return every violated mask/action invariant; valid demos return []."""
    v = []
    if demo.masks is None:
        v.append("masks missing")
    else:
        m = demo.masks
        if not m.pick_object.any():
            v.append("pick_object mask empty")
        if not m.place_target.any():
            v.append("place_target mask empty")
        if (m.pick_object & m.place_target).any():
            v.append("masks intersect")
    if demo.action is None:
        v.append("action missing")
    else:
        h, w = demo.obs.config.height, demo.obs.config.width
        for name, (u, px_v) in (("pick_px", demo.action.pick_px),
                                ("place_px", demo.action.place_px)):
            if not (0 <= u < w and 0 <= px_v < h):
                v.append(f"{name} out of bounds")
        if demo.masks is not None:
            pu, pv = demo.action.pick_px
            qu, qv = demo.action.place_px
            if 0 <= pu < w and 0 <= pv < h and not demo.masks.pick_object[pv, pu]:
                v.append("pick_px outside pick_object")
            if 0 <= qu < w and 0 <= qv < h and not demo.masks.place_target[qv, qu]:
                v.append("place_px outside place_target")
    return v


@dataclass(frozen=True)
class DatasetManifest:
    tasks: tuple[str, ...]
    count: int
    seeds: Optional[dict] = None
    config_digest: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "tasks": list(self.tasks),
            "count": self.count,
            "seeds": self.seeds,
            "config_digest": self.config_digest,
        }


@dataclass(frozen=True, eq=False)
class DemoDataset:
    demos: tuple[Demo, ...]
    manifest: DatasetManifest

    def __post_init__(self):
        demos = tuple(self.demos)
        ids = [d.id for d in demos]
        if len(set(ids)) != len(ids):
            raise ValueError("demo ids must be unique")
        if self.manifest.count != len(demos):
            raise ValueError("manifest count disagrees with demo count")
        object.__setattr__(self, "demos", demos)

    @classmethod
    def build(cls, demos, seeds=None, config_digest=None) -> "DemoDataset":
        demos = tuple(demos)
        tasks = tuple(sorted({d.task_text for d in demos}))
        return cls(demos, DatasetManifest(tasks, len(demos), seeds, config_digest))

    def __eq__(self, other):
        if not isinstance(other, DemoDataset):
            return NotImplemented
        return self.manifest == other.manifest and self.demos == other.demos

    def by_id(self, demo_id: str) -> Demo:
        for d in self.demos:
            if d.id == demo_id:
                return d
        raise KeyError(demo_id)


@dataclass(frozen=True, eq=False)
class ScoreMap:
    """Unnormalized per-pixel affordance scores."""

    values: np.ndarray

    def __post_init__(self):
        vals = frozen_array(self.values, np.float32)
        if vals.ndim != 2:
            raise ValueError("score map must be 2-D")
        if not np.isfinite(vals).all():
            raise ValueError("scores must be finite")
        object.__setattr__(self, "values", vals)

    def argmax_px(self) -> tuple[int, int]:
        """(u, v) of the maximum; ties go to the lowest row-major index."""
        idx = int(np.argmax(self.values))
        v, u = divmod(idx, self.values.shape[1])
        return u, v


# --------------------------------------------------------------------------
# serialization

def _masks_to_labels(masks: MaskSet) -> np.ndarray:
    labels = np.zeros(masks.pick_object.shape, dtype=np.uint8)
    for i, d in enumerate(masks.distractors):
        labels[d] = 3 + i
    labels[masks.place_target] = 2
    labels[masks.pick_object] = 1
    return labels


def _labels_to_masks(labels: np.ndarray) -> MaskSet:
    n_dis = int(labels.max()) - 2 if labels.max() >= 3 else 0
    return MaskSet(
        pick_object=labels == 1,
        place_target=labels == 2,
        distractors=tuple(labels == 3 + i for i in range(n_dis)),
    )


def demo_to_json_dict(demo: Demo) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "id": demo.id,
        "task_text": demo.task_text,
        "action": None if demo.action is None else {
            "pick": list(demo.action.pick_px),
            "place": list(demo.action.place_px),
        },
        "provenance": demo.provenance.to_dict(),
        "condition": demo.condition,
        "config": demo.obs.config.to_dict(),
        "has_masks": demo.masks is not None,
    }


def write_demo_dir(demo: Demo, path: Path) -> None:
    """Write one demo atomically (temp dir + rename swap)."""
    path = Path(path)
    tmp = path.parent / f".{path.name}.tmp-{uuid.uuid4().hex[:8]}"
    tmp.mkdir(parents=True)
    try:
        (tmp / "rgb.png").write_bytes(imgio.encode_rgb_png(demo.obs.rgb))
        (tmp / "height.png").write_bytes(imgio.encode_height_png(demo.obs.heightmap))
        if demo.masks is not None:
            (tmp / "masks.png").write_bytes(imgio.encode_label_png(_masks_to_labels(demo.masks)))
        (tmp / "demo.json").write_text(canonical_json(demo_to_json_dict(demo)) + "\n")
        if path.exists():
            trash = path.parent / f".{path.name}.old-{uuid.uuid4().hex[:8]}"
            os.rename(path, trash)
            os.rename(tmp, path)
            shutil.rmtree(trash)
        else:
            os.rename(tmp, path)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise


def read_demo_dir(path: Path) -> Demo:
    path = Path(path)
    try:
        meta = json.loads((path / "demo.json").read_text())
        rgb = imgio.decode_rgb_png((path / "rgb.png").read_bytes())
        hm = imgio.decode_height_png((path / "height.png").read_bytes())
    except FileNotFoundError as e:
        raise FormatError(f"demo dir {path} is missing {e.filename}") from e
    except (json.JSONDecodeError, ValueError) as e:
        raise FormatError(f"demo dir {path} is corrupt: {e}") from e
    if meta.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"unsupported demo format_version in {path}")
    config = TopDownConfig.from_dict(meta["config"])
    if rgb.shape[:2] != (config.height, config.width) or hm.shape != rgb.shape[:2]:
        raise FormatError(f"demo dir {path}: image dims disagree with config")
    masks = None
    if meta.get("has_masks"):
        try:
            labels = imgio.decode_label_png((path / "masks.png").read_bytes())
        except FileNotFoundError as e:
            raise FormatError(f"demo dir {path} is missing masks.png") from e
        if labels.shape != hm.shape:
            raise FormatError(f"demo dir {path}: mask dims disagree")
        masks = _labels_to_masks(labels)
    action = None
    if meta.get("action") is not None:
        action = PickPlaceAction(tuple(meta["action"]["pick"]), tuple(meta["action"]["place"]))
    return Demo(
        id=meta["id"],
        obs=TopDownObservation(rgb, hm, config),
        masks=masks,
        action=action,
        task_text=meta["task_text"],
        provenance=Provenance.from_dict(meta["provenance"]),
        condition=meta.get("condition"),
    )


def save_dataset(dataset: DemoDataset, out_dir) -> None:
    """Write the dataset atomically: temp dir, manifest last, rename swap."""
    out_dir = Path(out_dir)
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    tmp = out_dir.parent / f".{out_dir.name}.tmp-{uuid.uuid4().hex[:8]}"
    tmp.mkdir()
    try:
        for demo in dataset.demos:
            write_demo_dir(demo, tmp / demo.id)
        manifest = dataset.manifest.to_dict()
        manifest["ids"] = [d.id for d in dataset.demos]
        (tmp / "dataset.json").write_text(canonical_json(manifest) + "\n")
        if out_dir.exists():
            trash = out_dir.parent / f".{out_dir.name}.old-{uuid.uuid4().hex[:8]}"
            os.rename(out_dir, trash)
            os.rename(tmp, out_dir)
            shutil.rmtree(trash)
        else:
            os.rename(tmp, out_dir)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise


def load_dataset(in_dir) -> DemoDataset:
    in_dir = Path(in_dir)
    manifest_path = in_dir / "dataset.json"
    if not manifest_path.exists():
        raise FormatError(f"{in_dir} has no dataset.json manifest")
    try:
        meta = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as e:
        raise FormatError(f"corrupt manifest in {in_dir}: {e}") from e
    if meta.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"unsupported dataset format_version in {in_dir}")
    ids = meta.get("ids", [])
    if meta.get("count") != len(ids):
        raise FormatError("manifest count disagrees with id list")
    demos = []
    for demo_id in ids:
        demo_dir = in_dir / demo_id
        if not demo_dir.is_dir():
            raise FormatError(f"manifest lists {demo_id} but {demo_dir} is missing")
        demos.append(read_demo_dir(demo_dir))
    manifest = DatasetManifest(
        tasks=tuple(meta.get("tasks", [])),
        count=meta["count"],
        seeds=meta.get("seeds"),
        config_digest=meta.get("config_digest"),
    )
    return DemoDataset(tuple(demos), manifest)


def demo_digest(demo: Demo) -> str:
    return stable_digest(
        canonical_json(demo_to_json_dict(demo)),
        demo.obs.rgb.tobytes(),
        imgio.height_to_mm_u16(demo.obs.heightmap).tobytes(),
        b"" if demo.masks is None else _masks_to_labels(demo.masks).tobytes(),
    )


def dataset_digest(dataset: DemoDataset) -> str:
    return stable_digest(
        canonical_json(dataset.manifest.to_dict()),
        *[demo_digest(d) for d in dataset.demos],
    )


# --------------------------------------------------------------------------
# synthetic demos

@dataclass(frozen=True)
class ObjectSpec:
    """Appearance/size family for one synthetic object."""

    name: str
    rgb: tuple[int, int, int]
    extent_range: tuple[float, float]  # square footprint side, meters
    height_range: tuple[float, float]


@dataclass(frozen=True)
class SynthPalette:
    pick_specs: tuple[ObjectSpec, ...]
    place_specs: tuple[ObjectSpec, ...]
    table_colors: tuple[tuple[int, int, int], ...]
    margin_px: int = 12


def default_palette() -> SynthPalette:
    return SynthPalette(
        pick_specs=(
            ObjectSpec("red block", (200, 50, 45), (0.040, 0.058), (0.012, 0.020)),
            ObjectSpec("blue block", (55, 70, 200), (0.040, 0.058), (0.012, 0.020)),
            ObjectSpec("yellow block", (220, 190, 40), (0.040, 0.058), (0.012, 0.020)),
        ),
        place_specs=(
            ObjectSpec("green pad", (60, 170, 70), (0.080, 0.110), (0.004, 0.007)),
            ObjectSpec("white pad", (225, 225, 220), (0.080, 0.110), (0.004, 0.007)),
        ),
        table_colors=((150, 120, 90), (130, 130, 135), (160, 140, 110)),
    )


def _rect_px(config: TopDownConfig, cx: float, cy: float, extent: float):
    half = extent / 2
    u0 = int(np.floor((cx - half - config.x_min) * config.resolution))
    v0 = int(np.floor((cy - half - config.y_min) * config.resolution))
    u1 = int(np.floor((cx + half - config.x_min) * config.resolution))
    v1 = int(np.floor((cy + half - config.y_min) * config.resolution))
    return max(u0, 0), max(v0, 0), min(u1, config.width - 1), min(v1, config.height - 1)


def _rects_clear(a, b, margin: int) -> bool:
    return (
        a[2] + margin < b[0] or b[2] + margin < a[0]
        or a[3] + margin < b[1] or b[3] + margin < a[1]
    )


def synth_demo(rng_seed: int, palette: Optional[SynthPalette] = None,
               config: Optional[TopDownConfig] = None) -> Demo:
    """Deterministically generate one box-on-table pick-and-place demo.

    One raised pick box and one flat place pad at non-overlapping positions,
    rendered analytically with exact masks; the action is the pair of mask
    centroids.
    """
    palette = palette or default_palette()
    config = config or TopDownConfig()
    rng = np.random.default_rng(rng_seed)
    pick_spec = palette.pick_specs[rng.integers(len(palette.pick_specs))]
    place_spec = palette.place_specs[rng.integers(len(palette.place_specs))]
    table_rgb = palette.table_colors[rng.integers(len(palette.table_colors))]

    pick_extent = float(rng.uniform(*pick_spec.extent_range))
    place_extent = float(rng.uniform(*place_spec.extent_range))
    pick_h = float(rng.uniform(*pick_spec.height_range))
    place_h = float(rng.uniform(*place_spec.height_range))

    def sample_center(extent):
        half = extent / 2 + 0.002
        x = rng.uniform(config.x_min + half, config.x_max - half)
        y = rng.uniform(config.y_min + half, config.y_max - half)
        return x, y

    pick_rect = place_rect = None
    for _ in range(40):
        pick_rect = _rect_px(config, *sample_center(pick_extent), pick_extent)
        place_rect = _rect_px(config, *sample_center(place_extent), place_extent)
        if _rects_clear(pick_rect, place_rect, palette.margin_px):
            break
    else:
        # deterministic fallback: quarter and three-quarter points
        span_x = config.x_max - config.x_min
        span_y = config.y_max - config.y_min
        pick_rect = _rect_px(config, config.x_min + span_x / 4,
                             config.y_min + span_y / 2, pick_extent)
        place_rect = _rect_px(config, config.x_min + 3 * span_x / 4,
                              config.y_min + span_y / 2, place_extent)

    rgb = np.empty((config.height, config.width, 3), dtype=np.uint8)
    rgb[:] = table_rgb
    hm = np.zeros((config.height, config.width), dtype=np.float32)
    masks = {}
    for key, rect, color, h in (
        ("pick", pick_rect, pick_spec.rgb, pick_h),
        ("place", place_rect, place_spec.rgb, place_h),
    ):
        u0, v0, u1, v1 = rect
        m = np.zeros((config.height, config.width), dtype=bool)
        m[v0:v1 + 1, u0:u1 + 1] = True
        rgb[m] = color
        hm[m] = h
        masks[key] = m

    mask_set = MaskSet(pick_object=masks["pick"], place_target=masks["place"])
    action = PickPlaceAction(mask_centroid(masks["pick"]), mask_centroid(masks["place"]))
    return Demo(
        id=f"synth-{rng_seed}",
        obs=TopDownObservation(rgb, hm, config),
        masks=mask_set,
        action=action,
        task_text=f"put the {pick_spec.name} on the {place_spec.name}",
        provenance=Provenance("original"),
    )


def with_id(demo: Demo, new_id: str) -> Demo:
    return replace(demo, id=new_id)
