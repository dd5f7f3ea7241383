"""Scene augmentation operators, baselines, and the batch dataset expander.

Four label-preserving operators edit a demo: in-category retexturing,
cross-category mesh replacement, collision-checked distractor insertion,
and background regeneration. A plan samples a subset of operators with all
their parameters; applying a plan twice yields byte-identical demos.
Operator order within a plan is fixed (cross-category, in-category,
distractors, background) so background generation always sees final masks.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image

from .errors import (
    DegenerateMeshError,
    EmptyCorpusError,
    PlacementExhausted,
    ReplacementInvalid,
)
from .genbackend import GenRequest, generate
from .geometry import TopDownObservation, nearest_fill_indices, topdown_px_to_world
from .rasterizer import Placement, TriMesh, fit_scale_to_footprint, load_obj, rasterize
from .scene import (
    Demo,
    MaskSet,
    PickPlaceAction,
    Provenance,
    DemoDataset,
    mask_centroid,
    snap_heightmap,
    validate_demo,
)
from .util import canonical_json, derive_seed, stable_digest

OP_ORDER = (
    "cross_category_pick",
    "cross_category_place",
    "in_category_pick",
    "in_category_place",
    "distractors",
    "background",
)

DEFAULT_OP_PROBS = {
    "cross_category_pick": 0.3,
    "cross_category_place": 0.3,
    "in_category_pick": 0.5,
    "in_category_place": 0.5,
    "distractors": 0.7,
    "background": 0.7,
}


@dataclass(frozen=True)
class PromptVocab:
    colors: tuple[str, ...]
    materials: tuple[str, ...]
    category_names: dict = field(default_factory=dict)  # mesh id -> noun phrase

    def __post_init__(self):
        if not self.colors or not self.materials:
            raise ValueError("vocab lists must be non-empty")


def default_vocab(category_names: Optional[dict] = None) -> PromptVocab:
    return PromptVocab(
        colors=("red", "green", "yellow", "blue", "white",
                "black", "orange", "purple", "brown", "pink"),
        materials=("glass", "marble", "wood", "metal", "plastic", "fabric"),
        category_names=dict(category_names or {}),
    )


class AssetLibrary:
    """Mesh pools plus cutout/background corpora, loaded from a directory.

    Layout: {dir}/library.json listing role membership (mesh ids are paths
    relative to the directory); cutouts are RGBA PNGs, backgrounds RGB PNGs.
    Without a library.json, role membership comes from pick/, place/ and
    distractor/ subdirectories of OBJ files.
    """

    def __init__(self, base_dir, pick_meshes, place_meshes, distractor_meshes,
                 cutout_dir=None, background_dir=None, categories=None):
        self.base_dir = Path(base_dir)
        self.pick_meshes = tuple(pick_meshes)
        self.place_meshes = tuple(place_meshes)
        self.distractor_meshes = tuple(distractor_meshes)
        self.cutout_dir = Path(cutout_dir) if cutout_dir else None
        self.background_dir = Path(background_dir) if background_dir else None
        self.categories = dict(categories or {})
        self._mesh_cache: dict[str, TriMesh] = {}
        missing = [m for m in set(self.pick_meshes + self.place_meshes + self.distractor_meshes)
                   if not (self.base_dir / m).exists()]
        if missing:
            raise FileNotFoundError(f"library references missing meshes: {sorted(missing)}")

    @classmethod
    def load(cls, base_dir) -> "AssetLibrary":
        base_dir = Path(base_dir)
        manifest = base_dir / "library.json"
        if manifest.exists():
            meta = json.loads(manifest.read_text())
            return cls(
                base_dir,
                meta["pick"], meta["place"], meta["distractor"],
                cutout_dir=base_dir / meta["cutout_dir"] if meta.get("cutout_dir") else None,
                background_dir=base_dir / meta["background_dir"] if meta.get("background_dir") else None,
                categories=meta.get("categories"),
            )
        # directory convention fallback: one subdirectory per role
        pools = {role: sorted(f"{role}/{p.name}" for p in (base_dir / role).glob("*.obj"))
                 for role in ("pick", "place", "distractor")}
        cutouts = base_dir / "cutouts"
        backgrounds = base_dir / "backgrounds"
        return cls(
            base_dir, pools["pick"], pools["place"], pools["distractor"],
            cutout_dir=cutouts if cutouts.is_dir() else None,
            background_dir=backgrounds if backgrounds.is_dir() else None,
            categories={m: Path(m).stem for pool in pools.values() for m in pool},
        )

    def mesh(self, mesh_id: str) -> TriMesh:
        if mesh_id not in self._mesh_cache:
            self._mesh_cache[mesh_id] = load_obj(self.base_dir / mesh_id)
        return self._mesh_cache[mesh_id]

    def cutout_paths(self) -> list[Path]:
        if self.cutout_dir is None:
            return []
        return sorted(self.cutout_dir.glob("*.png"))

    def background_paths(self) -> list[Path]:
        if self.background_dir is None:
            return []
        return sorted(self.background_dir.glob("*.png"))

    def describe(self) -> dict:
        return {
            "pick": list(self.pick_meshes),
            "place": list(self.place_meshes),
            "distractor": list(self.distractor_meshes),
            "categories": self.categories,
        }


@dataclass(frozen=True)
class AugmentConfig:
    count: int = 100
    op_probs: dict = field(default_factory=lambda: dict(DEFAULT_OP_PROBS))
    distractor_count_range: tuple[int, int] = (1, 3)
    scale_jitter_range: tuple[float, float] = (0.85, 1.2)
    collision_margin_px: int = 4
    max_placement_retries: int = 10
    master_seed: int = 0

    def __post_init__(self):
        probs = {k: float(self.op_probs.get(k, 0.0)) for k in OP_ORDER}
        unknown = set(self.op_probs) - set(OP_ORDER)
        if unknown:
            raise ValueError(f"unknown operator kinds: {sorted(unknown)}")
        if any(p < 0 for p in probs.values()) or sum(probs.values()) <= 0:
            raise ValueError("op_probs must be non-negative with positive sum")
        if self.count < 0:
            raise ValueError("count must be >= 0")
        lo, hi = self.distractor_count_range
        if lo > hi or lo < 0:
            raise ValueError("distractor_count_range must be ordered and non-negative")
        lo, hi = self.scale_jitter_range
        if not (0 < lo <= hi):
            raise ValueError("scale_jitter_range must be ordered and positive")
        object.__setattr__(self, "op_probs", probs)
        object.__setattr__(self, "distractor_count_range",
                           (int(self.distractor_count_range[0]), int(self.distractor_count_range[1])))
        object.__setattr__(self, "scale_jitter_range",
                           (float(self.scale_jitter_range[0]), float(self.scale_jitter_range[1])))

    def to_dict(self) -> dict:
        return {
            "format_version": 1,
            "count": self.count,
            "op_probs": dict(self.op_probs),
            "distractor_count_range": list(self.distractor_count_range),
            "scale_jitter_range": list(self.scale_jitter_range),
            "collision_margin_px": self.collision_margin_px,
            "max_placement_retries": self.max_placement_retries,
            "master_seed": self.master_seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AugmentConfig":
        d = {k: v for k, v in d.items() if k != "format_version"}
        d["distractor_count_range"] = tuple(d.get("distractor_count_range", (1, 3)))
        d["scale_jitter_range"] = tuple(d.get("scale_jitter_range", (0.85, 1.2)))
        return cls(**d)

    def digest(self) -> str:
        return stable_digest(canonical_json(self.to_dict()))


# --------------------------------------------------------------------------
# plans

@dataclass(frozen=True)
class InCategoryOp:
    role: str  # "pick" | "place"
    prompt: str
    seed: int

    def to_dict(self):
        return {"op": "in_category", "role": self.role, "prompt": self.prompt, "seed": self.seed}


@dataclass(frozen=True)
class CrossCategoryOp:
    role: str
    mesh_id: str
    prompt: str
    seed: int
    yaw: float
    scale_jitter: float

    def to_dict(self):
        return {"op": "cross_category", "role": self.role, "mesh_id": self.mesh_id,
                "prompt": self.prompt, "seed": self.seed, "yaw": self.yaw,
                "scale_jitter": self.scale_jitter}


@dataclass(frozen=True)
class DistractorOp:
    mesh_id: str
    prompt: str
    seed: int
    center_frac: tuple[float, float]  # workspace-relative initial placement
    yaw: float
    scale: float

    def to_dict(self):
        return {"op": "distractor", "mesh_id": self.mesh_id, "prompt": self.prompt,
                "seed": self.seed, "center_frac": list(self.center_frac),
                "yaw": self.yaw, "scale": self.scale}


@dataclass(frozen=True)
class BackgroundOp:
    prompt: str
    seed: int

    def to_dict(self):
        return {"op": "background", "prompt": self.prompt, "seed": self.seed}


@dataclass(frozen=True)
class AugmentPlan:
    ops: tuple

    def to_dict(self) -> dict:
        return {"ops": [op.to_dict() for op in self.ops]}

    def digest(self) -> str:
        return stable_digest(canonical_json(self.to_dict()))


def _sample_prompt(rng, vocab: PromptVocab, category: str) -> str:
    color = vocab.colors[rng.integers(len(vocab.colors))]
    material = vocab.materials[rng.integers(len(vocab.materials))]
    return f"a {color} {material} {category}"


def _generic_category(rng, vocab: PromptVocab) -> str:
    names = sorted(set(vocab.category_names.values()))
    if not names:
        return "object"
    return names[rng.integers(len(names))]


def sample_plan(rng, config: AugmentConfig, library: AssetLibrary,
                vocab: PromptVocab) -> AugmentPlan:
    """Sample operator inclusion and all parameters; guarantees >= 1 operator."""
    while True:
        included = [k for k in OP_ORDER if rng.random() < config.op_probs[k]]
        if included:
            break
    ops = []
    for kind in included:
        if kind.startswith("cross_category"):
            role = kind.rsplit("_", 1)[1]
            pool = library.pick_meshes if role == "pick" else library.place_meshes
            if not pool:
                continue
            mesh_id = pool[rng.integers(len(pool))]
            prompt = _sample_prompt(rng, vocab, library.categories.get(mesh_id, "object"))
            ops.append(CrossCategoryOp(
                role=role, mesh_id=mesh_id, prompt=prompt,
                seed=int(rng.integers(2 ** 63)),
                yaw=float(rng.uniform(0, 2 * math.pi)),
                scale_jitter=float(rng.uniform(*config.scale_jitter_range)),
            ))
        elif kind.startswith("in_category"):
            role = kind.rsplit("_", 1)[1]
            prompt = _sample_prompt(rng, vocab, _generic_category(rng, vocab))
            ops.append(InCategoryOp(role=role, prompt=prompt, seed=int(rng.integers(2 ** 63))))
        elif kind == "distractors":
            lo, hi = config.distractor_count_range
            n = int(rng.integers(lo, hi + 1))
            for _ in range(n):
                if not library.distractor_meshes:
                    break
                mesh_id = library.distractor_meshes[rng.integers(len(library.distractor_meshes))]
                prompt = _sample_prompt(rng, vocab, library.categories.get(mesh_id, "object"))
                ops.append(DistractorOp(
                    mesh_id=mesh_id, prompt=prompt,
                    seed=int(rng.integers(2 ** 63)),
                    center_frac=(float(rng.random()), float(rng.random())),
                    yaw=float(rng.uniform(0, 2 * math.pi)),
                    scale=float(rng.uniform(*config.scale_jitter_range)),
                ))
        elif kind == "background":
            prompt = _sample_prompt(rng, vocab, "table")
            ops.append(BackgroundOp(prompt=prompt, seed=int(rng.integers(2 ** 63))))
    if not ops:
        # pools were empty for every included kind; fall back to background
        ops.append(BackgroundOp(prompt=_sample_prompt(rng, vocab, "table"),
                                seed=int(rng.integers(2 ** 63))))
    return AugmentPlan(tuple(ops))


# --------------------------------------------------------------------------
# mutable scene state threaded through a plan

class _SceneState:
    def __init__(self, demo: Demo):
        if demo.masks is None or demo.action is None:
            raise ValueError("augmentation needs an annotated demo")
        self.rgb = np.array(demo.obs.rgb)
        self.height = np.array(demo.obs.heightmap)
        self.pick = np.array(demo.masks.pick_object)
        self.place = np.array(demo.masks.place_target)
        self.distractors = [np.array(d) for d in demo.masks.distractors]
        self.action = demo.action
        self.config = demo.obs.config
        self.task_text = demo.task_text
        self.condition = demo.condition

    def role_mask(self, role: str) -> np.ndarray:
        if role == "pick":
            return self.pick
        if role == "place":
            return self.place
        raise ValueError(f"unknown role {role!r}")

    def set_role_mask(self, role: str, mask: np.ndarray) -> None:
        if role == "pick":
            self.pick = mask
        else:
            self.place = mask

    def union_mask(self) -> np.ndarray:
        out = self.pick | self.place
        for d in self.distractors:
            out |= d
        return out

    def to_demo(self, out_id: str, provenance: Provenance) -> Demo:
        return Demo(
            id=out_id,
            obs=TopDownObservation(self.rgb, self.height, self.config),
            masks=MaskSet(self.pick, self.place, tuple(self.distractors)),
            action=self.action,
            task_text=self.task_text,
            provenance=provenance,
            condition=self.condition,
        )


def _regenerate(state: _SceneState, region: np.ndarray, prompt: str, seed: int, backend):
    # condition on millimeter-quantized heights, the resolution of both the
    # wire protocol and the stored demos, so every backend sees identical
    # geometry and the procedural oracle reproduces a remote run exactly
    req = GenRequest(state.rgb, snap_heightmap(state.height), region, prompt, seed)
    state.rgb = np.array(generate(backend, req).rgb)


def _nearest_background_fill(state: _SceneState, region: np.ndarray):
    """Paint region pixels with the color of their nearest background pixel."""
    background = ~state.union_mask()
    h, w = background.shape
    if not background.any():
        flat_rgb = state.rgb.reshape(-1, 3)
        state.rgb[region] = np.median(flat_rgb, axis=0).astype(np.uint8)
        return
    src = nearest_fill_indices(background).reshape(-1)
    flat = state.rgb.reshape(-1, 3)
    idx = np.nonzero(region.reshape(-1))[0]
    flat[idx] = flat[src[idx]]


def _in_category(state: _SceneState, role: str, prompt: str, seed: int, backend):
    mask = state.role_mask(role)
    if not mask.any():
        raise ValueError(f"{role} mask is empty")
    _regenerate(state, mask, prompt, seed, backend)


def _action_px(state: _SceneState, role: str) -> tuple[int, int]:
    return state.action.pick_px if role == "pick" else state.action.place_px


def _cross_category(state: _SceneState, role: str, mesh_id: str, prompt: str,
                    seed: int, backend, library: AssetLibrary,
                    scale_jitter: float = 1.0, yaw: float = 0.0,
                    max_retries: int = 10):
    old_mask = state.role_mask(role)
    if not old_mask.any():
        raise ValueError(f"{role} mask is empty")
    mesh = library.mesh(mesh_id)
    vs, us = np.nonzero(old_mask)
    res = state.config.resolution
    extent_m = ((us.max() - us.min() + 1) / res, (vs.max() - vs.min() + 1) / res)
    centroid = mask_centroid(old_mask)
    center = topdown_px_to_world(state.config, *centroid)
    base_scale = fit_scale_to_footprint(mesh, extent_m) * scale_jitter

    # erase the old object before deciding on the replacement
    _nearest_background_fill(state, old_mask)
    state.height[old_mask] = 0.0
    other = state.place if role == "pick" else state.pick
    blocked = other.copy()
    for d in state.distractors:
        blocked |= d
    action_px = _action_px(state, role)

    scale = base_scale
    for _ in range(max_retries + 1):
        try:
            patch = rasterize(mesh, Placement(center, yaw, scale), state.config)
        except DegenerateMeshError:
            scale *= 1.25
            continue
        new_mask = patch.mask
        au, av = action_px
        if not new_mask[av, au]:
            scale *= 1.25  # grow until the action pixel is covered
            continue
        if (new_mask & blocked).any():
            scale *= 0.8  # shrink away from the other protected masks
            continue
        height = state.height.copy()
        height[new_mask] = patch.height[new_mask]
        state.height = height
        state.set_role_mask(role, new_mask)
        _regenerate(state, new_mask, prompt, seed, backend)
        return
    raise ReplacementInvalid(
        f"no valid {role} replacement with mesh {mesh_id!r} after {max_retries} retries")


def _bbox_of(mask: np.ndarray):
    vs, us = np.nonzero(mask)
    if len(vs) == 0:
        return None
    return int(us.min()), int(vs.min()), int(us.max()), int(vs.max())


def _boxes_overlap(a, b) -> bool:
    return not (a[2] < b[0] or b[2] < a[0] or a[3] < b[1] or b[3] < a[1])


def _add_distractor(state: _SceneState, mesh_id: str, prompt: str, seed: int,
                    backend, rng, library: AssetLibrary, margin: int, max_retries: int,
                    center_frac=None, yaw=None, scale=None,
                    scale_range=(0.85, 1.2)):
    mesh = library.mesh(mesh_id)
    cfg = state.config
    protected = [b for b in (_bbox_of(state.pick), _bbox_of(state.place)) if b]
    protected += [b for b in map(_bbox_of, state.distractors) if b]
    if yaw is None:
        yaw = float(rng.uniform(0, 2 * math.pi))
    if scale is None:
        scale = float(rng.uniform(*scale_range))
    for attempt in range(max_retries + 1):
        if center_frac is None or attempt > 0:
            fx, fy = float(rng.random()), float(rng.random())
        else:
            fx, fy = center_frac
        center = (cfg.x_min + fx * (cfg.x_max - cfg.x_min),
                  cfg.y_min + fy * (cfg.y_max - cfg.y_min))
        try:
            patch = rasterize(mesh, Placement(center, yaw, scale), cfg)
        except DegenerateMeshError:
            continue
        bbox = patch.bbox()
        if bbox is None:
            continue
        expanded = (bbox[0] - margin, bbox[1] - margin, bbox[2] + margin, bbox[3] + margin)
        if any(_boxes_overlap(expanded, p) for p in protected):
            continue
        new_mask = patch.mask
        grow = new_mask & (patch.height > state.height)
        height = state.height.copy()
        height[grow] = patch.height[grow]
        state.height = height
        state.distractors.append(new_mask)
        _regenerate(state, new_mask, prompt, seed, backend)
        return
    raise PlacementExhausted(
        f"no collision-free placement for {mesh_id!r} after {max_retries} retries")


def _background(state: _SceneState, prompt: str, seed: int, backend):
    region = ~state.union_mask()
    if not region.any():
        return  # nothing outside the object masks, no pixels to edit
    _regenerate(state, region, prompt, seed, backend)


def apply_plan(demo: Demo, plan: AugmentPlan, backend, library: AssetLibrary,
               config: AugmentConfig, out_id: str) -> tuple[Demo, int]:
    """Apply a plan's operators in canonical order.

    Exhausted distractor placements are skipped; returns the new demo and
    how many operators actually applied. Raises ReplacementInvalid if a
    cross-category replacement cannot keep the action label valid.
    """
    state = _SceneState(demo)
    applied = 0
    for op in plan.ops:
        if isinstance(op, CrossCategoryOp):
            _cross_category(state, op.role, op.mesh_id, op.prompt, op.seed, backend,
                            library, op.scale_jitter, op.yaw, config.max_placement_retries)
            applied += 1
        elif isinstance(op, InCategoryOp):
            _in_category(state, op.role, op.prompt, op.seed, backend)
            applied += 1
        elif isinstance(op, DistractorOp):
            rng = np.random.default_rng(derive_seed("distractor-retry", op.seed))
            try:
                _add_distractor(state, op.mesh_id, op.prompt, op.seed, backend, rng,
                                library, config.collision_margin_px, config.max_placement_retries,
                                center_frac=op.center_frac, yaw=op.yaw, scale=op.scale,
                                scale_range=config.scale_jitter_range)
                applied += 1
            except PlacementExhausted:
                continue
        elif isinstance(op, BackgroundOp):
            _background(state, op.prompt, op.seed, backend)
            applied += 1
        else:
            raise TypeError(f"unknown op {op!r}")
    prov = Provenance("augmented", parent_id=demo.id, plan_digest=plan.digest())
    return state.to_demo(out_id, prov), applied


# --------------------------------------------------------------------------
# public single-op wrappers

def _single(demo: Demo, op, backend, library, config, out_id):
    plan = AugmentPlan((op,))
    out_id = out_id or f"{demo.id}-{plan.digest()[:8]}"
    new_demo, applied = apply_plan(demo, plan, backend, library, config, out_id)
    if applied == 0:
        raise PlacementExhausted("operator could not be applied")
    return new_demo


def aug_in_category(demo: Demo, role: str, prompt: str, seed: int, backend,
                    out_id: Optional[str] = None) -> Demo:
    """Regenerate the role object's appearance inside its mask only."""
    return _single(demo, InCategoryOp(role, prompt, int(seed)), backend, None,
                   AugmentConfig(), out_id)


def aug_cross_category(demo: Demo, role: str, mesh_id: str, prompt: str, seed: int,
                       backend, library: AssetLibrary,
                       scale_jitter: float = 1.0, yaw: float = 0.0,
                       max_retries: int = 10, out_id: Optional[str] = None) -> Demo:
    """Replace the role object with a mesh centered on the old mask centroid."""
    op = CrossCategoryOp(role, mesh_id, prompt, int(seed), yaw, scale_jitter)
    cfg = AugmentConfig(max_placement_retries=max_retries)
    return _single(demo, op, backend, library, cfg, out_id)


def aug_add_distractor(demo: Demo, mesh_id: str, prompt: str, seed: int, backend,
                       rng, config: AugmentConfig, library: AssetLibrary,
                       out_id: Optional[str] = None) -> Demo:
    """Insert one distractor, rejecting bbox collisions with protected masks."""
    center_frac = (float(rng.random()), float(rng.random()))
    yaw = float(rng.uniform(0, 2 * math.pi))
    scale = float(rng.uniform(*config.scale_jitter_range))
    op = DistractorOp(mesh_id, prompt, int(seed), center_frac, yaw, scale)
    return _single(demo, op, backend, library, config, out_id)


def aug_background(demo: Demo, prompt: str, seed: int, backend,
                   out_id: Optional[str] = None) -> Demo:
    """Regenerate everything outside the union of object masks."""
    return _single(demo, BackgroundOp(prompt, int(seed)), backend, None,
                   AugmentConfig(), out_id)


# --------------------------------------------------------------------------
# baselines

def load_rgba(path) -> np.ndarray:
    img = Image.open(path).convert("RGBA")
    return np.asarray(img, dtype=np.uint8)


def load_rgb(path) -> np.ndarray:
    img = Image.open(path).convert("RGB")
    return np.asarray(img, dtype=np.uint8)


def _paste(state: _SceneState, cutout: np.ndarray, pos: tuple[int, int]):
    """Alpha-composite a cutout; pasted pixels occlude whatever they cover."""
    h, w = state.rgb.shape[:2]
    ch, cw = cutout.shape[:2]
    u0, v0 = pos
    u0 = int(np.clip(u0, 0, max(w - cw, 0)))
    v0 = int(np.clip(v0, 0, max(h - ch, 0)))
    ch, cw = min(ch, h), min(cw, w)
    cut = cutout[:ch, :cw]
    alpha = cut[..., 3:4].astype(np.float64) / 255.0
    region = state.rgb[v0:v0 + ch, u0:u0 + cw].astype(np.float64)
    blended = alpha * cut[..., :3] + (1 - alpha) * region
    state.rgb[v0:v0 + ch, u0:u0 + cw] = np.round(blended).astype(np.uint8)
    covered = np.zeros((h, w), dtype=bool)
    covered[v0:v0 + ch, u0:u0 + cw] = cut[..., 3] > 127
    # pasted pixels hide the objects under them
    state.pick = state.pick & ~covered
    state.place = state.place & ~covered
    state.distractors = [d & ~covered for d in state.distractors]
    state.distractors.append(covered)


def baseline_copy_paste(demo: Demo, cutout: np.ndarray, rng,
                        out_id: Optional[str] = None) -> Demo:
    """Paste a segmented cutout anywhere, with no collision checks.

    May overwrite the pick/place objects; heights are not updated. The
    output can therefore fail validation, which is the point of this
    baseline.
    """
    if cutout.size == 0:
        raise EmptyCorpusError("empty cutout")
    state = _SceneState(demo)
    h, w = state.rgb.shape[:2]
    pos = (int(rng.integers(0, max(w - cutout.shape[1], 1))),
           int(rng.integers(0, max(h - cutout.shape[0], 1))))
    _paste(state, cutout, pos)
    prov = Provenance("augmented", parent_id=demo.id,
                      plan_digest=stable_digest("copy_paste", str(pos)))
    return state.to_demo(out_id or f"{demo.id}-cp", prov)


def baseline_random_background(demo: Demo, image: np.ndarray,
                               out_id: Optional[str] = None) -> Demo:
    """Replace background pixels with an arbitrary image; masks untouched."""
    if image.size == 0:
        raise EmptyCorpusError("empty background image")
    state = _SceneState(demo)
    h, w = state.rgb.shape[:2]
    if image.shape[:2] != (h, w):
        image = np.asarray(Image.fromarray(image).resize((w, h), Image.NEAREST))
    keep = state.union_mask()
    state.rgb = np.where(keep[..., None], state.rgb, image).astype(np.uint8)
    prov = Provenance("augmented", parent_id=demo.id,
                      plan_digest=stable_digest("random_background"))
    return state.to_demo(out_id or f"{demo.id}-bg", prov)


def baseline_random_distractors(demo: Demo, cutouts: list[np.ndarray], rng,
                                count_range=(1, 3), out_id: Optional[str] = None) -> Demo:
    """Paste several cutouts as distractors, with no collision checks."""
    if not cutouts:
        raise EmptyCorpusError("no cutouts")
    state = _SceneState(demo)
    h, w = state.rgb.shape[:2]
    n = int(rng.integers(count_range[0], count_range[1] + 1))
    for _ in range(n):
        cut = cutouts[int(rng.integers(len(cutouts)))]
        pos = (int(rng.integers(0, max(w - cut.shape[1], 1))),
               int(rng.integers(0, max(h - cut.shape[0], 1))))
        _paste(state, cut, pos)
    prov = Provenance("augmented", parent_id=demo.id,
                      plan_digest=stable_digest("random_distractors", str(n)))
    return state.to_demo(out_id or f"{demo.id}-rd", prov)


def baseline_spatial(demo: Demo, rng, max_retries: int = 30,
                     out_id: Optional[str] = None) -> Demo:
    """Random rigid transform of the whole scene, action pixels included.

    The one augmenter that changes the action. Nearest-neighbor resampling,
    clamp-to-edge for rgb/height, masks read as empty outside the frame.
    Retries until both transformed action pixels are in-bounds and inside
    their transformed masks; falls back to the identity.
    """
    if demo.masks is None or demo.action is None:
        raise ValueError("spatial baseline needs an annotated demo")
    h, w = demo.obs.config.height, demo.obs.config.width
    center = np.array([(w - 1) / 2.0, (h - 1) / 2.0])

    def transform(theta, shift):
        cos, sin = math.cos(theta), math.sin(theta)
        rot = np.array([[cos, -sin], [sin, cos]])
        # inverse map: output pixel -> input pixel
        uu, vv = np.meshgrid(np.arange(w), np.arange(h))
        q = np.stack([uu.ravel(), vv.ravel()], axis=1).astype(np.float64)
        p = (q - center - shift) @ rot + center  # rot.T applied via right-multiply
        src = np.round(p).astype(np.int64)
        inb = (src[:, 0] >= 0) & (src[:, 0] < w) & (src[:, 1] >= 0) & (src[:, 1] < h)
        clipped = np.stack([np.clip(src[:, 0], 0, w - 1), np.clip(src[:, 1], 0, h - 1)], axis=1)

        def warp_img(img, fill_from_edge=True):
            flat = img[clipped[:, 1], clipped[:, 0]]
            if not fill_from_edge:
                flat = np.where(inb.reshape(-1, *([1] * (img.ndim - 2))), flat, 0)
            return flat.reshape((h, w) + img.shape[2:])

        def warp_mask(mask):
            flat = mask[clipped[:, 1], clipped[:, 0]] & inb
            return flat.reshape(h, w)

        def fwd(px):
            p0 = np.array(px, dtype=np.float64)
            q0 = (p0 - center) @ rot.T + center + shift
            return int(round(q0[0])), int(round(q0[1]))

        return warp_img, warp_mask, fwd

    chosen = None
    for attempt in range(max_retries):
        theta = float(rng.uniform(-math.pi, math.pi))
        shift = np.array([rng.uniform(-w / 3, w / 3), rng.uniform(-h / 3, h / 3)])
        warp_img, warp_mask, fwd = transform(theta, shift)
        new_pick_px = fwd(demo.action.pick_px)
        new_place_px = fwd(demo.action.place_px)
        if not all(0 <= u < w and 0 <= v < h for u, v in (new_pick_px, new_place_px)):
            continue
        pick_mask = warp_mask(demo.masks.pick_object)
        place_mask = warp_mask(demo.masks.place_target)
        if pick_mask[new_pick_px[1], new_pick_px[0]] and place_mask[new_place_px[1], new_place_px[0]]:
            chosen = (warp_img, warp_mask, pick_mask, place_mask, new_pick_px, new_place_px,
                      theta, shift)
            break
    if chosen is None:
        warp_img, warp_mask, fwd = transform(0.0, np.zeros(2))
        chosen = (warp_img, warp_mask, demo.masks.pick_object, demo.masks.place_target,
                  demo.action.pick_px, demo.action.place_px, 0.0, np.zeros(2))

    warp_img, warp_mask, pick_mask, place_mask, pick_px, place_px, theta, shift = chosen
    obs = TopDownObservation(
        warp_img(demo.obs.rgb), warp_img(demo.obs.heightmap), demo.obs.config)
    masks = MaskSet(pick_mask, place_mask,
                    tuple(warp_mask(d) for d in demo.masks.distractors))
    prov = Provenance("augmented", parent_id=demo.id,
                      plan_digest=stable_digest("spatial", f"{theta:.9f}",
                                                f"{shift[0]:.9f}", f"{shift[1]:.9f}"))
    return Demo(
        id=out_id or f"{demo.id}-sp",
        obs=obs,
        masks=masks,
        action=PickPlaceAction(pick_px, place_px),
        task_text=demo.task_text,
        provenance=prov,
        condition=demo.condition,
    )


# --------------------------------------------------------------------------
# batch expansion

def expand_demo(demo: Demo, config: AugmentConfig, library: AssetLibrary,
                vocab: PromptVocab, backend) -> list[Demo]:
    """Produce exactly config.count augmented demos for one original.

    Plans that fail (invalid replacement, or nothing applied) are re-sampled
    with the next derived seed, so output (demo, index) pairs depend only on
    (master_seed, demo id, index).
    """
    out = []
    for aug_index in range(config.count):
        attempt = 0
        while True:
            seed = derive_seed("plan", config.master_seed, demo.id, aug_index, attempt)
            rng = np.random.default_rng(seed)
            plan = sample_plan(rng, config, library, vocab)
            out_id = f"{demo.id}-aug{aug_index:04d}"
            try:
                new_demo, applied = apply_plan(demo, plan, backend, library, config, out_id)
            except ReplacementInvalid:
                attempt += 1
                continue
            if applied == 0:
                attempt += 1
                continue
            violations = validate_demo(new_demo)
            if violations:
                raise AssertionError(
                    f"augmented demo {out_id} violates invariants: {violations}")
            out.append(new_demo)
            break
    return out


def augment_dataset(dataset: DemoDataset, config: AugmentConfig,
                    library: AssetLibrary, vocab: PromptVocab, backend,
                    progress=None) -> DemoDataset:
    """Originals plus config.count augmentations per original."""
    demos = []
    for demo in dataset.demos:
        demos.append(demo)
        demos.extend(expand_demo(demo, config, library, vocab, backend))
        if progress is not None:
            progress(demo.id)
    return DemoDataset.build(
        demos,
        seeds={"master_seed": config.master_seed},
        config_digest=config.digest(),
    )
