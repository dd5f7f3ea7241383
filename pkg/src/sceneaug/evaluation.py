"""Nonparametric affordance prediction and the ablation harness.

The model stores zero-mean unit-norm crops around every training action
pixel and predicts by normalized cross-correlation of those templates
against a test observation (rgb scaled to [0, 1] concatenated with
height x100, so geometry and appearance both contribute). Scoring runs
batched in the frequency domain; local patch statistics come from
integral images.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace as dc_replace

import numpy as np

from .augment import AssetLibrary, AugmentConfig, PromptVocab, expand_demo
from .errors import EmptyDatasetError, UnknownTaskError
from .scene import Demo, DemoDataset, ScoreMap
from .util import derive_seed

HEIGHT_FEATURE_SCALE = 100.0
EXCLUDED_SCORE = -2.0  # below the NCC range, keeps ScoreMap finite


@dataclass(frozen=True)
class EvalConfig:
    success_radius_px: int = 6
    crop_size: int = 49

    def __post_init__(self):
        if self.success_radius_px < 0:
            raise ValueError("success_radius_px must be >= 0")
        if self.crop_size < 9 or self.crop_size % 2 == 0:
            raise ValueError("crop_size must be odd and >= 9")

    def to_dict(self) -> dict:
        return {"success_radius_px": self.success_radius_px, "crop_size": self.crop_size}

    @classmethod
    def from_dict(cls, d: dict) -> "EvalConfig":
        return cls(**{k: d[k] for k in d if k in cls.__dataclass_fields__})


@dataclass(frozen=True, eq=False)
class ModelEntry:
    task_text: str
    pick_crop: np.ndarray  # (c, c, 4) normalized rgb+height template
    place_crop: np.ndarray


@dataclass(frozen=True, eq=False)
class AffordanceModel:
    entries: tuple[ModelEntry, ...]
    crop_size: int

    def tasks(self) -> set[str]:
        return {e.task_text for e in self.entries}


def feature_image(obs) -> np.ndarray:
    rgb = obs.rgb.astype(np.float64) / 255.0
    height = obs.heightmap.astype(np.float64) * HEIGHT_FEATURE_SCALE
    return np.concatenate([rgb, height[..., None]], axis=2)


def _normalize(crop: np.ndarray) -> np.ndarray:
    t = crop - crop.mean()
    norm = np.sqrt((t * t).sum())
    if norm < 1e-12:
        return np.zeros_like(t)
    return t / norm


def _crop_at(feat_padded: np.ndarray, u: int, v: int, c: int) -> np.ndarray:
    # feat_padded carries c//2 of edge replication on every side
    return feat_padded[v:v + c, u:u + c]


def _pad(feat: np.ndarray, p: int) -> np.ndarray:
    return np.pad(feat, ((p, p), (p, p), (0, 0)), mode="edge")


def fit(dataset: DemoDataset, config: EvalConfig) -> AffordanceModel:
    """One template pair per training demo, cropped around its action pixels."""
    if not dataset.demos:
        raise EmptyDatasetError("cannot fit on an empty dataset")
    c = config.crop_size
    p = c // 2
    entries = []
    for demo in dataset.demos:
        if demo.action is None:
            raise ValueError(f"demo {demo.id} has no action label")
        feat = _pad(feature_image(demo.obs), p)
        pick = _normalize(_crop_at(feat, *demo.action.pick_px, c))
        place = _normalize(_crop_at(feat, *demo.action.place_px, c))
        entries.append(ModelEntry(demo.task_text, pick, place))
    return AffordanceModel(tuple(entries), c)


# --------------------------------------------------------------------------
# batched frequency-domain scoring

SCORE_DTYPE = np.float32


class _SceneCache:
    """Per-scene FFTs and local window statistics, reused across templates."""

    def __init__(self, feat: np.ndarray, c: int):
        h, w, nch = feat.shape
        p = c // 2
        padded = _pad(feat, p)
        hp, wp = padded.shape[:2]
        self.shape = (h, w)
        self.fft_shape = (hp + c - 1, wp + c - 1)
        # double precision keeps FFT noise ~1e-15, so identical windows
        # still collapse to exact ties after the final float32 rounding
        self.ffts = np.fft.rfft2(np.moveaxis(padded, 2, 0), s=self.fft_shape)
        n = c * c * nch
        total = padded.sum(axis=2)
        total_sq = (padded * padded).sum(axis=2)
        win_sum = _box_corr(total, c)[:h, :w]
        win_sumsq = _box_corr(total_sq, c)[:h, :w]
        mu = win_sum / n
        var = np.maximum(win_sumsq - n * mu * mu, 0.0)
        # flat windows cancel to summed-area noise; the validity threshold
        # is relative to the window energy
        self.denom = np.sqrt(var)
        self.valid = var > np.maximum(win_sumsq, 1e-12) * 1e-9


def _box_corr(img: np.ndarray, k: int) -> np.ndarray:
    """Valid-mode correlation with a flat k x k kernel via summed-area tables."""
    s = np.zeros((img.shape[0] + 1, img.shape[1] + 1))
    s[1:, 1:] = img.cumsum(axis=0).cumsum(axis=1)
    return (s[k:, k:] - s[:-k, k:] - s[k:, :-k] + s[:-k, :-k])


def _dedup(templates: np.ndarray) -> np.ndarray:
    """Drop exact-duplicate templates; max over a multiset equals max over its set."""
    seen = set()
    keep = []
    for i in range(len(templates)):
        key = templates[i].tobytes()
        if key not in seen:
            seen.add(key)
            keep.append(i)
    if len(keep) == len(templates):
        return templates
    return templates[keep]


class StreamingScorer:
    """Running max-over-template NCC maps across a batch of scenes.

    Feeding templates in chunks and snapshotting between feeds gives
    prefix-model scores for free: float max is exact, so the accumulated
    maps equal a one-shot pass over the same templates.
    """

    def __init__(self, observations=None, crop_size: int = 49, chunk: int = 48,
                 caches: list[_SceneCache] | None = None):
        self.c = crop_size
        self.chunk = chunk
        if caches is None:
            caches = [_SceneCache(feature_image(obs), crop_size) for obs in observations]
        self.caches = caches
        self.maps = [np.full(cache.shape, EXCLUDED_SCORE + 1.0, dtype=SCORE_DTYPE)
                     for cache in self.caches]

    def feed(self, templates: np.ndarray) -> None:
        templates = _dedup(templates)
        if len(templates) == 0:
            return
        by_shape: dict[tuple, list[int]] = {}
        for i, cache in enumerate(self.caches):
            by_shape.setdefault(cache.fft_shape, []).append(i)
        for start in range(0, len(templates), self.chunk):
            batch = templates[start:start + self.chunk]
            for fft_shape, idxs in by_shape.items():
                tf = np.conj(np.fft.rfft2(np.moveaxis(batch, 3, 1), s=fft_shape))
                for i in idxs:
                    cache = self.caches[i]
                    h, w = cache.shape
                    prod = np.einsum("kcxy,cxy->kxy", tf, cache.ffts)
                    corr = np.fft.irfft2(prod, s=fft_shape)[:, :h, :w]
                    best = corr.max(axis=0)
                    best = np.where(cache.valid, best / np.where(cache.valid, cache.denom, 1.0), 0.0)
                    np.maximum(self.maps[i], best.astype(SCORE_DTYPE), out=self.maps[i])

    def snapshot(self) -> list[np.ndarray]:
        return [m.copy() for m in self.maps]


def _matching_entries(model: AffordanceModel, task_text: str) -> list[ModelEntry]:
    entries = [e for e in model.entries if e.task_text == task_text]
    if not entries:
        raise UnknownTaskError(f"no model entry for task {task_text!r}")
    return entries


def score_scenes(model: AffordanceModel, observations, task_text: str):
    """(pick ScoreMap, place ScoreMap) per observation, batched."""
    entries = _matching_entries(model, task_text)
    pick = StreamingScorer(observations, model.crop_size)
    pick.feed(np.stack([e.pick_crop for e in entries]))
    place = StreamingScorer(crop_size=model.crop_size, caches=pick.caches)
    place.feed(np.stack([e.place_crop for e in entries]))
    return [(ScoreMap(pm), ScoreMap(qm))
            for pm, qm in zip(pick.snapshot(), place.snapshot())]


def _exclusion_disk(shape, center, radius) -> np.ndarray:
    h, w = shape
    uu, vv = np.meshgrid(np.arange(w), np.arange(h))
    return (uu - center[0]) ** 2 + (vv - center[1]) ** 2 <= radius * radius


def predict(model: AffordanceModel, obs, task_text: str):
    """Pick/place pixels plus their score maps for one observation.

    Place scores exclude a crop-half radius around the predicted pick so the
    two argmaxes cannot collapse onto the same spot.
    """
    (pick_scores, place_raw), = score_scenes(model, [obs], task_text)
    pick_px = pick_scores.argmax_px()
    place_vals = np.array(place_raw.values)
    disk = _exclusion_disk(place_vals.shape, pick_px, model.crop_size // 2)
    place_vals[disk] = EXCLUDED_SCORE
    place_scores = ScoreMap(place_vals)
    place_px = place_scores.argmax_px()
    return pick_px, place_px, pick_scores, place_scores


# --------------------------------------------------------------------------
# evaluation harness

@dataclass(frozen=True)
class SceneRecord:
    scene_id: str
    task: str
    condition: str
    pick_px: tuple[int, int]
    place_px: tuple[int, int]
    gt_pick_px: tuple[int, int]
    gt_place_px: tuple[int, int]
    pick_hit: bool
    place_hit: bool

    @property
    def full_success(self) -> bool:
        return self.pick_hit and self.place_hit


def _rates(records) -> dict:
    if not records:
        return {"pick_rate": 0.0, "place_rate": 0.0, "full_rate": 0.0, "count": 0}
    n = len(records)
    return {
        "pick_rate": sum(r.pick_hit for r in records) / n,
        "place_rate": sum(r.place_hit for r in records) / n,
        "full_rate": sum(r.full_success for r in records) / n,
        "count": n,
    }


@dataclass(frozen=True)
class EvalReport:
    records: tuple[SceneRecord, ...]

    def conditions(self) -> list[str]:
        seen = []
        for r in self.records:
            if r.condition not in seen:
                seen.append(r.condition)
        return seen

    def rates(self, condition: str | None = None) -> dict:
        if condition is None:
            return _rates(self.records)
        return _rates([r for r in self.records if r.condition == condition])

    def to_json_dict(self) -> dict:
        return {
            "overall": self.rates(),
            "per_condition": {c: self.rates(c) for c in self.conditions()},
            "scenes": [
                {
                    "scene_id": r.scene_id, "task": r.task, "condition": r.condition,
                    "pick_px": list(r.pick_px), "place_px": list(r.place_px),
                    "gt_pick_px": list(r.gt_pick_px), "gt_place_px": list(r.gt_place_px),
                    "pick_hit": r.pick_hit, "place_hit": r.place_hit,
                    "full_success": r.full_success,
                }
                for r in self.records
            ],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["scene_id", "task", "condition", "pick_u", "pick_v",
                         "place_u", "place_v", "gt_pick_u", "gt_pick_v",
                         "gt_place_u", "gt_place_v", "pick_hit", "place_hit",
                         "full_success"])
        for r in self.records:
            writer.writerow([r.scene_id, r.task, r.condition, *r.pick_px, *r.place_px,
                             *r.gt_pick_px, *r.gt_place_px,
                             int(r.pick_hit), int(r.place_hit), int(r.full_success)])
        return buf.getvalue()


def _hit(pred, gt, radius) -> bool:
    du, dv = pred[0] - gt[0], pred[1] - gt[1]
    return du * du + dv * dv <= radius * radius


def _record_from_maps(demo: Demo, pick_map: np.ndarray, place_map: np.ndarray,
                      crop_size: int, radius: int) -> SceneRecord:
    pick_px = ScoreMap(pick_map).argmax_px()
    place_vals = np.array(place_map)
    place_vals[_exclusion_disk(place_vals.shape, pick_px, crop_size // 2)] = EXCLUDED_SCORE
    place_px = ScoreMap(place_vals).argmax_px()
    return SceneRecord(
        scene_id=demo.id,
        task=demo.task_text,
        condition=demo.condition or "default",
        pick_px=pick_px,
        place_px=place_px,
        gt_pick_px=demo.action.pick_px,
        gt_place_px=demo.action.place_px,
        pick_hit=_hit(pick_px, demo.action.pick_px, radius),
        place_hit=_hit(place_px, demo.action.place_px, radius),
    )


def evaluate(model: AffordanceModel, testset: DemoDataset,
             eval_config: EvalConfig) -> EvalReport:
    """Hit iff the prediction lands within success_radius_px of ground truth."""
    records = []
    by_task: dict[str, list[Demo]] = {}
    for demo in testset.demos:
        by_task.setdefault(demo.task_text, []).append(demo)
    for task, demos in by_task.items():
        scored = score_scenes(model, [d.obs for d in demos], task)
        for demo, (pick_scores, place_raw) in zip(demos, scored):
            records.append(_record_from_maps(
                demo, pick_scores.values, place_raw.values,
                model.crop_size, eval_config.success_radius_px))
    order = {d.id: i for i, d in enumerate(testset.demos)}
    records.sort(key=lambda r: order[r.scene_id])
    return EvalReport(tuple(records))


# --------------------------------------------------------------------------
# ablation over augmentation count

@dataclass(frozen=True)
class AblationRow:
    count: int
    seed: int
    pick_rate: float
    place_rate: float
    full_rate: float


def ablation_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["count", "seed", "pick_rate", "place_rate", "full_rate"])
    for r in rows:
        writer.writerow([r.count, r.seed, f"{r.pick_rate:.4f}",
                         f"{r.place_rate:.4f}", f"{r.full_rate:.4f}"])
    return buf.getvalue()


def ablation_run(base_demos: DemoDataset, counts, config: AugmentConfig,
                 library: AssetLibrary, vocab: PromptVocab, backend,
                 testset: DemoDataset, seeds=(0, 1, 2),
                 eval_config: EvalConfig | None = None,
                 progress=None) -> list[AblationRow]:
    """Success-rate curve over augmentation counts, replicated across seeds.

    Augmented demos for count c are the first c of the max-count expansion
    (per-index derived seeds make prefixes exact), so each seed expands only
    once and the scorer streams templates, snapshotting score maps at each
    count boundary. Float max is exact, so the snapshots equal independent
    fit+evaluate runs on the prefix datasets. Returns rows ordered by
    (seed, count); full per-scene reports go to the progress callback.
    """
    counts = list(counts)
    if counts != sorted(counts):
        raise ValueError("counts must be sorted ascending")
    eval_config = eval_config or EvalConfig()
    tasks = {d.task_text for d in testset.demos}
    if len(tasks) != 1:
        raise ValueError("the ablation benchmark expects a single-task testset")
    task = tasks.pop()
    if any(d.task_text != task for d in base_demos.demos):
        raise UnknownTaskError("train/test task text mismatch")
    c = eval_config.crop_size
    rows = []
    for seed in seeds:
        seed_cfg = dc_replace(config, count=max(counts),
                              master_seed=derive_seed("ablation", config.master_seed, seed))
        per_demo = {d.id: expand_demo(d, seed_cfg, library, vocab, backend)
                    for d in base_demos.demos} if max(counts) > 0 else {}

        def crops_of(demos):
            model = fit(DemoDataset.build(demos), eval_config)
            return (np.stack([e.pick_crop for e in model.entries]),
                    np.stack([e.place_crop for e in model.entries]))

        pick_scorer = StreamingScorer([d.obs for d in testset.demos], c)
        place_scorer = StreamingScorer(crop_size=c, caches=pick_scorer.caches)
        fed = None  # number of augmentations per original fed so far
        for count in counts:
            if count == 0:
                pick_t, place_t = crops_of(list(base_demos.demos))
                pick_scorer.feed(pick_t)
                place_scorer.feed(place_t)
                fed = 0
            else:
                if fed is None:
                    pick_t, place_t = crops_of(list(base_demos.demos))
                    pick_scorer.feed(pick_t)
                    place_scorer.feed(place_t)
                    fed = 0
                new = []
                for d in base_demos.demos:
                    new.extend(per_demo[d.id][fed:count])
                if new:
                    pick_t, place_t = crops_of(new)
                    pick_scorer.feed(pick_t)
                    place_scorer.feed(place_t)
                fed = count
            records = [
                _record_from_maps(demo, pm, qm, c, eval_config.success_radius_px)
                for demo, pm, qm in zip(testset.demos, pick_scorer.snapshot(),
                                        place_scorer.snapshot())
            ]
            report = EvalReport(tuple(records))
            rates = report.rates()
            row = AblationRow(count, seed, rates["pick_rate"],
                              rates["place_rate"], rates["full_rate"])
            rows.append(row)
            if progress is not None:
                progress(row, report)
    return rows


def mean_rate_by_count(rows) -> dict[int, float]:
    by_count: dict[int, list[float]] = {}
    for r in rows:
        by_count.setdefault(r.count, []).append(r.full_rate)
    return {c: sum(v) / len(v) for c, v in sorted(by_count.items())}
