"""Command-line entry points for the full pipeline.

Each subcommand is a thin composition of module operations. Success prints
a one-line JSON summary (including config and dataset digests where
relevant); failures print machine-readable JSON to stderr and exit
nonzero.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import benchmark
from .augment import (
    AssetLibrary,
    AugmentConfig,
    PromptVocab,
    default_vocab,
    expand_demo,
)
from .errors import SceneAugError
from .evaluation import (
    EvalConfig,
    ablation_csv,
    ablation_run,
    evaluate,
    fit,
)
from .genbackend import BackendConfig, make_backend
from .geometry import CameraIntrinsics, CameraPose, RgbdFrame, TopDownConfig, build_topdown
from .imgio import decode_rgb_png
from .scene import (
    Demo,
    DemoDataset,
    Provenance,
    dataset_digest,
    load_dataset,
    save_dataset,
    synth_demo,
    with_id,
)
from .util import canonical_json, stable_digest


@dataclass
class ServiceConfig:
    dataset_dir: str = ""
    assets_dir: str = ""
    backend: BackendConfig = field(default_factory=BackendConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    listen_port: int = 8008

    def __post_init__(self):
        if not (1 <= self.listen_port <= 65535):
            raise ValueError("listen_port must be in [1, 65535]")

    @classmethod
    def from_file(cls, path) -> "ServiceConfig":
        d = json.loads(Path(path).read_text())
        return cls(
            dataset_dir=d.get("dataset_dir", ""),
            assets_dir=d.get("assets_dir", ""),
            backend=BackendConfig.from_dict(d.get("backend", {})),
            augment=AugmentConfig.from_dict(d.get("augment", {})),
            eval=EvalConfig.from_dict(d.get("eval", {})),
            listen_port=d.get("listen_port", 8008),
        )

    def digest(self) -> str:
        return stable_digest(canonical_json({
            "backend": self.backend.to_dict(),
            "augment": self.augment.to_dict(),
            "eval": self.eval.to_dict(),
        }))


def _emit(obj) -> None:
    print(json.dumps(obj))


def _load_service_config(args) -> ServiceConfig:
    cfg = ServiceConfig.from_file(args.config) if getattr(args, "config", None) else ServiceConfig()
    if getattr(args, "count", None) is not None:
        cfg.augment = replace(cfg.augment, count=args.count)
    if getattr(args, "seed", None) is not None:
        cfg.augment = replace(cfg.augment, master_seed=args.seed)
    if getattr(args, "backend", None):
        if args.backend == "remote":
            cfg.backend = BackendConfig(kind="remote", url=args.url or cfg.backend.url)
        else:
            cfg.backend = BackendConfig(kind="procedural")
    return cfg


# --------------------------------------------------------------------------
# subcommands

def cmd_ingest(args) -> int:
    config = TopDownConfig() if args.workspace is None else \
        TopDownConfig.from_dict(json.loads(Path(args.workspace).read_text()))
    demos = []
    for sub in sorted(Path(args.input).iterdir()):
        if not sub.is_dir():
            continue
        cam = json.loads((sub / "camera.json").read_text())
        intr = CameraIntrinsics(cam["fx"], cam["fy"], cam["cx"], cam["cy"],
                                cam["width"], cam["height"])
        pose = CameraPose(np.array(cam["rotation"]), np.array(cam["translation"]))
        rgb = decode_rgb_png((sub / "rgb.png").read_bytes())
        from .imgio import decode_height_png
        depth = decode_height_png((sub / "depth16mm.png").read_bytes())
        frame = RgbdFrame(rgb, depth, intr, pose)
        obs = build_topdown(frame, config)
        demos.append(Demo(
            id=sub.name, obs=obs, masks=None, action=None,
            task_text=cam.get("task_text", "untitled task"),
            provenance=Provenance("original"),
        ))
    dataset = DemoDataset.build(demos)
    save_dataset(dataset, args.out)
    _emit({"command": "ingest", "count": len(demos), "out": str(args.out)})
    return 0


def cmd_synth(args) -> int:
    if args.benchmark:
        out = Path(args.out)
        train, test = benchmark.make_benchmark(
            out / "assets", n_train=args.demos, n_test=args.test_scenes, seed=args.seed)
        save_dataset(train, out / "train")
        save_dataset(test, out / "test")
        _emit({"command": "synth", "benchmark": True,
               "train_digest": dataset_digest(train),
               "test_digest": dataset_digest(test), "out": str(out)})
        return 0
    demos = [with_id(synth_demo(args.seed + i), f"synth-{i:04d}")
             for i in range(args.demos)]
    dataset = DemoDataset.build(demos, seeds={"seed": args.seed})
    save_dataset(dataset, args.out)
    _emit({"command": "synth", "count": len(demos),
           "dataset_digest": dataset_digest(dataset), "out": str(args.out)})
    return 0


def _library_and_vocab(assets_dir) -> tuple[AssetLibrary, PromptVocab]:
    library = AssetLibrary.load(assets_dir)
    return library, default_vocab(library.categories)


def cmd_augment(args) -> int:
    cfg = _load_service_config(args)
    dataset = load_dataset(args.input)
    library, vocab = _library_and_vocab(args.assets)
    backend = make_backend(cfg.backend)
    out = Path(args.out)
    checkpoint_path = out.parent / f".{out.name}.checkpoint.json"

    done: list[Demo] = []
    start_index = 0
    if args.resume and checkpoint_path.exists():
        cursor = json.loads(checkpoint_path.read_text())
        if cursor.get("config_digest") != cfg.augment.digest():
            raise SceneAugError("checkpoint was written with a different config")
        partial = load_dataset(out)
        done = list(partial.demos)
        start_index = cursor["next_demo_index"]

    demos = done
    for i, demo in enumerate(dataset.demos):
        if i < start_index:
            continue
        try:
            expanded = expand_demo(demo, cfg.augment, library, vocab, backend)
        except SceneAugError:
            partial = DemoDataset.build(demos, seeds={"master_seed": cfg.augment.master_seed},
                                        config_digest=cfg.augment.digest())
            save_dataset(partial, out)
            checkpoint_path.write_text(json.dumps(
                {"next_demo_index": i, "config_digest": cfg.augment.digest()}))
            print(json.dumps({"error": "backend failure",
                              "checkpoint": str(checkpoint_path),
                              "resume": True}), file=sys.stderr)
            return 3
        demos = demos + [demo] + expanded
    result = DemoDataset.build(demos, seeds={"master_seed": cfg.augment.master_seed},
                               config_digest=cfg.augment.digest())
    save_dataset(result, out)
    if checkpoint_path.exists():
        checkpoint_path.unlink()
    _emit({"command": "augment", "count": len(result.demos),
           "dataset_digest": dataset_digest(result),
           "config_digest": cfg.augment.digest(),
           "service_config_digest": cfg.digest()})
    return 0


def cmd_eval(args) -> int:
    cfg = _load_service_config(args)
    eval_cfg = cfg.eval
    if args.radius is not None:
        eval_cfg = replace(eval_cfg, success_radius_px=args.radius)
    if args.crop_size is not None:
        eval_cfg = replace(eval_cfg, crop_size=args.crop_size)
    trainset = load_dataset(args.train)
    testset = load_dataset(args.test)
    model = fit(trainset, eval_cfg)
    report = evaluate(model, testset, eval_cfg)
    if args.out_json:
        Path(args.out_json).write_text(json.dumps(report.to_json_dict(), indent=1))
    if args.out_csv:
        Path(args.out_csv).write_text(report.to_csv())
    _emit({"command": "eval", "overall": report.rates(),
           "per_condition": {c: report.rates(c) for c in report.conditions()},
           "eval_config": eval_cfg.to_dict()})
    return 0


def cmd_ablate(args) -> int:
    cfg = _load_service_config(args)
    counts = [int(c) for c in args.counts.split(",")]
    seeds = list(range(args.seeds))
    workdir = Path(args.workdir)
    if args.train and args.test and args.assets:
        trainset = load_dataset(args.train)
        testset = load_dataset(args.test)
        library, vocab = _library_and_vocab(args.assets)
        eval_cfg = cfg.eval
    else:
        workdir.mkdir(parents=True, exist_ok=True)
        trainset, testset = benchmark.make_benchmark(
            workdir / "assets", n_train=args.demos, n_test=args.test_scenes,
            seed=cfg.augment.master_seed)
        library = benchmark.train_library(workdir / "assets")
        vocab = benchmark.train_vocab()
        eval_cfg = benchmark.BENCHMARK_EVAL
    backend = make_backend(cfg.backend)
    rows = ablation_run(trainset, counts, cfg.augment, library, vocab, backend,
                        testset, seeds=seeds, eval_config=eval_cfg)
    csv_text = ablation_csv(rows)
    out_csv = Path(args.out) if args.out else workdir / "ablation.csv"
    out_csv.parent.mkdir(parents=True, exist_ok=True)
    out_csv.write_text(csv_text)
    by_count = {}
    for r in rows:
        by_count.setdefault(r.count, []).append(r.full_rate)
    _emit({"command": "ablate", "rows": len(rows), "csv": str(out_csv),
           "mean_full_rate_by_count": {str(c): sum(v) / len(v) for c, v in sorted(by_count.items())},
           "config_digest": cfg.digest()})
    return 0


def cmd_serve_annotate(args) -> int:
    from .server import AnnotationServer
    cfg = _load_service_config(args)
    port = args.port if args.port is not None else cfg.listen_port
    server = AnnotationServer(args.dataset, port=port, static_dir=args.frontend,
                              verbose=True)
    print(json.dumps({"command": "serve-annotate", "port": server.port,
                      "dataset": str(args.dataset)}), flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sceneaug",
        description="Scene augmentation engine for tabletop pick-and-place demos")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="RGBD frame triples -> top-down demos")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--workspace", help="JSON file with top-down workspace config")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", help="generate synthetic demos or a full benchmark")
    p.add_argument("--out", required=True)
    p.add_argument("--demos", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--benchmark", action="store_true",
                   help="emit assets/train/test for the ablation benchmark")
    p.add_argument("--test-scenes", type=int, default=100)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("augment", help="expand a dataset with augmentations")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--assets", required=True)
    p.add_argument("--config")
    p.add_argument("--count", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--backend", choices=["procedural", "remote"])
    p.add_argument("--url")
    p.add_argument("--resume", action="store_true")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("eval", help="fit the affordance model and evaluate")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--config")
    p.add_argument("--radius", type=int)
    p.add_argument("--crop-size", type=int)
    p.add_argument("--out-json")
    p.add_argument("--out-csv")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="success-rate curve over augmentation counts")
    p.add_argument("--workdir", default="ablation-workdir")
    p.add_argument("--counts", default="0,10,50,100")
    p.add_argument("--seeds", type=int, default=3)
    p.add_argument("--demos", type=int, default=10)
    p.add_argument("--test-scenes", type=int, default=100)
    p.add_argument("--train", help="existing train dataset dir")
    p.add_argument("--test", help="existing test dataset dir")
    p.add_argument("--assets", help="existing asset dir")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output CSV path")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("serve-annotate", help="HTTP server for the annotation UI")
    p.add_argument("--dataset", required=True)
    p.add_argument("--port", type=int)
    p.add_argument("--frontend", help="directory of built UI files to serve")
    p.add_argument("--config")
    p.set_defaults(func=cmd_serve_annotate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SceneAugError as e:
        print(json.dumps({"error": type(e).__name__, "message": str(e)}),
              file=sys.stderr)
        return 2
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as e:
        print(json.dumps({"error": type(e).__name__, "message": str(e)}),
              file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
