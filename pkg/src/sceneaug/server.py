"""HTTP server backing the browser annotation tool.

JSON/PNG endpoints over a dataset directory; every write re-validates the
demo and lands atomically (whole-demo directory swap), so a crash can
never leave a demo that fails to load. One writer lock per demo id.
"""

from __future__ import annotations

import json
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np

from . import imgio
from .errors import FormatError
from .polygon import rasterize_polygon
from .scene import (
    Demo,
    MaskSet,
    PickPlaceAction,
    read_demo_dir,
    validate_demo,
    write_demo_dir,
)

API_VERSION_HEADER = ("X-GenAug-API", "1")

_ROUTES = [
    ("GET", re.compile(r"^/api/demos$"), "list_demos"),
    ("GET", re.compile(r"^/api/demos/([^/]+)$"), "get_demo"),
    ("GET", re.compile(r"^/api/demos/([^/]+)/topdown\.png$"), "get_topdown"),
    ("GET", re.compile(r"^/api/demos/([^/]+)/masks\.png$"), "get_masks_png"),
    ("POST", re.compile(r"^/api/demos/([^/]+)/action$"), "post_action"),
    ("POST", re.compile(r"^/api/demos/([^/]+)/mask$"), "post_mask"),
]


class AnnotationStore:
    """Dataset-directory access with per-demo write serialization."""

    def __init__(self, dataset_dir):
        self.root = Path(dataset_dir)
        manifest = self.root / "dataset.json"
        if not manifest.exists():
            raise FormatError(f"{self.root} has no dataset.json")
        self.ids = json.loads(manifest.read_text())["ids"]
        self._locks: dict[str, threading.Lock] = {i: threading.Lock() for i in self.ids}

    def demo(self, demo_id: str) -> Demo:
        if demo_id not in self._locks:
            raise KeyError(demo_id)
        return read_demo_dir(self.root / demo_id)

    def update(self, demo_id: str, mutate) -> Demo:
        """Read-modify-write under the demo's lock; mutate returns a new Demo."""
        if demo_id not in self._locks:
            raise KeyError(demo_id)
        with self._locks[demo_id]:
            demo = read_demo_dir(self.root / demo_id)
            new_demo = mutate(demo)
            write_demo_dir(new_demo, self.root / demo_id)
            return new_demo


class ValidationConflict(Exception):
    def __init__(self, violations):
        super().__init__("; ".join(violations))
        self.violations = list(violations)


class BadRequest(Exception):
    pass


def _demo_summary(demo: Demo) -> dict:
    return {
        "id": demo.id,
        "task_text": demo.task_text,
        "has_masks": demo.masks is not None,
        "has_action": demo.action is not None,
        "annotated": not validate_demo(demo),
    }


def _demo_state(demo: Demo) -> dict:
    masks = None
    if demo.masks is not None:
        masks = {
            "pick_pixels": int(demo.masks.pick_object.sum()),
            "place_pixels": int(demo.masks.place_target.sum()),
            "distractor_pixels": [int(d.sum()) for d in demo.masks.distractors],
        }
    return {
        "id": demo.id,
        "task_text": demo.task_text,
        "width": demo.obs.config.width,
        "height": demo.obs.config.height,
        "action": None if demo.action is None else {
            "pick": list(demo.action.pick_px),
            "place": list(demo.action.place_px),
        },
        "masks": masks,
        "violations": validate_demo(demo),
    }


def _parse_px(obj, name, width, height) -> tuple[int, int]:
    if (not isinstance(obj, (list, tuple)) or len(obj) != 2
            or not all(isinstance(c, int) and not isinstance(c, bool) for c in obj)):
        raise BadRequest(f"{name} must be an integer [u, v] pair")
    u, v = obj
    if not (0 <= u < width and 0 <= v < height):
        raise BadRequest(f"{name} out of bounds for {width}x{height}")
    return u, v


def apply_action(demo: Demo, body: dict) -> Demo:
    w, h = demo.obs.config.width, demo.obs.config.height
    pick = _parse_px(body.get("pick"), "pick", w, h)
    place = _parse_px(body.get("place"), "place", w, h)
    candidate = Demo(
        id=demo.id, obs=demo.obs, masks=demo.masks,
        action=PickPlaceAction(pick, place),
        task_text=demo.task_text, provenance=demo.provenance,
        condition=demo.condition,
    )
    violations = validate_demo(candidate)
    if violations:
        raise ValidationConflict(violations)
    return candidate


def apply_mask(demo: Demo, body: dict) -> Demo:
    role = body.get("role")
    if role not in ("pick", "place", "distractor"):
        raise BadRequest("role must be pick, place or distractor")
    polygon = body.get("polygon")
    if not isinstance(polygon, list) or len(polygon) < 3:
        raise BadRequest("polygon needs at least 3 vertices")
    w, h = demo.obs.config.width, demo.obs.config.height
    verts = [_parse_px(p, "polygon vertex", w, h) for p in polygon]
    mask = rasterize_polygon(verts, (h, w))
    if not mask.any():
        raise BadRequest("polygon covers no pixels")
    if demo.masks is None:
        empty = np.zeros((h, w), dtype=bool)
        masks = MaskSet(empty, empty.copy())
    else:
        masks = demo.masks
    if role == "pick":
        masks = MaskSet(mask, masks.place_target, masks.distractors)
    elif role == "place":
        masks = MaskSet(masks.pick_object, mask, masks.distractors)
    else:
        masks = MaskSet(masks.pick_object, masks.place_target,
                        masks.distractors + (mask,))
    candidate = Demo(
        id=demo.id, obs=demo.obs, masks=masks, action=demo.action,
        task_text=demo.task_text, provenance=demo.provenance,
        condition=demo.condition,
    )
    violations = [v for v in validate_demo(candidate) if v != "action missing"]
    # an unfinished annotation may still lack the other role's mask
    tolerable = {"pick_object mask empty", "place_target mask empty"}
    conflicts = [v for v in violations if v not in tolerable]
    if conflicts:
        raise ValidationConflict(conflicts)
    return candidate


class _Handler(BaseHTTPRequestHandler):
    server_version = "sceneaug-annotate"
    store: AnnotationStore
    static_dir: Path | None = None

    def log_message(self, fmt, *args):  # quiet by default
        if getattr(self.server, "verbose", False):
            super().log_message(fmt, *args)

    # -- helpers ------------------------------------------------------
    def _send(self, code: int, body: bytes, content_type: str):
        self.send_response(code)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.send_header(*API_VERSION_HEADER)
        self.end_headers()
        self.wfile.write(body)

    def _json(self, code: int, obj):
        self._send(code, json.dumps(obj).encode("utf-8"), "application/json")

    def _error(self, code: int, message: str, **extra):
        self._json(code, {"error": message, **extra})

    def _read_body(self) -> dict:
        length = int(self.headers.get("Content-Length", 0))
        raw = self.rfile.read(length)
        try:
            body = json.loads(raw)
        except json.JSONDecodeError as e:
            raise BadRequest(f"body is not valid JSON: {e}") from e
        if not isinstance(body, dict):
            raise BadRequest("body must be a JSON object")
        return body

    def _route(self, method: str):
        for m, pattern, name in _ROUTES:
            if m != method:
                continue
            match = pattern.match(self.path)
            if match:
                return name, match.groups()
        return None, ()

    # -- handlers -----------------------------------------------------
    def do_GET(self):
        name, args = self._route("GET")
        if name is None:
            return self._static()
        try:
            getattr(self, name)(*args)
        except KeyError:
            self._error(404, "unknown demo id")
        except BadRequest as e:
            self._error(400, str(e))

    def do_POST(self):
        name, args = self._route("POST")
        if name is None:
            return self._error(404, "no such endpoint")
        try:
            getattr(self, name)(*args)
        except KeyError:
            self._error(404, "unknown demo id")
        except BadRequest as e:
            self._error(400, str(e))
        except ValidationConflict as e:
            self._error(409, "annotation violates invariants", violations=e.violations)

    def list_demos(self):
        out = [_demo_summary(self.store.demo(i)) for i in self.store.ids]
        self._json(200, out)

    def get_demo(self, demo_id):
        self._json(200, _demo_state(self.store.demo(demo_id)))

    def get_topdown(self, demo_id):
        demo = self.store.demo(demo_id)
        self._send(200, imgio.encode_rgb_png(demo.obs.rgb), "image/png")

    def get_masks_png(self, demo_id):
        demo = self.store.demo(demo_id)
        if demo.masks is None:
            return self._error(404, "demo has no masks yet")
        from .scene import _masks_to_labels
        self._send(200, imgio.encode_label_png(_masks_to_labels(demo.masks)), "image/png")

    def post_action(self, demo_id):
        body = self._read_body()
        demo = self.store.update(demo_id, lambda d: apply_action(d, body))
        self._json(200, _demo_state(demo))

    def post_mask(self, demo_id):
        body = self._read_body()
        demo = self.store.update(demo_id, lambda d: apply_mask(d, body))
        self._json(200, _demo_state(demo))

    # -- static frontend ----------------------------------------------
    def _static(self):
        if self.static_dir is None:
            return self._error(404, "no such endpoint")
        rel = self.path.split("?")[0].lstrip("/") or "index.html"
        target = (self.static_dir / rel).resolve()
        if not str(target).startswith(str(self.static_dir.resolve())) or not target.is_file():
            return self._error(404, "not found")
        ctype = {
            ".html": "text/html", ".js": "application/javascript",
            ".css": "text/css", ".png": "image/png", ".map": "application/json",
        }.get(target.suffix, "application/octet-stream")
        self._send(200, target.read_bytes(), ctype)


class AnnotationServer:
    """Threaded HTTP server over a dataset directory."""

    def __init__(self, dataset_dir, port: int = 0, static_dir=None, verbose=False):
        store = AnnotationStore(dataset_dir)
        handler = type("BoundHandler", (_Handler,), {
            "store": store,
            "static_dir": Path(static_dir) if static_dir else None,
        })
        self.httpd = ThreadingHTTPServer(("127.0.0.1", port), handler)
        self.httpd.verbose = verbose
        self._thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self.httpd.server_address[1]

    def start(self):
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self):
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def serve_forever(self):
        self.httpd.serve_forever()
