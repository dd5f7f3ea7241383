"""Depth-guided text-to-image generation behind a pluggable backend.

Two backends implement the same contract: a deterministic procedural
generator (hash-seeded value noise shaded by heightmap normals) and a
client for a remote HTTP generation service. The engine composites every
result against the request's region mask, so pixels outside the edit
region are byte-identical to the input no matter what a backend returns.
"""

from __future__ import annotations

import colorsys
import time
import threading
from dataclasses import dataclass

import numpy as np
import requests

from . import imgio
from .errors import DimMismatchError, RemoteProtocolError, RemoteTimeoutError
from .util import frozen_array, stable_digest

COLOR_RGB = {
    "red": (200, 45, 40),
    "green": (60, 170, 70),
    "yellow": (230, 200, 50),
    "blue": (50, 70, 200),
    "white": (235, 235, 228),
    "black": (36, 36, 42),
    "orange": (240, 140, 40),
    "purple": (140, 60, 180),
    "brown": (140, 95, 50),
    "pink": (240, 150, 190),
    # extended names, usable by held-out vocabularies
    "cyan": (60, 200, 210),
    "magenta": (210, 60, 190),
    "teal": (40, 140, 140),
    "olive": (130, 140, 60),
    "maroon": (130, 40, 55),
    "navy": (30, 45, 110),
    "gray": (128, 128, 128),
    "beige": (220, 205, 170),
}

# texture parameters per material word: noise cell size (x, y) in px and amplitude
MATERIAL_TEXTURE = {
    "wood": {"cell": (18.0, 3.0), "amp": 0.30, "veins": False},
    "marble": {"cell": (16.0, 12.0), "amp": 0.35, "veins": True},
    "glass": {"cell": (10.0, 10.0), "amp": 0.08, "veins": False},
    "metal": {"cell": (24.0, 2.5), "amp": 0.14, "veins": False},
    "plastic": {"cell": (7.0, 7.0), "amp": 0.10, "veins": False},
    "fabric": {"cell": (3.0, 3.0), "amp": 0.25, "veins": False},
}
_DEFAULT_TEXTURE = {"cell": (6.0, 6.0), "amp": 0.20, "veins": False}

_LIGHT_DIR = np.array([-1.0, -1.0, 2.0]) / np.sqrt(6.0)
_AMBIENT = 0.4
_HEIGHT_SLOPE_GAIN = 200.0  # meters -> per-pixel slope scale for shading


@dataclass(frozen=True, eq=False)
class GenRequest:
    rgb: np.ndarray
    height: np.ndarray
    region_mask: np.ndarray
    prompt: str
    seed: int

    def __post_init__(self):
        rgb = frozen_array(self.rgb, np.uint8)
        height = frozen_array(self.height, np.float32)
        mask = frozen_array(self.region_mask, bool)
        if rgb.ndim != 3 or rgb.shape[2] != 3:
            raise ValueError("rgb must be HxWx3")
        if height.shape != rgb.shape[:2] or mask.shape != rgb.shape[:2]:
            raise ValueError("height/mask dims disagree with rgb")
        if not mask.any():
            raise ValueError("region_mask is empty")
        if not self.prompt:
            raise ValueError("prompt is empty")
        if not (0 <= int(self.seed) < 2 ** 64):
            raise ValueError("seed must fit in 64 bits")
        object.__setattr__(self, "rgb", rgb)
        object.__setattr__(self, "height", height)
        object.__setattr__(self, "region_mask", mask)
        object.__setattr__(self, "seed", int(self.seed))


@dataclass(frozen=True, eq=False)
class GenResult:
    rgb: np.ndarray

    def __post_init__(self):
        rgb = frozen_array(self.rgb, np.uint8)
        if rgb.ndim != 3 or rgb.shape[2] != 3:
            raise ValueError("rgb must be HxWx3")
        object.__setattr__(self, "rgb", rgb)


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "procedural"  # "procedural" | "remote"
    url: str = ""
    timeout_s: float = 10.0
    max_retries: int = 3
    backoff_s: float = 0.5
    max_inflight: int = 4

    def __post_init__(self):
        if self.kind not in ("procedural", "remote"):
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.kind == "remote":
            if not self.url.startswith(("http://", "https://")):
                raise ValueError("remote backend needs an http(s) url")
            if self.timeout_s <= 0:
                raise ValueError("timeout_s must be positive")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "url": self.url, "timeout_s": self.timeout_s,
            "max_retries": self.max_retries, "backoff_s": self.backoff_s,
            "max_inflight": self.max_inflight,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BackendConfig":
        return cls(**{k: d[k] for k in d if k in cls.__dataclass_fields__})


def composite(original_rgb: np.ndarray, generated_rgb: np.ndarray,
              region_mask: np.ndarray) -> np.ndarray:
    """generated where the mask is set, original elsewhere."""
    original_rgb = np.asarray(original_rgb)
    generated_rgb = np.asarray(generated_rgb)
    region_mask = np.asarray(region_mask, dtype=bool)
    if original_rgb.shape != generated_rgb.shape or region_mask.shape != original_rgb.shape[:2]:
        raise DimMismatchError(
            f"composite dims disagree: {original_rgb.shape} vs {generated_rgb.shape} "
            f"mask {region_mask.shape}")
    return np.where(region_mask[..., None], generated_rgb, original_rgb)


# --------------------------------------------------------------------------
# procedural backend

_U64 = np.uint64
_C1 = _U64(0x9E3779B97F4A7C15)
_C2 = _U64(0xBF58476D1CE4E5B9)
_C3 = _U64(0x94D049BB133111EB)
_PX = _U64(0x8593AF2F4A6C8DF5)
_PY = _U64(0xD6E8FEB86659FD93)


def _mix64(x: np.ndarray) -> np.ndarray:
    x = (x + _C1).astype(_U64)
    x = ((x ^ (x >> _U64(30))) * _C2).astype(_U64)
    x = ((x ^ (x >> _U64(27))) * _C3).astype(_U64)
    return (x ^ (x >> _U64(31))).astype(_U64)


def _prompt_key(prompt: str, seed: int, salt: str = "") -> np.uint64:
    digest = stable_digest(prompt, str(int(seed)), salt)
    return _U64(int(digest[:16], 16))


def _lattice_values(key: np.uint64, xi: np.ndarray, yi: np.ndarray) -> np.ndarray:
    h = _mix64(xi.astype(_U64) * _PX ^ yi.astype(_U64) * _PY ^ key)
    return (h >> _U64(11)).astype(np.float64) * (1.0 / 2 ** 53)


def value_noise(shape: tuple[int, int], cell: tuple[float, float],
                key: np.uint64) -> np.ndarray:
    """Bilinear value noise on a hashed integer lattice, in [0, 1)."""
    h, w = shape
    xs = np.arange(w, dtype=np.float64) / cell[0]
    ys = np.arange(h, dtype=np.float64) / cell[1]
    xi = np.floor(xs).astype(np.int64)
    yi = np.floor(ys).astype(np.int64)
    tx = (xs - xi)[None, :]
    ty = (ys - yi)[None, :].T
    xi = xi[None, :] + np.zeros((h, 1), dtype=np.int64)
    yi = yi[:, None] + np.zeros((1, w), dtype=np.int64)
    v00 = _lattice_values(key, xi, yi)
    v10 = _lattice_values(key, xi + 1, yi)
    v01 = _lattice_values(key, xi, yi + 1)
    v11 = _lattice_values(key, xi + 1, yi + 1)
    top = v00 + tx * (v10 - v00)
    bot = v01 + tx * (v11 - v01)
    return top + ty * (bot - top)


def _first_word_match(prompt: str, vocabulary) -> str | None:
    for word in "".join(c if c.isalpha() else " " for c in prompt.lower()).split():
        if word in vocabulary:
            return word
    return None


def prompt_base_color(prompt: str, seed: int) -> np.ndarray:
    """Base color from the first color word in the prompt, else a hashed hue."""
    word = _first_word_match(prompt, COLOR_RGB)
    if word is not None:
        return np.array(COLOR_RGB[word], dtype=np.float64)
    hue = float(_prompt_key(prompt, seed, "hue")) / 2 ** 64
    r, g, b = colorsys.hsv_to_rgb(hue, 0.55, 0.78)
    return np.array([r * 255, g * 255, b * 255])


def _shading(height: np.ndarray) -> np.ndarray:
    gy, gx = np.gradient(height.astype(np.float64) * _HEIGHT_SLOPE_GAIN)
    nz = np.ones_like(gx)
    norm = np.sqrt(gx * gx + gy * gy + nz * nz)
    ndotl = (-gx * _LIGHT_DIR[0] - gy * _LIGHT_DIR[1] + nz * _LIGHT_DIR[2]) / norm
    return _AMBIENT + (1.0 - _AMBIENT) * np.clip(ndotl, 0.0, 1.0)


def procedural_generate(request: GenRequest) -> GenResult:
    """Deterministic stand-in for a generative image model.

    Base color from the prompt, two-octave value-noise texture selected by
    the material word, Lambertian shading from heightmap normals.
    """
    shape = request.height.shape
    base = prompt_base_color(request.prompt, request.seed)
    material = _first_word_match(request.prompt, MATERIAL_TEXTURE)
    params = MATERIAL_TEXTURE.get(material, _DEFAULT_TEXTURE)
    cx, cy = params["cell"]
    n1 = value_noise(shape, (cx, cy), _prompt_key(request.prompt, request.seed, "o1"))
    n2 = value_noise(shape, (cx / 2, cy / 2), _prompt_key(request.prompt, request.seed, "o2"))
    noise = (n1 + 0.5 * n2) / 1.5
    if params["veins"]:
        noise = np.abs(2.0 * noise - 1.0) ** 0.7
    amp = params["amp"]
    texture = 1.0 - amp / 2.0 + amp * noise
    shade = _shading(request.height)
    out = base[None, None, :] * texture[..., None] * shade[..., None]
    return GenResult(np.clip(np.round(out), 0, 255).astype(np.uint8))


class ProceduralBackend:
    """Pure-function backend; safe to share across threads."""

    def generate_raw(self, request: GenRequest) -> np.ndarray:
        return procedural_generate(request).rgb


# --------------------------------------------------------------------------
# remote backend

class RemoteBackend:
    """Client for the versioned HTTP generation protocol.

    POST {url}/generate with PNG-in-base64 payloads; retries with
    exponential backoff; a semaphore bounds in-flight requests. Requests are
    never mutated between retries, so retrying is idempotent.
    """

    def __init__(self, config: BackendConfig, session: requests.Session | None = None):
        if config.kind != "remote":
            raise ValueError("RemoteBackend needs a remote BackendConfig")
        self.config = config
        self._session = session or requests.Session()
        self._slots = threading.BoundedSemaphore(config.max_inflight)

    def _body(self, request: GenRequest) -> dict:
        h, w = request.height.shape
        return {
            "version": 1,
            "prompt": request.prompt,
            "seed": request.seed,
            "width": w,
            "height": h,
            "rgb_png_b64": imgio.to_b64(imgio.encode_rgb_png(request.rgb)),
            "height_mm_png16_b64": imgio.to_b64(imgio.encode_height_png(request.height)),
            "mask_png_b64": imgio.to_b64(imgio.encode_mask_png(request.region_mask)),
        }

    def generate_raw(self, request: GenRequest) -> np.ndarray:
        body = self._body(request)
        url = self.config.url.rstrip("/") + "/generate"
        last_error = None
        for attempt in range(self.config.max_retries + 1):
            if attempt > 0:
                time.sleep(self.config.backoff_s * 2 ** (attempt - 1))
            try:
                with self._slots:
                    resp = self._session.post(url, json=body, timeout=self.config.timeout_s)
            except requests.Timeout as e:
                last_error = RemoteTimeoutError(f"generation timed out: {e}")
                continue
            except requests.ConnectionError as e:
                last_error = RemoteProtocolError(f"connection failed: {e}")
                continue
            try:
                rgb = self._parse_response(resp, request)
            except RemoteProtocolError as e:
                last_error = e
                continue
            return rgb
        raise last_error

    @staticmethod
    def _parse_response(resp, request: GenRequest) -> np.ndarray:
        if resp.status_code != 200:
            raise RemoteProtocolError(f"bad status {resp.status_code}")
        try:
            payload = resp.json()
            rgb = imgio.decode_rgb_png(imgio.from_b64(payload["rgb_png_b64"]))
        except Exception as e:
            raise RemoteProtocolError(f"malformed response body: {e}") from e
        if rgb.shape != request.rgb.shape:
            raise RemoteProtocolError(
                f"size mismatch: got {rgb.shape}, expected {request.rgb.shape}")
        return rgb


def make_backend(config: BackendConfig):
    if config.kind == "procedural":
        return ProceduralBackend()
    return RemoteBackend(config)


def generate(backend, request: GenRequest) -> GenResult:
    """Run the backend and composite so only the region mask can change."""
    raw = backend.generate_raw(request)
    return GenResult(composite(request.rgb, raw, request.region_mask))
