"""Grayscale fingerprint images: container type, PGM/PNG codecs, resampling."""

from __future__ import annotations

import io
import re
from dataclasses import dataclass, field, replace
from datetime import datetime
from enum import Enum
from typing import Optional

import numpy as np
from PIL import Image, UnidentifiedImageError

from ..errors import CorruptData, MissingResolution, UnsupportedFormat, UpsampleRequested

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"
PGM_MAGIC = b"P5"


class Finger(str, Enum):
    LEFT_THUMB = "left_thumb"
    RIGHT_THUMB = "right_thumb"


@dataclass(frozen=True)
class CaptureMeta:
    """Provenance of one impression: who, which thumb, when."""

    subject_id: str
    finger: Finger
    session: int = 1
    impression_index: int = 1
    age_at_capture_days: int = 0
    captured_at: Optional[datetime] = None

    def __post_init__(self):
        if self.session < 1:
            raise ValueError("session must be a positive integer")
        if self.impression_index < 1:
            raise ValueError("impression_index must be a positive integer")
        if self.age_at_capture_days < 0:
            raise ValueError("age_at_capture_days must be non-negative")


@dataclass
class FingerprintImage:
    """8-bit grayscale raster with an explicit spatial resolution."""

    pixels: np.ndarray  # (height, width) uint8
    ppi: int
    meta: Optional[CaptureMeta] = None

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2:
            raise ValueError("pixels must be a 2-D array")
        if px.dtype != np.uint8:
            raise ValueError("pixels must be uint8")
        if int(self.ppi) <= 0:
            raise ValueError("ppi must be positive")
        self.pixels = px
        self.ppi = int(self.ppi)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def astype_float(self) -> np.ndarray:
        return self.pixels.astype(np.float64)


# ---------------------------------------------------------------------------
# codecs

_PGM_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def _pgm_read_token(buf: bytes, pos: int) -> tuple[bytes, int]:
    m = _PGM_TOKEN.match(buf, pos)
    if not m:
        raise CorruptData("truncated PGM header")
    return m.group(1), m.end()


def _decode_pgm(data: bytes) -> np.ndarray:
    pos = 2  # past magic
    fields = []
    for _ in range(3):
        tok, pos = _pgm_read_token(data, pos)
        fields.append(tok)
    try:
        width, height, maxval = (int(f) for f in fields)
    except ValueError as exc:
        raise CorruptData(f"bad PGM header fields {fields!r}") from exc
    if maxval != 255:
        raise UnsupportedFormat(f"PGM maxval must be 255, got {maxval}")
    if width <= 0 or height <= 0:
        raise CorruptData("non-positive PGM dimensions")
    pos += 1  # single whitespace byte after maxval
    raster = data[pos:pos + width * height]
    if len(raster) < width * height:
        raise CorruptData("PGM raster shorter than promised dimensions")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width).copy()


def _encode_pgm(pixels: np.ndarray) -> bytes:
    h, w = pixels.shape
    return b"P5\n%d %d\n255\n" % (w, h) + pixels.tobytes()


def _decode_png(data: bytes) -> tuple[np.ndarray, Optional[int]]:
    try:
        im = Image.open(io.BytesIO(data))
        im.load()
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise CorruptData(f"cannot decode PNG: {exc}") from exc
    if im.mode != "L":
        raise UnsupportedFormat(f"PNG must be 8-bit grayscale, got mode {im.mode!r}")
    ppi = None
    dpi = im.info.get("dpi")
    if dpi:
        ppi = int(round(float(dpi[0])))
        if ppi <= 0:
            ppi = None
    return np.asarray(im, dtype=np.uint8).copy(), ppi


def _encode_png(pixels: np.ndarray, ppi: int) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(pixels, mode="L").save(buf, format="PNG", dpi=(ppi, ppi))
    return buf.getvalue()


def load_image(data: bytes, declared_ppi: Optional[int] = None,
               meta: Optional[CaptureMeta] = None) -> FingerprintImage:
    """Decode a PGM (P5) or PNG grayscale raster.

    The resolution comes from embedded metadata (PNG pHYs) unless
    ``declared_ppi`` overrides it; PGM carries none, so the caller must
    declare one.
    """
    if data.startswith(PNG_MAGIC):
        pixels, embedded_ppi = _decode_png(data)
    elif data.startswith(PGM_MAGIC):
        pixels, embedded_ppi = _decode_pgm(data), None
    else:
        raise UnsupportedFormat("expected PGM (P5) or PNG grayscale data")
    ppi = declared_ppi if declared_ppi is not None else embedded_ppi
    if ppi is None:
        raise MissingResolution("no embedded ppi and no declared_ppi given")
    if ppi <= 0:
        raise MissingResolution(f"ppi must be positive, got {ppi}")
    return FingerprintImage(pixels=pixels, ppi=int(ppi), meta=meta)


def write_image(img: FingerprintImage, fmt: str = "pgm") -> bytes:
    fmt = fmt.lower().lstrip(".")
    if fmt == "pgm":
        return _encode_pgm(img.pixels)
    if fmt == "png":
        return _encode_png(img.pixels, img.ppi)
    raise UnsupportedFormat(f"cannot encode format {fmt!r}")


def load_image_file(path, declared_ppi: Optional[int] = None,
                    meta: Optional[CaptureMeta] = None) -> FingerprintImage:
    with open(path, "rb") as fh:
        return load_image(fh.read(), declared_ppi=declared_ppi, meta=meta)


def write_image_file(img: FingerprintImage, path) -> None:
    path = str(path)
    fmt = "png" if path.lower().endswith(".png") else "pgm"
    with open(path, "wb") as fh:
        fh.write(write_image(img, fmt))


# ---------------------------------------------------------------------------
# resampling

def _interp_axis0(arr: np.ndarray, coords: np.ndarray) -> np.ndarray:
    """Linear interpolation of arr along axis 0 at fractional row coords."""
    idx = np.clip(np.floor(coords).astype(np.intp), 0, arr.shape[0] - 2)
    frac = coords - idx
    return arr[idx] * (1.0 - frac[:, None]) + arr[idx + 1] * frac[:, None]


def _box_means(pixels: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    # The cumulative integral of a piecewise-constant image is piecewise
    # bilinear, so linear interpolation of the integral image yields exact
    # box averages for arbitrary fractional bin edges.
    h, w = pixels.shape
    integral = np.zeros((h + 1, w + 1), dtype=np.float64)
    np.cumsum(np.cumsum(pixels, axis=0, dtype=np.float64), axis=1,
              out=integral[1:, 1:])
    ys = np.linspace(0.0, h, out_h + 1)
    xs = np.linspace(0.0, w, out_w + 1)
    rows = _interp_axis0(integral, ys)
    grid = _interp_axis0(rows.T, xs).T
    sums = grid[1:, 1:] - grid[:-1, 1:] - grid[1:, :-1] + grid[:-1, :-1]
    area = (h / out_h) * (w / out_w)
    return sums / area


def downsample(img: FingerprintImage, target_ppi: int) -> FingerprintImage:
    """Area-averaged (anti-aliased) decimation to a coarser resolution."""
    if target_ppi > img.ppi:
        raise UpsampleRequested(
            f"target {target_ppi} ppi exceeds source {img.ppi} ppi")
    if target_ppi <= 0:
        raise ValueError("target_ppi must be positive")
    if target_ppi == img.ppi:
        return replace(img, pixels=img.pixels.copy())
    scale = target_ppi / img.ppi
    out_h = max(1, int(np.floor(img.height * scale + 0.5)))
    out_w = max(1, int(np.floor(img.width * scale + 0.5)))
    means = _box_means(img.pixels, out_h, out_w)
    pixels = np.clip(np.rint(means), 0, 255).astype(np.uint8)
    return FingerprintImage(pixels=pixels, ppi=int(target_ppi), meta=img.meta)
