"""Fixed-length 512-d texture representation and cosine comparison.

The descriptor summarizes a 1024x1024 region about the print's centroid on a
16x16 block grid: an orientation histogram weighted by coherence, the mean
ridge frequency, and local bandpass energy, projected to 512 dimensions by a
fixed seeded orthonormal projection and L2-normalized.  Externally computed
embeddings plug in through the import path.
"""

from __future__ import annotations

import json
import struct
import time
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyForeground,
    EmptyGallery,
    ExtractorMismatchWarning,
    NonFiniteValue,
    WrongDimension,
    WrongResolution,
)
from .imgproc import FingerprintImage, enhance
from .imgproc.ridges import (
    RidgeAnalysis,
    estimate_frequency,
    estimate_orientation,
    segment,
)

EMBED_DIM = 512
INPUT_SIZE = 1024
FEATURE_GRID = 16                 # blocks per side -> 64 px blocks
FEATURE_BLOCK = INPUT_SIZE // FEATURE_GRID
FINE_BLOCK = 16                   # orientation cells inside a feature block
ORIENTATION_BINS = 8
RAW_DIM = FEATURE_GRID * FEATURE_GRID * (ORIENTATION_BINS + 2)
PROJECTION_SEED = 51219           # published constant; embeddings are
                                  # comparable across runs and machines
FREQ_FEATURE_SCALE = 100.0
MIN_COVERAGE = 0.05
NATIVE_PPI = 1900
EXTRACTOR_ID = "ipx-texture-v1"
EMB_MAGIC = b"IPXE"

_projection_cache: Optional[np.ndarray] = None


@dataclass
class TextureEmbedding:
    vector: np.ndarray          # (512,) float32, unit norm
    extractor_id: str = EXTRACTOR_ID
    source_ppi: int = NATIVE_PPI

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=np.float32)
        if v.shape != (EMBED_DIM,):
            raise WrongDimension(f"embedding must have {EMBED_DIM} components")
        self.vector = v


def _projection() -> np.ndarray:
    """Fixed orthonormal projection RAW_DIM -> EMBED_DIM."""
    global _projection_cache
    if _projection_cache is None:
        rng = np.random.default_rng(PROJECTION_SEED)
        a = rng.standard_normal((RAW_DIM, EMBED_DIM))
        q, r = np.linalg.qr(a)
        q = q * np.sign(np.diag(r))[None, :]
        _projection_cache = q.astype(np.float64)
    return _projection_cache


def _crop_about_centroid(img: FingerprintImage, mask: np.ndarray,
                         block_size: int) -> np.ndarray:
    ys, xs = np.nonzero(mask)
    cy = (ys.mean() + 0.5) * block_size
    cx = (xs.mean() + 0.5) * block_size
    top = int(round(cy)) - INPUT_SIZE // 2
    left = int(round(cx)) - INPUT_SIZE // 2
    out = np.full((INPUT_SIZE, INPUT_SIZE), 255, dtype=np.uint8)
    y0, y1 = max(0, top), min(img.height, top + INPUT_SIZE)
    x0, x1 = max(0, left), min(img.width, left + INPUT_SIZE)
    if y1 > y0 and x1 > x0:
        out[y0 - top:y1 - top, x0 - left:x1 - left] = img.pixels[y0:y1, x0:x1]
    return out


def _orientation_histograms(theta: np.ndarray, coh: np.ndarray,
                            cells_per_block: int) -> np.ndarray:
    """Coherence-weighted soft histogram of doubled angles per feature block."""
    gh, gw = theta.shape
    fb_h, fb_w = gh // cells_per_block, gw // cells_per_block
    pos = theta / np.pi * ORIENTATION_BINS
    b0 = np.floor(pos).astype(int) % ORIENTATION_BINS
    b1 = (b0 + 1) % ORIENTATION_BINS
    w1 = pos - np.floor(pos)
    w0 = 1.0 - w1
    hist = np.zeros((fb_h, fb_w, ORIENTATION_BINS))
    cell_y = (np.arange(gh) // cells_per_block)[:, None].repeat(gw, axis=1)
    cell_x = (np.arange(gw) // cells_per_block)[None, :].repeat(gh, axis=0)
    valid = (cell_y < fb_h) & (cell_x < fb_w)
    np.add.at(hist, (cell_y[valid], cell_x[valid], b0[valid]),
              (coh * w0)[valid])
    np.add.at(hist, (cell_y[valid], cell_x[valid], b1[valid]),
              (coh * w1)[valid])
    return hist / (cells_per_block * cells_per_block)


def extract_embedding(img: FingerprintImage,
                      analysis: Optional[RidgeAnalysis] = None,
                      use_enhanced: bool = True,
                      expected_ppi: int = NATIVE_PPI) -> TextureEmbedding:
    """Compute the fixed-length texture representation of a native-resolution
    capture.  Deterministic: identical input gives an identical vector."""
    if img.ppi != expected_ppi:
        raise WrongResolution(
            f"texture extraction expects {expected_ppi} ppi, got {img.ppi}")

    if analysis is not None and analysis.mask.any():
        src_mask, src_bs = analysis.mask, analysis.block_size
    else:
        src_mask, src_bs = segment(img, FEATURE_BLOCK), FEATURE_BLOCK
    if not src_mask.any():
        raise EmptyForeground("no foreground found")

    crop = FingerprintImage(_crop_about_centroid(img, src_mask, src_bs),
                            ppi=img.ppi)
    mask = segment(crop, FEATURE_BLOCK)
    if mask.mean() < MIN_COVERAGE:
        raise EmptyForeground(
            f"foreground covers {mask.mean():.1%} of the input window")

    theta, coh = estimate_orientation(crop, FEATURE_BLOCK)
    freq = estimate_frequency(crop, mask, theta, FEATURE_BLOCK)
    block_analysis = RidgeAnalysis(block_size=FEATURE_BLOCK, mask=mask,
                                   orientation=theta, frequency=freq,
                                   coherence=coh,
                                   image_shape=crop.pixels.shape)
    texture_src = enhance(crop, block_analysis) if use_enhanced else crop

    fine_theta, fine_coh = estimate_orientation(crop, FINE_BLOCK)
    cells = FEATURE_BLOCK // FINE_BLOCK
    hist = _orientation_histograms(fine_theta, fine_coh, cells)

    signal = texture_src.astype_float() - 128.0
    blocks = signal.reshape(FEATURE_GRID, FEATURE_BLOCK,
                            FEATURE_GRID, FEATURE_BLOCK)
    energy = (blocks ** 2).mean(axis=(1, 3))
    fg_energy = energy[mask].mean() if mask.any() else 0.0
    energy_feat = np.sqrt(energy / (fg_energy + 1e-9))

    feats = np.zeros((FEATURE_GRID, FEATURE_GRID, ORIENTATION_BINS + 2))
    feats[:, :, :ORIENTATION_BINS] = hist
    feats[:, :, ORIENTATION_BINS] = freq * FREQ_FEATURE_SCALE
    feats[:, :, ORIENTATION_BINS + 1] = energy_feat
    feats[~mask] = 0.0

    raw = feats.reshape(-1)
    projected = _projection().T @ raw
    norm = np.linalg.norm(projected)
    if norm < 1e-12:
        raise EmptyForeground("degenerate descriptor (all-zero features)")
    vector = (projected / norm).astype(np.float32)
    extractor = EXTRACTOR_ID if use_enhanced else EXTRACTOR_ID + "-raw"
    return TextureEmbedding(vector=vector, extractor_id=extractor,
                            source_ppi=img.ppi)


# ---------------------------------------------------------------------------
# comparison and search

def compare(a: TextureEmbedding, b: TextureEmbedding) -> float:
    """Cosine similarity of two unit-norm embeddings, in [-1, 1]."""
    if a.vector.shape != b.vector.shape:
        raise DimensionMismatch("embedding dimensions differ")
    if a.extractor_id != b.extractor_id:
        warnings.warn(
            f"comparing embeddings from {a.extractor_id!r} and {b.extractor_id!r}",
            ExtractorMismatchWarning, stacklevel=2)
    return float(np.dot(a.vector, b.vector))


def similarity_to_score(sim: float) -> float:
    """Map cosine similarity to the [0, 1] fusion scale."""
    return (1.0 + sim) / 2.0


def build_gallery_matrix(embeddings: Sequence[TextureEmbedding]) -> np.ndarray:
    """Contiguous float32 matrix for batch search."""
    return np.ascontiguousarray(
        np.stack([e.vector for e in embeddings]).astype(np.float32))


def batch_search(probe: TextureEmbedding, gallery: np.ndarray,
                 k: int) -> list[tuple[int, float]]:
    """Exact top-k by similarity, descending; ties broken by lower index."""
    gallery = np.asarray(gallery)
    if gallery.ndim != 2 or gallery.shape[0] == 0:
        raise EmptyGallery("gallery matrix is empty")
    if gallery.shape[1] != probe.vector.shape[0]:
        raise DimensionMismatch("gallery and probe dimensions differ")
    if not 1 <= k <= gallery.shape[0]:
        raise ValueError("k must satisfy 1 <= k <= gallery size")
    sims = gallery @ probe.vector.astype(gallery.dtype)
    order = np.lexsort((np.arange(len(sims)), -sims))[:k]
    return [(int(i), float(sims[i])) for i in order]


def comparison_throughput(gallery_size: int = 1_000_000, seconds: float = 2.0,
                          seed: int = 0) -> float:
    """Sustained cosine comparisons/second against an in-memory gallery.

    One comparison = one probe-row dot product; scoring runs as a
    matrix-vector product over the resident gallery, which is how both
    identification and the dedup search consume the embedding store.
    """
    rng = np.random.default_rng(seed)
    gallery = np.empty((gallery_size, EMBED_DIM), dtype=np.float32)
    chunk = 100_000
    for start in range(0, gallery_size, chunk):
        stop = min(start + chunk, gallery_size)
        block = rng.standard_normal((stop - start, EMBED_DIM)).astype(np.float32)
        block /= np.linalg.norm(block, axis=1, keepdims=True)
        gallery[start:stop] = block
    probes = gallery[rng.integers(0, gallery_size, size=64)].copy()
    # warm-up pass
    _ = gallery[:chunk] @ probes[0]
    count = 0
    i = 0
    t0 = time.perf_counter()
    while True:
        _ = gallery @ probes[i % len(probes)]
        count += gallery_size
        i += 1
        dt = time.perf_counter() - t0
        if dt >= seconds:
            return count / dt


# ---------------------------------------------------------------------------
# import/export

def import_external_embedding(data: Union[bytes, str, Sequence[float]],
                              extractor_name: str) -> TextureEmbedding:
    """Accept 512 little-endian f32 or a JSON array of 512 numbers; the
    vector is L2-normalized on import."""
    if isinstance(data, (bytes, bytearray)):
        text = None
        stripped = bytes(data).lstrip()
        if stripped.startswith(b"["):
            text = stripped.decode("utf-8", errors="strict")
        if text is not None:
            values = np.asarray(json.loads(text), dtype=np.float64)
        else:
            if len(data) != EMBED_DIM * 4:
                raise WrongDimension(
                    f"need {EMBED_DIM * 4} bytes of f32 data, got {len(data)}")
            values = np.frombuffer(data, dtype="<f4").astype(np.float64)
    elif isinstance(data, str):
        values = np.asarray(json.loads(data), dtype=np.float64)
    else:
        values = np.asarray(data, dtype=np.float64)
    if values.shape != (EMBED_DIM,):
        raise WrongDimension(f"expected {EMBED_DIM} values, got {values.shape}")
    if not np.isfinite(values).all():
        raise NonFiniteValue("embedding contains NaN or infinity")
    norm = np.linalg.norm(values)
    if norm == 0.0:
        raise NonFiniteValue("zero vector cannot be normalized")
    return TextureEmbedding(vector=(values / norm).astype(np.float32),
                            extractor_id=f"external:{extractor_name}")


def save_embedding(emb: TextureEmbedding, path) -> None:
    with open(path, "wb") as fh:
        fh.write(EMB_MAGIC)
        fh.write(struct.pack("<I", EMBED_DIM))
        fh.write(emb.vector.astype("<f4").tobytes())


def load_embedding(path, extractor_id: str = EXTRACTOR_ID) -> TextureEmbedding:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != EMB_MAGIC:
        raise WrongDimension("not an embedding file")
    dim = struct.unpack("<I", blob[4:8])[0]
    if dim != EMBED_DIM:
        raise WrongDimension(f"embedding file has dimension {dim}")
    vec = np.frombuffer(blob[8:8 + 4 * dim], dtype="<f4")
    if vec.size != dim:
        raise WrongDimension("embedding file truncated")
    return TextureEmbedding(vector=vec.copy(), extractor_id=extractor_id)


def embedding_to_json(emb: TextureEmbedding) -> str:
    return json.dumps({"dim": EMBED_DIM, "extractor_id": emb.extractor_id,
                       "source_ppi": emb.source_ppi,
                       "vector": [float(v) for v in emb.vector]})
