"""Crossing-number minutiae extraction from one-pixel-wide skeletons."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from scipy import ndimage

from ..imgproc.enhance import Skeleton
from ..imgproc.ridges import REFERENCE_PPI, RidgeAnalysis

BORDER_MARGIN_AT_REF = 8     # px at 500 ppi
DUPLICATE_RADIUS_AT_REF = 4  # px at 500 ppi

# 8-neighborhood in circular order, starting east, counter-clockwise in xy
_NEIGHBORS = [(0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1)]


class MinutiaKind(str, Enum):
    ENDING = "ending"
    BIFURCATION = "bifurcation"


@dataclass(frozen=True)
class Minutia:
    x: float
    y: float
    direction: float  # radians in [0, 2*pi)
    kind: MinutiaKind
    quality: float = 1.0


@dataclass
class MinutiaSet:
    minutiae: list[Minutia]
    source_ppi: int
    source_dims: tuple[int, int]  # (width, height)
    _arrays: Optional[dict] = field(default=None, repr=False, compare=False)

    def __len__(self) -> int:
        return len(self.minutiae)

    def arrays(self) -> dict:
        """Columnar view (cached) used by the matcher."""
        if self._arrays is None:
            self._arrays = {
                "xy": np.array([[m.x, m.y] for m in self.minutiae], dtype=np.float64
                               ).reshape(-1, 2),
                "direction": np.array([m.direction for m in self.minutiae]),
                "kind": np.array([m.kind == MinutiaKind.BIFURCATION
                                  for m in self.minutiae], dtype=bool),
                "quality": np.array([m.quality for m in self.minutiae]),
            }
        return self._arrays


def crossing_numbers(skel: np.ndarray) -> np.ndarray:
    """Crossing number at every pixel: half the sum of 0/1 transitions
    around the 8-neighborhood, walked in circular order."""
    p = np.pad(np.asarray(skel, dtype=np.int8), 1)
    rings = [p[1 + dy: p.shape[0] - 1 + dy, 1 + dx: p.shape[1] - 1 + dx]
             for dy, dx in _NEIGHBORS]
    total = np.zeros(rings[0].shape, dtype=np.int16)
    for i in range(8):
        total += np.abs(rings[i] - rings[(i + 1) % 8])
    return (total // 2).astype(np.int16)


def _trace(skel: np.ndarray, start: tuple[int, int], first: tuple[int, int],
           steps: int) -> tuple[int, int]:
    """Walk along the skeleton from ``start`` through ``first`` for up to
    ``steps`` pixels; returns the reached pixel."""
    prev, cur = start, first
    for _ in range(steps - 1):
        nxt = None
        cy, cx = cur
        for dy, dx in _NEIGHBORS:
            ny, nx = cy + dy, cx + dx
            if (ny, nx) == prev:
                continue
            if 0 <= ny < skel.shape[0] and 0 <= nx < skel.shape[1] and skel[ny, nx]:
                # do not jump across the diagonal of the previous pixel
                if abs(ny - prev[0]) <= 1 and abs(nx - prev[1]) <= 1 and (dy and dx):
                    continue
                nxt = (ny, nx)
                break
        if nxt is None:
            break
        prev, cur = cur, nxt
    return cur


def _branch_starts(skel, y, x):
    out = []
    for dy, dx in _NEIGHBORS:
        ny, nx = y + dy, x + dx
        if 0 <= ny < skel.shape[0] and 0 <= nx < skel.shape[1] and skel[ny, nx]:
            out.append((ny, nx))
    return out


def _direction_from(skel, y, x, kind, trace_len):
    """Minutia direction by local ridge tracing.

    Endings point into the ridge; bifurcations point toward the side where
    the single ridge continues (away from the two diverging branches).
    """
    starts = _branch_starts(skel, y, x)
    if not starts:
        return 0.0
    if kind == MinutiaKind.ENDING:
        ty, tx = _trace(skel, (y, x), starts[0], trace_len)
        return float(np.mod(np.arctan2(ty - y, tx - x), 2 * np.pi))
    vecs = []
    for s in starts[:3]:
        ty, tx = _trace(skel, (y, x), s, trace_len)
        v = np.array([ty - y, tx - x], dtype=float)
        norm = np.hypot(*v)
        if norm > 0:
            vecs.append(v / norm)
    if not vecs:
        return 0.0
    merged = -np.sum(vecs, axis=0)
    if np.hypot(*merged) < 1e-9:
        merged = vecs[0]
    return float(np.mod(np.arctan2(merged[0], merged[1]), 2 * np.pi))


def extract_minutiae(skel: Skeleton, analysis: Optional[RidgeAnalysis] = None,
                     prune: bool = True, max_minutiae: int = 60) -> MinutiaSet:
    """Find ridge endings (CN=1) and bifurcations (CN=3) on a skeleton.

    With ``prune`` enabled: drops minutiae near the mask border, suppresses
    facing ending pairs closer than a ridge period (broken-ridge artifacts),
    de-duplicates points closer than 4 px at the 500 ppi scale, and keeps at
    most ``max_minutiae`` by quality.
    """
    sk = skel.pixels
    h, w = sk.shape
    scale = skel.ppi / REFERENCE_PPI
    cn = crossing_numbers(sk)
    period = analysis.median_period() if analysis is not None else 9.5 * scale
    trace_len = max(3, int(round(period)))

    candidates = []
    for kind, value in ((MinutiaKind.ENDING, 1), (MinutiaKind.BIFURCATION, 3)):
        for y, x in np.argwhere(sk & (cn == value)):
            direction = _direction_from(sk, int(y), int(x), kind, trace_len)
            if analysis is not None:
                by, bx = analysis.block_of(y, x)
                quality = float(analysis.coherence[by, bx])
            else:
                quality = 1.0
            candidates.append(Minutia(float(x), float(y), direction, kind, quality))

    if prune and candidates:
        candidates = _prune(candidates, sk.shape, scale, period, analysis)
        if len(candidates) > max_minutiae:
            candidates.sort(key=lambda m: (-m.quality, m.y, m.x))
            candidates = candidates[:max_minutiae]

    candidates.sort(key=lambda m: (m.y, m.x, m.kind.value))
    return MinutiaSet(candidates, source_ppi=skel.ppi, source_dims=(w, h))


def _prune(cands, shape, scale, period, analysis):
    margin = max(1, int(round(BORDER_MARGIN_AT_REF * scale)))
    if analysis is not None:
        fg = analysis.pixel_mask()
        dist = ndimage.distance_transform_edt(fg)
        keep = [m for m in cands if dist[int(m.y), int(m.x)] >= margin]
    else:
        h, w = shape
        keep = [m for m in cands
                if margin <= m.x < w - margin and margin <= m.y < h - margin]

    # facing ending pairs closer than one ridge period: broken-ridge artifacts
    endings = [m for m in keep if m.kind == MinutiaKind.ENDING]
    drop = set()
    for i in range(len(endings)):
        for j in range(i + 1, len(endings)):
            a, b = endings[i], endings[j]
            if np.hypot(a.x - b.x, a.y - b.y) >= period:
                continue
            if np.cos(a.direction - b.direction) < -0.7:
                drop.add(id(a))
                drop.add(id(b))
    keep = [m for m in keep if id(m) not in drop]

    # duplicate suppression at the reference scale, higher quality wins
    radius = DUPLICATE_RADIUS_AT_REF * scale
    keep.sort(key=lambda m: -m.quality)
    result = []
    for m in keep:
        if all(np.hypot(m.x - r.x, m.y - r.y) >= radius for r in result):
            result.append(m)
    return result


# ---------------------------------------------------------------------------
# template formats: one minutia per line, and a JSON equivalent

def minutiae_to_text(mset: MinutiaSet) -> str:
    lines = [f"# ppi {mset.source_ppi} dims {mset.source_dims[0]} {mset.source_dims[1]}"]
    for m in mset.minutiae:
        lines.append(f"{m.x:.2f} {m.y:.2f} {np.degrees(m.direction):.2f} "
                     f"{m.kind.value} {m.quality:.4f}")
    return "\n".join(lines) + "\n"


def minutiae_from_text(text: str) -> MinutiaSet:
    ppi, dims = REFERENCE_PPI, (0, 0)
    minutiae = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) >= 5 and parts[0] == "ppi":
                ppi = int(parts[1])
                dims = (int(parts[3]), int(parts[4]))
            continue
        x, y, deg, kind, quality = line.split()
        minutiae.append(Minutia(float(x), float(y),
                                float(np.mod(np.radians(float(deg)), 2 * np.pi)),
                                MinutiaKind(kind), float(quality)))
    return MinutiaSet(minutiae, source_ppi=ppi, source_dims=dims)


def minutiae_to_json(mset: MinutiaSet) -> str:
    return json.dumps({
        "source_ppi": mset.source_ppi,
        "source_dims": list(mset.source_dims),
        "minutiae": [{"x": m.x, "y": m.y,
                      "direction_deg": float(np.degrees(m.direction)),
                      "kind": m.kind.value, "quality": m.quality}
                     for m in mset.minutiae],
    }, indent=2)


def minutiae_from_json(text: str) -> MinutiaSet:
    doc = json.loads(text)
    minutiae = [Minutia(float(m["x"]), float(m["y"]),
                        float(np.mod(np.radians(m["direction_deg"]), 2 * np.pi)),
                        MinutiaKind(m["kind"]), float(m.get("quality", 1.0)))
                for m in doc["minutiae"]]
    return MinutiaSet(minutiae, source_ppi=int(doc["source_ppi"]),
                      source_dims=tuple(doc["source_dims"]))
