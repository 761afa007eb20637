"""Blockwise ridge analysis: segmentation, orientation field, ridge frequency."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import ndimage

from .image import FingerprintImage

REFERENCE_PPI = 500
BASE_BLOCK_SIZE = 16          # pixels at the 500 ppi reference
MIN_RIDGE_PERIOD = 3.0        # plausibility clamp, pixels
MAX_RIDGE_PERIOD = 40.0
SEGMENT_VARIANCE_FLOOR = 25.0  # gray^2; kills flat sensor noise
SEGMENT_RELATIVE_FACTOR = 0.1


def block_size_for_ppi(ppi: int) -> int:
    """Default analysis block size, scaled so a block spans ~1.5-2 ridge periods."""
    return max(4, int(np.floor(BASE_BLOCK_SIZE * ppi / REFERENCE_PPI + 0.5)))


@dataclass
class RidgeAnalysis:
    """Per-block foreground mask, orientation (mod pi), frequency, coherence."""

    block_size: int
    mask: np.ndarray         # bool (gh, gw)
    orientation: np.ndarray  # float64 (gh, gw), values in [0, pi)
    frequency: np.ndarray    # float64 (gh, gw), cycles/pixel, 0 = undefined
    coherence: np.ndarray    # float64 (gh, gw) in [0, 1]
    image_shape: tuple[int, int]

    @property
    def grid_shape(self) -> tuple[int, int]:
        return self.mask.shape

    def coverage(self) -> float:
        return float(self.mask.mean()) if self.mask.size else 0.0

    def pixel_mask(self) -> np.ndarray:
        """Expand the block mask to image resolution."""
        h, w = self.image_shape
        up = np.repeat(np.repeat(self.mask, self.block_size, axis=0),
                       self.block_size, axis=1)
        return up[:h, :w]

    def block_of(self, y, x) -> tuple[np.ndarray, np.ndarray]:
        by = np.clip(np.asarray(y) // self.block_size, 0, self.mask.shape[0] - 1)
        bx = np.clip(np.asarray(x) // self.block_size, 0, self.mask.shape[1] - 1)
        return by.astype(np.intp), bx.astype(np.intp)

    def median_period(self) -> float:
        """Median ridge period over defined blocks, in pixels."""
        f = self.frequency[self.frequency > 0]
        if f.size == 0:
            return 9.5  # adult spacing at the reference resolution
        return float(1.0 / np.median(f))


def _block_grid(shape: tuple[int, int], bs: int) -> tuple[int, int]:
    return (-(-shape[0] // bs), -(-shape[1] // bs))


def _block_sums(arr: np.ndarray, bs: int) -> np.ndarray:
    rows = np.add.reduceat(arr, np.arange(0, arr.shape[0], bs), axis=0)
    return np.add.reduceat(rows, np.arange(0, arr.shape[1], bs), axis=1)


def _block_counts(shape: tuple[int, int], bs: int) -> np.ndarray:
    h, w = shape
    ch = np.minimum(np.arange(0, h, bs) + bs, h) - np.arange(0, h, bs)
    cw = np.minimum(np.arange(0, w, bs) + bs, w) - np.arange(0, w, bs)
    return np.outer(ch, cw).astype(np.float64)


def segment(img: FingerprintImage, block_size: Optional[int] = None) -> np.ndarray:
    """Foreground mask on the block grid from local gray-level variance.

    Threshold is relative to a global foreground variance estimate; only the
    largest connected component survives.  An empty mask is a valid result.
    """
    bs = block_size or block_size_for_ppi(img.ppi)
    if bs < 4:
        raise ValueError("block_size must be >= 4")
    px = img.astype_float()
    n = _block_counts(px.shape, bs)
    s1 = _block_sums(px, bs)
    s2 = _block_sums(px * px, bs)
    var = np.maximum(s2 / n - (s1 / n) ** 2, 0.0)
    estimate = float(np.percentile(var, 90)) if var.size else 0.0
    threshold = max(SEGMENT_RELATIVE_FACTOR * estimate, SEGMENT_VARIANCE_FLOOR)
    mask = var >= threshold
    if not mask.any():
        return mask
    labels, count = ndimage.label(mask)
    if count > 1:
        sizes = ndimage.sum_labels(mask, labels, index=np.arange(1, count + 1))
        mask = labels == (1 + int(np.argmax(sizes)))
    return mask


def estimate_orientation(img: FingerprintImage, block_size: Optional[int] = None,
                         smooth_sigma: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Gradient least-squares block orientation plus coherence.

    Returns (orientation, coherence); orientation is the ridge flow direction
    in [0, pi), smoothed in the doubled-angle domain.
    """
    bs = block_size or block_size_for_ppi(img.ppi)
    px = img.astype_float()
    gx = ndimage.sobel(px, axis=1, mode="reflect")
    gy = ndimage.sobel(px, axis=0, mode="reflect")
    sxx = _block_sums(gx * gx, bs)
    syy = _block_sums(gy * gy, bs)
    sxy = _block_sums(gx * gy, bs)
    denom = sxx + syy
    u = sxx - syy          # cos(2*phi) component of the gradient direction
    v = 2.0 * sxy          # sin(2*phi) component
    mag = np.hypot(u, v)
    with np.errstate(invalid="ignore", divide="ignore"):
        coherence = np.where(denom > 1e-12, mag / np.maximum(denom, 1e-12), 0.0)
    coherence = np.clip(coherence, 0.0, 1.0)
    norm = np.where(mag > 1e-12, mag, 1.0)
    cu = coherence * u / norm
    cv = coherence * v / norm
    if smooth_sigma > 0:
        cu = ndimage.gaussian_filter(cu, smooth_sigma, mode="nearest")
        cv = ndimage.gaussian_filter(cv, smooth_sigma, mode="nearest")
    # gradient normal -> ridge direction: add pi/2 (i.e. negate the vector
    # in doubled-angle space)
    theta = np.mod(0.5 * np.arctan2(-cv, -cu), np.pi)
    theta[theta >= np.pi] = 0.0
    smoothed_coh = np.clip(np.hypot(cu, cv), 0.0, 1.0)
    return theta, smoothed_coh


def _signature_coords(centers: np.ndarray, theta: np.ndarray,
                      length: int, width: int) -> np.ndarray:
    """Sampling coordinates of oriented signature windows, (2, n, length, width)."""
    normal = theta + np.pi / 2.0
    t = np.arange(length, dtype=np.float64) - (length - 1) / 2.0
    s = np.arange(width, dtype=np.float64) - (width - 1) / 2.0
    ny, nx = np.sin(normal), np.cos(normal)
    ry, rx = np.sin(theta), np.cos(theta)
    y = (centers[:, 0, None, None]
         + t[None, :, None] * ny[:, None, None]
         + s[None, None, :] * ry[:, None, None])
    x = (centers[:, 1, None, None]
         + t[None, :, None] * nx[:, None, None]
         + s[None, None, :] * rx[:, None, None])
    return np.stack([y, x])


def estimate_frequency(img: FingerprintImage, mask: np.ndarray,
                       orientation: np.ndarray,
                       block_size: Optional[int] = None) -> np.ndarray:
    """Per-block ridge frequency from the gray-level signature projected
    perpendicular to the local orientation.

    Periods outside [MIN_RIDGE_PERIOD, MAX_RIDGE_PERIOD] pixels are reported
    as 0 (undefined).
    """
    bs = block_size or block_size_for_ppi(img.ppi)
    gh, gw = _block_grid(img.pixels.shape, bs)
    freq = np.zeros((gh, gw), dtype=np.float64)
    idx = np.argwhere(mask)
    if idx.size == 0:
        return freq
    length = int(max(48, np.floor(2.5 * bs + 0.5)))
    width = int(max(8, bs // 2))
    centers = (idx + 0.5) * bs
    theta = orientation[idx[:, 0], idx[:, 1]]
    coords = _signature_coords(centers, theta, length, width)
    samples = ndimage.map_coordinates(img.astype_float(), coords.reshape(2, -1),
                                      order=1, mode="nearest")
    signatures = samples.reshape(len(idx), length, width).mean(axis=2)
    signatures -= signatures.mean(axis=1, keepdims=True)
    window = np.hanning(length)
    nfft = 4 * length
    spectrum = np.abs(np.fft.rfft(signatures * window, n=nfft, axis=1))
    freqs = np.fft.rfftfreq(nfft, d=1.0)
    valid = (freqs >= 1.0 / MAX_RIDGE_PERIOD) & (freqs <= 1.0 / MIN_RIDGE_PERIOD)
    if not valid.any():
        return freq
    lo = int(np.argmax(valid))
    hi = lo + int(valid[lo:].sum())
    band = spectrum[:, lo:hi]
    peak = np.argmax(band, axis=1)
    peak_mag = band[np.arange(len(idx)), peak]
    mean_mag = spectrum.mean(axis=1) + 1e-12
    # parabolic interpolation around the peak bin
    k = peak + lo
    k = np.clip(k, 1, spectrum.shape[1] - 2)
    y0 = spectrum[np.arange(len(idx)), k - 1]
    y1 = spectrum[np.arange(len(idx)), k]
    y2 = spectrum[np.arange(len(idx)), k + 1]
    denom = y0 - 2.0 * y1 + y2
    shift = np.where(np.abs(denom) > 1e-12, 0.5 * (y0 - y2) / denom, 0.0)
    shift = np.clip(shift, -0.5, 0.5)
    f_est = (k + shift) / nfft
    ok = (peak_mag > 2.0 * mean_mag) \
        & (f_est >= 1.0 / MAX_RIDGE_PERIOD) & (f_est <= 1.0 / MIN_RIDGE_PERIOD)
    freq[idx[ok, 0], idx[ok, 1]] = f_est[ok]
    return freq


def analyze(img: FingerprintImage, block_size: Optional[int] = None) -> RidgeAnalysis:
    """Run the full blockwise chain: segmentation, orientation, frequency."""
    bs = block_size or block_size_for_ppi(img.ppi)
    mask = segment(img, bs)
    orientation, coherence = estimate_orientation(img, bs)
    frequency = estimate_frequency(img, mask, orientation, bs)
    return RidgeAnalysis(block_size=bs, mask=mask, orientation=orientation,
                         frequency=frequency, coherence=coherence,
                         image_shape=img.pixels.shape)
