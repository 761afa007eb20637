"""Analytic test patterns: gratings, bars, rings with known ground truth."""

from __future__ import annotations

import numpy as np

from infantprints.imgproc import FingerprintImage


def grating(shape=(256, 256), period=10.0, orientation=np.pi / 2, ppi=500,
            amplitude=90.0, mean=128.0, phase=0.0) -> FingerprintImage:
    """Sinusoidal ridge pattern whose flow direction is ``orientation``.

    Constant-phase lines (the ridges) run along ``orientation``; the wave
    vector points along the normal.
    """
    h, w = shape
    y, x = np.mgrid[0:h, 0:w].astype(np.float64)
    normal = orientation + np.pi / 2.0
    carrier = np.cos(2.0 * np.pi / period * (x * np.cos(normal) + y * np.sin(normal))
                     + phase)
    px = np.clip(np.rint(mean - amplitude * carrier), 0, 255).astype(np.uint8)
    return FingerprintImage(pixels=px, ppi=ppi)


def flat(shape=(128, 128), value=200, ppi=500) -> FingerprintImage:
    return FingerprintImage(pixels=np.full(shape, value, dtype=np.uint8), ppi=ppi)


def bar(shape=(96, 96), thickness=9, ppi=500) -> FingerprintImage:
    """Single thick horizontal black bar on white."""
    px = np.full(shape, 255, dtype=np.uint8)
    r0 = shape[0] // 2 - thickness // 2
    px[r0:r0 + thickness, 8:shape[1] - 8] = 0
    return FingerprintImage(pixels=px, ppi=ppi)


def ring(shape=(128, 128), radius=40.0, thickness=9.0, ppi=500) -> FingerprintImage:
    """Black annulus on white."""
    h, w = shape
    y, x = np.mgrid[0:h, 0:w].astype(np.float64)
    r = np.hypot(y - h / 2.0, x - w / 2.0)
    px = np.where(np.abs(r - radius) <= thickness / 2.0, 0, 255).astype(np.uint8)
    return FingerprintImage(pixels=px, ppi=ppi)


def random_image(rng: np.random.Generator, shape=(64, 64), ppi=500) -> FingerprintImage:
    return FingerprintImage(
        pixels=rng.integers(0, 256, size=shape, dtype=np.uint8), ppi=ppi)


def neighbor_count(skel: np.ndarray) -> np.ndarray:
    """Number of 8-neighbors set, for every pixel."""
    p = np.pad(skel.astype(np.int32), 1)
    total = np.zeros_like(p)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dy == 0 and dx == 0:
                continue
            total += np.roll(np.roll(p, dy, axis=0), dx, axis=1)
    return total[1:-1, 1:-1]


def endpoints(skel: np.ndarray) -> int:
    """Count skeleton pixels with exactly one 8-neighbor."""
    return int(((neighbor_count(skel) == 1) & skel).sum())
