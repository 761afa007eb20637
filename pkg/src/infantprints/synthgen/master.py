"""Master print synthesis: singularity-driven orientation fields plus
iterative oriented filtering of seeded noise until a stable ridge pattern
forms."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from ..imgproc.enhance import BandpassOperator

MASTER_PPI = 1000
MASTER_SHAPE = (420, 340)            # (height, width) at MASTER_PPI
INFANT_PERIOD_RANGE = (4.2, 5.6)     # ridge period at the 500 ppi scale
PATTERN_CLASSES = ("loop_left", "loop_right", "whorl", "arch")
PATTERN_WEIGHTS = (0.3, 0.3, 0.25, 0.15)
FORMATION_ITERATIONS = 12


@dataclass(frozen=True)
class Singularity:
    kind: str                 # "core" or "delta"
    position: tuple[float, float]   # (x, y) in master pixels


@dataclass
class MasterPrint:
    seed: int
    singularities: list[Singularity]
    orientation_field: np.ndarray    # (H, W), radians in [0, pi)
    base_ridge_period_at_500ppi: float
    pattern: np.ndarray              # (H, W) float in [-1, 1]; +1 = ridge
    mask: np.ndarray                 # fingertip region, bool
    mask_ellipse: tuple[float, float, float, float]  # (cy, cx, ay, ax)
    ppi: int = MASTER_PPI
    pattern_class: str = "loop_left"

    @property
    def period_px(self) -> float:
        """Ridge period in master pixels."""
        return self.base_ridge_period_at_500ppi * self.ppi / 500.0


def _singularity_layout(rng: np.random.Generator, cls: str,
                        shape: tuple[int, int]):
    """Core/delta placement for each pattern class.

    Arch uses a virtual core/delta pair far below the canvas: the in-canvas
    field stays smooth and singularity-free.
    """
    h, w = shape
    cx = w / 2 + rng.uniform(-w * 0.06, w * 0.06)
    cy = h * 0.42 + rng.uniform(-h * 0.05, h * 0.05)
    cores, deltas = [], []
    if cls in ("loop_left", "loop_right"):
        side = -1.0 if cls == "loop_left" else 1.0
        cores.append((cx, cy))
        deltas.append((cx + side * w * rng.uniform(0.22, 0.34),
                       cy + h * rng.uniform(0.28, 0.4)))
    elif cls == "whorl":
        dy = h * rng.uniform(0.03, 0.09)
        cores.append((cx - w * 0.04, cy - dy))
        cores.append((cx + w * 0.04, cy + dy))
        deltas.append((cx - w * rng.uniform(0.26, 0.36), cy + h * 0.34))
        deltas.append((cx + w * rng.uniform(0.26, 0.36), cy + h * 0.34))
    else:  # arch
        cores.append((cx, h * 1.8))
        deltas.append((cx + rng.uniform(-8, 8), h * 2.3))
    return cores, deltas


def _orientation_from_singularities(shape, cores, deltas, rng):
    h, w = shape
    y, x = np.mgrid[0:h, 0:w].astype(np.float64)
    z = x + 1j * y
    theta = np.zeros(shape, dtype=np.float64)
    for cxy in cores:
        theta += 0.5 * np.angle(z - complex(cxy[0], cxy[1]))
    for dxy in deltas:
        theta -= 0.5 * np.angle(z - complex(dxy[0], dxy[1]))
    # individual low-frequency waviness, applied in the doubled-angle domain
    noise = ndimage.gaussian_filter(rng.standard_normal(shape), 45.0)
    noise *= 0.55 / (np.abs(noise).max() + 1e-12)
    theta = theta + noise
    return np.mod(theta, np.pi)


def _fingertip_mask(shape, rng):
    h, w = shape
    y, x = np.mgrid[0:h, 0:w].astype(np.float64)
    cy, cx = h * 0.5, w * 0.5
    ay = h * rng.uniform(0.42, 0.46)
    ax = w * rng.uniform(0.4, 0.44)
    r = ((x - cx) / ax) ** 2 + ((y - cy) / ay) ** 2
    return r <= 1.0, (cy, cx, ay, ax)


def synth_master(seed: int, shape: tuple[int, int] = MASTER_SHAPE,
                 pattern_class: str | None = None) -> MasterPrint:
    """Deterministic master print for a seed.

    The ridge pattern emerges from repeatedly bandpass-filtering seeded noise
    with the singularity-consistent orientation field and squashing the
    result, until a stable near-binary ridge flow forms.
    """
    rng = np.random.default_rng(seed)
    cls = pattern_class or str(rng.choice(PATTERN_CLASSES, p=PATTERN_WEIGHTS))
    period500 = float(rng.uniform(*INFANT_PERIOD_RANGE))
    period = period500 * MASTER_PPI / 500.0

    cores, deltas = _singularity_layout(rng, cls, shape)
    theta = _orientation_from_singularities(shape, cores, deltas, rng)
    mask, ellipse = _fingertip_mask(shape, rng)

    # spatial period variation of a few percent
    pvar = ndimage.gaussian_filter(rng.standard_normal(shape), 50.0)
    pvar *= 0.05 / (np.abs(pvar).max() + 1e-12)
    period_map = period * (1.0 + pvar)

    bs = max(8, int(round(2.1 * period)))
    gh, gw = -(-shape[0] // bs), -(-shape[1] // bs)
    centers_y = np.minimum(np.arange(gh) * bs + bs // 2, shape[0] - 1)
    centers_x = np.minimum(np.arange(gw) * bs + bs // 2, shape[1] - 1)
    theta_grid = theta[np.ix_(centers_y, centers_x)]
    freq_grid = 1.0 / period_map[np.ix_(centers_y, centers_x)]
    grid_mask = np.ones((gh, gw), dtype=bool)

    operator = BandpassOperator(grid_mask, theta_grid, freq_grid, bs, shape)
    pattern = rng.standard_normal(shape)
    pattern = ndimage.gaussian_filter(pattern, period / 6.0)
    for _ in range(FORMATION_ITERATIONS):
        filtered = operator(pattern)
        rms = np.sqrt((filtered * filtered).mean()) + 1e-12
        pattern = np.tanh(2.0 * filtered / rms)

    h, w = shape
    in_canvas = [s for s in
                 ([Singularity("core", c) for c in cores]
                  + [Singularity("delta", d) for d in deltas])
                 if 0 <= s.position[0] < w and 0 <= s.position[1] < h]

    return MasterPrint(seed=int(seed), singularities=in_canvas,
                       orientation_field=theta,
                       base_ridge_period_at_500ppi=period500,
                       pattern=pattern, mask=mask, mask_ellipse=ellipse,
                       pattern_class=cls)
