"""Render captures from a master print: growth scaling, elastic distortion,
placement jitter, and capture degradations (blur, wetness, contrast, noise)."""

from __future__ import annotations

from dataclasses import dataclass, replace
from datetime import datetime, timedelta, timezone

import numpy as np
from scipy import ndimage

from ..imgproc import CaptureMeta, FingerprintImage
from .master import MasterPrint

OUTPUT_PPI = 1900
GROWTH_RATE = 0.12            # relative size increase over the first 90 days
GROWTH_REFERENCE_DAYS = 90.0
RIDGE_AMPLITUDE = 90.0
ELASTIC_BUMPS = 6
COARSE_STEP = 8               # displacement fields evaluated on a coarse grid
EPOCH = datetime(2018, 12, 1, tzinfo=timezone.utc)


@dataclass(frozen=True)
class Perturbation:
    """Capture degradation knobs; amplitudes are at the output scale."""

    elastic_amplitude: float = 1.5   # max displacement, in ridge periods
    blur_sigma: float = 0.5          # gaussian blur at the 500 ppi scale
    wetness: float = 0.0             # >0 bleeding ridges, <0 dropout
    contrast: float = 1.0
    noise: float = 0.03              # additive gaussian, fraction of range

    def scaled(self, factor: float) -> "Perturbation":
        """Degradations inflated for low-cooperation (young) captures."""
        return replace(self,
                       elastic_amplitude=self.elastic_amplitude * factor,
                       blur_sigma=self.blur_sigma * factor,
                       noise=self.noise * factor,
                       wetness=self.wetness * factor)


def growth_factor(age_days: float, rate: float = GROWTH_RATE,
                  reference_days: float = GROWTH_REFERENCE_DAYS) -> float:
    """Isotropic finger size factor by age; linear, s(0)=1."""
    return 1.0 + rate * max(0.0, float(age_days)) / reference_days


def age_quality_factor(age_days: float, slope: float = 1.0) -> float:
    """Degradation multiplier: younger infants cooperate less and have
    smaller, lower-contrast prints.  1.0 at >= 90 days, (1 + slope) at birth."""
    return 1.0 + slope * (1.0 - min(float(age_days), 90.0) / 90.0)


def _elastic_field(rng, shape, amplitude):
    """Smooth random displacement: a handful of gaussian bumps, coarse-grid
    evaluated and upsampled."""
    ch = -(-shape[0] // COARSE_STEP) + 1
    cw = -(-shape[1] // COARSE_STEP) + 1
    yy, xx = np.mgrid[0:ch, 0:cw].astype(np.float64) * COARSE_STEP
    dx = np.zeros((ch, cw))
    dy = np.zeros((ch, cw))
    for _ in range(ELASTIC_BUMPS):
        cy = rng.uniform(0, shape[0])
        cx = rng.uniform(0, shape[1])
        sigma = rng.uniform(0.12, 0.3) * max(shape)
        vec = rng.normal(0.0, amplitude / 2.0, size=2)
        bump = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * sigma ** 2))
        dy += vec[0] * bump
        dx += vec[1] * bump
    norm = np.sqrt(dx ** 2 + dy ** 2)
    peak = norm.max()
    if peak > amplitude > 0:
        dx *= amplitude / peak
        dy *= amplitude / peak
    zoom = (shape[0] / dy.shape[0], shape[1] / dy.shape[1])
    return (ndimage.zoom(dy, zoom, order=1)[:shape[0], :shape[1]],
            ndimage.zoom(dx, zoom, order=1)[:shape[0], :shape[1]])


def render_capture(master: MasterPrint, age_days: float,
                   perturbation: Perturbation | None = None,
                   impression_seed: int = 0,
                   meta: CaptureMeta | None = None,
                   out_ppi: int = OUTPUT_PPI,
                   age_quality_slope: float = 1.0) -> FingerprintImage:
    """One impression of the master at the given age, at 1,900 ppi.

    Deterministic in (master, age, perturbation, impression_seed).
    """
    pert = perturbation or Perturbation()
    rng = np.random.default_rng(impression_seed)
    factor = age_quality_factor(age_days, age_quality_slope)
    pert = pert.scaled(factor)

    growth = growth_factor(age_days)
    scale = (out_ppi / master.ppi) * growth
    base_scale = out_ppi / master.ppi
    mh, mw = master.pattern.shape
    oh, ow = int(round(mh * base_scale)), int(round(mw * base_scale))

    # placement jitter: the finger lands slightly differently every time
    rot = np.radians(rng.uniform(-8.0, 8.0))
    jitter = rng.uniform(-16.0, 16.0, size=2)

    yy, xx = np.mgrid[0:oh, 0:ow].astype(np.float64)
    period_out = master.period_px * scale
    amp = pert.elastic_amplitude * period_out
    if amp > 0:
        dy, dx = _elastic_field(rng, (oh, ow), amp)
        yy = yy + dy
        xx = xx + dx

    cy_o, cx_o = oh / 2.0 + jitter[0], ow / 2.0 + jitter[1]
    cy_m, cx_m = mh / 2.0, mw / 2.0
    c, s = np.cos(rot), np.sin(rot)
    rel_y = yy - cy_o
    rel_x = xx - cx_o
    src_y = (c * rel_y - s * rel_x) / scale + cy_m
    src_x = (s * rel_y + c * rel_x) / scale + cx_m

    pattern = ndimage.map_coordinates(master.pattern, [src_y, src_x],
                                      order=1, mode="constant", cval=0.0)
    ecy, ecx, eay, eax = master.mask_ellipse
    e_master = ((src_x - ecx) / eax) ** 2 + ((src_y - ecy) / eay) ** 2

    # touch region: younger fingers place a smaller contact patch
    touch_frac = 0.8 + 0.2 * min(float(age_days), 120.0) / 120.0
    ty, tx = np.mgrid[0:oh, 0:ow].astype(np.float64)
    tc_y = oh / 2.0 + rng.uniform(-0.04, 0.04) * oh
    tc_x = ow / 2.0 + rng.uniform(-0.04, 0.04) * ow
    t_ay = 0.5 * oh * growth * touch_frac * rng.uniform(0.95, 1.05)
    t_ax = 0.5 * ow * growth * touch_frac * rng.uniform(0.95, 1.05)
    e_touch = ((ty - tc_y) / t_ay) ** 2 + ((tx - tc_x) / t_ax) ** 2
    fg = (e_master <= 1.0) & (e_touch <= 1.0)

    # pressure falloff toward the contact boundary
    falloff = (np.sqrt(np.clip((1.0 - e_master) / 0.3, 0.0, 1.0))
               * np.sqrt(np.clip((1.0 - e_touch) / 0.3, 0.0, 1.0)))
    intensity = 128.0 - RIDGE_AMPLITUDE * pattern * falloff
    intensity[~fg] = 255.0

    if pert.wetness > 1e-6:
        bled = ndimage.grey_erosion(intensity, size=3)
        w = min(pert.wetness, 1.0)
        intensity = (1 - w) * intensity + w * bled
    elif pert.wetness < -1e-6:
        speckle = ndimage.gaussian_filter(rng.standard_normal((oh, ow)), 2.0)
        dropout = speckle > np.quantile(speckle, 1.0 + pert.wetness * 0.3)
        intensity = np.where(dropout & fg,
                             intensity + 0.7 * (220.0 - intensity), intensity)

    blur = pert.blur_sigma * out_ppi / 500.0
    if blur > 0:
        intensity = ndimage.gaussian_filter(intensity, blur)
    intensity = 128.0 + pert.contrast * (intensity - 128.0)
    if pert.noise > 0:
        intensity = intensity + rng.normal(0.0, pert.noise * 255.0, size=(oh, ow))

    pixels = np.clip(np.rint(intensity), 0, 255).astype(np.uint8)
    return FingerprintImage(pixels=pixels, ppi=out_ppi, meta=meta)


def capture_timestamp(day_offset: int) -> datetime:
    return EPOCH + timedelta(days=int(day_offset))
