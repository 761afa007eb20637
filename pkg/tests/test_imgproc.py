import numpy as np
import pytest
from scipy import ndimage

from infantprints import errors
from infantprints.imgproc import (
    FingerprintImage,
    analyze,
    binarize_and_thin,
    block_size_for_ppi,
    downsample,
    enhance,
    estimate_frequency,
    estimate_orientation,
    load_image,
    segment,
    write_image,
)
from infantprints.imgproc.ridges import (
    SEGMENT_RELATIVE_FACTOR,
    SEGMENT_VARIANCE_FLOOR,
)

from synthpatterns import flat, grating, random_image, bar, ring, neighbor_count, endpoints


# ---------------------------------------------------------------------------
# codecs

class TestLoadImage:
    def test_all_zero_pgm(self):
        data = b"P5\n8 8\n255\n" + bytes(64)
        img = load_image(data, declared_ppi=1900)
        assert (img.width, img.height, img.ppi) == (8, 8, 1900)
        assert not img.pixels.any()

    def test_native_1900_ppi_accepted(self):
        rng = np.random.default_rng(0)
        img = random_image(rng, shape=(32, 32), ppi=1900)
        reread = load_image(write_image(img, "pgm"), declared_ppi=1900)
        assert reread.ppi == 1900

    def test_pgm_round_trip_bit_exact(self):
        rng = np.random.default_rng(42)
        for _ in range(100):
            h, w = int(rng.integers(1, 40)), int(rng.integers(1, 40))
            img = random_image(rng, shape=(h, w))
            again = load_image(write_image(img, "pgm"), declared_ppi=img.ppi)
            assert np.array_equal(again.pixels, img.pixels)

    def test_png_round_trip_with_phys_resolution(self):
        rng = np.random.default_rng(7)
        img = random_image(rng, shape=(21, 17), ppi=1900)
        again = load_image(write_image(img, "png"))
        assert np.array_equal(again.pixels, img.pixels)
        assert again.ppi == 1900

    def test_declared_ppi_overrides_embedded(self):
        img = flat(ppi=500)
        again = load_image(write_image(img, "png"), declared_ppi=1270)
        assert again.ppi == 1270

    def test_unsupported_format(self):
        with pytest.raises(errors.UnsupportedFormat):
            load_image(b"GIF89a....", declared_ppi=500)

    def test_missing_resolution(self):
        with pytest.raises(errors.MissingResolution):
            load_image(b"P5\n4 4\n255\n" + bytes(16))

    def test_corrupt_pgm_raster(self):
        with pytest.raises(errors.CorruptData):
            load_image(b"P5\n8 8\n255\n" + bytes(10), declared_ppi=500)

    def test_corrupt_png(self):
        png = write_image(flat(), "png")
        with pytest.raises(errors.CorruptData):
            load_image(png[:40])

    def test_pgm_comment_header(self):
        data = b"P5\n# a comment\n4 2\n255\n" + bytes(8)
        img = load_image(data, declared_ppi=500)
        assert (img.width, img.height) == (4, 2)


# ---------------------------------------------------------------------------
# downsampling

class TestDownsample:
    def test_scale_arithmetic_1900_to_500(self):
        img = FingerprintImage(np.zeros((1024, 1024), np.uint8), ppi=1900)
        out = downsample(img, 500)
        assert (out.height, out.width, out.ppi) == (269, 269, 500)

    def test_identity_target(self):
        rng = np.random.default_rng(1)
        img = random_image(rng, shape=(50, 30), ppi=500)
        out = downsample(img, 500)
        assert np.array_equal(out.pixels, img.pixels)
        assert out.ppi == 500

    def test_flat_field_invariance(self):
        img = flat(shape=(123, 77), value=137, ppi=1900)
        out = downsample(img, 500)
        assert (out.pixels == 137).all()

    def test_mean_preservation(self):
        rng = np.random.default_rng(3)
        img = random_image(rng, shape=(200, 200), ppi=1900)
        out = downsample(img, 500)
        assert abs(float(out.pixels.mean()) - float(img.pixels.mean())) < 1.5

    def test_upsample_rejected(self):
        img = flat(ppi=500)
        with pytest.raises(errors.UpsampleRequested):
            downsample(img, 600)

    def test_composition_dimensions(self):
        rng = np.random.default_rng(4)
        img = random_image(rng, shape=(333, 251), ppi=1900)
        two_step = downsample(downsample(img, 1000), 500)
        one_step = downsample(img, 500)
        assert abs(two_step.height - one_step.height) <= 1
        assert abs(two_step.width - one_step.width) <= 1

    def test_meta_preserved(self):
        from infantprints.imgproc import CaptureMeta, Finger
        meta = CaptureMeta(subject_id="s1", finger=Finger.LEFT_THUMB)
        img = FingerprintImage(np.zeros((64, 64), np.uint8), ppi=1900, meta=meta)
        assert downsample(img, 500).meta is meta


# ---------------------------------------------------------------------------
# segmentation

def _variance_oracle(img, bs):
    """Brute-force per-block variance mask, before connected components."""
    h, w = img.pixels.shape
    gh, gw = -(-h // bs), -(-w // bs)
    var = np.zeros((gh, gw))
    for i in range(gh):
        for j in range(gw):
            block = img.pixels[i * bs:(i + 1) * bs, j * bs:(j + 1) * bs]
            var[i, j] = np.var(block.astype(np.float64))
    thr = max(SEGMENT_RELATIVE_FACTOR * np.percentile(var, 90), SEGMENT_VARIANCE_FLOOR)
    return var >= thr


class TestSegment:
    def test_uniform_image_all_background(self):
        assert not segment(flat(shape=(96, 96)), 16).any()

    def test_full_frame_grating_matches_variance_oracle(self):
        img = grating(shape=(160, 160), period=10.0)
        mask = segment(img, 16)
        assert np.array_equal(mask, _variance_oracle(img, 16))
        assert mask.all()

    def test_half_grating_foreground_left_only(self):
        img = grating(shape=(160, 160), period=10.0)
        px = img.pixels.copy()
        px[:, 80:] = 200
        img = FingerprintImage(px, ppi=500)
        mask = segment(img, 16)
        oracle = _variance_oracle(img, 16)
        assert mask[:, :4].all()
        assert not mask[:, 6:].any()
        assert np.array_equal(mask, oracle)


# ---------------------------------------------------------------------------
# orientation

def _interior(gridmask):
    out = np.zeros_like(gridmask)
    out[1:-1, 1:-1] = gridmask[1:-1, 1:-1]
    return out


class TestOrientation:
    def test_vertical_grating(self):
        img = grating(shape=(256, 256), period=10.0, orientation=np.pi / 2)
        theta, coh = estimate_orientation(img, 16)
        interior = _interior(np.ones(theta.shape, bool))
        err = np.degrees(np.abs(np.angle(np.exp(2j * (theta[interior] - np.pi / 2)))) / 2)
        assert np.median(err) < 2.0
        assert (coh[interior] > 0.5).all()

    @pytest.mark.parametrize("phi_deg", [10, 30, 60, 115])
    def test_rotated_grating(self, phi_deg):
        target = (np.pi / 2 + np.radians(phi_deg)) % np.pi
        img = grating(shape=(256, 256), period=10.0, orientation=target)
        theta, _ = estimate_orientation(img, 16)
        interior = _interior(np.ones(theta.shape, bool))
        err = np.degrees(np.abs(np.angle(np.exp(2j * (theta[interior] - target)))) / 2)
        assert np.median(err) < 5.0

    def test_constant_image_zero_coherence(self):
        _, coh = estimate_orientation(flat(shape=(128, 128)), 16)
        assert (coh < 0.05).all()

    def test_range_half_open(self):
        rng = np.random.default_rng(5)
        img = random_image(rng, shape=(128, 128))
        theta, _ = estimate_orientation(img, 16)
        assert (theta >= 0).all() and (theta < np.pi).all()

    def test_equivariance_under_image_rotation(self):
        img = grating(shape=(300, 300), period=10.0, orientation=np.pi / 2)
        for phi_deg in (10, 30, 60):
            rotated = ndimage.rotate(img.pixels.astype(float), -phi_deg,
                                     reshape=False, mode="nearest", order=3)
            rimg = FingerprintImage(np.clip(np.rint(rotated), 0, 255).astype(np.uint8),
                                    ppi=500)
            theta, coh = estimate_orientation(rimg, 16)
            # scipy rotates CCW in array coords = CW in xy -> flow at pi/2 + phi
            target = (np.pi / 2 + np.radians(phi_deg)) % np.pi
            sel = _interior(coh > 0.5)
            err = np.degrees(np.abs(np.angle(np.exp(2j * (theta[sel] - target)))) / 2)
            assert np.median(err) < 5.0


# ---------------------------------------------------------------------------
# frequency

class TestFrequency:
    def test_infant_period_at_1900ppi(self):
        img = grating(shape=(512, 512), period=17.0, ppi=1900)
        bs = block_size_for_ppi(1900)
        mask = segment(img, bs)
        theta, _ = estimate_orientation(img, bs)
        freq = estimate_frequency(img, mask, theta, bs)
        sel = _interior(mask) & (freq > 0)
        assert sel.sum() > 10
        rel = np.abs(freq[sel] - 1 / 17.0) * 17.0
        assert np.median(rel) < 0.05

    def test_adult_period_at_500ppi(self):
        img = grating(shape=(256, 256), period=9.5, ppi=500)
        mask = segment(img, 16)
        theta, _ = estimate_orientation(img, 16)
        freq = estimate_frequency(img, mask, theta, 16)
        sel = _interior(mask) & (freq > 0)
        rel = np.abs(freq[sel] - 1 / 9.5) * 9.5
        assert np.median(rel) < 0.05

    def test_background_block_zero(self):
        img = grating(shape=(160, 160), period=10.0)
        px = img.pixels.copy()
        px[:, 80:] = 200
        img = FingerprintImage(px, ppi=500)
        analysis = analyze(img, 16)
        assert (analysis.frequency[~analysis.mask] == 0).all()

    def test_clamp_range(self):
        rng = np.random.default_rng(6)
        img = random_image(rng, shape=(160, 160))
        analysis = analyze(img, 16)
        f = analysis.frequency
        assert ((f == 0) | ((f > 1 / 40.0) & (f < 1 / 3.0))).all()


# ---------------------------------------------------------------------------
# enhancement

def _fg_correlation(a, b, mask):
    x = a[mask].astype(float)
    y = b[mask].astype(float)
    x -= x.mean()
    y -= y.mean()
    denom = np.sqrt((x * x).sum() * (y * y).sum())
    return float((x * y).sum() / denom)


class TestEnhance:
    def test_clean_grating_correlation(self):
        img = grating(shape=(256, 256), period=10.0, orientation=np.pi / 3)
        analysis = analyze(img, 16)
        out = enhance(img, analysis)
        corr = _fg_correlation(out.pixels, img.pixels, analysis.pixel_mask())
        assert corr >= 0.9

    def test_noise_suppression(self):
        clean = grating(shape=(256, 256), period=10.0, orientation=np.pi / 3)
        rng = np.random.default_rng(8)
        noisy_px = clean.pixels.copy()
        flips = rng.random(noisy_px.shape) < 0.20
        noisy_px[flips] = rng.choice([0, 255], size=int(flips.sum()))
        noisy = FingerprintImage(noisy_px, ppi=500)
        analysis = analyze(noisy, 16)
        out = enhance(noisy, analysis)
        fg = analysis.pixel_mask()
        assert (_fg_correlation(out.pixels, clean.pixels, fg)
                > _fg_correlation(noisy.pixels, clean.pixels, fg))

    def test_all_background_mid_gray(self):
        img = flat(shape=(96, 96))
        analysis = analyze(img, 16)
        out = enhance(img, analysis)
        assert (out.pixels == 128).all()

    def test_missing_analysis(self):
        with pytest.raises(errors.MissingAnalysis):
            enhance(flat(), None)


# ---------------------------------------------------------------------------
# skeletonization

class TestBinarizeAndThin:
    def test_thick_bar_single_line(self):
        img = bar(shape=(96, 96), thickness=9)
        skel = binarize_and_thin(img, np.ones((96, 96), bool))
        assert skel.pixels.sum() > 40
        labels, count = ndimage.label(skel.pixels, structure=np.ones((3, 3)))
        assert count == 1
        assert endpoints(skel.pixels) == 2
        # all skeleton pixels close to bar center row
        rows = np.nonzero(skel.pixels)[0]
        assert np.abs(rows - 48).max() <= 2

    def test_empty_mask(self):
        img = bar()
        skel = binarize_and_thin(img, np.zeros(img.pixels.shape, bool))
        assert not skel.pixels.any()

    def test_ring_closed_loop(self):
        img = ring(shape=(128, 128), radius=40, thickness=9)
        skel = binarize_and_thin(img, np.ones((128, 128), bool))
        assert endpoints(skel.pixels) == 0
        labels, count = ndimage.label(skel.pixels, structure=np.ones((3, 3)))
        assert count == 1

    def test_one_pixel_wide_invariant_random(self):
        rng = np.random.default_rng(9)
        for trial in range(10):
            img = grating(shape=(128, 128), period=float(rng.uniform(8, 14)),
                          orientation=float(rng.uniform(0, np.pi)))
            analysis = analyze(img, 16)
            skel = binarize_and_thin(enhance(img, analysis), analysis.pixel_mask())
            interior = neighbor_count(skel.pixels) == 8
            assert not (skel.pixels & interior).any()
