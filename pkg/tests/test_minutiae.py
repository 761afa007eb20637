import numpy as np
import pytest
from scipy import ndimage
from skimage.morphology import skeletonize

from infantprints.imgproc.enhance import Skeleton
from infantprints.minutiae import (
    Minutia,
    MinutiaKind,
    MinutiaSet,
    crossing_numbers,
    extract_minutiae,
    match_minutiae,
    minutiae_from_json,
    minutiae_from_text,
    minutiae_to_json,
    minutiae_to_text,
)

RING = [(0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1)]


def cn_oracle(skel):
    """Brute-force crossing-number labels for every skeleton pixel."""
    h, w = skel.shape
    labels = {}
    for y in range(h):
        for x in range(w):
            if not skel[y, x]:
                continue
            vals = []
            for dy, dx in RING:
                ny, nx = y + dy, x + dx
                vals.append(1 if 0 <= ny < h and 0 <= nx < w and skel[ny, nx] else 0)
            cn = sum(abs(vals[i] - vals[(i + 1) % 8]) for i in range(8)) // 2
            if cn == 1:
                labels[(y, x)] = MinutiaKind.ENDING
            elif cn == 3:
                labels[(y, x)] = MinutiaKind.BIFURCATION
    return labels


def random_skeleton(rng, shape=(64, 64)):
    blobs = ndimage.gaussian_filter(rng.random(shape), 3.0) > 0.5
    return skeletonize(blobs)


def random_minutia_set(rng, n=30, dims=(500, 500), min_sep=10.0, ppi=500):
    pts = []
    while len(pts) < n:
        p = rng.uniform(20, np.array(dims) - 20)
        if all(np.hypot(p[0] - q[0], p[1] - q[1]) >= min_sep for q, _ in pts):
            pts.append((p, rng.uniform(0, 2 * np.pi)))
    minutiae = [Minutia(float(p[0]), float(p[1]), float(d),
                        MinutiaKind.ENDING if rng.random() < 0.6
                        else MinutiaKind.BIFURCATION)
                for p, d in pts]
    return MinutiaSet(minutiae, source_ppi=ppi, source_dims=dims)


def transform_set(mset, angle=0.0, shift=(0.0, 0.0)):
    c, s = np.cos(angle), np.sin(angle)
    cx, cy = mset.source_dims[0] / 2, mset.source_dims[1] / 2
    out = []
    for m in mset.minutiae:
        x, y = m.x - cx, m.y - cy
        out.append(Minutia(c * x - s * y + cx + shift[0],
                           s * x + c * y + cy + shift[1],
                           float(np.mod(m.direction + angle, 2 * np.pi)),
                           m.kind, m.quality))
    return MinutiaSet(out, source_ppi=mset.source_ppi, source_dims=mset.source_dims)


# ---------------------------------------------------------------------------
# extraction

class TestExtract:
    def test_straight_segment_two_endings(self):
        sk = np.zeros((40, 60), bool)
        sk[20, 15:45] = True
        mset = extract_minutiae(Skeleton(sk, ppi=500), prune=False)
        endings = [m for m in mset.minutiae if m.kind == MinutiaKind.ENDING]
        assert len(endings) == 2
        assert len(mset) == 2
        d1, d2 = endings[0].direction, endings[1].direction
        spread = np.abs(np.mod(d1 - d2 + np.pi, 2 * np.pi) - np.pi)
        assert np.degrees(np.pi - np.abs(np.pi - spread)) > 170  # antiparallel +-10 deg

    def test_y_shape_bifurcation(self):
        sk = np.zeros((64, 64), bool)
        for t in range(1, 15):
            sk[32, 32 + t] = True          # east branch
            sk[32 - t, 32 - t] = True      # northwest branch
            sk[32 + t, 32 - t] = True      # southwest branch
        sk[32, 32] = True
        mset = extract_minutiae(Skeleton(sk, ppi=500), prune=False)
        kinds = [m.kind for m in mset.minutiae]
        assert kinds.count(MinutiaKind.BIFURCATION) == 1
        assert kinds.count(MinutiaKind.ENDING) == 3

    def test_empty_skeleton(self):
        mset = extract_minutiae(Skeleton(np.zeros((32, 32), bool), ppi=500))
        assert len(mset) == 0

    def test_labels_equal_brute_force_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            sk = random_skeleton(rng)
            mset = extract_minutiae(Skeleton(sk, ppi=500), prune=False)
            got = {(int(m.y), int(m.x)): m.kind for m in mset.minutiae}
            assert got == cn_oracle(sk)

    def test_duplicate_suppression_invariant(self):
        rng = np.random.default_rng(12)
        for _ in range(10):
            sk = random_skeleton(rng)
            mset = extract_minutiae(Skeleton(sk, ppi=500), prune=True)
            pts = np.array([[m.x, m.y] for m in mset.minutiae])
            if len(pts) < 2:
                continue
            d = np.linalg.norm(pts[:, None] - pts[None, :], axis=2)
            np.fill_diagonal(d, np.inf)
            assert d.min() >= 4.0

    def test_crossing_number_range(self):
        rng = np.random.default_rng(13)
        sk = random_skeleton(rng)
        cn = crossing_numbers(sk)
        assert cn[sk].max() <= 4 and cn.min() >= 0


# ---------------------------------------------------------------------------
# matching

class TestMatch:
    def test_self_match(self):
        rng = np.random.default_rng(21)
        a = random_minutia_set(rng, n=20)
        r = match_minutiae(a, a)
        assert r.score >= 0.99
        assert not r.empty_input

    def test_translated_rotated(self):
        rng = np.random.default_rng(22)
        a = random_minutia_set(rng, n=25)
        b = transform_set(a, angle=np.radians(10), shift=(10, 5))
        self_score = match_minutiae(a, a).score
        assert abs(match_minutiae(a, b).score - self_score) <= 0.05

    def test_rigid_motion_invariance(self):
        rng = np.random.default_rng(23)
        a = random_minutia_set(rng, n=20)
        base = match_minutiae(a, a).score
        for angle, shift in [(np.radians(30), (30, 0)), (np.radians(-20), (0, -30)),
                             (np.radians(15), (-20, 12))]:
            b = transform_set(a, angle=angle, shift=shift)
            assert match_minutiae(a, b).score >= base - 0.05

    def test_impostor_monte_carlo(self):
        rng = np.random.default_rng(24)
        low = 0
        trials = 1000
        for _ in range(trials):
            a = random_minutia_set(rng, n=30)
            b = random_minutia_set(rng, n=30)
            if match_minutiae(a, b).score <= 0.2:
                low += 1
        assert low / trials >= 0.95

    def test_exact_symmetry(self):
        rng = np.random.default_rng(25)
        for _ in range(10):
            a = random_minutia_set(rng, n=int(rng.integers(5, 30)))
            b = random_minutia_set(rng, n=int(rng.integers(5, 30)))
            assert match_minutiae(a, b).score == match_minutiae(b, a).score

    def test_score_bounds(self):
        rng = np.random.default_rng(26)
        for _ in range(20):
            a = random_minutia_set(rng, n=int(rng.integers(2, 40)))
            b = random_minutia_set(rng, n=int(rng.integers(2, 40)))
            assert 0.0 <= match_minutiae(a, b).score <= 1.0

    def test_small_sets_flagged_not_raised(self):
        rng = np.random.default_rng(27)
        a = random_minutia_set(rng, n=1)
        b = random_minutia_set(rng, n=10)
        r = match_minutiae(a, b)
        assert r.score == 0.0 and r.empty_input

    def test_cross_resolution_normalization(self):
        rng = np.random.default_rng(28)
        a = random_minutia_set(rng, n=20, ppi=500)
        scaled = MinutiaSet(
            [Minutia(m.x * 3.8, m.y * 3.8, m.direction, m.kind, m.quality)
             for m in a.minutiae],
            source_ppi=1900, source_dims=(1900, 1900))
        assert match_minutiae(a, scaled).score >= 0.95


# ---------------------------------------------------------------------------
# formats

class TestFormats:
    def test_text_round_trip(self):
        rng = np.random.default_rng(31)
        a = random_minutia_set(rng, n=12)
        again = minutiae_from_text(minutiae_to_text(a))
        assert again.source_ppi == a.source_ppi
        assert len(again) == len(a)
        for m1, m2 in zip(a.minutiae, again.minutiae):
            assert m1.kind == m2.kind
            assert abs(m1.x - m2.x) < 0.01 and abs(m1.y - m2.y) < 0.01
            assert abs(np.mod(m1.direction - m2.direction + np.pi, 2 * np.pi)
                       - np.pi) < 0.001

    def test_json_round_trip(self):
        rng = np.random.default_rng(32)
        a = random_minutia_set(rng, n=8)
        again = minutiae_from_json(minutiae_to_json(a))
        assert len(again) == len(a)
        assert again.source_dims == a.source_dims
