"""Minutiae pairing with rigid alignment consensus.

Hypotheses come from local-descriptor agreement; each hypothesis is a rigid
transform anchored on one minutia pair.  Admissible pairs after alignment
tolerate residual nonlinear distortion through fixed distance/angle slack.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..imgproc.ridges import REFERENCE_PPI
from .extract import MinutiaSet

PAIR_DISTANCE_TOL = 12.0            # px at the 500 ppi reference
PAIR_ANGLE_TOL = np.radians(20.0)
DESCRIPTOR_NEIGHBORS = 4
DEFAULT_MAX_HYPOTHESES = 25
DEFAULT_SEED = 7

_DIST2_TOL = PAIR_DISTANCE_TOL ** 2
_COS_TOL = np.cos(PAIR_ANGLE_TOL)
_DESC_DIST_WEIGHT = 1.0 / 10.0      # relative weight of the distance channel


@dataclass
class MatchResult:
    score: float
    matched_pairs: int = 0
    pairs: list = field(default_factory=list)   # (index in a, index in b)
    rotation: float = 0.0
    translation: tuple = (0.0, 0.0)
    empty_input: bool = False

    def __float__(self) -> float:
        return self.score


def _wrap(a):
    return np.mod(a + np.pi, 2 * np.pi) - np.pi


def _descriptors(xy: np.ndarray, direction: np.ndarray, k: int) -> np.ndarray:
    """Rotation-invariant local structure: per minutia, its k nearest
    neighbors as (distance, relative direction, relative bearing), flattened
    so that squared euclidean distance between rows is the pairing cost."""
    n = len(xy)
    d = np.linalg.norm(xy[:, None] - xy[None, :], axis=2)
    np.fill_diagonal(d, np.inf)
    order = np.argsort(d, axis=1, kind="stable")[:, :k]
    rows = np.arange(n)[:, None]
    dist = d[rows, order] * _DESC_DIST_WEIGHT
    rel_dir = _wrap(direction[order] - direction[:, None])
    delta = xy[order] - xy[:, None]
    bearing = _wrap(np.arctan2(delta[..., 1], delta[..., 0]) - direction[:, None])
    feats = np.stack([dist, np.cos(rel_dir), np.sin(rel_dir),
                      np.cos(bearing), np.sin(bearing)], axis=2)
    return feats.reshape(n, k * 5)


def _match_cache(mset: MinutiaSet) -> dict:
    """Scale-normalized columnar data plus a canonical ordering key."""
    cache = mset.arrays()
    if "_m500" not in cache:
        scale = REFERENCE_PPI / mset.source_ppi
        xy = cache["xy"] * scale
        direction = cache["direction"]
        cache["_m500"] = {
            "xy": xy,
            "dir": direction,
            "cos": np.cos(direction),
            "sin": np.sin(direction),
            "key": (len(xy), np.round(xy, 3).tobytes(),
                    np.round(direction, 5).tobytes()),
        }
    return cache["_m500"]


def _cached_descriptors(mset: MinutiaSet, data: dict, k: int) -> np.ndarray:
    cache = mset.arrays()
    key = f"_desc_{k}"
    if key not in cache:
        cache[key] = _descriptors(data["xy"], data["dir"], k)
    return cache[key]


def _greedy_pairs(d2, ang_ok):
    """One-to-one assignment: admissible pairs taken cheapest-first."""
    adm = (d2 <= _DIST2_TOL) & ang_ok
    ii, jj = np.nonzero(adm)
    if len(ii) == 0:
        return [], 0.0
    order = np.lexsort((jj, ii, d2[ii, jj]))
    used_i = np.zeros(d2.shape[0], bool)
    used_j = np.zeros(d2.shape[1], bool)
    pairs, total = [], 0.0
    for t in order:
        i, j = ii[t], jj[t]
        if used_i[i] or used_j[j]:
            continue
        used_i[i] = used_j[j] = True
        pairs.append((int(i), int(j)))
        total += float(np.sqrt(d2[i, j]))
    return pairs, total


def _rigid_fit(p, q):
    """Least-squares rotation+translation taking points p onto q."""
    pc, qc = p.mean(axis=0), q.mean(axis=0)
    dp, dq = p - pc, q - qc
    s = float((dp * dq).sum())
    c = float((dp[:, 0] * dq[:, 1] - dp[:, 1] * dq[:, 0]).sum())
    rot = np.arctan2(c, s)
    cr, sr = np.cos(rot), np.sin(rot)
    tx = qc[0] - (cr * pc[0] - sr * pc[1])
    ty = qc[1] - (sr * pc[0] + cr * pc[1])
    return rot, tx, ty


def match_minutiae(a: MinutiaSet, b: MinutiaSet, seed: int = DEFAULT_SEED,
                   max_hypotheses: int = DEFAULT_MAX_HYPOTHESES) -> MatchResult:
    """Score two minutiae sets in [0, 1].

    Inputs are normalized to the 500 ppi reference scale before matching.
    Exactly symmetric in its arguments and deterministic for fixed inputs.
    Fewer than 2 minutiae on either side yields score 0 with the
    ``empty_input`` flag instead of an exception.
    """
    if len(a) < 2 or len(b) < 2:
        return MatchResult(0.0, empty_input=True)

    da, db = _match_cache(a), _match_cache(b)
    swapped = db["key"] < da["key"]
    if swapped:
        a, b = b, a
        da, db = db, da
    xy_a, dir_a = da["xy"], da["dir"]
    xy_b, dir_b = db["xy"], db["dir"]
    na, nb = len(xy_a), len(xy_b)

    k = min(DESCRIPTOR_NEIGHBORS, na - 1, nb - 1)
    fa = _cached_descriptors(a, da, k)
    fb = _cached_descriptors(b, db, k)
    cost = (np.einsum("ij,ij->i", fa, fa)[:, None]
            + np.einsum("ij,ij->i", fb, fb)[None, :]
            - 2.0 * (fa @ fb.T))

    flat = cost.ravel()
    n_hyp = min(max_hypotheses, flat.size)
    part = np.argpartition(flat, n_hyp - 1)[:n_hyp]
    if flat.size > n_hyp:
        # a few seeded random hypotheses beyond the descriptor leaders guard
        # against locally ambiguous structure
        rng = np.random.default_rng(seed)
        extra = rng.choice(flat.size, size=min(max_hypotheses // 5,
                                               flat.size - n_hyp), replace=False)
        part = np.unique(np.concatenate([part, extra]))
    hyp_i, hyp_j = np.unravel_index(part, cost.shape)

    rot = _wrap(dir_b[hyp_j] - dir_a[hyp_i])
    c, s = np.cos(rot), np.sin(rot)
    rel = xy_a[None, :, :] - xy_a[hyp_i][:, None, :]
    tx = c[:, None] * rel[:, :, 0] - s[:, None] * rel[:, :, 1] \
        + xy_b[hyp_j][:, None, 0]
    ty = s[:, None] * rel[:, :, 0] + c[:, None] * rel[:, :, 1] \
        + xy_b[hyp_j][:, None, 1]
    d2 = ((tx[:, :, None] - xy_b[None, None, :, 0]) ** 2
          + (ty[:, :, None] - xy_b[None, None, :, 1]) ** 2)
    # cos(dir_a + rot - dir_b) without per-hypothesis trig
    cos_ab = da["cos"][:, None] * db["cos"][None, :] \
        + da["sin"][:, None] * db["sin"][None, :]
    sin_ab = da["sin"][:, None] * db["cos"][None, :] \
        - da["cos"][:, None] * db["sin"][None, :]
    ang_ok = (cos_ab[None] * c[:, None, None]
              - sin_ab[None] * s[:, None, None]) >= _COS_TOL
    adm = (d2 <= _DIST2_TOL) & ang_ok

    proxy = adm.any(axis=2).sum(axis=1)
    leaders = np.argsort(-proxy, kind="stable")[:2]

    best = ([], 0.0, 0.0, (0.0, 0.0))  # pairs, sumdist, rot, (tx, ty)
    for h in leaders:
        pairs, total = _greedy_pairs(d2[h], ang_ok[h])
        if (len(pairs), -total) > (len(best[0]), -best[1]):
            best = (pairs, total, float(rot[h]), (float(tx[h, hyp_i[h]]),
                                                  float(ty[h, hyp_i[h]])))

    if len(best[0]) >= 2:
        # refine the rigid transform on the matched pairs and re-pair once
        ia = np.array([p[0] for p in best[0]])
        ib = np.array([p[1] for p in best[0]])
        r2, tx2, ty2 = _rigid_fit(xy_a[ia], xy_b[ib])
        c2, s2 = np.cos(r2), np.sin(r2)
        mx = c2 * xy_a[:, 0] - s2 * xy_a[:, 1] + tx2
        my = s2 * xy_a[:, 0] + c2 * xy_a[:, 1] + ty2
        d2r = ((mx[:, None] - xy_b[None, :, 0]) ** 2
               + (my[:, None] - xy_b[None, :, 1]) ** 2)
        ang2 = (cos_ab * np.cos(r2) - sin_ab * np.sin(r2)) >= _COS_TOL
        pairs2, total2 = _greedy_pairs(d2r, ang2)
        if (len(pairs2), -total2) > (len(best[0]), -best[1]):
            best = (pairs2, total2, float(r2), (float(tx2), float(ty2)))

    pairs, _, rot_best, t_best = best
    if swapped:
        pairs = [(j, i) for i, j in pairs]
    score = len(pairs) / min(na, nb)
    return MatchResult(score=float(min(1.0, score)), matched_pairs=len(pairs),
                       pairs=pairs, rotation=float(rot_best),
                       translation=tuple(map(float, t_best)))
