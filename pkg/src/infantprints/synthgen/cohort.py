"""Longitudinal cohort generation: subjects, sessions, manifests."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from joblib import Parallel, delayed

from ..imgproc import CaptureMeta, Finger, FingerprintImage, write_image_file
from .master import synth_master
from .render import Perturbation, capture_timestamp, render_capture

DEFAULT_DROPOUT = 0.34        # fraction of subjects missing from session 3
ENROLLMENT_AGE_RANGE = (7, 84)  # days; 1-12 weeks


@dataclass(frozen=True)
class SessionSpec:
    session: int
    offset_days: int              # nominal days after session 1
    offset_jitter_days: int = 0   # subject-specific uniform jitter
    impressions_per_thumb: int = 2
    perturbation: Perturbation = field(default_factory=Perturbation)


def default_schedule() -> list[SessionSpec]:
    """Three sessions: enrollment pair a couple of days apart, then a
    follow-up about three months later."""
    return [
        SessionSpec(1, 0, 0, 2, Perturbation()),
        SessionSpec(2, 2, 1, 2, Perturbation()),
        SessionSpec(3, 90, 5, 2, Perturbation()),
    ]


@dataclass
class CaptureEntry:
    path: str
    finger: str
    session: int
    impression_index: int
    age_at_capture_days: int
    captured_at: str

    def meta(self, subject_id: str) -> CaptureMeta:
        from datetime import datetime
        return CaptureMeta(subject_id=subject_id, finger=Finger(self.finger),
                           session=self.session,
                           impression_index=self.impression_index,
                           age_at_capture_days=self.age_at_capture_days,
                           captured_at=datetime.fromisoformat(self.captured_at))


@dataclass
class SubjectEntry:
    subject_id: str
    birth_offset: int              # days relative to the capture epoch
    enrollment_age_days: int
    session_offsets: dict          # session -> days after session 1
    captures: list[CaptureEntry]

    def sessions_present(self) -> set[int]:
        return {c.session for c in self.captures}


@dataclass
class CohortManifest:
    master_seed: int
    out_ppi: int
    subjects: list[SubjectEntry]
    root: str = "."

    def subject(self, subject_id: str) -> SubjectEntry:
        for s in self.subjects:
            if s.subject_id == subject_id:
                return s
        raise KeyError(subject_id)


def save_manifest(manifest: CohortManifest, path) -> None:
    doc = {
        "master_seed": manifest.master_seed,
        "out_ppi": manifest.out_ppi,
        "subjects": [
            {
                "subject_id": s.subject_id,
                "birth_offset": s.birth_offset,
                "enrollment_age_days": s.enrollment_age_days,
                "session_offsets": {str(k): v for k, v in s.session_offsets.items()},
                "captures": [asdict(c) for c in s.captures],
            }
            for s in manifest.subjects
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)


def load_manifest(path) -> CohortManifest:
    with open(path) as fh:
        doc = json.load(fh)
    subjects = [
        SubjectEntry(
            subject_id=s["subject_id"],
            birth_offset=int(s["birth_offset"]),
            enrollment_age_days=int(s["enrollment_age_days"]),
            session_offsets={int(k): int(v)
                             for k, v in s["session_offsets"].items()},
            captures=[CaptureEntry(**c) for c in s["captures"]],
        )
        for s in doc["subjects"]
    ]
    return CohortManifest(master_seed=int(doc["master_seed"]),
                          out_ppi=int(doc["out_ppi"]), subjects=subjects,
                          root=str(Path(path).parent))


def _subject_plan(subject_idx: int, master_seed: int, schedule, dropout,
                  age_range) -> dict:
    """Everything random about one subject, derived from stable seeds."""
    ss = np.random.SeedSequence(entropy=(master_seed, subject_idx))
    rng = np.random.default_rng(ss)
    enrollment_age = int(rng.integers(age_range[0], age_range[1] + 1))
    offsets = {}
    acc = 0
    for spec in schedule:
        jitter = int(rng.integers(-spec.offset_jitter_days,
                                  spec.offset_jitter_days + 1)) \
            if spec.offset_jitter_days else 0
        offset = spec.offset_days + jitter
        offset = max(offset, acc + 1) if spec.session > 1 else 0
        offsets[spec.session] = offset
        acc = offset
    drops_out = bool(rng.random() < dropout) and len(schedule) >= 3
    finger_seeds = {
        Finger.LEFT_THUMB: ss.spawn(1)[0],
        Finger.RIGHT_THUMB: ss.spawn(1)[0],
    }
    impression_entropy = int(rng.integers(0, 2 ** 31))
    return {
        "enrollment_age": enrollment_age,
        "offsets": offsets,
        "drops_out": drops_out,
        "finger_seeds": finger_seeds,
        "impression_entropy": impression_entropy,
    }


def _render_subject(subject_idx: int, master_seed: int, schedule, dropout,
                    age_range, out_dir: Path, image_format: str,
                    age_quality_slope: float) -> SubjectEntry:
    subject_id = f"S{subject_idx:04d}"
    plan = _subject_plan(subject_idx, master_seed, schedule, dropout, age_range)
    subject_dir = out_dir / subject_id
    subject_dir.mkdir(parents=True, exist_ok=True)

    masters = {
        finger: synth_master(int(np.random.default_rng(seed).integers(0, 2 ** 31)))
        for finger, seed in plan["finger_seeds"].items()
    }
    captures = []
    for spec in schedule:
        if spec.session == 3 and plan["drops_out"]:
            continue
        offset = plan["offsets"][spec.session]
        age = plan["enrollment_age"] + offset
        for finger in (Finger.LEFT_THUMB, Finger.RIGHT_THUMB):
            for imp in range(1, spec.impressions_per_thumb + 1):
                imp_seed = np.random.SeedSequence(
                    entropy=(plan["impression_entropy"], spec.session,
                             0 if finger == Finger.LEFT_THUMB else 1, imp))
                seed = int(np.random.default_rng(imp_seed).integers(0, 2 ** 31))
                name = f"s{spec.session}_{finger.value}_{imp}.{image_format}"
                stamp = capture_timestamp(offset)
                meta = CaptureMeta(subject_id=subject_id, finger=finger,
                                   session=spec.session, impression_index=imp,
                                   age_at_capture_days=age, captured_at=stamp)
                img = render_capture(masters[finger], age,
                                     spec.perturbation, impression_seed=seed,
                                     meta=meta,
                                     age_quality_slope=age_quality_slope)
                write_image_file(img, subject_dir / name)
                captures.append(CaptureEntry(
                    path=str(Path(subject_id) / name), finger=finger.value,
                    session=spec.session, impression_index=imp,
                    age_at_capture_days=age, captured_at=stamp.isoformat()))
    return SubjectEntry(subject_id=subject_id,
                        birth_offset=-plan["enrollment_age"],
                        enrollment_age_days=plan["enrollment_age"],
                        session_offsets=plan["offsets"], captures=captures)


def gen_cohort(n_subjects: int, out_dir, master_seed: int = 0,
               schedule: Optional[list[SessionSpec]] = None,
               dropout: float = DEFAULT_DROPOUT,
               enrollment_age_range: tuple[int, int] = ENROLLMENT_AGE_RANGE,
               image_format: str = "pgm", n_jobs: int = 1,
               age_quality_slope: float = 1.0) -> CohortManifest:
    """Generate a longitudinal cohort; a pure function of
    (master_seed, schedule, knobs) including the emitted image bytes."""
    if n_subjects < 1:
        raise ValueError("n_subjects must be >= 1")
    schedule = schedule if schedule is not None else default_schedule()
    offsets = [s.offset_days for s in schedule]
    if sorted(offsets) != offsets or len(set(s.session for s in schedule)) != len(schedule):
        raise ValueError("session offsets must be strictly increasing and unique")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    worker = delayed(_render_subject)
    subjects = Parallel(n_jobs=n_jobs)(
        worker(i + 1, master_seed, schedule, dropout, enrollment_age_range,
               out_dir, image_format, age_quality_slope)
        for i in range(n_subjects))

    manifest = CohortManifest(master_seed=master_seed,
                              out_ppi=1900, subjects=list(subjects),
                              root=str(out_dir))
    save_manifest(manifest, out_dir / "manifest.json")
    return manifest


def load_capture(manifest: CohortManifest, entry: CaptureEntry,
                 subject_id: str) -> FingerprintImage:
    from ..imgproc import load_image_file
    return load_image_file(os.path.join(manifest.root, entry.path),
                           declared_ppi=manifest.out_ppi,
                           meta=entry.meta(subject_id))
