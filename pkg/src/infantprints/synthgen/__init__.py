"""Synthetic longitudinal infant fingerprint cohorts: master prints,
age/growth-aware capture rendering, and cohort manifests."""

from .master import MasterPrint, Singularity, synth_master
from .render import Perturbation, growth_factor, render_capture
from .cohort import (
    CohortManifest,
    SessionSpec,
    default_schedule,
    gen_cohort,
    load_manifest,
    save_manifest,
)

__all__ = [
    "CohortManifest",
    "MasterPrint",
    "Perturbation",
    "SessionSpec",
    "Singularity",
    "default_schedule",
    "gen_cohort",
    "growth_factor",
    "load_manifest",
    "render_capture",
    "save_manifest",
    "synth_master",
]
