"""Minutiae extraction from skeletons and the minutiae-pairing matcher."""

from .extract import (
    Minutia,
    MinutiaKind,
    MinutiaSet,
    crossing_numbers,
    extract_minutiae,
    minutiae_from_json,
    minutiae_from_text,
    minutiae_to_json,
    minutiae_to_text,
)
from .match import MatchResult, match_minutiae

__all__ = [
    "MatchResult",
    "Minutia",
    "MinutiaKind",
    "MinutiaSet",
    "crossing_numbers",
    "extract_minutiae",
    "match_minutiae",
    "minutiae_from_json",
    "minutiae_from_text",
    "minutiae_to_json",
    "minutiae_to_text",
]
