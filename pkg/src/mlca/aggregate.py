"""Post-fit aggregation: per-group class profiles and modal assignments."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .core import Posteriors
from .errors import DataError


@dataclass(frozen=True)
class GroupProfile:
    label: str
    proportions: np.ndarray  # length T, mean posterior per class
    n: int

    def __post_init__(self):
        if abs(float(np.sum(self.proportions)) - 1.0) > 1e-8:
            raise ValueError("group profile must sum to one")


def group_class_proportions(px, unit_labels, label) -> GroupProfile:
    """Average the unit posteriors ``px`` over the rows whose label is ``label``."""
    px = np.asarray(px, dtype=float)
    unit_labels = np.asarray(unit_labels, dtype=object)
    if unit_labels.shape[0] != px.shape[0]:
        raise ValueError("one label per posterior row is required")
    mask = unit_labels == label
    if not mask.any():
        raise DataError(f"unknown group label {label!r}")
    return GroupProfile(str(label), px[mask].mean(axis=0), int(mask.sum()))


def group_profiles(px, unit_labels) -> list[GroupProfile]:
    """Profiles for every label, in order of first appearance."""
    seen = dict.fromkeys(np.asarray(unit_labels, dtype=object).tolist())
    return [group_class_proportions(px, unit_labels, lab) for lab in seen]


def profiles_to_csv(profiles) -> str:
    T = len(profiles[0].proportions) if profiles else 0
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["group", "n"] + [f"C{t + 1}" for t in range(T)])
    for prof in profiles:
        writer.writerow([prof.label, prof.n] + [repr(float(v)) for v in prof.proportions])
    return buf.getvalue()


def modal_assignments(posteriors, level="low") -> np.ndarray:
    """Most probable class per row (0-based); ties go to the smallest index.

    Accepts a probability matrix or a ``Posteriors`` object, in which case
    ``level`` picks units (``"low"``) or groups (``"high"``).
    """
    if isinstance(posteriors, Posteriors):
        if level not in ("low", "high"):
            raise ValueError("level must be 'low' or 'high'")
        posteriors = posteriors.px if level == "low" else posteriors.pw
    P = np.atleast_2d(np.asarray(posteriors, dtype=float))
    return np.argmax(P, axis=1)
