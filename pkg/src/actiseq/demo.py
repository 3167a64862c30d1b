"""Bundled demo participant.

A deterministic generator simulates a year of daily lifelogs for a
routine-bound, low-mobility participant: activity status follows a sticky
Markov chain, the logged movement duration is almost the same every day
(about two hours), and what varies with status is movement intensity, i.e.
cadence (steps per second) and speed. The participant's personalized
guideline thresholds ship with the profile. All numbers here are package
fixtures chosen to give a plausible, learnable workload for offline runs;
labels in the bundled CSV are the noiseless guideline labels of the
generated features.
"""

from __future__ import annotations

import datetime
from importlib import resources
from pathlib import Path

import numpy as np

from .lifelog_data import (
    ActivityRecord,
    LabeledSequence,
    LabelRule,
    label_sequence,
    load_csv,
    truncated_normal,
)

DEMO_SEED = 20240501
DEMO_DAYS = 364
# daily movement duration: ~2 hours, nearly constant
DEMO_DURATION_MEAN = 7200.0
DEMO_DURATION_JITTER = 0.015
# per-status cadence (steps/s) centered mid-band for the profile thresholds
DEMO_CADENCE_CENTERS = (0.104, 0.3125, 0.5208, 0.7292, 0.9375)
DEMO_CADENCE_SIGMA = 0.05
# per-status walking speed (m/s): more active days are slightly faster
DEMO_SPEED_CENTERS = (1.08, 1.16, 1.24, 1.32, 1.40)
DEMO_SPEED_SIGMA = 0.08
# sticky status chain with mostly one-step moves
DEMO_STAY_WEIGHT = 0.7
DEMO_NEIGHBOR_WEIGHT = 0.12
DEMO_FAR_WEIGHT = 0.02
# personalized daily-step thresholds for this low-mobility participant
DEMO_STEP_THRESHOLDS = (1500.0, 3000.0, 4500.0, 6000.0)


def demo_label_rule() -> LabelRule:
    return LabelRule(thresholds=DEMO_STEP_THRESHOLDS)


def _status_transitions(k: int = 5) -> np.ndarray:
    a = np.empty((k, k))
    for i in range(k):
        for j in range(k):
            if i == j:
                a[i, j] = DEMO_STAY_WEIGHT
            elif abs(i - j) == 1:
                a[i, j] = DEMO_NEIGHBOR_WEIGHT
            else:
                a[i, j] = DEMO_FAR_WEIGHT
        a[i] /= a[i].sum()
    return a


def generate_demo_sequence(
    days: int = DEMO_DAYS, seed: int = DEMO_SEED, participant_id: str = "demo"
) -> LabeledSequence:
    rng = np.random.default_rng(seed)
    trans = _status_transitions()
    status = 1  # 0-based chain state
    start = datetime.date(2023, 1, 2)
    records = []
    for day in range(days):
        status = int(rng.choice(5, p=trans[status]))
        duration = DEMO_DURATION_MEAN * (
            1.0 + rng.uniform(-DEMO_DURATION_JITTER, DEMO_DURATION_JITTER)
        )
        r = truncated_normal(rng, DEMO_CADENCE_CENTERS[status], DEMO_CADENCE_SIGMA, 1)[0]
        h = truncated_normal(rng, DEMO_SPEED_CENTERS[status], DEMO_SPEED_SIGMA, 1)[0]
        records.append(
            ActivityRecord(
                start + datetime.timedelta(days=day),
                steps=float(round(duration * r)),
                distance=float(round(duration * h, 1)),
                duration=float(round(duration)),
            )
        )
    sequence = LabeledSequence(records, participant_id=participant_id)
    sequence.labels = label_sequence(sequence, demo_label_rule())
    return sequence


def demo_csv_path() -> Path:
    return Path(str(resources.files("actiseq") / "data" / "demo_participant.csv"))


def load_demo_sequence() -> LabeledSequence:
    return load_csv(demo_csv_path(), participant_id="demo")
