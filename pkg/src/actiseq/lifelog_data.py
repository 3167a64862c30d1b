"""Daily lifelog data model: records, guideline-style labeling into ordinal
activity scores, truncated-Gaussian synthesis through the speed and cadence
ratios H = distance/duration and R = steps/duration, noise-perturbed
relabeling, and the CSV interchange format."""

from __future__ import annotations

import csv
import datetime
import logging
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, DataError, SamplingError

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("date", "steps", "distance_m", "duration_s")
FEATURE_NAMES = ("steps", "distance_m", "duration_s")
REJECTION_CAP = 10_000


@dataclass(frozen=True)
class ActivityRecord:
    """One day's aggregated activity: steps, distance in meters, duration in
    seconds of recorded movement."""

    date: datetime.date
    steps: float
    distance: float
    duration: float

    def __post_init__(self):
        if self.steps < 0 or self.distance < 0 or self.duration < 0:
            raise DataError("activity measures must be non-negative")
        if self.duration == 0 and (self.steps > 0 or self.distance > 0):
            raise DataError("duration must be positive when steps or distance are")

    def features(self) -> np.ndarray:
        return np.array([self.steps, self.distance, self.duration])


@dataclass
class LabeledSequence:
    """Time-ordered daily records with optional activity scores."""

    records: list[ActivityRecord]
    labels: list[int] | None = None
    participant_id: str = ""

    def __post_init__(self):
        for a, b in zip(self.records, self.records[1:]):
            if a.date >= b.date:
                raise DataError("record timestamps must be strictly increasing")
        if self.labels is not None and len(self.labels) != len(self.records):
            raise DataError("labels must match the number of records")

    def __len__(self) -> int:
        return len(self.records)

    def features(self) -> np.ndarray:
        if not self.records:
            return np.empty((0, 3))
        return np.array([[r.steps, r.distance, r.duration] for r in self.records])

    def labels_array(self) -> np.ndarray:
        if self.labels is None:
            raise DataError("sequence has no labels")
        return np.asarray(self.labels, dtype=np.int64)


@dataclass(frozen=True)
class LabelRule:
    """Score = 1 + number of thresholds met by the weighted activity index
    weights . (steps, distance, duration); defaults score daily steps."""

    thresholds: tuple[float, ...] = (3000.0, 6000.0, 9000.0, 12000.0)
    weights: tuple[float, float, float] = (1.0, 0.0, 0.0)

    def __post_init__(self):
        if not self.thresholds:
            raise ConfigError("label rule needs at least one threshold")
        if any(a >= b for a, b in zip(self.thresholds, self.thresholds[1:])):
            raise ConfigError("label thresholds must be strictly increasing")
        if len(self.weights) != 3:
            raise ConfigError("label rule needs one weight per feature")

    @property
    def class_count(self) -> int:
        return len(self.thresholds) + 1

    def to_json(self) -> dict:
        return {"thresholds": list(self.thresholds), "weights": list(self.weights)}

    @classmethod
    def from_json(cls, obj: dict) -> "LabelRule":
        return cls(tuple(obj["thresholds"]), tuple(obj["weights"]))


def _scores_for(features: np.ndarray, rule: LabelRule) -> np.ndarray:
    index = features @ np.asarray(rule.weights)
    thr = np.asarray(rule.thresholds)
    return 1 + (index[:, None] >= thr[None, :]).sum(axis=1)


def label_record(record: ActivityRecord, rule: LabelRule) -> int:
    """Deterministic activity score in 1..class_count (thresholds are >=)."""
    return int(_scores_for(record.features()[None, :], rule)[0])


def label_sequence(sequence: LabeledSequence, rule: LabelRule) -> list[int]:
    if not sequence.records:
        return []
    return [int(s) for s in _scores_for(sequence.features(), rule)]


@dataclass
class SynthesisParams:
    """Truncated-Gaussian generator settings: global ratio statistics plus a
    per-class pool of raw duration values to bootstrap from."""

    mu_h: float
    sigma_h: float
    mu_r: float
    sigma_r: float
    duration_pools: dict[int, np.ndarray]
    samples_per_class: int = 200
    seed: int = 0
    fallback_classes: tuple[int, ...] = ()

    def __post_init__(self):
        if self.sigma_h < 0 or self.sigma_r < 0:
            raise ConfigError("sigmas must be non-negative")
        if self.samples_per_class < 1:
            raise ConfigError("samples_per_class must be >= 1")
        for cls, pool in self.duration_pools.items():
            if len(pool) == 0:
                raise DataError(f"class {cls} has an empty duration pool")


@dataclass(frozen=True)
class NoiseConfig:
    """White-noise relabeling level(s); each level scales the per-feature
    standard deviation of the additive perturbation."""

    level: float = 0.0
    grid: tuple[float, ...] = tuple(round(i / 100, 2) for i in range(21))
    seed: int = 0

    def __post_init__(self):
        for lam in (self.level, *self.grid):
            if not 0.0 <= lam <= 0.2:
                raise ConfigError("noise levels must lie in [0, 0.2]")


def truncated_normal(
    rng: np.random.Generator, mu: float, sigma: float, size: int
) -> np.ndarray:
    """Left-truncated at zero by rejection; raises after REJECTION_CAP
    rounds of all-rejected draws."""
    out = np.empty(size)
    pending = np.arange(size)
    for _ in range(REJECTION_CAP):
        draws = rng.normal(mu, sigma, size=len(pending))
        good = draws >= 0.0
        out[pending[good]] = draws[good]
        pending = pending[~good]
        if len(pending) == 0:
            return out
    raise SamplingError(
        f"rejection sampling failed after {REJECTION_CAP} rounds "
        f"(mu={mu}, sigma={sigma})"
    )


def synthesize(params: SynthesisParams) -> LabeledSequence:
    """Balanced synthetic sequence: per class, bootstrap duration from that
    class's pool, draw h and r from left-truncated Gaussians, and emit
    distance = duration * h and steps = duration * r. Each record is
    labeled with its class."""
    classes = sorted(params.duration_pools)
    streams = np.random.SeedSequence(params.seed).spawn(len(classes))
    records = []
    labels = []
    base = datetime.date(2000, 1, 1)
    day = 0
    for cls, stream in zip(classes, streams):
        rng = np.random.default_rng(stream)
        pool = np.asarray(params.duration_pools[cls], dtype=np.float64)
        n = params.samples_per_class
        durations = pool[rng.integers(len(pool), size=n)]
        h = truncated_normal(rng, params.mu_h, params.sigma_h, n)
        r = truncated_normal(rng, params.mu_r, params.sigma_r, n)
        for i in range(n):
            records.append(
                ActivityRecord(
                    base + datetime.timedelta(days=day),
                    steps=durations[i] * r[i],
                    distance=durations[i] * h[i],
                    duration=durations[i],
                )
            )
            labels.append(cls)
            day += 1
    return LabeledSequence(records, labels, participant_id="synthetic")


def estimate_synthesis_params(
    raw: LabeledSequence, class_count: int | None = None
) -> SynthesisParams:
    """Sample mean and unbiased standard deviation of H and R over records
    with positive duration, plus per-class duration pools. Classes absent
    from the raw data fall back to the global pool and are reported in
    ``fallback_classes``."""
    if raw.labels is None:
        raise DataError("synthesis parameter estimation needs labeled data")
    feats = raw.features()
    durations = feats[:, 2]
    usable = durations > 0
    if usable.sum() < 2:
        raise DataError("need at least two records with positive duration")
    h = feats[usable, 1] / durations[usable]
    r = feats[usable, 0] / durations[usable]
    labels = raw.labels_array()
    n_classes = class_count or int(labels.max())
    pools = {}
    fallback = []
    for cls in range(1, n_classes + 1):
        member = durations[labels == cls]
        if len(member) == 0:
            member = durations
            fallback.append(cls)
            logger.warning("class %d absent from raw data; using global duration pool", cls)
        pools[cls] = member.copy()
    return SynthesisParams(
        mu_h=float(h.mean()),
        sigma_h=float(h.std(ddof=1)),
        mu_r=float(r.mean()),
        sigma_r=float(r.std(ddof=1)),
        duration_pools=pools,
        fallback_classes=tuple(fallback),
    )


def perturb_and_relabel(
    sequence: LabeledSequence,
    noise: NoiseConfig,
    rule: LabelRule,
    perturb_features: bool = False,
) -> LabeledSequence:
    """Relabel after adding N(0, (level * sigma_v)^2) noise per feature,
    clipped at zero; sigma_v is that feature's standard deviation over the
    sequence. The returned records are the originals (labels change, the
    features downstream classifiers see do not) unless ``perturb_features``
    is set for sensitivity studies."""
    if not sequence.records:
        raise DataError("cannot perturb an empty sequence")
    feats = sequence.features()
    if len(sequence) >= 2:
        sigma = feats.std(axis=0, ddof=1)
    else:
        sigma = np.zeros(3)
    rng = np.random.default_rng(noise.seed)
    eps = rng.normal(0.0, 1.0, size=feats.shape) * (noise.level * sigma)
    perturbed = np.maximum(feats + eps, 0.0)
    labels = [int(s) for s in _scores_for(perturbed, rule)]
    if not perturb_features:
        return LabeledSequence(list(sequence.records), labels, sequence.participant_id)
    records = []
    for rec, row in zip(sequence.records, perturbed):
        steps, distance, duration = row
        if duration == 0:
            steps = distance = 0.0
        records.append(ActivityRecord(rec.date, steps, distance, duration))
    return LabeledSequence(records, labels, sequence.participant_id)


# ---------------------------------------------------------------------------
# CSV interchange
# ---------------------------------------------------------------------------

def load_csv(path, participant_id: str | None = None) -> LabeledSequence:
    """Read ``date,steps,distance_m,duration_s[,label]``; malformed rows are
    rejected with their row number (header is row 1)."""
    path = str(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, expected a header row") from None
        header = [h.strip() for h in header]
        if tuple(header[:4]) != CSV_COLUMNS or len(header) > 5 or (
            len(header) == 5 and header[4] != "label"
        ):
            raise DataError(
                f"{path}:1: expected columns {','.join(CSV_COLUMNS)}[,label], "
                f"got {','.join(header)}"
            )
        has_label = len(header) == 5
        records = []
        labels = [] if has_label else None
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields")
            try:
                date = datetime.date.fromisoformat(row[0].strip())
            except ValueError:
                raise DataError(f"{path}:{lineno}: bad date {row[0]!r}") from None
            try:
                steps, distance, duration = (float(v) for v in row[1:4])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric measure") from None
            try:
                rec = ActivityRecord(date, steps, distance, duration)
            except DataError as e:
                raise DataError(f"{path}:{lineno}: {e}") from None
            if records and rec.date <= records[-1].date:
                raise DataError(f"{path}:{lineno}: dates must be strictly increasing")
            records.append(rec)
            if has_label:
                try:
                    label = int(row[4])
                except ValueError:
                    raise DataError(f"{path}:{lineno}: non-integer label") from None
                if not 1 <= label <= 5:
                    raise DataError(f"{path}:{lineno}: label {label} outside 1..5")
                labels.append(label)
    if participant_id is None:
        stem = path.rsplit("/", 1)[-1]
        participant_id = stem[:-4] if stem.endswith(".csv") else stem
    return LabeledSequence(records, labels, participant_id)


def save_csv(sequence: LabeledSequence, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = list(CSV_COLUMNS) + (["label"] if sequence.labels is not None else [])
        writer.writerow(header)
        for i, rec in enumerate(sequence.records):
            row = [
                rec.date.isoformat(),
                repr(float(rec.steps)),
                repr(float(rec.distance)),
                repr(float(rec.duration)),
            ]
            if sequence.labels is not None:
                row.append(int(sequence.labels[i]))
            writer.writerow(row)


def with_synthesis_settings(
    params: SynthesisParams, samples_per_class: int, seed: int
) -> SynthesisParams:
    return replace(params, samples_per_class=samples_per_class, seed=seed)
