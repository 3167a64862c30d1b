"""Experimental protocol: stratified half split for stage-one training,
contiguous k-fold cross-validation of the HMM stage, the noise-level grid,
and model ranking reports."""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .cascade import build_cascade
from .errors import ConfigError, DataError
from .hmm import estimate_counting, viterbi_decode
from .lifelog_data import (
    LabeledSequence,
    LabelRule,
    NoiseConfig,
    estimate_synthesis_params,
    perturb_and_relabel,
    synthesize,
    with_synthesis_settings,
)
from .pareto_evolve import EvolutionConfig

logger = logging.getLogger(__name__)

GP_MODEL = "gp-cascade-hmm"
CENTROID_MODEL = "centroid-hmm"

# spawn-key tags for deriving independent seed streams per grid cell
_TAG_NOISE, _TAG_SYNTH, _TAG_SYNTH_NOISE, _TAG_SPLIT, _TAG_EVOLVE = range(1, 6)


def derive_seed(master: int, *key: int) -> int:
    return int(np.random.SeedSequence([int(master), *key]).generate_state(1, np.uint64)[0])


@dataclass
class ExperimentConfig:
    evolution: EvolutionConfig = field(default_factory=EvolutionConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    rule: LabelRule = field(default_factory=LabelRule)
    folds: int = 10
    split_fraction: float = 0.5
    samples_per_class: int = 200
    hmm_alpha: float = 1e-3
    seed: int = 42
    threads: int = 1
    include_baseline: bool = False
    out_dir: str | None = None

    def validate(self):
        self.evolution.validate()
        if self.folds < 2:
            raise ConfigError("folds must be >= 2")
        if not 0.0 < self.split_fraction < 1.0:
            raise ConfigError("split_fraction must lie in (0, 1)")
        if self.samples_per_class < 1:
            raise ConfigError("samples_per_class must be >= 1")
        if self.hmm_alpha < 0:
            raise ConfigError("hmm_alpha must be >= 0")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")


@dataclass
class DayPrediction:
    date: object
    fold: int
    label: int
    observation: int
    predicted: int


@dataclass
class CellResult:
    """One (participant, noise level) grid cell."""

    participant: str
    noise_level: float
    fold_errors: list[float]
    days: list[DayPrediction]

    @property
    def mean_error(self) -> float:
        return float(np.mean(self.fold_errors))


@dataclass
class EvaluationReport:
    model: str
    cells: list[CellResult] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def grid(self) -> list[tuple[str, float]]:
        return [(c.participant, c.noise_level) for c in self.cells]

    def cell(self, participant: str, noise_level: float) -> CellResult:
        for c in self.cells:
            if c.participant == participant and c.noise_level == noise_level:
                return c
        raise DataError(f"no cell for ({participant}, {noise_level})")


# ---------------------------------------------------------------------------
# splitting and cross-validation
# ---------------------------------------------------------------------------

def split_half(
    sequence: LabeledSequence, seed: int, fraction: float = 0.5
) -> tuple[LabeledSequence, LabeledSequence]:
    """Stratified-by-label random split; the training side receives the
    ceiling of each label group, so odd groups favour training. Labels with
    a single record go to training with a warning."""
    if len(sequence) < 2:
        raise DataError("splitting needs at least two records")
    labels = sequence.labels_array()
    rng = np.random.default_rng(seed)
    train_idx = []
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        if len(members) == 1:
            logger.warning(
                "label %d has a single record; assigning it to training", int(cls)
            )
        take = int(np.ceil(len(members) * fraction))
        picked = rng.permutation(members)[:take]
        train_idx.extend(int(i) for i in picked)
    train_mask = np.zeros(len(sequence), dtype=bool)
    train_mask[train_idx] = True

    def subset(mask):
        recs = [r for r, m in zip(sequence.records, mask) if m]
        labs = [int(l) for l, m in zip(sequence.labels, mask) if m]
        return LabeledSequence(recs, labs, sequence.participant_id)

    return subset(train_mask), subset(~train_mask)


def as_xy(sequence: LabeledSequence) -> tuple[np.ndarray, np.ndarray]:
    return sequence.features(), sequence.labels_array()


@dataclass
class CvResult:
    fold_errors: list[float]
    days: list[DayPrediction]

    @property
    def mean_error(self) -> float:
        return float(np.mean(self.fold_errors))


def fold_bounds(n: int, folds: int) -> list[tuple[int, int]]:
    return [(i * n // folds, (i + 1) * n // folds) for i in range(folds)]


def _contiguous_runs(indices: np.ndarray) -> list[tuple[int, int]]:
    runs = []
    start = prev = int(indices[0])
    for i in indices[1:]:
        i = int(i)
        if i == prev + 1:
            prev = i
            continue
        runs.append((start, prev + 1))
        start = prev = i
    runs.append((start, prev + 1))
    return runs


def cross_validate_hmm(
    real: LabeledSequence,
    classifier,
    folds: int,
    alpha: float = 1e-3,
    shuffle_seed: int | None = None,
) -> CvResult:
    """Cross-validation of the decoding stage over contiguous time blocks.

    For each held-out block the model is counted from the remaining blocks
    (each one kept as its own sequence, so no transition crosses a cut) and
    the block is decoded. Fold error is the fraction of days whose decoded
    status differs from the label. ``shuffle_seed`` switches to the
    shuffled-day sensitivity mode: fold membership is a seeded permutation,
    training transitions are counted only within maximal contiguous runs of
    retained days, and each held-out set is decoded in time order.
    """
    n = len(real)
    if n < folds:
        raise DataError(f"sequence of {n} days cannot be cut into {folds} folds")
    labels = real.labels_array()
    k = classifier.class_count
    m = classifier.observation_count
    if labels.max() > k:
        raise DataError("sequence labels exceed the classifier's class count")
    observations = classifier.classify_sequence(real.features())

    if shuffle_seed is None:
        membership = [np.arange(lo, hi) for lo, hi in fold_bounds(n, folds)]
    else:
        perm = np.random.default_rng(shuffle_seed).permutation(n)
        membership = [
            np.sort(perm[lo:hi]) for lo, hi in fold_bounds(n, folds)
        ]

    fold_errors = []
    days = []
    for fold, held in enumerate(membership):
        held_mask = np.zeros(n, dtype=bool)
        held_mask[held] = True
        train_pairs = [
            (labels[a:b], observations[a:b])
            for a, b in _contiguous_runs(np.flatnonzero(~held_mask))
        ]
        model = estimate_counting(train_pairs, k, m, alpha=alpha)
        predicted = viterbi_decode(model, observations[held])
        matches = int(np.sum(predicted == labels[held]))
        fold_errors.append(1.0 - matches / len(held))
        for j, i in enumerate(held):
            days.append(
                DayPrediction(
                    date=real.records[int(i)].date,
                    fold=fold,
                    label=int(labels[i]),
                    observation=int(observations[i]),
                    predicted=int(predicted[j]),
                )
            )
    return CvResult(fold_errors, days)


# ---------------------------------------------------------------------------
# nearest-centroid baseline (harness smoke-testing only)
# ---------------------------------------------------------------------------

@dataclass
class CentroidClassifier:
    """Trivial stage-one stand-in: observation = class of the nearest
    centroid. Emits the same symbol alphabet as a cascade (the fall-through
    symbol K+1 is simply never produced)."""

    centroids: np.ndarray

    @property
    def class_count(self) -> int:
        return self.centroids.shape[0]

    @property
    def observation_count(self) -> int:
        return self.centroids.shape[0] + 1

    def classify_sequence(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        d2 = ((x[:, None, :] - self.centroids[None, :, :]) ** 2).sum(axis=2)
        return np.argmin(d2, axis=1) + 1


def train_centroid(train: tuple[np.ndarray, np.ndarray]) -> CentroidClassifier:
    x, y = np.asarray(train[0], dtype=np.float64), np.asarray(train[1], dtype=np.int64)
    k = int(y.max())
    cents = np.empty((k, x.shape[1]))
    for cls in range(1, k + 1):
        members = x[y == cls]
        if len(members) == 0:
            raise DataError(f"centroid training is missing class {cls}")
        cents[cls - 1] = members.mean(axis=0)
    return CentroidClassifier(cents)


# ---------------------------------------------------------------------------
# the noise grid
# ---------------------------------------------------------------------------

def _run_cell(args):
    config, raw, lam, lam_idx, participant_seed = args
    rule = config.rule
    relabeled = perturb_and_relabel(
        raw, NoiseConfig(level=lam, seed=derive_seed(participant_seed, _TAG_NOISE, lam_idx)), rule
    )
    params = estimate_synthesis_params(relabeled, class_count=rule.class_count)
    params = with_synthesis_settings(
        params, config.samples_per_class, derive_seed(participant_seed, _TAG_SYNTH, lam_idx)
    )
    synthetic = synthesize(params)
    synthetic = perturb_and_relabel(
        synthetic,
        NoiseConfig(level=lam, seed=derive_seed(participant_seed, _TAG_SYNTH_NOISE, lam_idx)),
        rule,
    )
    train, val = split_half(
        synthetic, derive_seed(participant_seed, _TAG_SPLIT, lam_idx), config.split_fraction
    )
    evo = replace(config.evolution, seed=derive_seed(participant_seed, _TAG_EVOLVE, lam_idx))
    warnings = [
        f"{raw.participant_id}/lambda={lam}: class {c} missing, global duration pool used"
        for c in params.fallback_classes
    ]
    results = {}
    gp = build_cascade(as_xy(train), as_xy(val), evo)
    results[GP_MODEL] = cross_validate_hmm(relabeled, gp, config.folds, config.hmm_alpha)
    if config.include_baseline:
        centroid = train_centroid(as_xy(train))
        results[CENTROID_MODEL] = cross_validate_hmm(
            relabeled, centroid, config.folds, config.hmm_alpha
        )
    return lam, results, warnings


def run_noise_grid(
    config: ExperimentConfig, raw: LabeledSequence, participant_seed: int | None = None
) -> dict[str, EvaluationReport]:
    """Train and evaluate one pipeline per noise level.

    Per level: relabel the real data under that noise, synthesize balanced
    training data from it, relabel the synthetic data under the same noise,
    train the cascade on a stratified half split, and cross-validate the
    decoding stage on the relabeled real data. Deterministic given the
    config seed. Returns one report per model name.
    """
    config.validate()
    if participant_seed is None:
        participant_seed = config.seed
    jobs = [
        (config, raw, lam, i, participant_seed)
        for i, lam in enumerate(config.noise.grid)
    ]
    if config.threads > 1:
        with ProcessPoolExecutor(max_workers=config.threads) as pool:
            outcomes = list(pool.map(_run_cell, jobs))
    else:
        outcomes = [_run_cell(j) for j in jobs]
    reports: dict[str, EvaluationReport] = {}
    for lam, results, cell_warnings in outcomes:
        for model, cv in results.items():
            report = reports.setdefault(model, EvaluationReport(model))
            report.cells.append(
                CellResult(raw.participant_id, lam, cv.fold_errors, cv.days)
            )
            report.warnings.extend(cell_warnings)
    return reports


# ---------------------------------------------------------------------------
# rankings
# ---------------------------------------------------------------------------

@dataclass
class RankingRow:
    participant: str
    noise_level: float
    model: str
    mean_error: float
    rank: int


@dataclass
class RankingTable:
    rows: list[RankingRow]
    mean_rank: dict[str, float]
    mean_error: dict[str, float]
    rank_cdf: dict[str, list[tuple[float, float]]]


def rank_models(reports: dict[str, EvaluationReport]) -> RankingTable:
    """Rank models per grid cell, 1 = lowest error. Ties share the minimum
    rank; output rows order ties by model name. Appends per-model averages
    and, for external plotting, the cumulative distribution of each model's
    per-participant average rank."""
    if not reports:
        raise DataError("rank_models needs at least one report")
    models = sorted(reports)
    grid = reports[models[0]].grid()
    for name in models[1:]:
        if reports[name].grid() != grid:
            raise DataError(f"report {name!r} covers a different grid")
    rows = []
    per_model_ranks = {m: [] for m in models}
    participants = list(dict.fromkeys(p for p, _ in grid))
    per_participant_ranks = {m: {p: [] for p in participants} for m in models}
    for participant, lam in grid:
        errors = {m: reports[m].cell(participant, lam).mean_error for m in models}
        for m in models:
            rank = 1 + sum(1 for o in models if errors[o] < errors[m])
            rows.append(RankingRow(participant, lam, m, errors[m], rank))
            per_model_ranks[m].append(rank)
            per_participant_ranks[m][participant].append(rank)
    mean_rank = {m: float(np.mean(per_model_ranks[m])) for m in models}
    mean_error = {
        m: float(np.mean([r.mean_error for r in rows if r.model == m])) for m in models
    }
    rank_cdf = {}
    for m in models:
        averages = np.sort(
            [np.mean(per_participant_ranks[m][p]) for p in participants]
        )
        rank_cdf[m] = [
            (float(v), float(np.mean(averages <= v))) for v in np.unique(averages)
        ]
    return RankingTable(rows, mean_rank, mean_error, rank_cdf)


# ---------------------------------------------------------------------------
# CSV report writers
# ---------------------------------------------------------------------------

def write_report_csv(path, reports: dict[str, EvaluationReport]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["participant", "lambda", "model", "fold", "error"])
        for model in sorted(reports):
            for cell in reports[model].cells:
                for fold, err in enumerate(cell.fold_errors):
                    w.writerow(
                        [cell.participant, repr(cell.noise_level), model, fold, repr(err)]
                    )


def write_predictions_csv(path, reports: dict[str, EvaluationReport]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["participant", "lambda", "model", "fold", "date", "label", "observation", "predicted"]
        )
        for model in sorted(reports):
            for cell in reports[model].cells:
                for day in cell.days:
                    w.writerow(
                        [
                            cell.participant,
                            repr(cell.noise_level),
                            model,
                            day.fold,
                            day.date.isoformat(),
                            day.label,
                            day.observation,
                            day.predicted,
                        ]
                    )


def write_summary_csv(path, table: RankingTable) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["participant", "lambda", "model", "mean_error", "rank"])
        for row in table.rows:
            w.writerow(
                [row.participant, repr(row.noise_level), row.model, repr(row.mean_error), row.rank]
            )


def write_rankings_csv(path, table: RankingTable) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["model", "mean_rank", "avg_rank", "cum_prob"])
        for model in sorted(table.mean_rank):
            for avg_rank, prob in table.rank_cdf[model]:
                w.writerow([model, repr(table.mean_rank[model]), repr(avg_rank), repr(prob)])
