"""Multi-class observation classifier built from one-vs-rest binary
classifiers sorted ascending by training error.

Applying the stages in order and assigning each record to the first stage
that fires is equivalent to the sequential scheme that classifies a
population with stage 1, removes its positives, and continues; records that
fire no stage fall through to the extra class encoded as K+1.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import DataError
from .gp_core import evaluate_batch
from .pareto_evolve import (
    BinaryClassifier,
    EvolutionConfig,
    classifier_from_json,
    classifier_to_json,
    evolve_binary,
)

CASCADE_FORMAT_VERSION = 1


@dataclass
class CascadeClassifier:
    stages: tuple[BinaryClassifier, ...]

    def __post_init__(self):
        k = len(self.stages)
        if k < 2:
            raise DataError("a cascade needs at least two stages")
        targets = sorted(s.target_class for s in self.stages)
        if targets != list(range(1, k + 1)):
            raise DataError("stage target classes must cover 1..K exactly once")
        for a, b in zip(self.stages, self.stages[1:]):
            if a.error > b.error:
                raise DataError("stages must be sorted ascending by error")

    @property
    def class_count(self) -> int:
        return len(self.stages)

    @property
    def observation_count(self) -> int:
        return len(self.stages) + 1

    def classify_sequence(self, x: np.ndarray) -> np.ndarray:
        return classify_sequence(self, x)


def _evolve_stage(args):
    k, train_x, train_bin, val_x, val_bin, config, log_path = args
    clf = evolve_binary((train_x, train_bin), (val_x, val_bin), config, log_path)
    clf.target_class = k
    return clf


def build_cascade(
    train: tuple[np.ndarray, np.ndarray],
    validation: tuple[np.ndarray, np.ndarray],
    config: EvolutionConfig,
    threads: int = 1,
    log_paths: dict[int, object] | None = None,
) -> CascadeClassifier:
    """Evolve one binary classifier per class on the one-vs-rest relabeling
    (stage k uses seed config.seed + k) and sort the stages by training
    error, ties by target class."""
    train_x = np.ascontiguousarray(train[0], dtype=np.float64)
    train_y = np.asarray(train[1], dtype=np.int64)
    val_x = np.ascontiguousarray(validation[0], dtype=np.float64)
    val_y = np.asarray(validation[1], dtype=np.int64)
    if train_y.min() < 1:
        raise DataError("class labels must start at 1")
    k_count = int(train_y.max())
    if k_count < 2:
        raise DataError("multi-class training needs K >= 2")
    present = set(int(v) for v in np.unique(train_y))
    missing = [k for k in range(1, k_count + 1) if k not in present]
    if missing:
        raise DataError(f"training data is missing class(es) {missing}")

    jobs = []
    for k in range(1, k_count + 1):
        jobs.append(
            (
                k,
                train_x,
                (train_y == k).astype(np.int64),
                val_x,
                (val_y == k).astype(np.int64),
                replace(config, seed=config.seed + k),
                (log_paths or {}).get(k),
            )
        )
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            stages = list(pool.map(_evolve_stage, jobs))
    else:
        stages = [_evolve_stage(j) for j in jobs]
    stages.sort(key=lambda s: (s.error, s.target_class))
    return CascadeClassifier(tuple(stages))


def classify_observation(cascade: CascadeClassifier, x) -> int:
    """Observation symbol in 1..K+1: the target class of the first firing
    stage, or K+1 when no stage fires."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DataError("expected a 1-dimensional feature vector")
    return int(classify_sequence(cascade, x[None, :])[0])


def classify_sequence(cascade: CascadeClassifier, x: np.ndarray) -> np.ndarray:
    """Element-wise observation classification preserving record order."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise DataError("feature matrix must be 2-dimensional")
    out = np.full(x.shape[0], cascade.observation_count, dtype=np.int64)
    # later overwrites lose to earlier stages: walk the stages backwards
    for stage in reversed(cascade.stages):
        fired = evaluate_batch(stage.tree, x) > stage.threshold
        out[fired] = stage.target_class
    return out


def cascade_to_json(cascade: CascadeClassifier) -> dict:
    return {
        "version": CASCADE_FORMAT_VERSION,
        "K": cascade.class_count,
        "M": cascade.observation_count,
        "stages": [classifier_to_json(s) for s in cascade.stages],
    }


def cascade_from_json(obj: dict) -> CascadeClassifier:
    if "version" not in obj:
        raise DataError("cascade json missing version field")
    try:
        stages = tuple(classifier_from_json(s) for s in obj["stages"])
    except KeyError as e:
        raise DataError(f"cascade json missing field {e}") from None
    cascade = CascadeClassifier(stages)
    if cascade.class_count != int(obj["K"]) or cascade.observation_count != int(obj["M"]):
        raise DataError("cascade json K/M fields disagree with the stage list")
    return cascade
