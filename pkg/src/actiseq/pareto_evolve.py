"""Binary classifier training: threshold search over tree responses,
two-objective Pareto ranking (misclassification rate, tree size), the
evolutionary loop, and frontier model selection."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import gp_core
from .errors import ConfigError, DataError
from .gp_core import GpTree, evaluate_batch
from .kernels import fit_threshold_counts, pareto_ranks


@dataclass
class EvolutionConfig:
    population_size: int = 100
    max_evaluations: int = 80_000
    crossover_probability: float = 0.9
    mutation_probability: float = 0.1
    tree_depth: int = 4
    tournament_size: int = 2
    seed: int = 0
    constants_enabled: bool = True
    max_offspring_depth: int | None = None

    def validate(self):
        if self.population_size < 2:
            raise ConfigError("population_size must be >= 2")
        if not 0.0 <= self.crossover_probability <= 1.0:
            raise ConfigError("crossover_probability must be in [0, 1]")
        if not 0.0 <= self.mutation_probability <= 1.0:
            raise ConfigError("mutation_probability must be in [0, 1]")
        if self.crossover_probability + self.mutation_probability > 1.0:
            raise ConfigError("crossover + mutation probability must not exceed 1")
        if self.tree_depth < 1:
            raise ConfigError("tree_depth must be >= 1")
        if self.tournament_size < 1:
            raise ConfigError("tournament_size must be >= 1")
        if self.max_evaluations < 0:
            raise ConfigError("max_evaluations must be >= 0")


@dataclass
class BinaryClassifier:
    """A tree plus its learned decision threshold: predict 1 iff response > threshold."""

    tree: GpTree
    threshold: float
    error: float
    target_class: int = 1


def fit_threshold(tree: GpTree, x: np.ndarray, labels: np.ndarray) -> tuple[float, float]:
    """Search every response value for the threshold minimizing 0/1 error.

    The decision rule is ``predict 1 iff response > threshold``; error ties
    break toward the smallest data index. Returns (threshold, error rate).
    """
    responses = evaluate_batch(tree, x)
    labels = _check_binary_labels(labels, len(responses))
    idx, mis = fit_threshold_counts(responses, labels)
    return float(responses[idx]), mis / len(responses)


def _check_binary_labels(labels, n) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (n,):
        raise DataError("labels must match the number of data rows")
    if n == 0:
        raise DataError("threshold search needs non-empty data")
    if labels.min() < 0 or labels.max() > 1:
        raise DataError("binary labels must be 0 or 1")
    return labels


def dominates(p, q) -> bool:
    """True iff p is no worse than q in both objectives and better in one."""
    return p[0] <= q[0] and p[1] <= q[1] and (p[0] < q[0] or p[1] < q[1])


def pareto_rank(objectives) -> list[int]:
    """Rank 1 is the non-dominated set; rank r the non-dominated set after
    removing ranks below r."""
    if len(objectives) == 0:
        raise DataError("pareto_rank needs at least one objective vector")
    err = np.array([float(o[0]) for o in objectives])
    size = np.array([int(o[1]) for o in objectives], np.int64)
    return [int(r) for r in pareto_ranks(err, size)]


def classify(classifier: BinaryClassifier, x) -> int:
    """1 iff the tree response strictly exceeds the threshold."""
    return int(gp_core.evaluate_tree(classifier.tree, x) > classifier.threshold)


def classify_batch(classifier: BinaryClassifier, x: np.ndarray) -> np.ndarray:
    return (evaluate_batch(classifier.tree, x) > classifier.threshold).astype(np.int64)


def _crowding_distance(err: np.ndarray, size: np.ndarray) -> np.ndarray:
    m = len(err)
    dist = np.zeros(m)
    if m <= 2:
        dist[:] = np.inf
        return dist
    for vals in (err, size.astype(np.float64)):
        order = np.argsort(vals, kind="mergesort")
        dist[order[0]] = dist[order[-1]] = np.inf
        span = vals[order[-1]] - vals[order[0]]
        if span > 0:
            dist[order[1:-1]] += (vals[order[2:]] - vals[order[:-2]]) / span
    return dist


def _select_survivors(ranks, err, size, keep):
    """Fill rank by rank; the boundary rank is cut by crowding distance."""
    order = np.argsort(ranks, kind="mergesort")
    chosen = []
    pos = 0
    while len(chosen) < keep:
        r = ranks[order[pos]]
        block = [int(i) for i in order[pos:] if ranks[i] == r]
        pos += len(block)
        if len(chosen) + len(block) <= keep:
            chosen.extend(block)
        else:
            idx = np.array(block)
            crowd = _crowding_distance(err[idx], size[idx])
            by_crowd = sorted(range(len(block)), key=lambda i: (-crowd[i], i))
            chosen.extend(block[i] for i in by_crowd[: keep - len(chosen)])
    return chosen


class _Evaluated:
    __slots__ = ("tree", "mis", "threshold")

    def __init__(self, tree, mis, threshold):
        self.tree = tree
        self.mis = mis
        self.threshold = threshold


def _evaluate(tree: GpTree, x, labels) -> _Evaluated:
    responses = evaluate_batch(tree, x)
    idx, mis = fit_threshold_counts(responses, labels)
    return _Evaluated(tree, int(mis), float(responses[idx]))


def _tournament(rng, ranks, sizes, k: int) -> int:
    picks = rng.integers(len(ranks), size=k)
    best = [int(picks[0])]
    for p in picks[1:]:
        p = int(p)
        key = (ranks[p], sizes[p])
        bkey = (ranks[best[0]], sizes[best[0]])
        if key < bkey:
            best = [p]
        elif key == bkey and p not in best:
            best.append(p)
    if len(best) == 1:
        return best[0]
    return best[int(rng.integers(len(best)))]


def evolve_binary(
    train: tuple[np.ndarray, np.ndarray],
    validation: tuple[np.ndarray, np.ndarray],
    config: EvolutionConfig,
    log_path=None,
) -> BinaryClassifier:
    """Evolve a binary threshold classifier.

    Objectives per tree are (training 0/1 error, node count). Parents are
    picked by tournament on Pareto rank (ties: smaller tree, then random);
    survivors are the best ranks of parents plus offspring, crowding
    distance cutting the boundary rank. Stops when some tree reaches zero
    training error or the evaluation budget (threshold fits, initial
    population included) is spent. Returns the frontier tree with the
    lowest validation error, ties to the smaller tree.
    """
    config.validate()
    train_x = np.ascontiguousarray(train[0], dtype=np.float64)
    train_y = _check_binary_labels(train[1], train_x.shape[0])
    val_x = np.ascontiguousarray(validation[0], dtype=np.float64)
    val_y = _check_binary_labels(validation[1], val_x.shape[0])
    if train_x.shape[1] != val_x.shape[1]:
        raise DataError("train and validation feature dimensions differ")
    d = train_x.shape[1]
    n_train = train_x.shape[0]

    rng = np.random.default_rng(config.seed)
    trees = gp_core.init_population(
        config.population_size, config.tree_depth, rng, d, config.constants_enabled
    )
    pop = [_evaluate(t, train_x, train_y) for t in trees]
    evals = len(pop)
    log_rows = []

    def ranks_of(members):
        err = np.array([m.mis for m in members], dtype=np.float64)
        size = np.array([m.tree.node_count for m in members], dtype=np.int64)
        return pareto_ranks(err, size), err, size

    def log_generation(gen, members, ranks):
        best = min(m.mis for m in members) / n_train
        frontier = int(np.sum(ranks == 1))
        mean_size = float(np.mean([m.tree.node_count for m in members]))
        log_rows.append((gen, best, frontier, mean_size))

    ranks, err, size = ranks_of(pop)
    log_generation(0, pop, ranks)
    generation = 0

    while evals < config.max_evaluations and min(m.mis for m in pop) > 0:
        generation += 1
        n_off = min(config.population_size, config.max_evaluations - evals)
        offspring = []
        for _ in range(n_off):
            u = rng.random()
            if u < config.crossover_probability:
                a = pop[_tournament(rng, ranks, size, config.tournament_size)].tree
                b = pop[_tournament(rng, ranks, size, config.tournament_size)].tree
                child = gp_core.point_crossover(a, b, rng, config.max_offspring_depth)
            elif u < config.crossover_probability + config.mutation_probability:
                a = pop[_tournament(rng, ranks, size, config.tournament_size)].tree
                child = gp_core.point_mutation(
                    a, config.tree_depth, rng, d, config.constants_enabled
                )
            else:
                child = pop[_tournament(rng, ranks, size, config.tournament_size)].tree
            offspring.append(_evaluate(child, train_x, train_y))
        evals += n_off

        combined = pop + offspring
        ranks_c, err_c, size_c = ranks_of(combined)
        keep = _select_survivors(ranks_c, err_c, size_c, config.population_size)
        pop = [combined[i] for i in keep]
        ranks, err, size = ranks_of(pop)
        log_generation(generation, pop, ranks)

    # pick the frontier member generalizing best
    frontier = [pop[i] for i in range(len(pop)) if ranks[i] == 1]
    best = None
    best_key = None
    for m in frontier:
        val_pred = evaluate_batch(m.tree, val_x) > m.threshold
        val_mis = int(np.sum(val_pred != val_y))
        key = (val_mis, m.tree.node_count)
        if best_key is None or key < best_key:
            best = m
            best_key = key

    if log_path is not None:
        with open(log_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["generation", "best_error", "frontier_size", "mean_size"])
            for row in log_rows:
                w.writerow([row[0], repr(row[1]), row[2], repr(row[3])])

    return BinaryClassifier(best.tree, best.threshold, best.mis / n_train)


def classifier_to_json(classifier: BinaryClassifier) -> dict:
    return {
        "tree": gp_core.tree_to_json(classifier.tree),
        "threshold": classifier.threshold,
        "error": classifier.error,
        "target_class": classifier.target_class,
    }


def classifier_from_json(obj: dict) -> BinaryClassifier:
    try:
        return BinaryClassifier(
            tree=gp_core.tree_from_json(obj["tree"]),
            threshold=float(obj["threshold"]),
            error=float(obj["error"]),
            target_class=int(obj["target_class"]),
        )
    except KeyError as e:
        raise DataError(f"classifier json missing field {e}") from None
