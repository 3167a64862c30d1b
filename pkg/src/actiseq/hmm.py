"""First-order hidden Markov model over K latent activity states and M
observation symbols: counting-based estimation from fully labeled sequences
and Viterbi decoding. States and observations are 1-based everywhere in the
public API."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .kernels import viterbi_path

HMM_FORMAT_VERSION = 1
STOCHASTIC_TOL = 1e-12


@dataclass(eq=False)
class HmmModel:
    pi: np.ndarray
    a: np.ndarray
    b: np.ndarray
    alpha: float = 0.0
    undefined_transition_states: tuple[int, ...] = ()
    undefined_emission_states: tuple[int, ...] = ()
    _logs: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        self.pi = np.asarray(self.pi, dtype=np.float64)
        self.a = np.asarray(self.a, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        k = self.pi.shape[0]
        if self.a.shape != (k, k):
            raise DataError("transition matrix must be K x K")
        if self.b.ndim != 2 or self.b.shape[0] != k:
            raise DataError("emission matrix must be K x M")
        if (self.pi < 0).any() or (self.a < 0).any() or (self.b < 0).any():
            raise DataError("probabilities must be non-negative")

    @property
    def n_states(self) -> int:
        return self.pi.shape[0]

    @property
    def n_observations(self) -> int:
        return self.b.shape[1]

    def log_params(self):
        if self._logs is None:
            with np.errstate(divide="ignore"):
                self._logs = (np.log(self.pi), np.log(self.a), np.log(self.b))
        return self._logs


@dataclass
class ViterbiTrellis:
    """Log-probability lattice and 1-based backpointers of a decode."""

    delta: np.ndarray
    backpointer: np.ndarray


def _check_sequence(values, upper, what) -> np.ndarray:
    arr = np.asarray(values, dtype=np.int64)
    if arr.ndim != 1:
        raise DataError(f"{what} must be a 1-dimensional sequence")
    if arr.size and (arr.min() < 1 or arr.max() > upper):
        raise DataError(f"{what} values must lie in 1..{upper}")
    return arr


def estimate_counting(
    sequences,
    n_states: int,
    n_observations: int,
    alpha: float = 1e-3,
    initial_pi: bool = False,
) -> HmmModel:
    """Estimate (pi, A, B) by occurrence counting over labeled sequences.

    ``sequences`` is an iterable of (states, observations) pairs of equal
    length; transitions are counted within each sequence only. pi counts
    state occurrences over all positions (set ``initial_pi`` to count only
    sequence-initial states instead). ``alpha`` is added to every count so
    the stochastic-row invariants hold even with unseen states; with
    alpha=0, states lacking outgoing transitions or emissions produce
    all-zero rows reported in the model's ``undefined_*`` fields.
    """
    if alpha < 0:
        raise DataError("smoothing alpha must be >= 0")
    k, m = n_states, n_observations
    state_counts = np.zeros(k)
    initial_counts = np.zeros(k)
    trans = np.zeros((k, k))
    emit = np.zeros((k, m))
    total = 0
    n_seqs = 0
    for states, obs in sequences:
        z = _check_sequence(states, k, "state")
        o = _check_sequence(obs, m, "observation")
        if z.shape != o.shape:
            raise DataError("state and observation sequences must have equal length")
        if z.size == 0:
            continue
        n_seqs += 1
        total += z.size
        state_counts += np.bincount(z - 1, minlength=k)
        initial_counts[z[0] - 1] += 1
        if z.size > 1:
            trans += np.bincount((z[:-1] - 1) * k + (z[1:] - 1), minlength=k * k).reshape(k, k)
        emit += np.bincount((z - 1) * m + (o - 1), minlength=k * m).reshape(k, m)
    if total == 0:
        raise DataError("estimation needs at least one labeled position")
    if alpha == 0 and trans.sum() == 0:
        raise DataError("estimation with alpha=0 needs at least one transition")

    if initial_pi:
        pi = (initial_counts + alpha) / (n_seqs + k * alpha)
    else:
        pi = (state_counts + alpha) / (total + k * alpha)

    def normalize(counts, width):
        rows = counts.sum(axis=1)
        undefined = []
        out = np.empty_like(counts)
        for i in range(k):
            denom = rows[i] + width * alpha
            if denom > 0:
                out[i] = (counts[i] + alpha) / denom
            else:
                out[i] = 0.0
                undefined.append(i + 1)
        return out, tuple(undefined)

    a, undef_a = normalize(trans, k)
    b, undef_b = normalize(emit, m)
    return HmmModel(pi, a, b, alpha, undef_a, undef_b)


def sequence_log_likelihood(model: HmmModel, states, observations) -> float:
    """Log of pi[z1] * prod A[z_{n-1}, z_n] * prod B[z_n, o_n]; -inf when
    any factor is zero."""
    z = _check_sequence(states, model.n_states, "state")
    o = _check_sequence(observations, model.n_observations, "observation")
    if z.shape != o.shape:
        raise DataError("state and observation sequences must have equal length")
    if z.size == 0:
        raise DataError("log-likelihood needs at least one position")
    log_pi, log_a, log_b = model.log_params()
    total = log_pi[z[0] - 1] + log_b[z - 1, o - 1].sum()
    if z.size > 1:
        total += log_a[z[:-1] - 1, z[1:] - 1].sum()
    return float(total)


def viterbi_decode(model: HmmModel, observations) -> np.ndarray:
    """Most probable 1-based state sequence for the observations, computed
    in the log domain; argmax ties go to the smallest state index."""
    o = _check_sequence(observations, model.n_observations, "observation")
    if o.size == 0:
        raise DataError("viterbi decoding needs at least one observation")
    log_pi, log_a, log_b = model.log_params()
    path, _, _ = viterbi_path(log_pi, log_a, log_b, o - 1)
    return path + 1


def viterbi_trellis(model: HmmModel, observations) -> ViterbiTrellis:
    o = _check_sequence(observations, model.n_observations, "observation")
    if o.size == 0:
        raise DataError("viterbi decoding needs at least one observation")
    log_pi, log_a, log_b = model.log_params()
    _, delta, back = viterbi_path(log_pi, log_a, log_b, o - 1)
    return ViterbiTrellis(delta, back + 1)


def predict_status(model: HmmModel, classifier, records: np.ndarray) -> np.ndarray:
    """Stage-two entry point: classify the records into observations, then
    decode the most probable status sequence."""
    if classifier.observation_count != model.n_observations:
        raise DataError(
            f"classifier emits {classifier.observation_count} symbols but the "
            f"model expects {model.n_observations}"
        )
    observations = classifier.classify_sequence(np.asarray(records, dtype=np.float64))
    return viterbi_decode(model, observations)


def hmm_to_json(model: HmmModel) -> dict:
    return {
        "version": HMM_FORMAT_VERSION,
        "K": model.n_states,
        "M": model.n_observations,
        "pi": model.pi.tolist(),
        "A": model.a.tolist(),
        "B": model.b.tolist(),
        "alpha": model.alpha,
    }


def hmm_from_json(obj: dict) -> HmmModel:
    if "version" not in obj:
        raise DataError("hmm json missing version field")
    try:
        model = HmmModel(
            np.array(obj["pi"], dtype=np.float64),
            np.array(obj["A"], dtype=np.float64),
            np.array(obj["B"], dtype=np.float64),
            alpha=float(obj["alpha"]),
        )
    except KeyError as e:
        raise DataError(f"hmm json missing field {e}") from None
    if model.n_states != int(obj["K"]) or model.n_observations != int(obj["M"]):
        raise DataError("hmm json K/M fields disagree with the matrices")
    return model
