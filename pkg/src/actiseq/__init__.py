"""Physical-activity status prediction from daily lifelogs.

Stage one evolves expression-tree classifiers under two objectives
(misclassification rate and tree size) and chains them into an error-sorted
cascade that maps each day's (steps, distance, duration) to a discrete
observation symbol. Stage two estimates a first-order hidden Markov model
from labeled sequences by occurrence counting and Viterbi-decodes the most
probable activity-status sequence.
"""

__version__ = "0.1.0"

from .cascade import (
    CascadeClassifier,
    build_cascade,
    cascade_from_json,
    cascade_to_json,
    classify_observation,
    classify_sequence,
)
from .errors import ActiseqError, ConfigError, DataError, SamplingError
from .eval_harness import (
    CentroidClassifier,
    EvaluationReport,
    ExperimentConfig,
    cross_validate_hmm,
    rank_models,
    run_noise_grid,
    split_half,
    train_centroid,
)
from .gp_core import (
    GpTree,
    evaluate_batch,
    evaluate_tree,
    generate_tree,
    init_population,
    point_crossover,
    point_mutation,
    tree_from_json,
    tree_from_text,
    tree_to_json,
    tree_to_text,
)
from .hmm import (
    HmmModel,
    ViterbiTrellis,
    estimate_counting,
    hmm_from_json,
    hmm_to_json,
    predict_status,
    sequence_log_likelihood,
    viterbi_decode,
    viterbi_trellis,
)
from .lifelog_data import (
    ActivityRecord,
    LabeledSequence,
    LabelRule,
    NoiseConfig,
    SynthesisParams,
    estimate_synthesis_params,
    label_record,
    label_sequence,
    load_csv,
    perturb_and_relabel,
    save_csv,
    synthesize,
)
from .pareto_evolve import (
    BinaryClassifier,
    EvolutionConfig,
    classify,
    dominates,
    evolve_binary,
    fit_threshold,
    pareto_rank,
)
