"""Explanations for temporal graph network predictions.

Per-snapshot Bayesian networks are learned from black-box perturbations,
then the time windows where a network's fit gain dominates are discovered
by exhaustive or pruned lattice search.
"""

from .graph import (
    NormalizedAdjacency,
    TemporalGraph,
    TimeWindow,
    k_hop_neighbors,
    load_dataset,
    normalize_adjacency,
    save_dataset,
)
from .kernels import BACKEND as KERNEL_BACKEND
from .model import (
    EmbeddedOracle,
    ModelOracle,
    ModelWeights,
    forward_full,
    load_weights,
    predict_with_hidden,
    save_weights,
    step,
    synth_model,
)
from .perturb import (
    PerturbationConfig,
    SnapshotDataset,
    TemporalDataset,
    generate_snapshot_dataset,
    generate_temporal_dataset,
    perturb_features,
    prediction_changed,
)
from .pgm import (
    BayesianNetwork,
    bic_score,
    candidate_variables,
    dim,
    explain_snapshot,
    family_counts,
    learn_structure,
    log_likelihood,
    mle_fit,
    select_variables,
)
from .discovery import (
    CandidateSet,
    DominantSet,
    InterestRecord,
    brute_force_discover,
    collect_candidates,
    is_interesting,
    normalized_tbic,
    prune_discover,
    tbic,
    window_children,
)

__version__ = "0.1.0"
