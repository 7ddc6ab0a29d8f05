"""Exact entanglement analysis for feed-forward neural-network quantum states.

Desk-scale (n <= 24 spins by default) toolchain: computation graphs and
feature reduction, dense statevectors, subregion entropies and Schmidt
ranks, Chebyshev auxiliary states, and the explicit entropy-bound chain.
"""

from .core import (
    AffineFeature,
    RngStream,
    SpinConfig,
    SplitFeature,
    Subregion,
    enumerate_configs,
    feature_supnorm,
    split_feature,
)
from .activations import Activation, analyticity_params, parse_activation
from .graph import (
    ComputationGraph,
    Node,
    ReducedForm,
    eval_full,
    eval_reduced,
    feature_reduce,
    from_json,
    load_graph,
    save_graph,
    to_json,
    validate_and_sort,
)
from .statevector import Statevector, from_amplitudes, load_nqsv, materialize, overlap, save_nqsv, two_norm_distance
from .entanglement import (
    BipartitionMatrix,
    EntropyResult,
    bipartition,
    entropy,
    fannes_audenaert_bound,
    pure_trace_distance,
    reduced_trace_distance,
    subregion_entropy,
)
from .approx import (
    BoundReport,
    ChebyshevApprox,
    auxiliary_state,
    cheb_fit_1d,
    cheb_fit_multi,
    degree_for_n,
    degree_for_n_multi,
    full_bound_report,
    monomial_expand,
    poly_mlp_bound,
    rank_bound,
)
from .analytic import dicke_entropy, dicke_entropy_asymptotic, dicke_spectrum, page_value
from .ansatz import (
    CosnetSpec,
    DickeSpec,
    MlpSpec,
    SnnqsSpec,
    TransformerSpec,
    ansatz_from_config,
    build_cosnet,
    build_dicke,
    build_mlp,
    build_snnqs,
    build_transformer,
)
from .experiments import ExperimentConfig, SweepResult, benchmark_reduction, run_cosnet_k_sweep, run_sweep

__version__ = "0.1.0"
