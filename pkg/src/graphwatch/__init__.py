"""Streaming anomaly detection for dynamic communication networks.

Stage one sweeps the event stream with sparse conjugate counting-process
models and flags subjects whose predictive p-values fall below a threshold;
stage two analyzes the reduced subgraph around the flagged nodes with
spectral methods.
"""

__version__ = "0.1.0"

from .diagnostics import DiagnosticPath, accumulate, compensator_increment, variation_increment
from .ingest import EdgeEvent, PeriodScheme, discretize, equalized_day_bins, parse_events
from .models import (
    BetaBernoulli,
    BetaGeometric,
    CategoricalDirichlet,
    DirichletProcess,
    Hurdle,
    MarkovBernoulli,
    PoissonGamma,
    PredictiveSummary,
    build_model,
    markov_equilibrium,
    predictive_pvalue,
)
from .simulate import GroundTruth, Injection, ScenarioConfig, simulate
from .spectral import (
    SpectralEmbedding,
    WeightedGraph,
    build_anomaly_subgraph,
    eigen_embed,
    embed_graph,
    jacobi_eigh,
    kmeans_cluster,
    sym_laplacian,
)
from .splits import (
    CategoryCounts,
    SplitModel,
    chi_square_sf,
    lrt_augmented,
    lrt_conditional,
    monte_carlo_pvalue,
)
from .tracker import (
    NetworkTracker,
    PValueRecord,
    TrackerConfig,
    aggregate_counts,
    canonical_pair,
    flag_anomalies,
)
