"""Semi-metric recommenders over co-occurrence proximity graphs.

Builds user-user and item-item proximity graphs from binarized rating data,
computes generalized transitive/distance closures to expose semi-metric
structure, enhances the graphs with qualifying closure edges, and evaluates
the resulting recommendations on MovieLens-format benchmarks.
"""

from .algebra import (
    MAXMIN,
    METRIC,
    AlgebraError,
    ClosureConvergenceError,
    DualAlgebra,
    distance_closure,
    hamacher_product,
    metric_closure,
    to_distance,
    to_proximity,
    transitive_closure,
    validate_algebra,
)
from .evaluation import (
    EvalReport,
    UserEvaluation,
    agreement_counts,
    aggregate,
    degree_of_agreement,
    evaluate,
    precision_recall_f1,
)
from .graphs import (
    DistanceGraph,
    EdgeListFormatError,
    ProximityGraph,
    load_distance_edges,
    load_proximity_edges,
    save_edges,
)
from .proximity import item_proximity, user_proximity
from .recommenders import (
    ColdStartWarning,
    EmptyProfileError,
    ItemProximityRecommender,
    ItemSemiMetricRecommender,
    ScoredRecommendations,
    UserProximityRecommender,
    UserSemiMetricRecommender,
    item_based_scores,
    item_based_sm_scores,
    make_recommender,
    rank_items,
    user_based_scores,
    user_based_sm_scores,
)
from .relation import (
    BinaryRelation,
    RatingsParseError,
    SplitSpec,
    SplitWarning,
    load_split_files,
    parse_ratings,
    split,
    write_ratings,
)
from .semimetric import (
    DegenerateDistributionWarning,
    PowerLawFit,
    SemiMetricEnhancer,
    SemiMetricStats,
    ThresholdPolicy,
    enhance,
    fit_power_law_cutoff,
    mean_direct_distance,
    mean_direct_distances,
    qualifying_mask,
    save_stats,
    select_threshold,
    semimetric_stats,
)

__version__ = "0.1.0"
