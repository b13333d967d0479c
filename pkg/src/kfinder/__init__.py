"""kfinder: estimate the number of clusters k directly from a point set."""

from .baselines import (
    ElbowResult,
    ThreeCoverInstance,
    build_checkntsc_instance,
    check_ntsc_decision_bruteforce,
    elbow_estimate,
    exact_cover_exists,
    generate_three_cover,
    lloyd_kmeans,
    tightness_contrast_demo,
)
from .convexid import (
    FractionalSelection,
    RoundedSelection,
    identify_k_convex,
    round_selection,
    solve_convex,
)
from .generate import (
    LabeledSample,
    MixtureSpec,
    SbmSpec,
    check_anti_concentration,
    check_sbm_separation,
    parse_generator_spec,
    recommended_sample_size,
    sample_gaussian_mixture,
    sample_sbm,
    spherical_mixture,
)
from .linalg import (
    Clustering,
    ClusterStats,
    PointSet,
    Subspace,
    directional_sigma,
    mean,
    project,
    sigma,
    sigma_sq,
    svd_subspace,
)
from .peeling import (
    AlgoConstants,
    RunReport,
    check_partition_conditions,
    identify_k,
    identify_k_with_w0,
    prune,
)
from .verify import (
    ConditionReport,
    check_ntsc,
    check_separation,
    check_weak_ntsc,
    exhaustive_identify,
    min_weight,
)

__all__ = [
    "AlgoConstants",
    "Clustering",
    "ClusterStats",
    "ConditionReport",
    "ElbowResult",
    "FractionalSelection",
    "LabeledSample",
    "MixtureSpec",
    "PointSet",
    "RoundedSelection",
    "RunReport",
    "SbmSpec",
    "Subspace",
    "ThreeCoverInstance",
    "build_checkntsc_instance",
    "check_anti_concentration",
    "check_ntsc",
    "check_ntsc_decision_bruteforce",
    "check_partition_conditions",
    "check_sbm_separation",
    "check_separation",
    "check_weak_ntsc",
    "directional_sigma",
    "elbow_estimate",
    "exact_cover_exists",
    "exhaustive_identify",
    "generate_three_cover",
    "identify_k",
    "identify_k_convex",
    "identify_k_with_w0",
    "lloyd_kmeans",
    "mean",
    "min_weight",
    "parse_generator_spec",
    "project",
    "prune",
    "recommended_sample_size",
    "round_selection",
    "sample_gaussian_mixture",
    "sample_sbm",
    "sigma",
    "sigma_sq",
    "spherical_mixture",
    "svd_subspace",
    "tightness_contrast_demo",
]
