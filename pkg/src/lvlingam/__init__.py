"""Causal discovery for linear non-gaussian models with hidden confounders.

The pipeline: canonicalize latent-variable models, derive or estimate the
(possibly overcomplete) ICA mixing basis of the observed variables, and
enumerate the finite set of observationally equivalent canonical models,
with resampling-based pruning when the basis is only estimated.
"""

from . import dists
from .canonical import (
    CanonicalModel,
    canonicalize,
    causally_equivalent,
    is_canonical,
    observationally_equivalent,
)
from .dists import DisturbanceDist
from .enumeration import EquivalenceSet, classification_count, enumerate_models
from .errors import (
    ConfigBudgetError,
    CycleError,
    EmptyResultError,
    FitError,
    GenerationError,
    LvlingamError,
    SchemaError,
)
from .estimate import (
    BasisEnsemble,
    DiscoverySummary,
    ModelEnsemble,
    align_ensemble,
    discover,
    perturb_ensemble,
    test_zeros,
)
from .mixing import (
    AlignmentResult,
    AmbiguousAlignmentWarning,
    MixingBasis,
    ZeroPattern,
    align_columns,
    apply_alignment,
    can_permute_lower_triangular,
    full_mixing,
    observed_basis,
    scramble,
)
from .model import (
    DataMatrix,
    Edge,
    GenerationConfig,
    LvModel,
    Variable,
    causal_order,
    observed_means,
    random_model,
    simulate,
    total_effects,
    validate,
)
from .oica import (
    FitResult,
    MogSource,
    OicaConfig,
    bootstrap_fit,
    fit,
    loglik,
    mog_from_disturbance,
)

__version__ = "0.1.0"

__all__ = [
    "AlignmentResult",
    "AmbiguousAlignmentWarning",
    "BasisEnsemble",
    "CanonicalModel",
    "ConfigBudgetError",
    "CycleError",
    "DataMatrix",
    "DiscoverySummary",
    "DisturbanceDist",
    "Edge",
    "EmptyResultError",
    "EquivalenceSet",
    "FitError",
    "FitResult",
    "GenerationConfig",
    "GenerationError",
    "LvModel",
    "LvlingamError",
    "MixingBasis",
    "ModelEnsemble",
    "MogSource",
    "OicaConfig",
    "SchemaError",
    "Variable",
    "ZeroPattern",
    "align_columns",
    "align_ensemble",
    "apply_alignment",
    "bootstrap_fit",
    "can_permute_lower_triangular",
    "canonicalize",
    "causal_order",
    "causally_equivalent",
    "classification_count",
    "discover",
    "dists",
    "enumerate_models",
    "fit",
    "full_mixing",
    "is_canonical",
    "loglik",
    "mog_from_disturbance",
    "observationally_equivalent",
    "observed_basis",
    "observed_means",
    "perturb_ensemble",
    "random_model",
    "scramble",
    "simulate",
    "test_zeros",
    "total_effects",
    "validate",
]
