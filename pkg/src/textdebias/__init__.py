"""Selection-bias correction for binary text classifiers.

Pipeline: group samples by the identity terms they mention
(:mod:`~textdebias.corpus`), estimate how skewed the observed label
distribution is per group and turn that into instance weights
(:mod:`~textdebias.weighting`), train a weighted bag-of-words classifier
(:mod:`~textdebias.classifier`), and measure per-identity error-rate
gaps on balanced template suites (:mod:`~textdebias.iptts`,
:mod:`~textdebias.metrics`).  :mod:`~textdebias.synthbias` provides
small synthetic worlds where every step of that story can be checked by
exact arithmetic.
"""

from .corpus import (
    Dataset,
    DataFormatError,
    IdentityLexicon,
    IdentitySignature,
    Sample,
    build_signatures,
    extract_identity,
    load_dataset,
    load_lexicon,
    tokenize,
)
from .weighting import (
    ConditionalEstimate,
    WeightConfig,
    WeightedDataset,
    compute_weights,
    cross_fit_p,
    fit_frequency_estimator,
    weigh,
)
from .classifier import LinearModel, TrainConfig, TrainingError, train_weighted, weighted_log_loss
from .iptts import (
    DEFAULT_SLOT_LEXICON,
    DEFAULT_TEMPLATES,
    SlotLexicon,
    Template,
    TestSuite,
    generate,
    verify_balance,
)
from .metrics import (
    FairnessReport,
    GroupedPredictions,
    auc,
    fairness_report,
    fped_fned,
    frequency_table,
    rates,
)
from .synthbias import (
    AssumptionError,
    DiscreteWorld,
    PredictorJoint,
    TheoremReport,
    biased_distribution,
    check_posterior,
    check_theorem1,
    check_theorem2,
    exact_weights,
    sample_biased,
)

__version__ = "0.1.0"

__all__ = [
    "AssumptionError",
    "ConditionalEstimate",
    "DataFormatError",
    "Dataset",
    "DEFAULT_SLOT_LEXICON",
    "DEFAULT_TEMPLATES",
    "DiscreteWorld",
    "FairnessReport",
    "GroupedPredictions",
    "IdentityLexicon",
    "IdentitySignature",
    "LinearModel",
    "PredictorJoint",
    "Sample",
    "SlotLexicon",
    "Template",
    "TestSuite",
    "TheoremReport",
    "TrainConfig",
    "TrainingError",
    "WeightConfig",
    "WeightedDataset",
    "auc",
    "biased_distribution",
    "build_signatures",
    "check_posterior",
    "check_theorem1",
    "check_theorem2",
    "compute_weights",
    "cross_fit_p",
    "exact_weights",
    "extract_identity",
    "fairness_report",
    "fit_frequency_estimator",
    "fped_fned",
    "frequency_table",
    "generate",
    "load_dataset",
    "load_lexicon",
    "rates",
    "sample_biased",
    "tokenize",
    "train_weighted",
    "verify_balance",
    "weigh",
    "weighted_log_loss",
]
