"""fairmi: fairness-aware tabular training and intersectional subgroup audits."""

from .dataset import Dataset, SplitSpec, load_csv, split, derive_feature, drop_features
from .errors import FairmiError
from .interactions import InteractionHeatmap, interaction_heatmap, pair_interaction
from .metrics import (
    accuracy,
    dp_gap,
    entropy,
    eo_gaps,
    fairness_gaps,
    mutual_information,
    subgroup_rates,
)
from .nn import (
    AdamState,
    ModelConfig,
    ModelState,
    adam_step,
    compute_gradients,
    compute_loss,
    forward,
    grad_check,
    init_model,
    load_model,
    predict,
    predict_proba,
    save_model,
)
from .schema import FeatureSchema, FeatureSpec, ProtectedFamily
from .substitution import augment_for_mi, mask_features, subgroup_key, substitute, upsample
from .train import TrainConfig, TrainReport, combined_loss, proxy_loss, sample_uniform_labels, train

__version__ = "0.1.0"
