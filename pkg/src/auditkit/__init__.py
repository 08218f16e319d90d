"""auditkit: audit black-box classifiers with perturbation explainers,
detect scaffolding-style adversarial behavior, and defend the explanations.
"""

from .cad import (
    CadParams,
    KnnCadDetector,
    dynamic_range,
    is_anomalous,
    knncad_fit,
    knncad_score,
    zeta,
)
from .dataset import (
    Dataset,
    FeatureKind,
    FeatureMeta,
    inverse_transform,
    load_csv,
    split_train_test,
    standardize,
    synthesize_uncorrelated,
)
from .defense import (
    DefendedNeighborhood,
    DetectionResult,
    cad_defend,
    cad_detect,
    defended_explain,
    ecdf_area,
    stratified_query_shuffle,
)
from .explainers import (
    Explanation,
    LimePerturber,
    ShapBackground,
    ShapPerturber,
    lime_explain,
    lime_neighborhood,
    rank_features,
    shap_background,
    shap_explain,
    shap_neighborhood,
)
from .forest import ForestParams, RandomForest, forest_fit
from .metrics import (
    FidelityReport,
    f_actual,
    fidelity_dood,
    fidelity_f,
    fidelity_g,
    fidelity_h,
    infidelity_defend_g,
    margin,
    spearman_rho,
)
from .models import (
    AttackerPerturber,
    BlackBoxModel,
    Predicate,
    RuleModel,
    RuleSpec,
    ScaffoldModel,
    build_attacker,
)

__version__ = "0.1.0"
