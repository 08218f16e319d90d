from .base import Explanation, PerturbationBatch, rank_features
from .lime import (
    LimeNeighborhood,
    LimePerturber,
    default_kernel_width,
    lime_explain,
    lime_neighborhood,
)
from .shap import (
    ShapBackground,
    ShapNeighborhood,
    ShapPerturber,
    shap_background,
    shap_explain,
    shap_neighborhood,
)

__all__ = [
    "Explanation",
    "PerturbationBatch",
    "rank_features",
    "LimeNeighborhood",
    "LimePerturber",
    "default_kernel_width",
    "lime_explain",
    "lime_neighborhood",
    "ShapBackground",
    "ShapNeighborhood",
    "ShapPerturber",
    "shap_background",
    "shap_explain",
    "shap_neighborhood",
]
