"""Alignment scoring on the Lorentz hyperboloid.

Precomputed image/text embeddings are lifted onto the hyperboloid through a
gated adapter, an adaptive scale and the origin exponential map. Cone
geometry at the text point (distance, exterior angle, aperture) supervises
training through a score-contracted hinge and feeds a small network that
calibrates plain cosine similarity into the final alignment score.
"""

from .adapter import AdapterParams, adapt, init_adapter
from .data import Dataset, Sample, load_embeddings, normalize_score, prompt_disjoint_split, save_embeddings, synthetic_dataset
from .entailment import (
    EntailmentConfig,
    GeometricPrimitives,
    contraction_factor,
    dynamic_aperture,
    entailment_loss,
    exterior_angle,
    geometric_primitives,
    half_aperture,
)
from .errors import (
    DegenerateGeometryError,
    FileFormatError,
    InvalidInputError,
    RecordDataError,
    UndefinedMetricError,
)
from .manifold import (
    AdaptiveScaler,
    LorentzPoint,
    ManifoldConfig,
    TangentAtOrigin,
    exp_map_origin,
    geodesic_distance,
    lift_to_tangent,
    lorentz_inner,
    lorentz_norm,
    origin,
    project_to_manifold,
)
from .metrics import MetricReport, metric_report, plcc, srcc
from .model_io import ModelMeta, load_model, save_model
from .regressor import (
    ModulationNetParams,
    ModulationParams,
    cosine_similarity,
    init_modnet,
    modulation_params,
    predict_score,
    zeros_modnet,
)
from .training import (
    OptimizerState,
    ParameterSet,
    TrainConfig,
    TrainHistory,
    adamw_step,
    evaluate,
    flatten_params,
    forward_batch,
    gradients,
    init_params,
    lr_at_epoch,
    predict_scores,
    train,
    unflatten_params,
)

__version__ = "0.1.0"
