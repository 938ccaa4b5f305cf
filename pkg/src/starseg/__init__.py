"""Star-convex polygon instance segmentation and classification toolkit.

Encodes nuclei label images into per-pixel prediction targets (object
probability, radial distances, class probabilities), decodes prediction
tensors back into classified instances via greedy NMS with majority-vote
shape refinement, supports dihedral test-time augmentation and model
ensembling, class-imbalance resampling and loss functions, and multi-class
panoptic-quality evaluation.
"""

from .balance import (
    LossParams,
    SamplerWeights,
    bce_loss,
    cce_loss,
    focal_loss,
    mae_loss,
    oversampling_weights,
    sample_epoch,
    tversky_loss,
)
from .decode import DecodeConfig, InstanceSet, decode, extract_candidates, nms
from .encode import (
    LabelImage,
    PredTensors,
    class_frequencies,
    encode_targets,
    radial_distance,
)
from .geometry import (
    PolygonCandidate,
    RayConfig,
    bbox,
    polygon_iou,
    polygon_vertices,
    rasterize_polygon,
)
from .metrics import ClassStats, PQReport, dq_sq_pq, evaluate, match_instances
from .tensorio import (
    TensorFile,
    read_array,
    read_class_assignment,
    read_tensor,
    write_array,
    write_class_assignment,
    write_tensor,
)
from .tta import (
    ALL_ELEMENTS,
    D4Element,
    IDENTITY,
    compose,
    ensemble_predict,
    inverse,
    merge_predictions,
    radial_permutation,
    transform_image,
    transform_pred,
    tta_predict,
)

__version__ = "0.1.0"
