"""Single-image anthropometric and nutrition-status estimation."""

__version__ = "0.1.0"

from .detectors import BinaryMask, BodyKeypoints, FaceLandmarks  # noqa: F401
from .embeddings import EmbeddingVector, ExtractorDescriptor, SignalEncoding, synthetic_embed  # noqa: F401
from .evaluation import (ConfusionCounts, EvalReport, SubjectRecord,  # noqa: F401
                         confusion_metrics, feature_importance, load_manifest,
                         regression_metrics)
from .fusion import (FusionModelParams, SubjectFeatures, TrainingConfig,  # noqa: F401
                     assemble_input, fit, forward, fuse, load_params, save_params)
from .geometry import (AffineTransform, ConfidenceMap, align_face,  # noqa: F401
                       render_confidence_map, solve_affine, tight_crop)
from .health import (HealthReport, NutritionPlan, bfp, bmi, bmr,  # noqa: F401
                     build_health_report, classify_malnutrition, nutrition_plan)
from .height import CalibrationRegistry, CameraModel, PpmCalibration, calibrate_ppm, estimate_height, undistort  # noqa: F401
from .images import RgbImage, apply_gamma, load_image, save_image  # noqa: F401
from .mesh import (PointCloud, TriangleMesh, normalize_point_cloud, occupancy,  # noqa: F401
                   sample_point_cloud)
