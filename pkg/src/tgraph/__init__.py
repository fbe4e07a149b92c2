"""Pairwise-translation graph supervision for sparse-view camera pose
regression: geometry, the translation graph and its balanced loss,
similarity-aligned metrics, a small trainable regressor, and synthetic
scene generators."""

from .experiment import DirectionalResult, ExperimentConfig, run_directional
from .geometry import (AxisStatus, CameraPose, PairT, Ray, camera_center,
                       closest_point_between_axes, optical_axis, pair_t,
                       relative_t, scene_scale)
from .graph import (Representation, TranslationGraph, build_graph, k_factors,
                    normalize_graph, t_graph_loss, total_loss)
from .metrics import (MetricReport, SimilarityTransform, camera_center_accuracy,
                      rotation_accuracy, rotation_angle_deg, translation_accuracy,
                      umeyama_align)
from .regressor import (JointModel, TrainConfig, baseline_predict,
                        load_checkpoint, save_checkpoint, tgraph_forward,
                        train_joint)
from .synth import (SceneSample, Scenario, encode_features, gen_center_facing,
                    gen_mixed, gen_parallel, intersection_stability)

__version__ = "0.1.0"
