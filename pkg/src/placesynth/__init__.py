"""Object-placement planning over tabletop point clouds and synthetic arrangement data."""
from ._kernels import BACKEND
from .geometry import (CameraIntrinsics, PointCloud, Pose, TsdfGrid, backproject, build_tsdf, nn_distance,
                       robust_centroid, tsdf_query)
from .scene_model import Relation, Scene, SceneObject, StructuredPlan, annotate_region, classify_relation
from .affordance import AffordanceMap, compose_coarse, compose_fine, high_affordance_points, plan_affordance
from .scene_graph import GraphNode, SceneGraph, SimilarityTable, build_graph, crossover, mutate, select_root
from .scene_factory import LabeledSample, ShapeLibrary, instantiate, make_sample, refine_poses
from .planner import GuidanceConfig, NoiseSchedule, PlannerConfig, plan_placement
from .eval_harness import BenchmarkSpec, EvalResult, gen_benchmark, run_eval

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "CameraIntrinsics", "PointCloud", "Pose", "TsdfGrid", "backproject", "build_tsdf", "nn_distance",
    "robust_centroid", "tsdf_query", "Relation", "Scene", "SceneObject", "StructuredPlan", "annotate_region",
    "classify_relation", "AffordanceMap", "compose_coarse", "compose_fine", "high_affordance_points",
    "plan_affordance", "GraphNode", "SceneGraph", "SimilarityTable", "build_graph", "crossover", "mutate",
    "select_root", "LabeledSample", "ShapeLibrary", "instantiate", "make_sample", "refine_poses",
    "GuidanceConfig", "NoiseSchedule", "PlannerConfig", "plan_placement", "BenchmarkSpec", "EvalResult",
    "gen_benchmark", "run_eval",
]
