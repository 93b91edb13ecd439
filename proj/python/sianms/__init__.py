"""Multi-camera 3D detection toolkit.

Synthetic multi-camera scenes, siamese-embedding re-identification for
cross-camera duplicate suppression, LiDAR frustum aggregation, greedy-NMS
baselines, and a nuScenes-style metric suite.
"""

try:
    # Installed layout: the extension lives inside the package.
    from . import _sianms as _core
except ImportError:
    # Build-tree layout: the extension sits next to the package on sys.path.
    import _sianms as _core

Box3D = _core.Box3D
Encoder = _core.Encoder
Scene = _core.Scene
SianmsError = _core.SianmsError
SimConfig = _core.SimConfig
contrastive_loss = _core.contrastive_loss
evaluate = _core.evaluate
generate_scene = _core.generate_scene
greedy_match = _core.greedy_match
greedy_nms = _core.greedy_nms
iou_axis_aligned_bev = _core.iou_axis_aligned_bev
iou_rotated_bev = _core.iou_rotated_bev
load_scene = _core.load_scene
optimal_match = _core.optimal_match
run_benchmark_json = _core.run_benchmark_json
run_pipeline = _core.run_pipeline
save_scene = _core.save_scene
train_encoder = _core.train_encoder

__all__ = [
    "Box3D",
    "Encoder",
    "Scene",
    "SianmsError",
    "SimConfig",
    "contrastive_loss",
    "evaluate",
    "generate_scene",
    "greedy_match",
    "greedy_nms",
    "iou_axis_aligned_bev",
    "iou_rotated_bev",
    "load_scene",
    "optimal_match",
    "run_benchmark_json",
    "run_pipeline",
    "save_scene",
    "train_encoder",
]
