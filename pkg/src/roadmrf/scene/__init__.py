"""Corridor scene construction, rendering and export."""

from .geometry import (
    Billboard,
    ControlPoints,
    MAX_DEPTH_M,
    PLANE_ORDER,
    Pinhole,
    RoadBoundaries,
    SceneModel,
    ScenePlane,
    VanishingPoint,
    WALL_HEIGHT_M,
    build_corridor,
    carve_foreground,
    detect_vanishing_point,
    extract_boundaries,
    generate_control_points,
)
from .gltfio import export_database, export_scene, import_database, import_scene
from .render import PLANE_IDS, Pose, render_plane_map, render_viewpoint, source_pose

__all__ = [
    "Billboard",
    "ControlPoints",
    "MAX_DEPTH_M",
    "PLANE_ORDER",
    "PLANE_IDS",
    "Pinhole",
    "Pose",
    "RoadBoundaries",
    "SceneModel",
    "ScenePlane",
    "VanishingPoint",
    "WALL_HEIGHT_M",
    "build_corridor",
    "carve_foreground",
    "detect_vanishing_point",
    "export_database",
    "export_scene",
    "extract_boundaries",
    "generate_control_points",
    "import_database",
    "import_scene",
    "render_plane_map",
    "render_viewpoint",
    "source_pose",
]
