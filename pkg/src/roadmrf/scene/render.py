"""Software rasterizer: novel-viewpoint rendering of corridor scenes.

Opaque planes draw into a 1/z depth buffer with perspective-correct
texture interpolation; billboards alpha-blend afterwards, far to near.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..errors import DataError
from .geometry import NEAR_PLANE_M, PLANE_ORDER, SceneModel

SKY_COLOR = (166.0, 203.0, 235.0)

PLANE_IDS = {"sky": 0, "left_wall": 1, "right_wall": 2, "back_wall": 3, "road": 4}


@dataclass(frozen=True)
class Pose:
    """Camera placement for rendering: world position plus yaw/pitch.

    Positive yaw turns right (clockwise from above); pitch_deg=None keeps
    the scene camera's pitch.
    """

    position: tuple[float, float, float]
    yaw_deg: float = 0.0
    pitch_deg: float | None = None


def source_pose(scene: SceneModel) -> Pose:
    return Pose(position=(0.0, scene.camera.height_m, 0.0), yaw_deg=0.0)


def _camera_basis(pose: Pose, default_pitch_deg: float):
    yaw = np.deg2rad(pose.yaw_deg)
    pitch = np.deg2rad(default_pitch_deg if pose.pitch_deg is None else pose.pitch_deg)
    fwd0 = np.array([np.sin(yaw), 0.0, np.cos(yaw)])
    right = np.array([np.cos(yaw), 0.0, -np.sin(yaw)])
    forward = np.cos(pitch) * fwd0 + np.sin(pitch) * np.array([0.0, -1.0, 0.0])
    down = np.cross(right, forward)
    return right, down, forward


def _clip_near(tri_cam: np.ndarray, tri_uv: np.ndarray, near: float):
    """Sutherland-Hodgman clip of one triangle against z = near.

    Returns a list of (verts_cam (3,3), uv (3,2)) triangles.
    """
    inside = tri_cam[:, 2] > near
    if inside.all():
        return [(tri_cam, tri_uv)]
    if not inside.any():
        return []
    poly_v, poly_uv = [], []
    for i in range(3):
        j = (i + 1) % 3
        vi, vj = tri_cam[i], tri_cam[j]
        ui, uj = tri_uv[i], tri_uv[j]
        if inside[i]:
            poly_v.append(vi)
            poly_uv.append(ui)
        if inside[i] != inside[j]:
            t = (near - vi[2]) / (vj[2] - vi[2])
            poly_v.append(vi + t * (vj - vi))
            poly_uv.append(ui + t * (uj - ui))
    tris = []
    for k in range(1, len(poly_v) - 1):
        tris.append(
            (
                np.stack([poly_v[0], poly_v[k], poly_v[k + 1]]),
                np.stack([poly_uv[0], poly_uv[k], poly_uv[k + 1]]),
            )
        )
    return tris


def _rasterize(scene: SceneModel, pose: Pose, width: int, height: int):
    right, down, forward = _camera_basis(pose, scene.camera.pitch_deg)
    f = scene.camera.focal_px(width)
    cx, cy = width / 2.0, height / 2.0
    pos = np.asarray(pose.position, dtype=np.float64)
    if not np.isfinite(pos).all():
        raise DataError("pose position must be finite")

    color = np.empty((height, width, 3), dtype=np.float64)
    color[..., 0], color[..., 1], color[..., 2] = SKY_COLOR
    zbuf = np.zeros((height, width), dtype=np.float64)  # stores 1/z
    idbuf = np.full((height, width), -1, dtype=np.int32)

    def to_cam(verts):
        rel = verts - pos
        return np.stack([rel @ right, rel @ down, rel @ forward], axis=1)

    for name in PLANE_ORDER:
        plane = scene.planes.get(name)
        if plane is None:
            continue
        cam = to_cam(plane.vertices)
        clipped_v, clipped_uv = [], []
        for tri in plane.faces:
            for tv, tuv in _clip_near(cam[tri], plane.uv[tri], NEAR_PLANE_M):
                clipped_v.append(tv)
                clipped_uv.append(tuv)
        if not clipped_v:
            continue
        verts = np.concatenate(clipped_v)
        uvs = np.concatenate(clipped_uv)
        tris = np.arange(len(verts), dtype=np.int32).reshape(-1, 3)
        invz = 1.0 / verts[:, 2]
        kernels.raster_mesh(
            np.ascontiguousarray(cx + f * verts[:, 0] * invz),
            np.ascontiguousarray(cy + f * verts[:, 1] * invz),
            np.ascontiguousarray(invz),
            np.ascontiguousarray(uvs[:, 0] * invz),
            np.ascontiguousarray(uvs[:, 1] * invz),
            tris,
            plane.texture.astype(np.float64),
            zbuf,
            color,
            idbuf,
            PLANE_IDS[name],
        )

    order = sorted(
        range(len(scene.foreground)),
        key=lambda i: -scene.foreground[i].depth_m,
    )
    for i in order:
        bb = scene.foreground[i]
        cam = to_cam(bb.vertices)
        clipped_v, clipped_uv = [], []
        for tri in bb.faces:
            for tv, tuv in _clip_near(cam[tri], bb.uv[tri], NEAR_PLANE_M):
                clipped_v.append(tv)
                clipped_uv.append(tuv)
        if not clipped_v:
            continue
        verts = np.concatenate(clipped_v)
        uvs = np.concatenate(clipped_uv)
        tris = np.arange(len(verts), dtype=np.int32).reshape(-1, 3)
        invz = 1.0 / verts[:, 2]
        kernels.raster_billboard(
            np.ascontiguousarray(cx + f * verts[:, 0] * invz),
            np.ascontiguousarray(cy + f * verts[:, 1] * invz),
            np.ascontiguousarray(invz),
            np.ascontiguousarray(uvs[:, 0] * invz),
            np.ascontiguousarray(uvs[:, 1] * invz),
            tris,
            bb.texture_rgba.astype(np.float64),
            zbuf,
            color,
        )
    return color, idbuf


def render_viewpoint(
    scene: SceneModel, pose: Pose, width: int | None = None, height: int | None = None
) -> np.ndarray:
    """Render the scene from the pose; returns (H, W, 3) uint8."""
    h0, w0 = scene.image_size
    width = width or w0
    height = height or h0
    color, _ = _rasterize(scene, pose, width, height)
    return np.clip(color + 0.5, 0, 255).astype(np.uint8)


def render_plane_map(
    scene: SceneModel, pose: Pose, width: int | None = None, height: int | None = None
) -> np.ndarray:
    """Per-pixel plane ids at the pose: 0 void/sky, 1 LW, 2 RW, 3 BW, 4 RP."""
    h0, w0 = scene.image_size
    width = width or w0
    height = height or h0
    _, idbuf = _rasterize(scene, pose, width, height)
    out = np.asarray(idbuf).copy()
    out[out < 0] = 0
    return out.astype(np.uint8)
