"""Corridor scene geometry: vanishing point, boundary control points,
plane construction and foreground billboards."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import imageops, kernels
from ..corpus import CameraParams, Frame
from ..errors import DataError, NoVanishingPointError

MAX_DEPTH_M = 200.0
WALL_HEIGHT_M = 5.0
HORIZON_MARGIN_PX = 5.0
NEAR_PLANE_M = 0.05


@dataclass(frozen=True)
class VanishingPoint:
    x: float
    y: float
    confidence: float

    def __post_init__(self):
        if not (np.isfinite(self.x) and np.isfinite(self.y)):
            raise DataError("vanishing point must be finite")


@dataclass(frozen=True)
class RoadBoundaries:
    """Per-row leftmost/rightmost road columns (smoothed)."""

    rows: np.ndarray  # ascending int rows with road pixels
    left: np.ndarray  # float columns
    right: np.ndarray


@dataclass(frozen=True)
class ControlPoints:
    left: np.ndarray  # (K_c, 2) image points (x, y), nearest first
    right: np.ndarray

    def __post_init__(self):
        for side in (self.left, self.right):
            rows = side[:, 1]
            if not (np.diff(rows) < 0).all():
                raise DataError("control point rows must strictly decrease")


@dataclass
class ScenePlane:
    name: str
    vertices: np.ndarray  # (N, 3) world, float64
    faces: np.ndarray  # (M, 3) int32
    uv: np.ndarray  # (N, 2) in [0, 1]
    texture: np.ndarray  # (th, tw, 3) uint8
    crop_box: tuple[int, int, int, int]  # u0, v0, u1, v1 in the source frame


@dataclass
class Billboard:
    vertices: np.ndarray  # (4, 3)
    faces: np.ndarray  # (2, 3)
    uv: np.ndarray  # (4, 2)
    texture_rgba: np.ndarray  # (th, tw, 4) uint8
    depth_m: float
    link: int  # frame index of the background model


PLANE_ORDER = ("road", "left_wall", "right_wall", "back_wall", "sky")


@dataclass
class SceneModel:
    frame_index: int
    camera: CameraParams
    image_size: tuple[int, int]  # (H, W)
    vp: VanishingPoint
    control_points: ControlPoints
    planes: dict[str, ScenePlane]
    foreground: list[Billboard] = field(default_factory=list)

    @property
    def far_depth_m(self) -> float:
        road = self.planes["road"]
        return float(road.vertices[:, 2].max())


# ---------------------------------------------------------------------------
# Pinhole model
# ---------------------------------------------------------------------------


class Pinhole:
    """Camera at (0, height, 0) looking +Z, pitched down by pitch_deg."""

    def __init__(self, camera: CameraParams, width: int, height: int):
        self.f = camera.focal_px(width)
        self.cx = width / 2.0
        self.cy = height / 2.0
        self.cam_h = camera.height_m
        p = np.deg2rad(camera.pitch_deg)
        self.forward = np.array([0.0, -np.sin(p), np.cos(p)])
        self.right = np.array([1.0, 0.0, 0.0])
        self.down = np.cross(self.right, self.forward)

    def project(self, pts: np.ndarray) -> np.ndarray:
        """World points (N, 3) to image (N, 2); z must be positive."""
        rel = np.atleast_2d(pts) - np.array([0.0, self.cam_h, 0.0])
        xc = rel @ self.right
        yc = rel @ self.down
        zc = rel @ self.forward
        return np.stack([self.cx + self.f * xc / zc, self.cy + self.f * yc / zc], axis=1)

    def ray(self, u: float, v: float) -> np.ndarray:
        d = (
            self.right * ((u - self.cx) / self.f)
            + self.down * ((v - self.cy) / self.f)
            + self.forward
        )
        return d

    def ground_point(self, u: float, v: float) -> np.ndarray:
        """Ray/ground intersection, clamped to MAX_DEPTH_M above the horizon."""
        origin = np.array([0.0, self.cam_h, 0.0])
        d = self.ray(u, v)
        if d[1] < -1e-9:
            t = -self.cam_h / d[1]
            p = origin + t * d
            if 0 < p[2] <= MAX_DEPTH_M:
                return p
        if d[2] <= 1e-9:
            raise DataError(f"ray through ({u:.1f}, {v:.1f}) cannot reach the ground")
        s = MAX_DEPTH_M / d[2]
        p = origin + s * d
        return np.array([p[0], 0.0, MAX_DEPTH_M])

    def point_at_depth(self, u: float, v: float, z: float) -> np.ndarray:
        origin = np.array([0.0, self.cam_h, 0.0])
        d = self.ray(u, v)
        if d[2] <= 1e-9:
            raise DataError("ray points away from the scene")
        return origin + (z / d[2]) * d


# ---------------------------------------------------------------------------
# Vanishing point
# ---------------------------------------------------------------------------

_SPHERE_DIRS = None
_SPHERE_SHAPE = (180, 180)  # 1-degree bins over the forward hemisphere


def _sphere_directions():
    global _SPHERE_DIRS
    if _SPHERE_DIRS is None:
        az = np.deg2rad(np.arange(-89.5, 90.0, 1.0))
        el = np.deg2rad(np.arange(-89.5, 90.0, 1.0))
        aa, ee = np.meshgrid(az, el, indexing="ij")
        _SPHERE_DIRS = np.stack(
            [np.sin(aa) * np.cos(ee), np.sin(ee), np.cos(aa) * np.cos(ee)], axis=-1
        ).reshape(-1, 3)
    return _SPHERE_DIRS


def _hough_lines(gray: np.ndarray, max_lines: int = 12):
    """Deterministic Hough transform; returns (a, b, c, votes) rows for
    lines a*u + b*v + c = 0 with (a, b) unit."""
    h, w = gray.shape
    gp = np.pad(gray, 1, mode="edge")
    gx = (
        (gp[:-2, 2:] + 2.0 * gp[1:-1, 2:] + gp[2:, 2:])
        - (gp[:-2, :-2] + 2.0 * gp[1:-1, :-2] + gp[2:, :-2])
    )
    gy = (
        (gp[2:, :-2] + 2.0 * gp[2:, 1:-1] + gp[2:, 2:])
        - (gp[:-2, :-2] + 2.0 * gp[:-2, 1:-1] + gp[:-2, 2:])
    )
    mag = np.hypot(gx, gy)
    thr = max(float(np.quantile(mag, 0.95)), 40.0)
    ys, xs = np.nonzero(mag > thr)
    if ys.size < 10:
        return []
    thetas = np.deg2rad(np.arange(0.0, 180.0, 1.0))
    cos_t, sin_t = np.cos(thetas), np.sin(thetas)
    diag = int(np.ceil(np.hypot(h, w)))
    n_rho = 2 * diag + 1
    rho = xs[:, None] * cos_t[None, :] + ys[:, None] * sin_t[None, :]
    rho_idx = np.floor(rho + 0.5).astype(np.int64) + diag
    flat = rho_idx * len(thetas) + np.arange(len(thetas))[None, :]
    acc = np.bincount(flat.ravel(), minlength=n_rho * len(thetas)).reshape(
        n_rho, len(thetas)
    )
    acc = acc.astype(np.float64)
    lines = []
    min_votes = max(0.05 * ys.size, 25.0)
    for _ in range(max_lines):
        peak = int(acc.argmax())
        ri, ti = divmod(peak, len(thetas))
        votes = acc[ri, ti]
        if votes < min_votes:
            break
        a, b = float(cos_t[ti]), float(sin_t[ti])
        c = -float(ri - diag)
        lines.append((a, b, c, float(votes)))
        r0, r1 = max(0, ri - 10), min(n_rho, ri + 11)
        t0, t1 = ti - 3, ti + 4
        for tt in range(t0, t1):
            acc[r0:r1, tt % len(thetas)] = 0.0
    return lines


def _boundary_line_fallback(road_mask: np.ndarray) -> VanishingPoint:
    bounds = extract_boundaries(road_mask)
    if bounds.rows.size < 2:
        raise NoVanishingPointError("mask boundaries too short to intersect")
    fits = []
    for cols in (bounds.left, bounds.right):
        m, b = np.polyfit(bounds.rows.astype(np.float64), cols, 1)
        fits.append((m, b))
    (m1, b1), (m2, b2) = fits
    if abs(m1 - m2) < 1e-6:
        raise NoVanishingPointError("boundary lines are parallel")
    y = (b2 - b1) / (m1 - m2)
    x = m1 * y + b1
    if not (np.isfinite(x) and np.isfinite(y)):
        raise NoVanishingPointError("boundary intersection is not finite")
    return VanishingPoint(x=float(x), y=float(y), confidence=0.3)


def detect_vanishing_point(
    frame: Frame, road_mask: np.ndarray, camera: CameraParams | None = None
) -> VanishingPoint:
    """Gaussian-sphere vanishing point.

    Extracted lines become great circles on the unit sphere of a pinhole
    camera; votes accumulate on a 1-degree tessellation and the peak is
    refined by least-squares intersection of its inlier lines. With fewer
    than two usable lines, falls back to intersecting the road-mask
    boundary fits.
    """
    if not road_mask.any():
        raise DataError("road mask is empty")
    h, w = frame.pixels.shape[:2]
    cam = camera or CameraParams()
    f = cam.focal_px(w)
    cx, cy = w / 2.0, h / 2.0
    gray = imageops.rgb_to_gray(frame.pixels)
    lines = _hough_lines(gray)
    if len(lines) < 2:
        return _boundary_line_fallback(road_mask)

    normals = []
    for a, b, c, _votes in lines:
        n = np.array([a * f, b * f, a * cx + b * cy + c])
        normals.append(n / np.linalg.norm(n))
    normals = np.array(normals)

    dirs = _sphere_directions()
    band = np.abs(dirs @ normals.T) < np.sin(np.deg2rad(0.9))
    votes = band.sum(axis=1)
    peak = int(votes.argmax())
    d_star = dirs[peak]
    inlier = np.abs(normals @ d_star) < np.sin(np.deg2rad(2.0))
    if inlier.sum() < 2 or abs(d_star[2]) < np.sin(np.deg2rad(2.0)):
        return _boundary_line_fallback(road_mask)

    # least-squares intersection of the inlier lines in the image plane
    sel = [lines[i] for i in np.nonzero(inlier)[0]]
    m = np.array([[a, b] for a, b, _, _ in sel])
    rhs = np.array([-c for _, _, c, _ in sel])
    ata = m.T @ m
    if abs(np.linalg.det(ata)) < 1e-9:
        return _boundary_line_fallback(road_mask)
    uv = np.linalg.solve(ata, m.T @ rhs)
    confidence = float(votes[peak]) / max(len(lines), 1)
    return VanishingPoint(x=float(uv[0]), y=float(uv[1]), confidence=min(1.0, confidence))


# ---------------------------------------------------------------------------
# Boundaries and control points
# ---------------------------------------------------------------------------


def _moving_average(vals: np.ndarray, window: int = 9) -> np.ndarray:
    half = window // 2
    out = np.empty_like(vals, dtype=np.float64)
    n = vals.size
    for i in range(n):
        k = min(half, i, n - 1 - i)  # symmetric shrink near the ends
        out[i] = vals[i - k : i + k + 1].mean()
    return out


def extract_boundaries(road_mask: np.ndarray) -> RoadBoundaries:
    """Leftmost/rightmost road column per row of the largest component,
    smoothed with a centered 9-row moving average."""
    mask = np.asarray(road_mask, bool)
    if not mask.any():
        raise DataError("road mask is empty")
    comp, n = kernels.label_components(mask.astype(np.int32))
    comp = np.asarray(comp)
    sizes = np.bincount(comp.ravel(), minlength=n)
    road_comp_ids = np.unique(comp[mask])
    main = road_comp_ids[np.argmax(sizes[road_comp_ids])]
    mask = comp == main
    rows = np.nonzero(mask.any(axis=1))[0]
    cols = np.arange(mask.shape[1])
    left = np.array([cols[mask[r]].min() for r in rows], dtype=np.float64)
    right = np.array([cols[mask[r]].max() for r in rows], dtype=np.float64)
    return RoadBoundaries(rows=rows, left=_moving_average(left), right=_moving_average(right))


def generate_control_points(
    boundaries: RoadBoundaries, vp: VanishingPoint, k_c: int
) -> ControlPoints:
    """K_c points per side at rows uniformly spaced between the image-edge
    (nearest) row and the vanishing-point-constrained (farthest) row."""
    if k_c < 2:
        raise DataError(f"k_c must be >= 2, got {k_c}")
    if boundaries.rows.size < 2:
        raise DataError("boundary support shorter than 2 rows")
    near_row = float(boundaries.rows[-1])
    far_row = max(float(boundaries.rows[0]), vp.y + HORIZON_MARGIN_PX)
    if far_row >= near_row:
        raise DataError("no boundary support below the vanishing point margin")
    rows = np.linspace(near_row, far_row, k_c)
    sides = []
    for cols in (boundaries.left, boundaries.right):
        xs = np.interp(rows, boundaries.rows.astype(np.float64), cols)
        sides.append(np.stack([xs, rows], axis=1))
    return ControlPoints(left=sides[0], right=sides[1])


# ---------------------------------------------------------------------------
# Corridor construction
# ---------------------------------------------------------------------------


def _strip_faces(n: int, offset_a: int, offset_b: int) -> np.ndarray:
    faces = []
    for k in range(n - 1):
        faces.append((offset_a + k, offset_b + k, offset_b + k + 1))
        faces.append((offset_a + k, offset_b + k + 1, offset_a + k + 1))
    return np.array(faces, dtype=np.int32)


def _texture_for(pin: Pinhole, vertices: np.ndarray, frame: Frame):
    """Project vertices, crop the enclosing frame region, map uv into it."""
    h, w = frame.pixels.shape[:2]
    proj = pin.project(vertices)
    u0 = int(np.clip(np.floor(proj[:, 0].min()) - 1, 0, w - 2))
    v0 = int(np.clip(np.floor(proj[:, 1].min()) - 1, 0, h - 2))
    u1 = int(np.clip(np.ceil(proj[:, 0].max()) + 2, u0 + 2, w))
    v1 = int(np.clip(np.ceil(proj[:, 1].max()) + 2, v0 + 2, h))
    tex = frame.pixels[v0:v1, u0:u1].copy()
    tw, th = u1 - u0, v1 - v0
    uv = np.stack(
        [(proj[:, 0] - u0) / (tw - 1), (proj[:, 1] - v0) / (th - 1)], axis=1
    )
    return tex, uv, (u0, v0, u1, v1)


def build_corridor(
    control_points: ControlPoints,
    frame: Frame,
    camera: CameraParams,
    vp: VanishingPoint | None = None,
    frame_index: int = 0,
    wall_height_m: float = WALL_HEIGHT_M,
) -> SceneModel:
    """Back-project control points to the ground plane and erect the
    corridor: road strip, vertical side walls, back wall and sky quad."""
    h, w = frame.pixels.shape[:2]
    pin = Pinhole(camera, w, h)
    left_w = np.array([pin.ground_point(x, y) for x, y in control_points.left])
    right_w = np.array([pin.ground_point(x, y) for x, y in control_points.right])
    k_c = left_w.shape[0]

    planes: dict[str, ScenePlane] = {}

    def add_plane(name, vertices, faces):
        tex, uv, crop = _texture_for(pin, vertices, frame)
        planes[name] = ScenePlane(
            name=name,
            vertices=vertices.astype(np.float64),
            faces=faces,
            uv=uv,
            texture=tex,
            crop_box=crop,
        )

    road_v = np.concatenate([left_w, right_w])
    add_plane("road", road_v, _strip_faces(k_c, 0, k_c))

    up = np.array([0.0, wall_height_m, 0.0])
    for name, base in (("left_wall", left_w), ("right_wall", right_w)):
        verts = np.concatenate([base, base + up])
        add_plane(name, verts, _strip_faces(k_c, 0, k_c))

    lf, rf = left_w[-1], right_w[-1]
    back_v = np.array([lf, rf, lf + up, rf + up])
    back_f = np.array([[0, 1, 3], [0, 3, 2]], dtype=np.int32)
    add_plane("back_wall", back_v, back_f)

    z_far = float(max(lf[2], rf[2]))
    # sky top chosen so the quad reaches image row 0 from the source pose
    y_sky = camera.height_m + pin.cy * z_far / pin.f
    sky_v = np.array(
        [
            [lf[0], wall_height_m, lf[2]],
            [rf[0], wall_height_m, rf[2]],
            [lf[0], y_sky, lf[2]],
            [rf[0], y_sky, rf[2]],
        ]
    )
    add_plane("sky", sky_v, back_f.copy())

    return SceneModel(
        frame_index=frame_index,
        camera=camera,
        image_size=(h, w),
        vp=vp or VanishingPoint(pin.cx, pin.cy, 0.0),
        control_points=control_points,
        planes=planes,
    )


def carve_foreground(frame: Frame, fg_mask: np.ndarray, scene: SceneModel) -> SceneModel:
    """Erect RGBA billboards for foreground components and re-texture the
    background planes from a diffusion-inpainted frame."""
    fg_mask = np.asarray(fg_mask, bool)
    if not fg_mask.any():
        return scene
    h, w = frame.pixels.shape[:2]
    pin = Pinhole(scene.camera, w, h)

    inpainted = frame.pixels.astype(np.float64).copy()
    kernels.diffuse_fill(inpainted, fg_mask, 500)
    inpainted_frame = Frame(
        index=frame.index, pixels=np.clip(inpainted + 0.5, 0, 255).astype(np.uint8)
    )

    new_planes = {}
    for name, plane in scene.planes.items():
        tex, uv, crop = _texture_for(pin, plane.vertices, inpainted_frame)
        new_planes[name] = replace_plane(plane, tex, uv, crop)

    comp, n = kernels.label_components(fg_mask.astype(np.int32))
    comp = np.asarray(comp)
    billboards = []
    for cid in range(n):
        sel = comp == cid
        if not (sel & fg_mask).any():
            continue
        rows = np.nonzero(sel.any(axis=1))[0]
        cols = np.nonzero(sel.any(axis=0))[0]
        r0, r1 = int(rows[0]), int(rows[-1])
        c0, c1 = int(cols[0]), int(cols[-1])
        u_mid = (c0 + c1) / 2.0
        ground = pin.ground_point(u_mid, float(r1))
        depth = float(ground[2])
        corners = np.array(
            [
                pin.point_at_depth(c0, r0, depth),
                pin.point_at_depth(c1, r0, depth),
                pin.point_at_depth(c0, r1, depth),
                pin.point_at_depth(c1, r1, depth),
            ]
        )
        rgba = np.zeros((r1 - r0 + 1, c1 - c0 + 1, 4), dtype=np.uint8)
        rgba[..., :3] = frame.pixels[r0 : r1 + 1, c0 : c1 + 1]
        rgba[..., 3] = np.where(fg_mask[r0 : r1 + 1, c0 : c1 + 1], 255, 0)
        uv = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
        faces = np.array([[0, 1, 3], [0, 3, 2]], dtype=np.int32)
        billboards.append(
            Billboard(
                vertices=corners,
                faces=faces,
                uv=uv,
                texture_rgba=rgba,
                depth_m=depth,
                link=scene.frame_index,
            )
        )
    return SceneModel(
        frame_index=scene.frame_index,
        camera=scene.camera,
        image_size=scene.image_size,
        vp=scene.vp,
        control_points=scene.control_points,
        planes=new_planes,
        foreground=billboards,
    )


def replace_plane(plane: ScenePlane, tex, uv, crop) -> ScenePlane:
    return ScenePlane(
        name=plane.name,
        vertices=plane.vertices,
        faces=plane.faces,
        uv=uv,
        texture=tex,
        crop_box=crop,
    )
