"""SE(3) pose algebra and pinhole camera math.

Conventions used throughout the package:

- A ``Pose`` maps *camera-frame* points to *world-frame* points:
  ``p_world = R(q) @ p_cam + t``.  Projecting a world point therefore
  applies the inverse pose first.
- Quaternions are stored as ``(w, x, y, z)``, unit norm, canonicalized
  to the ``w >= 0`` hemisphere.
- Image coordinates: ``u`` is the column (along width), ``v`` the row
  (along height).  A continuous coordinate ``(u, v)`` bins into pixel
  ``(floor(v), floor(u))``; pixel centers sit at ``(j + 0.5, i + 0.5)``.
- Point clouds are plain ``(N, 3)`` float arrays; the frame they live
  in (world or camera) is documented per function.

All functions are pure and operate on float64 numpy data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Points closer than this to the camera plane are never projected.
Z_MIN = 0.05

# Per-level init noise: (translation half-range [m], rotation half-range [deg]).
# Level 0 is the zero-noise case used to build noise-free datasets.
NOISE_LEVELS = {
    0: (0.0, 0.0),
    1: (2.0, 10.0),
    2: (1.0, 2.0),
    3: (0.6, 1.0),
}


def quat_mul(q1: np.ndarray, q2: np.ndarray) -> np.ndarray:
    """Hamilton product of two (w, x, y, z) quaternions."""
    w1, x1, y1, z1 = q1
    w2, x2, y2, z2 = q2
    return np.array(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ]
    )


def quat_conj(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_to_rotmat(q: np.ndarray) -> np.ndarray:
    """3x3 rotation matrix of a unit quaternion."""
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_from_axis_angle(axis: np.ndarray, angle_rad: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=np.float64)
    n = np.linalg.norm(axis)
    if n == 0:
        return np.array([1.0, 0.0, 0.0, 0.0])
    half = 0.5 * angle_rad
    return np.concatenate([[math.cos(half)], math.sin(half) / n * axis])


def quat_from_euler_xyz(ax: float, ay: float, az: float) -> np.ndarray:
    """Quaternion for intrinsic-XYZ Euler angles (radians): Rx(ax)·Ry(ay)·Rz(az)."""
    qx = quat_from_axis_angle(np.array([1.0, 0.0, 0.0]), ax)
    qy = quat_from_axis_angle(np.array([0.0, 1.0, 0.0]), ay)
    qz = quat_from_axis_angle(np.array([0.0, 0.0, 1.0]), az)
    return quat_mul(quat_mul(qx, qy), qz)


def _normalize_canonical(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (4,):
        raise ValueError(f"quaternion must have shape (4,), got {q.shape}")
    n = np.linalg.norm(q)
    if not np.isfinite(n) or n < 1e-12:
        raise ValueError(f"degenerate quaternion norm {n}")
    q = q / n
    if q[0] < 0:
        q = -q
    return q


@dataclass(frozen=True, eq=False)
class Pose:
    """SE(3) element: unit quaternion ``q = (w, x, y, z)`` plus translation ``t`` [m]."""

    q: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", _normalize_canonical(self.q))
        t = np.asarray(self.t, dtype=np.float64)
        if t.shape != (3,):
            raise ValueError(f"translation must have shape (3,), got {t.shape}")
        if not np.all(np.isfinite(t)):
            raise ValueError("translation must be finite")
        object.__setattr__(self, "t", t)

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.array([1.0, 0.0, 0.0, 0.0]), np.zeros(3))

    @staticmethod
    def from_matrix(m: np.ndarray) -> "Pose":
        """Pose from a 4x4 (or 3x4) homogeneous matrix."""
        m = np.asarray(m, dtype=np.float64)
        r = m[:3, :3]
        # Shepperd-style recovery, stable for all rotation matrices.
        tr = np.trace(r)
        if tr > 0:
            s = math.sqrt(tr + 1.0) * 2
            q = np.array(
                [0.25 * s, (r[2, 1] - r[1, 2]) / s, (r[0, 2] - r[2, 0]) / s, (r[1, 0] - r[0, 1]) / s]
            )
        else:
            i = int(np.argmax(np.diag(r)))
            if i == 0:
                s = math.sqrt(1.0 + r[0, 0] - r[1, 1] - r[2, 2]) * 2
                q = np.array(
                    [(r[2, 1] - r[1, 2]) / s, 0.25 * s, (r[0, 1] + r[1, 0]) / s, (r[0, 2] + r[2, 0]) / s]
                )
            elif i == 1:
                s = math.sqrt(1.0 + r[1, 1] - r[0, 0] - r[2, 2]) * 2
                q = np.array(
                    [(r[0, 2] - r[2, 0]) / s, (r[0, 1] + r[1, 0]) / s, 0.25 * s, (r[1, 2] + r[2, 1]) / s]
                )
            else:
                s = math.sqrt(1.0 + r[2, 2] - r[0, 0] - r[1, 1]) * 2
                q = np.array(
                    [(r[1, 0] - r[0, 1]) / s, (r[0, 2] + r[2, 0]) / s, (r[1, 2] + r[2, 1]) / s, 0.25 * s]
                )
        return Pose(q, m[:3, 3])

    @property
    def matrix(self) -> np.ndarray:
        """4x4 homogeneous matrix form."""
        m = np.eye(4)
        m[:3, :3] = quat_to_rotmat(self.q)
        m[:3, 3] = self.t
        return m

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Map camera-frame point(s) to the world frame."""
        points = np.asarray(points, dtype=np.float64)
        r = quat_to_rotmat(self.q)
        return points @ r.T + self.t

    def apply_inverse(self, points: np.ndarray) -> np.ndarray:
        """Map world-frame point(s) into this pose's camera frame."""
        points = np.asarray(points, dtype=np.float64)
        r = quat_to_rotmat(self.q)
        return (points - self.t) @ r

    def __repr__(self):
        return f"Pose(q={np.array2string(self.q, precision=6)}, t={np.array2string(self.t, precision=6)})"


def compose(a: Pose, b: Pose) -> Pose:
    """Pose mapping a point through ``b`` then ``a`` (matrix product a·b)."""
    q = quat_mul(a.q, b.q)
    t = a.apply(b.t)
    return Pose(q, t)


def invert(p: Pose) -> Pose:
    qi = quat_conj(p.q)
    ti = -(quat_to_rotmat(qi) @ p.t)
    return Pose(qi, ti)


@dataclass(frozen=True)
class CameraModel:
    """Pinhole intrinsics: focal lengths / principal point in pixels, image size."""

    fx: float
    fy: float
    cx: float
    cy: float
    h: int
    w: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 < self.cx < self.w) or not (0 < self.cy < self.h):
            raise ValueError("principal point must lie inside the image")


@dataclass
class DepthImage:
    """h x w grid of camera-frame depths in meters; 0 marks pixels with no point."""

    values: np.ndarray
    pose: Pose | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError(f"depth grid must be 2-D, got shape {v.shape}")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("depth values must be finite and >= 0")
        self.values = v

    @property
    def valid_mask(self) -> np.ndarray:
        return self.values > 0

    @property
    def valid_count(self) -> int:
        return int(np.count_nonzero(self.values))


def _project_camera_frame(p_cam: np.ndarray, cam: CameraModel):
    """Project camera-frame points; returns (u, v, z, valid) arrays."""
    z = p_cam[:, 2]
    safe_z = np.where(z > Z_MIN, z, 1.0)
    u = cam.fx * p_cam[:, 0] / safe_z + cam.cx
    v = cam.fy * p_cam[:, 1] / safe_z + cam.cy
    valid = (z > Z_MIN) & (u >= 0) & (u < cam.w) & (v >= 0) & (v < cam.h)
    return u, v, z, valid


def project_points(points_world: np.ndarray, pose: Pose, cam: CameraModel):
    """Vectorized pinhole projection of world points through ``pose``-inverse.

    Returns ``(u, v, z, valid)``; ``u``/``v`` are continuous image
    coordinates, only meaningful where ``valid`` is True.
    """
    points_world = np.atleast_2d(np.asarray(points_world, dtype=np.float64))
    p_cam = pose.apply_inverse(points_world)
    return _project_camera_frame(p_cam, cam)


def project_point(p_world: np.ndarray, pose: Pose, cam: CameraModel):
    """Project one world point. Returns ``(u, v, z)`` or None if outside."""
    u, v, z, valid = project_points(np.asarray(p_world, dtype=np.float64)[None, :], pose, cam)
    if not valid[0]:
        return None
    return float(u[0]), float(v[0]), float(z[0])


def unproject(u: float, v: float, z: float, pose: Pose, cam: CameraModel) -> np.ndarray:
    """Invert the projection: continuous pixel coords + depth -> world point."""
    if z <= 0:
        raise ValueError(f"depth must be positive, got {z}")
    x = (u - cam.cx) / cam.fx * z
    y = (v - cam.cy) / cam.fy * z
    return pose.apply(np.array([x, y, z]))


def render_depth(points_world: np.ndarray, pose: Pose, cam: CameraModel) -> DepthImage:
    """Z-buffer rasterization: per pixel, the minimum depth of projecting points."""
    depth, _ = render_depth_with_provenance(points_world, pose, cam)
    return depth


def render_depth_with_provenance(points_world: np.ndarray, pose: Pose, cam: CameraModel):
    """Z-buffer render that also reports which input point won each pixel.

    Returns ``(DepthImage, src)`` where ``src[i, j]`` is the index into
    ``points_world`` of the nearest point at pixel ``(i, j)``, or -1.
    Ties on depth resolve to the largest point index.
    """
    points_world = np.asarray(points_world, dtype=np.float64).reshape(-1, 3)
    grid = np.zeros((cam.h, cam.w), dtype=np.float64)
    src = np.full((cam.h, cam.w), -1, dtype=np.int64)
    if len(points_world) == 0:
        return DepthImage(grid, pose), src
    u, v, z, valid = project_points(points_world, pose, cam)
    idx = np.flatnonzero(valid)
    if len(idx) == 0:
        return DepthImage(grid, pose), src
    iu = np.floor(u[idx]).astype(np.int64)
    iv = np.floor(v[idx]).astype(np.int64)
    zi = z[idx]
    # Write farthest first so the nearest point lands last.
    order = np.argsort(-zi, kind="stable")
    grid[iv[order], iu[order]] = zi[order]
    src[iv[order], iu[order]] = idx[order]
    return DepthImage(grid, pose), src


def sample_pose_noise(level: int, rng: np.random.Generator) -> Pose:
    """Uniform pose perturbation for the given init-noise level.

    Translation components are uniform in the level's meter range;
    rotation comes from three independent uniform intrinsic-XYZ Euler
    angles in the level's degree range.
    """
    if level not in NOISE_LEVELS:
        raise ValueError(f"unknown noise level {level!r}; expected one of {sorted(NOISE_LEVELS)}")
    t_range, r_range_deg = NOISE_LEVELS[level]
    t = rng.uniform(-t_range, t_range, size=3)
    ang = np.deg2rad(rng.uniform(-r_range_deg, r_range_deg, size=3))
    q = quat_from_euler_xyz(ang[0], ang[1], ang[2])
    return Pose(q, t)


def perturb(pose: Pose, level: int, rng: np.random.Generator) -> Pose:
    """Right-compose ``pose`` with a sampled perturbation: ``T_init = T ⊕ noise``."""
    return compose(pose, sample_pose_noise(level, rng))


# Normalization-plane remap: the open region (-0.8, 0.8) x (-0.4, 0.4) of
# x/z, y/z coordinates maps affinely onto a 768 x 384 image.
NORM_PLANE_X = 0.8
NORM_PLANE_Y = 0.4
NORM_PLANE_W = 768
NORM_PLANE_H = 384


def normalized_plane_remap(p_cam: np.ndarray):
    """Map a camera-frame point onto the normalization-plane image.

    Returns continuous ``(u, v)`` or None when behind the near plane or
    outside the open normalization region.
    """
    x, y, z = np.asarray(p_cam, dtype=np.float64)
    if z <= Z_MIN:
        return None
    xn = x / z
    yn = y / z
    if not (-NORM_PLANE_X < xn < NORM_PLANE_X) or not (-NORM_PLANE_Y < yn < NORM_PLANE_Y):
        return None
    u = (xn + NORM_PLANE_X) / (2 * NORM_PLANE_X) * NORM_PLANE_W
    v = (yn + NORM_PLANE_Y) / (2 * NORM_PLANE_Y) * NORM_PLANE_H
    return u, v


def quat_geodesic_deg(q1: np.ndarray, q2: np.ndarray) -> float:
    """Geodesic angle in degrees between two unit quaternions, in [0, 180]."""
    q1 = _normalize_canonical(np.asarray(q1, dtype=np.float64))
    q2 = _normalize_canonical(np.asarray(q2, dtype=np.float64))
    d = quat_mul(quat_conj(q1), q2)
    angle = 2.0 * math.atan2(np.linalg.norm(d[1:]), abs(d[0]))
    return math.degrees(angle)
