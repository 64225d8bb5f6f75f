"""Pinhole projection and the point-to-pixel gather/scatter pair.

The camera frame is x right, y down, z forward (optical axis).  A 3D point
projects to pixel (row, col) = (round(f*y/z + cy), round(f*x/z + cx)); points
behind the camera or outside the image are "out of view", which is a value
(None), not an error.

`sample_at_points` gathers per-pixel quantities at the projected locations of
LiDAR points (nearest pixel, no interpolation); `scatter_gradient` is its
exact adjoint and accumulates collisions by summation.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ContractError


@dataclass(frozen=True)
class CameraIntrinsics:
    focal: float
    principal_point: tuple[float, float]  # (cx, cy) in pixels
    image_size: tuple[int, int]  # (H, W)

    def __post_init__(self):
        h, w = self.image_size
        cx, cy = self.principal_point
        if self.focal <= 0:
            raise ContractError(f"focal must be positive, got {self.focal}")
        if not (0 <= cx < w and 0 <= cy < h):
            raise ContractError(f"principal point {self.principal_point} outside {h}x{w} image")


def project_point(point, camera: CameraIntrinsics):
    """Project one camera-frame point to its nearest pixel, or None if out of view."""
    x, y, z = float(point[0]), float(point[1]), float(point[2])
    if z <= 0.0:
        return None
    h, w = camera.image_size
    cx, cy = camera.principal_point
    col = int(np.floor(camera.focal * x / z + cx + 0.5))
    row = int(np.floor(camera.focal * y / z + cy + 0.5))
    if 0 <= row < h and 0 <= col < w:
        return (row, col)
    return None


def project_points(points, camera: CameraIntrinsics):
    """Vectorized projection: returns (pixels (N,2) int64, in_view (N,) bool).

    Rows of `pixels` are only meaningful where `in_view` is True.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    h, w = camera.image_size
    cx, cy = camera.principal_point
    z = pts[:, 2]
    front = z > 0.0
    safe_z = np.where(front, z, 1.0)
    col = np.floor(camera.focal * pts[:, 0] / safe_z + cx + 0.5).astype(np.int64)
    row = np.floor(camera.focal * pts[:, 1] / safe_z + cy + 0.5).astype(np.int64)
    in_view = front & (row >= 0) & (row < h) & (col >= 0) & (col < w)
    return np.stack([row, col], axis=1), in_view


def _check_indices(map_shape, pixel_of_point):
    idx = np.asarray(pixel_of_point)
    if idx.ndim != 2 or idx.shape[1] != 2:
        raise ContractError(f"pixel_of_point must be (N, 2), got {idx.shape}")
    h, w = map_shape[0], map_shape[1]
    rows, cols = idx[:, 0], idx[:, 1]
    bad = (rows < 0) | (rows >= h) | (cols < 0) | (cols >= w)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise ContractError(
            f"point {i} maps to pixel ({rows[i]}, {cols[i]}), outside {h}x{w} map"
        )
    return rows, cols


def sample_at_points(map_hwk, pixel_of_point):
    """Gather map values at each point's pixel: output row i = map[r_i, c_i].

    Accepts an (H, W) or (H, W, K) map; returns (N,) or (N, K) accordingly.
    """
    m = np.asarray(map_hwk)
    if m.ndim not in (2, 3):
        raise ContractError(f"map must be (H, W) or (H, W, K), got {m.shape}")
    rows, cols = _check_indices(m.shape, pixel_of_point)
    return m[rows, cols]


def scatter_gradient(point_grads, pixel_of_point, image_size):
    """Adjoint of `sample_at_points`: accumulate point rows into their pixels.

    Pixels hit by several points sum the contributions; untouched pixels stay
    zero.  Returns (H, W) or (H, W, K) matching the shape of `point_grads`.
    """
    g = np.asarray(point_grads)
    h, w = image_size
    rows, cols = _check_indices((h, w), pixel_of_point)
    if g.shape[0] != rows.shape[0]:
        raise ContractError(
            f"point_grads has {g.shape[0]} rows for {rows.shape[0]} points"
        )
    out_shape = (h, w) if g.ndim == 1 else (h, w) + g.shape[1:]
    out = np.zeros(out_shape, dtype=g.dtype)
    np.add.at(out, (rows, cols), g)
    return out
