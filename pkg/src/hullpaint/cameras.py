"""Pinhole camera model: intrinsics, camera-to-world pose, rays, projection.

Convention: camera space has +x right, +y down, +z forward into the scene.
Pixel (u, v) indexes column u, row v; the pixel's center sits at continuous
image coordinates (u + 0.5, v + 0.5).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError

ROTATION_TOL = 1e-6


@dataclass(frozen=True)
class CameraModel:
    """Pinhole intrinsics plus a rigid camera-to-world transform (4x4 row-major)."""

    width: int
    height: int
    fx: float
    fy: float
    cx: float
    cy: float
    c2w: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise InvalidInputError(f"image dimensions must be positive, got {self.width}x{self.height}")
        if self.fx <= 0 or self.fy <= 0:
            raise InvalidInputError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        c2w = np.asarray(self.c2w, dtype=np.float64)
        if c2w.shape != (4, 4):
            raise InvalidInputError(f"c2w must be 4x4, got shape {c2w.shape}")
        if not np.all(np.isfinite(c2w)):
            raise InvalidInputError("c2w contains non-finite values")
        rot = c2w[:3, :3]
        if not np.allclose(rot @ rot.T, np.eye(3), atol=ROTATION_TOL):
            raise InvalidInputError("c2w rotation block is not orthonormal within 1e-6")
        c2w = c2w.copy()
        c2w.setflags(write=False)
        object.__setattr__(self, "c2w", c2w)

    @property
    def rotation(self) -> np.ndarray:
        return self.c2w[:3, :3]

    @property
    def position(self) -> np.ndarray:
        return self.c2w[:3, 3]

    def pixel_rays(self, pixels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """World-space (origins, unit directions) for integer pixel coords (N, 2)."""
        px = np.asarray(pixels, dtype=np.float64).reshape(-1, 2)
        dirs_cam = np.stack(
            [
                (px[:, 0] + 0.5 - self.cx) / self.fx,
                (px[:, 1] + 0.5 - self.cy) / self.fy,
                np.ones(len(px)),
            ],
            axis=-1,
        )
        dirs_cam /= np.linalg.norm(dirs_cam, axis=-1, keepdims=True)
        dirs = dirs_cam @ self.rotation.T
        origins = np.broadcast_to(self.position, dirs.shape).copy()
        return origins, dirs

    def ray_grid(self) -> tuple[np.ndarray, np.ndarray]:
        """Rays for every pixel, row-major: origins (H*W, 3), directions (H*W, 3)."""
        v, u = np.mgrid[0 : self.height, 0 : self.width]
        pixels = np.stack([u.ravel(), v.ravel()], axis=-1)
        return self.pixel_rays(pixels)

    def world_to_camera(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        return (pts - self.position) @ self.rotation

    def project(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Project world points to continuous image coords.

        Returns (uv (N, 2), z (N,)); uv is meaningful only where z > 0.
        """
        cam = self.world_to_camera(points)
        z = cam[:, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            u = cam[:, 0] / z * self.fx + self.cx
            v = cam[:, 1] / z * self.fy + self.cy
        return np.stack([u, v], axis=-1), z

    def scaled(self, width: int, height: int) -> "CameraModel":
        """Same pose and field of view at a different pixel resolution."""
        sx = width / self.width
        sy = height / self.height
        return CameraModel(
            width=width,
            height=height,
            fx=self.fx * sx,
            fy=self.fy * sy,
            cx=self.cx * sx,
            cy=self.cy * sy,
            c2w=self.c2w,
        )


def look_at(
    eye,
    target,
    up=(0.0, 0.0, 1.0),
    *,
    width: int,
    height: int,
    focal: float,
) -> CameraModel:
    """Camera at `eye` looking toward `target`, with principal point centered."""
    eye = np.asarray(eye, dtype=np.float64)
    forward = np.asarray(target, dtype=np.float64) - eye
    norm = np.linalg.norm(forward)
    if norm == 0:
        raise InvalidInputError("look_at eye and target coincide")
    forward /= norm
    right = np.cross(forward, np.asarray(up, dtype=np.float64))
    rnorm = np.linalg.norm(right)
    if rnorm < 1e-12:
        # Forward is parallel to up; pick any perpendicular axis.
        right = np.cross(forward, np.array([1.0, 0.0, 0.0]))
        rnorm = np.linalg.norm(right)
        if rnorm < 1e-12:
            right = np.cross(forward, np.array([0.0, 1.0, 0.0]))
            rnorm = np.linalg.norm(right)
    right /= rnorm
    down = np.cross(forward, right)
    c2w = np.eye(4)
    c2w[:3, 0] = right
    c2w[:3, 1] = down
    c2w[:3, 2] = forward
    c2w[:3, 3] = eye
    return CameraModel(
        width=width,
        height=height,
        fx=focal,
        fy=focal,
        cx=width / 2.0,
        cy=height / 2.0,
        c2w=c2w,
    )
