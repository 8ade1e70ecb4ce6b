"""
Pinhole camera model.

Camera frame: X right, Y up, Z forward; image v grows downward. The world frame has Y up; an azimuth of 0 looks
along world +Z and positive azimuth turns the view towards +X. Positive elevation looks up.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from nie_nav_pipeline.settings import RenderSettings


class InvalidDepthError(ValueError):
    """Raised for a non-positive depth reading."""


@dataclass(frozen=True)
class CameraModel:
    focal: float
    cx: float
    cy: float
    width: int
    height: int
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    azimuth: float = 0.0
    elevation: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=np.float64))
        assert self.focal > 0, "Focal length must be positive"
        assert 0 <= self.cx < self.width and 0 <= self.cy < self.height, "Principal point must lie inside the image"

    @property
    def rotation(self) -> np.ndarray:
        """Camera-to-world rotation; its columns are the camera axes in world coordinates."""
        return Rotation.from_euler("YX", [self.azimuth, -self.elevation], degrees=True).as_matrix()

    def same_pose(self, other: "CameraModel") -> bool:
        return (np.array_equal(self.position, other.position) and self.azimuth == other.azimuth
                and self.elevation == other.elevation)


def intrinsics(width: int, height: int, horizontal_fov: float = 90.0) -> tuple[float, float, float]:
    focal = (width / 2) / np.tan(np.radians(horizontal_fov) / 2)
    return float(focal), (width - 1) / 2, (height - 1) / 2


def extrinsic_matrix(cam: CameraModel) -> np.ndarray:
    """World-to-camera rigid transform."""
    rotation = cam.rotation.T
    extrinsic = np.eye(4)
    extrinsic[:3, :3] = rotation
    extrinsic[:3, 3] = -rotation @ cam.position
    return extrinsic


def camera_to_world_matrix(cam: CameraModel) -> np.ndarray:
    pose = np.eye(4)
    pose[:3, :3] = cam.rotation
    pose[:3, 3] = cam.position
    return pose


def world_to_camera(points: np.ndarray, cam: CameraModel) -> np.ndarray:
    return (np.asarray(points) - cam.position) @ cam.rotation


def camera_to_world(points: np.ndarray, cam: CameraModel) -> np.ndarray:
    return np.asarray(points) @ cam.rotation.T + cam.position


def pixel_rays(cam: CameraModel) -> np.ndarray:
    """
    Unnormalised camera-frame rays ((u - cx)/f, -(v - cy)/f, 1) of every pixel centre, shape (H, W, 3).
    """
    v, u = np.mgrid[0:cam.height, 0:cam.width].astype(np.float64)
    return np.stack([(u - cam.cx) / cam.focal, -(v - cam.cy) / cam.focal, np.ones_like(u)], axis=-1)


def backproject(u, v, depth, cam: CameraModel) -> np.ndarray:
    """
    Lifts pixel(s) with planar depth to camera-frame point(s); scalar inputs give a single 3-vector.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    depth = np.asarray(depth, dtype=np.float64)
    if np.any(depth <= 0):
        raise InvalidDepthError(f"Depth must be positive, got {depth.min()}")
    if np.any((u < -0.5) | (u > cam.width - 0.5) | (v < -0.5) | (v > cam.height - 0.5)):
        raise ValueError(f"Pixel outside the {cam.width}x{cam.height} image")

    x = (u - cam.cx) * depth / cam.focal
    y = -(v - cam.cy) * depth / cam.focal
    return np.stack(np.broadcast_arrays(x, y, depth), axis=-1)


def project(points, cam: CameraModel) -> np.ndarray:
    """
    Inverse of backproject: camera-frame point(s) to (u, v, depth).
    """
    points = np.asarray(points, dtype=np.float64)
    z = points[..., 2]
    if np.any(z <= 0):
        raise InvalidDepthError("Cannot project a point at or behind the camera plane")
    u = cam.cx + cam.focal * points[..., 0] / z
    v = cam.cy - cam.focal * points[..., 1] / z
    return np.stack([u, v, z], axis=-1)


def camera_from_agent(agent, render: RenderSettings) -> CameraModel:
    """
    Camera of an agent (anything with a floor `position` (x, z), `azimuth`, `elevation` and `camera_height`).
    """
    focal, cx, cy = intrinsics(render.width, render.height, render.horizontal_fov)
    x, z = agent.position
    return CameraModel(focal=focal, cx=cx, cy=cy, width=render.width, height=render.height,
                       position=np.array([x, agent.camera_height, z]), azimuth=agent.azimuth,
                       elevation=agent.elevation)
