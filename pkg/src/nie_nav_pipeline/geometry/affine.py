"""
4x4 transform algebra on camera-frame points and the ground-truth motion of a keypoint set between two steps.
"""
from dataclasses import dataclass

import numpy as np

from nie_nav_pipeline.geometry.camera import CameraModel, camera_to_world_matrix, extrinsic_matrix
from nie_nav_pipeline.tensor_core import Tensor, ops


class EmptyKeypointSetError(ValueError):
    """Raised when a statistic is requested from zero keypoints."""


@dataclass(frozen=True)
class ObjectPose:
    position: tuple[float, float, float]
    yaw: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(p) for p in self.position))
        object.__setattr__(self, "yaw", float(self.yaw) % 360.0)


def is_affine4(m: np.ndarray) -> bool:
    """True for a 4x4 matrix, or a batch of them, whose bottom row is (0, 0, 0, 1)."""
    m = np.asarray(m)
    return m.ndim >= 2 and m.shape[-2:] == (4, 4) and bool(np.all(m[..., 3, :] == [0.0, 0.0, 0.0, 1.0]))


def yaw_matrix(yaw: float) -> np.ndarray:
    """Rotation about world +Y, same sense as the camera azimuth."""
    rad = np.radians(yaw)
    c, s = np.cos(rad), np.sin(rad)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def translation_matrix(offset) -> np.ndarray:
    m = np.eye(4)
    m[:3, 3] = offset
    return m


def object_world_matrix(pose: ObjectPose) -> np.ndarray:
    """Object-local to world."""
    m = translation_matrix(pose.position)
    m[:3, :3] = yaw_matrix(pose.yaw)
    return m


def object_motion(pose_t: ObjectPose, pose_t1: ObjectPose) -> np.ndarray:
    """World-frame rigid motion taking the object from pose_t to pose_t1."""
    rotation = np.eye(4)
    rotation[:3, :3] = yaw_matrix(pose_t1.yaw - pose_t.yaw)
    return translation_matrix(pose_t1.position) @ rotation @ translation_matrix(-np.asarray(pose_t.position))


def apply_affine(points: np.ndarray, m: np.ndarray) -> np.ndarray:
    """
    Maps every point p (last axis of size 3) to the first three components of m (p, 1). Leading batch axes of m
    broadcast against the point-set axes.
    """
    points = np.asarray(points)
    m = np.asarray(m)
    assert is_affine4(m), f"Expected 4x4 affine matrices, got shape {m.shape}"
    return np.einsum("...ij,...nj->...ni", m[..., :3, :3], points) + m[..., None, :3, 3]


def ground_truth_affine(obj_t: ObjectPose, obj_t1: ObjectPose, cam_t: CameraModel, cam_t1: CameraModel) -> np.ndarray:
    """
    Camera-to-world at t, then the object motion, then world-to-camera at t+1. Takes a point rigidly attached to
    the object from the camera frame at t to the camera frame at t+1.
    """
    if cam_t.same_pose(cam_t1) and obj_t == obj_t1:
        return np.eye(4)
    m = extrinsic_matrix(cam_t1) @ object_motion(obj_t, obj_t1) @ camera_to_world_matrix(cam_t)
    m[3] = (0.0, 0.0, 0.0, 1.0)
    return m


def keypoint_center(points: np.ndarray | Tensor) -> np.ndarray | Tensor:
    """
    Mean over the keypoint axis (second to last) of one keypoint set or a batch of them. A Tensor stays on the graph.
    """
    if isinstance(points, Tensor):
        if points.shape[-2] == 0:
            raise EmptyKeypointSetError("Cannot average an empty keypoint set")
        return ops.mean(points, axis=-2)
    points = np.asarray(points, dtype=np.float64)
    if points.shape[-2] == 0:
        raise EmptyKeypointSetError("Cannot average an empty keypoint set")
    return points.mean(axis=-2)
