"""
Ground-truth keypoint targets of a transition and the closed-form identity-prediction baseline.
"""
import numpy as np

from nie_nav_pipeline.geometry import apply_affine, camera_from_agent, ground_truth_affine
from nie_nav_pipeline.keypoints import KeypointSet
from nie_nav_pipeline.settings import RenderSettings
from nie_nav_pipeline.worldsim import WorldState


def nie_targets(keypoints: KeypointSet, state_t: WorldState, state_t1: WorldState,
                render: RenderSettings) -> tuple[np.ndarray, np.ndarray]:
    """
    Target keypoints for every observed category: its keypoints carried by the ground-truth transform of the
    instance they were detected on, from the camera at t to the camera at t+1.
    Returns (targets (C, 8, 3), observed (C,)).
    """
    cam_t = camera_from_agent(state_t.agent, render)
    cam_t1 = camera_from_agent(state_t1.agent, render)
    targets = np.zeros_like(keypoints.points)
    observed = keypoints.presence.copy()
    for c in np.flatnonzero(keypoints.presence):
        instance_id = int(keypoints.instance_ids[c])
        m = ground_truth_affine(state_t.object_by_id(instance_id).pose, state_t1.object_by_id(instance_id).pose,
                                cam_t, cam_t1)
        targets[c] = apply_affine(keypoints.points[c], m)
    return targets, observed


def identity_baseline_loss(keypoints: np.ndarray, targets: np.ndarray, presence: np.ndarray) -> float:
    """
    Loss of an engine that always predicts unmoved keypoints: mean |keypoints - targets| over the
    observed categories' coordinates of a batch (B, C, 8, 3). 0 when nothing is observed.
    """
    presence = np.asarray(presence, dtype=bool)
    if not presence.any():
        return 0.0
    return float(np.abs(np.asarray(keypoints)[presence] - np.asarray(targets)[presence]).mean())
