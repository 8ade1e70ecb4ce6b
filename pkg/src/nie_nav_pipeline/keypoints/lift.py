from dataclasses import dataclass

import numpy as np

from nie_nav_pipeline.geometry import backproject
from nie_nav_pipeline.keypoints.corners import NUM_CORNERS, detect_corners
from nie_nav_pipeline.worldsim import Observation


@dataclass(frozen=True)
class KeypointSet:
    """
    Per-category camera-frame keypoints. Absent categories carry zero points, presence False and instance id -1.
    """
    points: np.ndarray  # (C, 8, 3)
    presence: np.ndarray  # (C,) bool
    pixels: np.ndarray  # (C, 8, 2) (u, v)
    instance_ids: np.ndarray  # (C,)

    @classmethod
    def empty(cls, num_categories: int) -> "KeypointSet":
        return cls(points=np.zeros((num_categories, NUM_CORNERS, 3)), presence=np.zeros(num_categories, dtype=bool),
                   pixels=np.zeros((num_categories, NUM_CORNERS, 2), dtype=np.int64),
                   instance_ids=np.full(num_categories, -1, dtype=np.int64))

    @property
    def num_categories(self) -> int:
        return self.points.shape[0]


def lift_keypoints(observation: Observation, num_categories: int, instance: np.ndarray | None = None,
                   category: np.ndarray | None = None) -> KeypointSet:
    """
    For every category seen in the segmentation: corners of its largest instance (ties to the lower id),
    back-projected with the rendered depth. A corrupted segmentation may be passed in place of the rendered one.
    """
    instance = observation.instance if instance is None else instance
    category = observation.category if category is None else category
    keypoints = KeypointSet.empty(num_categories)

    for c in np.unique(category):
        if c < 0 or c >= num_categories:
            continue
        ids, counts = np.unique(instance[category == c], return_counts=True)
        chosen = ids[np.argmax(counts)]
        corners = detect_corners(instance == chosen)
        u, v = corners[:, 0], corners[:, 1]
        keypoints.points[c] = backproject(u, v, observation.depth[v, u], observation.camera)
        keypoints.pixels[c] = corners
        keypoints.presence[c] = True
        keypoints.instance_ids[c] = chosen
    return keypoints
