"""
Portable-pixmap dumps of observations and detected corners.
"""
from pathlib import Path

import cv2
import numpy as np

from nie_nav_pipeline.keypoints.lift import KeypointSet
from nie_nav_pipeline.worldsim import RESERVED_COLORS, Observation, category_color


def to_uint8(image: np.ndarray) -> np.ndarray:
    return np.clip(np.round(np.asarray(image) * 255.0), 0, 255).astype(np.uint8)


def write_ppm(filepath: Path, image: np.ndarray):
    """
    Writes an (H, W, 3) RGB image, float in [0, 1] or uint8, as binary .ppm.
    """
    assert filepath.suffix == ".ppm", "The image file does not have the correct file extension. Must be .ppm"
    filepath.parent.mkdir(parents=True, exist_ok=True)
    if image.dtype != np.uint8:
        image = to_uint8(image)
    cv2.imwrite(str(filepath), cv2.cvtColor(image, cv2.COLOR_RGB2BGR))


def depth_image(depth: np.ndarray) -> np.ndarray:
    """Grey-scale depth, near is bright."""
    scaled = 1.0 - depth / max(float(depth.max()), 1e-9)
    return np.repeat(scaled[..., None], 3, axis=2)


def segmentation_image(instance: np.ndarray, category: np.ndarray) -> np.ndarray:
    image = np.zeros((*instance.shape, 3))
    for surface_id, rgb in RESERVED_COLORS.items():
        image[instance == surface_id] = rgb
    for object_id in np.unique(instance[instance >= 0]):
        mask = instance == object_id
        # darker shade per instance so neighbouring instances of one category stay distinguishable
        image[mask] = category_color(int(category[mask][0])) * (0.6 + 0.4 / (1 + object_id % 4))
    return image


def draw_keypoints(image: np.ndarray, keypoints: KeypointSet, radius: int = 1) -> np.ndarray:
    """
    Overlay of every present category's corners: filled circles in the category colour with a white ring.
    """
    canvas = to_uint8(image) if image.dtype != np.uint8 else image.copy()
    canvas = np.ascontiguousarray(canvas)
    for c in np.flatnonzero(keypoints.presence):
        rgb = tuple(int(x) for x in to_uint8(category_color(int(c))))
        for u, v in keypoints.pixels[c]:
            cv2.circle(canvas, (int(u), int(v)), radius + 1, (255, 255, 255), 1)
            cv2.circle(canvas, (int(u), int(v)), radius, rgb, -1)
    return canvas


def write_observation_images(directory: Path, stem: str, observation: Observation, keypoints: KeypointSet):
    write_ppm(directory / f"{stem}_color.ppm", observation.color)
    write_ppm(directory / f"{stem}_depth.ppm", depth_image(observation.depth))
    write_ppm(directory / f"{stem}_segmentation.ppm", segmentation_image(observation.instance, observation.category))
    write_ppm(directory / f"{stem}_keypoints.ppm", draw_keypoints(observation.color, keypoints))
