"""
Ray-cast sensor: planar depth, instance and category segmentation and flat-shaded colour of every pixel.
"""
from dataclasses import dataclass

import numpy as np

from nie_nav_pipeline.geometry import CameraModel, camera_from_agent, pixel_rays, world_to_camera, yaw_matrix
from nie_nav_pipeline.settings import RenderSettings
from nie_nav_pipeline.worldsim.collision import object_corners
from nie_nav_pipeline.worldsim.state import CEILING_ID, FLOOR_ID, WALL_ID, WorldState

# Flat colours; reserved surfaces first, then one per category (cycled beyond the palette)
RESERVED_COLORS = {
    FLOOR_ID: (0.55, 0.45, 0.35),
    WALL_ID: (0.85, 0.85, 0.80),
    CEILING_ID: (0.95, 0.95, 0.95),
}
CATEGORY_PALETTE = np.array([
    (0.90, 0.10, 0.10),
    (0.10, 0.60, 0.90),
    (0.95, 0.75, 0.10),
    (0.20, 0.75, 0.25),
    (0.60, 0.30, 0.80),
    (0.95, 0.45, 0.70),
    (0.20, 0.20, 0.55),
    (0.45, 0.90, 0.85),
    (0.55, 0.25, 0.10),
    (0.50, 0.50, 0.10),
])


@dataclass(frozen=True)
class Observation:
    color: np.ndarray  # (H, W, 3) in [0, 1]
    depth: np.ndarray  # (H, W) planar depth in meters
    instance: np.ndarray  # (H, W) object id, or a reserved surface id
    category: np.ndarray  # (H, W) object category, or a reserved surface id
    camera: CameraModel


def category_color(category: int) -> np.ndarray:
    return CATEGORY_PALETTE[category % len(CATEGORY_PALETTE)]


def _slab_hits(origins: np.ndarray, directions: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """
    Entry distance of every ray (rows of `origins`/`directions`) into every axis-aligned box (rows of
    `lower`/`upper`); inf where the ray misses or starts inside. Shape (rays, boxes).
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        inverse = 1.0 / directions
        t1 = (lower[None, :, :] - origins[:, None, :]) * inverse[:, None, :]
        t2 = (upper[None, :, :] - origins[:, None, :]) * inverse[:, None, :]
    t_near = np.nanmax(np.fmin(t1, t2), axis=2)
    t_far = np.nanmin(np.fmax(t1, t2), axis=2)
    hit = (t_near <= t_far) & (t_near > 0)
    return np.where(hit, t_near, np.inf)


def _plane_hits(origin_y: float, directions: np.ndarray, height: float, upward: bool) -> np.ndarray:
    dy = directions[:, 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (height - origin_y) / dy
    facing = dy > 0 if upward else dy < 0
    return np.where(facing & (t > 0), t, np.inf)


def render(state: WorldState, settings: RenderSettings = RenderSettings()) -> Observation:
    cam = camera_from_agent(state.agent, settings)
    rays = pixel_rays(cam).reshape(-1, 3)
    # camera z component of every ray is 1, so the hit parameter is the planar depth
    directions = rays @ cam.rotation.T
    n_rays = directions.shape[0]
    origins = np.broadcast_to(cam.position, (n_rays, 3))

    candidates = [
        _plane_hits(cam.position[1], directions, 0.0, upward=False)[:, None],
        _plane_hits(cam.position[1], directions, state.wall_height, upward=True)[:, None],
    ]
    ids = [np.array([FLOOR_ID]), np.array([CEILING_ID])]

    wall_cells = np.argwhere(state.walls)
    if len(wall_cells):
        s = state.cell_size
        lower = np.column_stack([wall_cells[:, 0] * s, np.zeros(len(wall_cells)), wall_cells[:, 1] * s])
        upper = np.column_stack([(wall_cells[:, 0] + 1) * s, np.full(len(wall_cells), state.wall_height),
                                 (wall_cells[:, 1] + 1) * s])
        wall_t = _slab_hits(origins, directions, lower, upper)
        candidates.append(wall_t.min(axis=1, keepdims=True))
        ids.append(np.array([WALL_ID]))

    for obj in state.objects:
        # every hit lies in front of the image plane
        if np.all(world_to_camera(object_corners(obj), cam)[:, 2] <= 0.0):
            continue
        # oriented box: intersect in the object's local frame, where it is axis-aligned
        rotation = yaw_matrix(obj.pose.yaw)
        local_origin = (cam.position - np.asarray(obj.pose.position)) @ rotation
        local_dirs = directions @ rotation
        w, d, h = obj.size
        t = _slab_hits(local_origin[None, :], local_dirs, np.array([[-w / 2, 0.0, -d / 2]]),
                       np.array([[w / 2, h, d / 2]]))
        candidates.append(t)
        ids.append(np.array([obj.id]))

    all_t = np.concatenate(candidates, axis=1)
    all_ids = np.concatenate(ids)
    nearest = np.argmin(all_t, axis=1)
    depth = all_t[np.arange(n_rays), nearest]
    instance = all_ids[nearest]

    category = instance.copy()
    color = np.empty((n_rays, 3))
    for surface_id, rgb in RESERVED_COLORS.items():
        color[instance == surface_id] = rgb
    for obj in state.objects:
        pixels = instance == obj.id
        category[pixels] = obj.category
        color[pixels] = category_color(obj.category)

    shape = (cam.height, cam.width)
    return Observation(color=color.reshape(*shape, 3), depth=depth.reshape(shape),
                       instance=instance.reshape(shape), category=category.reshape(shape), camera=cam)


def visible_instances(observation: Observation) -> frozenset[int]:
    ids = np.unique(observation.instance)
    return frozenset(int(i) for i in ids if i >= 0)
