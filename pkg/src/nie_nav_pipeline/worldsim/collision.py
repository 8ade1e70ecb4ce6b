"""
Separating-axis tests on convex floor footprints, static and swept along a straight line.
"""
import numpy as np

from nie_nav_pipeline.geometry import object_world_matrix
from nie_nav_pipeline.worldsim.state import ObjectInstance, WorldState

_PARALLEL = 1e-12


def footprint(obj: ObjectInstance, center=None, yaw: float | None = None) -> np.ndarray:
    """
    Floor-plane (x, z) corners of an object's footprint, counter-clockwise in local coordinates; optionally for the
    object placed at another centre or yaw.
    """
    w, d, _ = obj.size
    yaw = obj.pose.yaw if yaw is None else yaw
    rad = np.radians(yaw)
    c, s = np.cos(rad), np.sin(rad)
    local = np.array([[-w / 2, -d / 2], [w / 2, -d / 2], [w / 2, d / 2], [-w / 2, d / 2]])
    rotated = np.stack([c * local[:, 0] + s * local[:, 1], -s * local[:, 0] + c * local[:, 1]], axis=1)
    center = obj.floor_position if center is None else np.asarray(center, dtype=np.float64)
    return rotated + center


def cell_square(cell, cell_size: float) -> np.ndarray:
    x0, z0 = cell[0] * cell_size, cell[1] * cell_size
    return np.array([[x0, z0], [x0 + cell_size, z0], [x0 + cell_size, z0 + cell_size], [x0, z0 + cell_size]])


def object_corners(obj: ObjectInstance) -> np.ndarray:
    """
    The 8 world-frame corners of an object's box.
    """
    w, d, h = obj.size
    local = np.array([[sx * w / 2, y, sz * d / 2, 1.0] for y in (0.0, h) for sx in (-1, 1) for sz in (-1, 1)])
    return (local @ object_world_matrix(obj.pose).T)[:, :3]


def _axes(*polygons: np.ndarray) -> np.ndarray:
    normals = []
    for polygon in polygons:
        edges = np.roll(polygon, -1, axis=0) - polygon
        n = np.stack([-edges[:, 1], edges[:, 0]], axis=1)
        normals.append(n / np.linalg.norm(n, axis=1, keepdims=True))
    return np.concatenate(normals)


def footprint_overlaps(a: np.ndarray, b: np.ndarray, eps: float = 1e-9) -> bool:
    """
    True if the two convex polygons overlap by more than `eps` along every separating axis; touching is allowed.
    """
    for axis in _axes(a, b):
        pa, pb = a @ axis, b @ axis
        if min(pa.max() - pb.min(), pb.max() - pa.min()) <= eps:
            return False
    return True


def free_distance(moving: np.ndarray, direction: np.ndarray, obstacle: np.ndarray, eps: float = 1e-9) -> float:
    """
    Distance `moving` can travel along the unit `direction` before it starts to overlap `obstacle`; infinite if the
    two never meet.
    """
    t_enter, t_exit = -np.inf, np.inf
    for axis in _axes(moving, obstacle):
        pa, pb = moving @ axis, obstacle @ axis
        rate = float(direction @ axis)
        if abs(rate) < _PARALLEL:
            if min(pa.max() - pb.min(), pb.max() - pa.min()) <= eps:
                return np.inf
            continue
        lo = (pb.min() - pa.max()) / rate
        hi = (pb.max() - pa.min()) / rate
        if rate < 0:
            lo, hi = hi, lo
        t_enter, t_exit = max(t_enter, lo), min(t_exit, hi)
        if t_enter >= t_exit:
            return np.inf
    if t_exit <= eps:
        # only overlaps behind the start position
        return np.inf
    return max(0.0, t_enter)


def nearby_wall_cells(state: WorldState, polygon: np.ndarray, margin: float) -> list[tuple[int, int]]:
    lo = np.floor((polygon.min(axis=0) - margin) / state.cell_size).astype(int)
    hi = np.floor((polygon.max(axis=0) + margin) / state.cell_size).astype(int)
    nx, nz = state.grid_shape
    lo = np.clip(lo, 0, [nx - 1, nz - 1])
    hi = np.clip(hi, 0, [nx - 1, nz - 1])
    sub = state.walls[lo[0]:hi[0] + 1, lo[1]:hi[1] + 1]
    return [(int(i) + lo[0], int(j) + lo[1]) for i, j in np.argwhere(sub)]


def overlaps_walls(state: WorldState, polygon: np.ndarray, eps: float = 1e-9) -> bool:
    return any(footprint_overlaps(polygon, cell_square(cell, state.cell_size), eps)
               for cell in nearby_wall_cells(state, polygon, 0.0))


def overlaps_anything(state: WorldState, polygon: np.ndarray, ignore_id: int | None = None,
                      eps: float = 1e-9) -> bool:
    """
    Wall, other-object and agent-cell overlap of a candidate footprint.
    """
    if overlaps_walls(state, polygon, eps):
        return True
    if footprint_overlaps(polygon, cell_square(state.cell_of(state.agent.position), state.cell_size), eps):
        return True
    return any(footprint_overlaps(polygon, footprint(o), eps) for o in state.objects if o.id != ignore_id)


def swept_free_distance(state: WorldState, obj: ObjectInstance, direction: np.ndarray, max_distance: float,
                        eps: float = 1e-9) -> float:
    """
    How far `obj` can translate along `direction` (at most `max_distance`) without hitting walls, other objects
    or the agent's cell.
    """
    moving = footprint(obj)
    obstacles = [cell_square(cell, state.cell_size) for cell in nearby_wall_cells(state, moving, max_distance)]
    obstacles.append(cell_square(state.cell_of(state.agent.position), state.cell_size))
    obstacles.extend(footprint(o) for o in state.objects if o.id != obj.id)
    distance = max_distance
    for obstacle in obstacles:
        distance = min(distance, free_distance(moving, direction, obstacle, eps))
    return float(distance)
