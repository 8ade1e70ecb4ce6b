"""
Geodesic distances on the 4-connected cell grid.
"""
import math
from collections import deque
from collections.abc import Iterable
from functools import lru_cache
from typing import Literal

import numpy as np

from nie_nav_pipeline.geometry import ObjectPose
from nie_nav_pipeline.worldsim.collision import cell_square, footprint, footprint_overlaps, overlaps_walls
from nie_nav_pipeline.worldsim.state import AgentState, ObjectInstance, WorldState

Mover = Literal["agent", "object"]

NEIGHBOURS = ((1, 0), (-1, 0), (0, 1), (0, -1))


def object_occupancy(state: WorldState, ignore_ids: Iterable[int] = (), eps: float = 1e-9) -> np.ndarray:
    """
    Cells whose square overlaps at least one object footprint.
    """
    ignore_ids = set(ignore_ids)
    occupied = np.zeros(state.grid_shape, dtype=bool)
    nx, nz = state.grid_shape
    for obj in state.objects:
        if obj.id in ignore_ids:
            continue
        polygon = footprint(obj)
        lo = np.clip(np.floor(polygon.min(axis=0) / state.cell_size).astype(int), 0, [nx - 1, nz - 1])
        hi = np.clip(np.floor(polygon.max(axis=0) / state.cell_size).astype(int), 0, [nx - 1, nz - 1])
        for i in range(lo[0], hi[0] + 1):
            for j in range(lo[1], hi[1] + 1):
                if not occupied[i, j] and footprint_overlaps(polygon, cell_square((i, j), state.cell_size), eps):
                    occupied[i, j] = True
    return occupied


def agent_traversable(state: WorldState, ignore_ids: Iterable[int] = (), eps: float = 1e-9) -> np.ndarray:
    return ~state.walls & ~object_occupancy(state, ignore_ids, eps)


def object_traversable(state: WorldState, obj: ObjectInstance, eps: float = 1e-9) -> np.ndarray:
    """
    Cells where `obj`, centred on the cell with its current yaw, does not overlap any wall.
    """
    return _object_traversable(state.walls.tobytes(), state.grid_shape, state.cell_size, obj.size, obj.pose.yaw, eps)


@lru_cache(maxsize=256)
def _object_traversable(walls: bytes, shape: tuple[int, int], cell_size: float, size: tuple[float, float, float],
                        yaw: float, eps: float) -> np.ndarray:
    state = WorldState(walls=np.frombuffer(walls, dtype=bool).reshape(shape), objects=(), agent=AgentState((0.0, 0.0)),
                       target=(0.0, 0.0), cell_size=cell_size)
    footprint_model = ObjectInstance(id=-1, category=0, size=size, pose=ObjectPose((0.0, 0.0, 0.0), yaw))
    traversable = ~state.walls
    for i, j in np.argwhere(traversable):
        if overlaps_walls(state, footprint(footprint_model, center=state.cell_center((i, j))), eps):
            traversable[i, j] = False
    traversable.flags.writeable = False
    return traversable


def grid_distance(traversable: np.ndarray, start: tuple[int, int], goal: tuple[int, int]) -> int | None:
    """
    Breadth-first search step count from start to goal; the start cell is always enterable.
    """
    if start == goal:
        return 0
    if not traversable[goal]:
        return None
    nx, nz = traversable.shape
    visited = np.zeros_like(traversable)
    visited[start] = True
    queue = deque([(start, 0)])
    while queue:
        (i, j), steps = queue.popleft()
        for di, dj in NEIGHBOURS:
            ni, nj = i + di, j + dj
            if not (0 <= ni < nx and 0 <= nj < nz) or visited[ni, nj] or not traversable[ni, nj]:
                continue
            if (ni, nj) == goal:
                return steps + 1
            visited[ni, nj] = True
            queue.append(((ni, nj), steps + 1))
    return None


def grid_path(traversable: np.ndarray, start: tuple[int, int], goal: tuple[int, int]) -> list[tuple[int, int]] | None:
    """
    Cells of one shortest start-to-goal path, both ends included, or None if unreachable.
    """
    nx, nz = traversable.shape
    parents = {start: None}
    queue = deque([start])
    while queue:
        cell = queue.popleft()
        if cell == goal:
            path = []
            while cell is not None:
                path.append(cell)
                cell = parents[cell]
            return path[::-1]
        for di, dj in NEIGHBOURS:
            nxt = (cell[0] + di, cell[1] + dj)
            if 0 <= nxt[0] < nx and 0 <= nxt[1] < nz and nxt not in parents and traversable[nxt]:
                parents[nxt] = cell
                queue.append(nxt)
    return None


def geodesic_distance(state: WorldState, start, goal, mover: Mover = "agent", obj: ObjectInstance | None = None,
                      ignore_ids: Iterable[int] = (), eps: float = 1e-9) -> float:
    """
    Shortest 4-connected path length in meters between the cells containing two floor points, or math.inf if
    unreachable. `ignore_ids` treats those objects as absent for the agent mover.
    """
    if mover == "agent":
        traversable = agent_traversable(state, ignore_ids, eps)
    else:
        assert obj is not None, "The object mover needs the object whose footprint is moved"
        traversable = object_traversable(state, obj, eps)

    steps = grid_distance(traversable, state.cell_of(start), state.cell_of(goal))
    return math.inf if steps is None else steps * state.cell_size


def path_exists(state: WorldState, eps: float = 1e-9) -> bool:
    return math.isfinite(geodesic_distance(state, state.agent.position, state.target, mover="agent", eps=eps))
