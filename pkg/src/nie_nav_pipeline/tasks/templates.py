"""
Procedural room templates. Every template is a wall grid closed by an outer ring of wall cells; grid cell (i, j)
spans x in [i s, (i+1) s] and z in [j s, (j+1) s].
"""
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy import ndimage

from nie_nav_pipeline.settings import DatasetSettings
from nie_nav_pipeline.worldsim import empty_room

TemplateName = Literal["open", "partition", "corridor"]

MIN_SIDE_CELLS = 3
CORRIDOR_LENGTH = (4, 8)
CORRIDOR_WIDTH = (2, 3)
DOORWAY_WIDTH = (1, 2)
STUB_MIN_CELLS = 2


class EpisodeGenerationError(RuntimeError):
    """Raised when no valid episode could be placed in a template within the allowed attempts."""

    def __init__(self, template: str, detail: str):
        self.template = template
        super().__init__(f"Template '{template}': {detail}")


@dataclass(frozen=True)
class RoomTemplate:
    name: TemplateName
    walls: np.ndarray  # bool (nx, nz)
    slots: tuple[tuple[int, int], ...] = ()  # cells where obstacles may be spawned
    side_a: tuple[tuple[int, int], ...] = ()  # free cells on the agent's side of a separating feature
    side_b: tuple[tuple[int, int], ...] = ()  # free cells on the target's side

    @property
    def free_cells(self) -> list[tuple[int, int]]:
        return [(int(i), int(j)) for i, j in np.argwhere(~self.walls)]


def _cells(rng: np.random.Generator, settings: DatasetSettings, cell_size: float) -> int:
    side = rng.uniform(settings.room_min_size, settings.room_max_size)
    return max(int(round(side / cell_size)), 1)


def _is_connected(walls: np.ndarray) -> bool:
    _, count = ndimage.label(~walls)
    return count == 1


def open_room(rng: np.random.Generator, settings: DatasetSettings, cell_size: float,
              max_stubs: int | None = None) -> RoomTemplate:
    """
    Rectangle with up to `max_stubs` (default `max_internal_walls`) wall stubs growing inward from the outer wall.
    A stub that would split the free space is discarded.
    """
    nx, nz = _cells(rng, settings, cell_size), _cells(rng, settings, cell_size)
    walls = empty_room(nx + 2, nz + 2)
    max_stubs = settings.max_internal_walls if max_stubs is None else max_stubs
    for _ in range(int(rng.integers(0, max_stubs + 1))):
        candidate = walls.copy()
        along_x = bool(rng.integers(2))
        span = nx if along_x else nz
        length = int(rng.integers(STUB_MIN_CELLS, max(span // 2, STUB_MIN_CELLS) + 1))
        if along_x:
            j = int(rng.integers(2, max(nz, 3)))
            cells = range(1, 1 + length) if rng.integers(2) else range(nx - length + 1, nx + 1)
            for i in cells:
                candidate[i, j] = True
        else:
            i = int(rng.integers(2, max(nx, 3)))
            cells = range(1, 1 + length) if rng.integers(2) else range(nz - length + 1, nz + 1)
            for j in cells:
                candidate[i, j] = True
        if _is_connected(candidate):
            walls = candidate
    return RoomTemplate(name="open", walls=walls)


def partition_room(rng: np.random.Generator, settings: DatasetSettings, cell_size: float) -> RoomTemplate:
    """
    A full-span wall across x = const with a 1-2 cell doorway. Obstacle slots surround the doorway.
    """
    nx = max(_cells(rng, settings, cell_size), 2 * MIN_SIDE_CELLS + 1)
    nz = max(_cells(rng, settings, cell_size), DOORWAY_WIDTH[1] + 2)
    walls = empty_room(nx + 2, nz + 2)
    p = int(rng.integers(1 + MIN_SIDE_CELLS, nx + 1 - MIN_SIDE_CELLS))
    width = int(rng.integers(DOORWAY_WIDTH[0], DOORWAY_WIDTH[1] + 1))
    j0 = int(rng.integers(1, nz - width + 2))
    walls[p, :] = True
    walls[p, j0:j0 + width] = False

    slots = tuple((i, j) for i in (p - 1, p, p + 1) for j in range(j0 - 1, j0 + width + 1) if not walls[i, j])
    side_a = tuple((i, j) for i in range(1, p) for j in range(1, nz + 1))
    side_b = tuple((i, j) for i in range(p + 1, nx + 1) for j in range(1, nz + 1))
    return RoomTemplate(name="partition", walls=walls, slots=slots, side_a=side_a, side_b=side_b)


def corridor_room(rng: np.random.Generator, settings: DatasetSettings, cell_size: float) -> RoomTemplate:
    """
    Two rooms joined along x by a corridor 2-3 cells wide. The corridor cells are the obstacle slots.
    """
    length = int(rng.integers(CORRIDOR_LENGTH[0], CORRIDOR_LENGTH[1] + 1))
    width = int(rng.integers(CORRIDOR_WIDTH[0], CORRIDOR_WIDTH[1] + 1))
    room_a = max(_cells(rng, settings, cell_size) // 2, MIN_SIDE_CELLS)
    room_b = max(_cells(rng, settings, cell_size) // 2, MIN_SIDE_CELLS)
    nz = max(_cells(rng, settings, cell_size), width + 2)
    nx = room_a + length + room_b
    walls = empty_room(nx + 2, nz + 2)
    c0 = int(rng.integers(1, nz - width + 2))
    first, last = room_a + 1, room_a + length
    walls[first:last + 1, :] = True
    walls[first:last + 1, c0:c0 + width] = False

    slots = tuple((i, j) for i in range(first, last + 1) for j in range(c0, c0 + width))
    side_a = tuple((i, j) for i in range(1, first) for j in range(1, nz + 1))
    side_b = tuple((i, j) for i in range(last + 1, nx + 1) for j in range(1, nz + 1))
    return RoomTemplate(name="corridor", walls=walls, slots=slots, side_a=side_a, side_b=side_b)


def build_template(name: TemplateName, rng: np.random.Generator, settings: DatasetSettings,
                   cell_size: float) -> RoomTemplate:
    match name:
        case "open":
            return open_room(rng, settings, cell_size)
        case "partition":
            return partition_room(rng, settings, cell_size)
        case "corridor":
            return corridor_room(rng, settings, cell_size)
    raise ValueError(f"Unknown room template '{name}'")
