"""
Simulator state. All state objects are immutable values: `step` returns new ones, and the wall grid is a
read-only array shared between successive states.
"""
from dataclasses import dataclass, field, replace
from enum import IntEnum

import numpy as np

from nie_nav_pipeline.geometry import ObjectPose

FLOOR_ID = -1
WALL_ID = -2
CEILING_ID = -3


class UnknownActionError(ValueError):
    """Raised for an action index outside the action space."""


class TerminalStateError(RuntimeError):
    """Raised when stepping a state whose episode already ended."""


class Action(IntEnum):
    MOVE_AHEAD = 0
    ROTATE_RIGHT = 1
    ROTATE_LEFT = 2
    LOOK_UP = 3
    LOOK_DOWN = 4
    PUSH = 5
    PULL = 6
    RIGHT_PUSH = 7
    LEFT_PUSH = 8
    END = 9

    @classmethod
    def parse(cls, action) -> "Action":
        try:
            return cls(int(action))
        except ValueError:
            raise UnknownActionError(f"Unknown action index {action}; expected 0..{len(cls) - 1}") from None

    @property
    def is_interaction(self) -> bool:
        return self in INTERACTION_DIRECTIONS


# Push direction of each interaction action in the agent frame, as (right, forward) components
INTERACTION_DIRECTIONS = {
    Action.PUSH: (0.0, 1.0),
    Action.PULL: (0.0, -1.0),
    Action.RIGHT_PUSH: (1.0, 0.0),
    Action.LEFT_PUSH: (-1.0, 0.0),
}
NUM_ACTIONS = len(Action)


@dataclass(frozen=True)
class ObjectInstance:
    id: int
    category: int
    size: tuple[float, float, float]  # width (local x), depth (local z), height
    pose: ObjectPose
    mass_factor: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "size", tuple(float(s) for s in self.size))
        assert all(s > 0 for s in self.size), "Object dimensions must be positive"
        assert self.mass_factor >= 1.0, "Mass factor must be at least 1"

    @property
    def floor_position(self) -> np.ndarray:
        return np.array([self.pose.position[0], self.pose.position[2]])

    def moved(self, dx: float, dz: float, dyaw: float = 0.0) -> "ObjectInstance":
        x, y, z = self.pose.position
        return replace(self, pose=ObjectPose((x + dx, y, z + dz), self.pose.yaw + dyaw))


@dataclass(frozen=True)
class AgentState:
    position: tuple[float, float]  # floor (x, z), always a cell centre
    azimuth: float = 0.0
    elevation: float = 0.0
    camera_height: float = 1.5

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(p) for p in self.position))
        object.__setattr__(self, "azimuth", float(self.azimuth) % 360.0)
        assert self.azimuth in (0.0, 90.0, 180.0, 270.0), f"Azimuth {self.azimuth} is not a multiple of 90 degrees"

    @property
    def forward(self) -> np.ndarray:
        """Floor-plane (x, z) unit vector the agent faces."""
        return np.array(_AXES[self.azimuth][1], dtype=np.float64)

    @property
    def right(self) -> np.ndarray:
        return np.array(_AXES[self.azimuth][0], dtype=np.float64)

    def to_agent_frame(self, point) -> np.ndarray:
        """(right, forward) coordinates of a floor point relative to the agent."""
        offset = np.asarray(point, dtype=np.float64) - np.asarray(self.position)
        return np.array([offset @ self.right, offset @ self.forward])


# Exact (right, forward) floor axes per azimuth, avoiding trigonometric round-off
_AXES = {
    0.0: ((1, 0), (0, 1)),
    90.0: ((0, -1), (1, 0)),
    180.0: ((-1, 0), (0, -1)),
    270.0: ((0, 1), (-1, 0)),
}


@dataclass(frozen=True)
class StepEvent:
    collision: bool = False
    pushed_id: int | None = None
    object_travel: float = 0.0
    agent_travel: float = 0.0
    path_opened: bool = False
    path_blocked: bool = False
    no_target: bool = False
    terminal: bool = False

    def __post_init__(self):
        assert not (self.path_opened and self.path_blocked), "A step cannot both open and block the path"


@dataclass(frozen=True, eq=False)
class WorldState:
    walls: np.ndarray  # bool (nx, nz); cell (i, j) spans x in [i s, (i+1) s], z in [j s, (j+1) s]
    objects: tuple[ObjectInstance, ...]
    agent: AgentState
    target: tuple[float, float]
    cell_size: float = 0.25
    wall_height: float = 2.5
    step_count: int = 0
    seed: int = 0
    terminal: bool = False

    def __post_init__(self):
        walls = np.array(self.walls, dtype=bool)
        walls.flags.writeable = False
        object.__setattr__(self, "walls", walls)
        object.__setattr__(self, "objects", tuple(self.objects))
        object.__setattr__(self, "target", tuple(float(t) for t in self.target))

    def __eq__(self, other):
        if not isinstance(other, WorldState):
            return NotImplemented
        return (np.array_equal(self.walls, other.walls) and self.objects == other.objects
                and self.agent == other.agent and self.target == other.target and self.cell_size == other.cell_size
                and self.wall_height == other.wall_height and self.step_count == other.step_count
                and self.seed == other.seed and self.terminal == other.terminal)

    __hash__ = None

    @property
    def grid_shape(self) -> tuple[int, int]:
        return self.walls.shape

    @property
    def room_size(self) -> tuple[float, float]:
        return self.walls.shape[0] * self.cell_size, self.walls.shape[1] * self.cell_size

    def cell_of(self, point) -> tuple[int, int]:
        return int(np.floor(point[0] / self.cell_size)), int(np.floor(point[1] / self.cell_size))

    def cell_center(self, cell) -> tuple[float, float]:
        return (cell[0] + 0.5) * self.cell_size, (cell[1] + 0.5) * self.cell_size

    def object_by_id(self, object_id: int) -> ObjectInstance:
        for obj in self.objects:
            if obj.id == object_id:
                return obj
        raise KeyError(f"No object with id {object_id}")

    def with_object(self, obj: ObjectInstance) -> "WorldState":
        return replace(self, objects=tuple(obj if o.id == obj.id else o for o in self.objects))

    def without_objects(self, object_ids) -> "WorldState":
        object_ids = set(object_ids)
        return replace(self, objects=tuple(o for o in self.objects if o.id not in object_ids))


def empty_room(nx: int, nz: int) -> np.ndarray:
    """Wall grid of a rectangular room: a ring of wall cells around (nx - 2) x (nz - 2) free cells."""
    walls = np.zeros((nx, nz), dtype=bool)
    walls[0, :] = walls[-1, :] = True
    walls[:, 0] = walls[:, -1] = True
    return walls
