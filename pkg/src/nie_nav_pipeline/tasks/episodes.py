"""
Episode generation for ObsNav, ObjPlace and the point-goal sanity task.

Every generator is a pure function of its seed and settings. The dataset writer derives one seed per episode from
(run seed, split, index), so splits never share layouts.
"""
import logging
import math
from dataclasses import dataclass, replace
from typing import Literal

import numpy as np

from nie_nav_pipeline.geometry import ObjectPose
from nie_nav_pipeline.settings import Settings, TaskName
from nie_nav_pipeline.tasks.templates import EpisodeGenerationError, RoomTemplate, build_template, open_room
from nie_nav_pipeline.worldsim import (
    AgentState,
    ObjectInstance,
    WorldState,
    agent_traversable,
    cell_square,
    footprint,
    footprint_overlaps,
    geodesic_distance,
    grid_path,
    overlaps_anything,
    path_exists,
)

logger = logging.getLogger(__name__)

Split = Literal["train", "val", "test"]
SPLITS: tuple[Split, ...] = ("train", "val", "test")
AZIMUTHS = (0.0, 90.0, 180.0, 270.0)
PLACEMENT_TRIES = 30


@dataclass(frozen=True)
class Episode:
    task: TaskName
    scene: WorldState
    shortest_path: float  # meters
    seed: int
    split: Split = "train"
    template: str = "open"
    target_object_id: int | None = None
    target_category: int = -1

    @property
    def target(self) -> tuple[float, float]:
        return self.scene.target


def episode_seed(seed: int, split: Split, index: int) -> int:
    return int(np.random.SeedSequence([seed, SPLITS.index(split), index]).generate_state(1)[0])


def size_variants(settings: Settings, split: Split) -> list[float]:
    """The last variant is held out for the test split."""
    variants = settings.dataset.size_variants
    return variants[-1:] if split == "test" else variants[:-1]


def random_object(rng: np.random.Generator, object_id: int, settings: Settings, split: Split,
                  position: tuple[float, float], yaw: float) -> ObjectInstance:
    categories = settings.dataset.categories
    c = int(rng.integers(len(categories)))
    variants = size_variants(settings, split)
    scale = variants[int(rng.integers(len(variants)))]
    return ObjectInstance(id=object_id, category=c, size=tuple(scale * s for s in categories[c].size),
                          pose=ObjectPose((position[0], 0.0, position[1]), yaw), mass_factor=categories[c].mass_factor)


def _empty_state(template: RoomTemplate, agent_cell: tuple[int, int], target_cell: tuple[int, int],
                 azimuth: float, settings: Settings, seed: int) -> WorldState:
    world = settings.world
    s = world.cell_size
    center = ((agent_cell[0] + 0.5) * s, (agent_cell[1] + 0.5) * s)
    agent = AgentState(center, azimuth=azimuth, camera_height=world.camera_height)
    target = ((target_cell[0] + 0.5) * s, (target_cell[1] + 0.5) * s)
    return WorldState(walls=template.walls, objects=(), agent=agent, target=target, cell_size=s,
                      wall_height=world.wall_height, seed=seed)


def _fits(state: WorldState, obj: ObjectInstance, keep_clear: tuple[tuple[int, int], ...] = ()) -> bool:
    polygon = footprint(obj)
    if overlaps_anything(state, polygon, eps=1e-9):
        return False
    return not any(footprint_overlaps(polygon, cell_square(cell, state.cell_size)) for cell in keep_clear)


def _place_randomly(rng: np.random.Generator, state: WorldState, settings: Settings, split: Split,
                    keep_clear: tuple[tuple[int, int], ...] = ()) -> WorldState | None:
    width, depth = state.room_size
    s = state.cell_size
    for _ in range(PLACEMENT_TRIES):
        position = (rng.uniform(s, width - s), rng.uniform(s, depth - s))
        obj = random_object(rng, len(state.objects), settings, split, position, rng.uniform(0.0, 360.0))
        if _fits(state, obj, keep_clear):
            return replace(state, objects=(*state.objects, obj))
    return None


def _try_obsnav(rng: np.random.Generator, template: RoomTemplate, settings: Settings, split: Split,
                seed: int) -> tuple[WorldState, float] | None:
    slots = set(template.slots)
    side_a = [c for c in template.side_a if c not in slots]
    side_b = [c for c in template.side_b if c not in slots]
    agent_cell = side_a[int(rng.integers(len(side_a)))]
    target_cell = side_b[int(rng.integers(len(side_b)))]
    state = _empty_state(template, agent_cell, target_cell, AZIMUTHS[int(rng.integers(4))], settings, seed)
    s = state.cell_size

    # spawn obstacles on the current shortest path until no path is left
    for _ in range(settings.dataset.max_obstacles):
        path = grid_path(agent_traversable(state), agent_cell, target_cell)
        if path is None:
            break
        candidates = [cell for cell in path if cell in slots]
        if not candidates:
            return None
        cell = candidates[int(rng.integers(len(candidates)))]
        jitter = rng.uniform(-s / 4, s / 4, size=2)
        position = ((cell[0] + 0.5) * s + jitter[0], (cell[1] + 0.5) * s + jitter[1])
        obj = random_object(rng, len(state.objects), settings, split, position, 90.0 * int(rng.integers(2)))
        if _fits(state, obj, keep_clear=(target_cell,)):
            state = replace(state, objects=(*state.objects, obj))

    if path_exists(state):
        return None
    removable = geodesic_distance(state, state.agent.position, state.target,
                                  ignore_ids=[o.id for o in state.objects])
    if not math.isfinite(removable) or removable <= 0:
        return None
    return state, removable


def gen_obsnav(seed: int, settings: Settings, split: Split = "train") -> Episode:
    """
    Blocked-path episode: agent and target on opposite sides of a doorway or corridor, obstacles spawned on the
    shortest path until none is left. The shortest path is measured with the obstacles treated as removable.
    """
    rng = np.random.default_rng(seed)
    name = settings.dataset.obsnav_templates[0]
    for _ in range(settings.dataset.max_attempts):
        name = settings.dataset.obsnav_templates[int(rng.integers(len(settings.dataset.obsnav_templates)))]
        template = build_template(name, rng, settings.dataset, settings.world.cell_size)
        placed = _try_obsnav(rng, template, settings, split, seed)
        if placed is not None:
            state, removable = placed
            return Episode(task="obsnav", scene=state, shortest_path=removable, seed=seed, split=split,
                           template=name)
    raise EpisodeGenerationError(name, f"no blocked layout after {settings.dataset.max_attempts} attempts")


def _free_cell(rng: np.random.Generator, template: RoomTemplate) -> tuple[int, int]:
    cells = template.free_cells
    return cells[int(rng.integers(len(cells)))]


def gen_objplace(seed: int, settings: Settings, split: Split = "train") -> Episode:
    """
    Object-pushing episode: a target object at least `objplace_min_separation` from the target mark, plus
    distractors. The shortest path is the object's geodesic distance to the mark.
    """
    dataset = settings.dataset
    if math.hypot(dataset.room_max_size, dataset.room_max_size) < dataset.objplace_min_separation:
        raise EpisodeGenerationError("open", f"rooms of at most {dataset.room_max_size} m per side cannot separate "
                                             f"object and target by {dataset.objplace_min_separation} m")
    rng = np.random.default_rng(seed)
    for _ in range(dataset.max_attempts):
        template = open_room(rng, dataset, settings.world.cell_size)
        agent_cell = _free_cell(rng, template)
        state = _empty_state(template, agent_cell, agent_cell, AZIMUTHS[int(rng.integers(4))], settings, seed)
        state = _place_randomly(rng, state, settings, split)
        if state is None:
            continue
        obj = state.objects[0]
        candidates = [c for c in template.free_cells if c != agent_cell and math.dist(
            state.cell_center(c), obj.floor_position) >= dataset.objplace_min_separation]
        if not candidates:
            continue
        target_cell = candidates[int(rng.integers(len(candidates)))]
        state = replace(state, target=state.cell_center(target_cell))
        if footprint_overlaps(footprint(obj), cell_square(target_cell, state.cell_size)):
            continue
        for _ in range(dataset.objplace_distractors):
            state = _place_randomly(rng, state, settings, split, keep_clear=(target_cell,)) or state
        shortest = geodesic_distance(state, obj.floor_position, state.target, mover="object", obj=obj)
        if math.isfinite(shortest) and shortest > 0:
            return Episode(task="objplace", scene=state, shortest_path=shortest, seed=seed, split=split,
                           template="open", target_object_id=obj.id, target_category=obj.category)
    raise EpisodeGenerationError("open", f"no valid ObjPlace layout after {dataset.max_attempts} attempts")


def gen_pointnav(seed: int, settings: Settings, split: Split = "train") -> Episode:
    """Empty-room point-goal episode with a target at least `pointnav_min_distance` away."""
    dataset = settings.dataset
    rng = np.random.default_rng(seed)
    for _ in range(dataset.max_attempts):
        template = open_room(rng, dataset, settings.world.cell_size, max_stubs=0)
        agent_cell = _free_cell(rng, template)
        state = _empty_state(template, agent_cell, agent_cell, AZIMUTHS[int(rng.integers(4))], settings, seed)
        candidates = [c for c in template.free_cells
                      if math.dist(state.cell_center(c), state.agent.position) >= dataset.pointnav_min_distance]
        if not candidates:
            continue
        state = replace(state, target=state.cell_center(candidates[int(rng.integers(len(candidates)))]))
        shortest = geodesic_distance(state, state.agent.position, state.target)
        if math.isfinite(shortest) and shortest > 0:
            return Episode(task="pointnav", scene=state, shortest_path=shortest, seed=seed, split=split)
    raise EpisodeGenerationError("open", f"no point-goal layout after {dataset.max_attempts} attempts")


GENERATORS = {"obsnav": gen_obsnav, "objplace": gen_objplace, "pointnav": gen_pointnav}


def generate_episode(task: TaskName, seed: int, settings: Settings, split: Split = "train") -> Episode:
    return GENERATORS[task](seed, settings, split)
