"""
Kinematic transition model of the 10-action space.
"""
import logging
from collections.abc import Iterable
from dataclasses import replace

import numpy as np

from nie_nav_pipeline.settings import RenderSettings, WorldSettings
from nie_nav_pipeline.worldsim.collision import (
    cell_square,
    footprint,
    footprint_overlaps,
    overlaps_anything,
    swept_free_distance,
)
from nie_nav_pipeline.worldsim.navigation import path_exists
from nie_nav_pipeline.worldsim.render import render, visible_instances
from nie_nav_pipeline.worldsim.state import (
    INTERACTION_DIRECTIONS,
    Action,
    AgentState,
    ObjectInstance,
    StepEvent,
    TerminalStateError,
    WorldState,
)

logger = logging.getLogger(__name__)


def cell_is_free(state: WorldState, cell: tuple[int, int], eps: float = 1e-9) -> bool:
    nx, nz = state.grid_shape
    if not (0 <= cell[0] < nx and 0 <= cell[1] < nz) or state.walls[cell]:
        return False
    square = cell_square(cell, state.cell_size)
    return not any(footprint_overlaps(square, footprint(obj), eps) for obj in state.objects)


def push_target(state: WorldState, visible_ids: Iterable[int]) -> ObjectInstance | None:
    """
    Closest visible object by floor distance between agent and object centres; ties go to the lower id.
    """
    visible_ids = set(visible_ids)
    candidates = [obj for obj in state.objects if obj.id in visible_ids]
    if not candidates:
        return None
    agent = np.asarray(state.agent.position)
    return min(candidates, key=lambda obj: (float(np.linalg.norm(obj.floor_position - agent)), obj.id))


def step(state: WorldState, action, world: WorldSettings = WorldSettings(),
         render_settings: RenderSettings = RenderSettings(),
         visible_ids: Iterable[int] | None = None) -> tuple[WorldState, StepEvent]:
    """
    Applies one action. Interaction actions act on the closest object visible in the latest frame: pass its
    `visible_ids`, or leave them out to have the current state rendered.
    """
    action = Action.parse(action)
    if state.terminal:
        raise TerminalStateError("The episode has already ended")
    eps = world.collision_epsilon
    advanced = replace(state, step_count=state.step_count + 1)
    agent = state.agent

    if action == Action.MOVE_AHEAD:
        destination = np.asarray(agent.position) + agent.forward * state.cell_size
        cell = state.cell_of(destination)
        if not cell_is_free(state, cell, eps):
            return advanced, StepEvent(collision=True)
        moved = replace(agent, position=state.cell_center(cell))
        return replace(advanced, agent=moved), StepEvent(agent_travel=state.cell_size)

    if action in (Action.ROTATE_RIGHT, Action.ROTATE_LEFT):
        sign = 1.0 if action == Action.ROTATE_RIGHT else -1.0
        return replace(advanced, agent=replace(agent, azimuth=agent.azimuth + sign * world.rotation_step)), StepEvent()

    if action in (Action.LOOK_UP, Action.LOOK_DOWN):
        sign = 1.0 if action == Action.LOOK_UP else -1.0
        elevation = float(np.clip(agent.elevation + sign * world.look_step, -world.max_elevation, world.max_elevation))
        return replace(advanced, agent=replace(agent, elevation=elevation)), StepEvent()

    if action == Action.END:
        return replace(advanced, terminal=True), StepEvent(terminal=True)

    if visible_ids is None:
        visible_ids = visible_instances(render(state, render_settings))
    return _interact(state, advanced, action, world, visible_ids)


def _interact(state: WorldState, advanced: WorldState, action: Action, world: WorldSettings,
              visible_ids: Iterable[int]) -> tuple[WorldState, StepEvent]:
    eps = world.collision_epsilon
    obj = push_target(state, visible_ids)
    if obj is None:
        return advanced, StepEvent(no_target=True)

    agent = state.agent
    right, forward = INTERACTION_DIRECTIONS[action]
    direction = right * agent.right + forward * agent.forward
    reach = world.base_displacement / obj.mass_factor
    displacement = min(reach, swept_free_distance(state, obj, direction, reach, eps))
    if displacement <= 0.0:
        return advanced, StepEvent(pushed_id=obj.id)

    moved = obj.moved(*(direction * displacement))
    if world.slip_coefficient != 0.0:
        # lateral offset of the object centre from the agent's push line
        lateral = float((obj.floor_position - np.asarray(agent.position)) @ np.array([direction[1], -direction[0]]))
        slipped = moved.moved(0.0, 0.0, world.slip_coefficient * lateral)
        if not overlaps_anything(state, footprint(slipped), ignore_id=obj.id, eps=eps):
            moved = slipped

    successor = advanced.with_object(moved)
    before, after = path_exists(state, eps), path_exists(successor, eps)
    logger.debug(f"{action.name} moved object {obj.id} by {displacement:.3f} m")
    return successor, StepEvent(pushed_id=obj.id, object_travel=float(displacement),
                                path_opened=(not before and after), path_blocked=(before and not after))
