from nie_nav_pipeline.worldsim.collision import (
    cell_square,
    footprint,
    footprint_overlaps,
    free_distance,
    object_corners,
    overlaps_anything,
    overlaps_walls,
    swept_free_distance,
)
from nie_nav_pipeline.worldsim.navigation import (
    agent_traversable,
    geodesic_distance,
    grid_distance,
    grid_path,
    object_occupancy,
    object_traversable,
    path_exists,
)
from nie_nav_pipeline.worldsim.physics import cell_is_free, push_target, step
from nie_nav_pipeline.worldsim.render import RESERVED_COLORS, Observation, category_color, render, visible_instances
from nie_nav_pipeline.worldsim.scene_io import SceneDocument, scene_from_document, scene_to_document
from nie_nav_pipeline.worldsim.state import (
    CEILING_ID,
    FLOOR_ID,
    INTERACTION_DIRECTIONS,
    NUM_ACTIONS,
    WALL_ID,
    Action,
    AgentState,
    ObjectInstance,
    StepEvent,
    TerminalStateError,
    UnknownActionError,
    WorldState,
    empty_room,
)
