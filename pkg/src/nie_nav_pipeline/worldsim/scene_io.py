"""
JSON documents for scenes. Runtime state stays in the frozen dataclasses of `state.py`; these pydantic models only
describe the on-disk layout.
"""
import numpy as np
from pydantic import BaseModel, ConfigDict

from nie_nav_pipeline.geometry import ObjectPose
from nie_nav_pipeline.worldsim.state import AgentState, ObjectInstance, WorldState

SCENE_FORMAT_VERSION = 1


class ObjectDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: int
    category: int
    size: tuple[float, float, float]
    position: tuple[float, float, float]
    yaw: float
    mass_factor: float


class AgentDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    position: tuple[float, float]
    azimuth: float
    elevation: float
    camera_height: float


class SceneDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    format_version: int = SCENE_FORMAT_VERSION
    task: str = ""
    seed: int
    cell_size: float
    wall_height: float
    room_size: tuple[float, float]
    grid_shape: tuple[int, int]
    wall_cells: list[tuple[int, int]]
    objects: list[ObjectDocument]
    agent: AgentDocument
    target: tuple[float, float]
    step_count: int = 0


def scene_to_document(state: WorldState, task: str = "") -> SceneDocument:
    return SceneDocument(
        task=task,
        seed=state.seed,
        cell_size=state.cell_size,
        wall_height=state.wall_height,
        room_size=state.room_size,
        grid_shape=state.grid_shape,
        wall_cells=[(int(i), int(j)) for i, j in np.argwhere(state.walls)],
        objects=[ObjectDocument(id=o.id, category=o.category, size=o.size, position=o.pose.position, yaw=o.pose.yaw,
                                mass_factor=o.mass_factor) for o in state.objects],
        agent=AgentDocument(position=state.agent.position, azimuth=state.agent.azimuth,
                            elevation=state.agent.elevation, camera_height=state.agent.camera_height),
        target=state.target,
        step_count=state.step_count,
    )


def scene_from_document(document: SceneDocument) -> WorldState:
    if document.format_version != SCENE_FORMAT_VERSION:
        raise ValueError(f"Unsupported scene format version {document.format_version}")
    walls = np.zeros(document.grid_shape, dtype=bool)
    for i, j in document.wall_cells:
        walls[i, j] = True
    objects = tuple(ObjectInstance(id=o.id, category=o.category, size=o.size, pose=ObjectPose(o.position, o.yaw),
                                   mass_factor=o.mass_factor) for o in document.objects)
    agent = AgentState(position=document.agent.position, azimuth=document.agent.azimuth,
                       elevation=document.agent.elevation, camera_height=document.agent.camera_height)
    return WorldState(walls=walls, objects=objects, agent=agent, target=document.target, cell_size=document.cell_size,
                      wall_height=document.wall_height, step_count=document.step_count, seed=document.seed)
