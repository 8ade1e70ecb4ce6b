"""
Reward shaping, success predicate and the SR / FDT / SPL metrics.
"""
import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from nie_nav_pipeline.settings import RewardConfig, TaskName
from nie_nav_pipeline.worldsim import Action, StepEvent, WorldState, geodesic_distance


class DegenerateEpisodeError(ValueError):
    """Raised for an episode whose shortest path length is not positive."""


def _target_object(state: WorldState, target_object_id: int | None):
    assert target_object_id is not None, "ObjPlace needs the id of the object to be placed"
    return state.object_by_id(target_object_id)


def shaping_distance(state: WorldState, task: TaskName, target_object_id: int | None = None) -> float:
    """
    Geodesic distance of the agent (ObsNav, point-goal) or the target object (ObjPlace) to the target.
    A blocked agent falls back to the distance with all objects removable, a stuck object to the straight line.
    """
    if task == "objplace":
        obj = _target_object(state, target_object_id)
        distance = geodesic_distance(state, obj.floor_position, state.target, mover="object", obj=obj)
        return distance if math.isfinite(distance) else math.dist(obj.floor_position, state.target)
    distance = geodesic_distance(state, state.agent.position, state.target)
    if math.isfinite(distance):
        return distance
    return geodesic_distance(state, state.agent.position, state.target, ignore_ids=[o.id for o in state.objects])


def final_distance(state: WorldState, task: TaskName, target_object_id: int | None = None) -> float:
    """Straight-line floor distance of the agent or the target object to the target."""
    if task == "objplace":
        return math.dist(_target_object(state, target_object_id).floor_position, state.target)
    return math.dist(state.agent.position, state.target)


def is_success(state: WorldState, invoked_end: bool, task: TaskName, target_object_id: int | None = None,
               radius: float = 0.2) -> bool:
    return invoked_end and final_distance(state, task, target_object_id) <= radius


def shaped_reward(d_prev: float, d_next: float, success: bool, path_opened: bool, path_blocked: bool,
                  cfg: RewardConfig, task: TaskName) -> float:
    """Success bonus, path opened or blocked term (ObsNav only), distance progress and step penalty, in that order."""
    reward = cfg.success_reward if success else 0.0
    if task == "obsnav":
        reward += cfg.path_change_reward * (int(path_opened) - int(path_blocked))
    reward += d_prev - d_next
    reward += cfg.step_penalty
    return reward


def compute_reward(prev: WorldState, action, next_state: WorldState, event: StepEvent, cfg: RewardConfig,
                   task: TaskName, target_object_id: int | None = None) -> float:
    success = Action.parse(action) == Action.END and is_success(next_state, True, task, target_object_id,
                                                               cfg.success_radius)
    return shaped_reward(shaping_distance(prev, task, target_object_id),
                         shaping_distance(next_state, task, target_object_id),
                         success, event.path_opened, event.path_blocked, cfg, task)


@dataclass(frozen=True)
class EpisodeResult:
    success: bool
    final_distance: float  # meters
    path_length: float  # meters travelled by the agent (ObjPlace: by the object)
    shortest_path: float
    steps: int

    def __post_init__(self):
        assert self.path_length >= 0, "Path length cannot be negative"


@dataclass(frozen=True)
class Metrics:
    sr: float  # percent
    fdt: float  # meters
    spl: float  # ratio
    episodes: int


def compute_metrics(results: list[EpisodeResult]) -> Metrics:
    if not results:
        raise ValueError("Metrics need at least one episode result")
    for result in results:
        if result.shortest_path <= 0:
            raise DegenerateEpisodeError(f"Episode with shortest path {result.shortest_path} m has no valid SPL")
    success = np.array([r.success for r in results], dtype=np.float64)
    shortest = np.array([r.shortest_path for r in results])
    taken = np.array([r.path_length for r in results])
    return Metrics(sr=100.0 * float(success.mean()),
                   fdt=float(np.mean([r.final_distance for r in results])),
                   spl=float(np.mean(success * shortest / np.maximum(taken, shortest))),
                   episodes=len(results))


REPORT_COLUMNS = ("task", "variant", "SR", "FDT", "SPL", "seeds", "steps")


def write_metrics_report(filepath: Path, rows: list[dict]):
    """
    CSV with one row per evaluated configuration; `seeds` is a space-separated list.
    """
    assert filepath.suffix == ".csv", "The report file does not have the correct file extension. Must be .csv"
    filepath.parent.mkdir(parents=True, exist_ok=True)
    with open(filepath, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=REPORT_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({key: row[key] for key in REPORT_COLUMNS})
