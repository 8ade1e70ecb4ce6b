"""
Policy evaluation over a split, JSON trajectory logs, and their replay into frames and a reward table.
"""
import csv
import logging
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict
from tqdm import tqdm

from nie_nav_pipeline.keypoints import write_observation_images
from nie_nav_pipeline.policy import InteractiveNavAgent
from nie_nav_pipeline.settings import ModelVariant, Settings
from nie_nav_pipeline.tasks import (
    EpisodeDocument,
    EpisodeResult,
    InteractiveNavEnv,
    Metrics,
    compute_metrics,
    episode_from_document,
    episode_to_document,
    shaping_distance,
)
from nie_nav_pipeline.tasks.episodes import Episode
from nie_nav_pipeline.tensor_core import ParameterSnapshot
from nie_nav_pipeline.trainer.rollout import stack_observations
from nie_nav_pipeline.worldsim import Action

logger = logging.getLogger(__name__)

TRAJECTORY_FORMAT_VERSION = 1
REPLAY_COLUMNS = ("step", "action", "reward", "distance", "collision", "pushed_id", "path_opened", "path_blocked")


class TrajectoryDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    format_version: int = TRAJECTORY_FORMAT_VERSION
    variant: ModelVariant
    env_seed: int
    episode: EpisodeDocument
    actions: list[int]
    rewards: list[float]
    success: bool
    final_distance: float
    path_length: float


def write_trajectory(filepath: Path, document: TrajectoryDocument):
    assert filepath.suffix == ".json", "The trajectory file does not have the correct file extension. Must be .json"
    filepath.parent.mkdir(parents=True, exist_ok=True)
    # pydantic writes floats in shortest round-trip form
    filepath.write_text(document.model_dump_json(indent=1))


def read_trajectory(filepath: Path) -> TrajectoryDocument:
    assert filepath.suffix == ".json", "The trajectory file does not have the correct file extension. Must be .json"
    if not filepath.exists():
        raise FileNotFoundError(f"Trajectory file {filepath} does not exist")
    document = TrajectoryDocument.model_validate_json(filepath.read_text())
    if document.format_version != TRAJECTORY_FORMAT_VERSION:
        raise ValueError(f"Unsupported trajectory format version {document.format_version}")
    return document


@dataclass
class Evaluation:
    metrics: Metrics
    results: list[EpisodeResult]
    trajectories: list[TrajectoryDocument]


def evaluation_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def run_episode(agent: InteractiveNavAgent, snapshot: ParameterSnapshot, episode: Episode, settings: Settings,
                env_seed: int, greedy: bool = False) -> tuple[EpisodeResult, TrajectoryDocument]:
    """
    Plays one episode to its end. Sampling and mask corruption are both driven by `env_seed`.
    """
    params = snapshot.tensors()
    rng = np.random.default_rng(env_seed)
    env = InteractiveNavEnv([episode], settings)
    observation, _ = env.reset(seed=env_seed)
    hidden = agent.initial_hidden(1)
    actions, rewards = [], []
    while True:
        step = agent.act(params, stack_observations([observation], agent.dtype), hidden, rng, greedy=greedy)
        hidden = step.hidden
        action = int(step.action[0])
        observation, reward, terminated, truncated, info = env.step(action)
        actions.append(action)
        rewards.append(float(reward))
        if terminated or truncated:
            break
    result: EpisodeResult = info["result"]
    document = TrajectoryDocument(variant=agent.variant, env_seed=env_seed, episode=episode_to_document(episode),
                                  actions=actions, rewards=rewards, success=result.success,
                                  final_distance=result.final_distance, path_length=result.path_length)
    return result, document


def evaluate_policy(agent: InteractiveNavAgent, snapshot: ParameterSnapshot, episodes: Sequence[Episode],
                    settings: Settings, seed: int, greedy: bool = False,
                    trajectory_dir: Path | None = None) -> Evaluation:
    """
    SR / FDT / SPL of the policy over `episodes`. Episode i is played with the seed derived from (seed, i), so
    repeated evaluations of one snapshot agree.
    """
    results, trajectories = [], []
    for index, episode in enumerate(tqdm(episodes, ncols=80, desc="evaluate")):
        result, document = run_episode(agent, snapshot, episode, settings, evaluation_seed(seed, index), greedy)
        results.append(result)
        trajectories.append(document)
        if trajectory_dir is not None:
            write_trajectory(trajectory_dir / f"episode_{index:04d}.json", document)
    metrics = compute_metrics(results)
    logger.debug(f"Evaluated {metrics.episodes} episodes: SR {metrics.sr:.1f}%, FDT {metrics.fdt:.3f} m, "
                 f"SPL {metrics.spl:.3f}")
    return Evaluation(metrics=metrics, results=results, trajectories=trajectories)


def replay_trajectory(document: TrajectoryDocument, settings: Settings, output_dir: Path) -> list[float]:
    """
    Re-simulates a logged trajectory. Writes colour, depth, segmentation and keypoint frames per step plus
    `rewards.csv`, and returns the re-computed rewards.
    """
    episode = episode_from_document(document.episode)
    env = InteractiveNavEnv([episode], settings)
    env.reset(seed=document.env_seed)
    write_observation_images(output_dir, "step_0000", env.observation, env.keypoints)

    rows, rewards = [], []
    for t, action in enumerate(document.actions, start=1):
        _, reward, terminated, truncated, info = env.step(action)
        event = info["event"]
        rewards.append(float(reward))
        rows.append({
            "step": t,
            "action": Action(action).name,
            "reward": repr(float(reward)),
            "distance": repr(shaping_distance(env.state, episode.task, episode.target_object_id)),
            "collision": int(event.collision),
            "pushed_id": -1 if event.pushed_id is None else event.pushed_id,
            "path_opened": int(event.path_opened),
            "path_blocked": int(event.path_blocked),
        })
        write_observation_images(output_dir, f"step_{t:04d}", env.observation, env.keypoints)
        if (terminated or truncated) and t != len(document.actions):
            logger.warning(f"Episode ended after {t} of {len(document.actions)} logged actions")
            break

    with open(output_dir / "rewards.csv", "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=REPLAY_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)

    if rewards != document.rewards[:len(rewards)]:
        logger.warning("Replayed rewards differ from the logged rewards")
    logger.info(f"Replayed {len(rewards)} steps into {output_dir}")
    return rewards
