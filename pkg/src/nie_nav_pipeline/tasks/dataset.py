"""
Dataset files: one JSON document per task and split holding the episode list.
"""
import logging
from pathlib import Path

from pydantic import BaseModel, ConfigDict
from tqdm import tqdm

from nie_nav_pipeline.settings import Settings, TaskName
from nie_nav_pipeline.tasks.episodes import Episode, Split, episode_seed, generate_episode
from nie_nav_pipeline.worldsim import SceneDocument, scene_from_document, scene_to_document

logger = logging.getLogger(__name__)

DATASET_FORMAT_VERSION = 1


class EpisodeDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    task: TaskName
    template: str
    split: Split
    seed: int
    shortest_path: float
    target_object_id: int | None = None
    target_category: int = -1
    scene: SceneDocument


class DatasetDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    format_version: int = DATASET_FORMAT_VERSION
    task: TaskName
    split: Split
    seed: int
    episodes: list[EpisodeDocument]


def dataset_path(dataset_dir: Path, task: TaskName, split: Split) -> Path:
    return Path(dataset_dir) / f"{task}_{split}.json"


def episode_to_document(episode: Episode) -> EpisodeDocument:
    return EpisodeDocument(task=episode.task, template=episode.template, split=episode.split, seed=episode.seed,
                           shortest_path=episode.shortest_path, target_object_id=episode.target_object_id,
                           target_category=episode.target_category,
                           scene=scene_to_document(episode.scene, task=episode.task))


def episode_from_document(document: EpisodeDocument) -> Episode:
    return Episode(task=document.task, scene=scene_from_document(document.scene),
                   shortest_path=document.shortest_path, seed=document.seed, split=document.split,
                   template=document.template, target_object_id=document.target_object_id,
                   target_category=document.target_category)


def generate_dataset(task: TaskName, split: Split, count: int, seed: int, settings: Settings) -> list[Episode]:
    episodes = []
    for index in tqdm(range(count), ncols=80, desc=f"{task}/{split}"):
        episodes.append(generate_episode(task, episode_seed(seed, split, index), settings, split))
    return episodes


def write_dataset(filepath: Path, episodes: list[Episode], task: TaskName, split: Split, seed: int):
    assert filepath.suffix == ".json", "The dataset file does not have the correct file extension. Must be .json"
    filepath.parent.mkdir(parents=True, exist_ok=True)
    document = DatasetDocument(task=task, split=split, seed=seed,
                               episodes=[episode_to_document(e) for e in episodes])
    filepath.write_text(document.model_dump_json(indent=1))
    logger.info(f"Wrote {len(episodes)} {task} episodes to {filepath}")


def read_dataset(filepath: Path) -> list[Episode]:
    assert filepath.suffix == ".json", "The dataset file does not have the correct file extension. Must be .json"
    if not filepath.exists():
        raise FileNotFoundError(f"Dataset file {filepath} does not exist; run gen-data first")
    document = DatasetDocument.model_validate_json(filepath.read_text())
    if document.format_version != DATASET_FORMAT_VERSION:
        raise ValueError(f"Unsupported dataset format version {document.format_version}")
    return [episode_from_document(d) for d in document.episodes]
