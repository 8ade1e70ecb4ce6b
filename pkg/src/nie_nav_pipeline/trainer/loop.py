"""
The training run: rollout collection on parallel workers, PPO updates, periodic validation and checkpoints.

Run directory layout:
    config.toml             all settings of the run
    train_log.csv           one row per update with the loss components
    eval_log.csv            one row per evaluation with SR / FDT / SPL
    checkpoints/            step_<steps>.npz per evaluation and latest.npz
    trajectories/           step_<steps>/episode_<i>.json per evaluation
"""
import csv
import logging
import math
from dataclasses import dataclass, field
from functools import partial
from multiprocessing.pool import ThreadPool
from pathlib import Path

import numpy as np
from tqdm import tqdm

from nie_nav_pipeline.policy import InteractiveNavAgent
from nie_nav_pipeline.settings import Settings, TrainSettings, write_settings_to_toml
from nie_nav_pipeline.tasks import Metrics, dataset_path, read_dataset
from nie_nav_pipeline.tensor_core import LrSchedule, save_checkpoint
from nie_nav_pipeline.trainer.evaluation import evaluate_policy
from nie_nav_pipeline.trainer.ppo import LossReport, ppo_update
from nie_nav_pipeline.trainer.rollout import RolloutBuffer, RolloutWorker

logger = logging.getLogger(__name__)

TRAIN_LOG_COLUMNS = ("update", "step", "learning_rate", "mean_reward", "episodes", "policy", "value", "entropy",
                     "nie", "total", "grad_norm", "clip_fraction")
EVAL_LOG_COLUMNS = ("step", "SR", "FDT", "SPL", "episodes")


@dataclass
class TrainResult:
    steps: int
    losses: list[LossReport] = field(default_factory=list)
    evaluations: list[tuple[int, Metrics]] = field(default_factory=list)


def update_count(cfg: TrainSettings) -> int:
    return math.ceil(cfg.total_steps / (cfg.workers * cfg.horizon))


def optimizer_steps(cfg: TrainSettings) -> int:
    return update_count(cfg) * cfg.ppo_epochs * cfg.minibatches


def trained_steps(cfg: TrainSettings, schedule: LrSchedule) -> int:
    """Environment steps behind a schedule position."""
    return schedule.current_step // (cfg.ppo_epochs * cfg.minibatches) * cfg.workers * cfg.horizon


class CsvLog:
    def __init__(self, filepath: Path, columns: tuple[str, ...]):
        assert filepath.suffix == ".csv", "The log file does not have the correct file extension. Must be .csv"
        self.filepath = filepath
        self.columns = columns
        filepath.parent.mkdir(parents=True, exist_ok=True)
        with open(filepath, "w", newline="") as f:
            csv.DictWriter(f, fieldnames=columns).writeheader()

    def append(self, row: dict):
        with open(self.filepath, "a", newline="") as f:
            csv.DictWriter(f, fieldnames=self.columns).writerow({key: row[key] for key in self.columns})


def load_split(settings: Settings, split: str):
    return read_dataset(dataset_path(Path(settings.run.dataset_dir), settings.run.task, split))


def train_loop(settings: Settings) -> TrainResult:
    """
    Trains the configured variant on the task's train split and validates on its val split every `eval_period`
    environment steps. With one worker and a fixed seed two runs produce identical logs.
    """
    cfg = settings.train
    # both splits are read before anything is written or trained
    train_episodes = load_split(settings, "train")
    val_episodes = load_split(settings, "val")
    if cfg.eval_episodes:
        val_episodes = val_episodes[:cfg.eval_episodes]

    run_dir = Path(settings.run.run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    write_settings_to_toml(run_dir / "config.toml", settings)
    train_log = CsvLog(run_dir / "train_log.csv", TRAIN_LOG_COLUMNS)
    eval_log = CsvLog(run_dir / "eval_log.csv", EVAL_LOG_COLUMNS)

    seed = settings.run.seed
    rng = np.random.default_rng(seed)
    agent = InteractiveNavAgent(settings, len(settings.dataset.categories), rng)
    logger.info(f"Training {settings.run.variant} on {settings.run.task}: {agent.store.count()} parameters, "
                f"{cfg.workers} workers, {update_count(cfg)} updates")
    schedule = LrSchedule(initial_rate=cfg.learning_rate, total_steps=optimizer_steps(cfg))
    workers = [RolloutWorker(w, train_episodes[w::cfg.workers] or train_episodes, settings, agent, seed)
               for w in range(cfg.workers)]

    result = TrainResult(steps=0)
    next_eval = cfg.eval_period
    pool = ThreadPool(cfg.workers) if cfg.workers > 1 else None
    try:
        for update in tqdm(range(update_count(cfg)), ncols=80, desc="train"):
            snapshot = agent.store.snapshot()
            collect = partial(RolloutWorker.collect, snapshot=snapshot, horizon=cfg.horizon)
            segments = list(pool.imap(collect, workers)) if pool else [collect(w) for w in workers]
            buffer = RolloutBuffer.from_segments(segments)
            rate = schedule.rate
            report = ppo_update(buffer, agent, cfg, schedule, rng, dump_dir=run_dir / cfg.dump_dir, update=update)
            result.steps += buffer.num_steps
            result.losses.append(report)
            train_log.append({"update": update, "step": result.steps, "learning_rate": rate,
                              "mean_reward": float(buffer.rewards.mean()), "episodes": len(buffer.results),
                              **report.as_dict()})

            last = update == update_count(cfg) - 1
            if result.steps >= next_eval or last:
                while next_eval <= result.steps:
                    next_eval += cfg.eval_period
                metrics = _evaluate_and_checkpoint(agent, schedule, val_episodes, settings, run_dir, result.steps)
                result.evaluations.append((result.steps, metrics))
                eval_log.append({"step": result.steps, "SR": metrics.sr, "FDT": metrics.fdt, "SPL": metrics.spl,
                                 "episodes": metrics.episodes})
    finally:
        if pool is not None:
            pool.close()
            pool.join()
    return result


def _evaluate_and_checkpoint(agent: InteractiveNavAgent, schedule: LrSchedule, episodes, settings: Settings,
                             run_dir: Path, steps: int) -> Metrics:
    save_checkpoint(run_dir / "checkpoints" / f"step_{steps:09d}.npz", agent.store, schedule)
    save_checkpoint(run_dir / "checkpoints" / "latest.npz", agent.store, schedule)
    evaluation = evaluate_policy(agent, agent.store.snapshot(), episodes, settings, seed=settings.run.seed,
                                 trajectory_dir=run_dir / "trajectories" / f"step_{steps:09d}")
    metrics = evaluation.metrics
    logger.info(f"Step {steps}: SR {metrics.sr:.1f}%, FDT {metrics.fdt:.3f} m, SPL {metrics.spl:.3f}")
    return metrics
