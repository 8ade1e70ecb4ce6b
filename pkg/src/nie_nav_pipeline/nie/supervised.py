"""
Supervised training of the interaction engine on random-policy simulator transitions, and its held-out keypoint
evaluation against the identity-prediction baseline.
"""
import logging
import math
from dataclasses import dataclass, fields
from functools import partial
from multiprocessing.pool import ThreadPool

import numpy as np
from tqdm import tqdm

from nie_nav_pipeline.nie.network import NieNetwork, NieOutput, NieTarget, nie_loss
from nie_nav_pipeline.nie.targets import identity_baseline_loss, nie_targets
from nie_nav_pipeline.policy.visual import VisualEncoder, encoding_width, observation_encoding
from nie_nav_pipeline.settings import Settings
from nie_nav_pipeline.tasks.env import InteractiveNavEnv
from nie_nav_pipeline.tasks.episodes import Episode
from nie_nav_pipeline.tensor_core import (
    LrSchedule,
    ParameterStore,
    Tensor,
    adam_step,
    clip_gradients,
    evaluate_graph,
    ops,
)
from nie_nav_pipeline.tensor_core.layers import Params
from nie_nav_pipeline.worldsim import Action

logger = logging.getLogger(__name__)

SUPERVISED_GRAD_CLIP = 1.0


@dataclass
class TransitionSet:
    """
    Pre-step observations with the executed action and its keypoint targets. Colour is stored as uint8.
    """
    color: np.ndarray  # (N, H, W, 3) uint8
    depth: np.ndarray  # (N, H, W) float32
    keypoints: np.ndarray  # (N, C, 8, 3)
    presence: np.ndarray  # (N, C) bool
    actions: np.ndarray  # (N,)
    targets: np.ndarray  # (N, C, 8, 3)
    observed: np.ndarray  # (N, C) bool

    def __len__(self) -> int:
        return len(self.actions)

    def subset(self, indices: np.ndarray) -> "TransitionSet":
        return TransitionSet(**{f.name: getattr(self, f.name)[indices] for f in fields(self)})

    @classmethod
    def concatenate(cls, parts: list["TransitionSet"]) -> "TransitionSet":
        return cls(**{f.name: np.concatenate([getattr(p, f.name) for p in parts]) for f in fields(cls)})

    def split(self, heldout_fraction: float, rng: np.random.Generator) -> tuple["TransitionSet", "TransitionSet"]:
        order = rng.permutation(len(self))
        n_heldout = max(1, int(round(heldout_fraction * len(self))))
        return self.subset(np.sort(order[n_heldout:])), self.subset(np.sort(order[:n_heldout]))

    def target(self) -> NieTarget:
        return NieTarget(keypoints=self.targets, action=self.actions, observed=self.observed)


def _collect_chunk(worker: int, episodes: list[Episode], settings: Settings, counts: list[int],
                   seed: int) -> TransitionSet:
    rng = np.random.default_rng(np.random.SeedSequence([seed, worker]))
    env = InteractiveNavEnv(episodes[worker::len(counts)] or episodes, settings)
    observation, _ = env.reset(seed=int(rng.integers(2 ** 31)))
    columns = {f.name: [] for f in fields(TransitionSet)}
    steps = 0
    for _ in range(counts[worker]):
        # END would cut episodes short without moving anything
        action = int(rng.integers(Action.END))
        next_observation, _, terminated, truncated, info = env.step(action)
        targets, observed = nie_targets(info["previous_keypoints"], info["previous_state"], info["state"],
                                        settings.render)
        columns["color"].append(np.round(observation["color"] * 255.0).astype(np.uint8))
        columns["depth"].append(observation["depth"].astype(np.float32))
        columns["keypoints"].append(observation["keypoints"])
        columns["presence"].append(observation["presence"].astype(bool))
        columns["actions"].append(action)
        columns["targets"].append(targets)
        columns["observed"].append(observed)

        observation = next_observation
        steps += 1
        if terminated or truncated or steps >= settings.supervised.episode_length:
            observation, _ = env.reset()
            steps = 0
    return TransitionSet(**{name: np.asarray(values) for name, values in columns.items()})


def collect_transitions(episodes: list[Episode], settings: Settings, count: int | None = None,
                        seed: int | None = None, workers: int | None = None) -> TransitionSet:
    """
    Random-policy transitions from the given episodes, split evenly over `workers` environments. The result only
    depends on the arguments, not on thread scheduling.
    """
    count = settings.supervised.transitions if count is None else count
    seed = settings.run.seed if seed is None else seed
    workers = settings.supervised.workers if workers is None else workers
    counts = [count // workers + (1 if w < count % workers else 0) for w in range(workers)]
    collect = partial(_collect_chunk, episodes=episodes, settings=settings, counts=counts, seed=seed)
    progbar = partial(tqdm, total=workers, ncols=80, desc="collect")

    if workers == 1:
        chunks = list(progbar(map(collect, range(workers))))
    else:
        with ThreadPool(workers) as pool:
            chunks = list(progbar(pool.imap(collect, range(workers))))
    transitions = TransitionSet.concatenate([c for c in chunks if len(c)])
    logger.info(f"Collected {len(transitions)} transitions, {int(transitions.observed.any(axis=1).sum())} with "
                f"at least one observed category")
    return transitions


class SupervisedNie:
    """
    Visual encoder plus interaction engine, trained on the engine loss alone.
    """

    def __init__(self, settings: Settings, num_categories: int, rng: np.random.Generator, dtype: str | None = None):
        self.store = ParameterStore(dtype=np.dtype(dtype or settings.run.dtype))
        render = settings.render
        self.obs_block = settings.nie.obs_block
        self.visual = VisualEncoder(self.store, "visual", settings.policy, render.height, render.width, rng)
        observation_dim = 0
        if settings.run.variant != "nie_novis":
            observation_dim = self.visual.output_dim + encoding_width(render.height, render.width, self.obs_block)
        self.nie = NieNetwork(self.store, "nie", settings.nie, num_categories, rng, observation_dim)

    def __call__(self, params: Params, batch: TransitionSet) -> NieOutput:
        color = batch.color.astype(self.store.dtype) / 255.0
        depth = batch.depth.astype(self.store.dtype)
        observation = None
        if self.nie.uses_observation:
            visual = self.visual(params, color, depth)
            raw = observation_encoding(color, depth, self.obs_block).astype(self.store.dtype)
            observation = ops.concat([visual, Tensor(raw)], axis=-1)
        return self.nie(params, batch.keypoints, batch.presence, observation)


def evaluate_keypoint_l1(model: SupervisedNie, transitions: TransitionSet, batch_size: int = 256) -> float:
    """
    Mean absolute error of the keypoints predicted for the executed action, over all observed keypoint
    coordinates of `transitions`.
    """
    params = model.store.snapshot().tensors()
    total, count = 0.0, 0
    for start in range(0, len(transitions), batch_size):
        batch = transitions.subset(np.arange(start, min(start + batch_size, len(transitions))))
        weight = int(batch.observed.sum())
        if weight == 0:
            continue
        total += float(nie_loss(model(params, batch), batch.target()).data) * weight
        count += weight
    return total / count if count else 0.0


@dataclass
class SupervisedReport:
    train_losses: list[float]  # mean training loss per epoch
    heldout_l1: float
    identity_l1: float

    @property
    def ratio(self) -> float:
        return self.heldout_l1 / self.identity_l1 if self.identity_l1 > 0 else math.inf


def train_nie_supervised(transitions: TransitionSet, settings: Settings, rng: np.random.Generator,
                         model: SupervisedNie | None = None) -> tuple[SupervisedNie, SupervisedReport]:
    sup = settings.supervised
    train, heldout = transitions.split(sup.heldout_fraction, rng)
    model = model or SupervisedNie(settings, transitions.presence.shape[1], rng)
    batches_per_epoch = math.ceil(len(train) / sup.batch_size)
    schedule = LrSchedule(initial_rate=sup.learning_rate, total_steps=sup.epochs * batches_per_epoch)

    losses = []
    for epoch in range(sup.epochs):
        order = rng.permutation(len(train))
        epoch_losses = []
        for b in tqdm(range(batches_per_epoch), ncols=80, desc=f"epoch {epoch + 1}/{sup.epochs}"):
            batch = train.subset(order[b * sup.batch_size:(b + 1) * sup.batch_size])

            def graph(_, params, batch=batch):
                return nie_loss(model(params, batch), batch.target())

            result = evaluate_graph(graph, {}, model.store)
            grads = clip_gradients(result.backward().params, SUPERVISED_GRAD_CLIP)
            adam_step(model.store, grads, schedule)
            epoch_losses.append(float(result.outputs["output"].data))
        losses.append(float(np.mean(epoch_losses)))
        logger.info(f"Epoch {epoch + 1}: mean training loss {losses[-1]:.4f}")

    report = SupervisedReport(
        train_losses=losses,
        heldout_l1=evaluate_keypoint_l1(model, heldout),
        identity_l1=identity_baseline_loss(heldout.keypoints, heldout.targets, heldout.observed),
    )
    logger.info(f"Held-out keypoint L1 {report.heldout_l1:.4f} vs identity baseline {report.identity_l1:.4f} "
                f"(ratio {report.ratio:.3f})")
    return model, report
