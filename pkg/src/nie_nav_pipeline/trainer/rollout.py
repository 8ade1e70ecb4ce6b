"""
Rollout collection. Each worker owns one environment and plays fixed-length segments with an immutable parameter
snapshot; the learner stacks the segments of all workers into a `RolloutBuffer`.
"""
import logging
from collections.abc import Sequence
from dataclasses import dataclass, fields

import numpy as np

from nie_nav_pipeline.nie import NieTarget, nie_targets
from nie_nav_pipeline.policy import AgentInputs, InteractiveNavAgent
from nie_nav_pipeline.settings import Settings
from nie_nav_pipeline.tasks import EpisodeResult, InteractiveNavEnv
from nie_nav_pipeline.tasks.episodes import Episode
from nie_nav_pipeline.tensor_core import ParameterSnapshot

logger = logging.getLogger(__name__)

INPUT_KEYS = ("color", "depth", "goal", "keypoints", "presence", "target_category")


def stack_observations(observations: Sequence[dict], dtype: np.dtype) -> AgentInputs:
    """Batches environment observations (leading axis B) into agent inputs."""
    return AgentInputs(
        color=np.stack([o["color"] for o in observations]).astype(dtype),
        depth=np.stack([o["depth"] for o in observations]).astype(dtype),
        goal=np.stack([o["goal"] for o in observations]).astype(dtype),
        keypoints=np.stack([o["keypoints"] for o in observations]).astype(dtype),
        presence=np.stack([o["presence"] for o in observations]).astype(bool),
        target_category=np.array([o["target_category"] for o in observations], dtype=np.int64),
    )


@dataclass
class Segment:
    """
    `horizon` consecutive steps of one worker. Arrays are indexed by step; `starts[t]` marks the first step of an
    episode and `hidden` is the recurrent state before step 0.
    """
    color: np.ndarray
    depth: np.ndarray
    goal: np.ndarray
    keypoints: np.ndarray
    presence: np.ndarray
    target_category: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    values: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    starts: np.ndarray
    nie_targets: np.ndarray
    observed: np.ndarray
    hidden: np.ndarray
    bootstrap_value: float
    results: list[EpisodeResult]


@dataclass
class RolloutBuffer:
    """
    Segments of all workers stacked along axis 1: step-indexed arrays are (T, W, ...), `hidden` is (W, H) and
    `bootstrap` is (W,).
    """
    color: np.ndarray
    depth: np.ndarray
    goal: np.ndarray
    keypoints: np.ndarray
    presence: np.ndarray
    target_category: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    values: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    starts: np.ndarray
    nie_targets: np.ndarray
    observed: np.ndarray
    hidden: np.ndarray
    bootstrap: np.ndarray
    results: list[EpisodeResult]

    def __post_init__(self):
        horizon, workers = self.actions.shape
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name in ("hidden", "bootstrap", "results"):
                continue
            assert value.shape[:2] == (horizon, workers), \
                f"Rollout field '{f.name}' has shape {value.shape}, expected leading ({horizon}, {workers})"
        assert self.hidden.shape[0] == workers and self.bootstrap.shape == (workers,), \
            "Segment-start hidden states and bootstrap values need one entry per worker"

    @classmethod
    def from_segments(cls, segments: Sequence[Segment]) -> "RolloutBuffer":
        horizons = {len(s.actions) for s in segments}
        assert len(horizons) == 1, f"All segments must share one horizon, got {sorted(horizons)}"
        stacked = {}
        for f in fields(Segment):
            if f.name == "results":
                stacked[f.name] = [r for s in segments for r in s.results]
            elif f.name == "hidden":
                stacked[f.name] = np.stack([s.hidden for s in segments])
            elif f.name == "bootstrap_value":
                stacked["bootstrap"] = np.array([s.bootstrap_value for s in segments])
            else:
                stacked[f.name] = np.stack([getattr(s, f.name) for s in segments], axis=1)
        return cls(**stacked)

    @property
    def horizon(self) -> int:
        return self.actions.shape[0]

    @property
    def workers(self) -> int:
        return self.actions.shape[1]

    @property
    def num_steps(self) -> int:
        return self.actions.size

    def inputs(self, columns: np.ndarray | slice = slice(None)) -> AgentInputs:
        """Agent inputs (T, b, ...) of the selected worker columns."""
        return AgentInputs(**{key: getattr(self, key)[:, columns] for key in INPUT_KEYS})

    def nie_target(self, columns: np.ndarray | slice = slice(None)) -> NieTarget:
        """Engine targets flattened to (T * b) rows, matching `AgentInputs.flatten`."""
        targets = self.nie_targets[:, columns]
        return NieTarget(keypoints=targets.reshape(-1, *targets.shape[2:]),
                         action=self.actions[:, columns].reshape(-1),
                         observed=self.observed[:, columns].reshape(-1, self.observed.shape[-1]))

    def values_with_bootstrap(self) -> np.ndarray:
        return np.concatenate([self.values, self.bootstrap[None]], axis=0)


class RolloutWorker:
    """
    Owns one environment and the recurrent state of the episode in progress. Every reset starts a randomly chosen
    episode of the worker's share.
    """

    def __init__(self, index: int, episodes: Sequence[Episode], settings: Settings, agent: InteractiveNavAgent,
                 seed: int):
        self.index = index
        self.agent = agent
        self.settings = settings
        self.rng = np.random.default_rng(np.random.SeedSequence([seed, index]))
        self.env = InteractiveNavEnv(episodes, settings)
        self.observation, _ = self.env.reset(seed=int(self.rng.integers(2 ** 31)), options=self._pick())
        self.hidden = agent.initial_hidden(1)
        self.starting = True

    def _pick(self) -> dict:
        return {"episode": int(self.rng.integers(len(self.env.episodes)))}

    def collect(self, snapshot: ParameterSnapshot, horizon: int) -> Segment:
        params = snapshot.tensors()
        agent = self.agent
        segment_hidden = self.hidden[0].copy()
        columns = {key: [] for key in (*INPUT_KEYS, "actions", "log_probs", "values", "rewards", "dones", "starts",
                                       "nie_targets", "observed")}
        results = []
        for _ in range(horizon):
            if self.starting:
                self.hidden = agent.initial_hidden(1)
            inputs = stack_observations([self.observation], agent.dtype)
            step = agent.act(params, inputs, self.hidden, self.rng)
            action = int(step.action[0])
            observation, reward, terminated, truncated, info = self.env.step(action)
            targets, observed = nie_targets(info["previous_keypoints"], info["previous_state"], info["state"],
                                            self.settings.render)

            for key in INPUT_KEYS:
                columns[key].append(getattr(inputs, key)[0])
            columns["actions"].append(action)
            columns["log_probs"].append(step.log_prob[0])
            columns["values"].append(step.value[0])
            columns["rewards"].append(reward)
            columns["starts"].append(self.starting)
            columns["nie_targets"].append(targets)
            columns["observed"].append(observed)

            done = terminated or truncated
            columns["dones"].append(done)
            self.hidden = step.hidden
            self.starting = done
            if done:
                results.append(info["result"])
                observation, _ = self.env.reset(options=self._pick())
            self.observation = observation

        bootstrap_hidden = agent.initial_hidden(1) if self.starting else self.hidden
        bootstrap = agent.forward(params, stack_observations([self.observation], agent.dtype),
                                  bootstrap_hidden).policy.value.data[0]
        arrays = {key: np.asarray(values) for key, values in columns.items()}
        return Segment(**arrays, hidden=segment_hidden, bootstrap_value=float(bootstrap), results=results)
