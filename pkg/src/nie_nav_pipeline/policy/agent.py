"""
The full model of one run: visual encoder, optional interaction engine and recurrent policy sharing one
parameter store.
"""
from dataclasses import dataclass, fields

import numpy as np

from nie_nav_pipeline.nie.network import NieNetwork, NieOutput
from nie_nav_pipeline.policy.network import PolicyNetwork, PolicyOutput
from nie_nav_pipeline.policy.visual import VisualEncoder, encoding_width, observation_encoding
from nie_nav_pipeline.settings import Settings
from nie_nav_pipeline.tensor_core import ParameterStore, Tensor, ops
from nie_nav_pipeline.tensor_core.layers import Params
from nie_nav_pipeline.worldsim import NUM_ACTIONS


@dataclass
class AgentInputs:
    """
    One batch of agent inputs. Leading axes are (B,) for a single step or (T, B) for a rollout segment.
    """
    color: np.ndarray  # (..., H, W, 3)
    depth: np.ndarray  # (..., H, W)
    goal: np.ndarray  # (..., 2) target offset (right, forward) in the agent frame
    keypoints: np.ndarray  # (..., C, 8, 3)
    presence: np.ndarray  # (..., C)
    target_category: np.ndarray  # (...,) int, -1 when the task has no target object

    def flatten(self, leading: int = 2) -> "AgentInputs":
        """Merges the first `leading` axes into one batch axis."""
        return AgentInputs(**{f.name: _merge(getattr(self, f.name), leading) for f in fields(self)})


def _merge(array: np.ndarray, leading: int) -> np.ndarray:
    return array.reshape(-1, *array.shape[leading:])


@dataclass
class AgentStep:
    action: np.ndarray  # (B,)
    log_prob: np.ndarray  # (B,)
    value: np.ndarray  # (B,)
    hidden: np.ndarray  # (B, hidden_size) after the step
    probs: np.ndarray  # (B, 10)


@dataclass
class AgentOutput:
    policy: PolicyOutput
    nie: NieOutput | None


@dataclass
class SequenceOutput:
    log_probs: Tensor  # (T, B, 10)
    values: Tensor  # (T, B)
    nie: NieOutput | None  # batched over T * B


def sample_actions(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF sampling of one action per row."""
    cumulative = np.cumsum(probs, axis=-1)
    draws = rng.random((probs.shape[0], 1)) * cumulative[:, -1:]
    return np.minimum((cumulative <= draws).sum(axis=-1), probs.shape[-1] - 1)


class InteractiveNavAgent:
    def __init__(self, settings: Settings, num_categories: int, rng: np.random.Generator,
                 dtype: str | None = None):
        self.variant = settings.run.variant
        self.task = settings.run.task
        self.store = ParameterStore(dtype=np.dtype(dtype or settings.run.dtype))
        self.obs_block = settings.nie.obs_block
        self.representation_dim = settings.nie.output_dim
        self.num_categories = num_categories
        render = settings.render

        self.visual = VisualEncoder(self.store, "visual", settings.policy, render.height, render.width, rng)
        self.nie = None
        if self.variant != "ppo":
            observation_dim = 0
            if self.variant != "nie_novis":
                observation_dim = self.visual.output_dim + encoding_width(render.height, render.width, self.obs_block)
            self.nie = NieNetwork(self.store, "nie", settings.nie, num_categories, rng, observation_dim)
        self.policy = PolicyNetwork(self.store, "policy", settings.policy, self.visual.output_dim,
                                    self.representation_dim, rng,
                                    num_target_categories=num_categories if self.task == "objplace" else 0)

    @property
    def dtype(self) -> np.dtype:
        return self.store.dtype

    def initial_hidden(self, batch: int) -> np.ndarray:
        return np.zeros((batch, self.policy.hidden_size), dtype=self.dtype)

    def encode(self, params: Params, inputs: AgentInputs) -> tuple[Tensor, NieOutput | None, Tensor]:
        """Visual feature, engine output and interaction representation of a flat batch (zeros for PPO)."""
        visual = self.visual(params, inputs.color, inputs.depth)
        if self.nie is None:
            zeros = np.zeros((visual.shape[0], NUM_ACTIONS, self.representation_dim), dtype=self.dtype)
            return visual, None, Tensor(zeros)
        observation = None
        if self.nie.uses_observation:
            raw = observation_encoding(inputs.color, inputs.depth, self.obs_block).astype(self.dtype)
            observation = ops.concat([visual, Tensor(raw)], axis=-1)
        output = self.nie(params, inputs.keypoints, inputs.presence, observation)
        return visual, output, output.representation

    def _target_category(self, inputs: AgentInputs) -> np.ndarray | None:
        return inputs.target_category if self.policy.target_category is not None else None

    def forward(self, params: Params, inputs: AgentInputs, hidden: np.ndarray) -> AgentOutput:
        visual, nie_output, representation = self.encode(params, inputs)
        policy_output = self.policy(params, visual, inputs.goal, representation,
                                    Tensor(np.asarray(hidden, dtype=self.dtype)), self._target_category(inputs))
        return AgentOutput(policy=policy_output, nie=nie_output)

    def act(self, params: Params, inputs: AgentInputs, hidden: np.ndarray, rng: np.random.Generator,
            greedy: bool = False) -> AgentStep:
        output = self.forward(params, inputs, hidden).policy
        probs = output.probs
        action = probs.argmax(axis=-1) if greedy else sample_actions(probs, rng)
        log_prob = np.take_along_axis(output.log_probs.data, action[:, None], axis=-1)[:, 0]
        return AgentStep(action=action.astype(np.int64), log_prob=log_prob, value=output.value.data.copy(),
                         hidden=output.hidden.data.copy(), probs=probs)

    def evaluate_sequence(self, params: Params, inputs: AgentInputs, hidden: np.ndarray,
                          starts: np.ndarray) -> SequenceOutput:
        """
        Re-evaluates a (T, B) segment. Encoders run on all T * B frames at once; the recurrent cell is unrolled
        from `hidden` (B, hidden_size) and reset wherever `starts[t, b]` marks the first step of an episode.
        """
        t_len, batch = starts.shape
        flat = inputs.flatten()
        visual, nie_output, representation = self.encode(params, flat)
        features = self.policy.features(params, visual, flat.goal, representation, self._target_category(flat))
        features = ops.reshape(features, (t_len, batch, features.shape[-1]))

        h = Tensor(np.asarray(hidden, dtype=self.dtype))
        keep = 1.0 - np.asarray(starts, dtype=self.dtype)
        states = []
        for t in range(t_len):
            h = ops.mul(h, keep[t][:, None])
            x = ops.reshape(ops.narrow(features, 0, t, 1), (batch, features.shape[-1]))
            h = self.policy.cell(params, x, h)
            states.append(ops.reshape(h, (1, batch, self.policy.hidden_size)))
        stacked = ops.reshape(ops.concat(states, axis=0), (t_len * batch, self.policy.hidden_size))
        log_probs, values = self.policy.heads(params, stacked)
        return SequenceOutput(log_probs=ops.reshape(log_probs, (t_len, batch, NUM_ACTIONS)),
                              values=ops.reshape(values, (t_len, batch)), nie=nie_output)
