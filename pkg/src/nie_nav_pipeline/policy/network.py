"""
Recurrent actor-critic head: goal embedding, fusion with the visual feature and the flattened interaction
representation, a GRU state encoder and the actor/critic heads.
"""
from dataclasses import dataclass

import numpy as np

from nie_nav_pipeline.settings import PolicySettings
from nie_nav_pipeline.tensor_core import Embedding, GruCell, Linear, ParameterStore, Tensor, ops
from nie_nav_pipeline.tensor_core.layers import Params
from nie_nav_pipeline.worldsim import NUM_ACTIONS


@dataclass
class PolicyOutput:
    log_probs: Tensor  # (B, 10)
    value: Tensor  # (B,)
    hidden: Tensor  # (B, hidden_size)

    @property
    def probs(self) -> np.ndarray:
        return np.exp(self.log_probs.data)


class PolicyNetwork:
    def __init__(self, store: ParameterStore, name: str, settings: PolicySettings, visual_dim: int,
                 representation_dim: int, rng: np.random.Generator, num_target_categories: int = 0):
        """
        `representation_dim` is the width D of one representation row. A positive `num_target_categories` adds the
        target-category embedding used by ObjPlace.
        """
        self.goal = Linear(store, f"{name}.goal", 2, settings.goal_dim, rng)
        goal_width = settings.goal_dim
        self.target_category = None
        if num_target_categories:
            self.target_category = Embedding(store, f"{name}.target_category", num_target_categories,
                                             settings.goal_dim, rng)
            goal_width += settings.goal_dim
        self.representation_width = NUM_ACTIONS * representation_dim
        self.input_width = goal_width + visual_dim + self.representation_width
        self.cell = GruCell(store, f"{name}.cell", self.input_width, settings.hidden_size, rng)
        self.actor = Linear(store, f"{name}.actor", settings.hidden_size, NUM_ACTIONS, rng)
        self.critic = Linear(store, f"{name}.critic", settings.hidden_size, 1, rng)
        self.hidden_size = settings.hidden_size
        self.dtype = store.dtype

    def initial_hidden(self, batch: int) -> Tensor:
        return Tensor(np.zeros((batch, self.hidden_size), dtype=self.dtype))

    def features(self, params: Params, visual: Tensor, goal: np.ndarray, representation: Tensor,
                 target_category: np.ndarray | None = None) -> Tensor:
        """[goal, visual, flattened representation] for a batch (B, ...)."""
        if representation.shape[-2] != NUM_ACTIONS:
            raise ops.ShapeError("policy_forward", representation.shape, detail=f"needs {NUM_ACTIONS} rows")
        b = visual.shape[0]
        parts = [ops.relu(self.goal(params, Tensor(np.asarray(goal, dtype=self.dtype))))]
        if self.target_category is not None:
            assert target_category is not None, "This policy embeds a target category"
            parts.append(self.target_category(params, target_category))
        parts += [visual, ops.reshape(representation, (b, self.representation_width))]
        return ops.concat(parts, axis=-1)

    def heads(self, params: Params, hidden: Tensor) -> tuple[Tensor, Tensor]:
        log_probs = ops.log_softmax(self.actor(params, hidden), axis=-1)
        value = ops.reshape(self.critic(params, hidden), (hidden.shape[0],))
        return log_probs, value

    def __call__(self, params: Params, visual: Tensor, goal: np.ndarray, representation: Tensor, hidden: Tensor,
                 target_category: np.ndarray | None = None) -> PolicyOutput:
        return policy_forward(self, params, visual, goal, representation, hidden, target_category)


def policy_forward(net: PolicyNetwork, params: Params, visual: Tensor, goal: np.ndarray, representation: Tensor,
                   hidden: Tensor, target_category: np.ndarray | None = None) -> PolicyOutput:
    features = net.features(params, visual, goal, representation, target_category)
    new_hidden = net.cell(params, features, hidden)
    log_probs, value = net.heads(params, new_hidden)
    return PolicyOutput(log_probs=log_probs, value=value, hidden=new_hidden)
