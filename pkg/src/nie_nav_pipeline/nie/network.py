"""
Neural Interaction Engine.

For every observed category and every action the engine predicts a 3x4 affine transform of the category's
keypoints, moves the keypoints with it, encodes the keypoint centres before and after, and summarises the
categories with masked self-attention into one representation row per action.

Shapes use B (batch), C (categories), A (actions), N (keypoints, 8), E (embedding), F (3 E), D (output).
"""
from dataclasses import dataclass

import numpy as np

from nie_nav_pipeline.geometry import keypoint_center
from nie_nav_pipeline.settings import NieSettings
from nie_nav_pipeline.tensor_core import Embedding, Linear, Mlp, ParameterStore, SelfAttention, Tensor, ops
from nie_nav_pipeline.tensor_core.layers import Params
from nie_nav_pipeline.worldsim import NUM_ACTIONS

IDENTITY_3X4 = np.array([1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0])


@dataclass
class NieOutput:
    affine_params: Tensor  # (B, C, A, 12), rows of the top 3x4 block
    keypoints_after: Tensor  # (B, C, A, N, 3)
    representation: Tensor  # (B, A, D)

    @property
    def affine(self) -> np.ndarray:
        """Predicted Affine4 matrices (B, C, A, 4, 4) with the bottom row fixed to (0, 0, 0, 1)."""
        top = self.affine_params.data.reshape(*self.affine_params.shape[:-1], 3, 4)
        bottom = np.broadcast_to(np.array([0.0, 0.0, 0.0, 1.0], dtype=top.dtype), (*top.shape[:-2], 1, 4))
        return np.concatenate([top, bottom], axis=-2)


@dataclass
class NieTarget:
    keypoints: np.ndarray  # after the executed action, (B, C, N, 3)
    action: np.ndarray  # executed action, (B,)
    observed: np.ndarray  # (B, C) bool


class NieNetwork:
    def __init__(self, store: ParameterStore, name: str, settings: NieSettings, num_categories: int,
                 rng: np.random.Generator, observation_dim: int = 0):
        """
        `observation_dim` is the width of the visual tensor plus the raw observation encoding; 0 builds the
        engine without visual input.
        """
        e, h = settings.embedding_dim, settings.hidden_dim
        self.num_categories = num_categories
        self.num_keypoints = settings.num_keypoints
        self.observation_dim = observation_dim
        self.dtype = store.dtype

        self.keypoint_mlp = Mlp(store, f"{name}.keypoint_mlp", [3 * self.num_keypoints, h, e], rng)
        self.category_embedding = Embedding(store, f"{name}.category_embedding", num_categories, e, rng)
        self.action_embedding = Embedding(store, f"{name}.action_embedding", NUM_ACTIONS, e, rng)
        affine_in = 3 * e
        if observation_dim:
            self.observation_proj = Linear(store, f"{name}.observation_proj", observation_dim, e, rng)
            affine_in += e
        self.affine_hidden = Linear(store, f"{name}.affine_hidden", affine_in, h, rng)
        # zero weights with identity bias: the untrained engine predicts "nothing moves"
        self.affine_head = Linear(store, f"{name}.affine_head", h, 12, rng, weight=np.zeros((h, 12)),
                                  bias=IDENTITY_3X4)
        self.state_encoder = Mlp(store, f"{name}.state_encoder", [3, h, e], rng)
        self.attention = SelfAttention(store, f"{name}.attention", 3 * e, rng)
        self.output_proj = Linear(store, f"{name}.output_proj", 3 * e, settings.output_dim, rng)
        self.output_dim = settings.output_dim

    @property
    def uses_observation(self) -> bool:
        return self.observation_dim > 0

    def __call__(self, params: Params, keypoints: np.ndarray, presence: np.ndarray,
                 observation: Tensor | None = None) -> NieOutput:
        return nie_forward(self, params, keypoints, presence, observation)


def nie_forward(net: NieNetwork, params: Params, keypoints: np.ndarray, presence: np.ndarray,
                observation: Tensor | None = None) -> NieOutput:
    """
    keypoints (B, C, N, 3) and presence (B, C) from the current frame; observation (B, observation_dim) is the
    visual tensor concatenated with the raw observation encoding, required when the engine was built with it.
    """
    b, c, n, _ = keypoints.shape
    a = NUM_ACTIONS
    e = net.category_embedding.table(params).shape[-1]
    p = Tensor(np.asarray(keypoints, dtype=net.dtype))
    mask = np.asarray(presence, dtype=net.dtype)

    # embeddings, broadcast to (B, C, A, E) and concatenated
    keypoint_emb = net.keypoint_mlp(params, ops.reshape(p, (b, c, n * 3)))
    category_emb = net.category_embedding.table(params)
    action_emb = net.action_embedding.table(params)
    parts = [
        ops.broadcast_to(ops.reshape(keypoint_emb, (b, c, 1, e)), (b, c, a, e)),
        ops.broadcast_to(ops.reshape(category_emb, (1, c, 1, e)), (b, c, a, e)),
        ops.broadcast_to(ops.reshape(action_emb, (1, 1, a, e)), (b, c, a, e)),
    ]
    if net.uses_observation:
        assert observation is not None, "This engine was built with visual input"
        observation_emb = net.observation_proj(params, observation)
        parts.append(ops.broadcast_to(ops.reshape(observation_emb, (b, 1, 1, e)), (b, c, a, e)))

    # affine parameters and the transformed keypoints
    hidden = ops.relu(net.affine_hidden(params, ops.concat(parts, axis=-1)))
    affine_params = net.affine_head(params, hidden)
    transform = ops.reshape(affine_params, (b, c, a, 3, 4))
    homogeneous = Tensor(np.concatenate([p.data, np.ones((b, c, n, 1), dtype=net.dtype)], axis=-1)[:, :, None])
    keypoints_after = ops.matmul(homogeneous, ops.transpose(transform))

    # state encodings of the centres
    centers = keypoint_center(p)
    centers_after = keypoint_center(keypoints_after)
    state = net.state_encoder(params, centers)
    state_after = net.state_encoder(params, centers_after)

    # [state, state after the action, category embedding], laid out (B, A, C, F)
    r = ops.concat([
        ops.broadcast_to(ops.reshape(state, (b, 1, c, e)), (b, a, c, e)),
        ops.transpose(state_after, 1, 2),
        ops.broadcast_to(ops.reshape(category_emb, (1, 1, c, e)), (b, a, c, e)),
    ], axis=-1)

    # attention over categories, masked mean pool; no observed category gives a zero row
    attended = net.attention(params, r, mask[:, None, :])
    weights = mask[:, None, :, None]
    counts = np.maximum(mask.sum(axis=1), 1.0)[:, None, None]
    pooled = ops.mul(ops.sum(ops.mul(attended, weights), axis=2), 1.0 / counts)
    any_observed = (mask.sum(axis=1) > 0).astype(net.dtype)[:, None, None]
    representation = ops.mul(net.output_proj(params, pooled), any_observed)
    return NieOutput(affine_params=affine_params, keypoints_after=keypoints_after, representation=representation)


def nie_loss(output: NieOutput, target: NieTarget) -> Tensor:
    """
    Mean absolute error over the 8 x 3 coordinates of the observed categories at the executed action only.
    """
    observed = np.asarray(target.observed, dtype=output.keypoints_after.dtype)
    total = observed.sum()
    if total == 0:
        return Tensor(np.zeros((), dtype=output.keypoints_after.dtype))
    b, c = observed.shape
    n = output.keypoints_after.shape[-2]
    executed = np.broadcast_to(np.asarray(target.action, dtype=np.int64)[:, None], (b, c))
    predicted = ops.select(output.keypoints_after, executed, axis=2)
    error = ops.abs(ops.sub(predicted, np.asarray(target.keypoints, dtype=observed.dtype)))
    masked = ops.mul(error, observed[:, :, None, None])
    return ops.mul(ops.sum(masked), 1.0 / (3 * n * total))
