"""
Parameterised building blocks.

A layer registers its parameters in a `ParameterStore` under `<name>.<suffix>` when it is constructed and reads
them back from a name -> Tensor mapping when it is called. That mapping is either the learner's gradient-tracking
leaves or the tensors of an immutable snapshot held by a rollout worker.
"""
from collections.abc import Mapping, Sequence

import numpy as np

from nie_nav_pipeline.tensor_core import ops
from nie_nav_pipeline.tensor_core.optim import ParameterStore
from nie_nav_pipeline.tensor_core.tensor import Tensor

Params = Mapping[str, Tensor]


def _uniform(rng: np.random.Generator, fan_in: int, shape: tuple[int, ...]) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Linear:
    def __init__(self, store: ParameterStore, name: str, in_features: int, out_features: int,
                 rng: np.random.Generator, weight: np.ndarray | None = None, bias: np.ndarray | None = None):
        self.name = name
        self.in_features = in_features
        self.out_features = out_features
        if weight is None:
            weight = _uniform(rng, in_features, (in_features, out_features))
        store.add(f"{name}.weight", weight)
        store.add(f"{name}.bias", _uniform(rng, in_features, (out_features,)) if bias is None else bias)

    def __call__(self, params: Params, x: Tensor) -> Tensor:
        if x.shape[-1] != self.in_features:
            raise ops.ShapeError(f"linear[{self.name}]", x.shape, (self.in_features, self.out_features))
        return ops.linear(x, params[f"{self.name}.weight"], params[f"{self.name}.bias"])


class Mlp:
    """
    Stack of linear layers with ReLU in between (and after the last one if `final_activation`).
    """

    def __init__(self, store: ParameterStore, name: str, sizes: Sequence[int], rng: np.random.Generator,
                 final_activation: bool = False):
        assert len(sizes) >= 2, "An MLP needs at least an input and an output size"  # noqa: PLR2004
        self.layers = [Linear(store, f"{name}.{i}", n_in, n_out, rng)
                       for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:], strict=True))]
        self.final_activation = final_activation

    def __call__(self, params: Params, x: Tensor) -> Tensor:
        for i, layer in enumerate(self.layers):
            x = layer(params, x)
            if i < len(self.layers) - 1 or self.final_activation:
                x = ops.relu(x)
        return x


class Embedding:
    def __init__(self, store: ParameterStore, name: str, num_embeddings: int, dim: int, rng: np.random.Generator):
        self.name = name
        self.num_embeddings = num_embeddings
        store.add(f"{name}.weight", rng.normal(0.0, 1.0, size=(num_embeddings, dim)))

    def __call__(self, params: Params, indices) -> Tensor:
        return ops.embedding(params[f"{self.name}.weight"], indices)

    def table(self, params: Params) -> Tensor:
        return params[f"{self.name}.weight"]


class Conv2d:
    def __init__(self, store: ParameterStore, name: str, in_channels: int, out_channels: int, kernel_size: int,
                 rng: np.random.Generator, stride: int = 1, padding: int = 0):
        self.name = name
        self.stride = stride
        self.padding = padding
        fan_in = in_channels * kernel_size * kernel_size
        store.add(f"{name}.weight", _uniform(rng, fan_in, (out_channels, in_channels, kernel_size, kernel_size)))
        store.add(f"{name}.bias", _uniform(rng, fan_in, (out_channels,)))

    def __call__(self, params: Params, x: Tensor) -> Tensor:
        return ops.conv2d(x, params[f"{self.name}.weight"], params[f"{self.name}.bias"],
                          stride=self.stride, padding=self.padding)


class GruCell:
    def __init__(self, store: ParameterStore, name: str, input_size: int, hidden_size: int,
                 rng: np.random.Generator):
        self.name = name
        self.hidden_size = hidden_size
        store.add(f"{name}.w_ih", _uniform(rng, hidden_size, (input_size, 3 * hidden_size)))
        store.add(f"{name}.w_hh", _uniform(rng, hidden_size, (hidden_size, 3 * hidden_size)))
        store.add(f"{name}.b_ih", _uniform(rng, hidden_size, (3 * hidden_size,)))
        store.add(f"{name}.b_hh", _uniform(rng, hidden_size, (3 * hidden_size,)))

    def __call__(self, params: Params, x: Tensor, h: Tensor) -> Tensor:
        return ops.gru_cell(x, h, params[f"{self.name}.w_ih"], params[f"{self.name}.w_hh"],
                            params[f"{self.name}.b_ih"], params[f"{self.name}.b_hh"])


class SelfAttention:
    """
    Single-head self-attention with query/key/value/output projections. Masked positions neither contribute keys
    nor receive meaningful outputs; callers pool with the same mask.
    """

    def __init__(self, store: ParameterStore, name: str, dim: int, rng: np.random.Generator):
        self.query = Linear(store, f"{name}.query", dim, dim, rng)
        self.key = Linear(store, f"{name}.key", dim, dim, rng)
        self.value = Linear(store, f"{name}.value", dim, dim, rng)
        self.output = Linear(store, f"{name}.output", dim, dim, rng)

    def __call__(self, params: Params, x: Tensor, mask: np.ndarray | None = None) -> Tensor:
        attended = ops.attention(self.query(params, x), self.key(params, x), self.value(params, x), key_mask=mask)
        return self.output(params, attended)
