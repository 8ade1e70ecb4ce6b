import logging
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from types import MappingProxyType

import numpy as np

from nie_nav_pipeline.tensor_core.tensor import Tensor

logger = logging.getLogger(__name__)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8


class MissingGradientError(KeyError):
    """Raised when an optimizer step is asked to update a parameter without a gradient."""

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"No gradient provided for parameter '{name}'")


@dataclass(frozen=True)
class ParameterSnapshot:
    """
    Immutable copy of all parameter values, safe to hand to concurrent rollout workers.
    """
    arrays: Mapping[str, np.ndarray]

    def tensors(self) -> dict[str, Tensor]:
        return {name: Tensor(value, name=name) for name, value in self.arrays.items()}


@dataclass
class LrSchedule:
    """
    Linear decay from `initial_rate` to zero over `total_steps` optimizer steps.
    """
    initial_rate: float = 3e-4
    total_steps: int = 1
    current_step: int = 0

    def __post_init__(self):
        assert self.total_steps >= 1, "The schedule needs at least one step"

    @property
    def rate(self) -> float:
        return max(0.0, self.initial_rate * (1.0 - self.current_step / self.total_steps))

    def advance(self):
        self.current_step += 1


@dataclass(eq=False)
class ParameterStore:
    """
    Named parameters together with their Adam moment buffers and the optimizer step counter.
    """
    dtype: np.dtype = field(default_factory=lambda: np.dtype(np.float64))
    params: dict[str, np.ndarray] = field(default_factory=dict)
    adam_m: dict[str, np.ndarray] = field(default_factory=dict)
    adam_v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0

    def add(self, name: str, value: np.ndarray) -> str:
        if name in self.params:
            raise ValueError(f"Parameter '{name}' is already registered")
        value = np.array(value, dtype=self.dtype)
        self.params[name] = value
        self.adam_m[name] = np.zeros_like(value)
        self.adam_v[name] = np.zeros_like(value)
        return name

    def __getitem__(self, name: str) -> np.ndarray:
        return self.params[name]

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def __iter__(self) -> Iterator[str]:
        return iter(self.params)

    def __len__(self) -> int:
        return len(self.params)

    def names(self, prefix: str = "") -> list[str]:
        return [name for name in self.params if name.startswith(prefix)]

    def leaves(self) -> dict[str, Tensor]:
        """Fresh gradient-tracking tensors for one forward/backward pass."""
        return {name: Tensor(value, requires_grad=True, name=name) for name, value in self.params.items()}

    def snapshot(self) -> ParameterSnapshot:
        arrays = {}
        for name, value in self.params.items():
            frozen = value.copy()
            frozen.flags.writeable = False
            arrays[name] = frozen
        return ParameterSnapshot(MappingProxyType(arrays))

    def load_snapshot(self, snapshot: ParameterSnapshot):
        for name, value in snapshot.arrays.items():
            self.params[name] = np.array(value, dtype=self.dtype)

    def count(self) -> int:
        return sum(value.size for value in self.params.values())


def global_norm(grads: Mapping[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(np.square(g))) for g in grads.values())))


def clip_gradients(grads: Mapping[str, np.ndarray], threshold: float) -> dict[str, np.ndarray]:
    """
    Rescales all gradients together so their global L2 norm does not exceed `threshold`.
    """
    assert threshold > 0, "Clip threshold must be positive"
    norm = global_norm(grads)
    if norm <= threshold:
        return dict(grads)
    scale = threshold / norm
    return {name: g * scale for name, g in grads.items()}


def adam_step(store: ParameterStore, grads: Mapping[str, np.ndarray], schedule: LrSchedule,
              names: Iterable[str] | None = None) -> ParameterStore:
    names = list(store.params) if names is None else list(names)
    for name in names:
        if name not in grads or grads[name] is None:
            raise MissingGradientError(name)

    rate = schedule.rate
    t = store.step + 1
    correction1 = 1.0 - ADAM_BETA1 ** t
    correction2 = 1.0 - ADAM_BETA2 ** t
    for name in names:
        g = np.asarray(grads[name], dtype=store.dtype)
        m = ADAM_BETA1 * store.adam_m[name] + (1.0 - ADAM_BETA1) * g
        v = ADAM_BETA2 * store.adam_v[name] + (1.0 - ADAM_BETA2) * g * g
        store.adam_m[name] = m
        store.adam_v[name] = v
        # arrays are replaced, never mutated, so outstanding snapshots stay valid
        store.params[name] = store.params[name] - rate * (m / correction1) / (np.sqrt(v / correction2) + ADAM_EPSILON)

    store.step = t
    schedule.advance()
    logger.debug(f"Adam step {t} at learning rate {rate:.3e}")
    return store
