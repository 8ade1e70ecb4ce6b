from collections.abc import Callable, Mapping
from dataclasses import dataclass

import numpy as np

from nie_nav_pipeline.tensor_core.optim import ParameterSnapshot, ParameterStore
from nie_nav_pipeline.tensor_core.tensor import Tensor

Graph = Callable[[Mapping[str, Tensor], Mapping[str, Tensor]], Mapping[str, Tensor] | Tensor]


@dataclass
class Gradients:
    params: dict[str, np.ndarray]
    inputs: dict[str, np.ndarray]


@dataclass
class GraphResult:
    outputs: dict[str, Tensor]
    inputs: dict[str, Tensor]
    params: dict[str, Tensor]

    def backward(self, output: str = "output", seed: np.ndarray | None = None) -> Gradients:
        """
        Back-propagates from one output. Every parameter and input gets a gradient; the ones the output does not
        depend on get zeros.
        """
        self.outputs[output].backward(seed)
        return Gradients(
            params={name: _grad_or_zeros(t) for name, t in self.params.items()},
            inputs={name: _grad_or_zeros(t) for name, t in self.inputs.items()},
        )


def _grad_or_zeros(tensor: Tensor) -> np.ndarray:
    return tensor.grad if tensor.grad is not None else np.zeros_like(tensor.data)


def evaluate_graph(graph: Graph, inputs: Mapping[str, np.ndarray],
                   params: ParameterStore | ParameterSnapshot | Mapping[str, np.ndarray] | None = None) -> GraphResult:
    """
    Runs `graph(inputs, params)` on fresh gradient-tracking leaves. A graph returning a single tensor exposes it
    under the output name "output".
    """
    if isinstance(params, ParameterStore):
        param_arrays = params.params
    elif isinstance(params, ParameterSnapshot):
        param_arrays = params.arrays
    else:
        param_arrays = params or {}

    input_leaves = {name: Tensor(np.array(value), requires_grad=True, name=name) for name, value in inputs.items()}
    param_leaves = {name: Tensor(np.array(value), requires_grad=True, name=name)
                    for name, value in param_arrays.items()}
    outputs = graph(input_leaves, param_leaves)
    if isinstance(outputs, Tensor):
        outputs = {"output": outputs}
    return GraphResult(outputs=dict(outputs), inputs=input_leaves, params=param_leaves)
