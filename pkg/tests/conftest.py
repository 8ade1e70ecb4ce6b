import numpy as np
import pytest

from nie_nav_pipeline.geometry import ObjectPose
from nie_nav_pipeline.settings import Settings
from nie_nav_pipeline.tensor_core import evaluate_graph
from nie_nav_pipeline.worldsim import AgentState, ObjectInstance, WorldState, empty_room

SMALL_SETTINGS = {
    "run": {"seed": 3, "dtype": "float64"},
    "render": {"width": 16, "height": 16},
    "dataset": {"train_count": 4, "val_count": 2, "test_count": 2},
    "reward": {"obsnav": {"max_steps": 12}, "objplace": {"max_steps": 12}},
    "nie": {"embedding_dim": 4, "hidden_dim": 8, "output_dim": 4, "obs_block": 8},
    "policy": {"conv_channels": [2, 2], "conv_kernels": [3, 3], "visual_dim": 8, "goal_dim": 4, "hidden_size": 8},
    "train": {"workers": 2, "horizon": 4, "ppo_epochs": 1, "minibatches": 1, "total_steps": 16, "eval_period": 8,
              "eval_episodes": 1},
    "supervised": {"transitions": 60, "episode_length": 10, "batch_size": 8, "epochs": 2, "workers": 1},
}


@pytest.fixture
def small_settings() -> Settings:
    """Tiny networks, 16x16 frames and double precision."""
    return Settings.model_validate(SMALL_SETTINGS)


def box(object_id: int, position: tuple[float, float], size=(0.5, 0.5, 0.5), category: int = 0,
        yaw: float = 0.0, mass_factor: float = 1.0) -> ObjectInstance:
    return ObjectInstance(id=object_id, category=category, size=size,
                          pose=ObjectPose((position[0], 0.0, position[1]), yaw), mass_factor=mass_factor)


@pytest.fixture
def make_box():
    return box


@pytest.fixture
def room() -> WorldState:
    """12 x 12 cell room (2.5 m of free floor per side), agent at cell (3, 2) facing +z, no objects."""
    return WorldState(walls=empty_room(12, 12), objects=(), agent=AgentState((0.875, 0.625)), target=(2.375, 2.375))


@pytest.fixture
def box_room(room) -> WorldState:
    """The room with one 0.5 m box straight ahead of the agent, its near face 0.375 m from the agent cell."""
    return WorldState(walls=room.walls, objects=(box(0, (0.875, 1.375)),), agent=room.agent, target=room.target)


def _scalar(graph, inputs, params) -> float:
    return float(evaluate_graph(graph, inputs, params).outputs["output"].data)


@pytest.fixture
def gradient_check():
    """
    Compares the reverse-mode gradients of a scalar graph with central differences, for every input and for the
    parameters named in `check` (all parameters by default).
    """

    def check(graph, inputs, params=None, check=None, eps=1e-6, tolerance=1e-4):
        inputs = {name: np.array(value, dtype=np.float64) for name, value in inputs.items()}
        params = {name: np.array(value, dtype=np.float64) for name, value in (params or {}).items()}
        grads = evaluate_graph(graph, inputs, params).backward()
        targets = [("input", inputs, grads.inputs, list(inputs)),
                   ("param", params, grads.params, list(params) if check is None else list(check))]
        for kind, arrays, analytic, names in targets:
            for name in names:
                array = arrays[name]
                numeric = np.zeros_like(array)
                for index in np.ndindex(array.shape):
                    original = array[index]
                    array[index] = original + eps
                    plus = _scalar(graph, inputs, params)
                    array[index] = original - eps
                    minus = _scalar(graph, inputs, params)
                    array[index] = original
                    numeric[index] = (plus - minus) / (2 * eps)
                scale = max(float(np.abs(analytic[name]).max(initial=0.0)), float(np.abs(numeric).max(initial=0.0)),
                            1e-8)
                error = float(np.abs(analytic[name] - numeric).max(initial=0.0)) / scale
                assert error <= tolerance, f"{kind} '{name}': relative gradient error {error:.2e}"

    return check
