from nie_nav_pipeline.tensor_core import ops
from nie_nav_pipeline.tensor_core.checkpoint import CheckpointMismatchError, load_checkpoint, save_checkpoint
from nie_nav_pipeline.tensor_core.graph import Gradients, GraphResult, evaluate_graph
from nie_nav_pipeline.tensor_core.layers import Conv2d, Embedding, GruCell, Linear, Mlp, SelfAttention
from nie_nav_pipeline.tensor_core.optim import (
    LrSchedule,
    MissingGradientError,
    ParameterSnapshot,
    ParameterStore,
    adam_step,
    clip_gradients,
    global_norm,
)
from nie_nav_pipeline.tensor_core.tensor import Context, ShapeError, Tensor, as_tensor
