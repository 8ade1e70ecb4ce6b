"""
Visual encoder over (colour, depth) and the raw pooled observation encoding.
"""
import numpy as np

from nie_nav_pipeline.settings import PolicySettings
from nie_nav_pipeline.tensor_core import Conv2d, Linear, ParameterStore, Tensor, ops
from nie_nav_pipeline.tensor_core.layers import Params

DEPTH_SCALE = 10.0  # meters mapped to 1.0


def observation_encoding(color: np.ndarray, depth: np.ndarray, block: int) -> np.ndarray:
    """
    Block-averaged colour and scaled depth, flattened per sample: (N, H, W, 3) + (N, H, W) -> (N, 4 (H/b) (W/b)).
    """
    n, h, w, _ = color.shape
    assert h % block == 0 and w % block == 0, f"Image size {h}x{w} is not divisible by block {block}"
    stacked = np.concatenate([color, depth[..., None] / DEPTH_SCALE], axis=-1)
    pooled = stacked.reshape(n, h // block, block, w // block, block, 4).mean(axis=(2, 4))
    return pooled.transpose(0, 3, 1, 2).reshape(n, -1)


def encoding_width(height: int, width: int, block: int) -> int:
    return 4 * (height // block) * (width // block)


class VisualEncoder:
    """
    Two convolution stacks, one for colour and one for depth, fused by a linear layer into v.
    """

    def __init__(self, store: ParameterStore, name: str, settings: PolicySettings, height: int, width: int,
                 rng: np.random.Generator):
        self.color_layers = self._stack(store, f"{name}.color", 3, settings, rng)
        self.depth_layers = self._stack(store, f"{name}.depth", 1, settings, rng)
        h, w = height, width
        for kernel in settings.conv_kernels:
            h = (h + 2 * (kernel // 2) - kernel) // settings.conv_stride + 1
            w = (w + 2 * (kernel // 2) - kernel) // settings.conv_stride + 1
        self.flat_width = settings.conv_channels[-1] * h * w
        self.fuse = Linear(store, f"{name}.fuse", 2 * self.flat_width, settings.visual_dim, rng)
        self.output_dim = settings.visual_dim
        self.dtype = store.dtype

    @staticmethod
    def _stack(store, name, in_channels, settings, rng) -> list[Conv2d]:
        layers = []
        for i, (channels, kernel) in enumerate(zip(settings.conv_channels, settings.conv_kernels, strict=True)):
            layers.append(Conv2d(store, f"{name}.{i}", in_channels, channels, kernel, rng,
                                 stride=settings.conv_stride, padding=kernel // 2))
            in_channels = channels
        return layers

    @staticmethod
    def _run(params: Params, layers: list[Conv2d], x: Tensor) -> Tensor:
        for layer in layers:
            x = ops.relu(layer(params, x))
        return ops.reshape(x, (x.shape[0], -1))

    def __call__(self, params: Params, color: np.ndarray, depth: np.ndarray) -> Tensor:
        """(N, H, W, 3) colour in [0, 1] and (N, H, W) depth in meters to (N, visual_dim)."""
        color_in = Tensor(np.ascontiguousarray(color.transpose(0, 3, 1, 2), dtype=self.dtype))
        depth_in = Tensor((depth[:, None] / DEPTH_SCALE).astype(self.dtype))
        features = ops.concat([self._run(params, self.color_layers, color_in),
                               self._run(params, self.depth_layers, depth_in)], axis=-1)
        return ops.relu(self.fuse(params, features))
