import logging
from pathlib import Path

import numpy as np

from nie_nav_pipeline.tensor_core.optim import LrSchedule, ParameterStore

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT_VERSION = 1
_STORAGE_DTYPE = np.dtype("<f8")


class CheckpointMismatchError(ValueError):
    """Raised when a checkpoint does not match the parameters of the network it is loaded into."""


def save_checkpoint(filepath: Path, store: ParameterStore, schedule: LrSchedule | None = None):
    """
    Writes parameters, Adam moments and optimizer bookkeeping to a .npz archive of little-endian doubles.
    """
    assert filepath.suffix == ".npz", "The checkpoint file does not have the correct file extension. Must be .npz"
    filepath.parent.mkdir(parents=True, exist_ok=True)

    entries = {
        "format_version": np.array(CHECKPOINT_FORMAT_VERSION, dtype="<i8"),
        "adam_step": np.array(store.step, dtype="<i8"),
    }
    if schedule is not None:
        entries["schedule"] = np.array([schedule.initial_rate, schedule.total_steps, schedule.current_step],
                                       dtype=_STORAGE_DTYPE)
    for name in store:
        entries[f"param/{name}"] = store.params[name].astype(_STORAGE_DTYPE)
        entries[f"adam_m/{name}"] = store.adam_m[name].astype(_STORAGE_DTYPE)
        entries[f"adam_v/{name}"] = store.adam_v[name].astype(_STORAGE_DTYPE)

    with open(filepath, "wb") as f:
        np.savez(f, **entries)
    logger.debug(f"Saved checkpoint with {len(store)} parameters to {filepath}")


def load_checkpoint(filepath: Path, store: ParameterStore, schedule: LrSchedule | None = None) -> ParameterStore:
    """
    Loads a checkpoint into an already-built store; every name and shape has to agree.
    """
    assert filepath.suffix == ".npz", "The checkpoint file does not have the correct file extension. Must be .npz"

    with np.load(filepath, allow_pickle=False) as archive:
        version = int(archive["format_version"])
        if version != CHECKPOINT_FORMAT_VERSION:
            raise CheckpointMismatchError(f"Unsupported checkpoint format version {version} in {filepath}")

        stored = {key.removeprefix("param/") for key in archive.files if key.startswith("param/")}
        expected = set(store.params)
        if stored != expected:
            missing = sorted(expected - stored)
            unexpected = sorted(stored - expected)
            raise CheckpointMismatchError(
                f"Checkpoint {filepath.name} does not match the network: missing {missing}, unexpected {unexpected}")

        for name in store:
            value = archive[f"param/{name}"]
            if value.shape != store.params[name].shape:
                raise CheckpointMismatchError(
                    f"Parameter '{name}' has shape {value.shape} in the checkpoint but {store.params[name].shape} "
                    f"in the network")
            store.params[name] = value.astype(store.dtype)
            store.adam_m[name] = archive[f"adam_m/{name}"].astype(store.dtype)
            store.adam_v[name] = archive[f"adam_v/{name}"].astype(store.dtype)
        store.step = int(archive["adam_step"])

        if schedule is not None and "schedule" in archive.files:
            initial_rate, total_steps, current_step = archive["schedule"]
            schedule.initial_rate = float(initial_rate)
            schedule.total_steps = int(total_steps)
            schedule.current_step = int(current_step)

    logger.debug(f"Loaded checkpoint {filepath} (Adam step {store.step})")
    return store
