################################################################################################
# Trains the interaction engine alone on random-policy transitions of the ObsNav train split    #
# and compares its held-out keypoint error with predicting that nothing moves. The engine      #
# passes when its error is below half of that identity baseline.                               #
# Runs for up to half an hour on a desktop CPU with the default settings.                      #
################################################################################################

from pathlib import Path

import numpy as np

from nie_nav_pipeline.nie import SupervisedNie, collect_transitions, train_nie_supervised
from nie_nav_pipeline.settings import Settings
from nie_nav_pipeline.tasks import dataset_path, generate_dataset, read_dataset, write_dataset

#  Directory receiving the dataset; an existing train split is reused.
dataset_dir = Path("datasets")
seed = 1
max_ratio = 0.5


if __name__ == "__main__":

    settings = Settings.model_validate({"run": {"seed": seed, "dataset_dir": str(dataset_dir)}})
    filepath = dataset_path(dataset_dir, "obsnav", "train")
    if not filepath.exists():
        episodes = generate_dataset("obsnav", "train", settings.dataset.train_count, seed, settings)
        write_dataset(filepath, episodes, "obsnav", "train", seed)
    episodes = read_dataset(filepath)

    transitions = collect_transitions(episodes, settings)
    rng = np.random.default_rng(seed)
    model = SupervisedNie(settings, len(settings.dataset.categories), rng)
    model, report = train_nie_supervised(transitions, settings, rng, model)

    print(f"Transitions:          {len(transitions)}")
    print(f"Held-out L1:          {report.heldout_l1:.4f}")
    print(f"Identity baseline L1: {report.identity_l1:.4f}")
    print(f"Ratio:                {report.ratio:.3f} (must be below {max_ratio})")
    if report.ratio >= max_ratio:
        raise SystemExit(1)
