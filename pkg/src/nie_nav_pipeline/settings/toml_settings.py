import logging
import os
import tomllib
from pathlib import Path

import toml

from nie_nav_pipeline.settings.run_settings import Settings

logger = logging.getLogger(__name__)

SEED_ENVIRONMENT_VARIABLE = "NIE_NAV_SEED"


def write_settings_to_toml(filepath: Path, settings: Settings):
    """
    Writes all settings to a .toml file.
    """
    assert filepath.suffix == ".toml", "The input file does not have the correct file extension. Must be .toml"

    parent_path = filepath.parent
    parent_path.mkdir(parents=True, exist_ok=True)

    settings_dict = settings.model_dump()

    with open(filepath, "w") as toml_file:
        toml.dump(settings_dict, toml_file)


def load_settings_from_toml(filepath: Path) -> Settings:
    """
    Loads settings from a pre-written .toml file.
    Only non-default settings need to be provided.
    The remaining settings are set to their default value.
    """

    assert filepath.suffix == ".toml", "The input file does not have the correct file extension. Must be .toml"

    with open(filepath, "rb") as f:
        settings = tomllib.load(f)
    settings = Settings.model_validate(settings)

    return settings


def resolve_settings(filepath: Path | None = None, seed: int | None = None) -> Settings:
    """
    Settings of a run: the file (or all defaults), with the seed taken from the flag, else the NIE_NAV_SEED
    environment variable, else the file.
    """
    settings = Settings() if filepath is None else load_settings_from_toml(filepath)

    if seed is None and SEED_ENVIRONMENT_VARIABLE in os.environ:
        seed = int(os.environ[SEED_ENVIRONMENT_VARIABLE])
        logger.debug(f"Using seed {seed} from {SEED_ENVIRONMENT_VARIABLE}.")
    if seed is not None:
        settings = settings.model_copy(update={"run": settings.run.model_copy(update={"seed": seed})})
    return settings
