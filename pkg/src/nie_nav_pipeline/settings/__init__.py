from nie_nav_pipeline.settings.run_settings import (
    DEFAULT_CATEGORIES,
    CategorySettings,
    DatasetSettings,
    ExtendedBaseModel,
    KeypointSettings,
    ModelVariant,
    NieSettings,
    PolicySettings,
    RenderSettings,
    RewardConfig,
    RewardSettings,
    RunSettings,
    Settings,
    SupervisedSettings,
    TaskName,
    TrainSettings,
    WorldSettings,
)
from nie_nav_pipeline.settings.toml_settings import (
    SEED_ENVIRONMENT_VARIABLE,
    load_settings_from_toml,
    resolve_settings,
    write_settings_to_toml,
)
