from nie_nav_pipeline.tasks.dataset import (
    DATASET_FORMAT_VERSION,
    DatasetDocument,
    EpisodeDocument,
    dataset_path,
    episode_from_document,
    episode_to_document,
    generate_dataset,
    read_dataset,
    write_dataset,
)
from nie_nav_pipeline.tasks.env import InteractiveNavEnv
from nie_nav_pipeline.tasks.episodes import (
    SPLITS,
    Episode,
    Split,
    episode_seed,
    gen_objplace,
    gen_obsnav,
    gen_pointnav,
    generate_episode,
    random_object,
    size_variants,
)
from nie_nav_pipeline.tasks.rewards import (
    REPORT_COLUMNS,
    DegenerateEpisodeError,
    EpisodeResult,
    Metrics,
    compute_metrics,
    compute_reward,
    final_distance,
    is_success,
    shaped_reward,
    shaping_distance,
    write_metrics_report,
)
from nie_nav_pipeline.tasks.templates import (
    EpisodeGenerationError,
    RoomTemplate,
    build_template,
    corridor_room,
    open_room,
    partition_room,
)
