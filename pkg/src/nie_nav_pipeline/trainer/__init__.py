from nie_nav_pipeline.trainer.evaluation import (
    REPLAY_COLUMNS,
    Evaluation,
    TrajectoryDocument,
    evaluate_policy,
    evaluation_seed,
    read_trajectory,
    replay_trajectory,
    run_episode,
    write_trajectory,
)
from nie_nav_pipeline.trainer.gae import compute_gae, normalize_advantages
from nie_nav_pipeline.trainer.loop import (
    EVAL_LOG_COLUMNS,
    TRAIN_LOG_COLUMNS,
    TrainResult,
    load_split,
    optimizer_steps,
    train_loop,
    trained_steps,
    update_count,
)
from nie_nav_pipeline.trainer.ppo import DivergenceError, LossReport, clipped_surrogate, minibatch_losses, ppo_update
from nie_nav_pipeline.trainer.rollout import RolloutBuffer, RolloutWorker, Segment, stack_observations
