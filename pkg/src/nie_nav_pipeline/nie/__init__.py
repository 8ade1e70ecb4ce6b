from nie_nav_pipeline.nie.network import IDENTITY_3X4, NieNetwork, NieOutput, NieTarget, nie_forward, nie_loss
from nie_nav_pipeline.nie.supervised import (
    SupervisedNie,
    SupervisedReport,
    TransitionSet,
    collect_transitions,
    evaluate_keypoint_l1,
    train_nie_supervised,
)
from nie_nav_pipeline.nie.targets import identity_baseline_loss, nie_targets
