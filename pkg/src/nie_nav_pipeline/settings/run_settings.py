from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from pydantic_core.core_schema import ValidationInfo

TaskName = Literal["obsnav", "objplace", "pointnav"]
ModelVariant = Literal["nie", "ppo", "rgbdk", "nie_novis"]


class ExtendedBaseModel(BaseModel):
    """
    Base for every settings section. A nested section given as a (partial) dict is merged into that section's
    defaults, so a settings file only needs to list the values that differ from the defaults. Unknown keys are
    rejected.
    """
    model_config = ConfigDict(extra="forbid")

    @field_validator("*", mode="before")
    @classmethod
    def validate(cls, data, info: ValidationInfo):
        field_info = cls.model_fields[info.field_name]

        if isinstance(data, dict) and isinstance(field_info.default, BaseModel):
            # If it is a dict, we can check and fill the default values
            data = {**field_info.default.model_dump(), **data}

        return data


class RunSettings(ExtendedBaseModel):
    """
    ================
    INPUT PARAMETERS
    ================

    - task: str [obsnav, objplace, pointnav]        Task trained and evaluated by this run.
    - variant: str [nie, ppo, rgbdk, nie_novis]     Model configuration. `ppo` zeroes the interaction representation,
                                                    `rgbdk` keeps the interaction engine but trains it without its own
                                                    loss, `nie_novis` hides the visual features from the engine.
    - seed: int                                     Run seed; overridden by --seed or the NIE_NAV_SEED variable.
    - run_dir: str                                  Directory receiving the config copy, logs and checkpoints.
    - dataset_dir: str                              Directory holding the <task>_<split>.json dataset files.
    - dtype: str [float32, float64]                 Floating point precision of the networks during training.
    """
    task: TaskName = "obsnav"
    variant: ModelVariant = "nie"
    seed: int = 1
    run_dir: str = "runs/default"
    dataset_dir: str = "datasets"
    dtype: Literal["float32", "float64"] = "float32"


class WorldSettings(ExtendedBaseModel):
    """
    ================
    INPUT PARAMETERS
    ================

    - cell_size: float [m > 0]              Pitch of the occupancy grid; also the MoveAhead distance.
    - wall_height: float [m > 0]            Height of walls and of the ceiling closing every room.
    - camera_height: float [m > 0]          Height of the agent camera above the floor.
    - rotation_step: float [deg]            Azimuth change of RotateRight/RotateLeft.
    - look_step: float [deg]                Elevation change of LookUp/LookDown.
    - max_elevation: float [deg]            Elevation is clamped to [-max_elevation, max_elevation].
    - base_displacement: float [m > 0]      Push distance of an object with mass factor 1 and enough clearance.
    - slip_coefficient: float [deg/m]       Yaw gained per meter of lateral offset between agent and pushed object.
                                            0 disables rotational slip.
    - collision_epsilon: float [m >= 0]     Separation below which two footprints count as touching, not overlapping.
    """
    cell_size: float = Field(0.25, gt=0)
    wall_height: float = Field(2.5, gt=0)
    camera_height: float = Field(1.5, gt=0)
    rotation_step: float = 90.0
    look_step: float = 30.0
    max_elevation: float = 30.0
    base_displacement: float = Field(0.5, gt=0)
    slip_coefficient: float = 0.0
    collision_epsilon: float = Field(1e-9, ge=0)


class RenderSettings(ExtendedBaseModel):
    """
    ================
    INPUT PARAMETERS
    ================

    - width, height: int [px > 0]           Resolution of every rendered observation.
    - horizontal_fov: float [deg]           Horizontal field of view of the pinhole camera; f = (W/2) / tan(fov/2).
    """
    width: int = Field(64, gt=0)
    height: int = Field(64, gt=0)
    horizontal_fov: float = Field(90.0, gt=0, lt=180)


class KeypointSettings(ExtendedBaseModel):
    """
    Ground-truth segmentation is used for keypoints. Mask corruption emulates an imperfect detector.

    ================
    INPUT PARAMETERS
    ================

    - corrupt_masks: bool                   Enables the corruption below.
    - dropout_probability: float [0..1]     Probability that an instance is dropped from the segmentation entirely.
    - boundary_radius: int [px]             Positive values dilate each instance mask, negative values erode it.
    """
    corrupt_masks: bool = False
    dropout_probability: float = Field(0.0, ge=0, le=1)
    boundary_radius: int = 0


class CategorySettings(ExtendedBaseModel):
    """
    - name: str                             Category name.
    - size: [w, d, h] [m > 0]               Footprint width (local x), depth (local z) and height of the base variant.
    - mass_factor: float [>= 1]             Divides the push displacement.
    """
    name: str
    size: tuple[float, float, float]
    mass_factor: float = Field(1.0, ge=1.0)


DEFAULT_CATEGORIES = (
    CategorySettings(name="chair", size=(0.50, 0.50, 0.90), mass_factor=1.5),
    CategorySettings(name="side_table", size=(0.50, 0.40, 0.60), mass_factor=1.2),
    CategorySettings(name="dog_bed", size=(0.70, 0.55, 0.25), mass_factor=1.0),
    CategorySettings(name="garbage_can", size=(0.35, 0.35, 0.60), mass_factor=1.0),
    CategorySettings(name="box", size=(0.50, 0.50, 0.50), mass_factor=1.0),
    CategorySettings(name="stool", size=(0.40, 0.40, 0.50), mass_factor=1.0),
    CategorySettings(name="armchair", size=(0.80, 0.75, 0.90), mass_factor=2.5),
    CategorySettings(name="pot", size=(0.40, 0.40, 0.45), mass_factor=1.3),
)


class DatasetSettings(ExtendedBaseModel):
    """
    ================
    INPUT PARAMETERS
    ================

    - train_count, val_count, test_count: int       Episodes per split written by gen-data.
    - categories: list                              Object categories, see CategorySettings.
    - size_variants: list[float]                    Scale factors applied to each category's base size. The last
                                                    variant is reserved for the test split.
    - room_min_size, room_max_size: float [m]       Side length range of generated rooms.
    - max_internal_walls: int                       Upper bound of wall stubs in the `open` template.
    - obsnav_templates: list[str]                   Templates drawn for ObsNav [partition, corridor].
    - max_obstacles: int                            Obstacles placed at most while closing all paths.
    - objplace_min_separation: float [m]            Minimum straight-line object-to-target distance at spawn.
    - objplace_distractors: int                     Extra objects scattered in ObjPlace rooms.
    - pointnav_min_distance: float [m]              Minimum agent-to-target distance of the point-goal task.
    - max_attempts: int                             Generation retries before giving up on a seed.
    """
    train_count: int = Field(500, ge=0)
    val_count: int = Field(100, ge=0)
    test_count: int = Field(100, ge=0)
    categories: list[CategorySettings] = list(DEFAULT_CATEGORIES)
    size_variants: list[float] = [0.85, 0.95, 1.0, 1.1, 1.2]
    room_min_size: float = Field(3.0, gt=0)
    room_max_size: float = Field(6.0, gt=0)
    max_internal_walls: int = Field(3, ge=0)
    obsnav_templates: list[Literal["partition", "corridor"]] = ["partition", "corridor"]
    max_obstacles: int = Field(12, ge=1)
    objplace_min_separation: float = 2.0
    objplace_distractors: int = Field(2, ge=0)
    pointnav_min_distance: float = 1.0
    max_attempts: int = Field(200, ge=1)

    @model_validator(mode="after")
    def check_sizes(self):
        assert self.room_min_size <= self.room_max_size, "room_min_size must not exceed room_max_size"
        assert len(self.size_variants) >= 2, "At least one training and one test size variant are required"  # noqa: PLR2004
        assert len(self.categories) >= 1, "At least one object category is required"
        return self


class RewardConfig(ExtendedBaseModel):
    """
    ================
    INPUT PARAMETERS
    ================

    - success_reward: float                 Granted once when END is invoked inside the success radius.
    - path_change_reward: float             Magnitude of the bonus for opening, and penalty for blocking, the path.
    - step_penalty: float                   Added on every step.
    - success_radius: float [m]             Straight-line distance counted as reaching the target.
    - max_steps: int                        Episode step cap.
    """
    success_reward: float = 10.0
    path_change_reward: float = 0.5
    step_penalty: float = -0.01
    success_radius: float = 0.2
    max_steps: int = Field(500, ge=1)


class RewardSettings(ExtendedBaseModel):
    obsnav: RewardConfig = RewardConfig()
    objplace: RewardConfig = RewardConfig(path_change_reward=0.0, step_penalty=-0.002)

    def for_task(self, task: TaskName) -> RewardConfig:
        # the point-goal task is rewarded like ObsNav; path-change terms never fire there
        return self.objplace if task == "objplace" else self.obsnav


class NieSettings(ExtendedBaseModel):
    """
    ================
    INPUT PARAMETERS
    ================

    - embedding_dim: int                    Width of the keypoint, category and action embeddings.
    - hidden_dim: int                       Width of every hidden MLP layer.
    - output_dim: int                       Width D of each action-conditioned representation row.
    - obs_block: int [px]                   Block size of the average-pooled raw observation encoding.
    - num_keypoints: int                    Keypoints per category; the corner detector yields exactly 8.
    """
    embedding_dim: int = Field(32, gt=0)
    hidden_dim: int = Field(128, gt=0)
    output_dim: int = Field(32, gt=0)
    obs_block: int = Field(8, gt=0)
    num_keypoints: Literal[8] = 8


class PolicySettings(ExtendedBaseModel):
    """
    ================
    INPUT PARAMETERS
    ================

    - conv_channels: list[int]              Output channels of the color and depth CNN stacks.
    - conv_kernels: list[int]               Kernel size per conv layer (padding is kernel // 2).
    - conv_stride: int                      Stride of every conv layer.
    - visual_dim: int                       Width of the fused visual feature v.
    - goal_dim: int                         Width of the goal embedding g (and of the target-category embedding).
    - hidden_size: int                      Width of the recurrent state.
    """
    conv_channels: list[int] = [16, 32, 64]
    conv_kernels: list[int] = [5, 3, 3]
    conv_stride: int = Field(2, gt=0)
    visual_dim: int = Field(128, gt=0)
    goal_dim: int = Field(32, gt=0)
    hidden_size: int = Field(512, gt=0)

    @model_validator(mode="after")
    def check_layers(self):
        assert len(self.conv_channels) == len(self.conv_kernels), "conv_channels and conv_kernels must align"
        return self


class TrainSettings(ExtendedBaseModel):
    """
    ================
    INPUT PARAMETERS
    ================

    - workers: int                          Parallel rollout workers, each owning one environment.
    - horizon: int                          Steps each worker contributes per update.
    - ppo_epochs: int                       Passes over every rollout.
    - minibatches: int                      Minibatches per epoch; workers are split between them.
    - clip_epsilon: float [> 0]             PPO ratio clip.
    - gamma, gae_lambda: float (0, 1]       Discount and GAE trace parameter.
    - alpha: float [>= 0]                   Weight of the interaction-engine loss.
    - learning_rate: float                  Initial Adam rate, decayed linearly to zero.
    - grad_clip: float [> 0]                Global gradient-norm threshold.
    - value_coef, entropy_coef: float       Weights of the value loss and the entropy bonus.
    - total_steps: int                      Environment steps of the whole run.
    - eval_period: int                      Environment steps between evaluations and checkpoints.
    - eval_episodes: int                    Validation episodes per evaluation (0 uses the full split).
    - dump_dir: str                         Where a diverging minibatch is written.
    """
    workers: int = Field(8, ge=1)
    horizon: int = Field(30, ge=1)
    ppo_epochs: int = Field(4, ge=1)
    minibatches: int = Field(2, ge=1)
    clip_epsilon: float = Field(0.2, gt=0)
    gamma: float = Field(0.99, gt=0, le=1)
    gae_lambda: float = Field(0.95, gt=0, le=1)
    alpha: float = Field(3.0, ge=0)
    learning_rate: float = Field(3e-4, gt=0)
    grad_clip: float = Field(0.5, gt=0)
    value_coef: float = 0.5
    entropy_coef: float = 0.01
    total_steps: int = Field(2_000_000, ge=1)
    eval_period: int = Field(200_000, ge=1)
    eval_episodes: int = Field(0, ge=0)
    dump_dir: str = "diverged"

    @model_validator(mode="after")
    def check_minibatches(self):
        assert self.minibatches <= self.workers, "Cannot split fewer workers than minibatches"
        return self


class SupervisedSettings(ExtendedBaseModel):
    """
    ================
    INPUT PARAMETERS
    ================

    - transitions: int                      Random-policy transitions collected for supervised engine training.
    - episode_length: int                   Steps per collection episode before the next episode starts.
    - heldout_fraction: float (0, 1)        Share of transitions kept aside for evaluation.
    - batch_size: int                       Transitions per optimizer step.
    - epochs: int                           Passes over the training transitions.
    - learning_rate: float                  Initial Adam rate, decayed linearly to zero.
    - workers: int                          Parallel collection workers.
    """
    transitions: int = Field(50_000, ge=2)
    episode_length: int = Field(50, ge=1)
    heldout_fraction: float = Field(0.1, gt=0, lt=1)
    batch_size: int = Field(64, ge=1)
    epochs: int = Field(5, ge=1)
    learning_rate: float = Field(1e-3, gt=0)
    workers: int = Field(8, ge=1)


class Settings(ExtendedBaseModel):
    run: RunSettings = RunSettings()
    world: WorldSettings = WorldSettings()
    render: RenderSettings = RenderSettings()
    keypoints: KeypointSettings = KeypointSettings()
    dataset: DatasetSettings = DatasetSettings()
    reward: RewardSettings = RewardSettings()
    nie: NieSettings = NieSettings()
    policy: PolicySettings = PolicySettings()
    train: TrainSettings = TrainSettings()
    supervised: SupervisedSettings = SupervisedSettings()

    @model_validator(mode="after")
    def check_variant(self):
        if self.run.variant in ("ppo", "rgbdk"):
            assert self.train.alpha == 0, f"Variant '{self.run.variant}' trains without the engine loss; set alpha = 0"
        return self
