"""
Gymnasium environment over a list of episodes.
"""
import logging
from collections.abc import Sequence

import gymnasium as gym
import numpy as np
from gymnasium import spaces

from nie_nav_pipeline.keypoints import NUM_CORNERS, KeypointSet, corrupt_masks, lift_keypoints
from nie_nav_pipeline.settings import Settings
from nie_nav_pipeline.tasks.episodes import Episode
from nie_nav_pipeline.tasks.rewards import EpisodeResult, compute_reward, final_distance, is_success
from nie_nav_pipeline.worldsim import NUM_ACTIONS, Action, Observation, WorldState, render, step, visible_instances

logger = logging.getLogger(__name__)


class InteractiveNavEnv(gym.Env):
    """
    Plays the given episodes in order (or the one chosen with `reset(options={"episode": i})`).

    Observations hold the rendered colour and depth, the target offset (right, forward) in the agent frame, the
    target category (-1 without target object) and the lifted keypoints of the (optionally corrupted)
    segmentation. `step` reports the simulator event, the pre- and post-step states and, once the episode is over,
    its `EpisodeResult` in `info`.
    """

    metadata = {"render_modes": ["rgb_array"]}

    def __init__(self, episodes: Sequence[Episode], settings: Settings, render_mode: str | None = None):
        super().__init__()
        assert len(episodes) > 0, "The environment needs at least one episode"
        self.episodes = list(episodes)
        self.settings = settings
        self.render_mode = render_mode
        self.num_categories = len(settings.dataset.categories)
        h, w, c = settings.render.height, settings.render.width, self.num_categories

        self.action_space = spaces.Discrete(NUM_ACTIONS)
        self.observation_space = spaces.Dict({
            "color": spaces.Box(0.0, 1.0, (h, w, 3), dtype=np.float64),
            "depth": spaces.Box(0.0, np.inf, (h, w), dtype=np.float64),
            "goal": spaces.Box(-np.inf, np.inf, (2,), dtype=np.float64),
            "target_category": spaces.Discrete(c + 1, start=-1),
            "keypoints": spaces.Box(-np.inf, np.inf, (c, NUM_CORNERS, 3), dtype=np.float64),
            "presence": spaces.MultiBinary(c),
        })

        self._next_index = 0
        self.episode: Episode | None = None
        self.state: WorldState | None = None
        self.observation: Observation | None = None
        self.keypoints: KeypointSet | None = None
        self.path_length = 0.0

    @property
    def reward_config(self):
        return self.settings.reward.for_task(self.episode.task)

    def _observe(self) -> dict:
        self.observation = render(self.state, self.settings.render)
        instance, category = corrupt_masks(self.observation.instance, self.observation.category,
                                           self.settings.keypoints, self.np_random)
        self.keypoints = lift_keypoints(self.observation, self.num_categories, instance, category)
        return {
            "color": self.observation.color,
            "depth": self.observation.depth,
            "goal": self.state.agent.to_agent_frame(self.state.target),
            "target_category": self.episode.target_category,
            "keypoints": self.keypoints.points,
            "presence": self.keypoints.presence.astype(np.int8),
        }

    def reset(self, *, seed: int | None = None, options: dict | None = None):
        super().reset(seed=seed)
        index = (options or {}).get("episode", self._next_index)
        self.episode = self.episodes[index % len(self.episodes)]
        self._next_index = index + 1
        self.state = self.episode.scene
        self.path_length = 0.0
        return self._observe(), {"episode_index": index % len(self.episodes)}

    def step(self, action):
        action = Action.parse(action)
        episode = self.episode
        previous = self.state
        keypoints = self.keypoints
        self.state, event = step(previous, action, self.settings.world, self.settings.render,
                                 visible_ids=visible_instances(self.observation))

        if episode.task == "objplace":
            if event.pushed_id == episode.target_object_id:
                self.path_length += event.object_travel
        else:
            self.path_length += event.agent_travel

        cfg = self.reward_config
        reward = compute_reward(previous, action, self.state, event, cfg, episode.task, episode.target_object_id)
        terminated = action == Action.END
        truncated = not terminated and self.state.step_count >= cfg.max_steps
        observation = self._observe()
        info = {"event": event, "previous_state": previous, "state": self.state, "previous_keypoints": keypoints}
        if terminated or truncated:
            info["result"] = EpisodeResult(
                success=is_success(self.state, terminated, episode.task, episode.target_object_id,
                                   cfg.success_radius),
                final_distance=final_distance(self.state, episode.task, episode.target_object_id),
                path_length=self.path_length,
                shortest_path=episode.shortest_path,
                steps=self.state.step_count,
            )
            logger.debug(f"Episode {episode.seed} ended after {self.state.step_count} steps: {info['result']}")
        return observation, reward, terminated, truncated, info

    def render(self):
        return None if self.observation is None else self.observation.color
