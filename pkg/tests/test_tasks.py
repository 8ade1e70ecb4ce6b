import math
from dataclasses import replace

import numpy as np
import pytest

from nie_nav_pipeline.settings import RewardSettings
from nie_nav_pipeline.tasks import (
    DegenerateEpisodeError,
    EpisodeResult,
    InteractiveNavEnv,
    compute_metrics,
    compute_reward,
    dataset_path,
    episode_seed,
    gen_objplace,
    gen_obsnav,
    gen_pointnav,
    generate_dataset,
    is_success,
    read_dataset,
    shaped_reward,
    shaping_distance,
    size_variants,
    write_dataset,
    write_metrics_report,
)
from nie_nav_pipeline.worldsim import Action, AgentState, WorldState, empty_room, geodesic_distance, path_exists, step

OBSNAV = RewardSettings().obsnav
OBJPLACE = RewardSettings().objplace


def test_each_reward_term_is_added_once():
    assert shaped_reward(2.0, 1.75, True, True, False, OBSNAV, "obsnav") == pytest.approx(10.0 + 0.5 + 0.25 - 0.01)
    assert shaped_reward(1.0, 1.0, False, False, True, OBSNAV, "obsnav") == pytest.approx(-0.5 - 0.01)
    assert shaped_reward(1.0, 0.5, False, True, False, OBSNAV, "objplace") == pytest.approx(0.5 - 0.01)
    assert shaped_reward(1.0, 0.5, False, False, False, OBJPLACE, "objplace") == pytest.approx(0.5 - 0.002)
    assert shaped_reward(1.0, 1.25, False, True, False, OBSNAV, "pointnav") == pytest.approx(-0.25 - 0.01)


def test_reward_of_a_step_towards_the_target(room):
    moved, event = step(room, Action.MOVE_AHEAD)
    assert compute_reward(room, Action.MOVE_AHEAD, moved, event, OBSNAV, "obsnav") == pytest.approx(0.25 - 0.01)


def test_reward_of_ending_on_the_target(room):
    arrived = replace(room, agent=AgentState(room.target))
    ended, event = step(arrived, Action.END)
    assert compute_reward(arrived, Action.END, ended, event, OBSNAV, "obsnav") == pytest.approx(10.0 - 0.01)
    assert is_success(ended, True, "obsnav")
    assert not is_success(ended, False, "obsnav")
    assert not is_success(room, True, "obsnav")


def test_success_radius(room):
    near = replace(room, agent=AgentState((2.375, 2.125)))
    assert not is_success(near, True, "obsnav", radius=0.2)
    assert is_success(near, True, "obsnav", radius=0.25)


def test_blocked_agent_is_measured_through_the_objects(make_box):
    walls = empty_room(12, 12)
    walls[:, 6] = True
    walls[5, 6] = False
    state = WorldState(walls=walls, objects=(make_box(0, (1.375, 1.625), size=(0.2, 0.2, 0.5)),),
                       agent=AgentState((1.375, 1.375)), target=(1.375, 2.375))
    assert not path_exists(state)
    assert shaping_distance(state, "obsnav") == pytest.approx(1.0)


def test_placement_distance_follows_the_object(box_room):
    assert shaping_distance(box_room, "objplace", target_object_id=0) == pytest.approx(10 * 0.25)
    assert shaping_distance(box_room, "obsnav") == pytest.approx(13 * 0.25)


def test_spl_of_a_single_successful_episode():
    metrics = compute_metrics([EpisodeResult(success=True, final_distance=0.1, path_length=4.0, shortest_path=2.0,
                                             steps=16)])
    assert metrics.spl == pytest.approx(0.5)
    assert metrics.sr == 100.0
    assert metrics.fdt == pytest.approx(0.1)


def test_metrics_over_several_episodes():
    results = [
        EpisodeResult(success=True, final_distance=0.1, path_length=4.0, shortest_path=2.0, steps=16),
        EpisodeResult(success=False, final_distance=1.5, path_length=1.0, shortest_path=1.0, steps=500),
        EpisodeResult(success=True, final_distance=0.0, path_length=1.0, shortest_path=2.0, steps=4),
    ]
    metrics = compute_metrics(results)
    assert metrics.sr == pytest.approx(200.0 / 3)
    assert metrics.fdt == pytest.approx(1.6 / 3)
    assert metrics.spl == pytest.approx((0.5 + 0.0 + 1.0) / 3)
    assert metrics.episodes == 3


def test_no_episodes_or_a_zero_length_path_cannot_be_scored():
    with pytest.raises(ValueError):
        compute_metrics([])
    with pytest.raises(DegenerateEpisodeError):
        compute_metrics([EpisodeResult(success=True, final_distance=0.0, path_length=0.0, shortest_path=0.0,
                                       steps=1)])


def test_report_keeps_only_the_known_columns(tmp_path):
    filepath = tmp_path / "reports" / "comparison.csv"
    write_metrics_report(filepath, [{"task": "obsnav", "variant": "nie", "SR": 50.0, "FDT": 0.4, "SPL": 0.3,
                                     "seeds": "1 2 3", "steps": 1000, "extra": "ignored"}])
    lines = filepath.read_text().splitlines()
    assert lines == ["task,variant,SR,FDT,SPL,seeds,steps", "obsnav,nie,50.0,0.4,0.3,1 2 3,1000"]


def test_episode_seeds_are_distinct_per_split():
    seeds = {episode_seed(3, split, i) for split in ("train", "val", "test") for i in range(5)}
    assert len(seeds) == 15
    assert episode_seed(3, "val", 2) == episode_seed(3, "val", 2)


def test_obsnav_episodes_are_blocked_but_solvable(small_settings):
    for index in range(3):
        episode = gen_obsnav(episode_seed(1, "train", index), small_settings)
        scene = episode.scene
        assert episode.task == "obsnav"
        assert episode.template in ("partition", "corridor")
        assert scene.objects
        assert not path_exists(scene)
        removable = geodesic_distance(scene, scene.agent.position, scene.target,
                                      ignore_ids=[o.id for o in scene.objects])
        assert episode.shortest_path == pytest.approx(removable)
        assert episode.shortest_path > 0


def test_objplace_episodes_separate_object_and_target(small_settings):
    for index in range(3):
        episode = gen_objplace(episode_seed(1, "train", index), small_settings)
        obj = episode.scene.object_by_id(episode.target_object_id)
        assert math.dist(obj.floor_position, episode.target) >= small_settings.dataset.objplace_min_separation
        assert episode.target_category == obj.category
        assert math.isfinite(episode.shortest_path) and episode.shortest_path > 0


def test_pointnav_episodes_are_empty_rooms(small_settings):
    episode = gen_pointnav(episode_seed(1, "train", 0), small_settings)
    assert episode.scene.objects == ()
    assert math.dist(episode.scene.agent.position, episode.target) >= small_settings.dataset.pointnav_min_distance
    assert episode.shortest_path == pytest.approx(geodesic_distance(episode.scene, episode.scene.agent.position,
                                                                    episode.target))


def test_generation_is_deterministic(small_settings):
    assert gen_obsnav(11, small_settings) == gen_obsnav(11, small_settings)
    assert gen_objplace(11, small_settings) == gen_objplace(11, small_settings)


def test_test_split_uses_the_held_out_size_variant(small_settings):
    assert size_variants(small_settings, "test") == [1.2]
    assert 1.2 not in size_variants(small_settings, "train")
    episode = gen_objplace(episode_seed(1, "test", 0), small_settings, split="test")
    categories = small_settings.dataset.categories
    for obj in episode.scene.objects:
        np.testing.assert_allclose(obj.size, [1.2 * s for s in categories[obj.category].size])


def test_dataset_files_are_reproducible(tmp_path, small_settings):
    episodes = generate_dataset("obsnav", "val", 2, 5, small_settings)
    first, second = tmp_path / "a" / "obsnav_val.json", tmp_path / "b" / "obsnav_val.json"
    write_dataset(first, episodes, "obsnav", "val", 5)
    write_dataset(second, generate_dataset("obsnav", "val", 2, 5, small_settings), "obsnav", "val", 5)
    assert first.read_bytes() == second.read_bytes()
    assert read_dataset(first) == episodes


def test_reading_an_absent_dataset_file_fails(tmp_path):
    assert dataset_path(tmp_path, "objplace", "test") == tmp_path / "objplace_test.json"
    with pytest.raises(FileNotFoundError):
        read_dataset(dataset_path(tmp_path, "objplace", "test"))


@pytest.fixture
def env(small_settings):
    episodes = [gen_obsnav(episode_seed(2, "train", i), small_settings) for i in range(2)]
    return InteractiveNavEnv(episodes, small_settings)


def test_reset_observation_fits_the_space(env):
    observation, info = env.reset(seed=0)
    assert info["episode_index"] == 0
    assert set(observation) == {"color", "depth", "goal", "target_category", "keypoints", "presence"}
    assert observation["color"].shape == (16, 16, 3)
    assert observation["presence"].dtype == np.int8
    assert observation["keypoints"].shape == (env.num_categories, 8, 3)
    assert observation["target_category"] == -1
    np.testing.assert_allclose(observation["goal"], env.state.agent.to_agent_frame(env.state.target))
    assert env.observation_space.contains(observation)


def test_env_step_reports_the_transition(env):
    env.reset(seed=0)
    start = env.state
    _, reward, terminated, truncated, info = env.step(Action.ROTATE_RIGHT)
    assert not terminated and not truncated
    assert info["previous_state"] == start
    assert info["state"].agent.azimuth == (start.agent.azimuth + 90.0) % 360.0
    assert info["previous_keypoints"] is not None
    assert "result" not in info
    assert reward == pytest.approx(-0.01)


def test_env_truncates_at_the_step_cap(env):
    env.reset(seed=0)
    for _ in range(11):
        _, _, terminated, truncated, _ = env.step(Action.ROTATE_LEFT)
        assert not terminated and not truncated
    _, _, terminated, truncated, info = env.step(Action.ROTATE_LEFT)
    assert truncated and not terminated
    assert not info["result"].success
    assert info["result"].steps == 12
    assert info["result"].path_length == 0.0


def test_env_end_terminates_and_moves_to_the_next_episode(env):
    env.reset(seed=0)
    _, _, terminated, _, info = env.step(Action.END)
    assert terminated
    assert info["result"].shortest_path == env.episodes[0].shortest_path
    _, info = env.reset()
    assert info["episode_index"] == 1
    _, info = env.reset(options={"episode": 0})
    assert info["episode_index"] == 0


OBSNAV_TRACE = [
    # d_next, success, opened, blocked, reward
    (2.25, False, False, False, 0.24),
    (2.25, False, False, False, -0.01),
    (2.25, False, True, False, 0.49),
    (2.0, False, False, False, 0.24),
    (2.0, False, False, True, -0.51),
    (2.0, False, True, False, 0.49),
    (1.75, False, False, False, 0.24),
    (2.0, False, False, False, -0.26),
    (1.75, False, False, False, 0.24),
    (1.75, True, False, False, 9.99),
]

# path changes earn nothing when placing objects
OBJPLACE_TRACE = [
    (1.5, False, False, False, -0.002),
    (1.5, False, False, True, -0.002),
    (1.0, False, True, False, 0.498),
    (1.0, False, False, False, -0.002),
    (1.25, False, False, False, -0.252),
    (0.75, False, False, False, 0.498),
    (0.75, False, False, False, -0.002),
    (0.25, False, True, False, 0.498),
    (0.25, False, False, False, -0.002),
    (0.25, True, False, False, 9.998),
]


@pytest.mark.parametrize("task, cfg, start, trace, total", [
    ("obsnav", OBSNAV, 2.5, OBSNAV_TRACE, 11.15),
    ("objplace", OBJPLACE, 1.5, OBJPLACE_TRACE, 11.23),
])
def test_ten_step_reward_trace_by_hand(task, cfg, start, trace, total):
    d_prev = start
    rewards = []
    for d_next, success, opened, blocked, expected in trace:
        rewards.append(shaped_reward(d_prev, d_next, success, opened, blocked, cfg, task))
        assert rewards[-1] == pytest.approx(expected)
        d_prev = d_next
    assert sum(rewards) == pytest.approx(total)


def test_ten_simulated_steps_in_an_empty_room(room):
    actions = [Action.MOVE_AHEAD, Action.MOVE_AHEAD, Action.ROTATE_RIGHT, Action.MOVE_AHEAD, Action.LOOK_DOWN,
               Action.PUSH, Action.ROTATE_RIGHT, Action.MOVE_AHEAD, Action.ROTATE_LEFT, Action.MOVE_AHEAD]
    expected = [0.24, 0.24, -0.01, 0.24, -0.01, -0.01, -0.01, -0.26, -0.01, 0.24]
    state = room
    for action, reward in zip(actions, expected):
        successor, event = step(state, action, visible_ids=())
        assert compute_reward(state, action, successor, event, OBSNAV, "obsnav") == pytest.approx(reward)
        state = successor
    assert state.agent.position == (1.375, 0.875)
    assert shaping_distance(state, "obsnav") == pytest.approx(2.5)


@pytest.mark.parametrize("task, generate", [("obsnav", gen_obsnav), ("objplace", gen_objplace)])
def test_distance_terms_telescope_over_an_episode(task, generate, small_settings):
    """Without the success, path-change and step terms the rewards add up to the drop in shaping distance."""
    cfg = RewardSettings().for_task(task)
    episode = generate(episode_seed(11, "train", 0), small_settings)
    target_id = episode.target_object_id
    state = episode.scene
    start = shaping_distance(state, task, target_id)
    rng = np.random.default_rng(5)
    remainder = 0.0
    for action in rng.integers(0, int(Action.END), size=60):
        successor, event = step(state, action, small_settings.world, render_settings=small_settings.render)
        reward = compute_reward(state, action, successor, event, cfg, task, target_id)
        path_change = cfg.path_change_reward * (int(event.path_opened) - int(event.path_blocked))
        remainder += reward - cfg.step_penalty - (path_change if task == "obsnav" else 0.0)
        state = successor
    assert remainder == pytest.approx(start - shaping_distance(state, task, target_id), abs=1e-9)
