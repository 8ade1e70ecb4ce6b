import numpy as np
import pytest

from nie_nav_pipeline.geometry import (
    CameraModel,
    EmptyKeypointSetError,
    InvalidDepthError,
    ObjectPose,
    apply_affine,
    backproject,
    camera_from_agent,
    camera_to_world,
    extrinsic_matrix,
    ground_truth_affine,
    intrinsics,
    is_affine4,
    keypoint_center,
    object_motion,
    project,
    world_to_camera,
)
from nie_nav_pipeline.settings import RenderSettings
from nie_nav_pipeline.tensor_core import Tensor, evaluate_graph, ops
from nie_nav_pipeline.worldsim import AgentState, ObjectInstance, object_corners


def make_camera(position=(0.0, 1.5, 0.0), azimuth=0.0, elevation=0.0, size=64) -> CameraModel:
    focal, cx, cy = intrinsics(size, size, 90.0)
    return CameraModel(focal=focal, cx=cx, cy=cy, width=size, height=size, position=np.asarray(position),
                       azimuth=azimuth, elevation=elevation)


def test_intrinsics_of_a_90_degree_camera():
    focal, cx, cy = intrinsics(64, 48, 90.0)
    assert focal == pytest.approx(32.0)
    assert (cx, cy) == (31.5, 23.5)


def test_backproject_then_project_is_the_identity_on_every_pixel():
    cam = make_camera()
    v, u = np.mgrid[0:64, 0:64].astype(np.float64)
    depth = np.random.default_rng(0).uniform(0.1, 10.0, size=u.shape)
    points = backproject(u, v, depth, cam)
    assert points.shape == (64, 64, 3)
    np.testing.assert_allclose(points[..., 2], depth)
    np.testing.assert_allclose(project(points, cam), np.stack([u, v, depth], axis=-1), atol=1e-9)


def test_backproject_of_the_principal_point_lies_on_the_optical_axis():
    cam = make_camera()
    np.testing.assert_allclose(backproject(cam.cx, cam.cy, 2.0, cam), [0.0, 0.0, 2.0])


def test_image_axes():
    cam = make_camera()
    right_and_up = backproject(63, 0, 1.0, cam)
    assert right_and_up[0] > 0
    assert right_and_up[1] > 0


@pytest.mark.parametrize("depth", [0.0, -1.0])
def test_backproject_rejects_non_positive_depth(depth):
    with pytest.raises(InvalidDepthError):
        backproject(10, 10, depth, make_camera())


def test_backproject_rejects_pixels_outside_the_image():
    with pytest.raises(ValueError):
        backproject(64.5, 10, 1.0, make_camera())


def test_project_rejects_points_behind_the_camera():
    with pytest.raises(InvalidDepthError):
        project(np.array([0.0, 0.0, -1.0]), make_camera())


@pytest.mark.parametrize("azimuth, forward", [(0.0, (0, 0, 1)), (90.0, (1, 0, 0)), (180.0, (0, 0, -1)),
                                              (270.0, (-1, 0, 0))])
def test_azimuth_turns_the_view_towards_plus_x(azimuth, forward):
    cam = make_camera(azimuth=azimuth)
    np.testing.assert_allclose(cam.rotation @ [0.0, 0.0, 1.0], forward, atol=1e-12)


def test_positive_elevation_looks_up():
    cam = make_camera(elevation=30.0)
    np.testing.assert_allclose(cam.rotation @ [0.0, 0.0, 1.0], [0.0, 0.5, np.sqrt(3) / 2], atol=1e-12)


def test_world_camera_round_trip():
    cam = make_camera(position=(1.0, 1.5, 2.0), azimuth=90.0, elevation=-30.0)
    points = np.random.default_rng(1).normal(size=(10, 3))
    np.testing.assert_allclose(camera_to_world(world_to_camera(points, cam), cam), points, atol=1e-12)
    np.testing.assert_allclose(apply_affine(points, extrinsic_matrix(cam)), world_to_camera(points, cam), atol=1e-12)


def test_agent_pose_places_the_camera():
    agent = AgentState((1.0, 2.0), azimuth=270.0, elevation=-30.0, camera_height=1.2)
    cam = camera_from_agent(agent, RenderSettings(width=16, height=16))
    np.testing.assert_array_equal(cam.position, [1.0, 1.2, 2.0])
    assert (cam.azimuth, cam.elevation, cam.width) == (270.0, -30.0, 16)
    assert cam.focal == pytest.approx(8.0)


def test_unchanged_transition_gives_the_identity():
    pose = ObjectPose((1.0, 0.0, 1.0), 30.0)
    cam = make_camera(azimuth=90.0)
    m = ground_truth_affine(pose, pose, cam, make_camera(azimuth=90.0))
    np.testing.assert_array_equal(m, np.eye(4))


def test_object_motion_moves_the_pose_origin():
    before, after = ObjectPose((1.0, 0.0, 1.0), 10.0), ObjectPose((1.5, 0.0, 0.5), 100.0)
    moved = apply_affine(np.array([before.position]), object_motion(before, after))
    np.testing.assert_allclose(moved[0], after.position, atol=1e-12)


def test_transition_matrix_carries_box_corners_to_their_next_view():
    """Corners of a box seen at t, carried by m, land on the corners seen at t+1 for random transitions."""
    rng = np.random.default_rng(2)
    for _ in range(1000):
        size = tuple(rng.uniform(0.2, 1.0, size=3))
        obj_t = ObjectInstance(id=0, category=0, size=size,
                               pose=ObjectPose((rng.uniform(0, 5), 0.0, rng.uniform(0, 5)), rng.uniform(0, 360)))
        obj_t1 = obj_t.moved(*rng.uniform(-0.5, 0.5, size=2), dyaw=rng.choice([0.0, rng.uniform(-30, 30)]))
        cam_t = make_camera(position=(rng.uniform(0, 5), 1.5, rng.uniform(0, 5)),
                            azimuth=90.0 * rng.integers(4), elevation=rng.choice([-30.0, 0.0, 30.0]))
        if rng.random() < 0.5:
            cam_t1 = cam_t
        else:
            cam_t1 = make_camera(position=cam_t.position + [rng.choice([-0.25, 0.0, 0.25]), 0.0, 0.0],
                                 azimuth=(cam_t.azimuth + 90.0 * rng.integers(-1, 2)) % 360.0,
                                 elevation=rng.choice([-30.0, 0.0, 30.0]))

        m = ground_truth_affine(obj_t.pose, obj_t1.pose, cam_t, cam_t1)
        assert is_affine4(m)
        seen_t = world_to_camera(object_corners(obj_t), cam_t)
        seen_t1 = world_to_camera(object_corners(obj_t1), cam_t1)
        np.testing.assert_allclose(apply_affine(seen_t, m), seen_t1, atol=1e-6)


def test_batches_of_transforms_broadcast_over_point_sets():
    points = np.random.default_rng(3).normal(size=(2, 5, 3))
    transforms = np.stack([np.eye(4), np.diag([2.0, 2.0, 2.0, 1.0])])
    out = apply_affine(points, transforms)
    np.testing.assert_allclose(out[0], points[0])
    np.testing.assert_allclose(out[1], 2 * points[1])


def test_only_a_0001_bottom_row_is_affine():
    assert is_affine4(np.eye(4))
    assert is_affine4(np.broadcast_to(np.eye(4), (2, 3, 4, 4)))
    bad = np.eye(4)
    bad[3, 0] = 1.0
    assert not is_affine4(bad)
    assert not is_affine4(np.stack([np.eye(4), bad]))
    assert not is_affine4(np.eye(3))
    assert not is_affine4(np.ones(4))


def test_projective_matrices_are_rejected():
    bad = np.eye(4)
    bad[3, 2] = 0.5
    with pytest.raises(AssertionError):
        apply_affine(np.zeros((2, 3)), bad)
    with pytest.raises(AssertionError):
        apply_affine(np.zeros((2, 3)), np.eye(4)[:3])


def test_centre_of_one_set_and_of_a_batch():
    np.testing.assert_allclose(keypoint_center(np.array([[0.0, 0.0, 0.0], [2.0, 4.0, 6.0]])), [1.0, 2.0, 3.0])
    points = np.random.default_rng(4).normal(size=(2, 3, 8, 3))
    centers = keypoint_center(points)
    assert centers.shape == (2, 3, 3)
    np.testing.assert_allclose(centers[1, 2], points[1, 2].mean(axis=0))
    with pytest.raises(EmptyKeypointSetError):
        keypoint_center(np.zeros((0, 3)))
    with pytest.raises(EmptyKeypointSetError):
        keypoint_center(Tensor(np.zeros((2, 0, 3))))


def test_centre_of_a_tensor_stays_differentiable():
    points = np.random.default_rng(5).normal(size=(2, 8, 3))
    result = evaluate_graph(lambda t, _: ops.sum(ops.square(keypoint_center(t["points"]))), {"points": points})
    np.testing.assert_allclose(result.outputs["output"].data, np.sum(points.mean(axis=1) ** 2))
    grad = result.backward().inputs["points"]
    np.testing.assert_allclose(grad, np.broadcast_to(2 * points.mean(axis=1, keepdims=True) / 8, points.shape))
