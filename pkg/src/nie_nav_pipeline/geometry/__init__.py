from nie_nav_pipeline.geometry.affine import (
    EmptyKeypointSetError,
    ObjectPose,
    apply_affine,
    ground_truth_affine,
    is_affine4,
    keypoint_center,
    object_motion,
    object_world_matrix,
    translation_matrix,
    yaw_matrix,
)
from nie_nav_pipeline.geometry.camera import (
    CameraModel,
    InvalidDepthError,
    backproject,
    camera_from_agent,
    camera_to_world,
    camera_to_world_matrix,
    extrinsic_matrix,
    intrinsics,
    pixel_rays,
    project,
    world_to_camera,
)
