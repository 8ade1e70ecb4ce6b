from nie_nav_pipeline.keypoints.corners import NUM_CORNERS, EmptyMaskError, detect_corners
from nie_nav_pipeline.keypoints.corruption import corrupt_masks
from nie_nav_pipeline.keypoints.debug_images import (
    depth_image,
    draw_keypoints,
    segmentation_image,
    write_observation_images,
    write_ppm,
)
from nie_nav_pipeline.keypoints.lift import KeypointSet, lift_keypoints
