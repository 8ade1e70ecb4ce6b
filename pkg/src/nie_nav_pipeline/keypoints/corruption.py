import numpy as np
from scipy import ndimage

from nie_nav_pipeline.settings import KeypointSettings
from nie_nav_pipeline.worldsim import FLOOR_ID


def corrupt_masks(instance: np.ndarray, category: np.ndarray, settings: KeypointSettings,
                  rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """
    Emulates an imperfect instance detector: drops whole instances and erodes or dilates the remaining masks.
    Dropped and eroded pixels become floor; dilation only claims non-object pixels.
    """
    if not settings.corrupt_masks:
        return instance, category

    instance = instance.copy()
    category = category.copy()
    for object_id in np.unique(instance[instance >= 0]):
        mask = instance == object_id
        object_category = category[mask][0]
        if rng.random() < settings.dropout_probability:
            instance[mask] = FLOOR_ID
            category[mask] = FLOOR_ID
            continue
        radius = settings.boundary_radius
        if radius < 0:
            removed = mask & ~ndimage.binary_erosion(mask, iterations=-radius)
            instance[removed] = FLOOR_ID
            category[removed] = FLOOR_ID
        elif radius > 0:
            grown = ndimage.binary_dilation(mask, iterations=radius) & (instance < 0)
            instance[grown] = object_id
            category[grown] = object_category
    return instance, category
