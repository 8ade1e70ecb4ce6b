import numpy as np

NUM_CORNERS = 8


class EmptyMaskError(ValueError):
    """Raised when corners are requested from a mask without member pixels."""


def detect_corners(mask: np.ndarray) -> np.ndarray:
    """
    Eight extremal member pixels of a binary mask, as (u, v) rows:
    argmax u, argmax v, argmin u, argmin v, argmax u+v, argmin u+v, argmax u-v, argmin u-v.

    Ties resolve to the smallest v, then the smallest u: np.nonzero enumerates in row-major order and argmax/argmin
    return the first extremum.
    """
    v, u = np.nonzero(np.asarray(mask, dtype=bool))
    if u.size == 0:
        raise EmptyMaskError("Mask has no member pixels")

    total, difference = u + v, u - v
    picks = (
        np.argmax(u), np.argmax(v), np.argmin(u), np.argmin(v),
        np.argmax(total), np.argmin(total), np.argmax(difference), np.argmin(difference),
    )
    index = np.array(picks)
    return np.stack([u[index], v[index]], axis=1)
