"""Shared sampling helpers for the test suite."""

import numpy as np

from twoway_qkd import PauliChannelParams


def random_channels(n: int, seed: int, scale: float = 1.0) -> list[PauliChannelParams]:
    """Seeded sample of channels uniform over the (qx, qy, qz, qi) simplex.

    ``scale`` < 1 shrinks the total error weight, keeping samples away from
    the simplex boundary.
    """
    rng = np.random.default_rng(seed)
    draws = rng.dirichlet([1.0, 1.0, 1.0, 1.0], size=n) * scale
    return [PauliChannelParams(q[0], q[1], q[2]) for q in draws]
