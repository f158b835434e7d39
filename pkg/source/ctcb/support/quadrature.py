"""Rectangle-rule integration on a fixed step grid.

Every deterministic time integral in the model goes through these helpers so that
closed forms and the Monte Carlo step laws integrate on identical nodes.
"""

from typing import Callable

import numpy as np

from ..constants import INTEGRATION_STEP


def midpoint_grid(a: float, b: float, step: float = INTEGRATION_STEP) -> tuple[np.ndarray, np.ndarray]:
    """Midpoint nodes and weights covering [a, b].

    The interval is split into ceil((b-a)/step) equal cells, so integer-year
    intervals land exactly on the step grid.

    Args:
        a: Lower bound.
        b: Upper bound.
        step: Target cell width.

    Returns:
        (nodes, weights); both empty when b <= a.
    """
    if b <= a:
        return np.empty(0), np.empty(0)
    n = max(1, int(np.ceil((b - a) / step - 1e-9)))
    h = (b - a) / n
    return a + h * (np.arange(n) + 0.5), np.full(n, h)


def integrate(fn: Callable[[np.ndarray], np.ndarray], a: float, b: float, step: float = INTEGRATION_STEP) -> np.ndarray:
    """Integrate a vectorised function of time over [a, b].

    ``fn`` receives the node array and returns shape (n,) or (n, d); the result is a
    scalar or a d-vector.
    """
    nodes, weights = midpoint_grid(a, b, step)
    if nodes.size == 0:
        sample = np.asarray(fn(np.array([a])))
        return np.zeros(sample.shape[1:]) if sample.ndim > 1 else np.float64(0.0)
    return np.tensordot(weights, np.asarray(fn(nodes)), axes=(0, 0))
