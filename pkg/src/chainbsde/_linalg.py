"""Dense solve that reports failure as None instead of warnings or errors.

Several callers probe systems that are legitimately singular (exponents at
or past an abscissa of convergence, policies that never absorb) and decide
what that means themselves.  scipy's solver is noisy about those inputs: it
raises LinAlgError on some paths, emits LinAlgWarning on ill-conditioned
ones, and its fast diagonal path divides by zero and returns inf rather
than raising at all.  This wrapper normalizes all three outcomes.
"""

from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg
from numpy.typing import NDArray

__all__ = ["solve_or_none"]


def solve_or_none(
    m: NDArray[np.float64], rhs: NDArray[np.float64]
) -> NDArray[np.float64] | None:
    """Solution of m @ x = rhs, or None when the system is not cleanly solvable."""
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            with np.errstate(divide="ignore", invalid="ignore"):
                x = scipy.linalg.solve(m, rhs)
    except scipy.linalg.LinAlgError:
        return None
    if not np.isfinite(x).all():
        return None
    return x
