"""Bracketed root finding."""

import logging as log
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import optimize

from ..constants import NEWTON_MAX_ITER, NEWTON_STALL_ITER, ROOT_TOL
from ..errors import SolverError


@dataclass(frozen=True)
class RootResult:
    """Outcome of a bracketed root search."""

    root: float
    iterations: int
    residual: float
    method: str


def bracketed_root(
    fn: Callable[[float], float],
    lo: float,
    hi: float,
    x0: Optional[float] = None,
    fprime: Optional[Callable[[float], float]] = None,
    tol: float = ROOT_TOL,
    max_iter: int = NEWTON_MAX_ITER,
) -> RootResult:
    """Find a root of ``fn`` inside [lo, hi].

    Newton (secant when no derivative is given) runs first for a bounded number of
    iterations; if it stalls or leaves the bracket, Brent's method finishes the job.

    Raises:
        SolverError: no sign change in the bracket.
    """
    f_lo, f_hi = fn(lo), fn(hi)
    if f_lo == 0.0:
        return RootResult(lo, 0, 0.0, "bracket")
    if f_hi == 0.0:
        return RootResult(hi, 0, 0.0, "bracket")
    if np.sign(f_lo) == np.sign(f_hi):
        raise SolverError(f"No sign change in bracket [{lo}, {hi}]", residual=min(abs(f_lo), abs(f_hi)))

    start = 0.5 * (lo + hi) if x0 is None else x0
    with np.errstate(all="ignore"):
        try:
            root, info = optimize.newton(
                fn,
                start,
                fprime=fprime,
                tol=tol,
                maxiter=min(NEWTON_STALL_ITER, max_iter),
                full_output=True,
                disp=False,
            )
            if info.converged and lo <= root <= hi and np.isfinite(root):
                return RootResult(float(root), info.iterations, abs(fn(root)), "newton")
        except (RuntimeError, ZeroDivisionError, OverflowError) as e:
            log.debug("Newton failed from %s: %s", start, e)

    log.debug("Newton stalled, falling back to Brent on [%s, %s]", lo, hi)
    root, info = optimize.brentq(fn, lo, hi, xtol=tol, maxiter=max_iter, full_output=True, disp=False)
    if not info.converged:
        raise SolverError(f"Root search did not converge in {max_iter} iterations", residual=abs(fn(root)))
    return RootResult(float(root), info.iterations, abs(fn(root)), "brent")
