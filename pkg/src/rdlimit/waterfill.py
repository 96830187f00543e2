"""Reverse water-filling over independent Gaussian sources."""
from dataclasses import dataclass

import numpy as np

from ._validation import check_finite_array, check_scalar
from .exceptions import ConvergenceError, InvalidArgumentError
from .gaussian_rd import rate_gaussian_array

MAX_ITER = 200
DEFAULT_TOLERANCE = 1e-10


@dataclass(frozen=True, eq=False)
class SourceSpec:
    """Variances of a finite collection of independent zero-mean Gaussians."""

    variances: np.ndarray

    def __post_init__(self):
        arr = check_finite_array(self.variances, "variances", ndim=1, nonnegative=True)
        arr.setflags(write=False)
        object.__setattr__(self, "variances", arr)

    def __len__(self):
        return self.variances.size

    @property
    def total_variance(self):
        return float(np.sum(self.variances))


@dataclass(frozen=True, eq=False)
class Allocation:
    """Per-source distortions and the water level that produced them."""

    distortions: np.ndarray
    water_level: float
    total_rate: float
    iterations: int = 0

    def __len__(self):
        return self.distortions.size


def _as_sources(sources):
    return sources if isinstance(sources, SourceSpec) else SourceSpec(sources)


def allocation_rates(sources, alloc):
    """Per-source rates ``max(0, 0.5*log2(var/D))`` in bits."""
    sources = _as_sources(sources)
    if len(alloc.distortions) != len(sources):
        raise InvalidArgumentError(
            f"allocation has {len(alloc.distortions)} entries for {len(sources)} sources")
    slack = 1e-9 * np.maximum(sources.variances, 1.0)
    if np.any(alloc.distortions > sources.variances + slack):
        raise InvalidArgumentError("allocated distortion exceeds source variance")
    return rate_gaussian_array(sources.variances, alloc.distortions)


def reverse_water_fill(sources, budget, tolerance=DEFAULT_TOLERANCE, max_iter=MAX_ITER):
    """Split a total distortion ``budget`` across sources to minimise total rate.

    Bisects the water level ``alpha`` on ``[0, max(var)]`` until
    ``sum(min(var, alpha))`` is within ``tolerance * budget`` of the budget.

    Parameters
    ----------
    sources : SourceSpec or array-like
        Source variances.
    budget : float
        Total (summed) distortion, > 0.
    tolerance : float
        Relative tolerance on the distortion sum.

    Returns
    -------
    Allocation

    Raises
    ------
    InvalidArgumentError
        Empty sources, non-positive budget or tolerance.
    ConvergenceError
        If ``max_iter`` halvings do not meet the tolerance.
    """
    sources = _as_sources(sources)
    budget = check_scalar(budget, "budget", min_value=0.0, include_min=False)
    tolerance = check_scalar(tolerance, "tolerance", min_value=0.0, include_min=False)
    var = sources.variances

    if budget >= var.sum():
        dist = var.copy()
        return Allocation(dist, float(var.max()), 0.0, 0)

    lo, hi = 0.0, float(var.max())
    target = tolerance * budget
    alpha = 0.5 * (lo + hi)
    residual = np.inf
    for it in range(1, max_iter + 1):
        alpha = 0.5 * (lo + hi)
        residual = float(np.minimum(var, alpha).sum()) - budget
        if abs(residual) <= target:
            break
        if residual > 0:
            hi = alpha
        else:
            lo = alpha
    else:
        raise ConvergenceError(
            f"water level did not converge in {max_iter} iterations "
            f"(residual {residual:.3e}, target {target:.3e})", residual=residual)

    dist = np.minimum(var, alpha)
    total = float(rate_gaussian_array(var, dist).sum())
    return Allocation(dist, float(alpha), total, it)


def allocation_rate(sources, alloc):
    """Mean rate in bits per source of an allocation."""
    sources = _as_sources(sources)
    rates = allocation_rates(sources, alloc)
    return float(rates.mean())


__all__ = ["SourceSpec", "Allocation", "reverse_water_fill", "allocation_rate",
           "allocation_rates"]
