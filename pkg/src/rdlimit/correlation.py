"""Rate of a correlated Gaussian pair versus the independence approximation.

Both components pass through additive channels ``X_hat = X + Z`` with
``Z ~ N(0, D)``; rates are totals over the pair, in bits.
"""
import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_scalar, check_seed
from .channel import MCEstimate, _block_sums, jackknife, JACKKNIFE_BLOCKS
from .exceptions import EstimationError, InternalConsistencyError, InvalidArgumentError


@dataclass(frozen=True)
class CorrelatedPair:
    """Two equal-variance Gaussians with correlation ``rho``, each coded at ``distortion``."""

    variance: float
    rho: float
    distortion: float

    def __post_init__(self):
        check_scalar(self.variance, "variance", min_value=0.0, include_min=False)
        check_scalar(self.rho, "rho", min_value=-1.0, max_value=1.0)
        check_scalar(self.distortion, "distortion", min_value=0.0, include_min=False)

    @property
    def covariance(self):
        v = self.variance
        return np.array([[v, self.rho * v], [self.rho * v, v]])


def _det2(a, b, c, d):
    return a * d - b * c


def rate_independent(pair):
    """``log2(1 + var/D)``: the pair's rate if the correlation is ignored."""
    if not isinstance(pair, CorrelatedPair):
        raise InvalidArgumentError("expected a CorrelatedPair")
    return math.log2(1.0 + pair.variance / pair.distortion)


def rate_correlated(pair):
    """Joint rate ``0.5*log2(det(Sigma + D I) / D^2)`` of the correlated pair.

    Evaluated as ``rate_independent + 0.5*log2(1 - t^2)`` with
    ``t = rho*var/(var + D)``, which is the same determinant ratio factored so
    that ``rho = 0`` reproduces the independent rate bit for bit.
    """
    if not isinstance(pair, CorrelatedPair):
        raise InvalidArgumentError("expected a CorrelatedPair")
    v, d = pair.variance, pair.distortion
    det_out = _det2(v + d, pair.rho * v, pair.rho * v, v + d)
    if det_out <= 0.0:
        raise InternalConsistencyError(f"non-positive determinant {det_out} for {pair}")
    t = pair.rho * v / (v + d)
    return rate_independent(pair) + 0.5 * math.log1p(-t * t) / math.log(2.0)


def correlation_overestimate(pair):
    """Bits over-counted by coding the pair as if independent."""
    return rate_independent(pair) - rate_correlated(pair)


def overestimate_table(variance, distortion, rhos):
    """Rows ``(rho, rate_independent, rate_correlated, overestimate)``."""
    rows = []
    for rho in rhos:
        pair = CorrelatedPair(variance, float(rho), distortion)
        ri, rc = rate_independent(pair), rate_correlated(pair)
        rows.append((float(rho), ri, rc, ri - rc))
    return rows


def _joint_mi(sums, n):
    # sums: 4 means then the 10 upper-triangle second moments of (x, y, xh, yh)
    mean = sums[:4] / n
    second = np.empty((4, 4))
    iu = np.triu_indices(4)
    second[iu] = sums[4:] / n
    second.T[iu] = sums[4:] / n
    cov = second - np.outer(mean, mean)
    cxx, chh, chx = cov[:2, :2], cov[2:, 2:], cov[2:, :2]
    det_x = _det2(cxx[0, 0], cxx[0, 1], cxx[1, 0], cxx[1, 1])
    det_h = _det2(chh[0, 0], chh[0, 1], chh[1, 0], chh[1, 1])
    if det_x <= 0 or det_h <= 0:
        raise EstimationError("degenerate sample covariance")
    resid = chh - chx @ np.linalg.solve(cxx, chx.T)
    det_r = _det2(resid[0, 0], resid[0, 1], resid[1, 0], resid[1, 1])
    if det_r <= 0:
        raise EstimationError("degenerate conditional covariance")
    return 0.5 * math.log2(det_h / det_r)


def mc_rate_correlated(pair, num_samples=10**6, seed=0, blocks=JACKKNIFE_BLOCKS):
    """Monte Carlo estimate of I((X, Y); (X_hat, Y_hat)) in bits.

    Draws the jointly Gaussian pair, adds independent ``N(0, D)`` noise to each
    component and evaluates the Gaussian MI from sample covariance
    determinants. Standard error by block jackknife.
    """
    rng = np.random.Generator(np.random.PCG64(check_seed(seed)))
    n = int(num_samples)
    s = math.sqrt(pair.variance)
    rho = pair.rho
    u, w = rng.standard_normal(n), rng.standard_normal(n)
    x = s * u
    y = s * (rho * u + math.sqrt(max(1.0 - rho * rho, 0.0)) * w)
    sd = math.sqrt(pair.distortion)
    xh = x + sd * rng.standard_normal(n)
    yh = y + sd * rng.standard_normal(n)
    data = np.stack([x, y, xh, yh])
    iu = np.triu_indices(4)
    cols = np.concatenate([data, data[iu[0]] * data[iu[1]]])
    sums, counts = _block_sums(cols, blocks)
    value, se = jackknife(_joint_mi, sums, counts)
    return MCEstimate(value, se)


__all__ = [
    "CorrelatedPair",
    "rate_independent",
    "rate_correlated",
    "correlation_overestimate",
    "overestimate_table",
    "mc_rate_correlated",
]
