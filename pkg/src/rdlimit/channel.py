"""Scaled Gaussian test channel ``y_hat = eta * y + z`` and Monte Carlo checks.

Random numbers
--------------
All noise comes from :class:`numpy.random.Generator` backed by ``PCG64``
seeded with the caller's integer seed. The noise attached to sample ``i`` is
the ``i``-th standard normal drawn from that generator, so a realization is a
pure function of ``(inputs, params, seed)`` and does not depend on the order
in which samples are later consumed.

Other consumers of a run seed (synthetic sources, CLI input draws) use
:func:`substream`, which derives statistically independent streams from the
same integer, so one ``--seed`` never makes the noise a copy of the data.
"""
import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_finite_array, check_scalar, check_seed
from .exceptions import EstimationError, InvalidArgumentError

JACKKNIFE_BLOCKS = 100


SOURCE_STREAM = 1
INPUT_STREAM = 2


def substream(seed, key):
    """Generator for the independent substream ``key`` of ``seed``."""
    seq = np.random.SeedSequence(check_seed(seed), spawn_key=(int(key),))
    return np.random.Generator(np.random.PCG64(seq))


def noise_stream(seed, size):
    """Standard normal draws for sample indices ``0..size-1``."""
    rng = np.random.Generator(np.random.PCG64(check_seed(seed)))
    return rng.standard_normal(size)


def scaling_factor(signal_variance, noise_variance):
    """Gain ``sqrt(1 - D / var)`` that keeps I(y; y_hat) at ``0.5*log2(var/D)``.

    Clamped to 0 when ``noise_variance >= signal_variance``.
    """
    signal_variance = check_scalar(signal_variance, "signal_variance", min_value=0.0,
                                   include_min=False)
    noise_variance = check_scalar(noise_variance, "noise_variance", min_value=0.0)
    if noise_variance >= signal_variance:
        return 0.0
    return math.sqrt(1.0 - noise_variance / signal_variance)


def scaling_factor_array(signal_variances, noise_variances):
    """Vectorised :func:`scaling_factor` (no validation, zero where suppressed)."""
    v = np.asarray(signal_variances, dtype=np.float64)
    d = np.asarray(noise_variances, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        eta = np.sqrt(np.clip(1.0 - d / v, 0.0, None))
    return np.where(d < v, eta, 0.0)


@dataclass(frozen=True)
class ChannelParams:
    signal_variance: float
    noise_variance: float

    def __post_init__(self):
        check_scalar(self.signal_variance, "signal_variance", min_value=0.0,
                     include_min=False)
        check_scalar(self.noise_variance, "noise_variance", min_value=0.0)

    @property
    def eta(self):
        return scaling_factor(self.signal_variance, self.noise_variance)

    @property
    def suppressed(self):
        """True when the allocation gives this source zero rate."""
        return self.noise_variance >= self.signal_variance


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    inputs: np.ndarray
    outputs: np.ndarray
    seed: int
    params: ChannelParams

    @property
    def squared_errors(self):
        return (self.outputs - self.inputs) ** 2


def apply_channel(inputs, params, seed):
    """Push ``inputs`` through the scaled test channel.

    Zero-rate sources (``noise_variance >= signal_variance``) produce an
    all-zero output instead of pure noise.
    """
    x = check_finite_array(inputs, "inputs", ndim=1, allow_empty=True)
    seed = check_seed(seed)
    if params.suppressed:
        out = np.zeros_like(x)
    else:
        noise = noise_stream(seed, x.size)
        out = params.eta * x + math.sqrt(params.noise_variance) * noise
    return ChannelRealization(x, out, seed, params)


def per_sample_distortion(params):
    """Expected squared error of one channel use, ``(1-eta)^2 var + D``.

    In the suppressed regime the output is zero, so the error is the signal
    variance itself.
    """
    if params.suppressed:
        return params.signal_variance
    eta = params.eta
    return (1.0 - eta) ** 2 * params.signal_variance + params.noise_variance


def per_sample_distortion_array(signal_variances, noise_variances):
    v = np.asarray(signal_variances, dtype=np.float64)
    d = np.asarray(noise_variances, dtype=np.float64)
    eta = scaling_factor_array(v, d)
    return np.where(d < v, (1.0 - eta) ** 2 * v + d, v)


@dataclass(frozen=True)
class MCEstimate:
    """Monte Carlo point estimate with its standard error."""

    value: float
    stderr: float

    def within(self, target, n_sigma=3.0):
        return abs(self.value - target) <= n_sigma * self.stderr


def _block_sums(columns, blocks):
    # columns: (k, n) -> per-block sums (blocks, k), deterministic split
    n = columns.shape[1]
    edges = np.linspace(0, n, blocks + 1).astype(np.int64)
    return np.add.reduceat(columns, edges[:-1], axis=1).T, np.diff(edges)


def jackknife(statistic, sums, counts):
    """Delete-one-block jackknife of ``statistic(total_sums, total_count)``.

    ``sums`` holds per-block sufficient statistics (blocks, k).
    """
    total, n = sums.sum(axis=0), counts.sum()
    full = statistic(total, n)
    leave_out = np.array([statistic(total - s, n - c) for s, c in zip(sums, counts)])
    b = len(counts)
    se = math.sqrt((b - 1) / b * np.sum((leave_out - leave_out.mean()) ** 2))
    return full, se


def gaussian_mi_from_moments(sums, n):
    """MI in bits between two jointly Gaussian scalars from raw sums.

    ``sums = (sx, sy, sxx, syy, sxy)``; the conditional variance of ``y``
    given ``x`` is the residual variance of the least-squares fit.
    """
    sx, sy, sxx, syy, sxy = sums
    vx = sxx / n - (sx / n) ** 2
    vy = syy / n - (sy / n) ** 2
    cxy = sxy / n - (sx / n) * (sy / n)
    if vx <= 0 or vy <= 0:
        raise EstimationError("degenerate sample variance in MI estimate")
    resid = vy - cxy * cxy / vx
    if resid <= 0:
        raise EstimationError("output is a deterministic function of the input")
    return 0.5 * math.log2(vy / resid)


def mc_mutual_information(signal_variance, noise_variance, num_samples=10**6, seed=0,
                          blocks=JACKKNIFE_BLOCKS):
    """Monte Carlo estimate of I(y; eta*y + z) in bits per sample.

    Samples ``y ~ N(0, signal_variance)`` and channel noise, then applies the
    Gaussian MI formula to sample moments. The standard error is a
    delete-one-block jackknife over ``blocks`` contiguous blocks.

    If ``noise_variance >= signal_variance`` the gain is zero and the estimate
    is that of independent variables (close to 0); no zero-output suppression
    is applied here.
    """
    signal_variance = check_scalar(signal_variance, "signal_variance", min_value=0.0,
                                   include_min=False)
    noise_variance = check_scalar(noise_variance, "noise_variance", min_value=0.0,
                                  include_min=False)
    num_samples = int(num_samples)
    if num_samples < 10**4:
        raise InvalidArgumentError("num_samples must be at least 1e4")
    rng = np.random.Generator(np.random.PCG64(check_seed(seed)))
    y = math.sqrt(signal_variance) * rng.standard_normal(num_samples)
    z = math.sqrt(noise_variance) * rng.standard_normal(num_samples)
    y_hat = scaling_factor(signal_variance, noise_variance) * y + z
    cols = np.stack([y, y_hat, y * y, y_hat * y_hat, y * y_hat])
    sums, counts = _block_sums(cols, blocks)
    value, se = jackknife(gaussian_mi_from_moments, sums, counts)
    return MCEstimate(value, se)


def sample_variance_estimate(x):
    """Sample variance of ``x`` with its large-sample standard error."""
    x = check_finite_array(x, "x", ndim=1)
    c = x - x.mean()
    m2 = float(np.mean(c * c))
    m4 = float(np.mean(c ** 4))
    return MCEstimate(m2, math.sqrt(max(m4 - m2 * m2, 0.0) / x.size))


__all__ = [
    "ChannelParams",
    "ChannelRealization",
    "MCEstimate",
    "scaling_factor",
    "scaling_factor_array",
    "apply_channel",
    "per_sample_distortion",
    "per_sample_distortion_array",
    "mc_mutual_information",
    "sample_variance_estimate",
    "gaussian_mi_from_moments",
    "jackknife",
    "noise_stream",
]
