"""Closed-form rate-distortion quantities for zero-mean Gaussian sources.

Everything is computed in nats internally and converted to bits at the
public boundary, except :func:`expected_code_length`, :func:`gaussian_entropy`
and :func:`gaussian_kl`, which are natural-log quantities by definition.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr, logsumexp, ndtr

from ._validation import check_finite_array, check_scalar
from .exceptions import InfiniteRateError, InvalidArgumentError

LN2 = math.log(2.0)
UNIFORM_NOISE_VARIANCE = 1.0 / 12.0
DEFAULT_VARIANCE_FLOOR = 1e-9


def nats_to_bits(x):
    return x / LN2


def bits_to_nats(x):
    return x * LN2


@dataclass(frozen=True)
class GaussianSource:
    """Zero-mean Gaussian source described only by its variance."""

    variance: float

    def __post_init__(self):
        check_scalar(self.variance, "variance", min_value=0.0)

    def rate(self, distortion):
        return rate_gaussian(self.variance, distortion)


@dataclass(frozen=True)
class RatePair:
    """Rates of one variance under unit-step uniform quantization and R(D)."""

    variance: float
    rate_uniform: float
    rate_optimal: float

    @property
    def gap(self):
        return self.rate_uniform - self.rate_optimal


def _rate_gaussian_nats(variance, distortion):
    # vectorised core; callers validate
    variance = np.asarray(variance, dtype=np.float64)
    distortion = np.asarray(distortion, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = 0.5 * np.log(variance / distortion)
    return np.where(variance > distortion, r, 0.0)


def rate_gaussian_array(variances, distortions):
    """Elementwise ``max(0, 0.5*log2(variance/distortion))`` for arrays.

    Entries with ``distortion >= variance`` (including zero variances) give
    exactly zero.
    """
    variances = check_finite_array(variances, "variances", nonnegative=True,
                                   allow_empty=True)
    distortions = check_finite_array(distortions, "distortions", nonnegative=True,
                                     allow_empty=True)
    if np.any((distortions == 0) & (variances > 0)):
        raise InfiniteRateError("zero distortion for a source with positive variance")
    return nats_to_bits(_rate_gaussian_nats(variances, distortions))


def rate_gaussian(variance, distortion):
    """Gaussian rate-distortion function R(D) in bits per sample.

    Returns ``0.5*log2(variance/distortion)`` when ``variance > distortion``
    and exactly 0 otherwise.

    Raises
    ------
    InvalidArgumentError
        If either argument is negative or non-finite.
    InfiniteRateError
        If ``distortion == 0`` while ``variance > 0``.
    """
    variance = check_scalar(variance, "variance", min_value=0.0)
    distortion = check_scalar(distortion, "distortion", min_value=0.0)
    if distortion == 0.0:
        if variance > 0.0:
            raise InfiniteRateError("R(0) is infinite for a source with positive variance")
        return 0.0
    return float(nats_to_bits(_rate_gaussian_nats(variance, distortion)))


def expected_code_length(second_moment, model_variance):
    """Expected code length in nats of a sample coded with ``N(0, model_variance)``.

    ``0.5*ln(2*pi*model_variance) + second_moment / (2*model_variance)``.
    ``model_variance`` may be an array (e.g. a search grid); the result then
    has its shape.
    """
    second_moment = check_scalar(second_moment, "second_moment", min_value=0.0)
    if np.ndim(model_variance) == 0:
        model_variance = check_scalar(model_variance, "model_variance", min_value=0.0,
                                      include_min=False)
        return (0.5 * math.log(2.0 * math.pi * model_variance)
                + second_moment / (2.0 * model_variance))
    v = check_finite_array(model_variance, "model_variance", nonnegative=True)
    if np.any(v == 0.0):
        raise InvalidArgumentError("model_variance must be positive")
    return 0.5 * np.log(2.0 * math.pi * v) + second_moment / (2.0 * v)


def argmin_model_variance(second_moment):
    """Model variance minimising :func:`expected_code_length`: the second moment itself."""
    return check_scalar(second_moment, "second_moment", min_value=0.0)


def gaussian_entropy(variance):
    """Differential entropy of ``N(0, variance)`` in nats."""
    variance = check_scalar(variance, "variance", min_value=0.0, include_min=False)
    return 0.5 * math.log(2.0 * math.pi * math.e * variance)


def gaussian_kl(variance_p, variance_q):
    """KL(N(0, variance_p) || N(0, variance_q)) in nats."""
    variance_p = check_scalar(variance_p, "variance_p", min_value=0.0, include_min=False)
    variance_q = check_scalar(variance_q, "variance_q", min_value=0.0, include_min=False)
    ratio = variance_p / variance_q
    return 0.5 * (ratio - 1.0 - math.log(ratio))


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


def _log_bin_mass(latent, sigma, step):
    """Natural log of the mass of ``[y - step/2, y + step/2]`` under ``N(0, sigma^2)``.

    Narrow bins (the density changes by less than about e across the bin) are
    integrated by 16-point Gauss-Legendre, which avoids the cancellation of a
    CDF difference. Wider bins use log tail probabilities: a tail difference
    when the bin lies on one side of zero, ``log1p`` of the two excluded tails
    when it straddles zero.
    """
    y = np.abs(np.asarray(latent, dtype=np.float64))
    sigma = np.broadcast_to(np.asarray(sigma, dtype=np.float64), y.shape)
    # centre and half-width directly, not as a difference of the bin ends
    centre = y / sigma
    half = 0.5 * step / sigma
    lo, hi = centre - half, centre + half
    narrow = 2.0 * half * (centre + half) + 4.0 * half * half < 1.0

    out = np.empty_like(y)
    if narrow.any():
        h = half[narrow]
        t = centre[narrow][..., None] + h[..., None] * _GL_NODES
        log_pdf = -0.5 * t * t - 0.5 * math.log(2.0 * math.pi)
        out[narrow] = logsumexp(log_pdf, b=_GL_WEIGHTS, axis=-1) + np.log(h)
    wide = ~narrow
    if wide.any():
        a, b = lo[wide], hi[wide]
        log_qa, log_qb = log_ndtr(-a), log_ndtr(-b)
        with np.errstate(divide="ignore", invalid="ignore"):
            tail = log_qa + np.log(-np.expm1(log_qb - log_qa))
            straddle = np.log1p(-(np.exp(log_qb) + ndtr(a)))
        out[wide] = np.where(a >= 0.0, tail, straddle)
    return out


def rate_uniform_array(latents, variance_floor=DEFAULT_VARIANCE_FLOOR, step=1.0,
                       variances=None):
    """Vectorised code length (bits) of uniformly quantized latents.

    Without ``variances`` each sample is priced under its own energy,
    ``sigma^2 = max(y^2, variance_floor)``; otherwise under the given model
    variances (still floored). ``step`` rescales the bin width.
    """
    latents = np.asarray(latents, dtype=np.float64)
    var = latents ** 2 if variances is None else np.asarray(variances, dtype=np.float64)
    sigma = np.sqrt(np.maximum(var, variance_floor))
    bits = -_log_bin_mass(latents, sigma, step) / LN2
    return np.maximum(bits, 0.0)


def rate_uniform_quantizer(latent_value, variance_floor=DEFAULT_VARIANCE_FLOOR, step=1.0):
    """Ideal code length in bits of one latent under unit-step uniform quantization.

    The probability of the bin centred on ``latent_value`` is taken under
    ``N(0, sigma^2)`` with ``sigma^2 = max(latent_value**2, variance_floor)``.
    """
    latent_value = check_scalar(latent_value, "latent_value")
    variance_floor = check_scalar(variance_floor, "variance_floor", min_value=0.0,
                                  include_min=False)
    step = check_scalar(step, "step", min_value=0.0, include_min=False)
    return float(rate_uniform_array(latent_value, variance_floor, step))


def log_variance_grid(low=1e-3, high=1e6, num=400):
    """Logarithmically spaced variances, the default abscissa of the gap curve."""
    low = check_scalar(low, "low", min_value=0.0, include_min=False)
    high = check_scalar(high, "high", min_value=low, include_min=False)
    return np.logspace(math.log10(low), math.log10(high), int(num))


def rate_gap_curve(variances=None, distortion=UNIFORM_NOISE_VARIANCE,
                   variance_floor=DEFAULT_VARIANCE_FLOOR):
    """Uniform-quantizer rate versus R(D) for each variance.

    Each variance is treated as the energy of a single latent ``y = sqrt(var)``.
    The uniform quantizer uses step ``sqrt(12*distortion)`` so that its noise
    variance matches ``distortion`` (unit step at the default 1/12).

    Returns a list of :class:`RatePair`.
    """
    if variances is None:
        variances = log_variance_grid()
    variances = check_finite_array(variances, "variances", ndim=1, nonnegative=True)
    distortion = check_scalar(distortion, "distortion", min_value=0.0, include_min=False)
    step = math.sqrt(12.0 * distortion)
    uniform = rate_uniform_array(np.sqrt(variances), variance_floor, step)
    optimal = nats_to_bits(_rate_gaussian_nats(variances, distortion))
    return [RatePair(float(v), float(u), float(o))
            for v, u, o in zip(variances, uniform, optimal)]


def shannon_gap_constant():
    """Asymptotic excess rate of uniform scalar quantization, 0.5*log2(pi*e/6) bits."""
    return 0.5 * math.log2(math.pi * math.e / 6.0)


__all__ = [
    "GaussianSource",
    "RatePair",
    "rate_gaussian",
    "rate_gaussian_array",
    "expected_code_length",
    "argmin_model_variance",
    "gaussian_entropy",
    "gaussian_kl",
    "rate_uniform_quantizer",
    "rate_uniform_array",
    "rate_gap_curve",
    "log_variance_grid",
    "shannon_gap_constant",
    "nats_to_bits",
    "bits_to_nats",
]
