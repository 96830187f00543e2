"""Causal mean prediction inside each latent channel.

Positions are visited in row-major (raster) order per channel. A neighbour
offset ``(drow, dcol)`` is causal when it points to an earlier raster
position: ``drow < 0``, or ``drow == 0`` and ``dcol < 0``.
"""
from dataclasses import dataclass, replace

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .exceptions import InvalidArgumentError, NumericalError
from .gaussian_rd import rate_gaussian
from .transforms import LatentGrid

KINDS = ("none", "causal_average", "causal_lsq")
DEFAULT_NEIGHBORHOOD = ((0, -1), (-1, 0))
DEFAULT_RIDGE = 1e-6
MIN_INTERIOR = 10


def is_causal(offset):
    dr, dc = offset
    return dr < 0 or (dr == 0 and dc < 0)


@dataclass(frozen=True, eq=False)
class ContextModelSpec:
    """Which predictor to use, over which causal neighbours, with what weights.

    ``coefficients`` has shape ``(channels, len(neighborhood))`` and is only
    used by ``causal_lsq``.
    """

    kind: str = "none"
    neighborhood: tuple = DEFAULT_NEIGHBORHOOD
    coefficients: np.ndarray = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgumentError(f"unknown context kind {self.kind!r}")
        nb = tuple((int(dr), int(dc)) for dr, dc in self.neighborhood)
        if not nb:
            raise InvalidArgumentError("neighborhood must not be empty")
        for off in nb:
            if not is_causal(off):
                raise InvalidArgumentError(f"offset {off} is not causal in raster order")
        object.__setattr__(self, "neighborhood", nb)
        if self.coefficients is not None:
            coef = np.asarray(self.coefficients, dtype=np.float64)
            if coef.ndim != 2 or coef.shape[1] != len(nb):
                raise InvalidArgumentError(
                    f"coefficients must be (channels, {len(nb)}), got {coef.shape}")
            object.__setattr__(self, "coefficients", coef)


@dataclass(frozen=True, eq=False)
class ResidualGrid:
    residuals: np.ndarray
    predicted_means: np.ndarray

    @property
    def energies(self):
        return self.residuals ** 2


def _coeff_array(latents):
    if isinstance(latents, LatentGrid):
        return latents.coefficients
    arr = np.asarray(latents, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[np.newaxis]
    if arr.ndim != 3:
        raise InvalidArgumentError(f"latents must be (channels, rows, cols), got {arr.shape}")
    return arr


def _shifted(arr, offset):
    """``out[..., r, c] = arr[..., r+dr, c+dc]`` with a validity mask."""
    dr, dc = offset
    _, h, w = arr.shape
    out = np.zeros_like(arr)
    mask = np.zeros((h, w), dtype=bool)
    r0, r1 = max(0, -dr), min(h, h - dr)
    c0, c1 = max(0, -dc), min(w, w - dc)
    if r0 < r1 and c0 < c1:
        out[:, r0:r1, c0:c1] = arr[:, r0 + dr:r1 + dr, c0 + dc:c1 + dc]
        mask[r0:r1, c0:c1] = True
    return out, mask


def _require_weights(spec, channels):
    if spec.coefficients is None:
        raise InvalidArgumentError("causal_lsq needs fitted coefficients (see fit_context)")
    if spec.coefficients.shape[0] != channels:
        raise InvalidArgumentError(
            f"coefficients cover {spec.coefficients.shape[0]} channels, latents have {channels}")
    return spec.coefficients


def predict_from_clean(latents, spec):
    """Predicted means for every position, reading neighbours from ``latents``.

    This is the one-shot (non-sequential) prediction used to compute clean
    residual energies; it agrees with :func:`predict_at` whenever the
    neighbours are the clean latents.
    """
    arr = _coeff_array(latents)
    if spec.kind == "none":
        return np.zeros_like(arr)
    shifted = [_shifted(arr, off) for off in spec.neighborhood]
    if spec.kind == "causal_average":
        total = np.zeros_like(arr)
        count = np.zeros(arr.shape[1:])
        for vals, mask in shifted:
            total += vals
            count += mask
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(count > 0, total / np.maximum(count, 1), 0.0)
    weights = _require_weights(spec, arr.shape[0])
    pred = np.zeros_like(arr)
    for k, (vals, _) in enumerate(shifted):
        pred += weights[:, k, None, None] * vals
    return pred


def predict_at(decoded, row, col, spec):
    """Predicted means of all channels at ``(row, col)`` from decoded values.

    Only positions strictly before ``(row, col)`` in raster order are read.
    """
    arr = _coeff_array(decoded)
    channels, h, w = arr.shape
    if spec.kind == "none":
        return np.zeros(channels)
    vals, avail = [], []
    for dr, dc in spec.neighborhood:
        r, c = row + dr, col + dc
        ok = 0 <= r < h and 0 <= c < w
        avail.append(ok)
        vals.append(arr[:, r, c] if ok else np.zeros(channels))
    if spec.kind == "causal_average":
        n = sum(avail)
        if n == 0:
            return np.zeros(channels)
        return sum(v for v, ok in zip(vals, avail) if ok) / n
    weights = _require_weights(spec, channels)
    return (np.stack(vals, axis=1) * weights).sum(axis=1)


def predict_mean(decoded_so_far, position, spec):
    """Scalar prediction for ``position = (channel, row, col)``."""
    channel, row, col = position
    return float(predict_at(decoded_so_far, row, col, spec)[channel])


def residuals(latents, spec):
    """Clean-latent residuals and the means they were measured against."""
    arr = _coeff_array(latents)
    mu = predict_from_clean(arr, spec)
    return ResidualGrid(arr - mu, mu)


def fit_context(latents, spec, ridge=DEFAULT_RIDGE):
    """Least-squares neighbour weights per channel, fitted on clean latents.

    Only interior positions (every neighbour inside the grid) enter the
    normal equations. The ridge term is ``ridge`` times the channel's mean
    energy; all-zero channels get zero weights.

    Returns a copy of ``spec`` with ``kind="causal_lsq"`` and the weights.
    """
    arr = _coeff_array(latents)
    shifted = [_shifted(arr, off) for off in spec.neighborhood]
    interior = np.logical_and.reduce([m for _, m in shifted])
    if interior.sum() < MIN_INTERIOR:
        raise InvalidArgumentError(
            f"need at least {MIN_INTERIOR} interior positions per channel, "
            f"got {int(interior.sum())}")
    k = len(spec.neighborhood)
    weights = np.zeros((arr.shape[0], k))
    for ch in range(arr.shape[0]):
        target = arr[ch][interior]
        design = np.stack([vals[ch][interior] for vals, _ in shifted], axis=1)
        energy = float(np.mean(target ** 2))
        if energy == 0.0 and not design.any():
            continue
        gram = design.T @ design + ridge * max(energy, np.finfo(float).tiny) * len(target) * np.eye(k)
        try:
            weights[ch] = np.linalg.solve(gram, design.T @ target)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"singular normal equations in channel {ch}: {exc}",
                                 stage="fit_context") from None
    if not np.all(np.isfinite(weights)):
        raise NumericalError("non-finite context weights", stage="fit_context")
    return replace(spec, kind="causal_lsq", coefficients=weights)


def residual_rate(residual_energy, distortion):
    """Rate in bits of a residual with the given energy at ``distortion``."""
    return rate_gaussian(residual_energy, distortion)


class ContextModel(BaseEstimator):
    """Estimator front-end: ``fit`` learns weights, ``predict`` returns means.

    Parameters
    ----------
    kind : {"none", "causal_average", "causal_lsq"}
    neighborhood : tuple of (drow, dcol)
    ridge : float
        Relative ridge strength for ``causal_lsq``.
    """

    def __init__(self, kind="causal_lsq", neighborhood=DEFAULT_NEIGHBORHOOD,
                 ridge=DEFAULT_RIDGE):
        self.kind = kind
        self.neighborhood = neighborhood
        self.ridge = ridge

    def fit(self, X, y=None):
        spec = ContextModelSpec(self.kind, self.neighborhood)
        if self.kind == "causal_lsq":
            spec = fit_context(X, spec, self.ridge)
        self.spec_ = spec
        return self

    def predict(self, X):
        check_is_fitted(self, "spec_")
        return predict_from_clean(X, self.spec_)

    def residuals(self, X):
        check_is_fitted(self, "spec_")
        return residuals(X, self.spec_)


__all__ = [
    "ContextModelSpec",
    "ContextModel",
    "ResidualGrid",
    "predict_mean",
    "predict_at",
    "predict_from_clean",
    "residuals",
    "fit_context",
    "residual_rate",
    "is_causal",
]
