"""Orthonormal block transforms used as the analysis/synthesis pair.

Latents are stored channel-first: ``coefficients[channel, block_row, block_col]``
where ``channel`` indexes the block_size**2 basis functions. The identity
transform is the one exception: it keeps the image as a single channel so
that spatial neighbours stay adjacent in the latent grid.
"""
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.fft import dct
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_image
from .exceptions import InvalidArgumentError

KINDS = ("identity", "dct", "klt")
ORTHONORMAL_ATOL = 1e-10


@dataclass(frozen=True, eq=False)
class LatentGrid:
    """Transform coefficients plus the geometry needed to invert them."""

    coefficients: np.ndarray
    image_shape: tuple
    block_size: int

    @property
    def channels(self):
        return self.coefficients.shape[0]

    @property
    def shape(self):
        return self.coefficients.shape

    @property
    def size(self):
        return self.coefficients.size

    def with_coefficients(self, coefficients):
        coefficients = np.asarray(coefficients, dtype=np.float64)
        if coefficients.shape != self.coefficients.shape:
            raise InvalidArgumentError(
                f"coefficient shape {coefficients.shape} != {self.coefficients.shape}")
        return LatentGrid(coefficients, self.image_shape, self.block_size)


@dataclass(frozen=True, eq=False)
class TransformSpec:
    """Transform kind, block size and (for dct/klt) the orthonormal basis.

    A ``klt`` spec without a basis is a placeholder: pipeline entry points fit
    it on the images they are given, :func:`analyze` refuses it.
    """

    kind: str = "dct"
    block_size: int = 8
    basis: np.ndarray = field(default=None, repr=False)
    rank_deficient: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgumentError(f"unknown transform kind {self.kind!r}")
        b = int(self.block_size)
        if b < 1 or (b & (b - 1)):
            raise InvalidArgumentError(f"block_size must be a power of two, got {b}")
        object.__setattr__(self, "block_size", b)
        if self.kind == "dct" and self.basis is None:
            object.__setattr__(self, "basis", dct_basis(b))
        if self.kind == "klt" and self.basis is not None:
            basis = np.asarray(self.basis, dtype=np.float64)
            if basis.shape != (b * b, b * b):
                raise InvalidArgumentError(
                    f"klt basis must be {b*b}x{b*b}, got {basis.shape}")
            object.__setattr__(self, "basis", basis)
        if self.basis is not None and not is_orthonormal(self.basis):
            raise InvalidArgumentError("transform basis is not orthonormal")


def is_orthonormal(basis, atol=ORTHONORMAL_ATOL):
    basis = np.asarray(basis)
    return np.allclose(basis @ basis.T, np.eye(basis.shape[0]), rtol=0.0, atol=atol)


def dct_basis(block_size):
    """Row-major 2-D orthonormal DCT-II basis; row ``u*B + v`` is one atom."""
    c = dct(np.eye(block_size), norm="ortho", axis=0)
    return np.kron(c, c)


def _pad(image, block_size):
    h, w = image.shape
    ph, pw = -h % block_size, -w % block_size
    if ph or pw:
        image = np.pad(image, ((0, ph), (0, pw)), mode="symmetric")
    return image


def _to_blocks(image, block_size):
    h, w = image.shape
    r, c = h // block_size, w // block_size
    return (image.reshape(r, block_size, c, block_size)
            .transpose(0, 2, 1, 3)
            .reshape(r, c, block_size * block_size))


def _from_blocks(blocks, block_size):
    r, c, _ = blocks.shape
    return (blocks.reshape(r, c, block_size, block_size)
            .transpose(0, 2, 1, 3)
            .reshape(r * block_size, c * block_size))


def analyze(image, spec):
    """Forward block transform of a 2-D image into a :class:`LatentGrid`.

    Images whose sides are not multiples of the block size are padded by
    symmetric reflection; :func:`synthesize` crops the padding back off.
    """
    image = check_image(image)
    if spec.kind == "identity":
        return LatentGrid(image[np.newaxis].copy(), image.shape, 1)
    if spec.basis is None:
        raise InvalidArgumentError("klt spec has no basis; fit one with fit_klt")
    b = spec.block_size
    blocks = _to_blocks(_pad(image, b), b)
    coeffs = blocks @ spec.basis.T
    return LatentGrid(np.ascontiguousarray(coeffs.transpose(2, 0, 1)), image.shape, b)


def synthesize(latents, spec):
    """Inverse of :func:`analyze`."""
    coeffs = np.asarray(latents.coefficients, dtype=np.float64)
    if not np.all(np.isfinite(coeffs)):
        raise InvalidArgumentError("latents contain non-finite values")
    h, w = latents.image_shape
    if spec.kind == "identity":
        if coeffs.shape != (1, h, w):
            raise InvalidArgumentError(f"identity latents must have shape (1, {h}, {w})")
        return coeffs[0].copy()
    b = spec.block_size
    expected = (b * b, math.ceil(h / b), math.ceil(w / b))
    if coeffs.shape != expected:
        raise InvalidArgumentError(f"latent shape {coeffs.shape} != expected {expected}")
    blocks = coeffs.transpose(1, 2, 0) @ spec.basis
    return _from_blocks(blocks, b)[:h, :w].copy()


def _sign_fix(vectors):
    # columns: make the largest-magnitude entry positive
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def fit_klt(images, block_size=8, rank_tol=1e-12):
    """Eigenbasis of the sample block covariance, eigenvalues descending.

    If the covariance is rank deficient, eigenvectors of the (numerically)
    zero eigenvalues are replaced by a deterministic orthonormal completion
    built from the standard basis, and a warning is issued.
    """
    if isinstance(images, np.ndarray) and images.ndim == 2:
        images = [images]
    b = int(block_size)
    blocks = np.concatenate(
        [_to_blocks(_pad(check_image(im), b), b).reshape(-1, b * b) for im in images])
    if blocks.shape[0] < b * b:
        raise InvalidArgumentError(
            f"need at least {b*b} blocks to fit a {b}x{b} KLT, got {blocks.shape[0]}")
    centered = blocks - blocks.mean(axis=0)
    cov = centered.T @ centered / blocks.shape[0]
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals, kind="stable")[::-1]
    evals, evecs = evals[order], _sign_fix(evecs[:, order])

    scale = max(float(evals[0]), 0.0)
    keep = evals > rank_tol * scale if scale > 0 else np.zeros_like(evals, dtype=bool)
    rank_deficient = not keep.all()
    if rank_deficient:
        kept = evecs[:, keep]
        # project the standard basis off the kept span, then orthonormalise
        rest = np.eye(b * b) - kept @ kept.T
        q, r = np.linalg.qr(rest)
        strength = np.abs(np.diag(r))
        picked = q[:, np.argsort(-strength, kind="stable")[: (~keep).sum()]]
        picked = _sign_fix(picked)
        evecs = np.concatenate([kept, picked], axis=1)
        warnings.warn(f"KLT covariance has rank {keep.sum()} < {b*b}; "
                      "null space completed deterministically", RuntimeWarning)
    spec = TransformSpec("klt", b, evecs.T.copy(), rank_deficient)
    return spec


def mse(a, b):
    """Mean squared difference of two images or two latent grids."""
    if isinstance(a, LatentGrid):
        a = a.coefficients
    if isinstance(b, LatentGrid):
        b = b.coefficients
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise InvalidArgumentError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


def psnr(mse_value, peak=1.0):
    if mse_value <= 0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse_value)


class BlockTransform(TransformerMixin, BaseEstimator):
    """Estimator wrapper around :func:`analyze` / :func:`synthesize`.

    Parameters
    ----------
    kind : {"identity", "dct", "klt"}
    block_size : int
        Power of two; ignored for ``identity``.
    basis : ndarray, optional
        Pre-computed KLT basis. When ``None`` and ``kind="klt"``, :meth:`fit`
        estimates it from the training images.
    """

    def __init__(self, kind="dct", block_size=8, basis=None):
        self.kind = kind
        self.block_size = block_size
        self.basis = basis

    def fit(self, X, y=None):
        if self.kind == "klt" and self.basis is None:
            self.spec_ = fit_klt(X, self.block_size)
        else:
            self.spec_ = TransformSpec(self.kind, self.block_size, self.basis)
        return self

    def transform(self, X):
        check_is_fitted(self, "spec_")
        return analyze(X, self.spec_)

    def inverse_transform(self, X):
        check_is_fitted(self, "spec_")
        return synthesize(X, self.spec_)


__all__ = [
    "LatentGrid",
    "TransformSpec",
    "BlockTransform",
    "analyze",
    "synthesize",
    "fit_klt",
    "dct_basis",
    "is_orthonormal",
    "mse",
    "psnr",
]
