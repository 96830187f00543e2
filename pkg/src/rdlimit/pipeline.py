"""End-to-end R-D limit simulation on images.

One run goes: block transform, clean-latent context residuals, reverse
water-filling over the residual variances, a sequential raster walk that
pushes each residual through the scaled test channel (or a uniform
quantizer), synthesis, and pixel-domain MSE.

Budgets are per-sample mean distortions in the latent domain; the total
budget handed to water-filling is ``budget * number_of_latents``.
"""
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_image, check_scalar, check_seed
from .channel import noise_stream, scaling_factor_array
from .context import ContextModelSpec, fit_context, predict_at, predict_from_clean
from .exceptions import InvalidArgumentError, NumericalError
from .gaussian_rd import DEFAULT_VARIANCE_FLOOR, rate_uniform_array
from .transforms import TransformSpec, analyze, fit_klt, mse, psnr, synthesize
from .waterfill import allocation_rate, reverse_water_fill

QUANTIZERS = ("test_channel", "uniform")
VARIANCE_MODELS = ("channel", "sample")
RECONSTRUCTIONS = ("channel", "mmse")
ABLATION_KEYS = ("baseline_uniform", "optimal_quantizer", "with_context")


@dataclass(frozen=True, eq=False)
class PipelineConfig:
    """Everything that determines one simulated operating point.

    ``variance_model`` picks how each latent's variance is estimated from
    clean residuals: ``"channel"`` uses the mean residual energy of its
    channel, ``"sample"`` uses the sample's own squared residual.
    """

    transform: TransformSpec = field(default_factory=TransformSpec)
    context: ContextModelSpec = field(default_factory=ContextModelSpec)
    quantizer: str = "test_channel"
    budget: float = None
    budget_sweep: tuple = ()
    seed: int = 0
    variance_floor: float = DEFAULT_VARIANCE_FLOOR
    variance_model: str = "sample"
    reconstruction: str = "channel"
    gate_context: bool = True

    def __post_init__(self):
        if self.reconstruction not in RECONSTRUCTIONS:
            raise InvalidArgumentError(f"unknown reconstruction {self.reconstruction!r}")
        if self.quantizer not in QUANTIZERS:
            raise InvalidArgumentError(f"unknown quantizer {self.quantizer!r}")
        if self.variance_model not in VARIANCE_MODELS:
            raise InvalidArgumentError(f"unknown variance model {self.variance_model!r}")
        if self.budget is not None:
            check_scalar(self.budget, "budget", min_value=0.0, include_min=False)
        sweep = tuple(float(b) for b in self.budget_sweep)
        for b in sweep:
            check_scalar(b, "budget", min_value=0.0, include_min=False)
        if any(b1 <= b0 for b0, b1 in zip(sweep, sweep[1:])):
            raise InvalidArgumentError("budget_sweep must be strictly increasing")
        object.__setattr__(self, "budget_sweep", sweep)
        check_seed(self.seed)
        check_scalar(self.variance_floor, "variance_floor", min_value=0.0, include_min=False)

    def to_dict(self):
        """JSON-able description; bases are represented by a content hash."""
        t, c = self.transform, self.context
        return {
            "transform": {
                "kind": t.kind,
                "block_size": t.block_size,
                "basis_sha256": _array_digest(t.basis) if t.kind == "klt" else None,
            },
            "context": {
                "kind": c.kind,
                "neighborhood": [list(o) for o in c.neighborhood],
                "coefficients_sha256": _array_digest(c.coefficients),
            },
            "quantizer": self.quantizer,
            "budget": self.budget,
            "budget_sweep": list(self.budget_sweep),
            "seed": self.seed,
            "variance_floor": self.variance_floor,
            "variance_model": self.variance_model,
            "reconstruction": self.reconstruction,
            "gate_context": self.gate_context,
        }

    def digest(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _array_digest(arr):
    if arr is None:
        return None
    return hashlib.sha256(np.ascontiguousarray(arr, dtype="<f8").tobytes()).hexdigest()


@dataclass(frozen=True)
class RDPoint:
    rate: float
    latent_rate: float
    distortion_mse: float
    psnr_db: float
    budget: float
    config_digest: str = ""
    latent_mse: float = math.nan
    residual_drift: float = 1.0


@dataclass(frozen=True, eq=False)
class RDCurve:
    """Operating points sorted by rate, with dominated points removed."""

    points: tuple

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))

    @classmethod
    def from_points(cls, points):
        ordered = sorted(points, key=lambda p: (p.rate, p.distortion_mse))
        kept = []
        for p in ordered:
            # anything cheaper must also be worse, otherwise p is dominated
            if any(q.rate <= p.rate and q.distortion_mse <= p.distortion_mse
                   and (q.rate < p.rate or q.distortion_mse < p.distortion_mse)
                   for q in ordered):
                continue
            kept.append(p)
        return cls(kept)

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    @property
    def rates(self):
        return np.array([p.rate for p in self.points])

    @property
    def latent_rates(self):
        return np.array([p.latent_rate for p in self.points])

    @property
    def distortions(self):
        return np.array([p.distortion_mse for p in self.points])

    def rate_at(self, distortion, latent=False):
        """Rate at ``distortion`` by linear interpolation in log-distortion.

        Returns NaN outside the curve's distortion range.
        """
        d = np.log(self.distortions)
        r = self.latent_rates if latent else self.rates
        order = np.argsort(d)
        x = np.log(np.asarray(distortion, dtype=np.float64))
        return np.interp(x, d[order], r[order], left=np.nan, right=np.nan)


def _resolve_transform(spec, images):
    if spec.kind == "klt" and spec.basis is None:
        return fit_klt(images, spec.block_size)
    return spec


def _check_stage(arr, stage):
    if not np.all(np.isfinite(arr)):
        raise NumericalError(f"non-finite values after {stage}", stage=stage)


def _variances(clean_residuals, model, floor):
    energy = clean_residuals ** 2
    if model == "channel":
        energy = np.broadcast_to(energy.mean(axis=(1, 2), keepdims=True), energy.shape)
    return np.maximum(energy, floor)


def _walk(latents, spec, code):
    """Sequential raster walk shared by both quantizers.

    ``code(residual, index)`` maps residuals at one raster position (a vector
    over channels) to their reconstructed values. Means are predicted from
    already reconstructed latents only.
    """
    out = np.zeros_like(latents)
    if spec.kind == "none":
        return code(latents, np.s_[:, :, :]), latents
    used = np.empty_like(latents)
    _, h, w = latents.shape
    for r in range(h):
        for c in range(w):
            mu = predict_at(out, r, c, spec)
            res = latents[:, r, c] - mu
            used[:, r, c] = res
            out[:, r, c] = mu + code(res, np.s_[:, r, c])
    return out, used


@dataclass(frozen=True, eq=False)
class _Prepared:
    grid: object
    transform: TransformSpec
    context: ContextModelSpec
    clean_residuals: np.ndarray
    variances: np.ndarray


def _channel_costs(variances, water_level):
    with np.errstate(divide="ignore"):
        bits = 0.5 * np.log2(variances / water_level)
    return np.maximum(bits, 0.0).sum(axis=(1, 2))


def _gate(ctx, latents, clean, config, budget):
    """Drop context on channels where it would not lower the rate.

    Costs are compared at the water level of the context-free allocation.
    """
    v0 = _variances(latents, config.variance_model, config.variance_floor)
    v1 = _variances(clean, config.variance_model, config.variance_floor)
    alpha = reverse_water_fill(v0.ravel(), budget * v0.size).water_level
    keep = _channel_costs(v1, alpha) < _channel_costs(v0, alpha)
    if keep.all():
        return ctx
    return replace(ctx, coefficients=np.where(keep[:, None], ctx.coefficients, 0.0))


def _prepare(image, config, budget):
    image = check_image(image)
    transform = _resolve_transform(config.transform, [image])
    grid = analyze(image, transform)
    _check_stage(grid.coefficients, "analyze")
    ctx = config.context
    if ctx.kind == "causal_lsq" and ctx.coefficients is None:
        ctx = fit_context(grid, ctx)
        if config.gate_context:
            clean = grid.coefficients - predict_from_clean(grid, ctx)
            ctx = _gate(ctx, grid.coefficients, clean, config, budget)
    clean = grid.coefficients - predict_from_clean(grid, ctx)
    _check_stage(clean, "context")
    v = _variances(clean, config.variance_model, config.variance_floor)
    return _Prepared(grid, transform, ctx, clean, v)


def _finish(image, prep, recon_latents, used_residuals, latent_rate, config, budget):
    recon_grid = prep.grid.with_coefficients(recon_latents)
    _check_stage(recon_latents, "channel")
    recon = synthesize(recon_grid, prep.transform)
    distortion = mse(image, recon)
    n = prep.grid.size
    per_pixel = n / float(np.asarray(image).size)
    clean_energy = float(np.mean(prep.clean_residuals ** 2))
    used_energy = float(np.mean(used_residuals ** 2))
    drift = used_energy / clean_energy if clean_energy > 0 else 1.0
    cfg = replace(config, transform=prep.transform, context=prep.context, budget=budget,
                  budget_sweep=())
    return RDPoint(
        rate=latent_rate * per_pixel,
        latent_rate=latent_rate,
        distortion_mse=distortion,
        psnr_db=psnr(distortion),
        budget=budget,
        config_digest=cfg.digest(),
        latent_mse=mse(prep.grid, recon_grid),
        residual_drift=drift,
    )


def _budget_of(config, budget):
    budget = config.budget if budget is None else budget
    if budget is None:
        raise InvalidArgumentError("no budget given")
    return check_scalar(budget, "budget", min_value=0.0, include_min=False)


def simulate_test_channel(image, config, budget=None):
    """Test-channel run; returns ``(RDPoint, details)``.

    ``details`` carries the allocation, the variances, the per-latent gains
    and the realised latent errors for inspection.
    """
    budget = _budget_of(config, budget)
    image = check_image(image)
    prep = _prepare(image, config, budget)
    v = prep.variances
    alloc = reverse_water_fill(v.ravel(), budget * v.size)
    dist = alloc.distortions.reshape(v.shape)
    active = dist < v
    eta = scaling_factor_array(v, dist)
    noise = np.sqrt(dist) * noise_stream(config.seed, v.size).reshape(v.shape)

    gain = eta if config.reconstruction == "mmse" else np.ones_like(eta)

    def code(res, idx):
        return np.where(active[idx], gain[idx] * (eta[idx] * res + noise[idx]), 0.0)

    recon, used = _walk(prep.grid.coefficients, prep.context, code)
    latent_rate = allocation_rate(v.ravel(), alloc)
    point = _finish(image, prep, recon, used, latent_rate, config, budget)
    details = {
        "allocation": alloc,
        "variances": v,
        "distortions": dist,
        "eta": eta,
        "latents": prep.grid.coefficients,
        "reconstruction": recon,
        "residuals": used,
        "context": prep.context,
        "transform": prep.transform,
    }
    return point, details


def uniform_step(budget):
    """Quantizer step whose rounding-noise variance equals ``budget``."""
    return math.sqrt(12.0 * budget)


def simulate_uniform(image, config, budget=None):
    """Uniform scalar quantization run; returns ``(RDPoint, details)``.

    Residuals are rounded on a grid of step ``sqrt(12*budget)`` (unit step at
    ``budget = 1/12``). The rate of each sample is the negative log mass of
    the step-wide bin centred on it under ``N(0, var)``, where ``var``
    follows the configured variance model on clean residuals.
    """
    budget = _budget_of(config, budget)
    image = check_image(image)
    prep = _prepare(image, config, budget)
    step = uniform_step(budget)

    def code(res, idx):
        return step * np.round(res / step)

    recon, used = _walk(prep.grid.coefficients, prep.context, code)
    bits = rate_uniform_array(used, config.variance_floor, step, variances=prep.variances)
    latent_rate = float(bits.mean())
    point = _finish(image, prep, recon, used, latent_rate, config, budget)
    return point, {"bits": bits, "reconstruction": recon, "residuals": used,
                   "variances": prep.variances, "latents": prep.grid.coefficients,
                   "step": step}


def run_once(image, config, budget=None):
    """Simulate one operating point with the configured quantizer."""
    if config.quantizer == "uniform":
        return simulate_uniform(image, config, budget)[0]
    return simulate_test_channel(image, config, budget)[0]


def uniform_baseline(image, config, budget=None):
    """Uniform-quantization counterpart of :func:`run_once`."""
    if config.quantizer != "uniform":
        raise InvalidArgumentError("uniform_baseline needs quantizer='uniform'")
    return simulate_uniform(image, config, budget)[0]


def run_sweep(images, config, budgets=None):
    """Average rate and distortion over ``images`` for each budget.

    A KLT without a basis is fitted once on all images. Returns an
    :class:`RDCurve` (sorted, dominance-pruned).
    """
    if isinstance(images, np.ndarray) and images.ndim == 2:
        images = [images]
    images = [check_image(im) for im in images]
    if not images:
        raise InvalidArgumentError("need at least one image")
    budgets = tuple(config.budget_sweep if budgets is None else budgets)
    if len(budgets) < 2:
        raise InvalidArgumentError("a sweep needs at least two budgets")
    config = replace(config, transform=_resolve_transform(config.transform, images),
                     budget_sweep=budgets)
    points = []
    for b in config.budget_sweep:
        runs = [run_once(im, config, b) for im in images]
        d = float(np.mean([p.distortion_mse for p in runs]))
        points.append(RDPoint(
            rate=float(np.mean([p.rate for p in runs])),
            latent_rate=float(np.mean([p.latent_rate for p in runs])),
            distortion_mse=d,
            psnr_db=psnr(d),
            budget=b,
            config_digest=config.digest(),
            latent_mse=float(np.mean([p.latent_mse for p in runs])),
            residual_drift=float(np.mean([p.residual_drift for p in runs])),
        ))
    return RDCurve.from_points(points)


def ablation_configs(base):
    """The three component configurations compared by :func:`component_ablation`."""
    none = ContextModelSpec("none", base.context.neighborhood)
    lsq = ContextModelSpec("causal_lsq", base.context.neighborhood)
    return {
        "baseline_uniform": replace(base, quantizer="uniform", context=none),
        "optimal_quantizer": replace(base, quantizer="test_channel", context=none),
        "with_context": replace(base, quantizer="test_channel", context=lsq),
    }


def component_ablation(image, base, budgets=None):
    """R-D curves of uniform quantization, the test channel, and test channel plus context.

    All three share the image, transform, budgets and seed.
    """
    images = [image] if isinstance(image, np.ndarray) and image.ndim == 2 else list(image)
    base = replace(base, transform=_resolve_transform(base.transform, images))
    return {name: run_sweep(images, cfg, budgets)
            for name, cfg in ablation_configs(base).items()}


def matched_rates(curves, num=25, latent=True):
    """Rates of several curves on a shared log-spaced distortion grid.

    The grid spans the distortion range common to all curves. Returns
    ``(distortions, {name: rates})``.
    """
    lows = [c.distortions.min() for c in curves.values()]
    highs = [c.distortions.max() for c in curves.values()]
    lo, hi = max(lows), min(highs)
    if not lo < hi:
        raise InvalidArgumentError("curves share no distortion range")
    grid = np.geomspace(lo, hi, num)
    return grid, {k: c.rate_at(grid, latent=latent) for k, c in curves.items()}


class RDLimitSimulator(BaseEstimator):
    """Estimator-style front end to the simulation.

    ``fit`` resolves data-dependent pieces (a KLT basis) on training images;
    ``simulate`` and ``sweep`` then run the pipeline with fixed parameters.

    Parameters
    ----------
    transform : {"identity", "dct", "klt"}
    block_size : int
    context : {"none", "causal_average", "causal_lsq"}
    quantizer : {"test_channel", "uniform"}
    budget : float, optional
        Per-latent mean distortion used when ``simulate`` gets no budget.
    variance_model : {"channel", "sample"}
    variance_floor : float
    seed : int
    """

    def __init__(self, transform="dct", block_size=8, context="none",
                 quantizer="test_channel", budget=None, variance_model="sample",
                 variance_floor=DEFAULT_VARIANCE_FLOOR, seed=0):
        self.transform = transform
        self.block_size = block_size
        self.context = context
        self.quantizer = quantizer
        self.budget = budget
        self.variance_model = variance_model
        self.variance_floor = variance_floor
        self.seed = seed

    def fit(self, X, y=None):
        images = [X] if isinstance(X, np.ndarray) and X.ndim == 2 else list(X)
        if self.transform == "klt":
            t = fit_klt(images, self.block_size)
        else:
            t = TransformSpec(self.transform, self.block_size)
        self.config_ = PipelineConfig(
            transform=t,
            context=ContextModelSpec(self.context),
            quantizer=self.quantizer,
            budget=self.budget,
            seed=self.seed,
            variance_floor=self.variance_floor,
            variance_model=self.variance_model,
        )
        return self

    def simulate(self, image, budget=None):
        check_is_fitted(self, "config_")
        return run_once(image, self.config_, budget)

    def sweep(self, images, budgets):
        check_is_fitted(self, "config_")
        return run_sweep(images, self.config_, budgets)

    def score(self, X, y=None):
        """Negative mean rate (bpp) at the configured budget; higher is better."""
        images = [X] if isinstance(X, np.ndarray) and X.ndim == 2 else list(X)
        return -float(np.mean([self.simulate(im).rate for im in images]))


__all__ = [
    "PipelineConfig",
    "RDPoint",
    "RDCurve",
    "RDLimitSimulator",
    "run_once",
    "run_sweep",
    "uniform_baseline",
    "component_ablation",
    "ablation_configs",
    "matched_rates",
    "simulate_test_channel",
    "simulate_uniform",
    "uniform_step",
]
