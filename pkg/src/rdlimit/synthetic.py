"""Synthetic Gaussian test fields."""
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from ._validation import check_scalar, check_seed
from .channel import SOURCE_STREAM, substream
from .exceptions import InvalidArgumentError

SOURCE_KINDS = ("iid_gaussian", "ar1_field")


@dataclass(frozen=True)
class SyntheticSourceSpec:
    kind: str = "iid_gaussian"
    width: int = 128
    height: int = 128
    variance: float = 1.0
    ar_coefficient: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in SOURCE_KINDS:
            raise InvalidArgumentError(f"unknown source kind {self.kind!r}")
        if int(self.width) < 1 or int(self.height) < 1:
            raise InvalidArgumentError("width and height must be positive")
        check_scalar(self.variance, "variance", min_value=0.0, include_min=False)
        check_scalar(self.ar_coefficient, "ar_coefficient", min_value=-1.0, max_value=1.0,
                     include_min=False, include_max=False)
        check_seed(self.seed)


def generate_source(spec):
    """Draw a synthetic field as a ``(height, width)`` float array.

    ``ar1_field`` is the separable first-order Markov field: white noise
    filtered by ``1 / (1 - a z^-1)`` along rows and then columns, with the
    innovation variance ``variance * (1 - a^2)^2`` giving a stationary
    marginal of ``variance``. The recursion is started from its stationary
    distribution, so the first row/column are not transient. With ``a = 0``
    it reduces to the i.i.d. field drawn from the same stream. Draws come
    from the source substream of ``seed``, independent of the channel noise
    of a run using the same seed.
    """
    rng = substream(spec.seed, SOURCE_STREAM)
    h, w = int(spec.height), int(spec.width)
    noise = rng.standard_normal((h, w))
    if spec.kind == "iid_gaussian":
        return np.sqrt(spec.variance) * noise
    a = float(spec.ar_coefficient)
    s = np.sqrt(1.0 - a * a)
    # scale first row/column so each 1-D recursion starts stationary
    e = noise.copy()
    e[:, 0] /= s
    e[0, :] /= s
    field = lfilter([1.0], [1.0, -a], e, axis=1)
    field = lfilter([1.0], [1.0, -a], field, axis=0)
    return np.sqrt(spec.variance) * s * s * field
