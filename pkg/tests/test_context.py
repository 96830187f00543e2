import numpy as np
import pytest

from rdlimit.context import (ContextModel, ContextModelSpec, fit_context, is_causal,
                             predict_at, predict_from_clean, predict_mean, residual_rate,
                             residuals)
from rdlimit.exceptions import InvalidArgumentError
from rdlimit.synthetic import SyntheticSourceSpec, generate_source


def ar1(a=0.9, size=256, seed=0):
    return generate_source(SyntheticSourceSpec("ar1_field", size, size, 1.0, a, seed))


def test_causality():
    assert is_causal((0, -1)) and is_causal((-1, 5)) and is_causal((-2, 0))
    assert not is_causal((0, 0)) and not is_causal((0, 1)) and not is_causal((1, -3))
    with pytest.raises(InvalidArgumentError):
        ContextModelSpec("causal_average", ((0, 1),))
    with pytest.raises(InvalidArgumentError):
        ContextModelSpec("causal_average", ())
    with pytest.raises(InvalidArgumentError):
        ContextModelSpec("oracle")


def test_none_predicts_zero(rng):
    x = rng.standard_normal((3, 6, 6))
    spec = ContextModelSpec("none")
    assert np.all(predict_from_clean(x, spec) == 0)
    assert predict_mean(x, (1, 3, 3), spec) == 0.0


def test_average_constant_channel():
    x = np.full((1, 5, 5), 2.5)
    spec = ContextModelSpec("causal_average")
    pred = predict_from_clean(x, spec)
    assert pred[0, 0, 0] == 0.0  # no causal neighbour at the origin
    np.testing.assert_allclose(pred[0].ravel()[1:], 2.5)


def test_sequential_matches_vectorised(rng):
    x = rng.standard_normal((2, 7, 9))
    spec = fit_context(x, ContextModelSpec("causal_lsq", ((0, -1), (-1, 0), (-1, -1), (-1, 1))))
    full = predict_from_clean(x, spec)
    for r in range(7):
        for c in range(9):
            np.testing.assert_allclose(predict_at(x, r, c, spec), full[:, r, c], atol=1e-14)
    avg = ContextModelSpec("causal_average", spec.neighborhood)
    fa = predict_from_clean(x, avg)
    for r in range(7):
        for c in range(9):
            np.testing.assert_allclose(predict_at(x, r, c, avg), fa[:, r, c], atol=1e-14)


@pytest.mark.parametrize("kind", ["causal_average", "causal_lsq"])
def test_prediction_never_reads_future(rng, kind):
    x = rng.standard_normal((2, 6, 6))
    nb = ((0, -1), (-1, 0), (-1, 1), (-2, -1))
    spec = ContextModelSpec(kind, nb)
    if kind == "causal_lsq":
        spec = fit_context(rng.standard_normal((2, 12, 12)), spec)
    for r in range(6):
        for c in range(6):
            poisoned = x.copy()
            flat = poisoned.reshape(2, -1)
            flat[:, r * 6 + c:] = 1e300  # current and later positions
            p = predict_at(poisoned, r, c, spec)
            np.testing.assert_array_equal(p, predict_at(x, r, c, spec))


def test_ar1_single_neighbour_weight():
    x = ar1()
    spec = fit_context(x, ContextModelSpec("causal_lsq", ((0, -1),)))
    assert spec.coefficients[0, 0] == pytest.approx(0.9, abs=0.05)
    energy = np.mean(residuals(x, spec).residuals[0, :, 1:] ** 2)
    assert energy == pytest.approx(1 - 0.81, rel=0.1)


def test_ar1_two_neighbour_weights():
    # left and up are each correlated a with x and a^2 with each other
    x = ar1()
    spec = fit_context(x, ContextModelSpec("causal_lsq"))
    np.testing.assert_allclose(spec.coefficients[0], 0.9 / 1.81, atol=0.05)
    energy = np.mean(residuals(x, spec).residuals[0, 1:, 1:] ** 2)
    assert energy == pytest.approx(0.19 / 1.81, rel=0.1)


def test_white_noise_weights_vanish():
    x = generate_source(SyntheticSourceSpec("iid_gaussian", 256, 256, seed=5))
    spec = fit_context(x, ContextModelSpec("causal_lsq"))
    assert np.abs(spec.coefficients).max() < 0.02


def test_zero_channel_gets_zero_weights(rng):
    x = np.zeros((2, 8, 8))
    x[1] = rng.standard_normal((8, 8))
    spec = fit_context(x, ContextModelSpec("causal_lsq"))
    assert np.all(spec.coefficients[0] == 0)


def test_fit_needs_interior(rng):
    with pytest.raises(InvalidArgumentError):
        fit_context(rng.standard_normal((1, 2, 2)), ContextModelSpec("causal_lsq"))


def test_lsq_without_weights(rng):
    with pytest.raises(InvalidArgumentError):
        predict_from_clean(rng.standard_normal((1, 4, 4)), ContextModelSpec("causal_lsq"))


def test_residual_rate():
    assert residual_rate(0.19, 1 / 12) == pytest.approx(0.5945169121950, rel=1e-12)
    assert residual_rate(0.05, 0.1) == 0.0


def test_estimator(rng):
    x = ar1(size=64)
    m = ContextModel().fit(x)
    assert m.get_params()["kind"] == "causal_lsq"
    res = m.residuals(x)
    np.testing.assert_allclose(res.residuals + res.predicted_means, x[None])
    np.testing.assert_allclose(m.predict(x), res.predicted_means)
