import math

import numpy as np
import pytest
from scipy.optimize import brentq

from rdlimit.channel import (ChannelParams, apply_channel, mc_mutual_information,
                             noise_stream, per_sample_distortion, sample_variance_estimate,
                             scaling_factor)
from rdlimit.exceptions import InvalidArgumentError


def mi_closed_form(eta, var, d):
    return 0.5 * math.log2((eta**2 * var + d) / d)


class TestScalingFactor:
    def test_identity_and_boundary(self):
        assert scaling_factor(1, 0) == 1.0
        assert scaling_factor(1, 1) == 0.0
        assert scaling_factor(1, 2) == 0.0

    def test_quarter(self):
        # the gain that makes the channel carry exactly one bit
        root = brentq(lambda e: mi_closed_form(e, 1.0, 0.25) - 1.0, 0.0, 1.0, xtol=1e-15)
        assert scaling_factor(1, 0.25) == pytest.approx(root, abs=1e-12)
        assert scaling_factor(1, 0.25) == pytest.approx(0.8660254037844386, rel=1e-15)

    def test_invalid(self):
        with pytest.raises(InvalidArgumentError):
            scaling_factor(0, 0.1)

    def test_variance_preservation(self):
        for v, d in [(1, 0.25), (4, 3.9), (10, 1e-3)]:
            p = ChannelParams(v, d)
            assert p.eta**2 * v + d == pytest.approx(v, rel=1e-12)


class TestApplyChannel:
    def test_noiseless_is_identity(self, rng):
        x = rng.standard_normal(100)
        out = apply_channel(x, ChannelParams(1.0, 0.0), seed=3).outputs
        np.testing.assert_array_equal(out, x)

    def test_suppressed_outputs_zero(self, rng):
        x = rng.standard_normal(100)
        r = apply_channel(x, ChannelParams(1.0, 1.0), seed=3)
        assert np.all(r.outputs == 0.0)

    def test_output_variance(self, rng):
        x = rng.standard_normal(10**6)
        r = apply_channel(x, ChannelParams(1.0, 0.25), seed=11)
        est = sample_variance_estimate(r.outputs)
        assert est.within(1.0, 3.0)

    def test_deterministic_and_indexed(self, rng):
        x = rng.standard_normal(1000)
        p = ChannelParams(2.0, 0.5)
        a = apply_channel(x, p, seed=7).outputs
        b = apply_channel(x, p, seed=7).outputs
        np.testing.assert_array_equal(a, b)
        # sample i only depends on input i and draw i
        head = apply_channel(x[:10], p, seed=7).outputs
        np.testing.assert_array_equal(head, a[:10])
        noise = noise_stream(7, 1000)
        np.testing.assert_allclose(a, p.eta * x + math.sqrt(0.5) * noise, rtol=0, atol=0)

    def test_mse_matches_per_sample_distortion(self, rng):
        x = rng.standard_normal(10**6)
        p = ChannelParams(1.0, 0.25)
        err = apply_channel(x, p, seed=5).squared_errors
        se = err.std() / math.sqrt(err.size)
        assert abs(err.mean() - per_sample_distortion(p)) < 3 * se


class TestPerSampleDistortion:
    def test_values(self):
        assert per_sample_distortion(ChannelParams(1.0, 0.0)) == 0.0
        assert per_sample_distortion(ChannelParams(1.0, 0.25)) == pytest.approx(
            0.2679491924311227, rel=1e-14)
        assert per_sample_distortion(ChannelParams(1.0, 1.0)) == 1.0
        assert per_sample_distortion(ChannelParams(1.0, 3.0)) == 1.0

    @pytest.mark.parametrize("d", [0.01, 0.3, 0.7, 0.99])
    def test_at_least_allocated_distortion(self, d):
        assert per_sample_distortion(ChannelParams(1.0, d)) > d


class TestMutualInformation:
    @pytest.mark.parametrize("var,d", [(1.0, 0.25), (4.0, 1.0), (2.0, 0.01)])
    def test_matches_rate(self, var, d):
        est = mc_mutual_information(var, d, 10**6, seed=1)
        assert est.within(0.5 * math.log2(var / d), 3.0)
        assert 0 < est.stderr < 0.01

    def test_near_boundary(self):
        est = mc_mutual_information(1.0, 0.999, 10**5, seed=2)
        assert abs(est.value) < 0.01

    def test_too_few_samples(self):
        with pytest.raises(InvalidArgumentError):
            mc_mutual_information(1.0, 0.5, 100)

    def test_deterministic(self):
        a = mc_mutual_information(1.0, 0.5, 10**4, seed=9)
        b = mc_mutual_information(1.0, 0.5, 10**4, seed=9)
        assert a == b
