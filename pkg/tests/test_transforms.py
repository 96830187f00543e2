import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rdlimit.exceptions import InvalidArgumentError
from rdlimit.synthetic import SyntheticSourceSpec, generate_source
from rdlimit.transforms import (BlockTransform, LatentGrid, TransformSpec, analyze,
                                dct_basis, fit_klt, is_orthonormal, mse, psnr, synthesize)


def naive_dct_atom(u, v, b):
    # textbook DCT-II atom, independent of scipy
    def c(k):
        return np.sqrt(1.0 / b) if k == 0 else np.sqrt(2.0 / b)
    n = np.arange(b)
    cu = c(u) * np.cos(np.pi * (2 * n + 1) * u / (2 * b))
    cv = c(v) * np.cos(np.pi * (2 * n + 1) * v / (2 * b))
    return np.outer(cu, cv).ravel()


class TestDCT:
    @pytest.mark.parametrize("b", [1, 2, 4, 8, 16])
    def test_orthonormal(self, b):
        assert is_orthonormal(dct_basis(b))

    def test_matches_textbook_atoms(self):
        basis = dct_basis(4)
        for u in range(4):
            for v in range(4):
                np.testing.assert_allclose(basis[u * 4 + v], naive_dct_atom(u, v, 4), atol=1e-14)

    def test_constant_block_energy_in_dc(self):
        img = np.full((16, 16), 0.37)
        grid = analyze(img, TransformSpec("dct", 8))
        np.testing.assert_allclose(grid.coefficients[0], 0.37 * 8, rtol=1e-14)
        assert np.abs(grid.coefficients[1:]).max() < 1e-13

    def test_rejects_bad_block(self):
        with pytest.raises(InvalidArgumentError):
            TransformSpec("dct", 6)
        with pytest.raises(InvalidArgumentError):
            TransformSpec("wavelet", 8)

    def test_rejects_non_orthonormal_basis(self):
        with pytest.raises(InvalidArgumentError):
            TransformSpec("klt", 2, 2 * np.eye(4))


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 20), st.integers(1, 20)),
              elements=st.floats(-1e3, 1e3)),
       st.sampled_from(["identity", "dct"]), st.sampled_from([1, 2, 4, 8]))
def test_round_trip(img, kind, b):
    spec = TransformSpec(kind, b)
    out = synthesize(analyze(img, spec), spec)
    assert out.shape == img.shape
    np.testing.assert_allclose(out, img, rtol=0, atol=1e-10 * max(1.0, np.abs(img).max()))


def test_parseval_on_divisible_shapes(rng):
    img = rng.random((32, 24))
    for spec in (TransformSpec("identity"), TransformSpec("dct", 8)):
        grid = analyze(img, spec)
        assert np.sum(grid.coefficients ** 2) == pytest.approx(np.sum(img ** 2), rel=1e-12)
        noisy = grid.with_coefficients(grid.coefficients + 0.01 * rng.standard_normal(grid.shape))
        assert mse(synthesize(noisy, spec), img) * img.size == pytest.approx(
            mse(noisy, grid) * grid.size, rel=1e-10)


def test_padding_is_symmetric(rng):
    img = rng.random((10, 13))
    spec = TransformSpec("dct", 8)
    grid = analyze(img, spec)
    assert grid.shape == (64, 2, 2)
    assert grid.image_shape == (10, 13)


def test_identity_single_channel(rng):
    img = rng.random((5, 7))
    grid = analyze(img, TransformSpec("identity", 8))
    assert grid.shape == (1, 5, 7)
    np.testing.assert_array_equal(grid.coefficients[0], img)


class TestKLT:
    def test_decorrelates_ar1(self):
        field = generate_source(SyntheticSourceSpec("ar1_field", 256, 256, 1.0, 0.9, seed=3))
        spec = fit_klt(field, 4)
        assert is_orthonormal(spec.basis)
        coeffs = analyze(field, spec).coefficients.reshape(16, -1)
        corr = np.corrcoef(coeffs)
        off = corr - np.diag(np.diag(corr))
        assert np.abs(off).max() < 0.05
        energy = np.mean(coeffs ** 2, axis=1)
        assert np.all(np.diff(energy) <= 1e-12 + 1e-6 * energy[0])

    def test_sign_convention_and_determinism(self, rng):
        imgs = [rng.random((32, 32)) for _ in range(3)]
        a, b = fit_klt(imgs, 4), fit_klt(imgs, 4)
        np.testing.assert_array_equal(a.basis, b.basis)
        for row in a.basis:
            assert row[np.argmax(np.abs(row))] > 0

    def test_rank_deficient_completion(self):
        img = np.tile(np.arange(16.0), (16, 1))  # every block identical up to an offset row
        with pytest.warns(RuntimeWarning):
            spec = fit_klt(img, 4)
        assert spec.rank_deficient
        assert is_orthonormal(spec.basis)
        np.testing.assert_allclose(synthesize(analyze(img, spec), spec), img, atol=1e-10)

    def test_full_rank_no_warning(self, rng):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            spec = fit_klt(rng.random((64, 64)), 4)
        assert not spec.rank_deficient

    def test_unfitted_spec_refused(self, rng):
        with pytest.raises(InvalidArgumentError):
            analyze(rng.random((8, 8)), TransformSpec("klt", 4))

    def test_too_few_blocks(self, rng):
        with pytest.raises(InvalidArgumentError):
            fit_klt(rng.random((8, 8)), 4)


def test_psnr():
    assert psnr(0.0) == np.inf
    assert psnr(0.01) == pytest.approx(20.0)
    assert psnr(1.0, peak=255.0) == pytest.approx(20 * np.log10(255))


def test_latent_grid_shape_guard(rng):
    grid = analyze(rng.random((8, 8)), TransformSpec("dct", 4))
    with pytest.raises(InvalidArgumentError):
        grid.with_coefficients(np.zeros((3, 3)))
    assert isinstance(grid, LatentGrid)


class TestEstimator:
    def test_params_and_round_trip(self, rng):
        img = rng.random((32, 32))
        est = BlockTransform(kind="klt", block_size=4).fit([img])
        assert est.get_params() == {"kind": "klt", "block_size": 4, "basis": None}
        np.testing.assert_allclose(est.inverse_transform(est.transform(img)), img, atol=1e-10)

    def test_unfitted(self, rng):
        from sklearn.exceptions import NotFittedError
        with pytest.raises(NotFittedError):
            BlockTransform().transform(rng.random((8, 8)))
