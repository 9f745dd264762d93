"""Tests for snapshot simulation under compound-Gaussian noise."""

import numpy as np
import pytest

from mtmusic.simulate import (
    NOISE_FAMILIES,
    NOISE_STREAM,
    SOURCE_STREAM,
    InvalidShapeError,
    NoiseConfig,
    SnapshotBatch,
    SourceConfig,
    UlaGeometry,
    derive_rng,
    sample_noise,
    sample_sources,
    sample_textures,
    scale_to_gsnr,
    steering_matrix,
    synthesize_snapshots,
)


class TestConfigs:
    def test_geometry_needs_two_sensors(self):
        with pytest.raises(ValueError):
            UlaGeometry(1)

    def test_geometry_needs_positive_spacing(self):
        with pytest.raises(ValueError):
            UlaGeometry(4, 0.0)

    def test_sources_default_unit_powers(self):
        cfg = SourceConfig(doas_deg=(-10.0, 5.0))
        assert cfg.powers == (1.0, 1.0)
        assert cfg.num_sources == 2
        assert not cfg.coherent

    def test_sources_reject_unsorted(self):
        with pytest.raises(ValueError):
            SourceConfig(doas_deg=(5.0, -10.0))

    def test_sources_reject_duplicates(self):
        with pytest.raises(ValueError):
            SourceConfig(doas_deg=(5.0, 5.0))

    def test_sources_reject_out_of_range(self):
        with pytest.raises(ValueError):
            SourceConfig(doas_deg=(0.0, 90.0))

    def test_sources_reject_power_mismatch(self):
        with pytest.raises(ValueError):
            SourceConfig(doas_deg=(0.0, 5.0), powers=(1.0,))

    def test_coherent_needs_matching_attenuations(self):
        with pytest.raises(ValueError):
            SourceConfig(doas_deg=(0.0, 5.0), attenuations=(1.0,))

    def test_coherent_flag(self):
        cfg = SourceConfig(doas_deg=(0.0, 5.0), attenuations=(1.0, 0.5j))
        assert cfg.coherent

    def test_noise_family_whitelist(self):
        with pytest.raises(ValueError):
            NoiseConfig(family="laplace")

    def test_noise_dispersion_positive(self):
        with pytest.raises(ValueError):
            NoiseConfig(family="gaussian", dispersion=0.0)

    def test_k_noise_needs_shape(self):
        with pytest.raises(InvalidShapeError):
            NoiseConfig(family="k")
        with pytest.raises(InvalidShapeError):
            NoiseConfig(family="k", shape=-0.5)

    def test_inverse_gaussian_needs_shape(self):
        with pytest.raises(InvalidShapeError):
            NoiseConfig(family="inverse-gaussian", shape=0.0)

    def test_gaussian_needs_no_shape(self):
        assert NoiseConfig(family="gaussian").shape is None


class TestSteeringMatrix:
    def test_two_sensor_30_degrees(self):
        # sin(30 deg) = 1/2 and half-wavelength spacing give phase -pi/2,
        # so the second sensor response is exactly -i.
        a = steering_matrix(UlaGeometry(2, 0.5), [30.0])
        np.testing.assert_allclose(a[:, 0], [1.0, -1j], atol=1e-12)

    def test_broadside_is_all_ones(self):
        a = steering_matrix(UlaGeometry(6, 0.5), [0.0])
        np.testing.assert_allclose(a[:, 0], np.ones(6))

    def test_first_sensor_is_reference(self):
        a = steering_matrix(UlaGeometry(4, 0.5), [-30.0, 10.0, 55.0])
        np.testing.assert_allclose(a[0], np.ones(3))

    def test_unit_modulus_entries(self):
        a = steering_matrix(UlaGeometry(8, 0.5), [-40.0, 12.5])
        np.testing.assert_allclose(np.abs(a), 1.0)

    def test_full_column_rank_for_distinct_doas(self):
        rng = np.random.default_rng(3)
        geom = UlaGeometry(8, 0.5)
        for _ in range(50):
            doas = np.sort(rng.uniform(-90.0, 89.0, size=4))
            if np.min(np.diff(doas)) < 0.5:
                continue
            s = np.linalg.svd(steering_matrix(geom, doas), compute_uv=False)
            assert s[-1] > 1e-6

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            steering_matrix(UlaGeometry(4), [95.0])


class TestDeriveRng:
    def test_same_key_same_stream(self):
        a = derive_rng((7, 3), SOURCE_STREAM).standard_normal(5)
        b = derive_rng((7, 3), SOURCE_STREAM).standard_normal(5)
        np.testing.assert_array_equal(a, b)

    def test_streams_differ(self):
        a = derive_rng((7, 3), SOURCE_STREAM).standard_normal(5)
        b = derive_rng((7, 3), NOISE_STREAM).standard_normal(5)
        assert not np.array_equal(a, b)

    def test_seeds_differ(self):
        a = derive_rng((7, 3), NOISE_STREAM).standard_normal(5)
        b = derive_rng((7, 4), NOISE_STREAM).standard_normal(5)
        assert not np.array_equal(a, b)


class TestSampleSources:
    def test_noncoherent_symbol_magnitudes(self):
        cfg = SourceConfig(doas_deg=(-5.0, 10.0), powers=(1.0, 4.0))
        s = sample_sources(cfg, 256, derive_rng(1, SOURCE_STREAM))
        assert s.shape == (2, 256)
        np.testing.assert_allclose(np.abs(s[0]), 1.0, atol=1e-12)
        np.testing.assert_allclose(np.abs(s[1]), 2.0, atol=1e-12)

    def test_symbols_live_on_qam_grid(self):
        cfg = SourceConfig(doas_deg=(0.0,))
        s = sample_sources(cfg, 512, derive_rng(2, SOURCE_STREAM))
        # unit-power 4-QAM: both quadratures are +/- 1/sqrt(2)
        np.testing.assert_allclose(np.abs(s.real), np.sqrt(0.5), atol=1e-12)
        np.testing.assert_allclose(np.abs(s.imag), np.sqrt(0.5), atol=1e-12)

    def test_coherent_rank_one(self):
        cfg = SourceConfig(
            doas_deg=(-5.0, 0.0, 10.0),
            attenuations=(0.8, 0.5j, 0.9),
            base_power=2.0,
        )
        s = sample_sources(cfg, 128, derive_rng(3, SOURCE_STREAM))
        sv = np.linalg.svd(s, compute_uv=False)
        assert sv[1] < 1e-12 * sv[0]
        # rows are exact attenuation-scaled copies of one waveform
        np.testing.assert_allclose(s[1] / s[0], 0.5j / 0.8, atol=1e-12)

    def test_rejects_empty_batch(self):
        with pytest.raises(ValueError):
            sample_sources(SourceConfig(doas_deg=(0.0,)), 0, derive_rng(1, 0))


class TestSampleTextures:
    def test_gaussian_is_constant_one(self):
        t = sample_textures(NoiseConfig(family="gaussian"), 100, derive_rng(1, 1))
        np.testing.assert_array_equal(t, np.ones(100))

    def test_all_families_positive(self):
        for family, shape in (
            ("gaussian", None),
            ("cauchy", None),
            ("k", 0.75),
            ("inverse-gaussian", 0.1),
        ):
            cfg = NoiseConfig(family=family, shape=shape)
            t = sample_textures(cfg, 10_000, derive_rng(4, 1))
            assert np.all(t > 0)

    def test_k_texture_mean_one(self):
        cfg = NoiseConfig(family="k", shape=2.0)
        t = sample_textures(cfg, 200_000, derive_rng(5, 1))
        assert abs(t.mean() - 1.0) < 0.02

    def test_inverse_gaussian_texture_mean_one(self):
        cfg = NoiseConfig(family="inverse-gaussian", shape=1.5)
        t = sample_textures(cfg, 200_000, derive_rng(6, 1))
        assert abs(t.mean() - 1.0) < 0.02

    def test_cauchy_texture_median(self):
        # texture = 1 / chi-square(1); chi-square(1) median is 0.4549364
        cfg = NoiseConfig(family="cauchy")
        t = sample_textures(cfg, 200_000, derive_rng(7, 1))
        assert abs(np.median(t) - 1.0 / 0.4549364) < 0.05


class TestSampleNoise:
    def test_gaussian_dispersion_calibration(self):
        cfg = NoiseConfig(family="gaussian", dispersion=2.5)
        w = sample_noise(cfg, 4, 100_000, derive_rng(8, 1))
        scm = w @ w.conj().T / w.shape[1]
        rel = np.linalg.norm(scm - 2.5 * np.eye(4)) / np.linalg.norm(2.5 * np.eye(4))
        assert rel < 0.02

    def test_gaussian_quadrature_split(self):
        cfg = NoiseConfig(family="gaussian", dispersion=2.0)
        w = sample_noise(cfg, 2, 100_000, derive_rng(9, 1))
        assert abs(np.var(w.real) - 1.0) < 0.02
        assert abs(np.var(w.imag) - 1.0) < 0.02

    def test_cauchy_is_heavy_tailed(self):
        gauss = sample_noise(NoiseConfig(family="gaussian"), 3, 20_000, derive_rng(10, 1))
        cauchy = sample_noise(NoiseConfig(family="cauchy"), 3, 20_000, derive_rng(10, 1))
        gn = np.linalg.norm(gauss, axis=0)
        cn = np.linalg.norm(cauchy, axis=0)
        assert np.mean(gn > 10.0 * np.median(gn)) == 0.0
        assert np.mean(cn > 10.0 * np.median(cn)) > 0.005

    def test_shape_and_dtype(self):
        w = sample_noise(NoiseConfig(family="k", shape=1.0), 5, 64, derive_rng(11, 1))
        assert w.shape == (5, 64)
        assert w.dtype == np.complex128


class TestScaleToGsnr:
    def test_noncoherent_identity(self):
        cfg = SourceConfig(doas_deg=(-10.0, 0.0, 20.0), powers=(1.0, 2.0, 4.0))
        noise = NoiseConfig(family="gaussian", dispersion=3.0)
        scaled = scale_to_gsnr(cfg, noise, -6.0)
        mean_power = np.mean(scaled.powers)
        np.testing.assert_allclose(mean_power / 3.0, 10.0 ** (-0.6))

    def test_noncoherent_ratios_preserved(self):
        cfg = SourceConfig(doas_deg=(-10.0, 0.0, 20.0), powers=(1.0, 2.0, 4.0))
        noise = NoiseConfig(family="gaussian")
        scaled = scale_to_gsnr(cfg, noise, 5.0)
        ratios = np.asarray(scaled.powers) / scaled.powers[0]
        np.testing.assert_allclose(ratios, [1.0, 2.0, 4.0])

    def test_coherent_identity(self):
        cfg = SourceConfig(doas_deg=(-5.0, 5.0), attenuations=(0.8, 0.5j))
        noise = NoiseConfig(family="gaussian", dispersion=2.0)
        scaled = scale_to_gsnr(cfg, noise, 3.0)
        powers = scaled.base_power * np.abs(np.asarray(scaled.attenuations)) ** 2
        np.testing.assert_allclose(np.mean(powers) / 2.0, 10.0 ** 0.3)

    def test_zero_gsnr_unit_setup(self):
        cfg = SourceConfig(doas_deg=(0.0,), powers=(7.0,))
        scaled = scale_to_gsnr(cfg, NoiseConfig(family="gaussian"), 0.0)
        np.testing.assert_allclose(scaled.powers, (1.0,))


class TestSynthesizeSnapshots:
    GEOM = UlaGeometry(6, 0.5)
    SOURCES = SourceConfig(doas_deg=(-10.0, 15.0))
    NOISE = NoiseConfig(family="gaussian")

    def test_shape_and_metadata(self):
        batch = synthesize_snapshots(self.GEOM, self.SOURCES, self.NOISE, 0.0, 50, (1, 2))
        assert isinstance(batch, SnapshotBatch)
        assert batch.x.shape == (6, 50)
        assert batch.num_snapshots == 50
        assert batch.seed == (1, 2)
        assert batch.gsnr_db == 0.0

    def test_truth_holds_rescaled_powers(self):
        batch = synthesize_snapshots(self.GEOM, self.SOURCES, self.NOISE, 10.0, 50, 1)
        np.testing.assert_allclose(np.mean(batch.truth.powers), 10.0)

    def test_bitwise_reproducible(self):
        a = synthesize_snapshots(self.GEOM, self.SOURCES, self.NOISE, 0.0, 200, (9, 9))
        b = synthesize_snapshots(self.GEOM, self.SOURCES, self.NOISE, 0.0, 200, (9, 9))
        np.testing.assert_array_equal(a.x, b.x)

    def test_seed_changes_output(self):
        a = synthesize_snapshots(self.GEOM, self.SOURCES, self.NOISE, 0.0, 200, (9, 9))
        b = synthesize_snapshots(self.GEOM, self.SOURCES, self.NOISE, 0.0, 200, (9, 10))
        assert not np.array_equal(a.x, b.x)

    def test_int_seed_normalized_to_tuple(self):
        batch = synthesize_snapshots(self.GEOM, self.SOURCES, self.NOISE, 0.0, 10, 5)
        assert batch.seed == (5,)

    def test_rejects_too_many_sources(self):
        crowded = SourceConfig(doas_deg=tuple(float(d) for d in range(-30, 30, 10)))
        with pytest.raises(ValueError):
            synthesize_snapshots(UlaGeometry(6), crowded, self.NOISE, 0.0, 10, 1)

    def test_signal_subspace_dominates_at_high_gsnr(self):
        batch = synthesize_snapshots(self.GEOM, self.SOURCES, self.NOISE, 20.0, 5000, 3)
        scm = batch.x @ batch.x.conj().T / batch.num_snapshots
        lam = np.linalg.eigvalsh(scm)[::-1]
        # two sources at 20 dB: two eigenvalues well above the unit noise floor
        assert lam[1] > 10.0
        assert lam[2] < 2.0

    def test_every_family_runs(self):
        for family, shape in (
            ("gaussian", None),
            ("cauchy", None),
            ("k", 0.75),
            ("inverse-gaussian", 0.1),
        ):
            noise = NoiseConfig(family=family, shape=shape)
            batch = synthesize_snapshots(self.GEOM, self.SOURCES, noise, 0.0, 32, (0,))
            assert np.all(np.isfinite(batch.x))

    def test_family_registry(self):
        assert NOISE_FAMILIES == ("gaussian", "cauchy", "k", "inverse-gaussian")
