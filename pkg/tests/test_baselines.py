import numpy as np
import pytest

from conftest import exact_covariance, stft_band_frequencies
from wbdoa import (
    CssConfig,
    HistogramConfig,
    css_localize,
    hist_esprit,
    narrowband_esprit,
    steering_matrix,
    wideband_esprit_multi,
)
from wbdoa.baselines import CssFocuser
from wbdoa.spectral import BinCovariance


class TestHistEsprit:
    def test_config_validation(self):
        with pytest.raises(ValueError):
            HistogramConfig(bin_width=0.0)
        with pytest.raises(ValueError):
            HistogramConfig(bin_width=2.0, min_peak_separation=1.0)

    def test_noiseless_two_sources(self, geom):
        freqs = stft_band_frequencies()
        covs = [exact_covariance(geom, f, [-45.0, 45.0]) for f in freqs]
        result = hist_esprit(covs, 2, geom)
        assert not result.insufficient_peaks
        assert np.allclose(result.doas, [-45.0, 45.0], atol=0.5)

    def test_single_source_close_to_median_of_bins(self, geom):
        freqs = stft_band_frequencies()[:80]
        covs = [exact_covariance(geom, f, [17.0], noise_power=0.01) for f in freqs]
        result = hist_esprit(covs, 1, geom)
        per_bin = [narrowband_esprit(c, 1, geom).doas[0] for c in covs]
        assert result.doas[0] == pytest.approx(np.median(per_bin), abs=1.0)

    def test_bin_order_invariance(self, geom):
        freqs = stft_band_frequencies()[:60]
        covs = [
            exact_covariance(geom, f, [-30.0, 40.0], noise_power=0.02)
            for f in freqs
        ]
        fwd = hist_esprit(covs, 2, geom)
        rev = hist_esprit(covs[::-1], 2, geom)
        assert np.allclose(fwd.doas, rev.doas, atol=1e-12)

    def test_all_bins_flagged_gives_insufficient(self, geom):
        # aliased content: every bin's implied sine exceeds 1
        hot = exact_covariance(geom, 5000.0, [80.0])
        covs = [BinCovariance(2500.0, hot.matrix, 1)]
        result = hist_esprit(covs, 1, geom)
        assert result.insufficient_peaks
        assert result.doas.size == 0


class TestCss:
    def test_config_validation(self):
        with pytest.raises(ValueError):
            CssConfig(grid_resolution=0.0)

    def test_focusing_matrices_unitary(self, geom):
        init = np.array([-45.0, 45.0])
        f_ref = 3796.875
        a_ref = steering_matrix(geom, f_ref, init)
        for f in (500.0, 1500.0, 3000.0):
            a_bin = steering_matrix(geom, f, init)
            v, _, wh = np.linalg.svd(a_ref @ a_bin.conj().T)
            t = v @ wh
            assert np.linalg.norm(t.conj().T @ t - np.eye(5)) < 1e-10

    def test_noiseless_two_sources_exact_init(self, geom):
        freqs = stft_band_frequencies()
        covs = [exact_covariance(geom, f, [-45.0, 45.0]) for f in freqs]
        result = css_localize(
            covs, 2, geom, CssConfig(initial_doas=(-45.0, 45.0))
        )
        assert not result.insufficient_peaks
        assert np.allclose(result.doas, [-45.0, 45.0], atol=0.1)

    def test_auto_init_noiseless(self, geom):
        freqs = stft_band_frequencies()
        covs = [exact_covariance(geom, f, [-45.0, 45.0]) for f in freqs]
        result = css_localize(covs, 2, geom)
        assert np.allclose(result.doas, [-45.0, 45.0], atol=0.5)

    def test_grid_resolution_default_is_tenth_degree(self):
        assert CssConfig().grid_resolution == pytest.approx(0.1)

    def test_focused_covariance_hermitian_psd(self, geom):
        freqs = stft_band_frequencies()[:40]
        covs = [
            exact_covariance(geom, f, [-45.0, 45.0], noise_power=0.01)
            for f in freqs
        ]
        init = np.array([-45.0, 45.0])
        f_ref = freqs[-1]
        a_ref = steering_matrix(geom, f_ref, init)
        focused = np.zeros((5, 5), dtype=complex)
        for cov in covs:
            a_bin = steering_matrix(geom, cov.frequency, init)
            v, _, wh = np.linalg.svd(a_ref @ a_bin.conj().T)
            t = v @ wh
            focused += t @ cov.matrix @ t.conj().T
        assert np.allclose(focused, focused.conj().T, atol=1e-10)
        evals = np.linalg.eigvalsh(focused)
        assert evals.min() >= -1e-10 * np.trace(focused).real

    def test_focuser_reuses_transforms(self, geom):
        freqs = stft_band_frequencies()[:50]
        covs = [exact_covariance(geom, f, [30.0], noise_power=0.01) for f in freqs]
        focuser = CssFocuser(geom, 1)
        first = focuser.localize(covs)
        second = focuser.localize(covs)
        assert np.allclose(first.doas, second.doas, atol=1e-12)
        assert first.doas[0] == pytest.approx(30.0, abs=0.2)


class TestCrossMethodAgreement:
    def test_baselines_agree_on_clean_two_source_scene(self, geom):
        freqs = stft_band_frequencies()
        covs = [
            exact_covariance(geom, f, [-45.0, 45.0], noise_power=1e-6)
            for f in freqs
        ]
        hist = hist_esprit(covs, 2, geom)
        css = css_localize(covs, 2, geom)
        assert np.allclose(hist.doas, css.doas, atol=0.5)
        assert np.allclose(hist.doas, [-45.0, 45.0], atol=0.5)

    @pytest.mark.xfail(
        strict=True,
        reason=(
            "the accumulated-covariance estimator carries the multi-source "
            "mixing error on exact covariances and misses the 0.5 deg "
            "cross-method agreement bound for two sources"
        ),
    )
    def test_proposed_agrees_with_baselines_two_sources(self, geom):
        freqs = stft_band_frequencies()
        covs = [
            exact_covariance(geom, f, [-45.0, 45.0], noise_power=1e-6)
            for f in freqs
        ]
        hist = hist_esprit(covs, 2, geom)
        proposed = wideband_esprit_multi(covs, 2, geom)
        assert np.allclose(proposed.doas, hist.doas, atol=0.5)

    def test_proposed_agrees_with_baselines_single_source(self, geom):
        freqs = stft_band_frequencies()
        covs = [
            exact_covariance(geom, f, [25.0], noise_power=1e-6) for f in freqs
        ]
        hist = hist_esprit(covs, 1, geom)
        css = css_localize(covs, 1, geom)
        proposed = wideband_esprit_multi(covs, 1, geom)
        assert abs(proposed.doas[0] - hist.doas[0]) < 0.5
        assert abs(proposed.doas[0] - css.doas[0]) < 0.5
