import logging

import numpy as np
import pytest

from conftest import exact_covariance, principal_angles, stft_band_frequencies
from wbdoa import (
    DegenerateSubspaceError,
    RotatedSubspace,
    accumulate_iterative,
    accumulate_single_source,
    accumulate_wideband,
    bin_weight,
    decompose,
    reconstruct_covariance,
    rotate_subspace,
    steering_vector,
    wideband_signal_subspace,
)
from wbdoa.spectral import BinCovariance
from wbdoa.subspace import WidebandCovariance


def random_psd(rng, p=5):
    m = rng.standard_normal((p, p)) + 1j * rng.standard_normal((p, p))
    return m @ m.conj().T / p


class TestDecompose:
    def test_identity_matrix(self):
        cov = BinCovariance(1000.0, np.eye(5, dtype=complex), 1)
        est = decompose(cov, 1)
        assert est.signal_values[0] == pytest.approx(1.0)
        assert np.linalg.norm(est.signal_vectors[:, 0]) == pytest.approx(1.0)
        # gauge: first non-negligible element real positive
        lead = est.signal_vectors[np.flatnonzero(
            np.abs(est.signal_vectors[:, 0]) > 1e-9)[0], 0]
        assert lead.real > 0 and abs(lead.imag) < 1e-12

    def test_rank_one_plus_identity_closed_form(self, geom):
        a = steering_vector(geom, 1500.0, 25.0)
        cov = BinCovariance(
            1500.0, np.outer(a, np.conj(a)) + 0.1 * np.eye(5), 1
        )
        est = decompose(cov, 1)
        assert est.signal_values[0] == pytest.approx(5.1, abs=1e-9)
        cosine = abs(np.vdot(est.signal_vectors[:, 0], a / np.sqrt(5)))
        assert cosine == pytest.approx(1.0, abs=1e-12)
        assert np.allclose(est.noise_values, 0.1, atol=1e-9)

    def test_eigenvalue_sum_equals_trace(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            m = random_psd(rng)
            est = decompose(BinCovariance(1000.0, m, 1), 2)
            total = est.signal_values.sum() + est.noise_values.sum()
            assert total == pytest.approx(np.trace(m).real, rel=1e-9)

    def test_descending_order_and_unitary_basis(self, geom):
        cov = exact_covariance(geom, 2000.0, [-30.0, 50.0], [2.0, 1.0],
                               noise_power=0.05)
        est = decompose(cov, 2)
        values = np.concatenate([est.signal_values, est.noise_values])
        assert np.all(np.diff(values) <= 1e-12)
        basis = np.hstack([est.signal_vectors, est.noise_vectors])
        assert np.allclose(basis.conj().T @ basis, np.eye(5), atol=1e-8)

    def test_rejects_non_hermitian(self):
        m = np.eye(5, dtype=complex)
        m[0, 1] = 1.0  # no conjugate partner
        with pytest.raises(ValueError):
            decompose(BinCovariance(1000.0, m, 1), 1)

    def test_rejects_bad_order(self):
        cov = BinCovariance(1000.0, np.eye(5, dtype=complex), 1)
        with pytest.raises(ValueError):
            decompose(cov, 0)
        with pytest.raises(ValueError):
            decompose(cov, 5)


class TestRotate:
    def test_identity_rotation_exact(self, geom):
        est = decompose(exact_covariance(geom, 1000.0, [33.0]), 1)
        rot = rotate_subspace(est, 1000.0)
        assert np.array_equal(rot.vectors, est.signal_vectors)

    def test_phase_tripling(self):
        vec = np.array([[1.0], [np.exp(-1j * np.pi / 4)]])
        est = _manual_estimate(1000.0, vec, np.array([1.0]))
        rot = rotate_subspace(est, 3000.0)
        assert rot.vectors[1, 0] == pytest.approx(np.exp(-3j * np.pi / 4), abs=1e-12)

    def test_magnitudes_preserved(self, geom):
        cov = exact_covariance(geom, 800.0, [-20.0, 40.0], [1.0, 0.5],
                               noise_power=0.01)
        est = decompose(cov, 2)
        rot = rotate_subspace(est, 2400.0)
        assert np.allclose(np.abs(rot.vectors), np.abs(est.signal_vectors),
                           atol=1e-12)

    @pytest.mark.parametrize("theta", [-60.0, -15.0, 30.0, 75.0])
    def test_single_source_maps_onto_target_steering(self, geom, theta):
        est = decompose(exact_covariance(geom, 1000.0, [theta]), 1)
        rot = rotate_subspace(est, 2000.0)
        target = steering_vector(geom, 2000.0, theta) / np.sqrt(5)
        cosine = abs(np.vdot(rot.vectors[:, 0], target))
        assert cosine > 1 - 1e-8

    def test_composition(self, geom):
        f1, f2, f3 = 500.0, 1100.0, 2600.0
        est = decompose(exact_covariance(geom, f1, [48.0]), 1)
        direct = rotate_subspace(est, f3)
        step = rotate_subspace(est, f2)
        step_est = _manual_estimate(f2, step.vectors, step.values)
        via = rotate_subspace(step_est, f3)
        assert np.allclose(direct.vectors, via.vectors, atol=1e-10)

    def test_rejects_nonpositive_frequency(self, geom):
        est = decompose(exact_covariance(geom, 1000.0, [10.0]), 1)
        with pytest.raises(ValueError):
            rotate_subspace(est, -1.0)


class TestBinWeight:
    def test_sum_of_signal_values(self):
        est = _manual_estimate(1000.0, np.eye(5)[:, :2], np.array([2.0, 3.0]))
        assert bin_weight(est) == pytest.approx(5.0)

    def test_zero_covariance(self):
        est = decompose(BinCovariance(1000.0, np.zeros((5, 5), complex), 1), 1)
        assert bin_weight(est) == pytest.approx(0.0)

    def test_scales_linearly(self, geom):
        cov = exact_covariance(geom, 900.0, [12.0], noise_power=0.2)
        w1 = bin_weight(decompose(cov, 1))
        scaled = BinCovariance(900.0, 3.0 * cov.matrix, 1)
        assert bin_weight(decompose(scaled, 1)) == pytest.approx(3.0 * w1, rel=1e-12)


class TestAccumulateSingle:
    def test_one_bin_passthrough(self, geom):
        est = decompose(exact_covariance(geom, 700.0, [25.0]), 1)
        rot = rotate_subspace(est, 1400.0)
        out = accumulate_single_source([rot], [1.0])
        cosine = abs(np.vdot(out, rot.vectors[:, 0]))
        assert cosine == pytest.approx(1.0, abs=1e-12)

    def test_many_bins_collinear_with_reference_steering(self, geom):
        freqs = stft_band_frequencies()
        f_ref = freqs[-1]
        rotated, weights = [], []
        for f in freqs:
            est = decompose(exact_covariance(geom, f, [-38.0]), 1)
            rotated.append(rotate_subspace(est, f_ref))
            weights.append(bin_weight(est))
        out = accumulate_single_source(rotated, weights)
        target = steering_vector(geom, f_ref, -38.0) / np.sqrt(5)
        assert abs(np.vdot(out, target)) > 1 - 1e-6

    def test_permutation_invariance(self, geom):
        freqs = stft_band_frequencies()[:40]
        rotated = [
            rotate_subspace(decompose(exact_covariance(geom, f, [10.0]), 1), freqs[-1])
            for f in freqs
        ]
        weights = list(np.linspace(1.0, 2.0, len(rotated)))
        fwd = accumulate_single_source(rotated, weights)
        perm = np.random.default_rng(1).permutation(len(rotated))
        rev = accumulate_single_source(
            [rotated[i] for i in perm], [weights[i] for i in perm]
        )
        assert np.allclose(fwd, rev, atol=1e-12)

    def test_all_zero_weights_rejected(self, geom):
        est = decompose(exact_covariance(geom, 700.0, [25.0]), 1)
        rot = rotate_subspace(est, 700.0)
        with pytest.raises(ValueError):
            accumulate_single_source([rot], [0.0])

    def test_mismatched_reference_rejected(self, geom):
        est = decompose(exact_covariance(geom, 700.0, [25.0]), 1)
        with pytest.raises(ValueError):
            accumulate_single_source(
                [rotate_subspace(est, 1000.0), rotate_subspace(est, 1100.0)],
                [1.0, 1.0],
            )


class TestReconstruct:
    def test_no_rotation_recovers_signal_part(self, geom):
        cov = exact_covariance(geom, 1200.0, [-10.0, 35.0], [2.0, 1.0],
                               noise_power=0.05)
        est = decompose(cov, 2)
        rot = rotate_subspace(est, 1200.0)
        rec = reconstruct_covariance(rot)
        expected = (
            est.signal_vectors * est.signal_values
        ) @ est.signal_vectors.conj().T
        assert np.linalg.norm(rec - expected) < 1e-9

    def test_single_source_closed_form(self, geom):
        f_src, f_ref, theta = 900.0, 2700.0, 42.0
        est = decompose(exact_covariance(geom, f_src, [theta]), 1)
        rec = reconstruct_covariance(rotate_subspace(est, f_ref))
        a_ref = steering_vector(geom, f_ref, theta)
        expected = est.signal_values[0] * np.outer(a_ref, np.conj(a_ref)) / 5.0
        assert np.linalg.norm(rec - expected) < 1e-9

    def test_trace_preserved(self, geom):
        cov = exact_covariance(geom, 1100.0, [-25.0, 20.0], [1.5, 0.7],
                               noise_power=0.02)
        est = decompose(cov, 2)
        rec = reconstruct_covariance(rotate_subspace(est, 3300.0))
        assert np.trace(rec).real == pytest.approx(
            est.signal_values.sum(), rel=1e-9
        )

    def test_degenerate_subspace_raises(self):
        v = np.ones((5, 1)) / np.sqrt(5)
        vectors = np.hstack([v, v * (1 + 1e-15)])
        rot = RotatedSubspace(1000.0, vectors, np.array([1.0, 0.5]), 500.0)
        with pytest.raises(DegenerateSubspaceError):
            reconstruct_covariance(rot)


class TestAccumulateWideband:
    def test_single_bin_equals_reconstruction(self, geom):
        cov = exact_covariance(geom, 1000.0, [15.0])
        wb = accumulate_wideband([cov], 1, f_ref=1000.0)
        rec = reconstruct_covariance(rotate_subspace(decompose(cov, 1), 1000.0))
        assert np.allclose(wb.matrix, rec, atol=1e-12)
        assert wb.bins_accumulated == 1

    def test_scale_invariant_direction(self, geom):
        freqs = stft_band_frequencies()[:50]
        covs = [exact_covariance(geom, f, [-45.0, 45.0]) for f in freqs]
        doubled = [BinCovariance(c.frequency, 2.0 * c.matrix, 1) for c in covs]
        wb1 = accumulate_wideband(covs, 2)
        wb2 = accumulate_wideband(doubled, 2)
        assert np.allclose(wb2.matrix, 2.0 * wb1.matrix, atol=1e-10)
        n1 = wb1.matrix / np.linalg.norm(wb1.matrix)
        n2 = wb2.matrix / np.linalg.norm(wb2.matrix)
        assert np.allclose(n1, n2, atol=1e-12)

    def test_reference_below_top_bin_rejected(self, geom):
        covs = [exact_covariance(geom, f, [10.0]) for f in (500.0, 1000.0)]
        with pytest.raises(ValueError):
            accumulate_wideband(covs, 1, f_ref=700.0)

    def test_single_source_subspace_matches_reference_steering(self, geom):
        freqs = stft_band_frequencies()
        covs = [exact_covariance(geom, f, [-52.0]) for f in freqs]
        wb = accumulate_wideband(covs, 1)
        vectors, gap = wideband_signal_subspace(wb, 1)
        target = steering_vector(geom, freqs[-1], -52.0)[:, None]
        assert principal_angles(vectors, target).max() < 1e-7
        assert gap > 1e6

    @pytest.mark.xfail(
        strict=True,
        reason=(
            "eigenvectors of a two-source covariance mix the steering "
            "vectors; elementwise phase scaling is exact only on pure "
            "single-source vectors, so the accumulated two-source span "
            "deviates by orders of magnitude more than 1e-4 rad"
        ),
    )
    def test_two_source_subspace_matches_steering_span(self, geom):
        freqs = stft_band_frequencies()
        covs = [exact_covariance(geom, f, [-45.0, 45.0]) for f in freqs]
        wb = accumulate_wideband(covs, 2)
        vectors, _ = wideband_signal_subspace(wb, 2)
        from wbdoa import steering_matrix

        target = steering_matrix(geom, freqs[-1], [-45.0, 45.0])
        assert principal_angles(vectors, target).max() < 1e-4

    def test_degenerate_bins_skipped_with_warning(self, geom, caplog, monkeypatch):
        import wbdoa.subspace as sub

        original = sub.reconstruct_covariance

        def failing(rotated):
            if rotated.source_frequency == 900.0:
                raise DegenerateSubspaceError("injected failure")
            return original(rotated)

        monkeypatch.setattr(sub, "reconstruct_covariance", failing)
        covs = [
            exact_covariance(geom, 900.0, [20.0]),
            exact_covariance(geom, 1000.0, [20.0]),
        ]
        with caplog.at_level(logging.WARNING, logger="wbdoa.subspace"):
            wb = accumulate_wideband(covs, 1, f_ref=1000.0)
        assert wb.bins_accumulated == 1
        assert any("skipping" in r.message for r in caplog.records)

    def test_all_bins_degenerate_raises(self, geom, monkeypatch):
        import wbdoa.subspace as sub

        def always_failing(rotated):
            raise DegenerateSubspaceError("injected failure")

        monkeypatch.setattr(sub, "reconstruct_covariance", always_failing)
        covs = [exact_covariance(geom, 900.0, [20.0])]
        with pytest.raises(DegenerateSubspaceError):
            accumulate_wideband(covs, 1, f_ref=1000.0)


class TestAccumulateIterative:
    def test_two_bins_equal_batch(self, geom):
        for doas, q in (([-45.0, 45.0], 2), ([25.0], 1)):
            covs = [
                exact_covariance(geom, 500.0, doas),
                exact_covariance(geom, 515.625, doas),
            ]
            batch = accumulate_wideband(covs, q, f_ref=515.625)
            iterative = accumulate_iterative(covs, q)
            assert np.linalg.norm(batch.matrix - iterative.matrix) < 1e-8

    def test_single_source_fifty_bins(self, geom):
        freqs = stft_band_frequencies()[:50]
        covs = [exact_covariance(geom, f, [31.0]) for f in freqs]
        wb = accumulate_iterative(covs, 1)
        assert wb.reference_frequency == freqs[-1]
        vectors, _ = wideband_signal_subspace(wb, 1)
        target = steering_vector(geom, freqs[-1], 31.0) / np.sqrt(5)
        assert abs(np.vdot(vectors[:, 0], target)) > 1 - 1e-6

    def test_adjacent_bin_exponent_range(self):
        # on an STFT grid the step ratio for bins i, i+1 is (i+1)/i
        bins = np.arange(1, 250)
        ratios = (bins + 1) / bins
        assert np.all(ratios > 1.0) and np.all(ratios <= 2.0)

    def test_agrees_with_batch_single_source(self, geom):
        freqs = stft_band_frequencies()  # 205 bins
        covs = [exact_covariance(geom, f, [-18.0]) for f in freqs]
        vb, _ = wideband_signal_subspace(accumulate_wideband(covs, 1), 1)
        vi, _ = wideband_signal_subspace(accumulate_iterative(covs, 1), 1)
        assert principal_angles(vb, vi).max() < 1e-6

    @pytest.mark.xfail(
        strict=True,
        reason=(
            "the iterative accumulator inherits the multi-source mixing "
            "error and walks a different path than the batch form; on "
            "two-source data they disagree far beyond 1e-6 rad"
        ),
    )
    def test_agrees_with_batch_two_sources(self, geom):
        freqs = stft_band_frequencies()
        covs = [exact_covariance(geom, f, [-45.0, 45.0]) for f in freqs]
        vb, _ = wideband_signal_subspace(accumulate_wideband(covs, 2), 2)
        vi, _ = wideband_signal_subspace(accumulate_iterative(covs, 2), 2)
        assert principal_angles(vb, vi).max() < 1e-6

    def test_needs_two_ascending_bins(self, geom):
        cov = exact_covariance(geom, 1000.0, [5.0])
        with pytest.raises(ValueError):
            accumulate_iterative([cov], 1)
        with pytest.raises(ValueError):
            accumulate_iterative(
                [exact_covariance(geom, 1000.0, [5.0]),
                 exact_covariance(geom, 900.0, [5.0])],
                1,
            )


class TestWidebandSubspace:
    def test_rank_one_outer_product(self):
        rng = np.random.default_rng(2)
        v = rng.standard_normal(5) + 1j * rng.standard_normal(5)
        w = rng.standard_normal(5) + 1j * rng.standard_normal(5)
        wb = WidebandCovariance(np.outer(v, np.conj(w)), 1000.0, 1, 1.0)
        vectors, gap = wideband_signal_subspace(wb, 1)
        cosine = abs(np.vdot(vectors[:, 0], v / np.linalg.norm(v)))
        assert cosine == pytest.approx(1.0, abs=1e-12)
        assert gap > 1e10

    def test_columns_orthonormal(self, geom):
        freqs = stft_band_frequencies()[:30]
        covs = [exact_covariance(geom, f, [-40.0, 10.0]) for f in freqs]
        vectors, _ = wideband_signal_subspace(accumulate_wideband(covs, 2), 2)
        assert np.allclose(vectors.conj().T @ vectors, np.eye(2), atol=1e-10)

    def test_weak_gap_flagged_not_raised(self, caplog):
        wb = WidebandCovariance(np.diag([1.0, 0.9, 0.1, 0.05, 0.01]) + 0j,
                                1000.0, 1, 1.0)
        with caplog.at_level(logging.WARNING, logger="wbdoa.subspace"):
            _, gap = wideband_signal_subspace(wb, 1)
        assert gap == pytest.approx(1.0 / 0.9, rel=1e-9)
        assert gap < 1.5
        assert any("gap" in r.message for r in caplog.records)


def _manual_estimate(frequency, vectors, values):
    from wbdoa.subspace import SubspaceEstimate

    vectors = np.asarray(vectors, dtype=complex)
    p, q = vectors.shape
    return SubspaceEstimate(
        frequency=frequency,
        signal_vectors=vectors,
        noise_vectors=np.zeros((p, p - q), dtype=complex),
        signal_values=np.asarray(values, dtype=float),
        noise_values=np.zeros(p - q),
    )
