import logging

import numpy as np
import pytest
from pydantic import ValidationError

from src.canceler import (
    CancelerSpec,
    azf_canceler,
    azf_snr,
    box_channel,
    canceler_snr,
    dfe_detect,
    equalize,
    gdfe_decompose,
    gdfe_snr,
    mfb_snr,
    mmse_canceler,
    mmse_snr,
    no_cancellation_snr,
    swp_snr,
    zf_canceler,
    zf_snr,
)
from src.channel import ChannelTensor
from src.constellation import QamConstellation
from src.errors import RejectedInputError, SingularChannelError, SingularDiagonalError
from src.oracles import azf_three_user, random_channel, zf_two_user
from tests.conftest import complex_matrix


class TestSpec:
    def test_valid_ordering(self):
        assert CancelerSpec(method="zf_gdfe", ordering=(2, 0, 1)).ordering == (2, 0, 1)

    def test_invalid_ordering(self):
        with pytest.raises(ValidationError):
            CancelerSpec(method="zf_gdfe", ordering=(0, 0, 1))

    def test_unknown_method(self):
        with pytest.raises(ValidationError):
            CancelerSpec(method="magic")


class TestZf:
    def test_box_inverse(self):
        alpha, h_d = 0.3, 0.5 * np.exp(0.3j)
        F = zf_canceler(box_channel(2, alpha, h_d))
        expected = np.array([[1, -alpha], [-alpha, 1]]) / (h_d * (1 - alpha ** 2))
        np.testing.assert_allclose(F, expected, atol=1e-12)

    def test_identity(self):
        np.testing.assert_allclose(zf_canceler(np.eye(3)), np.eye(3))

    def test_inverse_property(self, rng):
        H = complex_matrix(rng, 6)
        F = zf_canceler(H)
        assert np.max(np.abs(F @ H - np.eye(6))) < 1e-10 * np.linalg.norm(H)

    def test_singular(self):
        with pytest.raises(SingularChannelError):
            zf_canceler(box_channel(2, 1.0))

    def test_worked_value(self):
        np.testing.assert_allclose(zf_snr(box_channel(2, 0.5), 100.0, 1.0), [45.0, 45.0])

    def test_box_closed_form(self):
        for alpha in (0.0, 0.2, 0.6):
            np.testing.assert_allclose(zf_snr(box_channel(2, alpha), 50.0, 1.0), zf_two_user(alpha, 50.0), rtol=1e-12)

    def test_rejects_non_square(self):
        with pytest.raises(RejectedInputError):
            zf_snr(np.ones((2, 3)), 1.0, 1.0)


class TestMmse:
    def test_dominates_zf(self, rng):
        for _ in range(200):
            H = random_channel(4, rng.uniform(0.05, 1.2), rng)
            assert np.all(mmse_snr(H, 100.0, 1.0) >= zf_snr(H, 100.0, 1.0) * (1 - 1e-12))

    def test_high_snr_matches_zf(self, rng):
        H = random_channel(3, 0.5, rng)
        np.testing.assert_allclose(mmse_snr(H, 1.0, 1e-12) / zf_snr(H, 1.0, 1e-12), 1.0, rtol=1e-6)

    def test_canceler_equivalent_forms(self, rng):
        H = complex_matrix(rng, 4)
        F = mmse_canceler(H, 0.1)
        Hh = H.conj().T
        np.testing.assert_allclose(F, Hh @ np.linalg.inv(H @ Hh + 0.1 * np.eye(4)), atol=1e-10)

    def test_rejects_non_positive_ratio(self):
        with pytest.raises(RejectedInputError):
            mmse_canceler(np.eye(2), 0.0)

    def test_rejects_zero_noise(self):
        with pytest.raises(RejectedInputError):
            mmse_snr(np.eye(2), 1.0, 0.0)


class TestAzf:
    def test_box_canceler(self):
        alpha, h_d = 0.1, 2.0
        F = azf_canceler(box_channel(3, alpha, h_d))
        expected = (np.eye(3) * (1 + alpha) - alpha * np.ones((3, 3))) / h_d
        np.testing.assert_allclose(F, expected, atol=1e-12)

    def test_no_crosstalk_is_diagonal_inverse(self):
        H = np.diag([2.0, 0.5j, 1.0])
        np.testing.assert_allclose(azf_canceler(H), np.diag(1 / np.diag(H)))

    def test_residual_is_second_order(self):
        alpha = 0.1
        H = box_channel(3, alpha)
        residual = azf_canceler(H) @ H - np.eye(3)
        np.testing.assert_allclose(np.diag(residual), -2 * alpha ** 2)
        np.testing.assert_allclose(residual[0, 1], -alpha ** 2)

    def test_zero_diagonal(self):
        with pytest.raises(SingularDiagonalError):
            azf_canceler(np.array([[0.0, 1.0], [1.0, 1.0]]))

    @pytest.mark.parametrize("alpha, snr", [(0.0, 100.0), (0.2, 1e4), (0.05, 1e2)])
    def test_box_closed_form(self, alpha, snr):
        np.testing.assert_allclose(azf_snr(box_channel(3, alpha), snr, 1.0), azf_three_user(alpha, snr), rtol=1e-9)

    def test_approaches_zf_for_small_beta(self, rng):
        H = random_channel(4, 0.005, rng)
        azf, zf = azf_snr(H, 100.0, 1.0), zf_snr(H, 100.0, 1.0)
        assert np.all(np.abs(azf - zf) / zf < 1e-2)


class TestGdfe:
    def test_identity(self):
        Q, R = gdfe_decompose(np.eye(3))
        np.testing.assert_allclose(Q, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(R, np.eye(3), atol=1e-12)

    def test_box_triangular_factor(self):
        alpha = 0.4
        _, R = gdfe_decompose(box_channel(2, alpha))
        np.testing.assert_allclose(np.diag(R).real, [np.sqrt(1 + alpha ** 2), (1 - alpha ** 2) / np.sqrt(1 + alpha ** 2)])

    @pytest.mark.parametrize("ordering", [None, (3, 1, 7, 0, 2, 6, 5, 4)])
    def test_reconstruction(self, rng, ordering):
        H = complex_matrix(rng, 8)
        Q, R = gdfe_decompose(H, ordering)
        order = list(range(8)) if ordering is None else list(ordering)
        assert np.linalg.norm(Q @ R - H[:, order]) / np.linalg.norm(H) < 1e-10
        np.testing.assert_allclose(Q.conj().T @ Q, np.eye(8), atol=1e-10)
        np.testing.assert_allclose(np.tril(R, -1), 0, atol=1e-12)
        assert np.all(np.abs(np.diag(R).imag) < 1e-12) and np.all(np.diag(R).real > 0)

    def test_box_snr(self):
        alpha, snr = 0.3, 100.0
        got = gdfe_snr(box_channel(2, alpha), None, snr, 1.0)
        np.testing.assert_allclose(got, [snr * (1 + alpha ** 2), snr * (1 - alpha ** 2) ** 2 / (1 + alpha ** 2)])

    def test_ordering_moves_the_gain(self):
        alpha, snr = 0.3, 100.0
        got = gdfe_snr(box_channel(2, alpha), (1, 0), snr, 1.0)
        assert got[1] == pytest.approx(snr * (1 + alpha ** 2))

    def test_diagonal_channel(self):
        H = np.diag([1.0, 0.5, 2.0])
        np.testing.assert_allclose(gdfe_snr(H, (2, 0, 1), 1.0, 1.0), [1.0, 0.25, 4.0])

    def test_last_detected_user_gets_mfb(self, rng):
        H = complex_matrix(rng, 5)
        snr = gdfe_snr(H, (3, 0, 1, 2, 4), 1.0, 1.0)
        assert snr[3] == pytest.approx(mfb_snr(H, 3, 1.0, 1.0))

    def test_bad_ordering(self):
        with pytest.raises(RejectedInputError):
            gdfe_snr(np.eye(3), (0, 1), 1.0, 1.0)


class TestDfeDetect:
    def test_noiseless_qpsk(self, rng):
        qam = QamConstellation(2)
        for _ in range(50):
            H = complex_matrix(rng, 4) + 3 * np.eye(4)
            x = qam.random_symbols(rng, 4)
            np.testing.assert_allclose(dfe_detect(H, H @ x, qam), x)

    def test_ordering_and_genie(self, rng):
        qam = QamConstellation(4)
        H = complex_matrix(rng, 3) + 3 * np.eye(3)
        x = qam.random_symbols(rng, 3)
        np.testing.assert_allclose(dfe_detect(H, H @ x, qam, ordering=(2, 0, 1)), x)
        np.testing.assert_allclose(dfe_detect(H, H @ x, qam, genie_symbols=x), x)

    def test_single_user_is_scalar_slicing(self):
        qam = QamConstellation(4)
        h = np.array([[0.5 - 0.5j]])
        y = np.array([h[0, 0] * (1.2 - 2.7j)])
        np.testing.assert_allclose(dfe_detect(h, y, qam), [1 - 3j])

    @pytest.mark.slow
    def test_error_rate_with_six_db_margin(self, rng):
        qam = QamConstellation(4)
        H = complex_matrix(rng, 4) + 3 * np.eye(4)
        # uncoded 9.75 dB gap for 16-QAM, plus 6 dB margin, on the weakest user
        snr = 10 ** ((9.75 + 6.0) / 10) * (qam.size - 1)
        r_min = np.min(np.sqrt(gdfe_snr(H, None, 1.0, 1.0)))
        sigma = r_min * np.sqrt(qam.average_energy / snr / 2)
        trials = 100_000
        errors = 0
        for _ in range(trials):
            x = qam.random_symbols(rng, 4)
            w = sigma * (rng.normal(size=4) + 1j * rng.normal(size=4))
            errors += np.count_nonzero(dfe_detect(H, H @ x + w, qam) != x)
        assert errors / (4 * trials) < 1e-4

    def test_constellation_above_profile_cap(self, gfast106):
        qam = QamConstellation(14)
        with pytest.raises(RejectedInputError, match="12-bit"):
            dfe_detect(np.eye(2), np.zeros(2), qam, bit_cap=gfast106.bit_cap)

    def test_constellation_within_profile_cap(self, gfast106):
        qam = QamConstellation(12)
        x = np.array([qam.levels[-1] + 1j * qam.levels[0], 1 + 1j])
        np.testing.assert_allclose(dfe_detect(np.eye(2), x, qam, bit_cap=gfast106.bit_cap), x)

    def test_default_cap_is_largest_profile_cap(self):
        QamConstellation(14)
        with pytest.raises(RejectedInputError):
            QamConstellation(16)


class TestBounds:
    def test_box_values(self):
        H = box_channel(2, 0.5)
        assert swp_snr(H, 0, 10.0, 1.0) == pytest.approx(10.0)
        assert mfb_snr(H, 0, 10.0, 1.0) == pytest.approx(12.5)

    def test_mfb_direction(self):
        H = np.array([[1.0, 0.0], [0.5, 1.0]])
        assert mfb_snr(H, 0, 1.0, 1.0, "upstream") == pytest.approx(1.25)
        assert mfb_snr(H, 0, 1.0, 1.0, "downstream") == pytest.approx(1.0)

    def test_mfb_dominates_swp(self, rng):
        for _ in range(50):
            H = complex_matrix(rng, 4)
            for i in range(4):
                assert mfb_snr(H, i, 1.0, 1.0) >= swp_snr(H, i, 1.0, 1.0)

    def test_no_cancellation_box(self):
        alpha, snr = 0.2, 100.0
        np.testing.assert_allclose(no_cancellation_snr(box_channel(2, alpha), snr, 1.0), snr / (alpha ** 2 * snr + 1))

    def test_no_cancellation_interference_limited(self):
        got = no_cancellation_snr(box_channel(2, 0.1), 1e12, 1.0)
        np.testing.assert_allclose(got, 1 / 0.1 ** 2, rtol=1e-6)

    def test_no_cancellation_diagonal_equals_swp(self):
        H = np.diag([1.0, 0.3])
        np.testing.assert_allclose(no_cancellation_snr(H, 2.0, 1.0), [swp_snr(H, i, 2.0, 1.0) for i in range(2)])


class TestInvariants:
    def test_snr_ordering(self, rng):
        for _ in range(100):
            H = random_channel(4, rng.uniform(0.05, 1.0), rng)
            zf = zf_snr(H, 1e4, 1.0)
            mmse = mmse_snr(H, 1e4, 1.0)
            mfb = np.array([mfb_snr(H, i, 1e4, 1.0) for i in range(4)])
            swp = np.array([swp_snr(H, i, 1e4, 1.0) for i in range(4)])
            none = no_cancellation_snr(H, 1e4, 1.0)
            assert np.all(zf <= mmse * (1 + 1e-12))
            assert np.all(mmse <= mfb * (1 + 1e-12))
            assert np.all(none <= swp) and np.all(swp <= mfb)

    @pytest.mark.parametrize("method", ["none", "zf", "mmse", "azf", "zf_gdfe"])
    def test_row_phase_invariance(self, rng, method):
        H = random_channel(4, 0.4, rng)
        D = np.diag(np.exp(2j * np.pi * rng.uniform(size=4)))
        spec = CancelerSpec(method=method)
        np.testing.assert_allclose(canceler_snr(D @ H, spec, 10.0, 1.0), canceler_snr(H, spec, 10.0, 1.0), rtol=1e-9)


class TestEqualize:
    def test_matches_per_tone_calls(self, small_tensor):
        powers = np.full(len(small_tensor), 1e-4)
        report = equalize(small_tensor, powers, 1e-9, CancelerSpec(method="zf"))
        assert report.snr.shape == (16, 4)
        np.testing.assert_allclose(report.snr[5], zf_snr(small_tensor.H[5], 1e-4, 1e-9))
        assert report.skipped == ()

    def test_singular_tone_is_skipped(self, caplog):
        H = np.stack([np.eye(2), np.ones((2, 2)), 2 * np.eye(2)]).astype(complex)
        tensor = ChannelTensor(tones=np.array([100, 101, 102]), frequencies=np.zeros(3), H=H, seed=0, direction="upstream")
        with caplog.at_level(logging.WARNING):
            report = equalize(tensor, np.ones(3), 1.0, CancelerSpec(method="zf"))
        assert report.skipped == (101,)
        np.testing.assert_array_equal(report.snr[1], 0.0)
        np.testing.assert_allclose(report.snr[2], 4.0)
        assert "skipped 1 singular tone" in caplog.text
