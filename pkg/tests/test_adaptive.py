import numpy as np
import pytest
from pydantic import ValidationError

from src.adaptive import (
    AdaptiveSchedule,
    LmsState,
    condition_number,
    elapsed_ms,
    guarded_two_stage_update,
    initial_state,
    input_correlation,
    iterations_to_level,
    lms_step,
    make_test_channel,
    run_adaptation,
    smoothed_mse_db,
    training_symbols,
    two_stage_update,
)
from src.channel import diag_dominance
from src.errors import RejectedInputError, SingularDiagonalError


class TestLmsStep:
    def test_zero_error_is_fixed_point(self):
        state = LmsState(F=np.eye(3), mu=0.5)
        x = np.array([1 + 1j, -1 + 1j, 1 - 1j])
        lms_step(state, x, x)
        np.testing.assert_array_equal(state.F, np.eye(3))
        assert state.mse_curve == [0.0]

    def test_scalar_recursion(self):
        state = LmsState(F=np.zeros((1, 1)), mu=0.25)
        for k in range(1, 8):
            lms_step(state, [1.0], [1.0])
            assert state.F[0, 0] == pytest.approx(1 - 0.5 ** k)
        assert state.t == 7

    def test_zero_step_keeps_canceler(self, rng):
        H = make_test_channel(3, 0.3, seed=0)
        state = initial_state(H, mu=0.0)
        F0 = state.F.copy()
        for _ in range(20):
            x = training_symbols(rng, (3,))
            lms_step(state, H @ x, x)
        np.testing.assert_array_equal(state.F, F0)

    def test_shape_mismatch(self):
        state = LmsState(F=np.eye(2), mu=0.1)
        with pytest.raises(RejectedInputError):
            lms_step(state, [1.0, 2.0, 3.0], [1.0, 2.0])

    def test_negative_step(self):
        with pytest.raises(RejectedInputError):
            LmsState(F=np.eye(2), mu=-0.1)


class TestInitialState:
    def test_per_line_equalizer(self):
        H = np.array([[2j, 0.1], [0.2, 0.5]])
        state = initial_state(H, 0.1)
        np.testing.assert_allclose(state.F, np.diag([1 / -2j, 2.0]))
        np.testing.assert_allclose(state.output(H @ [1.0, 0.0])[0], 1.0 + 0.0j)

    def test_zero_diagonal(self):
        with pytest.raises(SingularDiagonalError):
            initial_state(np.array([[0.0, 1.0], [1.0, 1.0]]), 0.1)


class TestTwoStage:
    def test_output_is_continuous(self, rng):
        state = LmsState(F=np.eye(3) + 0.2 * rng.normal(size=(3, 3)), mu=0.1)
        y = rng.normal(size=3) + 1j * rng.normal(size=3)
        before = state.output(y)
        two_stage_update(state)
        np.testing.assert_array_equal(state.F, np.eye(3))
        np.testing.assert_allclose(state.output(y), before)

    def test_preprocessor_accumulates(self):
        state = LmsState(F=2 * np.eye(2), mu=0.1)
        two_stage_update(state)
        state.F = 3 * np.eye(2)
        two_stage_update(state)
        np.testing.assert_allclose(state.F_p, 6 * np.eye(2))

    def test_guarded_fold_taken_when_it_whitens(self):
        H = np.array([[1.0, 0.5], [0.5, 1.0]])
        state = LmsState(F=np.linalg.inv(H).conj().T, mu=0.1)
        before, after, taken = guarded_two_stage_update(state, input_correlation(H, 1.0, 0.0))
        assert taken
        assert before == pytest.approx(9.0)
        assert after == pytest.approx(1.0)
        np.testing.assert_allclose(state.F_p, np.linalg.inv(H), atol=1e-12)
        np.testing.assert_array_equal(state.F, np.eye(2))

    def test_guarded_fold_skipped_when_spread_rises(self):
        F = np.diag([2.0, 1.0])
        state = LmsState(F=F, mu=0.1)
        before, after, taken = guarded_two_stage_update(state, np.eye(2))
        assert not taken
        assert before == after == pytest.approx(1.0)
        np.testing.assert_array_equal(state.F_p, np.eye(2))
        np.testing.assert_array_equal(state.F, F)


class TestDiagnostics:
    def test_condition_number(self):
        assert condition_number(np.eye(4)) == pytest.approx(1.0)
        assert condition_number(np.diag([4.0, 1.0])) == pytest.approx(4.0)
        assert condition_number(np.diag([1.0, 0.0])) == float("inf")

    def test_input_correlation(self):
        H = np.array([[1.0, 0.5], [0.0, 1.0]])
        R = input_correlation(H, 2.0, 0.1)
        np.testing.assert_allclose(R, 2.0 * H @ H.T + 0.1 * np.eye(2))
        F_p = np.linalg.inv(H)
        np.testing.assert_allclose(input_correlation(H, 2.0, 0.0, F_p), 2.0 * np.eye(2), atol=1e-12)

    def test_smoothed_curve(self):
        assert smoothed_mse_db(np.ones(5), window=10).size == 0
        np.testing.assert_allclose(smoothed_mse_db(np.full(20, 0.01), window=5), -20.0)

    def test_iterations_to_level(self):
        curve = np.concatenate([np.ones(100), np.full(100, 1e-3)])
        assert iterations_to_level(curve, -25.0, window=10) == 110
        assert iterations_to_level(curve, -40.0, window=10) is None

    def test_elapsed_ms(self):
        assert elapsed_ms(100, 48000.0) == pytest.approx(1e3 * 100 * 275 / 48000)

    def test_make_test_channel(self):
        H = make_test_channel(6, 0.4, seed=3)
        np.testing.assert_allclose(H, H.conj().T)
        np.testing.assert_allclose(np.diag(H), 1.0)
        assert diag_dominance(H)[2] == pytest.approx(0.4)
        eig = np.linalg.eigvalsh(H)
        assert eig[0] < 1 < eig[-1]

    def test_make_test_channel_rejects_single_line(self):
        with pytest.raises(RejectedInputError):
            make_test_channel(1, 0.1, seed=0)

    def test_training_symbols_unit_power(self, rng):
        x = training_symbols(rng, (4, 3))
        assert x.shape == (4, 3)
        np.testing.assert_allclose(np.abs(x), 1.0)


class TestSchedule:
    def test_instants_sorted(self):
        schedule = AdaptiveSchedule(update_instants=(300, 100, 300))
        assert schedule.update_instants == (100, 300)

    @pytest.mark.parametrize("fields", [{"update_instants": (0, 10)}, {"mu_hat": -0.1}, {"iterations": 0}])
    def test_rejects(self, fields):
        with pytest.raises(ValidationError):
            AdaptiveSchedule(**fields)


class TestRunAdaptation:
    def test_deterministic(self):
        H = make_test_channel(3, 0.3, seed=1)
        schedule = AdaptiveSchedule(iterations=200, seed=4)
        _, a = run_adaptation(H, 1.0, 1e-6, schedule)
        _, b = run_adaptation(H, 1.0, 1e-6, schedule)
        np.testing.assert_array_equal(a, b)
        assert len(a) == 200

    def test_lms_converges(self):
        H = make_test_channel(4, 0.1, seed=2)
        _, curve = run_adaptation(H, 1.0, 1e-9, AdaptiveSchedule(iterations=3000, seed=0))
        reached = iterations_to_level(curve, -40.0)
        assert reached is not None and reached < 3000

    def test_modes_share_symbols_until_first_update(self):
        H = make_test_channel(4, 0.5, seed=5)
        lms = AdaptiveSchedule(mode="lms", iterations=300, update_instants=(100,), seed=7)
        two = AdaptiveSchedule(mode="two_stage", iterations=300, update_instants=(100,), seed=7)
        _, a = run_adaptation(H, 1.0, 1e-6, lms)
        _, b = run_adaptation(H, 1.0, 1e-6, two)
        np.testing.assert_array_equal(a[:100], b[:100])

    def test_update_lowers_condition_number(self):
        H = make_test_channel(4, 0.5, seed=6)
        schedule = AdaptiveSchedule(mode="two_stage", iterations=1500, update_instants=(1000, 5000), seed=1)
        state, _ = run_adaptation(H, 1.0, 1e-9, schedule)
        assert len(state.updates) == 1
        t, before, after = state.updates[0]
        assert t == 1000
        assert after < before

    def test_condition_number_never_rises_after_convergence(self):
        H = make_test_channel(4, 0.5, seed=6)
        schedule = AdaptiveSchedule(mode="two_stage", iterations=3500, update_instants=(100, 300, 1000, 3000), seed=2)
        state, _ = run_adaptation(H, 1.0, 1e-9, schedule)
        assert [t for t, _, _ in state.updates] == [100, 300, 1000, 3000]
        for t, before, after in state.updates:
            assert after <= before, f"condition number rose at {t}"

    def test_lms_mode_never_updates(self):
        H = make_test_channel(3, 0.3, seed=1)
        state, _ = run_adaptation(H, 1.0, 1e-6, AdaptiveSchedule(iterations=400, update_instants=(100,)))
        assert state.updates == []
        np.testing.assert_array_equal(state.F_p, np.eye(3))

    def test_rejects_non_positive_power(self):
        with pytest.raises(RejectedInputError):
            run_adaptation(np.eye(2), 0.0, 1.0, AdaptiveSchedule(iterations=10))
