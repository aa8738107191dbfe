"""
Tests for damping identification.
"""

import os

import numpy as np
import pytest

from trailer_loading.dynamics.params import DAMPING_FIELDS
from trailer_loading.dynamics.sysid import (
    SURGE_PARAMS,
    SWAY_YAW_PARAMS,
    IllConditionedError,
    ManeuverKind,
    ManeuverLog,
    ManeuverSpec,
    build_surge_system,
    build_sway_yaw_system,
    condition_number,
    default_suite,
    generate_maneuvers,
    identify_all,
    identify_surge,
    identify_sway_yaw,
    solve_regression,
)


@pytest.fixture(scope="module")
def noiseless_logs():
    """Noiseless default suite simulated on the bundled table."""
    from trailer_loading.dynamics.params import VesselParams

    return generate_maneuvers(VesselParams(), default_suite())


class TestManeuvers:
    """Tests for maneuver generation."""

    def test_zigzag_yaw_rate_changes_sign(self, params):
        """Test a zigzag log alternates its yaw rate."""
        spec = ManeuverSpec(kind=ManeuverKind.ZIGZAG, rpm=1200.0, alpha=0.3, duration=80.0)
        log = generate_maneuvers(params, [spec])[0]
        r = log.states[len(log) // 10:, 5]
        sign_changes = np.count_nonzero(np.diff(np.sign(r[np.abs(r) > 1e-4])) != 0)
        assert sign_changes >= 4

    def test_idle_from_rest_stays_at_rest(self, params):
        """Test a zero-thrust maneuver from rest is an all-zero log."""
        log = generate_maneuvers(params, [ManeuverSpec(kind=ManeuverKind.IDLE, duration=10.0)])[0]
        assert np.all(log.states == 0.0)

    def test_steady_straight_has_no_sway_or_yaw(self, params):
        """Test a straight run at steady surge keeps v = r = 0."""
        spec = ManeuverSpec(kind=ManeuverKind.STRAIGHT, rpm=1600.0, duration=20.0, start="steady")
        log = generate_maneuvers(params, [spec])[0]
        assert np.all(log.states[:, 4:6] == 0.0)
        assert np.ptp(log.states[:, 3]) < 1e-9

    def test_empty_suite_rejected(self, params):
        """Test an empty suite is rejected."""
        with pytest.raises(ValueError):
            generate_maneuvers(params, [])

    def test_negative_noise_rejected(self, params):
        """Test a negative noise level is rejected."""
        with pytest.raises(ValueError):
            generate_maneuvers(params, default_suite()[:1], noise_level=-0.1)

    def test_log_csv(self, params, temp_dir):
        """Test a log survives a CSV write and read."""
        log = generate_maneuvers(params, default_suite()[:1])[0]
        path = os.path.join(temp_dir, f"{log.name}.csv")
        log.to_csv(path)

        loaded = ManeuverLog.from_csv(path)
        assert len(loaded) == len(log)
        assert loaded.controls.shape == log.controls.shape
        assert np.allclose(loaded.states, log.states)

    def test_log_rejects_unordered_timestamps(self):
        """Test timestamps must increase."""
        with pytest.raises(ValueError):
            ManeuverLog(np.array([0.0, 0.0]), np.zeros((2, 6)), np.zeros((1, 2)), np.zeros((2, 2)))


class TestIdentification:
    """Tests for the regressions."""

    def test_noiseless_surge(self, params, noiseless_logs):
        """Test Xu and Xuu within 1% on noiseless logs."""
        report = identify_surge(noiseless_logs, params, params)
        assert max(report.relative_error.values()) < 0.01
        assert report.residual_norm >= 0.0

    def test_noiseless_sway_yaw(self, params, noiseless_logs):
        """Test the seven sway/yaw coefficients within 2% on noiseless logs."""
        report = identify_sway_yaw(noiseless_logs, params, params)
        assert max(report.relative_error.values()) < 0.02

    def test_round_trip_all_coefficients(self, params, noiseless_logs):
        """Test every regressed damping coefficient within 1%."""
        identified, reports = identify_all(noiseless_logs, params, params)
        for report in reports:
            assert max(report.relative_error.values()) < 0.01
        for name in DAMPING_FIELDS:
            assert getattr(identified, name) == pytest.approx(getattr(params, name), rel=0.01)
        assert identified.m11 == params.m11

    def test_round_trip_other_generator(self, params):
        """Test the round trip on a different positive-damping plant."""
        truth = params.with_updates(Xu=-60.0, Xuu=-200.0, Yv=-1800.0, Nr=-12000.0, Nrr=-40000.0)
        logs = generate_maneuvers(truth, default_suite())
        _, reports = identify_all(logs, truth, truth)
        for report in reports:
            assert max(report.relative_error.values()) < 0.01

    def test_single_speed_is_ill_conditioned(self, params):
        """Test one straight-line speed cannot separate Xu from Xuu."""
        spec = ManeuverSpec(kind=ManeuverKind.STRAIGHT, rpm=1200.0, duration=20.0, start="steady")
        logs = generate_maneuvers(params, [spec])
        with pytest.raises(IllConditionedError) as excinfo:
            identify_surge(logs, params)
        assert excinfo.value.group == "surge"

    def test_straight_only_is_ill_conditioned(self, params):
        """Test straight-line logs give no sway/yaw excitation."""
        straight = [spec for spec in default_suite() if spec.kind == ManeuverKind.STRAIGHT]
        logs = generate_maneuvers(params, straight)
        with pytest.raises(IllConditionedError):
            identify_sway_yaw(logs, params)

    def test_single_turn_is_ill_conditioned(self, params):
        """Test one turning circle cannot separate the modulus terms and reports its real condition number."""
        turn = ManeuverSpec(kind=ManeuverKind.TURNING, rpm=1200.0, alpha=0.3, duration=90.0)
        logs = generate_maneuvers(params, [turn])
        with pytest.raises(IllConditionedError) as excinfo:
            identify_sway_yaw(logs, params)
        expected = condition_number(build_sway_yaw_system(logs, params).matrix)
        assert excinfo.value.condition_number == expected
        assert excinfo.value.condition_number > 1.0

    def test_condition_number_of_rank_deficient_matrix(self):
        """Test a repeated column and a short matrix are infinitely ill-conditioned."""
        column = np.arange(1.0, 6.0)
        assert condition_number(np.column_stack([column, 2.0 * column])) > 1e12
        assert condition_number(np.ones((1, 2))) == float("inf")
        assert condition_number(np.eye(3)) == pytest.approx(1.0)

    def test_duplicated_logs_give_same_estimates(self, params, noiseless_logs):
        """Test feeding every log twice leaves the estimates unchanged."""
        _, single = identify_all(noiseless_logs, params)
        _, doubled = identify_all(noiseless_logs + noiseless_logs, params)
        for once, twice in zip(single, doubled):
            for name, value in once.estimated.items():
                assert twice.estimated[name] == pytest.approx(value, rel=1e-9)
            assert twice.samples_used == 2 * once.samples_used

    def test_estimate_minimises_residual(self, params, noiseless_logs):
        """Test moving any coefficient by 5% raises the residual norm."""
        system = build_sway_yaw_system(noiseless_logs, params)
        report = solve_regression(system)
        best = np.array([report.estimated[name] for name in system.names])
        for index in range(len(best)):
            for factor in (0.95, 1.05):
                perturbed = best.copy()
                perturbed[index] *= factor
                assert system.residual_norm(perturbed) > report.residual_norm

    def test_aligned_rows_hold_exactly_on_noiseless_logs(self, params, noiseless_logs):
        """Test the generator coefficients satisfy every balance row on integrator-step logs."""
        for build, names in ((build_surge_system, SURGE_PARAMS), (build_sway_yaw_system, SWAY_YAW_PARAMS)):
            system = build(noiseless_logs, params)
            truth = np.array([getattr(params, name) for name in names])
            scale = np.max(np.abs(system.target))
            assert np.max(np.abs(system.matrix @ truth - system.target)) < 1e-6 * scale

    def test_unknown_derivative_method(self, params, noiseless_logs):
        """Test unknown derivative methods are rejected."""
        with pytest.raises(ValueError):
            identify_surge(noiseless_logs, params, derivative="spline")

    @pytest.mark.slow
    def test_noisy_recovery_median_over_seeds(self, params):
        """Test 0.01 m/s velocity noise keeps the median error within 10%."""
        errors = []
        for seed in range(20):
            logs = generate_maneuvers(params, default_suite(), noise_level=0.01, seed=seed)
            _, reports = identify_all(logs, params, params, derivative="savgol")
            errors.append([err for report in reports for err in report.relative_error.values()])
        median = np.median(np.asarray(errors), axis=0)
        assert np.all(median < 0.10)
