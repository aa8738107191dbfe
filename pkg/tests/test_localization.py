"""
Tests for range-banded measurements and the Kalman filter.
"""

import math

import numpy as np
import pytest

from trailer_loading.perception.localization_sim import (
    LocalizationConfig,
    LocalizationSim,
    NoiseBands,
    PoseEstimate,
    PoseSource,
    chi2_band,
    kf_predict,
    kf_update,
    measure,
    nees,
    process_noise,
    relative_pose,
    world_pose,
)
from trailer_loading.planning.path_planner import Pose2D


def filter_estimate(state=None, variance=1.0):
    state = np.zeros(6) if state is None else np.asarray(state, dtype=float)
    return PoseEstimate(state, np.eye(6) * variance, PoseSource.CAMERA_FUSED)


def pose_measurement(values, variance):
    return PoseEstimate(np.asarray(values, dtype=float), np.eye(3) * variance, PoseSource.CAMERA_FUSED)


class TestRelativePose:
    """Tests for the trailer-frame transforms."""

    def test_inverse(self):
        """Test world_pose undoes relative_pose for a rotated trailer."""
        trailer = Pose2D(3.0, -2.0, 0.7)
        vessel = Pose2D(-20.0, 5.0, 0.4)
        back = world_pose(trailer, relative_pose(vessel, trailer))
        assert back.as_array() == pytest.approx(vessel.as_array())

    def test_axis_aligned(self, trailer):
        """Test a vessel behind the trailer has a negative along-axis offset."""
        assert relative_pose(Pose2D(-30.0, 2.0, 0.1), trailer) == pytest.approx([-30.0, 2.0, 0.1])


class TestMeasure:
    """Tests for measure."""

    def test_gnss_beyond_camera_range(self):
        """Test a 100 m measurement comes from GNSS/INS."""
        measurement = measure(np.array([-100.0, 0.0, 0.0]), 100.0, np.random.default_rng(0))
        assert measurement.source is PoseSource.GNSS_INS
        assert np.sqrt(measurement.covariance[0, 0]) == pytest.approx(0.05)

    def test_camera_within_range(self):
        """Test a 20 m measurement comes from the camera with band-zero noise."""
        measurement = measure(np.array([-20.0, 0.0, 0.0]), 20.0, np.random.default_rng(0))
        assert measurement.source is PoseSource.CAMERA_FUSED
        assert np.sqrt(measurement.covariance[1, 1]) == pytest.approx(0.26)

    def test_zero_noise_is_truth(self):
        """Test zero noise returns the true pose."""
        for heading in (0.2, -2.9, 3.1, np.pi):
            for range_m in (30.0, 120.0):
                truth = np.array([-range_m, 1.5, heading])
                rng = np.random.default_rng(1)
                measurement = measure(truth, range_m, rng, LocalizationConfig(noise_scale=0.0))
                assert np.array_equal(measurement.state, truth)

    def test_negative_range_rejected(self):
        """Test a negative range is rejected."""
        with pytest.raises(ValueError):
            measure(np.zeros(3), -1.0, np.random.default_rng(0))

    def test_no_camera_frame(self):
        """Test no measurement between camera frames."""
        assert measure(np.zeros(3), 10.0, np.random.default_rng(0), camera_frame=False) is None

    def test_band_edges(self):
        """Test bands are half-open at their upper edge."""
        bands = NoiseBands()
        assert bands.band_index(22.9) == 0
        assert bands.band_index(23.0) == 1
        assert bands.band_index(36.0) == 2
        assert np.all(bands.sigma(10.0) < bands.sigma(50.0))

    def test_unknown_profile(self):
        """Test unknown profiles are rejected."""
        with pytest.raises(ValueError):
            NoiseBands.profile("lidar")

    @pytest.mark.parametrize("profile", ["requirement", "measured"])
    def test_band_compliance(self, profile):
        """Test empirical sigma matches the band's sigma within 15%."""
        config = LocalizationConfig(profile=profile)
        bands = config.noise_bands()
        rng = np.random.default_rng(3)
        for range_m in (10.0, 30.0, 50.0):
            truth = np.array([-range_m, 0.0, 0.0])
            errors = np.array([measure(truth, range_m, rng, config).state - truth for _ in range(4000)])
            assert np.std(errors, axis=0) == pytest.approx(bands.sigma(range_m), rel=0.15)

    def test_measurement_nees(self):
        """Test measurement NEES falls in the 95% band for at least 90% of samples."""
        rng = np.random.default_rng(4)
        low, high = chi2_band()
        truth = np.array([-25.0, 3.0, 0.6])
        values = [nees(measure(truth, 25.2, rng), truth) for _ in range(2000)]
        inside = np.mean([(low <= value <= high) for value in values])
        assert inside >= 0.90


class TestKalmanFilter:
    """Tests for kf_predict and kf_update."""

    def test_predict_moves_and_grows(self):
        """Test constant-velocity prediction and covariance growth."""
        estimate = filter_estimate([0.0, 0.0, 0.0, 1.0, 0.5, 0.1])
        predicted = kf_predict(estimate, 0.5)
        assert predicted.pose == pytest.approx([0.5, 0.25, 0.05])
        assert np.trace(predicted.covariance) > np.trace(estimate.covariance)
        assert predicted.timestamp == pytest.approx(0.5)

    def test_predict_rejects_bad_input(self):
        """Test zero dt and pose-only estimates are rejected."""
        with pytest.raises(ValueError):
            kf_predict(filter_estimate(), 0.0)
        with pytest.raises(ValueError):
            kf_predict(pose_measurement(np.zeros(3), 1.0), 0.1)

    def test_process_noise_symmetric(self):
        """Test the process noise is symmetric positive semidefinite."""
        noise = process_noise(0.1, np.array([0.3, 0.3, 0.05]))
        assert np.allclose(noise, noise.T)
        assert np.min(np.linalg.eigvalsh(noise)) >= -1e-15

    def test_precise_measurement_wins(self):
        """Test a near-perfect measurement pulls the pose onto itself."""
        updated = kf_update(filter_estimate(), pose_measurement([1.0, -2.0, 0.3], 1e-10))
        assert updated.pose == pytest.approx([1.0, -2.0, 0.3], abs=1e-6)
        assert np.all(np.diag(updated.pose_covariance) < 1e-8)

    def test_infinite_noise_keeps_prior(self):
        """Test an uninformative measurement returns the prior."""
        prior = filter_estimate([1.0, 2.0, 0.1, 0.0, 0.0, 0.0])
        measurement = PoseEstimate(np.zeros(3), np.diag([np.inf] * 3), PoseSource.GNSS_INS)
        updated = kf_update(prior, measurement)
        assert np.array_equal(updated.state, prior.state)
        assert np.array_equal(updated.covariance, prior.covariance)

    def test_partial_update(self):
        """Test an infinite heading variance leaves the heading untouched."""
        prior = filter_estimate([0.0, 0.0, 0.2, 0.0, 0.0, 0.0])
        measurement = PoseEstimate(np.array([1.0, 1.0, -0.2]), np.diag([1.0, 1.0, np.inf]), PoseSource.GNSS_INS)
        updated = kf_update(prior, measurement)
        assert updated.heading == pytest.approx(0.2)
        assert updated.longitudinal == pytest.approx(0.5)

    def test_heading_innovation_wrapped(self):
        """Test an update across the wrap point moves the short way."""
        prior = filter_estimate([0.0, 0.0, math.pi - 0.05, 0.0, 0.0, 0.0])
        updated = kf_update(prior, pose_measurement([0.0, 0.0, -math.pi + 0.05], 1.0))
        assert abs(updated.heading) == pytest.approx(math.pi, abs=1e-9)

    def test_nan_rejected(self):
        """Test NaN covariance entries are rejected."""
        covariance = np.eye(3)
        covariance[0, 1] = covariance[1, 0] = np.nan
        with pytest.raises(ValueError):
            PoseEstimate(np.zeros(3), covariance, PoseSource.CAMERA_FUSED)

    def test_chi2_band(self):
        """Test the three-dof 95% band."""
        low, high = chi2_band()
        assert low == pytest.approx(0.2158, abs=1e-3)
        assert high == pytest.approx(9.348, abs=1e-3)


class TestLocalizationSim:
    """Tests for LocalizationSim."""

    @staticmethod
    def run_straight(seed, steps=500, config=None, trailer=Pose2D()):
        sim = LocalizationSim(trailer, config, seed=seed)
        estimates = []
        for k in range(steps):
            time = 0.1 * k
            estimates.append(sim.step(Pose2D(-55.0 + 0.5 * time, 1.0, 0.0), time))
        return sim, estimates

    def test_system_rate_output(self):
        """Test one estimate per step stamped at the step time, with frames at the camera rate."""
        sim, estimates = self.run_straight(0, steps=101)
        assert [e.timestamp for e in estimates] == pytest.approx([0.1 * k for k in range(101)])
        camera = [m for m in sim.measurements if m.source is PoseSource.CAMERA_FUSED]
        assert 67 <= len(camera) <= 71

    def test_smoothing(self):
        """Test the filter beats the raw camera measurements over 500 steps."""
        sim, estimates = self.run_straight(2)

        def truth(time):
            return np.array([-55.0 + 0.5 * time, 1.0, 0.0])

        raw = np.array([m.pose - truth(m.timestamp) for m in sim.measurements[1:]])
        filtered = np.array([e.pose - truth(e.timestamp) for e in estimates[50:]])
        raw_rms = np.sqrt(np.mean(raw[:, :2] ** 2, axis=0))
        filtered_rms = np.sqrt(np.mean(filtered[:, :2] ** 2, axis=0))
        assert np.all(filtered_rms < 0.7 * raw_rms)

    def test_filter_consistency(self):
        """Test filter NEES stays in the 95% band for at least 90% of samples on matching motion."""
        config = LocalizationConfig(bias_sigma_position=0.0, bias_sigma_heading_deg=0.0)
        accel = np.array([config.process_accel_sigma, config.process_accel_sigma, config.process_yaw_accel_sigma])
        transition = np.eye(6)
        transition[:3, 3:] = 0.1 * np.eye(3)
        noise = process_noise(0.1, accel)
        low, high = chi2_band()
        inside = []
        for seed in range(10):
            rng = np.random.default_rng([seed, 99])
            truth = np.array([-35.0, 2.0, 0.0, 0.5, 0.0, 0.0])
            sim = LocalizationSim(Pose2D(), config, seed=seed)
            for k in range(200):
                estimate = sim.step(Pose2D(truth[0], truth[1], truth[2]), 0.1 * k)
                if k >= 20:
                    inside.append(low <= nees(estimate, truth[:3]) <= high)
                truth = transition @ truth + rng.multivariate_normal(np.zeros(6), noise)
        assert np.mean(inside) >= 0.90

    def test_deterministic(self):
        """Test identical seeds give identical estimates."""
        _, first = self.run_straight(5, steps=100)
        _, second = self.run_straight(5, steps=100)
        assert all(np.array_equal(a.state, b.state) for a, b in zip(first, second))

    def test_gnss_measurements_carry_run_bias(self):
        """Test every GNSS measurement of a run is offset by the same bias."""
        config = LocalizationConfig(gnss_sigma_position=0.0, gnss_sigma_heading_deg=0.0)
        sim = LocalizationSim(Pose2D(), config, seed=0)
        for k in range(5):
            sim.step(Pose2D(-100.0 + k, 0.0, 0.0), 0.1 * k)
        assert all(m.source is PoseSource.GNSS_INS for m in sim.measurements)
        offsets = [m.pose - np.array([-100.0 + k, 0.0, 0.0]) for k, m in enumerate(sim.measurements)]
        assert np.any(sim.bias != 0.0)
        for offset in offsets:
            assert offset == pytest.approx(-sim.bias, abs=1e-12)

    def test_world_pose_requires_estimate(self):
        """Test the world pose is unavailable before the first step."""
        with pytest.raises(ValueError):
            LocalizationSim(Pose2D()).world_pose()

    def test_ins_velocity_noise(self):
        """Test INS velocities are exact with zero noise."""
        sim = LocalizationSim(Pose2D(), LocalizationConfig(noise_scale=0.0))
        assert np.array_equal(sim.ins_velocity(1.0, 0.1, 0.01), [1.0, 0.1, 0.01])
