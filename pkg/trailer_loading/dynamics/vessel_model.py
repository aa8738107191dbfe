"""
VesselModel - 3DOF maneuvering dynamics with azimuth propulsion and wind forcing.

Frame conventions: planar world frame, heading psi measured from the +x axis
(counter-clockwise positive), body y axis to the left of the bow. Wind
direction is the direction the wind blows FROM.
"""

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from trailer_loading.dynamics.params import VesselParams, WindCoefficients
from trailer_loading.utils.angles import wrap_angle

STATE_DIM = 6
CONTROL_DIM = 2


@dataclass(frozen=True)
class VesselState:
    """Pose (x, y, psi) and body-frame velocities (u, v, r)."""
    x: float = 0.0
    y: float = 0.0
    psi: float = 0.0
    u: float = 0.0
    v: float = 0.0
    r: float = 0.0

    def __post_init__(self) -> None:
        values = (self.x, self.y, self.psi, self.u, self.v, self.r)
        if not np.all(np.isfinite(values)):
            raise ValueError(f"VesselState fields must be finite, got {values}")
        object.__setattr__(self, "psi", wrap_angle(self.psi))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.psi, self.u, self.v, self.r])

    @classmethod
    def from_array(cls, values: np.ndarray) -> "VesselState":
        x, y, psi, u, v, r = (float(val) for val in values)
        return cls(x=x, y=y, psi=psi, u=u, v=v, r=r)

    @property
    def velocity(self) -> np.ndarray:
        return np.array([self.u, self.v, self.r])

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class ControlInput:
    """Propeller RPM (signed, negative = reverse gear) and shared azimuth angle."""
    rpm: float = 0.0
    alpha: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.rpm, self.alpha])

    @classmethod
    def from_array(cls, values: np.ndarray) -> "ControlInput":
        return cls(rpm=float(values[0]), alpha=float(values[1]))


@dataclass(frozen=True)
class WindCondition:
    """Absolute wind speed [m/s] and the world direction it blows FROM [rad]."""
    speed: float = 0.0
    direction: float = 0.0

    def __post_init__(self) -> None:
        if not (np.isfinite(self.speed) and np.isfinite(self.direction)):
            raise ValueError("WindCondition fields must be finite")
        if self.speed < 0.0:
            raise ValueError(f"wind speed must be >= 0, got {self.speed}")
        object.__setattr__(self, "direction", wrap_angle(self.direction))

    @property
    def velocity(self) -> np.ndarray:
        """World-frame velocity of the air mass."""
        return -self.speed * np.array([np.cos(self.direction), np.sin(self.direction)])


CALM = WindCondition(0.0, 0.0)


def rotation_matrix(psi: float) -> np.ndarray:
    """Rotation embedding body velocities (u, v, r) into world rates."""
    c, s = np.cos(psi), np.sin(psi)
    return np.array([
        [c, -s, 0.0],
        [s, c, 0.0],
        [0.0, 0.0, 1.0],
    ])


def coriolis_matrix(params: VesselParams, v: np.ndarray) -> np.ndarray:
    """Skew-symmetric Coriolis-centripetal matrix C(v)."""
    u_, v_, r_ = (float(val) for val in v)
    c13 = -params.m22 * v_ - params.m23 * r_
    c23 = params.m11 * u_
    return np.array([
        [0.0, 0.0, c13],
        [0.0, 0.0, c23],
        [-c13, -c23, 0.0],
    ])


def damping_matrix(params: VesselParams, v: np.ndarray) -> np.ndarray:
    """Linear plus modulus damping matrix D(v)."""
    u_, v_, r_ = (float(val) for val in v)
    return np.array([
        [-params.Xu - params.Xuu * abs(u_), 0.0, 0.0],
        [0.0, -params.Yv - params.Yvv * abs(v_), -params.Yr],
        [0.0, -params.Nv - params.Nvv * abs(v_), -params.Nr - params.Nrr * abs(r_)],
    ])


def _thrust_and_derivative(
    params: VesselParams,
    rpm: np.ndarray,
    smooth: bool,
    blend_width: float,
) -> tuple[np.ndarray, np.ndarray]:
    rpm = np.asarray(rpm, dtype=float)
    k = params.thrust_coefficient
    n = rpm / 60.0
    base = k * np.abs(n) * n
    dbase = k * 2.0 * np.abs(n) / 60.0
    magnitude = np.abs(rpm)
    threshold = params.neutral_rpm_threshold

    if smooth and blend_width > 0.0:
        s = np.clip((magnitude - (threshold - blend_width)) / (2.0 * blend_width), 0.0, 1.0)
        gate = s * s * (3.0 - 2.0 * s)
        dgate = 6.0 * s * (1.0 - s) / (2.0 * blend_width) * np.sign(rpm)
        return gate * base, gate * dbase + base * dgate

    engaged = magnitude >= threshold
    return np.where(engaged, base, 0.0), np.where(engaged, dbase, 0.0)


def thrust_force(
    params: VesselParams,
    rpm,
    smooth: bool = False,
    blend_width: float = 30.0,
):
    """
    Per-engine thrust F = rho*K_T*D^4*|n|*n with n in rev/s.

    The plant uses a hard neutral-gear deadband below the threshold RPM; the
    ``smooth`` variant blends the gate with a cubic over threshold +/- blend_width.

    :param params: Vessel parameters
    :param rpm: Propeller RPM (scalar or array)
    :param smooth: Use the differentiable deadband
    :param blend_width: Half-width of the cubic blend [RPM]
    :return: Thrust per engine [N], same shape as rpm
    """
    force, _ = _thrust_and_derivative(params, rpm, smooth, blend_width)
    if np.ndim(force) == 0:
        return float(force)
    return force


def propulsion_wrench(
    params: VesselParams,
    rpm: float,
    alpha: float,
    smooth: bool = False,
    blend_width: float = 30.0,
) -> np.ndarray:
    """
    Twin-engine wrench (tau_X, tau_Y, tau_N) with a shared azimuth angle.

    The +/- Ly*cos(alpha) moment terms of the two engines cancel.
    """
    force = thrust_force(params, rpm, smooth, blend_width)
    return np.array([
        2.0 * force * np.cos(alpha),
        2.0 * force * np.sin(alpha),
        -2.0 * force * params.Lx * np.sin(alpha),
    ])


@lru_cache(maxsize=16)
def _table_splines(
    angles: tuple[float, ...],
    cx: tuple[float, ...],
    cy: tuple[float, ...],
    cn: tuple[float, ...],
) -> tuple[CubicSpline, float, float]:
    values = np.column_stack([cx, cy, cn])
    spline = CubicSpline(np.asarray(angles), values, axis=0, bc_type="periodic")
    return spline, angles[0], angles[-1] - angles[0]


def wind_coefficients(coeffs: WindCoefficients, gamma) -> tuple[np.ndarray, np.ndarray]:
    """
    Evaluate (C_X, C_Y, C_N) and their derivatives at relative wind angle gamma.

    :return: (coefficients, derivatives), each of shape gamma.shape + (3,)
    """
    gamma = np.asarray(gamma, dtype=float)
    if coeffs.mode == "table":
        spline, start, period = _table_splines(
            tuple(coeffs.table_angles),
            tuple(coeffs.table_cx),
            tuple(coeffs.table_cy),
            tuple(coeffs.table_cn),
        )
        folded = start + np.mod(gamma - start, period)
        return spline(folded), spline(folded, 1)

    values = np.stack([
        -coeffs.cx * np.cos(gamma),
        coeffs.cy * np.sin(gamma),
        coeffs.cn * np.sin(2.0 * gamma),
    ], axis=-1)
    slopes = np.stack([
        coeffs.cx * np.sin(gamma),
        coeffs.cy * np.cos(gamma),
        2.0 * coeffs.cn * np.cos(2.0 * gamma),
    ], axis=-1)
    return values, slopes


def relative_wind(psi, u, v, wind_speed, wind_direction):
    """
    Body-frame velocity of the vessel relative to the air.

    :return: (u_rw, v_rw, V_rw, gamma_rw); gamma_rw = 0 means wind on the bow
    """
    heading_offset = np.asarray(wind_direction) - np.asarray(psi)
    u_rw = np.asarray(u) + wind_speed * np.cos(heading_offset)
    v_rw = np.asarray(v) + wind_speed * np.sin(heading_offset)
    speed = np.hypot(u_rw, v_rw)
    gamma = -np.arctan2(v_rw, u_rw)
    return u_rw, v_rw, speed, gamma


def _areas(params: VesselParams) -> np.ndarray:
    return np.array([params.AFw, params.ALw, params.ALw * params.Loa])


def wind_wrench_batch(params: VesselParams, states: np.ndarray, wind_speed=0.0, wind_direction=0.0) -> np.ndarray:
    """
    Wind wrench for N states (N, 6); wind may be scalar or per row.

    Calm air still loads a moving hull through its own apparent wind.
    """
    states = np.atleast_2d(np.asarray(states, dtype=float))
    _, _, speed, gamma = relative_wind(states[:, 2], states[:, 3], states[:, 4], wind_speed, wind_direction)
    coefficients, _ = wind_coefficients(params.wind_coeff_params, gamma)
    return (0.5 * params.rho_air * speed ** 2)[:, None] * coefficients * _areas(params)


def wind_wrench(params: VesselParams, state: VesselState, wind: WindCondition) -> np.ndarray:
    """Wind forces and moment q_a * [C_X*A_Fw, C_Y*A_Lw, C_N*A_Lw*L_oa]."""
    return wind_wrench_batch(params, state.as_array(), wind.speed, wind.direction)[0]


def _restoring_forces(params: VesselParams, nu: np.ndarray) -> np.ndarray:
    """C(v)v + D(v)v for a batch of body velocities (N, 3)."""
    u, v, r = nu[:, 0], nu[:, 1], nu[:, 2]
    coriolis = np.stack([
        (-params.m22 * v - params.m23 * r) * r,
        params.m11 * u * r,
        (params.m22 * v + params.m23 * r) * u - params.m11 * u * v,
    ], axis=-1)
    damping = np.stack([
        (-params.Xu - params.Xuu * np.abs(u)) * u,
        (-params.Yv - params.Yvv * np.abs(v)) * v - params.Yr * r,
        (-params.Nv - params.Nvv * np.abs(v)) * v + (-params.Nr - params.Nrr * np.abs(r)) * r,
    ], axis=-1)
    return coriolis + damping


def _restoring_jacobian(params: VesselParams, nu: np.ndarray) -> np.ndarray:
    """d(C(v)v + D(v)v)/dv for a batch of body velocities, shape (N, 3, 3)."""
    u, v, r = nu[:, 0], nu[:, 1], nu[:, 2]
    m11, m22, m23 = params.m11, params.m22, params.m23
    jac = np.zeros((nu.shape[0], 3, 3))
    jac[:, 0, 0] = -params.Xu - 2.0 * params.Xuu * np.abs(u)
    jac[:, 0, 1] = -m22 * r
    jac[:, 0, 2] = -m22 * v - 2.0 * m23 * r
    jac[:, 1, 0] = m11 * r
    jac[:, 1, 1] = -params.Yv - 2.0 * params.Yvv * np.abs(v)
    jac[:, 1, 2] = m11 * u - params.Yr
    jac[:, 2, 0] = m22 * v + m23 * r - m11 * v
    jac[:, 2, 1] = (m22 - m11) * u - params.Nv - 2.0 * params.Nvv * np.abs(v)
    jac[:, 2, 2] = m23 * u - params.Nr - 2.0 * params.Nrr * np.abs(r)
    return jac


def dynamics_batch(
    params: VesselParams,
    states: np.ndarray,
    controls: np.ndarray,
    wind_speed=0.0,
    wind_direction=0.0,
    smooth_thrust: bool = False,
    blend_width: float = 30.0,
    with_jacobians: bool = False,
):
    """
    Continuous-time state derivatives for N (state, control) pairs.

    :param states: Array (N, 6) of [x, y, psi, u, v, r]
    :param controls: Array (N, 2) of [rpm, alpha]
    :param wind_speed: Scalar or (N,) absolute wind speed
    :param wind_direction: Scalar or (N,) wind-from direction
    :param with_jacobians: Also return dF/ds (N, 6, 6) and dF/dc (N, 6, 2)
    :return: derivatives (N, 6), or (derivatives, A, B)
    """
    states = np.atleast_2d(np.asarray(states, dtype=float))
    controls = np.atleast_2d(np.asarray(controls, dtype=float))
    count = states.shape[0]
    psi = states[:, 2]
    nu = states[:, 3:6]
    rpm, alpha = controls[:, 0], controls[:, 1]
    m_inv = params.mass_matrix_inv

    cos_psi, sin_psi = np.cos(psi), np.sin(psi)
    u, v, r = nu[:, 0], nu[:, 1], nu[:, 2]

    force, dforce = _thrust_and_derivative(params, rpm, smooth_thrust, blend_width)
    cos_a, sin_a = np.cos(alpha), np.sin(alpha)
    tau_prop = np.stack([
        2.0 * force * cos_a,
        2.0 * force * sin_a,
        -2.0 * force * params.Lx * sin_a,
    ], axis=-1)

    u_rw, v_rw, speed, gamma = relative_wind(psi, u, v, wind_speed, wind_direction)
    coeff, dcoeff = wind_coefficients(params.wind_coeff_params, gamma)
    areas = _areas(params)
    q_a = 0.5 * params.rho_air * speed ** 2
    tau_wind = q_a[:, None] * coeff * areas

    derivatives = np.empty((count, STATE_DIM))
    derivatives[:, 0] = u * cos_psi - v * sin_psi
    derivatives[:, 1] = u * sin_psi + v * cos_psi
    derivatives[:, 2] = r
    net = tau_prop + tau_wind - _restoring_forces(params, nu)
    derivatives[:, 3:6] = net @ m_inv.T

    if not with_jacobians:
        return derivatives

    a_mat = np.zeros((count, STATE_DIM, STATE_DIM))
    a_mat[:, 0, 2] = -u * sin_psi - v * cos_psi
    a_mat[:, 0, 3] = cos_psi
    a_mat[:, 0, 4] = -sin_psi
    a_mat[:, 1, 2] = u * cos_psi - v * sin_psi
    a_mat[:, 1, 3] = sin_psi
    a_mat[:, 1, 4] = cos_psi
    a_mat[:, 2, 5] = 1.0

    speed_sq = speed ** 2
    calm = speed_sq < 1e-12
    safe_sq = np.where(calm, 1.0, speed_sq)
    dgamma_du = np.where(calm, 0.0, v_rw / safe_sq)
    dgamma_dv = np.where(calm, 0.0, -u_rw / safe_sq)
    rho_a = params.rho_air
    dtau_du = areas * (rho_a * u_rw[:, None] * coeff + q_a[:, None] * dcoeff * dgamma_du[:, None])
    dtau_dv = areas * (rho_a * v_rw[:, None] * coeff + q_a[:, None] * dcoeff * dgamma_dv[:, None])
    heading_offset = np.asarray(wind_direction) - psi
    du_dpsi = wind_speed * np.sin(heading_offset)
    dv_dpsi = -wind_speed * np.cos(heading_offset)
    dtau_dpsi = dtau_du * np.broadcast_to(du_dpsi, (count,))[:, None] \
        + dtau_dv * np.broadcast_to(dv_dpsi, (count,))[:, None]

    dnet_dnu = -_restoring_jacobian(params, nu)
    dnet_dnu[:, :, 0] += dtau_du
    dnet_dnu[:, :, 1] += dtau_dv
    a_mat[:, 3:6, 2] = dtau_dpsi @ m_inv.T
    a_mat[:, 3:6, 3:6] = np.einsum("ij,njk->nik", m_inv, dnet_dnu)

    dtau_drpm = np.stack([
        2.0 * dforce * cos_a,
        2.0 * dforce * sin_a,
        -2.0 * dforce * params.Lx * sin_a,
    ], axis=-1)
    dtau_dalpha = np.stack([
        -2.0 * force * sin_a,
        2.0 * force * cos_a,
        -2.0 * force * params.Lx * cos_a,
    ], axis=-1)
    b_mat = np.zeros((count, STATE_DIM, CONTROL_DIM))
    b_mat[:, 3:6, 0] = dtau_drpm @ m_inv.T
    b_mat[:, 3:6, 1] = dtau_dalpha @ m_inv.T
    return derivatives, a_mat, b_mat


def continuous_dynamics(
    params: VesselParams,
    state: VesselState,
    control: ControlInput,
    wind: WindCondition = CALM,
    smooth_thrust: bool = False,
) -> np.ndarray:
    """
    State derivative [R(psi)v ; M^-1(tau_prop + tau_wind - C(v)v - D(v)v)].

    Wave and current forcing are not modelled.
    """
    derivative = dynamics_batch(
        params,
        state.as_array()[None, :],
        control.as_array()[None, :],
        wind.speed,
        wind.direction,
        smooth_thrust=smooth_thrust,
    )
    return derivative[0]


def euler_step(
    params: VesselParams,
    state: VesselState,
    control: ControlInput,
    wind: WindCondition,
    dt: float,
    smooth_thrust: bool = False,
) -> VesselState:
    """
    First-order Euler step of the continuous dynamics.

    :raises ValueError: If dt is not positive
    """
    if not dt > 0.0:
        raise ValueError(f"dt must be > 0, got {dt}")
    derivative = continuous_dynamics(params, state, control, wind, smooth_thrust)
    return VesselState.from_array(state.as_array() + dt * derivative)


def simulate_euler(
    params: VesselParams,
    state: VesselState,
    controls: np.ndarray,
    wind: WindCondition,
    dt: float,
    smooth_thrust: bool = False,
    blend_width: float = 30.0,
) -> np.ndarray:
    """
    Roll a control sequence (K, 2) through Euler steps without wrapping heading.

    :return: Unwrapped state sequence (K+1, 6) starting at ``state``
    """
    if not dt > 0.0:
        raise ValueError(f"dt must be > 0, got {dt}")
    controls = np.atleast_2d(controls)
    states = np.empty((controls.shape[0] + 1, STATE_DIM))
    states[0] = state.as_array()
    for k, control in enumerate(controls):
        derivative = dynamics_batch(
            params, states[k][None, :], control[None, :], wind.speed, wind.direction,
            smooth_thrust=smooth_thrust, blend_width=blend_width,
        )[0]
        states[k + 1] = states[k] + dt * derivative
    return states


def integrate_fine(
    params: VesselParams,
    state: VesselState,
    control: ControlInput,
    wind: WindCondition,
    duration: float,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    y0: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    High-accuracy integration under a constant control (consistency oracle).

    :param y0: Optional unwrapped initial state overriding ``state``
    :return: Unwrapped final state (6,)
    """
    start = state.as_array() if y0 is None else np.asarray(y0, dtype=float)
    control_row = control.as_array()[None, :]

    def rhs(_t: float, y: np.ndarray) -> np.ndarray:
        return dynamics_batch(params, y[None, :], control_row, wind.speed, wind.direction)[0]

    solution = solve_ivp(rhs, (0.0, duration), start, method="DOP853", rtol=rtol, atol=atol)
    if not solution.success:
        raise RuntimeError(f"fine integration failed: {solution.message}")
    return solution.y[:, -1]


def dynamics_jacobians(
    params: VesselParams,
    states: np.ndarray,
    controls: np.ndarray,
    wind_speed=0.0,
    wind_direction=0.0,
    smooth_thrust: bool = True,
    blend_width: float = 30.0,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batched derivatives with continuous-time Jacobians (f, df/ds, df/dc)."""
    return dynamics_batch(
        params, states, controls, wind_speed, wind_direction,
        smooth_thrust=smooth_thrust, blend_width=blend_width, with_jacobians=True,
    )


def _quadratic_drag(params: VesselParams, forward: bool) -> float:
    """Hydrodynamic plus calm-air quadratic surge drag coefficient, ahead or astern."""
    coefficients, _ = wind_coefficients(params.wind_coeff_params, 0.0 if forward else math.pi)
    air_x = float(coefficients[0]) if not forward else -float(coefficients[0])
    return -params.Xuu + 0.5 * params.rho_air * params.AFw * air_x


def steady_surge_speed(params: VesselParams, rpm: float) -> float:
    """Straight-line surge speed in calm air at which the plant thrust balances the drag."""
    thrust = 2.0 * thrust_force(params, rpm)
    if thrust == 0.0:
        return 0.0
    a, b = _quadratic_drag(params, thrust > 0.0), -params.Xu
    if a <= 0.0:
        return float(thrust / b)
    speed = (-b + np.sqrt(b * b + 4.0 * a * abs(thrust))) / (2.0 * a)
    return float(np.sign(thrust) * speed)


def steady_rpm(params: VesselParams, speed: float) -> float:
    """Rpm whose undeadbanded thrust holds a straight-line surge speed in calm air."""
    drag = -params.Xu * speed + _quadratic_drag(params, speed >= 0.0) * abs(speed) * speed
    per_engine = 0.5 * drag
    revs = np.sign(per_engine) * np.sqrt(abs(per_engine) / params.thrust_coefficient)
    return float(60.0 * revs)
