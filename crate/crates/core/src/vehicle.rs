//! Differential-drive vehicle model: Cartesian and polar kinematics, the
//! wheel-torque feedback transform, and a fixed-step RK4 integrator.

use thiserror::Error;

/// Minimum distance to the origin at which polar coordinates are defined.
pub const RHO_MIN: f64 = 1e-6;

/// Acceleration-level control input `(u_v, u_omega)` after the feedback
/// transform, so that `v_dot = u_v` and `omega_dot = u_omega`.
pub type ControlInput = [f64; 2];

/// Wheel torques `(tau_l, tau_r)`.
pub type WheelTorques = [f64; 2];

/// Physical parameters of the vehicle.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct VehicleParams {
    /// Mass in kg.
    pub mass: f64,
    /// Yaw inertia in kg m^2.
    pub inertia: f64,
    /// Wheel radius in m.
    pub wheel_radius: f64,
    /// Axle parameter R of the torque transform, in m.
    pub axle: f64,
}

/// Ground-truth state `(x, y, theta, v, omega)` integrated by the simulator.
///
/// `theta` lives on the real line; it is never wrapped.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CartesianState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
    pub omega: f64,
}

/// Polar pose `(rho, alpha, psi)` with `psi = atan2(-y, -x)` and
/// `alpha = psi - theta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarPose {
    pub rho: f64,
    pub alpha: f64,
    pub psi: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum VehicleError {
    #[error("degenerate pose: rho = {rho:.3e} is below the polar-chart minimum {RHO_MIN:.0e}")]
    DegeneratePose { rho: f64 },
}

/// Time derivative of the Cartesian state under input `u`.
pub fn cartesian_rhs(state: &CartesianState, u: ControlInput) -> [f64; 5] {
    [
        state.v * state.theta.cos(),
        state.v * state.theta.sin(),
        state.omega,
        u[0],
        u[1],
    ]
}

/// Maps an acceleration input to wheel torques:
/// `[tau_l; tau_r] = (r/2) [m, I/(2R); m, -I/(2R)] [u_v; u_omega]`.
pub fn wheel_torque_map(params: &VehicleParams, u: ControlInput) -> WheelTorques {
    let half_r = 0.5 * params.wheel_radius;
    let i_2r = params.inertia / (2.0 * params.axle);
    [
        half_r * (params.mass * u[0] + i_2r * u[1]),
        half_r * (params.mass * u[0] - i_2r * u[1]),
    ]
}

/// Recovers the acceleration input from wheel torques; the left inverse of
/// [`wheel_torque_map`].
pub fn accels_from_torques(params: &VehicleParams, tau: WheelTorques) -> ControlInput {
    let inv_r = 1.0 / params.wheel_radius;
    [
        inv_r / params.mass * (tau[0] + tau[1]),
        inv_r / params.inertia * (2.0 * params.axle) * (tau[0] - tau[1]),
    ]
}

/// Computes the polar pose of a Cartesian state.
///
/// When `prev_psi` is supplied, `psi` is shifted by the multiple of 2π nearest
/// to it, so that successive samples along a continuous trajectory stay on the
/// same branch. `alpha = psi - theta` uses the shifted `psi`.
pub fn polar_pose(
    state: &CartesianState,
    prev_psi: Option<f64>,
) -> Result<PolarPose, VehicleError> {
    let rho = state.x.hypot(state.y);
    if rho < RHO_MIN {
        return Err(VehicleError::DegeneratePose { rho });
    }
    let mut psi = (-state.y).atan2(-state.x);
    if let Some(prev) = prev_psi {
        psi += std::f64::consts::TAU * ((prev - psi) / std::f64::consts::TAU).round();
    }
    Ok(PolarPose {
        rho,
        alpha: psi - state.theta,
        psi,
    })
}

/// Polar kinematics `(rho_dot, alpha_dot, psi_dot)` at the given velocities.
pub fn polar_rhs(pose: &PolarPose, v: f64, omega: f64) -> Result<[f64; 3], VehicleError> {
    if pose.rho <= 0.0 {
        return Err(VehicleError::DegeneratePose { rho: pose.rho });
    }
    let (sin_a, cos_a) = pose.alpha.sin_cos();
    let psi_dot = v / pose.rho * sin_a;
    Ok([-v * cos_a, psi_dot - omega, psi_dot])
}

/// Advances the state one classical RK4 step with the input held constant
/// (zero-order hold).
pub fn rk4_step(state: &CartesianState, u: ControlInput, dt: f64) -> CartesianState {
    let add = |s: &CartesianState, k: &[f64; 5], h: f64| CartesianState {
        x: s.x + h * k[0],
        y: s.y + h * k[1],
        theta: s.theta + h * k[2],
        v: s.v + h * k[3],
        omega: s.omega + h * k[4],
    };
    let k1 = cartesian_rhs(state, u);
    let k2 = cartesian_rhs(&add(state, &k1, 0.5 * dt), u);
    let k3 = cartesian_rhs(&add(state, &k2, 0.5 * dt), u);
    let k4 = cartesian_rhs(&add(state, &k3, dt), u);
    let sixth = dt / 6.0;
    CartesianState {
        x: state.x + sixth * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        y: state.y + sixth * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        theta: state.theta + sixth * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
        v: state.v + sixth * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3]),
        omega: state.omega + sixth * (k1[4] + 2.0 * k2[4] + 2.0 * k3[4] + k4[4]),
    }
}
