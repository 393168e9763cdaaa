//! Global strict Lyapunov function in polar coordinates, the nominal
//! stabilizing controller, and the CLF constraint row of the controller QP.
//!
//! The pose block rests on a 2x2 Lyapunov-equation solution `P` for the
//! `(alpha, psi)` subsystem; the full function is
//! `W = W1 + W2 + c_Q W1^2` with `W1 = (rho^2 + alpha^2 + lambda psi^2)/2`,
//! `W2 = [alpha psi] P [alpha psi]^T`, composed through
//! `V = mu (ln(W+1) + 1/(W+1) - 1) + (z^2/k_z + omega_err^2/k_omega)/2`.

use crate::vehicle::{polar_rhs, CartesianState, ControlInput, PolarPose, VehicleError, RHO_MIN};

/// Controller gains.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Gains {
    /// Pose-weight lambda, dimensionless, at least 1.
    pub lambda: f64,
    pub k_rho: f64,
    pub k_alpha: f64,
    pub k_z: f64,
    pub k_omega: f64,
    /// Pose-block weight of the composite Lyapunov function.
    pub mu: f64,
    /// Margin coefficient of the CLF constraint row; defaults to `mu / 2`.
    pub epsilon: f64,
}

/// Velocity-error coordinates `z = (v - v*)/rho`, `omega_err = omega - omega*`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorCoords {
    pub z: f64,
    pub omega_err: f64,
}

/// Symmetric positive definite 2x2 matrix `[[p11, p12], [p12, p22]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMatrix2 {
    pub p11: f64,
    pub p12: f64,
    pub p22: f64,
}

/// Every level of the Lyapunov construction at one state, plus the gradient
/// over `(rho, alpha, psi, z, omega_err)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovBreakdown {
    pub w1: f64,
    pub w2: f64,
    pub w: f64,
    pub w_sharp: f64,
    /// Quadratic velocity-error term `(z^2/k_z + omega_err^2/k_omega)/2`.
    pub u_quad: f64,
    pub v_total: f64,
    pub grad: [f64; 5],
}

/// Solution of the pose-subsystem Lyapunov equation together with its largest
/// eigenvalue and determinant.
///
/// `A^T P + P A = -I` for `A = [[-k_alpha, -k_rho lambda], [k_rho, 0]]`.
pub fn p_matrix(gains: &Gains) -> (SymMatrix2, f64, f64) {
    let (kr, ka, lam) = (gains.k_rho, gains.k_alpha, gains.lambda);
    let p = SymMatrix2 {
        p11: (1.0 + lam) / (2.0 * ka * lam),
        p12: 1.0 / (2.0 * kr * lam),
        p22: (ka * ka + kr * kr * lam * lam + kr * kr * lam) / (2.0 * ka * kr * kr * lam),
    };
    let mid = 0.5 * (p.p11 + p.p22);
    let radius = (0.25 * (p.p11 - p.p22) * (p.p11 - p.p22) + p.p12 * p.p12).sqrt();
    (p, mid + radius, p.p11 * p.p22 - p.p12 * p.p12)
}

/// Infinity norm of `A^T P + P A + I`; zero (to rounding) for [`p_matrix`]'s P.
pub fn lyapunov_residual(gains: &Gains, p: &SymMatrix2) -> f64 {
    let (kr, ka, lam) = (gains.k_rho, gains.k_alpha, gains.lambda);
    let s11 = 2.0 * (-ka * p.p11 + kr * p.p12) + 1.0;
    let s12 = (-ka * p.p12 + kr * p.p22) - kr * lam * p.p11;
    let s22 = 2.0 * (-kr * lam * p.p12) + 1.0;
    (s11.abs() + s12.abs()).max(s12.abs() + s22.abs())
}

/// Curvature coefficient `c_Q = (8/pi^2)(k_rho^2/k_alpha) lambda^2 lambda_M(P)^2`
/// of the quadratic correction `c_Q W1^2`.
pub fn c_q(gains: &Gains) -> f64 {
    let (_, lambda_max, _) = p_matrix(gains);
    8.0 / (std::f64::consts::PI * std::f64::consts::PI) * (gains.k_rho * gains.k_rho / gains.k_alpha)
        * gains.lambda
        * gains.lambda
        * lambda_max
        * lambda_max
}

/// The pose Lyapunov stack `(W1, W2, W, W_sharp)`.
pub fn scalar_w(pose: &PolarPose, gains: &Gains) -> (f64, f64, f64, f64) {
    let (p, _, _) = p_matrix(gains);
    let (a, ps) = (pose.alpha, pose.psi);
    let w1 = 0.5 * (pose.rho * pose.rho + a * a + gains.lambda * ps * ps);
    let w2 = p.p11 * a * a + 2.0 * p.p12 * a * ps + p.p22 * ps * ps;
    let w = w1 + w2 + c_q(gains) * w1 * w1;
    (w1, w2, w, (w + 1.0).ln())
}

/// Numerically stable `(sinc(s), sinc'(s))` with `sinc(s) = sin(s)/s`.
///
/// Below `|s| = 1e-4` both switch to Taylor series whose truncation error is
/// under 1e-17.
pub fn stable_sinc(s: f64) -> (f64, f64) {
    if s.abs() >= 1e-4 {
        let (sin_s, cos_s) = s.sin_cos();
        (sin_s / s, (s * cos_s - sin_s) / (s * s))
    } else {
        let s2 = s * s;
        (1.0 - s2 / 6.0 + s2 * s2 / 120.0, s * (-1.0 / 3.0 + s2 / 30.0))
    }
}

/// Desired velocities `(v*, omega*)` of the nominal parking law.
pub fn desired_velocities(pose: &PolarPose, gains: &Gains) -> (f64, f64) {
    let (sinc2a, _) = stable_sinc(2.0 * pose.alpha);
    let v_star = gains.k_rho * pose.alpha.cos() * pose.rho;
    let omega_star =
        gains.k_alpha * pose.alpha + gains.k_rho * sinc2a * (pose.alpha + gains.lambda * pose.psi);
    (v_star, omega_star)
}

/// Velocity-error coordinates of a state.
pub fn error_coords(
    state: &CartesianState,
    pose: &PolarPose,
    gains: &Gains,
) -> Result<ErrorCoords, VehicleError> {
    if pose.rho < RHO_MIN {
        return Err(VehicleError::DegeneratePose { rho: pose.rho });
    }
    let (v_star, omega_star) = desired_velocities(pose, gains);
    Ok(ErrorCoords {
        z: (state.v - v_star) / pose.rho,
        omega_err: state.omega - omega_star,
    })
}

/// Evaluates the composite Lyapunov function and its gradient.
pub fn lyapunov(pose: &PolarPose, err: &ErrorCoords, gains: &Gains) -> LyapunovBreakdown {
    let (p, _, _) = p_matrix(gains);
    let cq = c_q(gains);
    let (a, ps) = (pose.alpha, pose.psi);
    let w1 = 0.5 * (pose.rho * pose.rho + a * a + gains.lambda * ps * ps);
    let w2 = p.p11 * a * a + 2.0 * p.p12 * a * ps + p.p22 * ps * ps;
    let w = w1 + w2 + cq * w1 * w1;
    let w_sharp = (w + 1.0).ln();
    let u_quad = 0.5 * (err.z * err.z / gains.k_z + err.omega_err * err.omega_err / gains.k_omega);
    let v_total = gains.mu * (w_sharp + 1.0 / (w + 1.0) - 1.0) + u_quad;

    let c1 = 1.0 + 2.0 * cq * w1;
    let pose_scale = gains.mu * w / ((w + 1.0) * (w + 1.0));
    let grad = [
        pose_scale * (c1 * pose.rho),
        pose_scale * (c1 * a + 2.0 * p.p11 * a + 2.0 * p.p12 * ps),
        pose_scale * (c1 * gains.lambda * ps + 2.0 * p.p12 * a + 2.0 * p.p22 * ps),
        err.z / gains.k_z,
        err.omega_err / gains.k_omega,
    ];
    LyapunovBreakdown { w1, w2, w, w_sharp, u_quad, v_total, grad }
}

/// Time derivatives `(v*_dot, omega*_dot)` of the desired velocities at the
/// actual `(v, omega)`.
pub fn desired_rates(
    state: &CartesianState,
    pose: &PolarPose,
    gains: &Gains,
) -> Result<(f64, f64), VehicleError> {
    if pose.rho < RHO_MIN {
        return Err(VehicleError::DegeneratePose { rho: pose.rho });
    }
    let [_, alpha_dot, psi_dot] = polar_rhs(pose, state.v, state.omega)?;
    let v_star_dot = gains.k_rho * (pose.rho * state.omega * pose.alpha.sin() - state.v);
    let (sinc2a, sinc2a_prime) = stable_sinc(2.0 * pose.alpha);
    let omega_star_dot = gains.k_alpha * alpha_dot
        + gains.k_rho
            * (2.0 * alpha_dot * sinc2a_prime * (pose.alpha + gains.lambda * pose.psi)
                + sinc2a * (alpha_dot + gains.lambda * psi_dot));
    Ok((v_star_dot, omega_star_dot))
}

/// The feedback-linearizing nominal control `(u_v, u_omega)`.
///
/// In closed loop the velocity errors obey `z_dot = -k_z z` and
/// `omega_err_dot = -k_omega omega_err`.
pub fn nominal_control(
    state: &CartesianState,
    pose: &PolarPose,
    gains: &Gains,
) -> Result<ControlInput, VehicleError> {
    let err = error_coords(state, pose, gains)?;
    let (v_star_dot, omega_star_dot) = desired_rates(state, pose, gains)?;
    let cos_a = pose.alpha.cos();
    let u_v = v_star_dot
        - pose.rho
            * (gains.k_rho * cos_a * cos_a * err.z + cos_a * err.z * err.z + gains.k_z * err.z);
    let u_omega = omega_star_dot - gains.k_omega * err.omega_err;
    Ok([u_v, u_omega])
}

/// `<grad W, f_nom>`: the pose-block decrease rate under the nominal law.
pub fn w_dot_nominal(pose: &PolarPose, gains: &Gains) -> f64 {
    let (p, _, _) = p_matrix(gains);
    let cq = c_q(gains);
    let (a, ps) = (pose.alpha, pose.psi);
    let w1 = 0.5 * (pose.rho * pose.rho + a * a + gains.lambda * ps * ps);
    let c1 = 1.0 + 2.0 * cq * w1;
    let grad_w = [
        c1 * pose.rho,
        c1 * a + 2.0 * p.p11 * a + 2.0 * p.p12 * ps,
        c1 * gains.lambda * ps + 2.0 * p.p12 * a + 2.0 * p.p22 * ps,
    ];
    let cos_a = a.cos();
    let (sinc2a, _) = stable_sinc(2.0 * a);
    let f_nom = [
        -gains.k_rho * cos_a * cos_a * pose.rho,
        -gains.k_alpha * a - gains.k_rho * sinc2a * gains.lambda * ps,
        gains.k_rho * sinc2a * a,
    ];
    grad_w[0] * f_nom[0] + grad_w[1] * f_nom[1] + grad_w[2] * f_nom[2]
}

/// CLF constraint row `(a1, b1)` of the controller QP: the constraint is
/// `a1 + b1 . (u + delta) <= 0` in the scaled input `u = (u_v/rho, u_omega)`.
pub fn clf_terms(
    state: &CartesianState,
    pose: &PolarPose,
    err: &ErrorCoords,
    gains: &Gains,
) -> Result<(f64, [f64; 2]), VehicleError> {
    if pose.rho < RHO_MIN {
        return Err(VehicleError::DegeneratePose { rho: pose.rho });
    }
    let breakdown = lyapunov(pose, err, gains);
    let (v_star_dot, omega_star_dot) = desired_rates(state, pose, gains)?;
    let [rho_dot, alpha_dot, psi_dot] = polar_rhs(pose, state.v, state.omega)?;
    let cos_a = pose.alpha.cos();
    let f1 = [
        rho_dot,
        alpha_dot,
        psi_dot,
        -v_star_dot / pose.rho + gains.k_rho * cos_a * cos_a * err.z + cos_a * err.z * err.z,
        -omega_star_dot,
    ];
    let lf1_v: f64 = (0..5).map(|i| breakdown.grad[i] * f1[i]).sum();
    let zeta_sq = err.z * err.z + err.omega_err * err.omega_err;
    let wp1 = breakdown.w + 1.0;
    let sigma = 0.5 * zeta_sq - gains.epsilon * breakdown.w * w_dot_nominal(pose, gains) / (wp1 * wp1);
    Ok((
        lf1_v + sigma,
        [err.z / gains.k_z, err.omega_err / gains.k_omega],
    ))
}
