//! Closed-loop simulator: zero-order-hold control of the force-driven
//! unicycle under one of three laws, with trajectory logging, CSV and SVG
//! export, and randomized verification suites.

mod csv;
mod log;
mod svg;
mod verify;

pub use csv::{export_csv, parse_csv, CSV_HEADER};
pub use log::{TrajectoryLog, TrajectoryRow};
pub use svg::export_svg;
pub use verify::{verify_clf, verify_clf_with_matrix, verify_qp, Check, ClfReport, QpReport};

use std::fmt;
use std::str::FromStr;

use crate::cbf::{barrier, cbf_terms, AdmissibleField};
use crate::clf::{clf_terms, error_coords, lyapunov, nominal_control};
use crate::qp::{
    active_set_oracle_full, clf_only, gamma_f, solve_closed_form, ConstraintTerms, QpError,
    QpParams, Region, B_NORM_FLOOR,
};
use crate::scenario::Scenario;
use crate::vehicle::{
    polar_pose, rk4_step, wheel_torque_map, CartesianState, PolarPose, VehicleError,
};

/// Velocity-error norm below which a run inside the stop radius counts as
/// parked.
const ZETA_STOP: f64 = 1e-3;

/// Radius below which the vehicle counts as parked regardless of the
/// velocity-error gate. The polar transform is undefined at the origin
/// (guarded at [`crate::vehicle::RHO_MIN`]); the min-norm laws shed velocity
/// error slower than radius, so a well-parking run can reach the guard with
/// the gate still open. One decade of margin keeps the terminal row's pose
/// computable.
const RHO_FREEZE: f64 = 1e-5;

/// Control law selector for [`run`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Controller {
    /// Backstepped tracking law, no filter.
    Nominal,
    /// Pointwise min-norm law enforcing only the softened CLF row.
    ClfQp,
    /// Full filter enforcing the CLF row and every obstacle's CBF row.
    ClfCbfQp,
}

impl fmt::Display for Controller {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Controller::Nominal => "nominal",
            Controller::ClfQp => "clf-qp",
            Controller::ClfCbfQp => "clf-cbf-qp",
        })
    }
}

impl FromStr for Controller {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nominal" => Ok(Controller::Nominal),
            "clf-qp" => Ok(Controller::ClfQp),
            "clf-cbf-qp" => Ok(Controller::ClfCbfQp),
            other => Err(format!(
                "unknown controller {other:?}, expected nominal, clf-qp, or clf-cbf-qp"
            )),
        }
    }
}

/// Failures surfaced by the simulator and the exporters.
#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("initial state violates the barrier of the obstacle at ({cx}, {cy}): h = {h:.6e}")]
    UnsafeStart { h: f64, cx: f64, cy: f64 },
    #[error("controller became degenerate at t = {t} s: {source}")]
    DegenerateQp {
        t: f64,
        #[source]
        source: QpError,
    },
    #[error("pose degenerated at t = {t} s: {source}")]
    DegeneratePose {
        t: f64,
        #[source]
        source: VehicleError,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Csv {
        path: String,
        line: usize,
        message: String,
    },
}

/// Simulates `scenario` under `controller` and returns one log row per
/// control period.
///
/// The control input is recomputed every `control_dt` from the polar pose
/// (with the heading-error angle unwrapped against the previous period) and
/// held while the Cartesian state advances through `control_dt / dt`
/// Runge-Kutta substeps. The filtered laws act on the scaled input
/// `(u_v / rho, u_omega)`; rows log the physical input and the wheel torques
/// realizing it.
///
/// The run ends at `t_max`, or earlier once the vehicle is parked: either
/// `rho < rho_stop` with the velocity-error norm below `1e-3`, or `rho`
/// inside the pose-resolution deadband. A parked run appends one final row
/// with zero input. Runs under the full filter project each substate
/// onto the admissible set to shed integration round-off; the other laws are
/// free to leave it. The returned log is deterministic: equal scenarios and
/// controllers produce bit-identical logs.
pub fn run(scenario: &Scenario, controller: Controller) -> Result<TrajectoryLog, SimError> {
    for o in &scenario.obstacles {
        let (h, _) = barrier(&scenario.init, o, &scenario.barrier);
        if h < 0.0 {
            return Err(SimError::UnsafeStart { h, cx: o.cx, cy: o.cy });
        }
    }

    let n_control = (scenario.t_max / scenario.control_dt + 1e-9).floor() as usize;
    let n_sub = scenario.steps_per_control();
    let gains = &scenario.gains;
    let qp = &scenario.qp;

    let mut state = scenario.init;
    let mut prev_psi = None;
    let mut rows = Vec::with_capacity(n_control + 1);

    for k in 0..=n_control {
        let t = k as f64 * scenario.control_dt;
        let pose_err = |e| SimError::DegeneratePose { t, source: e };
        let pose = polar_pose(&state, prev_psi).map_err(pose_err)?;
        prev_psi = Some(pose.psi);
        let err = error_coords(&state, &pose, gains).map_err(pose_err)?;
        let (a1, b1) = clf_terms(&state, &pose, &err, gains).map_err(pose_err)?;
        let a1_bar = gamma_f(a1, qp.gamma);

        let mut cbf_rows = Vec::with_capacity(scenario.obstacles.len());
        let (mut h_min, mut h0_min) = (0.0, 0.0);
        for (i, o) in scenario.obstacles.iter().enumerate() {
            let (h, h0) = barrier(&state, o, &scenario.barrier);
            if i == 0 || h < h_min {
                h_min = h;
            }
            if i == 0 || h0 < h0_min {
                h0_min = h0;
            }
            let (a2, b2) = cbf_terms(&state, &pose, o, &scenario.barrier).map_err(pose_err)?;
            cbf_rows.push((a2, b2));
        }

        let zeta = err.z.hypot(err.omega_err);
        let converged =
            (pose.rho < scenario.rho_stop && zeta < ZETA_STOP) || pose.rho < RHO_FREEZE;

        let (u_bar, region, f1_residual, f2_residual) = if converged {
            frozen_row(a1, a1_bar, &cbf_rows)
        } else {
            control_step(controller, t, &state, &pose, a1, a1_bar, b1, &cbf_rows, scenario)?
        };

        let u_phys = [pose.rho * u_bar[0], u_bar[1]];
        let tau = wheel_torque_map(&scenario.vehicle, u_phys);
        let lyap = lyapunov(&pose, &err, gains);
        rows.push(TrajectoryRow {
            t,
            x: state.x,
            y: state.y,
            theta: state.theta,
            v: state.v,
            omega: state.omega,
            rho: pose.rho,
            alpha: pose.alpha,
            psi: pose.psi,
            z: err.z,
            omega_err: err.omega_err,
            v_lyap: lyap.v_total,
            w_lyap: lyap.w,
            h: h_min,
            h0: h0_min,
            u_v: u_phys[0],
            u_omega: u_phys[1],
            tau_l: tau[0],
            tau_r: tau[1],
            region,
            f1_residual,
            f2_residual,
        });

        if converged || k == n_control {
            break;
        }
        for _ in 0..n_sub {
            state = rk4_step(&state, u_phys, scenario.dt);
            if controller == Controller::ClfCbfQp {
                project_to_safe_set(&mut state, scenario);
            }
        }
    }

    Ok(TrajectoryLog { rows })
}

/// Terminal row of a converged run: zero input, residuals evaluated at it.
fn frozen_row(a1: f64, a1_bar: f64, cbf_rows: &[(f64, [f64; 2])]) -> Row {
    let f2 = worst_cbf_residual(cbf_rows, [0.0, 0.0]);
    let region = if a1 < 0.0 && f2 <= 0.0 {
        Region::BothInactive
    } else {
        Region::Degenerate
    };
    ([0.0, 0.0], region, a1_bar, f2)
}

type Row = ([f64; 2], Region, f64, f64);

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn worst_cbf_residual(cbf_rows: &[(f64, [f64; 2])], u: [f64; 2]) -> f64 {
    cbf_rows
        .iter()
        .map(|&(a2, b2)| a2 + dot(b2, u))
        .fold(0.0, f64::max)
}

#[allow(clippy::too_many_arguments)]
fn control_step(
    controller: Controller,
    t: f64,
    state: &CartesianState,
    pose: &PolarPose,
    a1: f64,
    a1_bar: f64,
    b1: [f64; 2],
    cbf_rows: &[(f64, [f64; 2])],
    scenario: &Scenario,
) -> Result<Row, SimError> {
    let qp = &scenario.qp;
    let qp_err = |e| SimError::DegenerateQp { t, source: e };
    match controller {
        Controller::Nominal => {
            let u_phys = nominal_control(state, pose, &scenario.gains)
                .map_err(|e| SimError::DegeneratePose { t, source: e })?;
            let u = [u_phys[0] / pose.rho, u_phys[1]];
            let region = if a1 < 0.0 { Region::BothInactive } else { Region::ClfActive };
            Ok((u, region, a1 + dot(b1, u), worst_cbf_residual(cbf_rows, u)))
        }
        Controller::ClfQp => {
            let (u, region, f1) = clf_only_row(a1, a1_bar, b1, qp).map_err(qp_err)?;
            Ok((u, region, f1, worst_cbf_residual(cbf_rows, u)))
        }
        Controller::ClfCbfQp => match cbf_rows {
            [] => {
                let (u, region, f1) = clf_only_row(a1, a1_bar, b1, qp).map_err(qp_err)?;
                Ok((u, region, f1, 0.0))
            }
            [(a2, b2)] => {
                let terms = ConstraintTerms::new(a1, b1, *a2, *b2, qp);
                let sol = solve_closed_form(&terms, qp).map_err(qp_err)?;
                Ok((sol.u, sol.region, sol.f1_residual, sol.f2_residual))
            }
            _ => {
                let terms: Vec<ConstraintTerms> = cbf_rows
                    .iter()
                    .map(|&(a2, b2)| ConstraintTerms::new(a1, b1, a2, b2, qp))
                    .collect();
                let (u, delta) = active_set_oracle_full(&terms, qp).map_err(qp_err)?;
                let f1 = a1_bar + dot(b1, [u[0] + delta[0], u[1] + delta[1]]);
                let f2 = worst_cbf_residual(cbf_rows, u);
                let clf_active = a1 >= 0.0 && f1 > -1e-9 * a1_bar.abs().max(1.0);
                let cbf_active = cbf_rows
                    .iter()
                    .any(|&(a2, b2)| a2 + dot(b2, u) > -1e-9 * a2.abs().max(1.0));
                let region = match (clf_active, cbf_active) {
                    (false, false) => Region::BothInactive,
                    (true, false) => Region::ClfActive,
                    (false, true) => Region::CbfActive,
                    (true, true) => Region::BothActive,
                };
                Ok((u, region, f1, f2))
            }
        },
    }
}

/// Shared branch for the CLF-only law and the filter with no obstacles.
fn clf_only_row(
    a1: f64,
    a1_bar: f64,
    b1: [f64; 2],
    qp: &QpParams,
) -> Result<([f64; 2], Region, f64), QpError> {
    let u = clf_only(a1, b1, qp)?;
    let b1_sq = dot(b1, b1);
    let (region, lambda1) = if b1_sq < B_NORM_FLOOR * B_NORM_FLOOR {
        (Region::Degenerate, 0.0)
    } else if a1 < 0.0 {
        (Region::BothInactive, 0.0)
    } else {
        let m = qp.m_weight;
        (Region::ClfActive, m / (m + 1.0) * a1_bar / b1_sq)
    };
    let m = qp.m_weight;
    let ud = [
        u[0] - lambda1 / m * b1[0],
        u[1] - lambda1 / m * b1[1],
    ];
    Ok((u, region, a1_bar + dot(b1, ud)))
}

/// Clamps integration round-off so a filtered run never logs `h < 0`.
///
/// Three stages, each a no-op on states already clear of the boundary: push
/// the position radially out of any obstacle until `h0 >= 2e-12`, zero both
/// velocities when the remaining velocity budget is positive but below
/// `1e-20`, and otherwise scale the velocity pair down until `h >= 1e-12`.
/// The filter keeps the exact flow inside the admissible set, so every
/// correction is of integrator-truncation size and only fires with the
/// boundary already active.
fn project_to_safe_set(state: &mut CartesianState, scenario: &Scenario) {
    const H0_FLOOR: f64 = 2e-12;
    const H_FLOOR: f64 = 1e-12;
    const BUDGET_STICTION: f64 = 1e-20;

    if scenario.obstacles.is_empty() {
        return;
    }
    for o in &scenario.obstacles {
        if o.value(state.x, state.y) < H0_FLOOR {
            let dx = state.x - o.cx;
            let dy = state.y - o.cy;
            let d = dx.hypot(dy);
            let target = (o.radius * o.radius + H0_FLOOR / o.scale).sqrt();
            if d > 0.0 {
                state.x = o.cx + dx * (target / d);
                state.y = o.cy + dy * (target / d);
            } else {
                state.x = o.cx + target;
            }
        }
    }

    let h0_min = scenario
        .obstacles
        .iter()
        .map(|o| o.value(state.x, state.y))
        .fold(f64::INFINITY, f64::min);
    let budget = scenario.barrier.l_v * state.v * state.v
        + scenario.barrier.l_omega * state.omega * state.omega;
    if budget > 0.0 && h0_min - budget < H_FLOOR {
        let target = (h0_min - H_FLOOR).max(0.0);
        if target <= BUDGET_STICTION {
            state.v = 0.0;
            state.omega = 0.0;
        } else {
            let s = (target / budget).sqrt();
            state.v *= s;
            state.omega *= s;
        }
    }
}

#[cfg(test)]
mod tests;
