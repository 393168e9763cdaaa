//! Backstepped zeroing barrier over a pluggable admissible-set field.
//!
//! A field supplies the position-level margin `h0` and its gradient; the
//! velocity-aware barrier is `h = h0 - l_v v^2 - l_omega omega^2`, whose
//! 0-superlevel set is forward invariant under the filter QP. Because `h`
//! ignores heading, a vehicle at rest satisfies the barrier condition
//! trivially; the constraint row only bites while moving.

use crate::vehicle::{CartesianState, PolarPose, VehicleError, RHO_MIN};

/// Position-level admissible-set field: `h0(x, y) >= 0` is the allowed set.
pub trait AdmissibleField {
    fn value(&self, x: f64, y: f64) -> f64;
    fn gradient(&self, x: f64, y: f64) -> [f64; 2];
}

/// Disk exclusion zone: `h0 = scale ((x - cx)^2 + (y - cy)^2 - radius^2)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CircularObstacle {
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
    pub scale: f64,
}

impl AdmissibleField for CircularObstacle {
    fn value(&self, x: f64, y: f64) -> f64 {
        let (dx, dy) = (x - self.cx, y - self.cy);
        self.scale * (dx * dx + dy * dy - self.radius * self.radius)
    }

    fn gradient(&self, x: f64, y: f64) -> [f64; 2] {
        [2.0 * self.scale * (x - self.cx), 2.0 * self.scale * (y - self.cy)]
    }
}

/// Velocity weights and the linear class-K slope of the barrier condition.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BarrierParams {
    pub l_v: f64,
    pub l_omega: f64,
    pub alpha_h_slope: f64,
}

/// Evaluates the velocity-aware barrier: returns `(h, h0)`.
pub fn barrier(
    state: &CartesianState,
    field: &dyn AdmissibleField,
    params: &BarrierParams,
) -> (f64, f64) {
    let h0 = field.value(state.x, state.y);
    let h = h0 - params.l_v * state.v * state.v - params.l_omega * state.omega * state.omega;
    (h, h0)
}

/// CBF constraint row `(a2, b2)` of the filter QP: the constraint is
/// `a2 + b2 . u <= 0` in the scaled input `u = (u_v/rho, u_omega)`, which is
/// `h_dot >= -alpha_h_slope * h` rearranged.
pub fn cbf_terms(
    state: &CartesianState,
    pose: &PolarPose,
    field: &dyn AdmissibleField,
    params: &BarrierParams,
) -> Result<(f64, [f64; 2]), VehicleError> {
    if pose.rho < RHO_MIN {
        return Err(VehicleError::DegeneratePose { rho: pose.rho });
    }
    let (h, _) = barrier(state, field, params);
    let grad = field.gradient(state.x, state.y);
    let a2 = -(grad[0] * state.v * state.theta.cos() + grad[1] * state.v * state.theta.sin())
        - params.alpha_h_slope * h;
    let b2 = [
        2.0 * params.l_v * state.v * pose.rho,
        2.0 * params.l_omega * state.omega,
    ];
    Ok((a2, b2))
}
