//! Safety-filtered parking control for force-driven differential-drive
//! robots: polar-coordinate kinematics, a global strict control Lyapunov
//! function, control barrier functions over admissible fields, a closed-form
//! min-norm QP filter, and a deterministic simulator with CSV/SVG export.

pub mod cbf;
pub mod clf;
pub mod qp;
pub mod scenario;
pub mod sim;
pub mod vehicle;

pub use cbf::{barrier, cbf_terms, AdmissibleField, BarrierParams, CircularObstacle};
pub use clf::{
    c_q, clf_terms, desired_rates, desired_velocities, error_coords, lyapunov, lyapunov_residual,
    nominal_control, p_matrix, scalar_w, stable_sinc, w_dot_nominal, ErrorCoords, Gains,
    LyapunovBreakdown, SymMatrix2,
};
pub use qp::{
    active_set_oracle, active_set_oracle_full, clf_only, gamma_f, solve_closed_form,
    ConstraintTerms, QpError, QpParams, QpSolution, Region,
};
pub use scenario::{Scenario, ScenarioError};
pub use sim::{
    export_csv, export_svg, parse_csv, run, verify_clf, verify_clf_with_matrix, verify_qp, Check,
    ClfReport, Controller, QpReport, SimError, TrajectoryLog, TrajectoryRow, CSV_HEADER,
};
pub use vehicle::{
    accels_from_torques, cartesian_rhs, polar_pose, polar_rhs, rk4_step, wheel_torque_map,
    CartesianState, ControlInput, PolarPose, VehicleError, VehicleParams, WheelTorques, RHO_MIN,
};
