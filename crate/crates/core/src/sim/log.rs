//! Trajectory logging types shared by the simulator and the exporters.

use crate::qp::Region;

/// One control-period sample of a simulation run.
///
/// `v_lyap` and `w_lyap` are the Lyapunov levels (CSV columns `V` and `W`).
/// `h`/`h0` are minima over all configured obstacles, or `0` when the
/// scenario has none. `u_v`/`u_omega` are the physical inputs applied from
/// this sample until the next; `f1_residual`/`f2_residual` are the
/// constraint residuals of the applied input (worst CBF row for `f2`). The
/// filtered laws report the rectified CLF row they enforce; the nominal law
/// reports its raw row.
///
/// The `region` column labels the law that produced the input: the QP
/// classifier's region for the filtered controller, `clf-active` or
/// `both-inactive` for the two branches of the CLF-only laws, and
/// `degenerate` when a guard dropped a constraint row or the run froze at a
/// terminal state that no longer satisfies the inactive-constraint pattern.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
    pub omega: f64,
    pub rho: f64,
    pub alpha: f64,
    pub psi: f64,
    pub z: f64,
    pub omega_err: f64,
    pub v_lyap: f64,
    pub w_lyap: f64,
    pub h: f64,
    pub h0: f64,
    pub u_v: f64,
    pub u_omega: f64,
    pub tau_l: f64,
    pub tau_r: f64,
    pub region: Region,
    pub f1_residual: f64,
    pub f2_residual: f64,
}

/// Ordered samples of one run; `t` is strictly increasing and every entry is
/// finite.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryLog {
    pub rows: Vec<TrajectoryRow>,
}

impl TrajectoryLog {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> Option<&TrajectoryRow> {
        self.rows.last()
    }

    /// Smallest barrier value over the run; infinity for an empty log.
    pub fn min_h(&self) -> f64 {
        self.rows.iter().map(|r| r.h).fold(f64::INFINITY, f64::min)
    }

    /// Smallest distance from the logged positions to a point.
    pub fn min_distance_to(&self, cx: f64, cy: f64) -> f64 {
        self.rows
            .iter()
            .map(|r| ((r.x - cx).powi(2) + (r.y - cy).powi(2)).sqrt())
            .fold(f64::INFINITY, f64::min)
    }
}
