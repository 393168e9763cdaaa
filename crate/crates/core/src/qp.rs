//! Closed-form solution of the min-norm safety-filter QP
//!
//! ```text
//!   minimize    (|u|^2 + m |delta|^2) / 2
//!   subject to  a1_bar + b1 . (u + delta) <= 0      (CLF row, softened)
//!               a2     + b2 . u          <= 0      (CBF row, hard)
//! ```
//!
//! together with a region classifier, a CLF-only variant, and an independent
//! active-set KKT oracle used to cross-check the closed form.

use nalgebra::{DMatrix, DVector};

/// Weights of the filter QP.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct QpParams {
    /// Amplification of nonnegative CLF decrease demands, at least 1.
    pub gamma: f64,
    /// Penalty weight on the CLF slack, at least 1.
    pub m_weight: f64,
}

impl QpParams {
    /// Stability mode: `gamma` derived from `gamma * m / (m + 1) = 1`.
    pub fn stability(m_weight: f64) -> Self {
        QpParams { gamma: (m_weight + 1.0) / m_weight, m_weight }
    }
}

/// One QP instance: CLF row `(a1, a1_bar, b1)` and CBF row `(a2, b2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintTerms {
    pub a1: f64,
    pub a1_bar: f64,
    pub a2: f64,
    pub b1: [f64; 2],
    pub b2: [f64; 2],
}

impl ConstraintTerms {
    pub fn new(a1: f64, b1: [f64; 2], a2: f64, b2: [f64; 2], params: &QpParams) -> Self {
        ConstraintTerms { a1, a1_bar: gamma_f(a1, params.gamma), a2, b1, b2 }
    }
}

/// Active-constraint pattern of a QP solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    BothInactive,
    ClfActive,
    CbfActive,
    BothActive,
    /// A constraint row was dropped by a degeneracy guard.
    Degenerate,
}

impl std::fmt::Display for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Region::BothInactive => "both-inactive",
            Region::ClfActive => "clf-active",
            Region::CbfActive => "cbf-active",
            Region::BothActive => "both-active",
            Region::Degenerate => "degenerate",
        })
    }
}

impl std::str::FromStr for Region {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "both-inactive" => Ok(Region::BothInactive),
            "clf-active" => Ok(Region::ClfActive),
            "cbf-active" => Ok(Region::CbfActive),
            "both-active" => Ok(Region::BothActive),
            "degenerate" => Ok(Region::Degenerate),
            other => Err(format!("unknown region {other:?}")),
        }
    }
}

/// Solution of one QP instance in the scaled input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpSolution {
    pub u: [f64; 2],
    pub region: Region,
    /// `a1_bar + b1 . (u + delta)` with the slack recovered from the
    /// stationarity condition `m delta + lambda1 b1 = 0`.
    pub f1_residual: f64,
    /// `a2 + b2 . u`; nonpositive (to rounding) for every solution.
    pub f2_residual: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QpError {
    #[error("degenerate QP row {row}: |b| = {b_norm:.3e} cannot enforce a = {a:.6e}")]
    Degenerate { row: usize, a: f64, b_norm: f64 },
    #[error("active-set enumeration found no feasible candidate")]
    NoFeasibleActiveSet,
}

/// Row-vector norm below which a constraint row has no usable direction.
pub const B_NORM_FLOOR: f64 = 1e-12;

/// Rectifier `gamma_f(s) = gamma * s` for `s >= 0`, `s` otherwise.
pub fn gamma_f(s: f64, gamma: f64) -> f64 {
    if s >= 0.0 {
        gamma * s
    } else {
        s
    }
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// CLF-only min-norm law: `u = 0` for `a1 < 0`, otherwise the scaled
/// steepest-descent step `-(m/(m+1)) gamma_f(a1)/|b1|^2 b1`.
pub fn clf_only(a1: f64, b1: [f64; 2], params: &QpParams) -> Result<[f64; 2], QpError> {
    let b1_sq = dot(b1, b1);
    if b1_sq < B_NORM_FLOOR * B_NORM_FLOOR {
        if a1 >= 0.0 {
            return Err(QpError::Degenerate { row: 1, a: a1, b_norm: b1_sq.sqrt() });
        }
        return Ok([0.0, 0.0]);
    }
    if a1 < 0.0 {
        return Ok([0.0, 0.0]);
    }
    let m = params.m_weight;
    let coeff = -(m / (m + 1.0)) * gamma_f(a1, params.gamma) / b1_sq;
    Ok([coeff * b1[0], coeff * b1[1]])
}

/// Closed-form solution of the two-row QP with region classification.
///
/// Region predicates follow the active-set inequalities verbatim, written in
/// cross-multiplied form (the divisors `|b1|^2`, `|b2|^2`, `m + 1` are
/// positive once the degeneracy guards have passed, so orientation is
/// preserved exactly).
pub fn solve_closed_form(t: &ConstraintTerms, params: &QpParams) -> Result<QpSolution, QpError> {
    let m = params.m_weight;
    let b1_sq = dot(t.b1, t.b1);
    let b2_sq = dot(t.b2, t.b2);
    let b1_degenerate = b1_sq < B_NORM_FLOOR * B_NORM_FLOOR;
    let b2_degenerate = b2_sq < B_NORM_FLOOR * B_NORM_FLOOR;

    if b1_degenerate && t.a1 >= 0.0 {
        return Err(QpError::Degenerate { row: 1, a: t.a1, b_norm: b1_sq.sqrt() });
    }
    if b2_degenerate && t.a2 > 0.0 {
        return Err(QpError::Degenerate { row: 2, a: t.a2, b_norm: b2_sq.sqrt() });
    }
    if b1_degenerate || b2_degenerate {
        let u = if b2_degenerate {
            clf_only(t.a1, t.b1, params)?
        } else if t.a2 <= 0.0 {
            [0.0, 0.0]
        } else {
            let coeff = -t.a2 / b2_sq;
            [coeff * t.b2[0], coeff * t.b2[1]]
        };
        let lambda1 = if b2_degenerate && t.a1 >= 0.0 {
            m / (m + 1.0) * t.a1_bar / b1_sq
        } else {
            0.0
        };
        return Ok(finish(t, m, u, lambda1, Region::Degenerate));
    }

    let cross = dot(t.b1, t.b2);
    let region = if t.a1 < 0.0 && t.a2 < 0.0 {
        Region::BothInactive
    } else if t.a1 >= 0.0 && (m + 1.0) * t.a2 * b1_sq < m * cross * t.a1_bar {
        Region::ClfActive
    } else if t.a2 >= 0.0 && t.a1_bar * b2_sq < cross * t.a2 {
        Region::CbfActive
    } else {
        Region::BothActive
    };

    let (u, lambda1) = match region {
        Region::BothInactive => ([0.0, 0.0], 0.0),
        Region::ClfActive => {
            let lambda1 = m / (m + 1.0) * t.a1_bar / b1_sq;
            ([-lambda1 * t.b1[0], -lambda1 * t.b1[1]], lambda1)
        }
        Region::CbfActive => {
            let coeff = -t.a2 / b2_sq;
            ([coeff * t.b2[0], coeff * t.b2[1]], 0.0)
        }
        Region::BothActive => {
            let denom = (1.0 + 1.0 / m) * b1_sq * b2_sq - cross * cross;
            let mu1 = (b2_sq * t.a1_bar - cross * t.a2) / denom;
            let mu2 = (-cross * t.a1_bar + (1.0 + 1.0 / m) * b1_sq * t.a2) / denom;
            (
                [-mu1 * t.b1[0] - mu2 * t.b2[0], -mu1 * t.b1[1] - mu2 * t.b2[1]],
                mu1,
            )
        }
        Region::Degenerate => unreachable!(),
    };
    Ok(finish(t, m, u, lambda1, region))
}

fn finish(t: &ConstraintTerms, m: f64, u: [f64; 2], lambda1: f64, region: Region) -> QpSolution {
    let delta = [-lambda1 / m * t.b1[0], -lambda1 / m * t.b1[1]];
    QpSolution {
        u,
        region,
        f1_residual: t.a1_bar + dot(t.b1, [u[0] + delta[0], u[1] + delta[1]]),
        f2_residual: t.a2 + dot(t.b2, u),
    }
}

/// Brute-force KKT oracle over one CLF row and `k` CBF rows.
///
/// The CLF row is taken from `terms[0]`; the CBF row of every element
/// contributes one hard constraint. All `2^(k+1)` active subsets are
/// enumerated; each equality-constrained candidate is kept if its multipliers
/// are nonnegative and the inactive rows hold, and the feasible candidate of
/// least objective wins.
pub fn active_set_oracle(terms: &[ConstraintTerms], params: &QpParams) -> Result<[f64; 2], QpError> {
    active_set_oracle_full(terms, params).map(|(u, _)| u)
}

/// [`active_set_oracle`] variant that also returns the recovered CLF slack
/// `delta`, so callers can report the softened-row residual of the optimum.
pub fn active_set_oracle_full(
    terms: &[ConstraintTerms],
    params: &QpParams,
) -> Result<([f64; 2], [f64; 2]), QpError> {
    assert!(!terms.is_empty(), "oracle needs at least one constraint row");
    let m = params.m_weight;
    let clf = &terms[0];
    let b1_sq = dot(clf.b1, clf.b1);
    let n_rows = terms.len() + 1;
    let row_tol = |a: f64, b: [f64; 2], w: [f64; 2]| {
        1e-10 * a.abs().max(b[0].abs() * w[0].abs() + b[1].abs() * w[1].abs()).max(1.0)
    };

    let mut best: Option<([f64; 2], [f64; 2], f64)> = None;
    for mask in 0u32..(1 << n_rows) {
        let active: Vec<usize> = (0..n_rows).filter(|i| mask & (1 << i) != 0).collect();
        let candidate = if active.is_empty() {
            Some(([0.0, 0.0], [0.0, 0.0], Vec::new()))
        } else {
            solve_subset(clf, terms, m, b1_sq, &active)
        };
        let Some((u, delta, lambdas)) = candidate else { continue };
        let lambda_scale: f64 = lambdas.iter().fold(1.0, |acc, l| acc.max(l.abs()));
        if lambdas.iter().any(|&l| l < -1e-10 * lambda_scale) {
            continue;
        }
        let ud = [u[0] + delta[0], u[1] + delta[1]];
        if clf.a1_bar + dot(clf.b1, ud) > row_tol(clf.a1_bar, clf.b1, ud) {
            continue;
        }
        if terms.iter().any(|t| t.a2 + dot(t.b2, u) > row_tol(t.a2, t.b2, u)) {
            continue;
        }
        let objective = 0.5 * (dot(u, u) + m * dot(delta, delta));
        if best.map_or(true, |(_, _, obj)| objective < obj) {
            best = Some((u, delta, objective));
        }
    }
    best.map(|(u, d, _)| (u, d)).ok_or(QpError::NoFeasibleActiveSet)
}

/// Equality-constrained minimizer for one active subset, via the KKT system
/// `G lambda = a` with `G[i][j] = b_i . b_j` plus `|b1|^2 / m` on the CLF
/// diagonal entry. Returns `None` for singular or non-finite systems.
fn solve_subset(
    clf: &ConstraintTerms,
    terms: &[ConstraintTerms],
    m: f64,
    b1_sq: f64,
    active: &[usize],
) -> Option<([f64; 2], [f64; 2], Vec<f64>)> {
    let row_b = |i: usize| if i == 0 { clf.b1 } else { terms[i - 1].b2 };
    let row_a = |i: usize| if i == 0 { clf.a1_bar } else { terms[i - 1].a2 };
    let k = active.len();
    let mut g = DMatrix::zeros(k, k);
    let mut rhs = DVector::zeros(k);
    for (p, &i) in active.iter().enumerate() {
        rhs[p] = row_a(i);
        for (q, &j) in active.iter().enumerate() {
            g[(p, q)] = dot(row_b(i), row_b(j));
            if i == 0 && j == 0 {
                g[(p, q)] += b1_sq / m;
            }
        }
    }
    let lu = g.clone().lu();
    let lambda = lu.solve(&rhs)?;
    if lambda.iter().any(|l| !l.is_finite()) {
        return None;
    }
    let residual = (&g * &lambda - &rhs).amax();
    if residual > 1e-8 * rhs.amax().max(1.0) {
        return None;
    }
    let mut u = [0.0, 0.0];
    let mut lambda1 = 0.0;
    for (p, &i) in active.iter().enumerate() {
        let b = row_b(i);
        u[0] -= lambda[p] * b[0];
        u[1] -= lambda[p] * b[1];
        if i == 0 {
            lambda1 = lambda[p];
        }
    }
    let delta = [-lambda1 / m * clf.b1[0], -lambda1 / m * clf.b1[1]];
    Some((u, delta, lambda.iter().copied().collect()))
}
