//! Randomized verification suites for the Lyapunov construction and the QP
//! filter.
//!
//! Every sample draws from a generator stream keyed by seed and sample
//! index, so a check's verdict does not depend on how many samples the other
//! checks consumed.

use std::f64::consts::{PI, TAU};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::clf::{
    lyapunov, lyapunov_residual, p_matrix, stable_sinc, w_dot_nominal, ErrorCoords, Gains,
    SymMatrix2,
};
use crate::qp::{active_set_oracle, clf_only, solve_closed_form, ConstraintTerms, QpParams};
use crate::vehicle::PolarPose;

/// One verification clause: `worst` is the extreme statistic observed and
/// `threshold` the value it was held against.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub worst: f64,
    pub threshold: f64,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} worst={:.3e} threshold={:.3e}",
            self.name,
            if self.pass { "pass" } else { "FAIL" },
            self.worst,
            self.threshold
        )
    }
}

/// Outcome of [`verify_clf`]; one line per check when displayed.
#[derive(Debug, Clone)]
pub struct ClfReport {
    pub samples: usize,
    pub seed: u64,
    pub checks: Vec<Check>,
}

/// Outcome of [`verify_qp`]; one line per check when displayed.
#[derive(Debug, Clone)]
pub struct QpReport {
    pub samples: usize,
    pub seed: u64,
    pub checks: Vec<Check>,
}

impl ClfReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

impl QpReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

impl fmt::Display for ClfReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "clf.{c}")?;
        }
        Ok(())
    }
}

impl fmt::Display for QpReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "qp.{c}")?;
        }
        Ok(())
    }
}

fn sample_rng(seed: u64, salt: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    rng.set_stream(index);
    rng
}

/// Checks the Lyapunov construction for `gains` over `samples` random draws.
pub fn verify_clf(gains: &Gains, samples: usize, seed: u64) -> ClfReport {
    let (p, _, _) = p_matrix(gains);
    verify_clf_with_matrix(gains, samples, seed, &p)
}

/// [`verify_clf`] against a caller-supplied comparison matrix.
///
/// The algebraic equation check runs on `p` instead of the construction's
/// own matrix, so a deliberately perturbed matrix must fail the report.
pub fn verify_clf_with_matrix(
    gains: &Gains,
    samples: usize,
    seed: u64,
    p: &SymMatrix2,
) -> ClfReport {
    let mut checks = Vec::with_capacity(6);

    let residual = lyapunov_residual(gains, p);
    checks.push(Check {
        name: "lyapunov-equation",
        pass: residual <= 1e-12,
        worst: residual,
        threshold: 1e-12,
    });

    let mut min_v = f64::INFINITY;
    for i in 0..samples {
        let mut rng = sample_rng(seed, 2, i as u64);
        let pose = PolarPose {
            rho: rng.gen_range(1e-12..10.0),
            alpha: rng.gen_range(-10.0..10.0),
            psi: rng.gen_range(-10.0..10.0),
        };
        let err = ErrorCoords {
            z: rng.gen_range(-10.0..10.0),
            omega_err: rng.gen_range(-10.0..10.0),
        };
        min_v = min_v.min(lyapunov(&pose, &err, gains).v_total);
    }
    checks.push(Check {
        name: "positive-definiteness",
        pass: min_v > 0.0,
        worst: min_v,
        threshold: 0.0,
    });

    let mut worst_w1 = 0.0f64;
    for i in 0..samples {
        let mut rng = sample_rng(seed, 3, i as u64);
        let rho = rng.gen_range(1e-6..5.0);
        let alpha: f64 = rng.gen_range(-5.0..5.0);
        let psi = rng.gen_range(-5.0..5.0);
        let (sinc2a, _) = stable_sinc(2.0 * alpha);
        let cos_a = alpha.cos();
        let f_nom = [
            -gains.k_rho * cos_a * cos_a * rho,
            -gains.k_alpha * alpha - gains.k_rho * sinc2a * gains.lambda * psi,
            gains.k_rho * sinc2a * alpha,
        ];
        let lhs = rho * f_nom[0] + alpha * f_nom[1] + gains.lambda * psi * f_nom[2];
        let rhs = -gains.k_rho * cos_a * cos_a * rho * rho - gains.k_alpha * alpha * alpha;
        worst_w1 = worst_w1.max((lhs - rhs).abs() / rhs.abs().max(1.0));
    }
    checks.push(Check {
        name: "w1-identity",
        pass: worst_w1 <= 1e-10,
        worst: worst_w1,
        threshold: 1e-10,
    });

    let mut worst_margin = f64::NEG_INFINITY;
    for i in 0..samples {
        let mut rng = sample_rng(seed, 4, i as u64);
        let pose = PolarPose {
            rho: rng.gen_range(1e-9..5.0),
            alpha: rng.gen_range(-5.0..5.0),
            psi: rng.gen_range(-5.0..5.0),
        };
        let bound = -0.5 * (pose.alpha * pose.alpha + pose.psi * pose.psi)
            - gains.k_rho * pose.alpha.cos().powi(2) * pose.rho * pose.rho;
        worst_margin = worst_margin.max(w_dot_nominal(&pose, gains) - bound);
    }
    checks.push(Check {
        name: "w-bound",
        pass: worst_margin <= 1e-9,
        worst: worst_margin,
        threshold: 1e-9,
    });

    let mut worst_sinc = f64::NEG_INFINITY;
    for i in 0..samples {
        let mut rng = sample_rng(seed, 5, i as u64);
        let s: f64 = rng.gen_range(-10.0..10.0);
        let (sinc2s, _) = stable_sinc(2.0 * s);
        worst_sinc = worst_sinc.max((sinc2s - 1.0).abs() - 2.0 / PI * s.abs());
    }
    checks.push(Check {
        name: "sinc-bound",
        pass: worst_sinc <= 1e-15,
        worst: worst_sinc,
        threshold: 1e-15,
    });

    let mut worst_grad = 0.0f64;
    for i in 0..samples.min(1000) {
        let mut rng = sample_rng(seed, 6, i as u64);
        let pose = PolarPose {
            rho: rng.gen_range(0.05..5.0),
            alpha: rng.gen_range(-3.0..3.0),
            psi: rng.gen_range(-3.0..3.0),
        };
        let err = ErrorCoords {
            z: rng.gen_range(-3.0..3.0),
            omega_err: rng.gen_range(-3.0..3.0),
        };
        let analytic = lyapunov(&pose, &err, gains).grad;
        let fd = fd_gradient(&pose, &err, gains);
        for k in 0..5 {
            worst_grad = worst_grad.max((analytic[k] - fd[k]).abs() / analytic[k].abs().max(1e-2));
        }
    }
    checks.push(Check {
        name: "gradient-check",
        pass: worst_grad <= 1e-6,
        worst: worst_grad,
        threshold: 1e-6,
    });

    ClfReport { samples, seed, checks }
}

fn fd_gradient(p: &PolarPose, e: &ErrorCoords, g: &Gains) -> [f64; 5] {
    let eval = |c: [f64; 5]| {
        lyapunov(
            &PolarPose { rho: c[0], alpha: c[1], psi: c[2] },
            &ErrorCoords { z: c[3], omega_err: c[4] },
            g,
        )
        .v_total
    };
    let x = [p.rho, p.alpha, p.psi, e.z, e.omega_err];
    let mut grad = [0.0; 5];
    for i in 0..5 {
        let h = 1e-6 * x[i].abs().max(1.0);
        let mut hi = x;
        let mut lo = x;
        hi[i] += h;
        lo[i] -= h;
        grad[i] = (eval(hi) - eval(lo)) / (2.0 * h);
    }
    grad
}

fn random_params(rng: &mut ChaCha8Rng) -> QpParams {
    QpParams {
        gamma: rng.gen_range(1.0..3.0),
        m_weight: rng.gen_range(1.0..5.0),
    }
}

fn random_direction(rng: &mut ChaCha8Rng) -> [f64; 2] {
    let ang = rng.gen_range(0.0..TAU);
    let mag = 10f64.powf(rng.gen_range(-3.0..1.0));
    [mag * ang.cos(), mag * ang.sin()]
}

/// Cross-checks the closed-form QP against the active-set oracle over
/// `samples` random instances.
pub fn verify_qp(samples: usize, seed: u64) -> QpReport {
    let mut checks = Vec::with_capacity(5);

    let mut worst_gap = 0.0f64;
    let mut worst_f2 = f64::NEG_INFINITY;
    for i in 0..samples {
        let mut rng = sample_rng(seed, 11, i as u64);
        let p = if i % 2 == 0 { QpParams::stability(1.0) } else { random_params(&mut rng) };
        let b1 = random_direction(&mut rng);
        let b2 = random_direction(&mut rng);
        let t = ConstraintTerms::new(
            rng.gen_range(-10.0..10.0),
            b1,
            rng.gen_range(-10.0..10.0),
            b2,
            &p,
        );
        let s = solve_closed_form(&t, &p).expect("rows are non-degenerate by construction");
        let u = active_set_oracle(&[t], &p).expect("oracle solves any bounded instance");
        worst_gap = worst_gap.max((s.u[0] - u[0]).abs().max((s.u[1] - u[1]).abs()));
        let scale = t.a2.abs().max(1.0);
        worst_f2 = worst_f2.max(s.f2_residual / scale);
    }
    checks.push(Check {
        name: "oracle-agreement",
        pass: worst_gap <= 1e-8,
        worst: worst_gap,
        threshold: 1e-8,
    });
    checks.push(Check {
        name: "safety-residual",
        pass: worst_f2 <= 1e-10,
        worst: worst_f2,
        threshold: 1e-10,
    });

    let mut worst_parallel = 0.0f64;
    for i in 0..samples / 10 {
        let mut rng = sample_rng(seed, 12, i as u64);
        let p = random_params(&mut rng);
        let b1 = random_direction(&mut rng);
        let scale = rng.gen_range(0.1..3.0) * if i % 2 == 0 { 1.0 } else { -1.0 };
        let b2 = [scale * b1[0], scale * b1[1]];
        let t = ConstraintTerms::new(
            rng.gen_range(-10.0..10.0),
            b1,
            rng.gen_range(-10.0..10.0),
            b2,
            &p,
        );
        let s = solve_closed_form(&t, &p).expect("rows are non-degenerate by construction");
        let u = active_set_oracle(&[t], &p).expect("oracle solves any bounded instance");
        worst_parallel = worst_parallel.max((s.u[0] - u[0]).abs().max((s.u[1] - u[1]).abs()));
    }
    checks.push(Check {
        name: "parallel-rows",
        pass: worst_parallel <= 1e-8,
        worst: worst_parallel,
        threshold: 1e-8,
    });

    let mut worst_drop = 0.0f64;
    for i in 0..samples / 10 {
        let mut rng = sample_rng(seed, 13, i as u64);
        let p = random_params(&mut rng);
        let b1 = random_direction(&mut rng);
        let a1 = rng.gen_range(-10.0..10.0);
        let a2 = rng.gen_range(-10.0..0.0);
        let t = ConstraintTerms::new(a1, b1, a2, [0.0, 0.0], &p);
        let s = solve_closed_form(&t, &p).expect("an inactive zero row is dropped");
        let u = clf_only(a1, b1, &p).expect("rows are non-degenerate by construction");
        worst_drop = worst_drop.max((s.u[0] - u[0]).abs().max((s.u[1] - u[1]).abs()));
    }
    checks.push(Check {
        name: "degenerate-drop",
        pass: worst_drop <= 0.0,
        worst: worst_drop,
        threshold: 0.0,
    });

    let p = QpParams::stability(1.0);
    let mut worst_ratio = 0.0f64;
    let mut tested = 0;
    let mut attempt = 0u64;
    while tested < 100 {
        let mut rng = sample_rng(seed, 14, attempt);
        attempt += 1;
        let b1 = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        let b2 = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        if b1[0] * b1[0] + b1[1] * b1[1] < 0.01 || b2[0] * b2[0] + b2[1] * b2[1] < 0.01 {
            continue;
        }
        let start = (rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        let end = (rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        let solve_at = |s: f64| {
            let a1 = start.0 + s * (end.0 - start.0);
            let a2 = start.1 + s * (end.1 - start.1);
            solve_closed_form(&ConstraintTerms::new(a1, b1, a2, b2, &p), &p)
                .expect("rows are non-degenerate by construction")
        };
        if solve_at(0.0).region == solve_at(1.0).region {
            continue;
        }
        let max_jump = |step: f64| {
            let n = (1.0 / step).round() as usize;
            let mut worst = 0.0f64;
            let mut prev = solve_at(0.0).u;
            for k in 1..=n {
                let u = solve_at(k as f64 * step).u;
                worst = worst.max((u[0] - prev[0]).abs().max((u[1] - prev[1]).abs()));
                prev = u;
            }
            worst
        };
        let ratio = max_jump(1e-3) / max_jump(5e-4);
        worst_ratio = worst_ratio.max((ratio / 2.0).ln().abs());
        tested += 1;
    }
    checks.push(Check {
        name: "continuity",
        pass: worst_ratio <= 1.3f64.ln(),
        worst: worst_ratio,
        threshold: 1.3f64.ln(),
    });

    QpReport { samples, seed, checks }
}
