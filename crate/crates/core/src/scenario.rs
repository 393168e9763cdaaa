//! Scenario definition and the TOML file layer.
//!
//! A scenario bundles everything one simulation run needs: vehicle constants,
//! controller gains, barrier parameters, obstacles, QP weights, the initial
//! state, and integration settings. Files are validated on load; derived
//! defaults (`epsilon = mu/2`, `gamma` from the stability relation
//! `gamma m/(m+1) = 1`) are filled in before validation.

use crate::cbf::{barrier, BarrierParams, CircularObstacle};
use crate::clf::Gains;
use crate::qp::QpParams;
use crate::vehicle::{CartesianState, VehicleParams, RHO_MIN};

/// A fully validated simulation scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub vehicle: VehicleParams,
    pub gains: Gains,
    pub barrier: BarrierParams,
    pub obstacles: Vec<CircularObstacle>,
    pub qp: QpParams,
    pub init: CartesianState,
    pub dt: f64,
    pub control_dt: f64,
    pub t_max: f64,
    pub rho_stop: f64,
    pub seed: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: Box<toml::de::Error>,
    },
    #[error("invalid scenario: {0}")]
    Validation(String),
}

#[derive(serde::Serialize, serde::Deserialize)]
struct RawGains {
    lambda: f64,
    k_rho: f64,
    k_alpha: f64,
    k_z: f64,
    k_omega: f64,
    mu: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
}

#[derive(serde::Serialize, serde::Deserialize, Default)]
struct RawQp {
    #[serde(skip_serializing_if = "Option::is_none")]
    m_weight: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
}

#[derive(serde::Serialize, serde::Deserialize, Default)]
struct RawSim {
    #[serde(skip_serializing_if = "Option::is_none")]
    dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    control_dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rho_stop: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct RawScenario {
    vehicle: VehicleParams,
    gains: RawGains,
    barrier: BarrierParams,
    #[serde(default, rename = "obstacle", skip_serializing_if = "Vec::is_empty")]
    obstacles: Vec<CircularObstacle>,
    #[serde(default)]
    qp: RawQp,
    #[serde(default)]
    sim: RawSim,
    init: CartesianState,
}

impl Scenario {
    /// Parses and validates scenario text.
    pub fn from_toml(text: &str) -> Result<Scenario, ScenarioError> {
        let raw: RawScenario = toml::from_str(text).map_err(|source| ScenarioError::Parse {
            path: "<inline>".into(),
            source: Box::new(source),
        })?;
        Scenario::from_raw(raw)
    }

    /// Reads, parses, and validates a scenario file.
    pub fn load(path: &std::path::Path) -> Result<Scenario, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let raw: RawScenario = toml::from_str(&text).map_err(|source| ScenarioError::Parse {
            path: path.display().to_string(),
            source: Box::new(source),
        })?;
        Scenario::from_raw(raw)
    }

    fn from_raw(raw: RawScenario) -> Result<Scenario, ScenarioError> {
        let mu = raw.gains.mu;
        let gains = Gains {
            lambda: raw.gains.lambda,
            k_rho: raw.gains.k_rho,
            k_alpha: raw.gains.k_alpha,
            k_z: raw.gains.k_z,
            k_omega: raw.gains.k_omega,
            mu,
            epsilon: raw.gains.epsilon.unwrap_or(mu / 2.0),
        };
        let m_weight = raw.qp.m_weight.unwrap_or(1.0);
        let qp = QpParams {
            gamma: raw.qp.gamma.unwrap_or((m_weight + 1.0) / m_weight),
            m_weight,
        };
        let scenario = Scenario {
            vehicle: raw.vehicle,
            gains,
            barrier: raw.barrier,
            obstacles: raw.obstacles,
            qp,
            init: raw.init,
            dt: raw.sim.dt.unwrap_or(1e-3),
            control_dt: raw.sim.control_dt.unwrap_or(1e-3),
            t_max: raw.sim.t_max.unwrap_or(30.0),
            rho_stop: raw.sim.rho_stop.unwrap_or(1e-2),
            seed: raw.sim.seed.unwrap_or(42),
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// Serializes back to the file format; reparsing yields an equal scenario.
    pub fn to_toml(&self) -> String {
        let raw = RawScenario {
            vehicle: self.vehicle,
            gains: RawGains {
                lambda: self.gains.lambda,
                k_rho: self.gains.k_rho,
                k_alpha: self.gains.k_alpha,
                k_z: self.gains.k_z,
                k_omega: self.gains.k_omega,
                mu: self.gains.mu,
                epsilon: Some(self.gains.epsilon),
            },
            barrier: self.barrier,
            obstacles: self.obstacles.clone(),
            qp: RawQp { m_weight: Some(self.qp.m_weight), gamma: Some(self.qp.gamma) },
            sim: RawSim {
                dt: Some(self.dt),
                control_dt: Some(self.control_dt),
                t_max: Some(self.t_max),
                rho_stop: Some(self.rho_stop),
                seed: Some(self.seed),
            },
            init: self.init,
        };
        toml::to_string_pretty(&raw).expect("scenario serialization cannot fail")
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        let fail = |msg: String| Err(ScenarioError::Validation(msg));
        let positive = |name: &str, value: f64| -> Result<(), ScenarioError> {
            if value > 0.0 && value.is_finite() {
                Ok(())
            } else {
                Err(ScenarioError::Validation(format!("{name} must be positive, got {value}")))
            }
        };

        positive("vehicle.mass", self.vehicle.mass)?;
        positive("vehicle.inertia", self.vehicle.inertia)?;
        positive("vehicle.wheel_radius", self.vehicle.wheel_radius)?;
        positive("vehicle.axle", self.vehicle.axle)?;

        if !(self.gains.lambda >= 1.0) {
            return fail(format!("gains.lambda must be at least 1, got {}", self.gains.lambda));
        }
        positive("gains.k_rho", self.gains.k_rho)?;
        positive("gains.k_alpha", self.gains.k_alpha)?;
        positive("gains.k_z", self.gains.k_z)?;
        positive("gains.k_omega", self.gains.k_omega)?;
        positive("gains.mu", self.gains.mu)?;
        positive("gains.epsilon", self.gains.epsilon)?;
        if self.gains.epsilon > self.gains.mu {
            return fail(format!(
                "gains.epsilon must not exceed gains.mu, got {} > {}",
                self.gains.epsilon, self.gains.mu
            ));
        }

        positive("barrier.l_v", self.barrier.l_v)?;
        positive("barrier.l_omega", self.barrier.l_omega)?;
        positive("barrier.alpha_h_slope", self.barrier.alpha_h_slope)?;

        for (i, o) in self.obstacles.iter().enumerate() {
            positive(&format!("obstacle[{i}].radius"), o.radius)?;
            positive(&format!("obstacle[{i}].scale"), o.scale)?;
        }

        if !(self.qp.gamma >= 1.0) {
            return fail(format!("qp.gamma must be at least 1, got {}", self.qp.gamma));
        }
        if !(self.qp.m_weight >= 1.0) {
            return fail(format!("qp.m_weight must be at least 1, got {}", self.qp.m_weight));
        }

        positive("sim.dt", self.dt)?;
        positive("sim.t_max", self.t_max)?;
        if self.control_dt < self.dt {
            return fail(format!(
                "sim.control_dt must be at least sim.dt, got {} < {}",
                self.control_dt, self.dt
            ));
        }
        let ratio = self.control_dt / self.dt;
        if (ratio - ratio.round()).abs() > 1e-9 {
            return fail(format!(
                "sim.control_dt must be an integer multiple of sim.dt, got ratio {ratio}"
            ));
        }
        if self.rho_stop < RHO_MIN {
            return fail(format!(
                "sim.rho_stop must be at least {RHO_MIN}, got {}",
                self.rho_stop
            ));
        }

        for (i, o) in self.obstacles.iter().enumerate() {
            let (h, _) = barrier(&self.init, o, &self.barrier);
            if h < 0.0 {
                return fail(format!(
                    "init violates the barrier of obstacle[{i}] at ({}, {}): h = {h}",
                    o.cx, o.cy
                ));
            }
        }
        Ok(())
    }

    /// Steps per control period; validated to be integral.
    pub fn steps_per_control(&self) -> usize {
        (self.control_dt / self.dt).round() as usize
    }

    /// Bundled obstacle-avoidance parking scenario on a desk-scale arena.
    pub fn paper_sim() -> Scenario {
        Scenario {
            vehicle: VehicleParams {
                mass: 1.0,
                inertia: 0.025,
                wheel_radius: 0.03,
                axle: 0.15,
            },
            gains: Gains {
                lambda: 3.0,
                k_rho: 2.0,
                k_alpha: 2.0,
                k_z: 4.0,
                k_omega: 4.0,
                mu: 0.05,
                epsilon: 0.025,
            },
            barrier: BarrierParams { l_v: 1.0, l_omega: 1.0, alpha_h_slope: 2.0 },
            obstacles: vec![CircularObstacle { cx: -2.0, cy: 0.0, radius: 0.3, scale: 40.0 }],
            qp: QpParams { gamma: 2.0, m_weight: 1.0 },
            init: CartesianState { x: -3.15, y: 2.96, theta: -1.43, v: 0.0, omega: 0.0 },
            dt: 1e-3,
            control_dt: 1e-3,
            t_max: 30.0,
            rho_stop: 1e-2,
            seed: 42,
        }
    }

    /// Bundled hardware-geometry scenario: tighter arena, inflated obstacle.
    pub fn paper_exp() -> Scenario {
        Scenario {
            obstacles: vec![CircularObstacle { cx: -0.6, cy: 0.4, radius: 0.2, scale: 40.0 }],
            init: CartesianState { x: -1.08, y: 1.37, theta: 0.78, v: 0.0, omega: 0.0 },
            ..Scenario::paper_sim()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_text() -> String {
        Scenario::paper_sim().to_toml()
    }

    #[test]
    fn round_trip_is_identity() {
        for scenario in [Scenario::paper_sim(), Scenario::paper_exp()] {
            let reparsed = Scenario::from_toml(&scenario.to_toml()).unwrap();
            assert_eq!(reparsed, scenario);
        }
    }

    #[test]
    fn defaults_are_applied() {
        let text = r#"
[vehicle]
mass = 1.0
inertia = 0.025
wheel_radius = 0.03
axle = 0.15

[gains]
lambda = 3.0
k_rho = 2.0
k_alpha = 2.0
k_z = 4.0
k_omega = 4.0
mu = 0.05

[barrier]
l_v = 1.0
l_omega = 1.0
alpha_h_slope = 2.0

[init]
x = -3.0
y = 0.0
theta = 0.0
v = 0.0
omega = 0.0
"#;
        let s = Scenario::from_toml(text).unwrap();
        assert_eq!(s.gains.epsilon, 0.025);
        assert_eq!(s.qp.m_weight, 1.0);
        assert_eq!(s.qp.gamma, 2.0);
        assert_eq!(s.dt, 1e-3);
        assert_eq!(s.control_dt, 1e-3);
        assert_eq!(s.t_max, 30.0);
        assert_eq!(s.rho_stop, 1e-2);
        assert_eq!(s.seed, 42);
        assert!(s.obstacles.is_empty());
    }

    #[test]
    fn gamma_derived_from_m_weight() {
        let text = base_text().replace("gamma = 2.0", "");
        let s = Scenario::from_toml(&text).unwrap();
        assert_eq!(s.qp.gamma, 2.0);

        let text = base_text()
            .replace("gamma = 2.0", "")
            .replace("m_weight = 1.0", "m_weight = 3.0");
        let s = Scenario::from_toml(&text).unwrap();
        assert!((s.qp.gamma - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn lambda_below_one_is_rejected() {
        let text = base_text().replace("lambda = 3.0", "lambda = 0.5");
        let err = Scenario::from_toml(&text).unwrap_err();
        assert!(matches!(err, ScenarioError::Validation(_)));
        assert!(err.to_string().contains("lambda"));
    }

    #[test]
    fn control_dt_must_divide_evenly() {
        let text = base_text().replace("control_dt = 0.001", "control_dt = 0.0015");
        let err = Scenario::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("integer multiple"));

        let text = base_text().replace("control_dt = 0.001", "control_dt = 0.01");
        let s = Scenario::from_toml(&text).unwrap();
        assert_eq!(s.steps_per_control(), 10);
    }

    #[test]
    fn unsafe_init_is_rejected() {
        let text = base_text()
            .replace("x = -3.15", "x = -2.1")
            .replace("y = 2.96", "y = 0.0");
        let err = Scenario::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("barrier"));
    }

    #[test]
    fn moving_init_counts_velocity_budget() {
        let text = base_text()
            .replace("x = -3.15", "x = -2.35")
            .replace("y = 2.96", "y = 0.0")
            .replace("v = 0.0", "v = 1.5");
        let err = Scenario::from_toml(&text).unwrap_err();
        assert!(matches!(err, ScenarioError::Validation(_)));
    }

    #[test]
    fn epsilon_above_mu_is_rejected() {
        let text = base_text().replace("epsilon = 0.025", "epsilon = 0.06");
        let err = Scenario::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("epsilon"));
    }

    #[test]
    fn parse_errors_carry_context() {
        let err = Scenario::from_toml("[vehicle]\nmass = \"heavy\"").unwrap_err();
        assert!(matches!(err, ScenarioError::Parse { .. }));

        let err = Scenario::load(std::path::Path::new("/nonexistent/file.toml")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/file.toml"));
    }

    #[test]
    fn bundled_scenarios_validate() {
        Scenario::paper_sim().validate().unwrap();
        Scenario::paper_exp().validate().unwrap();
        assert_eq!(Scenario::paper_exp().obstacles[0].radius, 0.2);
    }

    #[test]
    fn rho_stop_floor_enforced() {
        let text = base_text().replace("rho_stop = 0.01", "rho_stop = 1e-9");
        let err = Scenario::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("rho_stop"));
    }
}
