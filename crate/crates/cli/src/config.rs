//! TOML configuration: raw schema, loading, and validation into core types.

use std::fmt;
use std::path::Path;

use serde::Deserialize;
use steerdyn_core::closed_loop::AssistLaw;
use steerdyn_core::emd::{Architecture, DerivativeModel, EmdModel, PiGains};
use steerdyn_core::mech::{MechanicalParams, Provenance};
use steerdyn_core::motor::{
    DelayParams, EstimatedParams, MotorParams, OperatingPoint, VelocityEstimator, VelocityVariant,
};
use steerdyn_core::sim::DwellOptions;
use steerdyn_core::tf::{DelayRational, FrequencyGrid, Polynomial, MIN_POINTS_PER_DECADE};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    mechanical: RawMechanical,
    motor: RawMotor,
    estimates: RawEstimates,
    delays: RawDelays,
    velocity_estimator: RawVelocity,
    pi_gains: Option<RawGains>,
    assist: RawAssist,
    grid: RawGrid,
    #[serde(default)]
    operating_point: RawOperatingPoint,
    #[serde(default)]
    model: RawModel,
    #[serde(default)]
    dwell: RawDwell,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMechanical {
    j_h: f64,
    b_h: f64,
    j_m: f64,
    b_m: f64,
    k_h: f64,
    k_l: f64,
    n: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMotor {
    p: i64,
    lambda_m: f64,
    l_d: f64,
    l_q: f64,
    r: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEstimates {
    lambda_m_hat: f64,
    l_d_hat: f64,
    l_q_hat: f64,
    r_hat: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDelays {
    tau_c: f64,
    tau_p: f64,
}

#[derive(Debug, Deserialize, Clone, Copy, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
enum RawVariant {
    #[default]
    Physical,
    Published,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVelocity {
    tau_omega: f64,
    #[serde(default)]
    variant: RawVariant,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGains {
    k_pd: f64,
    k_id: f64,
    k_pq: f64,
    k_iq: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAssist {
    gain: f64,
    compensator_num: Option<Vec<f64>>,
    compensator_den: Option<Vec<f64>>,
    #[serde(default)]
    compensator_delay: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    min_rad_s: f64,
    max_rad_s: f64,
    points_per_decade: f64,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawOperatingPoint {
    #[serde(default)]
    i_d0: f64,
    #[serde(default)]
    i_q0: f64,
    #[serde(default)]
    omega_m0: f64,
}

#[derive(Debug, Deserialize, Clone, Copy, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
enum RawMechVariant {
    #[default]
    FirstPrinciples,
    Published,
}

#[derive(Debug, Deserialize, Clone, Copy, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
enum RawShat {
    #[default]
    Ideal,
    Filtered,
}

#[derive(Debug, Deserialize, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum RawArch {
    Ff,
    Fb,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    #[serde(default)]
    mechanical: RawMechVariant,
    #[serde(default)]
    s_hat: RawShat,
    #[serde(default)]
    s_hat_tau: f64,
    #[serde(default = "default_pade")]
    pade_order: i64,
    architecture: Option<RawArch>,
}

impl Default for RawModel {
    fn default() -> Self {
        Self {
            mechanical: RawMechVariant::default(),
            s_hat: RawShat::default(),
            s_hat_tau: 0.0,
            pade_order: default_pade(),
            architecture: None,
        }
    }
}

fn default_pade() -> i64 {
    4
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDwell {
    #[serde(default = "default_settle")]
    cycles_settle: i64,
    #[serde(default = "default_measure")]
    cycles_measure: i64,
}

impl Default for RawDwell {
    fn default() -> Self {
        Self { cycles_settle: default_settle(), cycles_measure: default_measure() }
    }
}

fn default_settle() -> i64 {
    10
}

fn default_measure() -> i64 {
    5
}

/// A fully validated configuration.
#[derive(Debug, Clone)]
pub struct SystemConfig {
    pub mechanical: MechanicalParams<f64>,
    pub provenance: Provenance,
    pub motor: MotorParams<f64>,
    pub estimates: EstimatedParams<f64>,
    pub delays: DelayParams<f64>,
    pub velocity: VelocityEstimator<f64>,
    pub gains: Option<PiGains<f64>>,
    pub derivative: DerivativeModel<f64>,
    pub assist: AssistLaw<f64>,
    pub grid: FrequencyGrid<f64>,
    pub operating_point: OperatingPoint<f64>,
    pub pade_order: usize,
    pub architecture: Option<Architecture>,
    pub dwell: DwellOptions<f64>,
}

/// One violated constraint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub constraint: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.constraint)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{line}:{column}: {message}")]
    Parse { path: String, line: usize, column: usize, message: String },
    #[error("{path}: {} invalid value(s):\n{}", .violations.len(), list(.violations))]
    Invalid { path: String, violations: Vec<Violation> },
}

fn list(v: &[Violation]) -> String {
    v.iter().map(|x| format!("  {x}")).collect::<Vec<_>>().join("\n")
}

/// 1-based line and column of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let head = &text[..offset.min(text.len())];
    let line = head.matches('\n').count() + 1;
    let column = head.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

pub fn load_config(path: &Path) -> Result<SystemConfig, ConfigError> {
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: shown.clone(), source })?;
    parse_config(&text, &shown)
}

pub fn parse_config(text: &str, path: &str) -> Result<SystemConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
        ConfigError::Parse { path: path.to_string(), line, column, message: e.message().trim().to_string() }
    })?;
    validate(raw).map_err(|violations| ConfigError::Invalid { path: path.to_string(), violations })
}

fn validate(raw: RawConfig) -> Result<SystemConfig, Vec<Violation>> {
    let mut v: Vec<Violation> = Vec::new();
    let mut push = |section: &str, list: Vec<(&'static str, &'static str)>| {
        for (f, c) in list {
            v.push(Violation { field: format!("{section}.{f}"), constraint: c.to_string() });
        }
    };

    let m = &raw.mechanical;
    let mechanical =
        MechanicalParams { j_h: m.j_h, b_h: m.b_h, j_m: m.j_m, b_m: m.b_m, k_h: m.k_h, k_l: m.k_l, n: m.n };
    push("mechanical", mechanical.violations());

    let mo = &raw.motor;
    let pole_pairs = u32::try_from(mo.p).unwrap_or(0);
    let motor = MotorParams { pole_pairs, lambda_m: mo.lambda_m, l_d: mo.l_d, l_q: mo.l_q, r: mo.r };
    push("motor", motor.violations());

    let e = &raw.estimates;
    let estimates =
        EstimatedParams { lambda_m_hat: e.lambda_m_hat, l_d_hat: e.l_d_hat, l_q_hat: e.l_q_hat, r_hat: e.r_hat };
    push("estimates", estimates.violations());

    let delays = DelayParams { tau_c: raw.delays.tau_c, tau_p: raw.delays.tau_p };
    push("delays", delays.violations());

    let velocity = VelocityEstimator {
        tau_omega: raw.velocity_estimator.tau_omega,
        variant: match raw.velocity_estimator.variant {
            RawVariant::Physical => VelocityVariant::Physical,
            RawVariant::Published => VelocityVariant::Paper,
        },
    };
    push("velocity_estimator", velocity.violations());

    let gains = raw.pi_gains.as_ref().map(|g| PiGains { k_pd: g.k_pd, k_id: g.k_id, k_pq: g.k_pq, k_iq: g.k_iq });
    if let Some(g) = &gains {
        push("pi_gains", g.violations());
    }

    let architecture = raw.model.architecture.map(|a| match a {
        RawArch::Ff => Architecture::Feedforward,
        RawArch::Fb => Architecture::Feedback,
    });
    if architecture == Some(Architecture::Feedback) && gains.is_none() {
        push("pi_gains", vec![("section", "required when model.architecture = \"fb\"")]);
    }

    let derivative = match raw.model.s_hat {
        RawShat::Ideal => DerivativeModel::Ideal,
        RawShat::Filtered => DerivativeModel::Filtered { tau_d: raw.model.s_hat_tau },
    };
    if !(raw.model.s_hat_tau.is_finite() && raw.model.s_hat_tau >= 0.0) {
        push("model", vec![("s_hat_tau", "must be finite and >= 0")]);
    }
    let pade_order = usize::try_from(raw.model.pade_order).unwrap_or(0);
    if !(1..=10).contains(&pade_order) {
        push("model", vec![("pade_order", "must be an integer in 1..=10")]);
    }

    let a = &raw.assist;
    if !a.gain.is_finite() {
        push("assist", vec![("gain", "must be finite")]);
    }
    let compensator = match (&a.compensator_num, &a.compensator_den) {
        (None, None) if a.compensator_delay == 0.0 => None,
        (num, den) => {
            let num = Polynomial::new(num.clone().unwrap_or_else(|| vec![1.0]));
            let den = Polynomial::new(den.clone().unwrap_or_else(|| vec![1.0]));
            match DelayRational::new(num, den, a.compensator_delay) {
                Ok(tf) if tf.is_proper() => Some(tf),
                Ok(_) => {
                    push("assist", vec![("compensator_num", "compensator must be proper")]);
                    None
                }
                Err(_) => {
                    push(
                        "assist",
                        vec![("compensator", "needs finite coefficients, a nonzero denominator and delay >= 0")],
                    );
                    None
                }
            }
        }
    };
    let assist = AssistLaw { gain: a.gain, compensator };

    let g = &raw.grid;
    let mut grid = None;
    if !(g.min_rad_s.is_finite() && g.min_rad_s > 0.0) {
        push("grid", vec![("min_rad_s", "must be finite and > 0")]);
    } else if !(g.max_rad_s.is_finite() && g.max_rad_s >= 100.0 * g.min_rad_s) {
        push("grid", vec![("max_rad_s", "must be finite and span at least two decades above min_rad_s")]);
    } else if !(g.points_per_decade.is_finite() && g.points_per_decade >= MIN_POINTS_PER_DECADE) {
        push("grid", vec![("points_per_decade", "must be >= 20")]);
    } else {
        grid = FrequencyGrid::with_density(g.min_rad_s, g.max_rad_s, g.points_per_decade).ok();
    }

    let op = &raw.operating_point;
    let operating_point = OperatingPoint::new(&motor, op.i_d0, op.i_q0, op.omega_m0);
    if operating_point.is_err() {
        push("operating_point", vec![("i_d0/i_q0/omega_m0", "must be finite")]);
    }

    let dw = &raw.dwell;
    if dw.cycles_settle < 0 {
        push("dwell", vec![("cycles_settle", "must be >= 0")]);
    }
    if dw.cycles_measure < 1 {
        push("dwell", vec![("cycles_measure", "must be >= 1")]);
    }

    if !v.is_empty() {
        return Err(v);
    }
    Ok(SystemConfig {
        mechanical,
        provenance: match raw.model.mechanical {
            RawMechVariant::FirstPrinciples => Provenance::FirstPrinciples,
            RawMechVariant::Published => Provenance::PaperVerbatim,
        },
        motor,
        estimates,
        delays,
        velocity,
        gains,
        derivative,
        assist,
        grid: grid.expect("validated"),
        operating_point: operating_point.expect("validated"),
        pade_order,
        architecture,
        dwell: DwellOptions {
            cycles_settle: dw.cycles_settle as usize,
            cycles_measure: dw.cycles_measure as usize,
            ..DwellOptions::default()
        },
    })
}

impl SystemConfig {
    /// Drive model for `arch`; `None` when feedback is requested without
    /// gains.
    pub fn drive(&self, arch: Architecture) -> Option<EmdModel<f64>> {
        let model = match arch {
            Architecture::Feedforward => EmdModel::feedforward(self.motor, self.estimates, self.delays, self.velocity),
            Architecture::Feedback => {
                EmdModel::feedback(self.motor, self.estimates, self.gains?, self.delays, self.velocity)
            }
        };
        Some(model.with_derivative(self.derivative))
    }

    /// Replaces the analysis grid.
    pub fn with_grid(mut self, grid: FrequencyGrid<f64>) -> Self {
        self.grid = grid;
        self
    }
}
