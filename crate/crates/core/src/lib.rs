//! Delay-aware transfer-function toolkit for the closed-loop electromechanical
//! dynamics of electric power steering.
//!
//! Every kernel is generic over a [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix the scalar to `f64`, which is what the analysis
//! tolerances are stated for.
//!
//! Bottom up: [`tf`] holds polynomials, delayed rational functions, frequency
//! responses and margins; [`mech`] and [`motor`] are the plant models; [`emd`]
//! covers the current-control architectures; [`closed_loop`] combines
//! mechanics and drive; [`sim`] runs time-domain cross-checks.

pub mod closed_loop;
pub mod emd;
pub mod error;
pub mod linalg;
pub mod mech;
pub mod motor;
pub mod scalar;
pub mod sim;
pub mod tf;

pub use error::{Error, Result};
pub use scalar::{fmt17, Scalar};

pub use num_complex::Complex;

pub type Poly = tf::Polynomial<f64>;
pub type Tf = tf::DelayRational<f64>;
pub type Grid = tf::FrequencyGrid<f64>;
pub type Frf = tf::FrequencyResponse<f64>;
pub type Margins = tf::MarginReport<f64>;

pub type Mechanical = mech::MechanicalParams<f64>;
pub type TwoMass = mech::TwoMassModel<f64>;
pub type Motor = motor::MotorParams<f64>;
pub type Estimates = motor::EstimatedParams<f64>;
pub type Delays = motor::DelayParams<f64>;
pub type VelocityFilter = motor::VelocityEstimator<f64>;
pub type SetPoint = motor::OperatingPoint<f64>;
pub type Gains = emd::PiGains<f64>;
pub type Drive = emd::EmdModel<f64>;
pub type DriveResponse = emd::EmdResponse<f64>;
pub type Assist = closed_loop::AssistLaw<f64>;
pub type Ss = sim::StateSpace<f64>;
