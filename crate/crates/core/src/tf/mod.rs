//! Polynomial and transfer-function algebra with exact transport delays.

mod freq;
mod margins;
mod polynomial;
mod rational;
mod roots;

pub use freq::{FrequencyGrid, FrequencyResponse, MIN_POINTS_PER_DECADE};
pub use margins::{stability_margins, Crossover, CrossoverKind, Evaluator, MarginReport};
pub use polynomial::Polynomial;
pub use rational::{pade_polynomials, DelayRational, PoleReport, POLE_EVAL_TOLERANCE, STABILITY_MARGIN};
pub use roots::polynomial_roots;
