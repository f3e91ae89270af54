//! Randomized parameter sets shared by the integration tests.
//!
//! Ranges (log-uniform unless noted):
//! L in [10 uH, 10 mH], R in [5 mOhm, 1 Ohm], p in {3..6} (uniform),
//! lambda_m in [0.005, 0.1] V s/rad, estimates within +-30 % (uniform),
//! tau_c and tau_p in [0, 500 us] (uniform), tau_omega in [0.1 ms, 10 ms],
//! K_p in [0.01, 10], K_i in [1, 1e4].
//! Mechanics: J_h in [0.01, 0.1], J_m in [0.01, 0.2], b in [0.01, 2],
//! K_h in [20, 500], K_l in [10, 2000], N in [5, 40].

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use steerdyn_core::emd::{EmdModel, PiGains};
use steerdyn_core::mech::MechanicalParams;
use steerdyn_core::motor::{DelayParams, EstimatedParams, MotorParams, VelocityEstimator, VelocityVariant};

pub fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

pub fn motor(rng: &mut ChaCha8Rng) -> MotorParams<f64> {
    let l_d = log_uniform(rng, 1e-5, 1e-2);
    MotorParams {
        pole_pairs: rng.gen_range(3..=6),
        lambda_m: log_uniform(rng, 0.005, 0.1),
        l_d,
        l_q: l_d * rng.gen_range(1.0..1.5),
        r: log_uniform(rng, 5e-3, 1.0),
    }
}

pub fn estimates(rng: &mut ChaCha8Rng, mp: &MotorParams<f64>) -> EstimatedParams<f64> {
    let mut f = || rng.gen_range(0.7..1.3);
    EstimatedParams { lambda_m_hat: mp.lambda_m * f(), l_d_hat: mp.l_d * f(), l_q_hat: mp.l_q * f(), r_hat: mp.r * f() }
}

pub fn delays(rng: &mut ChaCha8Rng) -> DelayParams<f64> {
    DelayParams { tau_c: rng.gen_range(0.0..5e-4), tau_p: rng.gen_range(0.0..5e-4) }
}

pub fn velocity(rng: &mut ChaCha8Rng) -> VelocityEstimator<f64> {
    let variant = if rng.gen_bool(0.5) { VelocityVariant::Physical } else { VelocityVariant::Paper };
    VelocityEstimator { tau_omega: log_uniform(rng, 1e-4, 1e-2), variant }
}

pub fn gains(rng: &mut ChaCha8Rng) -> PiGains<f64> {
    PiGains {
        k_pd: log_uniform(rng, 0.01, 10.0),
        k_id: log_uniform(rng, 1.0, 1e4),
        k_pq: log_uniform(rng, 0.01, 10.0),
        k_iq: log_uniform(rng, 1.0, 1e4),
    }
}

pub fn mechanics(rng: &mut ChaCha8Rng) -> MechanicalParams<f64> {
    MechanicalParams {
        j_h: log_uniform(rng, 0.01, 0.1),
        b_h: log_uniform(rng, 0.01, 2.0),
        j_m: log_uniform(rng, 0.01, 0.2),
        b_m: log_uniform(rng, 0.01, 2.0),
        k_h: log_uniform(rng, 20.0, 500.0),
        k_l: log_uniform(rng, 10.0, 2000.0),
        n: log_uniform(rng, 5.0, 40.0),
    }
}

/// Feedforward and feedback drives sharing one random plant and estimates.
pub fn drives(rng: &mut ChaCha8Rng) -> [EmdModel<f64>; 2] {
    let mp = motor(rng);
    let ep = estimates(rng, &mp);
    let dp = delays(rng);
    let ve = velocity(rng);
    let g = gains(rng);
    [EmdModel::feedforward(mp, ep, dp, ve), EmdModel::feedback(mp, ep, g, dp, ve)]
}

pub fn rel(a: steerdyn_core::Complex<f64>, b: steerdyn_core::Complex<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}
