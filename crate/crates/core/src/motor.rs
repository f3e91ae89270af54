//! Linearized synchronous-frame PMSM model, transport lags of the inverter
//! and current measurement, MTPA reference generation, and the velocity
//! estimate.
//!
//! Motor velocity is mechanical (rad/s); the electrical velocity is
//! `p * omega_m`. The nonlinear voltage model the linearization comes from is
//!
//! ```text
//! V_d = (L_d s + R) I_d + p w L_q I_q
//! V_q = (L_q s + R) I_q - p w L_d I_d + p lambda_m w
//! ```

use num_complex::Complex;

use crate::tf::{DelayRational, Polynomial};
use crate::{Error, Result, Scalar};

/// Torque constant factor of the synchronous-frame torque equation.
pub const Q_CONST: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotorParams<T> {
    pub pole_pairs: u32,
    /// Permanent-magnet flux linkage, V s/rad.
    pub lambda_m: T,
    pub l_d: T,
    pub l_q: T,
    /// Motor plus inverter resistance, ohm.
    pub r: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatedParams<T> {
    pub lambda_m_hat: T,
    pub l_d_hat: T,
    pub l_q_hat: T,
    pub r_hat: T,
}

fn positive<T: Scalar>(v: &mut Vec<(&'static str, &'static str)>, name: &'static str, x: T) {
    if !(x.is_finite() && x > T::zero()) {
        v.push((name, "must be finite and > 0"));
    }
}

fn first_violation(v: Vec<(&'static str, &'static str)>) -> Result<()> {
    match v.first() {
        Some(&(name, c)) => Err(Error::InvalidParameter { name, constraint: c.into() }),
        None => Ok(()),
    }
}

impl<T: Scalar> MotorParams<T> {
    pub fn q_const(&self) -> T {
        T::lit(Q_CONST)
    }

    pub fn p(&self) -> T {
        T::lit(f64::from(self.pole_pairs))
    }

    /// Torque per ampere of q-axis current.
    pub fn torque_constant(&self) -> T {
        self.q_const() * self.p() * self.lambda_m
    }

    pub fn violations(&self) -> Vec<(&'static str, &'static str)> {
        let mut v = Vec::new();
        if self.pole_pairs == 0 {
            v.push(("p", "must be a positive integer"));
        }
        positive(&mut v, "lambda_m", self.lambda_m);
        positive(&mut v, "l_d", self.l_d);
        positive(&mut v, "l_q", self.l_q);
        positive(&mut v, "r", self.r);
        v
    }

    pub fn validate(&self) -> Result<()> {
        first_violation(self.violations())
    }

    /// The same machine with its constants replaced by the controller's
    /// estimates.
    pub fn with_estimates(&self, ep: &EstimatedParams<T>) -> Self {
        Self { pole_pairs: self.pole_pairs, lambda_m: ep.lambda_m_hat, l_d: ep.l_d_hat, l_q: ep.l_q_hat, r: ep.r_hat }
    }

    /// Steady-state dq voltages of the nonlinear model at constant currents
    /// and velocity.
    pub fn steady_state_voltage(&self, i_d: T, i_q: T, omega_m: T) -> (T, T) {
        let pw = self.p() * omega_m;
        (self.r * i_d + pw * self.l_q * i_q, self.r * i_q - pw * self.l_d * i_d + pw * self.lambda_m)
    }
}

impl<T: Scalar> EstimatedParams<T> {
    pub fn perfect(mp: &MotorParams<T>) -> Self {
        Self { lambda_m_hat: mp.lambda_m, l_d_hat: mp.l_d, l_q_hat: mp.l_q, r_hat: mp.r }
    }

    pub fn violations(&self) -> Vec<(&'static str, &'static str)> {
        let mut v = Vec::new();
        positive(&mut v, "lambda_m_hat", self.lambda_m_hat);
        positive(&mut v, "l_d_hat", self.l_d_hat);
        positive(&mut v, "l_q_hat", self.l_q_hat);
        positive(&mut v, "r_hat", self.r_hat);
        v
    }

    pub fn validate(&self) -> Result<()> {
        first_violation(self.violations())
    }
}

/// Linearization set-point. The voltages are derived from the currents and
/// velocity so the set-point is always a steady state of the machine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint<T> {
    i_d0: T,
    i_q0: T,
    omega_m0: T,
    v_d0: T,
    v_q0: T,
}

impl<T: Scalar> OperatingPoint<T> {
    pub fn new(mp: &MotorParams<T>, i_d0: T, i_q0: T, omega_m0: T) -> Result<Self> {
        for (name, x) in [("i_d0", i_d0), ("i_q0", i_q0), ("omega_m0", omega_m0)] {
            if !x.is_finite() {
                return Err(Error::InvalidParameter { name, constraint: "must be finite".into() });
            }
        }
        let (v_d0, v_q0) = mp.steady_state_voltage(i_d0, i_q0, omega_m0);
        Ok(Self { i_d0, i_q0, omega_m0, v_d0, v_q0 })
    }

    /// Standstill, zero current.
    pub fn zero() -> Self {
        Self { i_d0: T::zero(), i_q0: T::zero(), omega_m0: T::zero(), v_d0: T::zero(), v_q0: T::zero() }
    }

    /// Accepts caller-supplied voltages only if they match the steady state
    /// within `tol` (absolute, volts).
    pub fn with_voltages(mp: &MotorParams<T>, i_d0: T, i_q0: T, omega_m0: T, v_d0: T, v_q0: T, tol: T) -> Result<Self> {
        let op = Self::new(mp, i_d0, i_q0, omega_m0)?;
        if (op.v_d0 - v_d0).abs() > tol || (op.v_q0 - v_q0).abs() > tol {
            return Err(Error::InvalidParameter {
                name: "operating_point",
                constraint: format!(
                    "voltages ({v_d0}, {v_q0}) inconsistent with steady state ({}, {})",
                    op.v_d0, op.v_q0
                ),
            });
        }
        Ok(op)
    }

    pub fn i_d0(&self) -> T {
        self.i_d0
    }
    pub fn i_q0(&self) -> T {
        self.i_q0
    }
    pub fn omega_m0(&self) -> T {
        self.omega_m0
    }
    pub fn v_d0(&self) -> T {
        self.v_d0
    }
    pub fn v_q0(&self) -> T {
        self.v_q0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DelayParams<T> {
    /// Current-measurement lag, s.
    pub tau_c: T,
    /// Inverter actuation lag, s.
    pub tau_p: T,
}

impl<T: Scalar> DelayParams<T> {
    pub fn violations(&self) -> Vec<(&'static str, &'static str)> {
        let mut v = Vec::new();
        for (name, x) in [("tau_c", self.tau_c), ("tau_p", self.tau_p)] {
            if !(x.is_finite() && x >= T::zero()) {
                v.push((name, "must be finite and >= 0"));
            }
        }
        v
    }

    pub fn total(&self) -> T {
        self.tau_c + self.tau_p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VelocityVariant {
    /// `s / (tau s + 1)` applied to the motor velocity, as published.
    Paper,
    /// `1 / (tau s + 1)`: a low-pass filtered velocity estimate.
    #[default]
    Physical,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityEstimator<T> {
    pub tau_omega: T,
    pub variant: VelocityVariant,
}

impl<T: Scalar> VelocityEstimator<T> {
    pub fn violations(&self) -> Vec<(&'static str, &'static str)> {
        if self.tau_omega.is_finite() && self.tau_omega >= T::zero() {
            Vec::new()
        } else {
            vec![("tau_omega", "must be finite and >= 0")]
        }
    }
}

/// 2x2 matrix of transfer functions, `[[dd, dq], [qd, qq]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TfMatrix2<T> {
    pub dd: DelayRational<T>,
    pub dq: DelayRational<T>,
    pub qd: DelayRational<T>,
    pub qq: DelayRational<T>,
}

impl<T: Scalar> TfMatrix2<T> {
    pub fn diagonal(d: DelayRational<T>, q: DelayRational<T>) -> Self {
        Self { dd: d, dq: DelayRational::zero(), qd: DelayRational::zero(), qq: q }
    }

    pub fn eval_s(&self, s: Complex<T>) -> Result<[[Complex<T>; 2]; 2]> {
        Ok([[self.dd.eval_s(s)?, self.dq.eval_s(s)?], [self.qd.eval_s(s)?, self.qq.eval_s(s)?]])
    }

    pub fn is_diagonal(&self) -> bool {
        self.dq.is_zero() && self.qd.is_zero()
    }
}

/// `T_cmd -> (I_d*, I_q*)` with `I_d* = 0`.
pub fn mtpa_map<T: Scalar>(t_cmd: T, mp: &MotorParams<T>) -> (T, T) {
    (T::zero(), t_cmd / mp.torque_constant())
}

pub fn torque_from_iq<T: Scalar>(i_q: T, mp: &MotorParams<T>) -> T {
    mp.q_const() * mp.p() * mp.lambda_m * i_q
}

/// Small-signal impedance matrix and back-EMF coupling vector at a set-point:
/// `dV = P_inv dI + E d(omega_m)`.
pub fn linearized_plant<T: Scalar>(mp: &MotorParams<T>, op: &OperatingPoint<T>) -> (TfMatrix2<T>, [T; 2]) {
    let p = mp.p();
    let w0 = op.omega_m0;
    let p_inv = TfMatrix2 {
        dd: DelayRational::from_polynomial(Polynomial::linear(mp.l_d, mp.r)),
        dq: DelayRational::gain(p * w0 * mp.l_q),
        qd: DelayRational::gain(-p * w0 * mp.l_d),
        qq: DelayRational::from_polynomial(Polynomial::linear(mp.l_q, mp.r)),
    };
    let e = [p * mp.l_q * op.i_q0, -p * mp.l_d * op.i_d0 + p * mp.lambda_m];
    (p_inv, e)
}

/// Measurement lag `B` and actuation lag `X` as diagonal delay matrices.
pub fn delay_elements<T: Scalar>(dp: &DelayParams<T>) -> Result<(TfMatrix2<T>, TfMatrix2<T>)> {
    let b = DelayRational::pure_delay(dp.tau_c)?;
    let x = DelayRational::pure_delay(dp.tau_p)?;
    Ok((TfMatrix2::diagonal(b.clone(), b), TfMatrix2::diagonal(x.clone(), x)))
}

pub fn velocity_estimator_tf<T: Scalar>(ve: &VelocityEstimator<T>) -> DelayRational<T> {
    let den = Polynomial::linear(ve.tau_omega, T::one());
    let num = match ve.variant {
        VelocityVariant::Paper => Polynomial::monomial(T::one(), 1),
        VelocityVariant::Physical => Polynomial::one(),
    };
    DelayRational::rational(num, den).expect("tau s + 1 is nonzero")
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;

    fn motor() -> MotorParams<f64> {
        MotorParams { pole_pairs: 4, lambda_m: 0.05, l_d: 1e-3, l_q: 1e-3, r: 0.1 }
    }

    #[test]
    fn mtpa_examples() {
        let mp = motor();
        let (id, iq) = mtpa_map(1.0, &mp);
        assert_eq!(id, 0.0);
        assert_relative_eq!(iq, 3.3333, epsilon = 1e-4);
        assert_eq!(mtpa_map(0.0, &mp), (0.0, 0.0));
        for t in [-5.0, 0.3, 12.0] {
            assert_relative_eq!(torque_from_iq(mtpa_map(t, &mp).1, &mp), t, max_relative = 1e-15);
        }
    }

    #[test]
    fn torque_examples() {
        let mp = motor();
        assert_relative_eq!(torque_from_iq(3.3333, &mp), 1.0, epsilon = 1e-4);
        assert_eq!(torque_from_iq(0.0, &mp), 0.0);
        assert_relative_eq!(torque_from_iq(3.0, &mp), torque_from_iq(1.0, &mp) + torque_from_iq(2.0, &mp));
    }

    #[test]
    fn plant_at_standstill_is_diagonal() {
        let mp = motor();
        let (p_inv, e) = linearized_plant(&mp, &OperatingPoint::new(&mp, 0.0, 0.0, 0.0).unwrap());
        assert!(p_inv.is_diagonal());
        assert_eq!(e, [0.0, 4.0 * 0.05]);
    }

    #[test]
    fn plant_cross_coupling() {
        let mp = motor();
        let op = OperatingPoint::new(&mp, 0.0, 2.0, 10.0).unwrap();
        let (p_inv, _) = linearized_plant(&mp, &op);
        assert_relative_eq!(p_inv.dq.dc_gain(), 0.04, epsilon = 1e-15);
        assert_eq!(p_inv.dq.den().degree(), 0);
        assert_relative_eq!(p_inv.qd.dc_gain(), -0.04, epsilon = 1e-15);
    }

    #[test]
    fn set_point_voltage_consistency() {
        let mp = motor();
        let op = OperatingPoint::new(&mp, -1.5, 7.0, 42.0).unwrap();
        let (p_inv, _) = linearized_plant(&mp, &op);
        let s0 = Complex::new(0.0, 0.0);
        let m = p_inv.eval_s(s0).unwrap();
        let pl = mp.p() * mp.lambda_m * op.omega_m0();
        let vd = m[0][0].re * op.i_d0() + m[0][1].re * op.i_q0();
        let vq = m[1][0].re * op.i_d0() + m[1][1].re * op.i_q0() + pl;
        assert!((vd - op.v_d0()).abs() <= 1e-12);
        assert!((vq - op.v_q0()).abs() <= 1e-12);
        assert!(OperatingPoint::with_voltages(&mp, -1.5, 7.0, 42.0, op.v_d0(), op.v_q0(), 1e-9).is_ok());
        assert!(OperatingPoint::with_voltages(&mp, -1.5, 7.0, 42.0, op.v_d0() + 1.0, op.v_q0(), 1e-9).is_err());
    }

    #[test]
    fn linearization_matches_finite_difference() {
        let mp = motor();
        let op = OperatingPoint::new(&mp, -1.0, 5.0, 30.0).unwrap();
        let (p_inv, e) = linearized_plant(&mp, &op);
        let m = p_inv.eval_s(Complex::new(0.0, 0.0)).unwrap();
        let h = 1e-6;
        let base = mp.steady_state_voltage(op.i_d0(), op.i_q0(), op.omega_m0());
        let dw = mp.steady_state_voltage(op.i_d0(), op.i_q0(), op.omega_m0() + h);
        let diq = mp.steady_state_voltage(op.i_d0(), op.i_q0() + h, op.omega_m0());
        assert_relative_eq!((dw.0 - base.0) / h, e[0], max_relative = 1e-6);
        assert_relative_eq!((dw.1 - base.1) / h, e[1], max_relative = 1e-6);
        assert_relative_eq!((diq.0 - base.0) / h, m[0][1].re, max_relative = 1e-6);
        assert_relative_eq!((diq.1 - base.1) / h, m[1][1].re, max_relative = 1e-6);
    }

    #[test]
    fn delay_elements_examples() {
        let (b, x) = delay_elements(&DelayParams { tau_c: 0.0, tau_p: 0.0005 }).unwrap();
        assert_eq!(b.dd, DelayRational::one());
        assert_eq!(b.qq, DelayRational::one());
        assert!(b.is_diagonal() && x.is_diagonal());
        let v = x.qq.freq_eval(1000.0).unwrap();
        assert_relative_eq!(v.norm(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(v.arg(), -0.5, epsilon = 1e-15);
        for w in [0.1, 10.0, 1e4] {
            assert_relative_eq!(x.dd.freq_eval(w).unwrap().norm(), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn velocity_estimator_variants() {
        let phys = VelocityEstimator { tau_omega: 0.0, variant: VelocityVariant::Physical };
        assert_eq!(velocity_estimator_tf(&phys), DelayRational::one());
        let paper = VelocityEstimator { tau_omega: 0.003, variant: VelocityVariant::Paper };
        assert_eq!(velocity_estimator_tf(&paper).dc_gain(), 0.0);
        let lp = VelocityEstimator { tau_omega: 0.001, variant: VelocityVariant::Physical };
        let v: Complex<f64> = velocity_estimator_tf(&lp).freq_eval(1000.0).unwrap();
        assert_relative_eq!(v.norm(), std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
        assert_relative_eq!(v.arg().to_degrees(), -45.0, epsilon = 1e-9);
    }

    #[test]
    fn validation_lists_everything() {
        let mp = MotorParams { pole_pairs: 0, lambda_m: -1.0, l_d: 1e-3, l_q: 0.0, r: 0.1 };
        assert_eq!(mp.violations().len(), 3);
        assert!(mp.validate().is_err());
    }
}
