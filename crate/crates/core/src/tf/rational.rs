use num_complex::Complex;

use super::{polynomial_roots, Polynomial};
use crate::scalar::fmt17;
use crate::{Error, Result, Scalar};

/// Below this modulus the denominator is treated as vanishing.
pub const POLE_EVAL_TOLERANCE: f64 = 1e-300;

/// Real-part threshold for strict stability.
pub const STABILITY_MARGIN: f64 = 1e-9;

/// Rational transfer function with a pure transport lag:
/// `num(s) / den(s) * exp(-delay * s)`.
///
/// The denominator is kept monic. A numerator that is an exact scalar
/// multiple of the denominator collapses to a static gain; no approximate
/// pole-zero cancellation is ever attempted.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayRational<T> {
    num: Polynomial<T>,
    den: Polynomial<T>,
    delay: T,
}

impl<T: Scalar> DelayRational<T> {
    pub fn new(num: Polynomial<T>, den: Polynomial<T>, delay: T) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::ZeroDenominator);
        }
        if !num.is_finite() || !den.is_finite() {
            return Err(Error::NonFiniteCoefficient);
        }
        if !delay.is_finite() || delay < T::zero() {
            return Err(Error::InvalidDelay(delay.as_f64()));
        }
        Ok(Self::canonical(num, den, delay))
    }

    pub fn rational(num: Polynomial<T>, den: Polynomial<T>) -> Result<Self> {
        Self::new(num, den, T::zero())
    }

    pub fn from_coeffs(num: &[T], den: &[T], delay: T) -> Result<Self> {
        Self::new(Polynomial::new(num.to_vec()), Polynomial::new(den.to_vec()), delay)
    }

    pub fn gain(k: T) -> Self {
        Self::canonical(Polynomial::constant(k), Polynomial::one(), T::zero())
    }

    pub fn zero() -> Self {
        Self::gain(T::zero())
    }

    pub fn one() -> Self {
        Self::gain(T::one())
    }

    /// `exp(-tau * s)`.
    pub fn pure_delay(tau: T) -> Result<Self> {
        Self::new(Polynomial::one(), Polynomial::one(), tau)
    }

    /// The polynomial `p(s)` as a transfer function `p(s)/1`.
    pub fn from_polynomial(p: Polynomial<T>) -> Self {
        Self::canonical(p, Polynomial::one(), T::zero())
    }

    fn canonical(num: Polynomial<T>, den: Polynomial<T>, delay: T) -> Self {
        if num.is_zero() {
            return Self { num, den: Polynomial::one(), delay };
        }
        let lc = den.leading_coeff();
        let (num, den) = if lc == T::one() {
            (num, den)
        } else {
            let inv = |p: &Polynomial<T>| Polynomial::new(p.coeffs().iter().map(|&c| c / lc).collect());
            (inv(&num), inv(&den))
        };
        // exact proportionality num = k * den collapses to the gain k
        if num.coeffs().len() == den.coeffs().len() && den.coeffs().len() > 1 {
            let k = num.leading_coeff();
            if num.coeffs().iter().zip(den.coeffs()).all(|(&n, &d)| n == k * d) {
                return Self { num: Polynomial::constant(k), den: Polynomial::one(), delay };
            }
        }
        Self { num, den, delay }
    }

    pub fn num(&self) -> &Polynomial<T> {
        &self.num
    }

    pub fn den(&self) -> &Polynomial<T> {
        &self.den
    }

    pub fn delay(&self) -> T {
        self.delay
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_proper(&self) -> bool {
        self.num.is_zero() || self.num.degree() <= self.den.degree()
    }

    pub fn is_biproper(&self) -> bool {
        !self.num.is_zero() && self.num.degree() == self.den.degree()
    }

    /// Evaluates at an arbitrary complex `s`, delay included.
    pub fn eval_s(&self, s: Complex<T>) -> Result<Complex<T>> {
        let d = self.den.eval_complex(s);
        let dm = d.norm();
        if dm < T::lit(POLE_EVAL_TOLERANCE) || dm == T::zero() {
            return Err(Error::EvalAtPole { omega: s.im.as_f64(), magnitude: dm.as_f64() });
        }
        let n = self.num.eval_complex(s);
        let lag = if self.delay == T::zero() { Complex::new(T::one(), T::zero()) } else { (-s * self.delay).exp() };
        Ok(n / d * lag)
    }

    /// `num(jw)/den(jw) * exp(-j w delay)` for `w > 0`.
    pub fn freq_eval(&self, omega: T) -> Result<Complex<T>> {
        if !omega.is_finite() || omega <= T::zero() {
            return Err(Error::InvalidParameter {
                name: "omega",
                constraint: format!("must be finite and > 0, got {omega}"),
            });
        }
        self.eval_s(Complex::new(T::zero(), omega))
    }

    /// Series connection.
    pub fn mul(&self, other: &Self) -> Self {
        Self::canonical(&self.num * &other.num, &self.den * &other.den, self.delay + other.delay)
    }

    /// Parallel connection; both operands must carry the same delay.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.delay != other.delay {
            return Err(Error::UnequalDelay { a: self.delay.as_f64(), b: other.delay.as_f64() });
        }
        if self.is_zero() {
            return Ok(other.clone());
        }
        if other.is_zero() {
            return Ok(self.clone());
        }
        if self.den == other.den {
            return Ok(Self::canonical(&self.num + &other.num, self.den.clone(), self.delay));
        }
        let num = &(&self.num * &other.den) + &(&other.num * &self.den);
        Ok(Self::canonical(num, &self.den * &other.den, self.delay))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        Self { num: -&self.num, den: self.den.clone(), delay: self.delay }
    }

    pub fn scale(&self, k: T) -> Self {
        Self::canonical(self.num.scale(k), self.den.clone(), self.delay)
    }

    /// Reciprocal `den/num`; only for delay-free functions.
    pub fn inv(&self) -> Result<Self> {
        if self.delay != T::zero() {
            return Err(Error::DelayNotAllowed { op: "inversion", delay: self.delay.as_f64() });
        }
        if self.num.is_zero() {
            return Err(Error::ZeroDenominator);
        }
        Ok(Self::canonical(self.den.clone(), self.num.clone(), T::zero()))
    }

    /// Negative-feedback closure `g / (1 + g h)` of delay-free functions.
    pub fn feedback(&self, h: &Self) -> Result<Self> {
        for d in [self.delay, h.delay] {
            if d != T::zero() {
                return Err(Error::DelayNotAllowed { op: "feedback", delay: d.as_f64() });
            }
        }
        let num = &self.num * &h.den;
        let den = &(&self.den * &h.den) + &(&self.num * &h.num);
        if den.is_zero() {
            return Err(Error::DegenerateFeedback);
        }
        Ok(Self::canonical(num, den, T::zero()))
    }

    /// Replaces the transport lag by its diagonal `[order/order]` Pade
    /// approximant.
    pub fn pade_rationalize(&self, order: usize) -> Result<Self> {
        if !(1..=10).contains(&order) {
            return Err(Error::PadeOrder(order));
        }
        if self.delay == T::zero() {
            return Ok(self.clone());
        }
        let (pn, pd) = pade_polynomials(self.delay, order);
        Ok(Self::canonical(&self.num * &pn, &self.den * &pd, T::zero()))
    }

    /// Roots of the denominator and the strict stability verdict.
    pub fn poles_and_stability(&self) -> Result<PoleReport<T>> {
        if self.delay != T::zero() {
            return Err(Error::DelayNotAllowed { op: "pole analysis", delay: self.delay.as_f64() });
        }
        if self.den.degree() == 0 {
            return Err(Error::NoPoles);
        }
        let poles = polynomial_roots(&self.den)?;
        Ok(PoleReport::classify(poles))
    }

    pub fn zeros(&self) -> Result<Vec<Complex<T>>> {
        polynomial_roots(&self.num)
    }

    /// Static gain `num(0)/den(0)`. Common factors of `s` are divided out
    /// first; a remaining pole at the origin yields a signed infinity.
    pub fn dc_gain(&self) -> T {
        if self.num.is_zero() {
            return T::zero();
        }
        let k = self.num.zero_root_multiplicity().min(self.den.zero_root_multiplicity());
        let num = self.num.strip_s_power(k);
        let den = self.den.strip_s_power(k);
        let n0 = num.coeff(0);
        let d0 = den.coeff(0);
        if d0.is_zero() {
            if n0.is_zero() {
                return T::zero();
            }
            let dl = den.coeff(den.zero_root_multiplicity());
            return if (n0 > T::zero()) == (dl > T::zero()) { T::infinity() } else { T::neg_infinity() };
        }
        n0 / d0
    }

    /// One-line text record `num;den;delay` with comma-separated ascending
    /// coefficients at 17 significant digits.
    pub fn to_record(&self) -> String {
        let join = |p: &Polynomial<T>| {
            if p.is_zero() {
                fmt17(T::zero())
            } else {
                p.coeffs().iter().map(|&c| fmt17(c)).collect::<Vec<_>>().join(",")
            }
        };
        format!("{};{};{}", join(&self.num), join(&self.den), fmt17(self.delay))
    }

    pub fn from_record(line: &str) -> Result<Self> {
        let fields: Vec<&str> = line.trim().split(';').collect();
        if fields.len() != 3 {
            return Err(Error::Record(format!("expected 3 ';'-separated fields, got {}", fields.len())));
        }
        let parse = |s: &str| -> Result<T> {
            let v: f64 = s.trim().parse().map_err(|_| Error::Record(format!("bad number '{s}'")))?;
            Ok(T::lit(v))
        };
        let coeffs = |s: &str| -> Result<Vec<T>> { s.split(',').map(parse).collect() };
        Self::new(Polynomial::new(coeffs(fields[0])?), Polynomial::new(coeffs(fields[1])?), parse(fields[2])?)
    }
}

/// Numerator and denominator of the diagonal Pade approximant of
/// `exp(-tau s)`.
pub fn pade_polynomials<T: Scalar>(tau: T, order: usize) -> (Polynomial<T>, Polynomial<T>) {
    let n = order;
    let mut c = T::one();
    let mut num = Vec::with_capacity(n + 1);
    let mut den = Vec::with_capacity(n + 1);
    let mut tau_k = T::one();
    for k in 0..=n {
        let sign = if k % 2 == 0 { T::one() } else { -T::one() };
        num.push(sign * c * tau_k);
        den.push(c * tau_k);
        // c_{k+1} = c_k (n-k) / ((2n-k)(k+1))
        c = c * T::from_usize_exact(n - k.min(n)) / (T::from_usize_exact(2 * n - k) * T::from_usize_exact(k + 1));
        tau_k *= tau;
    }
    (Polynomial::new(num), Polynomial::new(den))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoleReport<T> {
    pub poles: Vec<Complex<T>>,
    /// Every pole has real part below `-STABILITY_MARGIN`.
    pub stable: bool,
    /// Not stable only because of poles on the imaginary axis.
    pub marginal: bool,
}

impl<T: Scalar> PoleReport<T> {
    pub fn classify(poles: Vec<Complex<T>>) -> Self {
        let thr = T::lit(STABILITY_MARGIN);
        let stable = poles.iter().all(|p| p.re < -thr);
        let marginal = !stable && poles.iter().all(|p| p.re <= thr);
        Self { poles, stable, marginal }
    }
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;

    type Tf = DelayRational<f64>;

    fn tf(num: &[f64], den: &[f64]) -> Tf {
        Tf::from_coeffs(num, den, 0.0).unwrap()
    }

    #[test]
    fn first_order_corner() {
        let g = tf(&[1.0], &[1.0, 1.0]).freq_eval(1.0).unwrap();
        assert_relative_eq!(g.norm(), std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
        assert_relative_eq!(g.arg().to_degrees(), -45.0, epsilon = 1e-9);
    }

    #[test]
    fn pure_delay_phase() {
        let g = Tf::pure_delay(0.1).unwrap().freq_eval(10.0).unwrap();
        assert_relative_eq!(g.norm(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(g.arg(), -1.0, epsilon = 1e-15);
    }

    #[test]
    fn filtered_derivative() {
        let g = tf(&[0.0, 1.0], &[1.0, 0.01]).freq_eval(100.0).unwrap();
        assert_relative_eq!(g.norm(), 70.711, epsilon = 1e-3);
        assert_relative_eq!(g.arg().to_degrees(), 45.0, epsilon = 1e-9);
    }

    #[test]
    fn eval_at_imaginary_axis_pole() {
        let err = tf(&[1.0], &[1.0, 0.0, 1.0]).freq_eval(1.0).unwrap_err();
        assert!(matches!(err, Error::EvalAtPole { .. }));
        assert!(tf(&[1.0], &[1.0]).freq_eval(0.0).is_err());
    }

    #[test]
    fn canonical_monic_and_validation() {
        let g = tf(&[2.0], &[4.0, 2.0]);
        assert_eq!(g.num().coeffs(), &[1.0]);
        assert_eq!(g.den().coeffs(), &[2.0, 1.0]);
        assert_eq!(Tf::from_coeffs(&[1.0], &[0.0], 0.0), Err(Error::ZeroDenominator));
        assert!(matches!(Tf::from_coeffs(&[1.0], &[1.0], -0.1), Err(Error::InvalidDelay(_))));
    }

    #[test]
    fn series_composition() {
        let p = tf(&[1.0], &[1.0, 1.0]).mul(&tf(&[1.0], &[2.0, 1.0]));
        assert_eq!(p, tf(&[1.0], &[2.0, 3.0, 1.0]));
        let d = Tf::pure_delay(0.01).unwrap().mul(&Tf::pure_delay(0.02).unwrap());
        assert_relative_eq!(d.delay(), 0.03, epsilon = 1e-17);
    }

    #[test]
    fn series_matches_pointwise_product() {
        let a = tf(&[1.0], &[1.0, 1.0]);
        let b = tf(&[0.0, 1.0], &[5.0, 1.0]);
        let w = 3.7;
        // direct complex arithmetic at s = j3.7
        let s = Complex::new(0.0, w);
        let expected = (1.0 / (s + 1.0)) * (s / (s + 5.0));
        let got = a.mul(&b).freq_eval(w).unwrap();
        assert!((got - expected).norm() <= 1e-14 * expected.norm());
    }

    #[test]
    fn parallel_composition() {
        let a = tf(&[1.0], &[1.0, 1.0]);
        assert_eq!(a.add(&a).unwrap(), tf(&[2.0], &[1.0, 1.0]));
        assert_eq!(a.add(&tf(&[0.0, 1.0], &[1.0, 1.0])).unwrap(), Tf::one());
        let e1 = Tf::from_coeffs(&[1.0], &[1.0], 0.01).unwrap();
        let e2 = Tf::from_coeffs(&[1.0], &[1.0], 0.02).unwrap();
        assert!(matches!(e1.add(&e2), Err(Error::UnequalDelay { .. })));
    }

    #[test]
    fn feedback_closures() {
        assert_eq!(tf(&[10.0], &[0.0, 1.0]).feedback(&Tf::one()).unwrap(), tf(&[10.0], &[10.0, 1.0]));
        assert_eq!(Tf::one().feedback(&Tf::zero()).unwrap(), Tf::one());
        // (s+1)/(s+2) / (1 + (s+1)/(s+2)) = (s+1)/(2s+3)
        let g = tf(&[1.0, 1.0], &[2.0, 1.0]).feedback(&Tf::one()).unwrap();
        assert_eq!(g, tf(&[1.0, 1.0], &[3.0, 2.0]));
        let delayed = Tf::pure_delay(0.1).unwrap();
        assert!(matches!(delayed.feedback(&Tf::one()), Err(Error::DelayNotAllowed { .. })));
        assert_eq!(Tf::one().feedback(&Tf::gain(-1.0)), Err(Error::DegenerateFeedback));
    }

    #[test]
    fn pade_first_order_is_textbook() {
        let tau = 0.2;
        let p = Tf::pure_delay(tau).unwrap().pade_rationalize(1).unwrap();
        assert_eq!(p.delay(), 0.0);
        let want = tf(&[1.0, -tau / 2.0], &[1.0, tau / 2.0]);
        assert_eq!(p, want);
    }

    #[test]
    fn pade_identity_and_range() {
        let g = tf(&[1.0], &[1.0, 1.0]);
        for order in 1..=10 {
            assert_eq!(g.pade_rationalize(order).unwrap(), g);
        }
        assert_eq!(g.pade_rationalize(0), Err(Error::PadeOrder(0)));
        assert_eq!(g.pade_rationalize(11), Err(Error::PadeOrder(11)));
    }

    #[test]
    fn pade_fourth_order_accuracy() {
        let exact = Tf::pure_delay(0.001).unwrap();
        let approx = exact.pade_rationalize(4).unwrap();
        assert_eq!(approx.num().degree(), 4);
        assert_eq!(approx.den().degree(), 4);
        for i in 0..=200 {
            let w = 10f64.powf(-1.0 + 4.0 * i as f64 / 200.0);
            let e = (approx.freq_eval(w).unwrap() - exact.freq_eval(w).unwrap()).norm();
            assert!(e < 1e-6, "w = {w}: {e}");
        }
    }

    #[test]
    fn pole_examples() {
        let r = tf(&[1.0], &[2.0, 3.0, 1.0]).poles_and_stability().unwrap();
        assert!(r.stable);
        assert_relative_eq!(r.poles[0].re, -2.0, epsilon = 1e-12);
        assert_relative_eq!(r.poles[1].re, -1.0, epsilon = 1e-12);

        let r = tf(&[1.0], &[1.0, 0.0, 1.0]).poles_and_stability().unwrap();
        assert!(!r.stable);
        assert!(r.marginal);
        assert_relative_eq!(r.poles[0].im, -1.0, epsilon = 1e-12);
        assert_relative_eq!(r.poles[1].im, 1.0, epsilon = 1e-12);

        // s^3 + 2s^2 + 2s + 1 = (s + 1)(s^2 + s + 1)
        let r = tf(&[1.0], &[1.0, 2.0, 2.0, 1.0]).poles_and_stability().unwrap();
        assert!(r.stable);
        let h = 3f64.sqrt() / 2.0;
        let want = [Complex::new(-1.0, 0.0), Complex::new(-0.5, -h), Complex::new(-0.5, h)];
        for (p, w) in r.poles.iter().zip(want) {
            assert!((p - w).norm() <= 1e-10 * w.norm(), "{p} vs {w}");
        }

        assert!(matches!(
            Tf::from_coeffs(&[1.0], &[1.0, 1.0], 0.1).unwrap().poles_and_stability(),
            Err(Error::DelayNotAllowed { .. })
        ));
        assert_eq!(Tf::one().poles_and_stability(), Err(Error::NoPoles));
    }

    #[test]
    fn dc_gain_examples() {
        assert_eq!(tf(&[10.0, 5.0], &[10.0, 1.0]).dc_gain(), 1.0);
        assert_eq!(tf(&[1.0], &[0.0, 1.0]).dc_gain(), f64::INFINITY);
        assert_eq!(tf(&[-1.0], &[0.0, 1.0]).dc_gain(), f64::NEG_INFINITY);
        assert_eq!(tf(&[0.0, 1.0], &[0.0, 1.0]).dc_gain(), 1.0);
        assert_eq!(tf(&[0.0, 3.0], &[0.0, 2.0, 1.0]).dc_gain(), 1.5);
    }

    #[test]
    fn record_round_trip() {
        let g = Tf::from_coeffs(&[0.1, -2.5e-7], &[3.0, 1.0 / 3.0, 1.0], 1.25e-4).unwrap();
        let line = g.to_record();
        assert_eq!(line.split(';').count(), 3);
        assert_eq!(Tf::from_record(&line).unwrap(), g);
        assert_eq!(Tf::from_record(&Tf::zero().to_record()).unwrap(), Tf::zero());
        assert!(Tf::from_record("1;2").is_err());
    }
}
