//! Electric motor drive torque control as a pair of responses
//! `T_m = A_t T_m* + A_omega omega_m`, for model-based feedforward and PI
//! feedback current control.
//!
//! Closed forms are valid at zero set-point velocity. [`EmdModel::block_compose_at`]
//! assembles the full 2x2 current loop numerically instead and works at any
//! set-point; it is the reference the closed forms are tested against.

use std::fmt;

use num_complex::Complex;

use crate::linalg::solve2;
use crate::motor::{
    linearized_plant, velocity_estimator_tf, DelayParams, EstimatedParams, MotorParams, OperatingPoint, TfMatrix2,
    VelocityEstimator,
};
use crate::tf::{pade_polynomials, DelayRational, FrequencyGrid, FrequencyResponse, Polynomial};
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Architecture {
    Feedforward,
    Feedback,
}

impl Architecture {
    pub fn tag(self) -> &'static str {
        match self {
            Architecture::Feedforward => "ff",
            Architecture::Feedback => "fb",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Diagonal PI current-regulator gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiGains<T> {
    pub k_pd: T,
    pub k_id: T,
    pub k_pq: T,
    pub k_iq: T,
}

impl<T: Scalar> PiGains<T> {
    pub fn violations(&self) -> Vec<(&'static str, &'static str)> {
        let mut v = Vec::new();
        for (name, x) in [("k_pd", self.k_pd), ("k_id", self.k_id), ("k_pq", self.k_pq)] {
            if !(x.is_finite() && x >= T::zero()) {
                v.push((name, "must be finite and >= 0"));
            }
        }
        if !(self.k_iq.is_finite() && self.k_iq > T::zero()) {
            v.push(("k_iq", "must be finite and > 0"));
        }
        v
    }
}

/// The differentiator `s_hat` used inside the controller.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum DerivativeModel<T> {
    #[default]
    Ideal,
    /// `s / (tau_d s + 1)`
    Filtered { tau_d: T },
}

impl<T: Scalar> DerivativeModel<T> {
    /// `(n, d)` with `s_hat = n/d`.
    pub fn polynomials(&self) -> (Polynomial<T>, Polynomial<T>) {
        let s = Polynomial::monomial(T::one(), 1);
        match *self {
            DerivativeModel::Ideal => (s, Polynomial::one()),
            DerivativeModel::Filtered { tau_d } => (s, Polynomial::linear(tau_d, T::one())),
        }
    }

    pub fn eval_s(&self, s: Complex<T>) -> Complex<T> {
        match *self {
            DerivativeModel::Ideal => s,
            DerivativeModel::Filtered { tau_d } => s / (s * tau_d + T::one()),
        }
    }
}

/// Linearized controller: `dV* = C_t dI* (+ feedback) + C_omega d(omega_hat)`.
///
/// For feedback control `C_t` acts on the error `I* - I_hat`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerLaw<T> {
    pub architecture: Architecture,
    pub c_t: TfMatrix2<T>,
    pub c_omega: [DelayRational<T>; 2],
}

/// Everything that determines the drive's torque-control dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct EmdModel<T> {
    pub architecture: Architecture,
    pub motor: MotorParams<T>,
    pub estimates: EstimatedParams<T>,
    pub gains: Option<PiGains<T>>,
    pub delays: DelayParams<T>,
    pub velocity: VelocityEstimator<T>,
    pub derivative: DerivativeModel<T>,
}

/// How a response component is held.
#[derive(Debug, Clone, PartialEq)]
pub enum Response<T> {
    Symbolic(DelayRational<T>),
    Sampled(FrequencyResponse<T>),
    /// Not rational in `s`; evaluated on demand from the closed form with
    /// exact delays.
    Exact,
}

impl<T> Response<T> {
    pub fn as_symbolic(&self) -> Option<&DelayRational<T>> {
        match self {
            Response::Symbolic(tf) => Some(tf),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Form {
    Symbolic,
    Sampled,
}

#[derive(Debug, Clone, PartialEq)]
enum ExactSource<T> {
    ClosedForm(EmdModel<T>),
    Composed(EmdModel<T>, OperatingPoint<T>),
}

/// `(A_t, A_omega)` with an architecture tag.
#[derive(Debug, Clone, PartialEq)]
pub struct EmdResponse<T> {
    pub architecture: Option<Architecture>,
    pub a_t: Response<T>,
    pub a_omega: Response<T>,
    exact: Option<ExactSource<T>>,
}

impl<T: Scalar> EmdResponse<T> {
    /// A user-supplied symbolic pair.
    pub fn symbolic(architecture: Option<Architecture>, a_t: DelayRational<T>, a_omega: DelayRational<T>) -> Self {
        Self { architecture, a_t: Response::Symbolic(a_t), a_omega: Response::Symbolic(a_omega), exact: None }
    }

    /// A measured or externally computed pair on a shared grid.
    pub fn sampled(
        architecture: Option<Architecture>,
        a_t: FrequencyResponse<T>,
        a_omega: FrequencyResponse<T>,
    ) -> Result<Self> {
        if a_t.grid() != a_omega.grid() {
            return Err(Error::GridMismatch);
        }
        Ok(Self { architecture, a_t: Response::Sampled(a_t), a_omega: Response::Sampled(a_omega), exact: None })
    }

    /// An ideal drive: `A_t = 1`, `A_omega = 0`.
    pub fn identity() -> Self {
        Self::symbolic(None, DelayRational::one(), DelayRational::zero())
    }

    pub fn form(&self) -> Form {
        match (&self.a_t, &self.a_omega) {
            (Response::Symbolic(_), Response::Symbolic(_)) => Form::Symbolic,
            _ => Form::Sampled,
        }
    }

    pub fn symbolic_pair(&self) -> Option<(&DelayRational<T>, &DelayRational<T>)> {
        Some((self.a_t.as_symbolic()?, self.a_omega.as_symbolic()?))
    }

    /// True when every component can be evaluated at any frequency.
    pub fn is_exact(&self) -> bool {
        self.exact.is_some() || self.form() == Form::Symbolic
    }

    fn exact_at(&self, omega: T) -> Result<[Complex<T>; 2]> {
        let s = Complex::new(T::zero(), omega);
        match &self.exact {
            Some(ExactSource::ClosedForm(m)) => m.closed_form_at(s),
            Some(ExactSource::Composed(m, op)) => m.block_compose_at(op, s),
            None => Err(Error::NeedsGrid),
        }
    }

    fn component_at(&self, which: usize, omega: T) -> Result<Complex<T>> {
        let r = if which == 0 { &self.a_t } else { &self.a_omega };
        match r {
            Response::Symbolic(tf) => tf.freq_eval(omega),
            Response::Sampled(fr) => match fr.grid().omegas().binary_search_by(|w| w.partial_cmp(&omega).unwrap()) {
                Ok(i) => Ok(fr.values()[i]),
                Err(_) => Ok(self.exact_at(omega)?[which]),
            },
            Response::Exact => Ok(self.exact_at(omega)?[which]),
        }
    }

    /// `[A_t(jw), A_omega(jw)]`.
    pub fn eval_jw(&self, omega: T) -> Result<[Complex<T>; 2]> {
        Ok([self.component_at(0, omega)?, self.component_at(1, omega)?])
    }

    /// Both components on `grid`.
    pub fn sample(&self, grid: &FrequencyGrid<T>) -> Result<(FrequencyResponse<T>, FrequencyResponse<T>)> {
        let one = |which: usize| -> Result<FrequencyResponse<T>> {
            let r = if which == 0 { &self.a_t } else { &self.a_omega };
            match r {
                Response::Sampled(fr) if fr.grid() == grid => Ok(fr.clone()),
                _ => FrequencyResponse::from_fn(grid, |w| self.component_at(which, w)),
            }
        };
        Ok((one(0)?, one(1)?))
    }

    pub fn into_sampled(self, grid: &FrequencyGrid<T>) -> Result<Self> {
        let (a, b) = self.sample(grid)?;
        Ok(Self { a_t: Response::Sampled(a), a_omega: Response::Sampled(b), ..self })
    }
}

impl<T: Scalar> EmdModel<T> {
    pub fn feedforward(
        motor: MotorParams<T>,
        estimates: EstimatedParams<T>,
        delays: DelayParams<T>,
        velocity: VelocityEstimator<T>,
    ) -> Self {
        Self {
            architecture: Architecture::Feedforward,
            motor,
            estimates,
            gains: None,
            delays,
            velocity,
            derivative: DerivativeModel::Ideal,
        }
    }

    pub fn feedback(
        motor: MotorParams<T>,
        estimates: EstimatedParams<T>,
        gains: PiGains<T>,
        delays: DelayParams<T>,
        velocity: VelocityEstimator<T>,
    ) -> Self {
        Self {
            architecture: Architecture::Feedback,
            motor,
            estimates,
            gains: Some(gains),
            delays,
            velocity,
            derivative: DerivativeModel::Ideal,
        }
    }

    pub fn with_derivative(mut self, derivative: DerivativeModel<T>) -> Self {
        self.derivative = derivative;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.motor.validate()?;
        self.estimates.validate()?;
        let mut v = self.delays.violations();
        v.extend(self.velocity.violations());
        if let Some(g) = &self.gains {
            v.extend(g.violations());
        }
        if let DerivativeModel::Filtered { tau_d } = self.derivative {
            if !(tau_d.is_finite() && tau_d >= T::zero()) {
                v.push(("s_hat_tau", "must be finite and >= 0"));
            }
        }
        if let Some(&(name, c)) = v.first() {
            return Err(Error::InvalidParameter { name, constraint: c.into() });
        }
        if self.architecture == Architecture::Feedback && self.gains.is_none() {
            return Err(Error::MissingGains);
        }
        Ok(())
    }

    fn pi(&self) -> Result<&PiGains<T>> {
        self.gains.as_ref().ok_or(Error::MissingGains)
    }

    fn lambda_ratio(&self) -> T {
        self.motor.lambda_m / self.estimates.lambda_m_hat
    }

    /// `q p^2 lambda_m`
    fn disturbance_coeff(&self) -> T {
        let p = self.motor.p();
        self.motor.q_const() * p * p * self.motor.lambda_m
    }

    /// Controller law at zero set-point velocity and current.
    pub fn controller_law(&self) -> Result<ControllerLaw<T>> {
        self.controller_law_at(&OperatingPoint::zero())
    }

    /// Controller law linearized at `op`; the feedforward decoupling terms
    /// pick up the set-point velocity estimate and currents.
    pub fn controller_law_at(&self, op: &OperatingPoint<T>) -> Result<ControllerLaw<T>> {
        let ep = &self.estimates;
        let p = self.motor.p();
        let (n, d) = self.derivative.polynomials();
        let bemf = DelayRational::gain(p * ep.lambda_m_hat);
        match self.architecture {
            Architecture::Feedforward => {
                let w_hat0 = velocity_estimator_tf(&self.velocity).dc_gain() * op.omega_m0();
                let axis = |l: T| DelayRational::rational(&n.scale(l) + &d.scale(ep.r_hat), d.clone());
                Ok(ControllerLaw {
                    architecture: self.architecture,
                    c_t: TfMatrix2 {
                        dd: axis(ep.l_d_hat)?,
                        dq: DelayRational::gain(p * w_hat0 * ep.l_q_hat),
                        qd: DelayRational::gain(-p * w_hat0 * ep.l_d_hat),
                        qq: axis(ep.l_q_hat)?,
                    },
                    c_omega: [
                        DelayRational::gain(p * ep.l_q_hat * op.i_q0()),
                        DelayRational::gain(-p * ep.l_d_hat * op.i_d0() + p * ep.lambda_m_hat),
                    ],
                })
            }
            Architecture::Feedback => {
                let g = self.pi()?;
                let axis = |kp: T, ki: T| DelayRational::rational(&n.scale(kp) + &d.scale(ki), n.clone());
                Ok(ControllerLaw {
                    architecture: self.architecture,
                    c_t: TfMatrix2::diagonal(axis(g.k_pd, g.k_id)?, axis(g.k_pq, g.k_iq)?),
                    c_omega: [DelayRational::zero(), bemf],
                })
            }
        }
    }

    /// `[A_t(s), A_omega(s)]` from the closed forms with exact delays.
    pub fn closed_form_at(&self, s: Complex<T>) -> Result<[Complex<T>; 2]> {
        let mp = &self.motor;
        let ep = &self.estimates;
        let x = (-s * self.delays.tau_p).exp();
        let xb = (-s * self.delays.total()).exp();
        let z = s * mp.l_q + mp.r;
        let h = velocity_estimator_tf(&self.velocity).eval_s(s)?;
        let sh = self.derivative.eval_s(s);
        let dist = (x * h * ep.lambda_m_hat - mp.lambda_m) * self.disturbance_coeff();
        let singular = || Error::SingularLoop { omega: s.im.as_f64() };
        match self.architecture {
            Architecture::Feedforward => {
                if z.norm() == T::zero() {
                    return Err(singular());
                }
                let a_t = x * (sh * ep.l_q_hat + ep.r_hat) * self.lambda_ratio() / z;
                Ok([a_t, dist / z])
            }
            Architecture::Feedback => {
                let g = self.pi()?;
                let c = sh * g.k_pq + g.k_iq;
                let den = z * sh + xb * c;
                if den.norm() == T::zero() {
                    return Err(singular());
                }
                Ok([x * c * self.lambda_ratio() / den, dist * sh / den])
            }
        }
    }

    /// Closed-form response. Components that are rational in `s` (delay
    /// factor allowed) are symbolic; the rest are evaluated exactly on
    /// demand.
    pub fn closed_form(&self) -> Result<EmdResponse<T>> {
        self.validate()?;
        let mp = &self.motor;
        let ep = &self.estimates;
        let (n, d) = self.derivative.polynomials();
        let h = velocity_estimator_tf(&self.velocity);
        let (hn, hd) = (h.num(), h.den());
        let z = Polynomial::linear(mp.l_q, mp.r);
        let ratio = self.lambda_ratio();
        let k = self.disturbance_coeff();
        // lambda_hat hn - lambda hd
        let mismatch = &hn.scale(ep.lambda_m_hat) - &hd.scale(mp.lambda_m);
        let tau_p = self.delays.tau_p;

        let (a_t, a_omega) = match self.architecture {
            Architecture::Feedforward => {
                let cref = &n.scale(ep.l_q_hat) + &d.scale(ep.r_hat);
                let a_t = DelayRational::new(cref.scale(ratio), &d * &z, tau_p)?;
                let a_omega = if tau_p == T::zero() {
                    Response::Symbolic(DelayRational::rational(mismatch.scale(k), hd * &z)?)
                } else {
                    Response::Exact
                };
                (Response::Symbolic(a_t), a_omega)
            }
            Architecture::Feedback => {
                if self.delays.tau_p == T::zero() && self.delays.tau_c == T::zero() {
                    let g = self.pi()?;
                    let cn = &n.scale(g.k_pq) + &d.scale(g.k_iq);
                    let den = &(&z * &n) + &cn;
                    let a_t = DelayRational::rational(cn.scale(ratio), den.clone())?;
                    let a_omega = DelayRational::rational((&mismatch * &n).scale(k), hd * &den)?;
                    (Response::Symbolic(a_t), Response::Symbolic(a_omega))
                } else {
                    (Response::Exact, Response::Exact)
                }
            }
        };
        let exact = match (&a_t, &a_omega) {
            (Response::Symbolic(_), Response::Symbolic(_)) => None,
            _ => Some(ExactSource::ClosedForm(self.clone())),
        };
        Ok(EmdResponse { architecture: Some(self.architecture), a_t, a_omega, exact })
    }

    /// Fully rational `(A_t, A_omega)` with every transport lag replaced by a
    /// diagonal Pade approximant. The loop delay `XB` is approximated as a
    /// single lag of `tau_p + tau_c`.
    pub fn rationalized(&self, order: usize) -> Result<(DelayRational<T>, DelayRational<T>)> {
        self.validate()?;
        if !(1..=10).contains(&order) {
            return Err(Error::PadeOrder(order));
        }
        let mp = &self.motor;
        let ep = &self.estimates;
        let (n, d) = self.derivative.polynomials();
        let h = velocity_estimator_tf(&self.velocity);
        let (hn, hd) = (h.num(), h.den());
        let z = Polynomial::linear(mp.l_q, mp.r);
        let ratio = self.lambda_ratio();
        let k = self.disturbance_coeff();
        let (pn, pd) = pade_polynomials(self.delays.tau_p, order);
        let mismatch = &(&pn * hn).scale(ep.lambda_m_hat) - &(&pd * hd).scale(mp.lambda_m);
        match self.architecture {
            Architecture::Feedforward => {
                let cref = &n.scale(ep.l_q_hat) + &d.scale(ep.r_hat);
                let a_t = DelayRational::rational((&pn * &cref).scale(ratio), &(&pd * &d) * &z)?;
                let a_omega = DelayRational::rational(mismatch.scale(k), &(&pd * hd) * &z)?;
                Ok((a_t, a_omega))
            }
            Architecture::Feedback => {
                let g = self.pi()?;
                let (qn, qd) = pade_polynomials(self.delays.total(), order);
                let cn = &n.scale(g.k_pq) + &d.scale(g.k_iq);
                let core = &(&(&z * &n) * &qd) + &(&qn * &cn);
                let a_t = DelayRational::rational((&(&pn * &cn) * &qd).scale(ratio), &pd * &core)?;
                let a_omega = DelayRational::rational((&(&mismatch * &n) * &qd).scale(k), &(&pd * hd) * &core)?;
                Ok((a_t, a_omega))
            }
        }
    }

    /// `[A_t(s), A_omega(s)]` from the assembled 2x2 current loop at `op`:
    ///
    /// ```text
    /// (P_inv + X C_fb B) dI = X C_t dI* + (X C_omega H - E) d(omega_m)
    /// ```
    ///
    /// with `dI* = (0, 1/(q p lambda_hat))` per unit torque command, and
    /// torque `q p lambda_m dI_q`.
    pub fn block_compose_at(&self, op: &OperatingPoint<T>, s: Complex<T>) -> Result<[Complex<T>; 2]> {
        let mp = &self.motor;
        let law = self.controller_law_at(op)?;
        let (p_inv, e) = linearized_plant(mp, op);
        let x = (-s * self.delays.tau_p).exp();
        let b = (-s * self.delays.tau_c).exp();
        let h = velocity_estimator_tf(&self.velocity).eval_s(s)?;
        let singular = || Error::SingularLoop { omega: s.im.as_f64() };
        let c_t = law.c_t.eval_s(s).map_err(|_| singular())?;
        let c_w = [law.c_omega[0].eval_s(s)?, law.c_omega[1].eval_s(s)?];
        let mut m = p_inv.eval_s(s)?;
        if self.architecture == Architecture::Feedback {
            for (row, c_row) in m.iter_mut().zip(c_t.iter()) {
                for (mij, &cij) in row.iter_mut().zip(c_row.iter()) {
                    *mij += x * cij * b;
                }
            }
        }
        let iq_ref = T::one() / (mp.q_const() * mp.p() * self.estimates.lambda_m_hat);
        let rhs_t = [x * c_t[0][1] * iq_ref, x * c_t[1][1] * iq_ref];
        let rhs_w = [x * c_w[0] * h - e[0], x * c_w[1] * h - e[1]];
        let di_t = solve2(m, rhs_t).ok_or_else(singular)?;
        let di_w = solve2(m, rhs_w).ok_or_else(singular)?;
        let kt = mp.torque_constant();
        Ok([di_t[1] * kt, di_w[1] * kt])
    }

    /// Sampled `(A_t, A_omega)` from the 2x2 loop at `op` on `grid`.
    pub fn block_compose_frf(&self, op: &OperatingPoint<T>, grid: &FrequencyGrid<T>) -> Result<EmdResponse<T>> {
        self.validate()?;
        let vals = grid
            .omegas()
            .iter()
            .map(|&w| self.block_compose_at(op, Complex::new(T::zero(), w)))
            .collect::<Result<Vec<_>>>()?;
        let a_t = FrequencyResponse::new(grid.clone(), vals.iter().map(|v| v[0]).collect())?;
        let a_w = FrequencyResponse::new(grid.clone(), vals.iter().map(|v| v[1]).collect())?;
        Ok(EmdResponse {
            architecture: Some(self.architecture),
            a_t: Response::Sampled(a_t),
            a_omega: Response::Sampled(a_w),
            exact: Some(ExactSource::Composed(self.clone(), *op)),
        })
    }
}

pub fn ff_closed_form<T: Scalar>(
    mp: &MotorParams<T>,
    ep: &EstimatedParams<T>,
    dp: &DelayParams<T>,
    ve: &VelocityEstimator<T>,
) -> Result<EmdResponse<T>> {
    EmdModel::feedforward(*mp, *ep, *dp, *ve).closed_form()
}

pub fn fb_closed_form<T: Scalar>(
    mp: &MotorParams<T>,
    ep: &EstimatedParams<T>,
    gains: &PiGains<T>,
    dp: &DelayParams<T>,
    ve: &VelocityEstimator<T>,
) -> Result<EmdResponse<T>> {
    EmdModel::feedback(*mp, *ep, *gains, *dp, *ve).closed_form()
}

#[allow(clippy::too_many_arguments)]
pub fn block_compose_frf<T: Scalar>(
    architecture: Architecture,
    mp: &MotorParams<T>,
    ep: &EstimatedParams<T>,
    gains: Option<&PiGains<T>>,
    dp: &DelayParams<T>,
    ve: &VelocityEstimator<T>,
    op: &OperatingPoint<T>,
    grid: &FrequencyGrid<T>,
) -> Result<EmdResponse<T>> {
    let model = EmdModel {
        architecture,
        motor: *mp,
        estimates: *ep,
        gains: gains.copied(),
        delays: *dp,
        velocity: *ve,
        derivative: DerivativeModel::Ideal,
    };
    model.block_compose_frf(op, grid)
}

pub fn controller_laws<T: Scalar>(
    architecture: Architecture,
    mp: &MotorParams<T>,
    ep: &EstimatedParams<T>,
    gains: Option<&PiGains<T>>,
) -> Result<ControllerLaw<T>> {
    if architecture == Architecture::Feedback && gains.is_none() {
        return Err(Error::MissingGains);
    }
    let model = EmdModel {
        architecture,
        motor: *mp,
        estimates: *ep,
        gains: gains.copied(),
        delays: DelayParams::default(),
        velocity: VelocityEstimator { tau_omega: T::zero(), variant: Default::default() },
        derivative: DerivativeModel::Ideal,
    };
    model.controller_law()
}
