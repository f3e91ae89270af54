//! Two-mass steering mechanics: handwheel and assist mass (motor included)
//! coupled through the torsion bar that doubles as the torque sensor.
//!
//! Two constructions are provided. [`two_mass_paper`] transcribes the
//! published channel expressions as printed; [`two_mass_first_principles`]
//! derives the channels from Newton's law for the two inertias. They do not
//! agree, and the toolkit keeps both so the difference stays visible.

use num_complex::Complex;

use crate::linalg::solve2;
use crate::tf::{DelayRational, Polynomial};
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MechanicalParams<T> {
    /// Handwheel inertia, kg m^2.
    pub j_h: T,
    /// Handwheel damping, N m s/rad.
    pub b_h: T,
    /// Assist-mass inertia including the motor, kg m^2.
    pub j_m: T,
    /// Assist-mass damping, N m s/rad.
    pub b_m: T,
    /// Torsion-bar stiffness, N m/rad.
    pub k_h: T,
    /// Linear tire-model stiffness, N m/rad.
    pub k_l: T,
    /// Motor-to-steering gear ratio.
    pub n: T,
}

impl<T: Scalar> MechanicalParams<T> {
    /// Every violated invariant as `(field, constraint)`.
    pub fn violations(&self) -> Vec<(&'static str, &'static str)> {
        let mut v = Vec::new();
        let pos = [("j_h", self.j_h), ("j_m", self.j_m), ("k_h", self.k_h), ("k_l", self.k_l), ("n", self.n)];
        for (name, x) in pos {
            if !(x.is_finite() && x > T::zero()) {
                v.push((name, "must be finite and > 0"));
            }
        }
        for (name, x) in [("b_h", self.b_h), ("b_m", self.b_m)] {
            if !(x.is_finite() && x >= T::zero()) {
                v.push((name, "must be finite and >= 0"));
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        match self.violations().first() {
            Some(&(name, c)) => Err(Error::InvalidParameter { name, constraint: c.into() }),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Provenance {
    /// Channel expressions transcribed exactly as published.
    PaperVerbatim,
    /// Channels derived from the two-inertia equations of motion.
    #[default]
    FirstPrinciples,
}

/// Mechanical impedance polynomials.
#[derive(Debug, Clone, PartialEq)]
pub struct Impedances<T> {
    /// `J_h s^2 + b_h s`
    pub m_h: Polynomial<T>,
    /// `J_m s^2 + b_m s + K_l`
    pub m_m: Polynomial<T>,
    /// `M_h M_m - K_h^2`
    pub d: Polynomial<T>,
}

pub fn impedances<T: Scalar>(p: &MechanicalParams<T>) -> Impedances<T> {
    let m_h = Polynomial::new(vec![T::zero(), p.b_h, p.j_h]);
    let m_m = Polynomial::new(vec![p.k_l, p.b_m, p.j_m]);
    let d = &(&m_h * &m_m) - &Polynomial::constant(p.k_h * p.k_h);
    Impedances { m_h, m_m, d }
}

/// Sensed handwheel torque `T_h` as a response to motor torque, rack force
/// and driver torque.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoMassModel<T> {
    pub to_th_from_tm: DelayRational<T>,
    pub to_th_from_tr: DelayRational<T>,
    pub to_th_from_td: DelayRational<T>,
    pub m_h: Polynomial<T>,
    pub m_m: Polynomial<T>,
    pub d: Polynomial<T>,
    /// Common denominator of the three channels: `D` for the published form,
    /// `(M_h + K_h)(M_m + K_h) - K_h^2` for the derived one.
    pub channel_den: Polynomial<T>,
    pub params: MechanicalParams<T>,
    pub provenance: Provenance,
}

pub fn two_mass_paper<T: Scalar>(p: &MechanicalParams<T>) -> Result<TwoMassModel<T>> {
    build(p, Provenance::PaperVerbatim)
}

pub fn two_mass_first_principles<T: Scalar>(p: &MechanicalParams<T>) -> Result<TwoMassModel<T>> {
    build(p, Provenance::FirstPrinciples)
}

pub fn two_mass<T: Scalar>(p: &MechanicalParams<T>, provenance: Provenance) -> Result<TwoMassModel<T>> {
    build(p, provenance)
}

fn build<T: Scalar>(p: &MechanicalParams<T>, provenance: Provenance) -> Result<TwoMassModel<T>> {
    p.validate()?;
    let Impedances { m_h, m_m, d } = impedances(p);
    let channel_den = match provenance {
        Provenance::PaperVerbatim => d.clone(),
        Provenance::FirstPrinciples => coupled_determinant(p, &m_h, &m_m),
    };
    let [tm, tr, td] = channel_numerators(p, provenance, &m_h, &m_m);
    let ch = |num: Polynomial<T>| DelayRational::rational(num, channel_den.clone());
    Ok(TwoMassModel {
        to_th_from_tm: ch(tm)?,
        to_th_from_tr: ch(tr)?,
        to_th_from_td: ch(td)?,
        m_h,
        m_m,
        d,
        channel_den,
        params: *p,
        provenance,
    })
}

/// `(M_h + K_h)(M_m + K_h) - K_h^2`.
pub(crate) fn coupled_determinant<T: Scalar>(
    p: &MechanicalParams<T>,
    m_h: &Polynomial<T>,
    m_m: &Polynomial<T>,
) -> Polynomial<T> {
    let k = Polynomial::constant(p.k_h);
    &(&(m_h + &k) * &(m_m + &k)) - &Polynomial::constant(p.k_h * p.k_h)
}

/// Numerators of the motor-torque, rack-force and driver-torque channels over
/// the provenance's common denominator.
pub(crate) fn channel_numerators<T: Scalar>(
    p: &MechanicalParams<T>,
    provenance: Provenance,
    m_h: &Polynomial<T>,
    m_m: &Polynomial<T>,
) -> [Polynomial<T>; 3] {
    let k = Polynomial::constant(p.k_h);
    match provenance {
        Provenance::PaperVerbatim => {
            // K_h (K_h - M_h) shared by motor and rack channels
            let shared = (&k - m_h).scale(p.k_h);
            [shared.scale(p.n), shared, (m_m - &k).scale(p.k_h)]
        }
        Provenance::FirstPrinciples => {
            let shared = m_h.scale(-p.k_h);
            [shared.scale(p.n), shared, m_m.scale(p.k_h)]
        }
    }
}

impl<T: Scalar> TwoMassModel<T> {
    /// Channel values `(T_m, T_r, T_d) -> T_h` at complex `s`.
    pub fn channels_at(&self, s: Complex<T>) -> Result<[Complex<T>; 3]> {
        Ok([self.to_th_from_tm.eval_s(s)?, self.to_th_from_tr.eval_s(s)?, self.to_th_from_td.eval_s(s)?])
    }
}

/// Angles `(theta_h, theta_m)` from the two equations of motion at `s`:
///
/// ```text
/// (M_h + K_h) theta_h -        K_h theta_m = T_d
///       -K_h  theta_h + (M_m + K_h) theta_m = N T_m + T_r
/// ```
pub fn newton_solve_at<T: Scalar>(
    p: &MechanicalParams<T>,
    s: Complex<T>,
    t_m: Complex<T>,
    t_r: Complex<T>,
    t_d: Complex<T>,
) -> Option<[Complex<T>; 2]> {
    let k = Complex::new(p.k_h, T::zero());
    let m_h = s * s * p.j_h + s * p.b_h;
    let m_m = s * s * p.j_m + s * p.b_m + p.k_l;
    solve2([[m_h + k, -k], [-k, m_m + k]], [t_d, t_m * p.n + t_r])
}
