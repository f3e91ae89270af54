//! Mechanics and drive dynamics combined: the effective open-loop channels
//! from torque command, rack force and driver torque to sensed handwheel
//! torque, the motor-torque scaling caused by the mechanical load, and the
//! margins of the assist loop closed around the torque sensor.
//!
//! The drive's velocity input is the motor velocity `omega_m = N s theta_m`,
//! where `theta_m` is the assist-mass angle.
//!
//! Published-form channels, with `G = N^2 s A_omega`:
//!
//! ```text
//! Den = D - G M_h
//! Z_t = N K_h (K_h - M_h) A_t / Den     W_t = D A_t / Den
//! Z_r =   K_h (K_h - M_h)     / Den     W_r = N s A_omega M_h / Den
//! Z_d =   K_h (M_m - K_h - G) / Den     W_d = N s A_omega K_h / Den
//! ```
//!
//! Derived-form channels come from solving the equations of motion with
//! `T_m = A_t T_m* + A_omega omega_m` substituted.

use num_complex::Complex;

use crate::emd::{Architecture, EmdResponse};
use crate::linalg::solve2;
use crate::mech::{channel_numerators, Provenance, TwoMassModel};
use crate::tf::{stability_margins, DelayRational, FrequencyGrid, FrequencyResponse, MarginReport, Polynomial};
use crate::{Error, Result, Scalar};

/// Static assist gain with an optional compensator, acting on sensed
/// handwheel torque.
#[derive(Debug, Clone, PartialEq)]
pub struct AssistLaw<T> {
    pub gain: T,
    pub compensator: Option<DelayRational<T>>,
}

impl<T: Scalar> AssistLaw<T> {
    pub fn static_gain(gain: T) -> Self {
        Self { gain, compensator: None }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.gain.is_finite() {
            return Err(Error::InvalidParameter { name: "gain", constraint: "must be finite".into() });
        }
        Ok(())
    }

    pub fn eval_jw(&self, omega: T) -> Result<Complex<T>> {
        let c = match &self.compensator {
            Some(tf) => tf.freq_eval(omega)?,
            None => Complex::new(T::one(), T::zero()),
        };
        Ok(c * self.gain)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Composition<T> {
    mech: TwoMassModel<T>,
    emd: EmdResponse<T>,
    z: Option<[DelayRational<T>; 3]>,
    w: Option<[DelayRational<T>; 3]>,
}

/// `T_h = Z_t T_m* + Z_r T_r + Z_d T_d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Eoltf<T>(Composition<T>);

/// `T_m = W_t T_m* + W_r T_r + W_d T_d`.
#[derive(Debug, Clone, PartialEq)]
pub struct TorqueScaling<T>(Composition<T>);

pub fn eoltf<T: Scalar>(mech: &TwoMassModel<T>, emd: &EmdResponse<T>) -> Result<Eoltf<T>> {
    Ok(Eoltf(compose(mech, emd)?))
}

pub fn torque_scaling<T: Scalar>(mech: &TwoMassModel<T>, emd: &EmdResponse<T>) -> Result<TorqueScaling<T>> {
    Ok(TorqueScaling(compose(mech, emd)?))
}

fn compose<T: Scalar>(mech: &TwoMassModel<T>, emd: &EmdResponse<T>) -> Result<Composition<T>> {
    let (z, w) = match emd.symbolic_pair() {
        Some((a_t, a_w)) if a_w.delay() == T::zero() => {
            let (z, w) = symbolic_channels(mech, a_t, a_w)?;
            (Some(z), Some(w))
        }
        _ => (None, None),
    };
    Ok(Composition { mech: mech.clone(), emd: emd.clone(), z, w })
}

type RationalChannels<T> = [DelayRational<T>; 3];

fn symbolic_channels<T: Scalar>(
    mech: &TwoMassModel<T>,
    a_t: &DelayRational<T>,
    a_w: &DelayRational<T>,
) -> Result<(RationalChannels<T>, RationalChannels<T>)> {
    let p = &mech.params;
    let (tn, td, tau) = (a_t.num(), a_t.den(), a_t.delay());
    let (an, ad) = (a_w.num(), a_w.den());
    let (m_h, m_m) = (&mech.m_h, &mech.m_m);
    let k = Polynomial::constant(p.k_h);
    // N^2 s an
    let g = an.shift(1).scale(p.n * p.n);
    let s_an = an.shift(1);
    let [num_t, num_r, _] = channel_numerators(p, mech.provenance, m_h, m_m);
    let base = &mech.channel_den;
    let (den, num_d, w_r, w_d) = match mech.provenance {
        Provenance::PaperVerbatim => (
            &(base * ad) - &(&g * m_h),
            (&(&(m_m - &k) * ad) - &g).scale(p.k_h),
            (&s_an * m_h).scale(p.n),
            s_an.scale(p.n * p.k_h),
        ),
        Provenance::FirstPrinciples => (
            &(base * ad) - &(&g * &(m_h + &k)),
            (&(m_m * ad) - &g).scale(p.k_h),
            (&s_an * &(m_h + &k)).scale(p.n),
            s_an.scale(p.n * p.k_h),
        ),
    };
    let den_t = td * &den;
    let z = [
        DelayRational::new(&(&num_t * tn) * ad, den_t.clone(), tau)?,
        DelayRational::rational(&num_r * ad, den.clone())?,
        DelayRational::rational(num_d, den.clone())?,
    ];
    let w = [
        DelayRational::new(&(base * tn) * ad, den_t, tau)?,
        DelayRational::rational(w_r, den.clone())?,
        DelayRational::rational(w_d, den)?,
    ];
    Ok((z, w))
}

type Channels<T> = [Complex<T>; 3];

/// `(Z, W)` at `s` from pointwise drive values.
fn channels_at<T: Scalar>(
    mech: &TwoMassModel<T>,
    a_t: Complex<T>,
    a_w: Complex<T>,
    s: Complex<T>,
) -> Result<(Channels<T>, Channels<T>)> {
    let p = &mech.params;
    let (n, k) = (p.n, p.k_h);
    let mh = mech.m_h.eval_complex(s);
    let mm = mech.m_m.eval_complex(s);
    let g = s * a_w * (n * n);
    let singular = || Error::SingularLoop { omega: s.im.as_f64() };
    match mech.provenance {
        Provenance::PaperVerbatim => {
            let d = mech.d.eval_complex(s);
            let den = d - g * mh;
            if den.norm() == T::zero() {
                return Err(singular());
            }
            let kk = -mh + k;
            let z = [kk * a_t * (k * n) / den, kk * k / den, (mm - g - k) * k / den];
            let w = [d * a_t / den, s * a_w * mh * n / den, s * a_w * (n * k) / den];
            Ok((z, w))
        }
        Provenance::FirstPrinciples => {
            let zero = Complex::new(T::zero(), T::zero());
            let one = Complex::new(T::one(), T::zero());
            let m = [[mh + k, -Complex::new(k, T::zero())], [-Complex::new(k, T::zero()), mm + k - g]];
            let mut z = [zero; 3];
            let mut w = [zero; 3];
            let inputs = [([zero, a_t * n], a_t), ([zero, one], zero), ([one, zero], zero)];
            for (i, (rhs, direct)) in inputs.into_iter().enumerate() {
                let [th, tm] = solve2(m, rhs).ok_or_else(singular)?;
                z[i] = (th - tm) * k;
                w[i] = direct + a_w * s * tm * n;
            }
            Ok((z, w))
        }
    }
}

impl<T: Scalar> Composition<T> {
    fn at(&self, omega: T) -> Result<(Channels<T>, Channels<T>)> {
        let [a_t, a_w] = self.emd.eval_jw(omega)?;
        channels_at(&self.mech, a_t, a_w, Complex::new(T::zero(), omega))
    }

    fn sample(&self, grid: &FrequencyGrid<T>, pick_w: bool) -> Result<[FrequencyResponse<T>; 3]> {
        let (a_t, a_w) = self.emd.sample(grid).map_err(|e| match e {
            Error::NeedsGrid => Error::GridMismatch,
            e => e,
        })?;
        let vals = grid
            .omegas()
            .iter()
            .zip(a_t.values().iter().zip(a_w.values()))
            .map(|(&w, (&at, &aw))| {
                let (z, wt) = channels_at(&self.mech, at, aw, Complex::new(T::zero(), w))?;
                Ok(if pick_w { wt } else { z })
            })
            .collect::<Result<Vec<_>>>()?;
        let col = |i: usize| FrequencyResponse::new(grid.clone(), vals.iter().map(|v| v[i]).collect());
        Ok([col(0)?, col(1)?, col(2)?])
    }
}

impl<T: Scalar> Eoltf<T> {
    /// `[Z_t, Z_r, Z_d]` when the drive response is rational with a
    /// delay-free `A_omega`.
    pub fn symbolic(&self) -> Option<&[DelayRational<T>; 3]> {
        self.0.z.as_ref()
    }

    pub fn eval_jw(&self, omega: T) -> Result<[Complex<T>; 3]> {
        Ok(self.0.at(omega)?.0)
    }

    pub fn sample(&self, grid: &FrequencyGrid<T>) -> Result<[FrequencyResponse<T>; 3]> {
        self.0.sample(grid, false)
    }

    pub fn architecture(&self) -> Option<Architecture> {
        self.0.emd.architecture
    }

    pub fn mechanics(&self) -> &TwoMassModel<T> {
        &self.0.mech
    }

    pub fn emd(&self) -> &EmdResponse<T> {
        &self.0.emd
    }
}

impl<T: Scalar> TorqueScaling<T> {
    /// `[W_t, W_r, W_d]` when available in closed form.
    pub fn symbolic(&self) -> Option<&[DelayRational<T>; 3]> {
        self.0.w.as_ref()
    }

    pub fn eval_jw(&self, omega: T) -> Result<[Complex<T>; 3]> {
        Ok(self.0.at(omega)?.1)
    }

    pub fn sample(&self, grid: &FrequencyGrid<T>) -> Result<[FrequencyResponse<T>; 3]> {
        self.0.sample(grid, true)
    }

    pub fn architecture(&self) -> Option<Architecture> {
        self.0.emd.architecture
    }
}

/// Assist loop transfer `-gain C Z_t`. The sign makes the loop negative
/// feedback: more motor torque lowers sensed torque.
pub fn assist_loop_at<T: Scalar>(e: &Eoltf<T>, assist: &AssistLaw<T>, omega: T) -> Result<Complex<T>> {
    Ok(-assist.eval_jw(omega)? * e.eval_jw(omega)?[0])
}

pub fn steering_margins<T: Scalar>(
    e: &Eoltf<T>,
    assist: &AssistLaw<T>,
    grid: &FrequencyGrid<T>,
) -> Result<MarginReport<T>> {
    assist.validate()?;
    let eval = |w: T| assist_loop_at(e, assist, w);
    let fr = FrequencyResponse::from_fn(grid, eval)?;
    let exact = e.0.emd.is_exact();
    let report = stability_margins(&fr, if exact { Some(&eval) } else { None })?;
    Ok(match e.architecture() {
        Some(a) => report.with_tag(a.tag()),
        None => report,
    })
}

/// `W_t / A_t` on `grid`.
pub fn torque_scaling_ratio<T: Scalar>(
    ts: &TorqueScaling<T>,
    emd: &EmdResponse<T>,
    grid: &FrequencyGrid<T>,
) -> Result<FrequencyResponse<T>> {
    let [w_t, _, _] = ts.sample(grid)?;
    let (a_t, _) = emd.sample(grid)?;
    w_t.div(&a_t, "A_t")
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;
    use crate::mech::{two_mass, MechanicalParams};

    type C = Complex<f64>;
    type Tf = DelayRational<f64>;

    fn params() -> MechanicalParams<f64> {
        MechanicalParams { j_h: 0.04, b_h: 0.3, j_m: 0.045, b_m: 0.5, k_h: 115.0, k_l: 300.0, n: 20.0 }
    }

    fn rel(a: C, b: C) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    fn lag_emd() -> EmdResponse<f64> {
        let a_t = Tf::from_coeffs(&[1000.0], &[1000.0, 1.0], 0.0).unwrap();
        let a_w = Tf::from_coeffs(&[0.0, -2e-4], &[1000.0, 1.0], 0.0).unwrap();
        EmdResponse::symbolic(None, a_t, a_w)
    }

    #[test]
    fn identity_drive_reproduces_mechanics() {
        for prov in [Provenance::PaperVerbatim, Provenance::FirstPrinciples] {
            let m = two_mass(&params(), prov).unwrap();
            let e = eoltf(&m, &EmdResponse::identity()).unwrap();
            let [z_t, z_r, z_d] = e.symbolic().unwrap();
            assert_eq!(z_t, &m.to_th_from_tm);
            assert_eq!(z_r, &m.to_th_from_tr);
            assert_eq!(z_d, &m.to_th_from_td);
            let ts = torque_scaling(&m, &EmdResponse::identity()).unwrap();
            let [w_t, w_r, w_d] = ts.symbolic().unwrap();
            assert_eq!(w_t, &Tf::one());
            assert!(w_r.is_zero() && w_d.is_zero());
        }
    }

    #[test]
    fn symbolic_matches_pointwise() {
        for prov in [Provenance::PaperVerbatim, Provenance::FirstPrinciples] {
            let m = two_mass(&params(), prov).unwrap();
            let e = eoltf(&m, &lag_emd()).unwrap();
            let ts = torque_scaling(&m, &lag_emd()).unwrap();
            for w in [0.7, 20.0, 300.0, 4e3] {
                let zp = e.eval_jw(w).unwrap();
                let wp = ts.eval_jw(w).unwrap();
                for i in 0..3 {
                    assert!(rel(e.symbolic().unwrap()[i].freq_eval(w).unwrap(), zp[i]) < 1e-9);
                    assert!(rel(ts.symbolic().unwrap()[i].freq_eval(w).unwrap(), wp[i]) < 1e-9);
                }
            }
        }
    }

    #[test]
    fn substituting_scaling_into_mechanics_gives_eoltf() {
        for prov in [Provenance::PaperVerbatim, Provenance::FirstPrinciples] {
            let m = two_mass(&params(), prov).unwrap();
            let e = eoltf(&m, &lag_emd()).unwrap();
            let ts = torque_scaling(&m, &lag_emd()).unwrap();
            for w in [0.3, 11.0, 140.0, 2e3] {
                let [mt, mr, md] = m.channels_at(C::new(0.0, w)).unwrap();
                let z = e.eval_jw(w).unwrap();
                let wv = ts.eval_jw(w).unwrap();
                let assembled = [mt * wv[0], mt * wv[1] + mr, mt * wv[2] + md];
                for i in 0..3 {
                    assert!(rel(assembled[i], z[i]) < 1e-9, "{prov:?} channel {i} at {w}");
                }
            }
        }
    }

    #[test]
    fn printed_structure_identities() {
        let m = two_mass(&params(), Provenance::PaperVerbatim).unwrap();
        let emd = lag_emd();
        let e = eoltf(&m, &emd).unwrap();
        let ts = torque_scaling(&m, &emd).unwrap();
        for w in [1.0, 50.0, 900.0] {
            let z = e.eval_jw(w).unwrap();
            let wv = ts.eval_jw(w).unwrap();
            let a_t = emd.eval_jw(w).unwrap()[0];
            let mh = m.m_h.eval_complex(C::new(0.0, w));
            assert!(rel(z[0] / z[1], a_t * 20.0) < 1e-12);
            assert!(rel(wv[2] / wv[1], C::new(115.0, 0.0) / mh) < 1e-12);
        }
    }

    #[test]
    fn rack_scaling_vanishes_at_high_frequency() {
        let m = two_mass(&params(), Provenance::FirstPrinciples).unwrap();
        let ts = torque_scaling(&m, &lag_emd()).unwrap();
        let (hi, lo) = (ts.eval_jw(1e6).unwrap()[1].norm(), ts.eval_jw(1e5).unwrap()[1].norm());
        assert!(hi < 0.2 * lo);
    }

    #[test]
    fn ratio_is_unity_without_disturbance_path() {
        let m = two_mass(&params(), Provenance::FirstPrinciples).unwrap();
        let emd = EmdResponse::symbolic(None, Tf::from_coeffs(&[5.0], &[5.0, 1.0], 1e-4).unwrap(), Tf::zero());
        let ts = torque_scaling(&m, &emd).unwrap();
        let grid = FrequencyGrid::with_density(1.0, 1e3, 20.0).unwrap();
        let r = torque_scaling_ratio(&ts, &emd, &grid).unwrap();
        for v in r.values() {
            assert!((v - C::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn zero_gain_has_no_crossover() {
        let m = two_mass(&params(), Provenance::FirstPrinciples).unwrap();
        let e = eoltf(&m, &EmdResponse::identity()).unwrap();
        let grid = FrequencyGrid::with_density(0.1, 1e4, 40.0).unwrap();
        let r = steering_margins(&e, &AssistLaw::static_gain(0.0), &grid).unwrap();
        assert!(r.phase_margin_deg.is_none());
        assert!(r.gain_margin_db.is_infinite());
    }

    #[test]
    fn doubling_gain_costs_six_db() {
        let m = two_mass(&params(), Provenance::FirstPrinciples).unwrap();
        let e = eoltf(&m, &lag_emd()).unwrap();
        let grid = FrequencyGrid::with_density(0.1, 1e5, 40.0).unwrap();
        let a = steering_margins(&e, &AssistLaw::static_gain(0.5), &grid).unwrap();
        let b = steering_margins(&e, &AssistLaw::static_gain(1.0), &grid).unwrap();
        assert!(a.gain_margin_db.is_finite());
        assert_relative_eq!(a.gain_margin_db - b.gain_margin_db, 20.0 * 2f64.log10(), epsilon = 1e-9);
    }

    #[test]
    fn sampled_drive_on_other_grid_is_rejected() {
        let m = two_mass(&params(), Provenance::FirstPrinciples).unwrap();
        let g1 = FrequencyGrid::with_density(1.0, 100.0, 20.0).unwrap();
        let g2 = FrequencyGrid::with_density(1.0, 100.0, 30.0).unwrap();
        let emd = lag_emd();
        let (a, b) = emd.sample(&g1).unwrap();
        let sampled = EmdResponse::sampled(None, a, b).unwrap();
        let e = eoltf(&m, &sampled).unwrap();
        assert!(e.sample(&g1).is_ok());
        assert_eq!(e.sample(&g2).unwrap_err(), Error::GridMismatch);
    }
}
