//! Gain and phase margins from a sampled open-loop response.
//!
//! Crossovers are bracketed on the grid, located by log-frequency
//! interpolation, and, when an exact evaluator of the loop is supplied,
//! refined by bisection on that evaluator.

use num_complex::Complex;

use super::freq::unwrap_deg;
use super::FrequencyResponse;
use crate::scalar::rad_to_deg;
use crate::{Result, Scalar};

const BISECTION_STEPS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossoverKind {
    /// `|L(jw)| = 1`; margin is the phase margin in degrees.
    Gain,
    /// `arg L(jw) = -180 + 360k`; margin is the gain margin in dB.
    Phase,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossover<T> {
    pub kind: CrossoverKind,
    pub omega: T,
    pub margin: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginReport<T> {
    /// Worst-case gain margin in dB; `+inf` when the phase never crosses.
    pub gain_margin_db: T,
    /// Worst-case phase margin in degrees, wrapped to (-180, 180]; `None`
    /// when the magnitude never crosses unity inside the grid.
    pub phase_margin_deg: Option<T>,
    pub gain_crossover_rad_s: Option<T>,
    pub phase_crossover_rad_s: Option<T>,
    pub all_crossovers: Vec<Crossover<T>>,
    pub tag: Option<String>,
}

impl<T: Scalar> MarginReport<T> {
    /// Grid-based closed-loop verdict for an open-loop-stable loop: a
    /// negative headline margin means the loop encircles -1.
    pub fn loop_unstable(&self) -> bool {
        self.phase_margin_deg.is_some_and(|pm| pm < T::zero())
            || (self.gain_margin_db.is_finite() && self.gain_margin_db < T::zero())
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.tag = Some(tag.into());
        self
    }

    /// `key=value` lines; absent values print as `undefined`, infinite gain
    /// margin as `inf`.
    pub fn to_key_values(&self) -> String {
        let opt = |v: Option<T>| v.map_or_else(|| "undefined".to_string(), |x| format!("{}", x.as_f64()));
        let gm = if self.gain_margin_db.is_infinite() {
            "inf".to_string()
        } else {
            format!("{}", self.gain_margin_db.as_f64())
        };
        let mut out = String::new();
        if let Some(tag) = &self.tag {
            out.push_str(&format!("architecture={tag}\n"));
        }
        out.push_str(&format!("gain_margin_db={gm}\n"));
        out.push_str(&format!("phase_margin_deg={}\n", opt(self.phase_margin_deg)));
        out.push_str(&format!("gain_crossover_rad_s={}\n", opt(self.gain_crossover_rad_s)));
        out.push_str(&format!("phase_crossover_rad_s={}\n", opt(self.phase_crossover_rad_s)));
        out.push_str(&format!(
            "gain_crossovers={}\n",
            self.all_crossovers.iter().filter(|c| c.kind == CrossoverKind::Gain).count()
        ));
        out.push_str(&format!(
            "phase_crossovers={}\n",
            self.all_crossovers.iter().filter(|c| c.kind == CrossoverKind::Phase).count()
        ));
        out
    }
}

/// Exact loop evaluator used to refine grid-bracketed crossovers.
pub type Evaluator<'a, T> = &'a (dyn Fn(T) -> Result<Complex<T>> + Sync);

/// Margins of a sampled loop response. The grid must span two decades at
/// 20 points per decade or more.
pub fn stability_margins<T: Scalar>(
    fr: &FrequencyResponse<T>,
    evaluator: Option<Evaluator<'_, T>>,
) -> Result<MarginReport<T>> {
    fr.grid().check_density(2.0)?;
    let w = fr.grid().omegas();
    let log_w: Vec<T> = w.iter().map(|x| x.ln()).collect();
    let log_mag: Vec<T> = fr.values().iter().map(|v| v.norm().ln()).collect();
    let phase = fr.phase_unwrapped_deg();
    let full = T::lit(360.0);
    let half = T::lit(180.0);

    let mut crossings = Vec::new();

    // unity-gain crossings
    for i in 0..w.len().saturating_sub(1) {
        let (a, b) = (log_mag[i], log_mag[i + 1]);
        if !(a.is_finite() && b.is_finite()) || (a >= T::zero()) == (b >= T::zero()) {
            continue;
        }
        let t = a / (a - b);
        let mut lw = log_w[i] + t * (log_w[i + 1] - log_w[i]);
        let mut ph = phase[i] + t * (phase[i + 1] - phase[i]);
        if let Some(eval) = evaluator {
            let f = |x: T| eval(x.exp()).map(|v| v.norm().ln());
            if let Some(x) = bisect(&f, log_w[i], log_w[i + 1], a)? {
                lw = x;
                ph = phase_near(eval, lw, log_w[i], log_w[i + 1], phase[i], phase[i + 1])?;
            }
        }
        let pm = wrap_deg(half + ph);
        crossings.push(Crossover { kind: CrossoverKind::Gain, omega: lw.exp(), margin: pm });
    }

    // phase crossings of -180 + 360k
    for i in 0..w.len().saturating_sub(1) {
        // phase of an exact zero is meaningless
        if !(log_mag[i].is_finite() && log_mag[i + 1].is_finite()) {
            continue;
        }
        let ua = (phase[i] + half) / full;
        let ub = (phase[i + 1] + half) / full;
        let (lo, hi) = if ua <= ub { (ua, ub) } else { (ub, ua) };
        let mut m = lo.ceil();
        while m <= hi {
            // a level hit exactly at the left point was counted by the previous interval
            if m == ua && i > 0 {
                m += T::one();
                continue;
            }
            let level = m * full - half;
            let t = if ub == ua { T::zero() } else { (m - ua) / (ub - ua) };
            let mut lw = log_w[i] + t * (log_w[i + 1] - log_w[i]);
            let mut lm = log_mag[i] + t * (log_mag[i + 1] - log_mag[i]);
            if let Some(eval) = evaluator {
                let f = |x: T| phase_near(eval, x, log_w[i], log_w[i + 1], phase[i], phase[i + 1]).map(|p| p - level);
                if let Some(x) = bisect(&f, log_w[i], log_w[i + 1], phase[i] - level)? {
                    lw = x;
                    lm = eval(lw.exp())?.norm().ln();
                }
            }
            let gm = -T::lit(20.0) * lm / T::lit(10.0).ln();
            crossings.push(Crossover { kind: CrossoverKind::Phase, omega: lw.exp(), margin: gm });
            m += T::one();
        }
    }
    crossings.sort_by(|a, b| a.omega.partial_cmp(&b.omega).unwrap_or(std::cmp::Ordering::Equal));

    let worst = |kind: CrossoverKind| {
        crossings
            .iter()
            .filter(|c| c.kind == kind)
            .min_by(|a, b| a.margin.abs().partial_cmp(&b.margin.abs()).unwrap_or(std::cmp::Ordering::Equal))
            .copied()
    };
    let g = worst(CrossoverKind::Gain);
    let p = worst(CrossoverKind::Phase);
    Ok(MarginReport {
        gain_margin_db: p.map_or_else(T::infinity, |c| c.margin),
        phase_margin_deg: g.map(|c| c.margin),
        gain_crossover_rad_s: g.map(|c| c.omega),
        phase_crossover_rad_s: p.map(|c| c.omega),
        all_crossovers: crossings,
        tag: None,
    })
}

/// Bisection for a sign change of `f` on `[a, b]`, given `f(a)` from the
/// grid. Returns `None` if the evaluator does not confirm the bracket.
fn bisect<T: Scalar, F>(f: &F, mut a: T, mut b: T, fa_grid: T) -> Result<Option<T>>
where
    F: Fn(T) -> Result<T>,
{
    let mut fa = f(a)?;
    let fb = f(b)?;
    if !(fa.is_finite() && fb.is_finite()) || (fa >= T::zero()) == (fb >= T::zero()) {
        return Ok(None);
    }
    if (fa >= T::zero()) != (fa_grid >= T::zero()) {
        return Ok(None);
    }
    for _ in 0..BISECTION_STEPS {
        let m = T::lit(0.5) * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m)?;
        if (fm >= T::zero()) == (fa >= T::zero()) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
        if (b - a).abs() <= T::epsilon() * T::lit(4.0) * a.abs().max(T::one()) {
            break;
        }
    }
    Ok(Some(T::lit(0.5) * (a + b)))
}

/// Exact phase at `exp(x)`, placed on the branch nearest the linear
/// interpolation between the neighbouring grid phases.
fn phase_near<T: Scalar>(eval: Evaluator<'_, T>, x: T, xa: T, xb: T, pa: T, pb: T) -> Result<T> {
    let guess = pa + (x - xa) / (xb - xa) * (pb - pa);
    let raw = rad_to_deg(eval(x.exp())?.arg());
    Ok(unwrap_deg([guess, raw])[1])
}

/// Wraps an angle in degrees into (-180, 180].
pub(crate) fn wrap_deg<T: Scalar>(x: T) -> T {
    let full = T::lit(360.0);
    let half = T::lit(180.0);
    let mut y = x - full * ((x + half) / full).floor();
    if y == -half {
        y = half;
    }
    y
}
