//! Time-domain checks: controllable-canonical realization of rational
//! transfer functions, fixed-step RK4 integration, and sine-dwell
//! frequency-response extraction.

use std::fmt::Write as _;

use num_complex::Complex;
use rayon::prelude::*;

use crate::linalg::solve_dense;
use crate::scalar::fmt17;
use crate::tf::{polynomial_roots, DelayRational, FrequencyGrid, FrequencyResponse};
use crate::{Error, Result, Scalar};

/// `x' = A x + B u`, `y = C x + D u`, matrices row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace<T> {
    n: usize,
    m: usize,
    p: usize,
    a: Vec<T>,
    b: Vec<T>,
    c: Vec<T>,
    d: Vec<T>,
    poles: Option<Vec<Complex<T>>>,
}

impl<T: Scalar> StateSpace<T> {
    /// `a` is `n x n`, `b` is `n x m`, `c` is `p x n`, `d` is `p x m`.
    pub fn new(n: usize, m: usize, p: usize, a: Vec<T>, b: Vec<T>, c: Vec<T>, d: Vec<T>) -> Result<Self> {
        for (name, got, want) in
            [("A", a.len(), n * n), ("B", b.len(), n * m), ("C", c.len(), p * n), ("D", d.len(), p * m)]
        {
            if got != want {
                return Err(Error::Dimension(format!("{name} has {got} entries, expected {want}")));
            }
        }
        Ok(Self { n, m, p, a, b, c, d, poles: None })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn inputs(&self) -> usize {
        self.m
    }

    pub fn outputs(&self) -> usize {
        self.p
    }

    pub fn a(&self) -> &[T] {
        &self.a
    }

    pub fn b_in(&self) -> &[T] {
        &self.b
    }

    pub fn c_out(&self) -> &[T] {
        &self.c
    }

    pub fn d_dir(&self) -> &[T] {
        &self.d
    }

    /// Poles of the source transfer function, when known.
    pub fn poles(&self) -> Option<&[Complex<T>]> {
        self.poles.as_deref()
    }

    fn fastest_mode(&self) -> Option<T> {
        self.poles.as_ref().map(|p| p.iter().map(|z| z.norm()).fold(T::zero(), T::max))
    }

    /// `C (sI - A)^-1 B + D` for a single-input single-output system.
    pub fn eval_s(&self, s: Complex<T>) -> Result<Complex<T>> {
        self.require_siso()?;
        let n = self.n;
        let d = Complex::new(self.d[0], T::zero());
        if n == 0 {
            return Ok(d);
        }
        let mut m = vec![Complex::new(T::zero(), T::zero()); n * n];
        for i in 0..n {
            for j in 0..n {
                m[i * n + j] = Complex::new(-self.a[i * n + j], T::zero());
            }
            m[i * n + i] += s;
        }
        let rhs = self.b.iter().map(|&v| Complex::new(v, T::zero())).collect();
        let x = solve_dense(m, rhs, n).ok_or(Error::EvalAtPole { omega: s.im.as_f64(), magnitude: 0.0 })?;
        Ok(x.iter().zip(&self.c).fold(d, |acc, (xi, &ci)| acc + xi * ci))
    }

    pub fn freq_eval(&self, omega: T) -> Result<Complex<T>> {
        self.eval_s(Complex::new(T::zero(), omega))
    }

    fn require_siso(&self) -> Result<()> {
        if self.m != 1 || self.p != 1 {
            return Err(Error::Dimension(format!("{} inputs and {} outputs; expected one of each", self.m, self.p)));
        }
        Ok(())
    }

    /// Diagonal similarity with power-of-two factors that equalizes row and
    /// column norms of `A`. Exact in binary floating point.
    pub fn balanced(mut self) -> Self {
        let n = self.n;
        let two = T::lit(2.0);
        let mut done = false;
        while !done {
            done = true;
            for i in 0..n {
                let mut c = T::zero();
                let mut r = T::zero();
                for j in (0..n).filter(|&j| j != i) {
                    c += self.a[j * n + i].abs();
                    r += self.a[i * n + j].abs();
                }
                if c == T::zero() || r == T::zero() {
                    continue;
                }
                let s = c + r;
                let mut f = T::one();
                let mut g = r / two;
                while c < g {
                    f *= two;
                    c *= two * two;
                }
                g = r * two;
                while c > g {
                    f /= two;
                    c /= two * two;
                }
                if (c + r) / f < T::lit(0.95) * s {
                    done = false;
                    for j in 0..n {
                        self.a[i * n + j] /= f;
                        self.a[j * n + i] *= f;
                    }
                    for k in 0..self.m {
                        self.b[i * self.m + k] /= f;
                    }
                    for k in 0..self.p {
                        self.c[k * n + i] *= f;
                    }
                }
            }
        }
        self
    }

    fn deriv(&self, x: &[T], u: T, out: &mut [T]) {
        let n = self.n;
        for (i, o) in out.iter_mut().enumerate().take(n) {
            let row = &self.a[i * n..(i + 1) * n];
            *o = row.iter().zip(x).fold(self.b[i] * u, |acc, (&a, &xi)| acc + a * xi);
        }
    }

    fn output(&self, x: &[T], u: T) -> T {
        x.iter().zip(&self.c).fold(self.d[0] * u, |acc, (&xi, &ci)| acc + xi * ci)
    }

    /// RK4 from zero state; `visit(t, u, y)` sees every step including
    /// `t = 0`. Stops early when `visit` returns false.
    fn run<F>(&self, input: &Signal<T>, h: T, steps: usize, mut visit: F)
    where
        F: FnMut(T, T, T) -> bool,
    {
        let n = self.n;
        let mut x = vec![T::zero(); n];
        let mut k1 = vec![T::zero(); n];
        let mut k2 = vec![T::zero(); n];
        let mut k3 = vec![T::zero(); n];
        let mut k4 = vec![T::zero(); n];
        let mut tmp = vec![T::zero(); n];
        let half = T::lit(0.5);
        let sixth = T::one() / T::lit(6.0);
        for k in 0..=steps {
            let t = h * T::from_usize_exact(k);
            let u0 = input.at(t);
            if !visit(t, u0, self.output(&x, u0)) || k == steps {
                return;
            }
            let um = input.at(t + h * half);
            let u1 = input.at(t + h);
            self.deriv(&x, u0, &mut k1);
            for i in 0..n {
                tmp[i] = x[i] + k1[i] * h * half;
            }
            self.deriv(&tmp, um, &mut k2);
            for i in 0..n {
                tmp[i] = x[i] + k2[i] * h * half;
            }
            self.deriv(&tmp, um, &mut k3);
            for i in 0..n {
                tmp[i] = x[i] + k3[i] * h;
            }
            self.deriv(&tmp, u1, &mut k4);
            for i in 0..n {
                x[i] += (k1[i] + (k2[i] + k3[i]) * T::lit(2.0) + k4[i]) * h * sixth;
            }
        }
    }
}

/// Controllable-canonical realization, balanced, of `tf` with any delay
/// replaced by its `[order/order]` Pade approximant.
pub fn to_state_space<T: Scalar>(tf: &DelayRational<T>, pade_order: usize) -> Result<StateSpace<T>> {
    let tf = tf.pade_rationalize(pade_order)?;
    let (num, den) = (tf.num(), tf.den());
    if !tf.is_proper() {
        return Err(Error::Improper { num: num.degree(), den: den.degree() });
    }
    let n = den.degree();
    let lc = den.leading_coeff();
    let d = if num.degree() == n { num.coeff(n) / lc } else { T::zero() };
    let mut a = vec![T::zero(); n * n];
    let mut b = vec![T::zero(); n];
    let mut c = vec![T::zero(); n];
    for i in 0..n {
        if i + 1 < n {
            a[i * n + i + 1] = T::one();
        }
        a[(n - 1) * n + i] = -den.coeff(i) / lc;
        // residual num - d den
        c[i] = (num.coeff(i) - d * den.coeff(i)) / lc;
    }
    if n > 0 {
        b[n - 1] = T::one();
    }
    let poles = if n > 0 { polynomial_roots(den)? } else { Vec::new() };
    let mut ss = StateSpace::new(n, 1, 1, a, b, c, vec![d])?.balanced();
    ss.poles = Some(poles);
    Ok(ss)
}

/// Scalar excitation.
#[derive(Debug, Clone, PartialEq)]
pub enum Signal<T> {
    Step {
        amplitude: T,
    },
    /// `amplitude sin(omega t)`
    Sine {
        amplitude: T,
        omega: T,
    },
    /// Uniformly sampled values, linearly interpolated, last value held.
    Samples {
        dt: T,
        values: Vec<T>,
    },
}

impl<T: Scalar> Signal<T> {
    pub fn at(&self, t: T) -> T {
        match self {
            Signal::Step { amplitude } => *amplitude,
            Signal::Sine { amplitude, omega } => *amplitude * (*omega * t).sin(),
            Signal::Samples { dt, values } => {
                if values.is_empty() {
                    return T::zero();
                }
                let x = t / *dt;
                let i = x.floor().as_f64();
                if i < 0.0 {
                    return values[0];
                }
                let i = i as usize;
                if i + 1 >= values.len() {
                    return values[values.len() - 1];
                }
                let f = x - T::from_usize_exact(i);
                values[i] + (values[i + 1] - values[i]) * f
            }
        }
    }

    /// Highest frequency content in Hz, if bounded.
    pub fn max_frequency_hz(&self) -> Option<T> {
        match self {
            Signal::Step { .. } => None,
            Signal::Sine { omega, .. } => Some(omega.abs() / T::TAU()),
            Signal::Samples { dt, .. } => Some(T::one() / (T::lit(2.0) * *dt)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub h: T,
    pub u: Vec<T>,
    pub y: Vec<T>,
    pub warnings: Vec<String>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn time(&self, k: usize) -> T {
        self.h * T::from_usize_exact(k)
    }

    /// CSV with header `t,u,y`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,u,y\n");
        for k in 0..self.len() {
            let _ = writeln!(out, "{},{},{}", fmt17(self.time(k)), fmt17(self.u[k]), fmt17(self.y[k]));
        }
        out
    }
}

/// Integrates `ss` from rest over `[0, duration]` with fixed step `h`.
pub fn integrate<T: Scalar>(ss: &StateSpace<T>, input: &Signal<T>, h: T, duration: T) -> Result<Trajectory<T>> {
    ss.require_siso()?;
    if !(h.is_finite() && h > T::zero()) {
        return Err(Error::InvalidParameter { name: "h", constraint: "must be finite and > 0".into() });
    }
    if !(duration.is_finite() && duration >= T::zero()) {
        return Err(Error::InvalidParameter { name: "duration", constraint: "must be finite and >= 0".into() });
    }
    let mut warnings = Vec::new();
    if let Some(f) = input.max_frequency_hz() {
        if f > T::zero() && h > T::one() / (T::lit(50.0) * f) {
            warnings.push(format!(
                "step {} s exceeds 1/(50 f_max) = {} s",
                h.as_f64(),
                (T::one() / (T::lit(50.0) * f)).as_f64()
            ));
        }
    }
    let steps = (duration / h).round().as_f64() as usize;
    let mut u = Vec::with_capacity(steps + 1);
    let mut y = Vec::with_capacity(steps + 1);
    ss.run(input, h, steps, |_, ui, yi| {
        u.push(ui);
        y.push(yi);
        true
    });
    Ok(Trajectory { h, u, y, warnings })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DwellOptions<T> {
    pub cycles_settle: usize,
    pub cycles_measure: usize,
    /// Steps per excitation period.
    pub steps_per_period: usize,
    /// Upper bound of `h |fastest pole|`.
    pub max_pole_step: T,
}

impl<T: Scalar> Default for DwellOptions<T> {
    fn default() -> Self {
        Self { cycles_settle: 10, cycles_measure: 5, steps_per_period: 200, max_pole_step: T::lit(0.5) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DwellResult<T> {
    /// Complex gain per frequency; NaN where the run was aborted.
    pub response: FrequencyResponse<T>,
    /// Frequencies whose output envelope kept growing.
    pub aborted: Vec<T>,
}

/// Empirical frequency response by sine dwell at each grid frequency, using
/// the default [`DwellOptions`].
pub fn sine_dwell_frf<T: Scalar>(ss: &StateSpace<T>, grid: &FrequencyGrid<T>) -> Result<DwellResult<T>> {
    sine_dwell_frf_with(ss, grid, &DwellOptions::default())
}

pub fn sine_dwell_frf_with<T: Scalar>(
    ss: &StateSpace<T>,
    grid: &FrequencyGrid<T>,
    opts: &DwellOptions<T>,
) -> Result<DwellResult<T>> {
    ss.require_siso()?;
    if opts.cycles_measure == 0 || opts.steps_per_period < 4 {
        return Err(Error::InvalidParameter {
            name: "dwell",
            constraint: "need at least one measured cycle and four steps per period".into(),
        });
    }
    if let Some(p) = ss.poles() {
        if p.iter().any(|z| z.re >= T::zero()) {
            return Err(Error::Unstable);
        }
    }
    let results: Vec<Option<Complex<T>>> = grid.omegas().par_iter().map(|&w| dwell_one(ss, w, opts)).collect();
    let nan = Complex::new(T::nan(), T::nan());
    let aborted = grid.omegas().iter().zip(&results).filter(|(_, r)| r.is_none()).map(|(&w, _)| w).collect();
    let values = results.into_iter().map(|r| r.unwrap_or(nan)).collect();
    Ok(DwellResult { response: FrequencyResponse::new(grid.clone(), values)?, aborted })
}

fn dwell_one<T: Scalar>(ss: &StateSpace<T>, omega: T, opts: &DwellOptions<T>) -> Option<Complex<T>> {
    let period = T::TAU() / omega;
    let mut per_cycle = opts.steps_per_period;
    if let Some(fast) = ss.fastest_mode() {
        let h_max = opts.max_pole_step / fast;
        let need = (period / h_max).ceil().as_f64() as usize;
        per_cycle = per_cycle.max(need);
    }
    let h = period / T::from_usize_exact(per_cycle);
    let cycles = opts.cycles_settle + opts.cycles_measure;
    let steps = per_cycle * cycles;
    let start = per_cycle * opts.cycles_settle;

    // normal equations for y ~ a sin + b cos + c
    let mut ata = [[T::zero(); 3]; 3];
    let mut aty = [T::zero(); 3];
    let mut peaks = vec![T::zero(); cycles];
    let mut finite = true;
    let mut k = 0usize;
    let input = Signal::Sine { amplitude: T::one(), omega };
    ss.run(&input, h, steps, |t, _, y| {
        if !y.is_finite() {
            finite = false;
            return false;
        }
        let cyc = (k / per_cycle).min(cycles - 1);
        peaks[cyc] = peaks[cyc].max(y.abs());
        // each measured cycle contributes its samples once, end point excluded
        if k >= start && k < steps {
            let (sn, cs) = (omega * t).sin_cos();
            let row = [sn, cs, T::one()];
            for i in 0..3 {
                for j in 0..3 {
                    ata[i][j] += row[i] * row[j];
                }
                aty[i] += row[i] * y;
            }
        }
        k += 1;
        true
    });
    if !finite {
        return None;
    }
    let measured = &peaks[opts.cycles_settle..];
    let growing = measured.windows(2).all(|w| w[1] > w[0]) && measured[measured.len() - 1] > T::lit(1.05) * measured[0];
    if growing {
        return None;
    }
    let to_c = |x: T| Complex::new(x, T::zero());
    let a = ata.iter().flat_map(|r| r.iter().map(|&v| to_c(v))).collect();
    let sol = solve_dense(a, aty.iter().map(|&v| to_c(v)).collect(), 3)?;
    Some(Complex::new(sol[0].re, sol[1].re))
}
