use num_complex::Complex;
use rayon::prelude::*;

use super::DelayRational;
use crate::scalar::rad_to_deg;
use crate::{Error, Result, Scalar};

/// Minimum grid density for phase unwrapping and margin search.
pub const MIN_POINTS_PER_DECADE: f64 = 20.0;

/// Strictly increasing, positive, finite angular frequencies in rad/s.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid<T> {
    omegas: Vec<T>,
}

impl<T: Scalar> FrequencyGrid<T> {
    pub fn new(omegas: Vec<T>) -> Result<Self> {
        if omegas.is_empty() {
            return Err(Error::InvalidGrid("empty grid".into()));
        }
        if let Some(w) = omegas.iter().find(|w| !w.is_finite() || **w <= T::zero()) {
            return Err(Error::InvalidGrid(format!("frequency {w} is not finite and positive")));
        }
        if let Some(i) = (1..omegas.len()).find(|&i| omegas[i] <= omegas[i - 1]) {
            return Err(Error::InvalidGrid(format!("not strictly increasing at index {i}")));
        }
        Ok(Self { omegas })
    }

    /// `n` logarithmically spaced points from `min` to `max` inclusive.
    pub fn log_spaced(min: T, max: T, n: usize) -> Result<Self> {
        if !(min > T::zero() && max > min && min.is_finite() && max.is_finite()) || n < 2 {
            return Err(Error::InvalidGrid(format!("need 0 < min < max and n >= 2 (min={min}, max={max}, n={n})")));
        }
        let (lo, hi) = (min.log10(), max.log10());
        let step = (hi - lo) / T::from_usize_exact(n - 1);
        let mut omegas: Vec<T> = (0..n).map(|i| T::lit(10.0).powf(lo + step * T::from_usize_exact(i))).collect();
        omegas[0] = min;
        omegas[n - 1] = max;
        Self::new(omegas)
    }

    /// Log grid with at least `ppd` points per decade.
    pub fn with_density(min: T, max: T, ppd: T) -> Result<Self> {
        if !(ppd > T::zero() && ppd.is_finite()) {
            return Err(Error::InvalidGrid(format!("points per decade must be positive, got {ppd}")));
        }
        if !(min > T::zero() && max > min) {
            return Err(Error::InvalidGrid(format!("need 0 < min < max (min={min}, max={max})")));
        }
        let decades = (max / min).log10();
        let n = (decades * ppd).ceil().as_f64() as usize + 1;
        Self::log_spaced(min, max, n.max(2))
    }

    /// 400 log-spaced points over 0.1 to 10^4 rad/s.
    pub fn default_analysis() -> Self {
        Self::log_spaced(T::lit(0.1), T::lit(1e4), 400).expect("static grid")
    }

    pub fn omegas(&self) -> &[T] {
        &self.omegas
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    pub fn min(&self) -> T {
        self.omegas[0]
    }

    pub fn max(&self) -> T {
        self.omegas[self.omegas.len() - 1]
    }

    pub fn decades(&self) -> T {
        (self.max() / self.min()).log10()
    }

    /// Average density; a single point reports zero.
    pub fn points_per_decade(&self) -> T {
        if self.omegas.len() < 2 {
            return T::zero();
        }
        T::from_usize_exact(self.omegas.len() - 1) / self.decades()
    }

    /// Geometric midpoint of the covered band.
    pub fn midpoint(&self) -> T {
        (self.min() * self.max()).sqrt()
    }

    pub(crate) fn check_density(&self, min_decades: f64) -> Result<()> {
        if self.decades().as_f64() < min_decades - 1e-9 {
            return Err(Error::InvalidGrid(format!(
                "grid spans {:.3} decades, at least {min_decades} required",
                self.decades().as_f64()
            )));
        }
        if self.points_per_decade().as_f64() < MIN_POINTS_PER_DECADE - 1e-9 {
            return Err(Error::InvalidGrid(format!(
                "grid has {:.2} points/decade, at least {MIN_POINTS_PER_DECADE} required",
                self.points_per_decade().as_f64()
            )));
        }
        Ok(())
    }
}

/// Complex response sampled on a [`FrequencyGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyResponse<T> {
    grid: FrequencyGrid<T>,
    values: Vec<Complex<T>>,
}

impl<T: Scalar> FrequencyResponse<T> {
    pub fn new(grid: FrequencyGrid<T>, values: Vec<Complex<T>>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::Dimension(format!("{} values for {} grid points", values.len(), grid.len())));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at every grid frequency (in parallel; order preserved).
    pub fn from_fn<F>(grid: &FrequencyGrid<T>, f: F) -> Result<Self>
    where
        F: Fn(T) -> Result<Complex<T>> + Sync,
    {
        let values = grid.omegas().par_iter().map(|&w| f(w)).collect::<Result<Vec<_>>>()?;
        Ok(Self { grid: grid.clone(), values })
    }

    pub fn from_tf(tf: &DelayRational<T>, grid: &FrequencyGrid<T>) -> Result<Self> {
        Self::from_fn(grid, |w| tf.freq_eval(w))
    }

    pub fn constant(grid: &FrequencyGrid<T>, value: Complex<T>) -> Self {
        Self { grid: grid.clone(), values: vec![value; grid.len()] }
    }

    pub fn grid(&self) -> &FrequencyGrid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (T, Complex<T>)> + '_ {
        self.grid.omegas().iter().copied().zip(self.values.iter().copied())
    }

    pub fn magnitude_db(&self) -> Vec<T> {
        self.values.iter().map(|v| T::lit(20.0) * v.norm().log10()).collect()
    }

    /// Phase in degrees, continued across the grid by choosing the multiple
    /// of 360 degrees nearest to the previous point.
    pub fn phase_unwrapped_deg(&self) -> Vec<T> {
        unwrap_deg(self.values.iter().map(|v| rad_to_deg(v.arg())))
    }

    pub fn zip_with<F>(&self, other: &Self, f: F) -> Result<Self>
    where
        F: Fn(T, Complex<T>, Complex<T>) -> Result<Complex<T>>,
    {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let values = self.iter().zip(other.values.iter()).map(|((w, a), &b)| f(w, a, b)).collect::<Result<Vec<_>>>()?;
        Ok(Self { grid: self.grid.clone(), values })
    }

    pub fn map<F>(&self, f: F) -> Self
    where
        F: Fn(T, Complex<T>) -> Complex<T>,
    {
        Self { grid: self.grid.clone(), values: self.iter().map(|(w, v)| f(w, v)).collect() }
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |_, a, b| Ok(a * b))
    }

    pub fn div(&self, other: &Self, what: &'static str) -> Result<Self> {
        self.zip_with(other, |w, a, b| {
            if b.norm() == T::zero() {
                Err(Error::DivisionByZero { what, omega: w.as_f64() })
            } else {
                Ok(a / b)
            }
        })
    }

    pub fn scale(&self, k: Complex<T>) -> Self {
        self.map(|_, v| v * k)
    }
}

pub(crate) fn unwrap_deg<T: Scalar, I: IntoIterator<Item = T>>(raw: I) -> Vec<T> {
    let full = T::lit(360.0);
    let mut out: Vec<T> = Vec::new();
    for p in raw {
        let next = match out.last() {
            Some(&prev) => p + full * ((prev - p) / full).round(),
            None => p,
        };
        out.push(next);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_shape() {
        let g = FrequencyGrid::<f64>::default_analysis();
        assert_eq!(g.len(), 400);
        assert_eq!(g.min(), 0.1);
        assert_eq!(g.max(), 1e4);
        assert!((g.points_per_decade() - 399.0 / 5.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(FrequencyGrid::new(vec![1.0, 1.0]).is_err());
        assert!(FrequencyGrid::new(vec![0.0, 1.0]).is_err());
        assert!(FrequencyGrid::new(vec![1.0, f64::INFINITY]).is_err());
        assert!(FrequencyGrid::<f64>::new(vec![]).is_err());
    }

    #[test]
    fn density_constructor() {
        let g = FrequencyGrid::with_density(1.0, 1000.0, 20.0).unwrap();
        assert_eq!(g.len(), 61);
        assert!(g.check_density(2.0).is_ok());
        assert!(FrequencyGrid::with_density(1.0, 50.0, 40.0).unwrap().check_density(2.0).is_err());
        assert!(FrequencyGrid::with_density(1.0, 1000.0, 10.0).unwrap().check_density(2.0).is_err());
    }

    #[test]
    fn unwraps_a_fast_delay() {
        let grid = FrequencyGrid::<f64>::with_density(0.1, 10.0, 200.0).unwrap();
        let tf = DelayRational::pure_delay(1.0).unwrap();
        let fr = FrequencyResponse::from_tf(&tf, &grid).unwrap();
        for (w, p) in grid.omegas().iter().zip(fr.phase_unwrapped_deg()) {
            assert!((p + w.to_degrees()).abs() < 1e-9);
        }
    }

    #[test]
    fn grid_mismatch() {
        let a = FrequencyResponse::constant(&FrequencyGrid::log_spaced(1.0, 10.0, 5).unwrap(), Complex::new(1.0, 0.0));
        let b = FrequencyResponse::constant(&FrequencyGrid::log_spaced(1.0, 10.0, 6).unwrap(), Complex::new(1.0, 0.0));
        assert_eq!(a.mul(&b), Err(Error::GridMismatch));
    }
}
