use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex;

use crate::Scalar;

/// Real polynomial in the Laplace variable `s`, coefficients in ascending
/// powers (`coeffs[k]` multiplies `s^k`).
///
/// Always held in trimmed form: the highest stored coefficient is nonzero,
/// and the zero polynomial has no coefficients at all.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polynomial<T> {
    coeffs: Vec<T>,
}

impl<T: Scalar> Polynomial<T> {
    pub fn new(mut coeffs: Vec<T>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        Self::constant(T::one())
    }

    pub fn constant(c: T) -> Self {
        Self::new(vec![c])
    }

    /// `c * s^k`.
    pub fn monomial(c: T, k: usize) -> Self {
        let mut coeffs = vec![T::zero(); k + 1];
        coeffs[k] = c;
        Self::new(coeffs)
    }

    /// `a * s + b`.
    pub fn linear(a: T, b: T) -> Self {
        Self::new(vec![b, a])
    }

    /// Monic polynomial with the given real roots.
    pub fn from_real_roots(roots: &[T]) -> Self {
        roots.iter().fold(Self::one(), |acc, &r| &acc * &Self::linear(T::one(), -r))
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<T> {
        self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree of the polynomial; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// Coefficient of `s^k` (zero past the end).
    pub fn coeff(&self, k: usize) -> T {
        self.coeffs.get(k).copied().unwrap_or_else(T::zero)
    }

    pub fn leading_coeff(&self) -> T {
        self.coeffs.last().copied().unwrap_or_else(T::zero)
    }

    /// Number of vanishing low-order coefficients, i.e. the multiplicity of
    /// the root at `s = 0`. Zero polynomial reports 0.
    pub fn zero_root_multiplicity(&self) -> usize {
        if self.is_zero() {
            return 0;
        }
        self.coeffs.iter().take_while(|c| c.is_zero()).count()
    }

    /// Divides out `s^k`. Only exact: the `k` lowest coefficients must be zero.
    pub fn strip_s_power(&self, k: usize) -> Self {
        debug_assert!(self.coeffs.iter().take(k).all(|c| c.is_zero()));
        if k >= self.coeffs.len() {
            return Self::zero();
        }
        Self::new(self.coeffs[k..].to_vec())
    }

    /// Multiplies by `s^k`.
    pub fn shift(&self, k: usize) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        let mut coeffs = vec![T::zero(); k];
        coeffs.extend_from_slice(&self.coeffs);
        Self { coeffs }
    }

    pub fn scale(&self, k: T) -> Self {
        Self::new(self.coeffs.iter().map(|&c| c * k).collect())
    }

    pub fn max_abs_coeff(&self) -> T {
        self.coeffs.iter().fold(T::zero(), |m, c| m.max(c.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    pub fn eval(&self, x: T) -> T {
        self.coeffs.iter().rev().fold(T::zero(), |acc, &c| acc * x + c)
    }

    pub fn eval_complex(&self, z: Complex<T>) -> Complex<T> {
        self.coeffs.iter().rev().fold(Complex::new(T::zero(), T::zero()), |acc, &c| acc * z + c)
    }

    pub fn derivative(&self) -> Self {
        Self::new(self.coeffs.iter().enumerate().skip(1).map(|(k, &c)| c * T::from_usize_exact(k)).collect())
    }

    /// Polynomial long division: returns `(q, r)` with `self = q*d + r` and
    /// `deg r < deg d`.
    ///
    /// Panics if `d` is the zero polynomial.
    pub fn div_rem(&self, d: &Self) -> (Self, Self) {
        assert!(!d.is_zero(), "polynomial division by zero");
        if self.coeffs.len() < d.coeffs.len() {
            return (Self::zero(), self.clone());
        }
        let dn = d.coeffs.len() - 1;
        let lc = d.leading_coeff();
        let mut rem = self.coeffs.clone();
        let mut quot = vec![T::zero(); self.coeffs.len() - dn];
        for k in (0..quot.len()).rev() {
            let c = rem[k + dn] / lc;
            quot[k] = c;
            for (j, &dc) in d.coeffs.iter().enumerate() {
                rem[k + j] -= c * dc;
            }
            rem[k + dn] = T::zero();
        }
        rem.truncate(dn);
        (Self::new(quot), Self::new(rem))
    }
}

impl<T: Scalar> Add for &Polynomial<T> {
    type Output = Polynomial<T>;

    fn add(self, rhs: Self) -> Polynomial<T> {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Polynomial::new((0..n).map(|k| self.coeff(k) + rhs.coeff(k)).collect())
    }
}

impl<T: Scalar> Sub for &Polynomial<T> {
    type Output = Polynomial<T>;

    fn sub(self, rhs: Self) -> Polynomial<T> {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Polynomial::new((0..n).map(|k| self.coeff(k) - rhs.coeff(k)).collect())
    }
}

impl<T: Scalar> Mul for &Polynomial<T> {
    type Output = Polynomial<T>;

    fn mul(self, rhs: Self) -> Polynomial<T> {
        if self.is_zero() || rhs.is_zero() {
            return Polynomial::zero();
        }
        let mut out = vec![T::zero(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out)
    }
}

impl<T: Scalar> Neg for &Polynomial<T> {
    type Output = Polynomial<T>;

    fn neg(self) -> Polynomial<T> {
        Polynomial { coeffs: self.coeffs.iter().map(|&c| -c).collect() }
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl<T: Scalar> $tr for Polynomial<T> {
            type Output = Polynomial<T>;
            fn $m(self, rhs: Self) -> Polynomial<T> {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
