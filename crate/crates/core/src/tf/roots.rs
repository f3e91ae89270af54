//! Polynomial root finding by simultaneous Aberth-Ehrlich iteration.
//!
//! Starting points come from the Newton polygon of the coefficient moduli, so
//! polynomials whose roots span many decades (slow steering modes next to
//! fast Pade poles) still converge in a few dozen sweeps. Roots of modulus
//! above one are evaluated through the reversed polynomial to keep Horner's
//! rule in range.

use num_complex::Complex;

use super::Polynomial;
use crate::{Error, Result, Scalar};

const MAX_SWEEPS: usize = 1000;

/// All complex roots of `p`, sorted by real part then imaginary part.
///
/// Roots at the origin are split off exactly. The zero polynomial and
/// constants have no roots.
pub fn polynomial_roots<T: Scalar>(p: &Polynomial<T>) -> Result<Vec<Complex<T>>> {
    if p.degree() == 0 {
        return Ok(Vec::new());
    }
    let zeros = p.zero_root_multiplicity();
    let q = p.strip_s_power(zeros);
    let mut roots = vec![Complex::new(T::zero(), T::zero()); zeros];

    match q.degree() {
        0 => {}
        1 => roots.push(Complex::new(-q.coeff(0) / q.coeff(1), T::zero())),
        _ => roots.extend(aberth(&q)?),
    }

    roots.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.im.partial_cmp(&b.im).unwrap_or(std::cmp::Ordering::Equal))
    });
    Ok(roots)
}

fn aberth<T: Scalar>(p: &Polynomial<T>) -> Result<Vec<Complex<T>>> {
    let n = p.degree();
    let lc = p.leading_coeff();
    let a: Vec<T> = p.coeffs().iter().map(|&c| c / lc).collect();
    let abs_a: Vec<T> = a.iter().map(|c| c.abs()).collect();
    let eps = T::epsilon();

    let mut z = initial_guesses(&a);
    let mut done = vec![false; n];

    for _ in 0..MAX_SWEEPS {
        let mut all_done = true;
        for i in 0..n {
            if done[i] {
                continue;
            }
            let (ratio, small) = newton_ratio(&a, &abs_a, z[i]);
            if small {
                done[i] = true;
                continue;
            }
            let mut sum = Complex::new(T::zero(), T::zero());
            for (j, &zj) in z.iter().enumerate() {
                if j != i {
                    sum += (z[i] - zj).inv();
                }
            }
            let denom = Complex::new(T::one(), T::zero()) - ratio * sum;
            let step = if denom.norm() == T::zero() { ratio } else { ratio / denom };
            z[i] -= step;
            if !z[i].re.is_finite() || !z[i].im.is_finite() {
                return Err(Error::RootsNotConverged(MAX_SWEEPS));
            }
            if step.norm() <= T::lit(4.0) * eps * z[i].norm() {
                done[i] = true;
            } else {
                all_done = false;
            }
        }
        if all_done {
            for zi in z.iter_mut() {
                *zi = polish(&a, &abs_a, *zi);
            }
            return Ok(z);
        }
    }
    Err(Error::RootsNotConverged(MAX_SWEEPS))
}

/// Newton correction `p(z)/p'(z)` for a monic polynomial, together with a
/// flag telling whether `|p(z)|` is already at the rounding-error level.
fn newton_ratio<T: Scalar>(a: &[T], abs_a: &[T], z: Complex<T>) -> (Complex<T>, bool) {
    let n = a.len() - 1;
    let zero = Complex::new(T::zero(), T::zero());
    let eps = T::epsilon();
    let r = z.norm();
    if r <= T::one() {
        let mut p = zero;
        let mut dp = zero;
        let mut bound = T::zero();
        for &c in a.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        for &c in abs_a.iter().rev() {
            bound = bound * r + c;
        }
        let small = p.norm() <= T::lit(2.0 * n as f64) * eps * bound;
        (p / dp, small)
    } else {
        // p(z) = z^n rev(w), w = 1/z; p/p' = z rev / (n rev - w rev')
        let w = z.inv();
        let rw = w.norm();
        let mut rev = zero;
        let mut drev = zero;
        let mut bound = T::zero();
        for &c in a.iter() {
            drev = drev * w + rev;
            rev = rev * w + c;
        }
        for &c in abs_a.iter() {
            bound = bound * rw + c;
        }
        let small = rev.norm() <= T::lit(2.0 * n as f64) * eps * bound;
        let nn = T::from_usize_exact(n);
        (z * rev / (rev * nn - w * drev), small)
    }
}

fn polish<T: Scalar>(a: &[T], abs_a: &[T], mut z: Complex<T>) -> Complex<T> {
    let residual = |z: Complex<T>| -> T {
        let p = a.iter().rev().fold(Complex::new(T::zero(), T::zero()), |acc, &c| acc * z + c);
        p.norm()
    };
    let mut best = residual(z);
    for _ in 0..3 {
        let (ratio, small) = newton_ratio(a, abs_a, z);
        if small {
            break;
        }
        let cand = z - ratio;
        let r = residual(cand);
        if r < best && cand.re.is_finite() && cand.im.is_finite() {
            best = r;
            z = cand;
        } else {
            break;
        }
    }
    z
}

/// Starting points on circles whose radii come from the upper convex hull of
/// `(k, ln|a_k|)`.
fn initial_guesses<T: Scalar>(a: &[T]) -> Vec<Complex<T>> {
    let n = a.len() - 1;
    let pts: Vec<(usize, f64)> =
        a.iter().enumerate().filter(|(_, c)| !c.is_zero()).map(|(k, c)| (k, c.abs().as_f64().ln())).collect();

    let mut hull: Vec<(usize, f64)> = Vec::with_capacity(pts.len());
    for &p in &pts {
        while hull.len() >= 2 {
            let (x1, y1) = hull[hull.len() - 2];
            let (x2, y2) = hull[hull.len() - 1];
            let cross = (x2 as f64 - x1 as f64) * (p.1 - y1) - (y2 - y1) * (p.0 as f64 - x1 as f64);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }

    let sigma = 0.7_f64;
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut z = Vec::with_capacity(n);
    for w in hull.windows(2) {
        let (i, yi) = w[0];
        let (j, yj) = w[1];
        let m = j - i;
        let radius = ((yi - yj) / m as f64).exp();
        for l in 0..m {
            let theta = two_pi * l as f64 / m as f64 + two_pi * i as f64 / n as f64 + sigma;
            z.push(Complex::new(T::lit(radius * theta.cos()), T::lit(radius * theta.sin())));
        }
    }
    z
}
