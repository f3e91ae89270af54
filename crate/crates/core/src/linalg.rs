//! Small dense complex linear solves used by the per-frequency oracles.

use num_complex::Complex;

use crate::Scalar;

/// Solves the 2x2 system `a x = b` by Cramer's rule. Returns `None` when
/// the determinant is negligible relative to the matrix entries.
pub fn solve2<T: Scalar>(a: [[Complex<T>; 2]; 2], b: [Complex<T>; 2]) -> Option<[Complex<T>; 2]> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let scale = (a[0][0].norm() * a[1][1].norm()).max(a[0][1].norm() * a[1][0].norm());
    if det.norm() == T::zero() || det.norm() <= T::epsilon() * T::lit(16.0) * scale {
        return None;
    }
    Some([(b[0] * a[1][1] - a[0][1] * b[1]) / det, (a[0][0] * b[1] - b[0] * a[1][0]) / det])
}

/// Gaussian elimination with partial pivoting on a row-major `n x n` matrix.
pub fn solve_dense<T: Scalar>(mut a: Vec<Complex<T>>, mut b: Vec<Complex<T>>, n: usize) -> Option<Vec<Complex<T>>> {
    assert_eq!(a.len(), n * n);
    assert_eq!(b.len(), n);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| {
            a[i * n + col].norm().partial_cmp(&a[j * n + col].norm()).unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if a[piv * n + col].norm() == T::zero() {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(piv * n + k, col * n + k);
            }
            b.swap(piv, col);
        }
        let d = a[col * n + col];
        for row in col + 1..n {
            let f = a[row * n + col] / d;
            if f.norm() == T::zero() {
                continue;
            }
            for k in col..n {
                let v = a[col * n + k];
                a[row * n + k] -= f * v;
            }
            let v = b[col];
            b[row] -= f * v;
        }
    }
    let mut x = vec![Complex::new(T::zero(), T::zero()); n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row * n + k] * x[k];
        }
        x[row] = acc / a[row * n + row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    type C = Complex<f64>;

    #[test]
    fn cramer_matches_elimination() {
        let a = [[C::new(2.0, 1.0), C::new(-1.0, 0.5)], [C::new(0.3, 0.0), C::new(1.0, -2.0)]];
        let b = [C::new(1.0, 0.0), C::new(0.0, 1.0)];
        let x = solve2(a, b).unwrap();
        let y = solve_dense(vec![a[0][0], a[0][1], a[1][0], a[1][1]], b.to_vec(), 2).unwrap();
        for i in 0..2 {
            assert!((x[i] - y[i]).norm() < 1e-14);
        }
    }

    #[test]
    fn singular_is_none() {
        let one = C::new(1.0, 0.0);
        assert!(solve2([[one, one], [one, one]], [one, one]).is_none());
        assert!(solve_dense(vec![one, one, one, one], vec![one, one], 2).is_none());
    }
}
