use std::fmt::{Debug, Display, LowerExp};

use num_traits as nt;

/// Real floating-point scalar the analysis kernels are generic over (f32 or f64).
pub trait Scalar:
    nt::Float
    + nt::FloatConst
    + nt::FromPrimitive
    + nt::NumAssign
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as nt::FromPrimitive>::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_exact(n: usize) -> Self {
        <Self as nt::FromPrimitive>::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        nt::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl<T> Scalar for T where
    T: nt::Float
        + nt::FloatConst
        + nt::FromPrimitive
        + nt::NumAssign
        + Debug
        + Display
        + LowerExp
        + Default
        + Send
        + Sync
        + 'static
{
}

/// Formats a value with 17 significant digits in scientific notation.
pub fn fmt17<T: Scalar>(x: T) -> String {
    format!("{:.16e}", x.as_f64())
}

pub(crate) fn rad_to_deg<T: Scalar>(x: T) -> T {
    x * T::lit(180.0) / T::PI()
}
