//! Scalar abstraction shared by every numeric module.
//!
//! All math in this crate is written against [`Scalar`], which is satisfied by
//! `f32` and `f64`. The file formats and the CLI work in `f64`; see the type
//! aliases at the crate root.

use std::fmt::{Debug, Display, LowerExp};

use nalgebra::RealField;
use num_traits::ToPrimitive;

/// Real scalar usable by the network model, the quadratic-form assembly and
/// the interior-point solver.
pub trait Scalar: RealField + Copy + ToPrimitive + Debug + Display + LowerExp + Send + Sync + 'static {
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn c(value: f64) -> Self {
        nalgebra::convert(value)
    }

    /// Lossy conversion to `f64` (used for reporting and serialization).
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Machine epsilon of the scalar type.
    fn machine_epsilon() -> Self;
}

impl Scalar for f32 {
    fn machine_epsilon() -> Self {
        f32::EPSILON
    }
}

impl Scalar for f64 {
    fn machine_epsilon() -> Self {
        f64::EPSILON
    }
}

/// Rounds `x` to `digits` significant digits, moving away from the interval
/// interior when `direction` is non-zero: `-1` rounds toward negative
/// infinity, `+1` toward positive infinity, `0` to nearest.
pub fn round_significant(x: f64, digits: usize, direction: i8) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let formatted = format!("{:.*e}", digits.saturating_sub(1), x);
    let nearest: f64 = formatted.parse().unwrap_or(x);
    match direction {
        d if d < 0 && nearest > x => step_significant(nearest, digits, -1.0),
        d if d > 0 && nearest < x => step_significant(nearest, digits, 1.0),
        _ => nearest,
    }
}

fn step_significant(x: f64, digits: usize, sign: f64) -> f64 {
    let exponent = x.abs().log10().floor() as i32;
    let ulp = 10f64.powi(exponent + 1 - digits as i32);
    let stepped = x + sign * ulp;
    let formatted = format!("{:.*e}", digits.saturating_sub(1), stepped);
    formatted.parse().unwrap_or(stepped)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversion_round_trip() {
        assert_eq!(<f64 as Scalar>::c(0.25), 0.25);
        assert_eq!(<f32 as Scalar>::c(0.5).to_f64_lossy(), 0.5);
    }

    #[test]
    fn significant_rounding() {
        assert_eq!(round_significant(0.98655075437, 10, 0), 0.9865507544);
        assert_eq!(round_significant(0.98655075437, 10, -1), 0.9865507543);
        assert_eq!(round_significant(0.98655075431, 10, 1), 0.9865507544);
        assert_eq!(round_significant(0.5, 10, -1), 0.5);
        assert!(round_significant(1.23456789012345, 10, 1) >= 1.23456789012345);
        assert!(round_significant(1.23456789019, 10, -1) <= 1.23456789019);
    }
}
