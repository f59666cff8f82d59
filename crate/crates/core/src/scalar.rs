//! Floating-point abstraction shared by the solver, objectives and oracles.
//!
//! Everything the Frank-Wolfe loop touches is generic over [`Scalar`], so a
//! run can be carried out in plain `f64` or in double-double arithmetic
//! ([`DoubleDouble`]). The latter matters for strong-growth instances whose
//! suboptimality falls below `f64` resolution well before the horizon ends.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use num_traits::{One, Zero};

/// Double-double (~106-bit mantissa) scalar.
pub type DoubleDouble = qd::Quad;

pub trait Scalar:
    Copy
    + PartialEq
    + PartialOrd
    + Debug
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Send
    + Sync
    + 'static
{
    fn of(value: f64) -> Self;

    /// Nearest `f64` (rounding away the extra precision, if any).
    fn to_f64_lossy(self) -> f64;

    fn abs(self) -> Self;
    fn sqrt(self) -> Self;
    fn powf(self, exponent: Self) -> Self;
    fn ln(self) -> Self;
    fn exp(self) -> Self;
    fn is_finite(self) -> bool;

    fn from_count(n: usize) -> Self {
        Self::of(n as f64)
    }

    fn signum(self) -> Self {
        if self > Self::zero() {
            Self::one()
        } else if self < Self::zero() {
            -Self::one()
        } else {
            Self::zero()
        }
    }

    fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }
}

impl Scalar for f64 {
    fn of(value: f64) -> Self {
        value
    }

    fn to_f64_lossy(self) -> f64 {
        self
    }

    fn abs(self) -> Self {
        f64::abs(self)
    }

    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }

    fn powf(self, exponent: Self) -> Self {
        f64::powf(self, exponent)
    }

    fn ln(self) -> Self {
        f64::ln(self)
    }

    fn exp(self) -> Self {
        f64::exp(self)
    }

    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }

    fn max(self, other: Self) -> Self {
        f64::max(self, other)
    }

    fn min(self, other: Self) -> Self {
        f64::min(self, other)
    }
}

impl Scalar for DoubleDouble {
    fn of(value: f64) -> Self {
        qd::Quad::from_f64(value)
    }

    fn to_f64_lossy(self) -> f64 {
        self.0 + self.1
    }

    fn abs(self) -> Self {
        qd::Quad::abs(self)
    }

    fn sqrt(self) -> Self {
        if self.0 < 0.0 {
            return qd::Quad::NAN;
        }
        qd::Quad::sqrt(self)
    }

    fn powf(self, exponent: Self) -> Self {
        if self.0 == 0.0 && exponent.0 > 0.0 {
            return qd::Quad::ZERO;
        }
        (exponent * qd::Quad::ln(self)).exp()
    }

    fn ln(self) -> Self {
        qd::Quad::ln(self)
    }

    fn exp(self) -> Self {
        qd::Quad::exp(self)
    }

    fn is_finite(self) -> bool {
        self.0.is_finite() && self.1.is_finite()
    }
}

/// Numeric precision selector used by configuration surfaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    #[default]
    Double,
    DoubleDouble,
}

impl std::str::FromStr for Precision {
    type Err = crate::FwError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "f64" | "double" => Ok(Precision::Double),
            "dd" | "double-double" | "doubledouble" => Ok(Precision::DoubleDouble),
            other => Err(crate::FwError::InvalidParameter(format!(
                "unknown precision '{other}' (expected f64 or double-double)"
            ))),
        }
    }
}

impl std::fmt::Display for Precision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Precision::Double => f.write_str("f64"),
            Precision::DoubleDouble => f.write_str("double-double"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type Dd = DoubleDouble;

    #[test]
    fn double_double_resolves_below_f64_epsilon() {
        let sum = Dd::of(1.0) + Dd::of(1e-25);
        assert_eq!((sum - Dd::of(1.0)).to_f64_lossy(), 1e-25);
        assert_eq!(1.0f64 + 1e-25 - 1.0, 0.0);
    }

    #[test]
    fn double_double_division_and_roots_are_accurate() {
        let third = Dd::of(1.0) / Dd::of(3.0);
        assert!((third * Dd::of(3.0) - Dd::of(1.0)).abs() < Dd::of(1e-30));
        let r = Dd::of(2.0).sqrt();
        assert!((r * r - Dd::of(2.0)).abs() < Dd::of(1e-30));
        // 2^(1/4) raised to the fourth power.
        let q = Dd::of(2.0).powf(Dd::of(0.25));
        assert!((q * q * q * q - Dd::of(2.0)).abs() < Dd::of(1e-29));
        assert_eq!(Dd::of(0.0).powf(Dd::of(0.25)), Dd::of(0.0));
        assert!((Dd::of(0.7).ln().exp() - Dd::of(0.7)).abs() < Dd::of(1e-30));
    }

    #[test]
    fn provided_methods_agree_with_f64() {
        for &(a, b) in &[(1.5, -2.0), (-0.0, 0.0), (3.0, 3.0)] {
            assert_eq!(Dd::of(a).max(Dd::of(b)).to_f64_lossy(), f64::max(a, b));
            assert_eq!(Dd::of(a).min(Dd::of(b)).to_f64_lossy(), f64::min(a, b));
        }
        assert_eq!(Dd::of(-4.0).signum().to_f64_lossy(), -1.0);
        assert_eq!(Dd::of(0.0).signum().to_f64_lossy(), 0.0);
        assert!(!Dd::of(f64::INFINITY).is_finite());
        assert!(Dd::of(-3.0).sqrt().to_f64_lossy().is_nan());
    }

    #[test]
    fn precision_parses() {
        assert_eq!("f64".parse::<Precision>().unwrap(), Precision::Double);
        assert_eq!("double-double".parse::<Precision>().unwrap(), Precision::DoubleDouble);
        assert!("quad".parse::<Precision>().is_err());
        assert_eq!(Precision::DoubleDouble.to_string(), "double-double");
    }
}
