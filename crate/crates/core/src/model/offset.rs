use std::fmt;
use std::ops::{Add, AddAssign, Sub};

use num_rational::Ratio;
use num_traits::Zero;

/// Exact rational position or span in quarter-note units.
///
/// All positional arithmetic in the model is exact; two offsets are equal
/// iff their reduced fractions are equal. No floating point is involved
/// anywhere in offset math.
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Offset(Ratio<i64>);

impl Offset {
    pub const ZERO: Offset = Offset(Ratio::new_raw(0, 1));

    /// Builds an offset from a numerator and a positive denominator.
    ///
    /// Panics if `den` is zero; use [`Offset::try_new`] for fallible
    /// construction from untrusted values.
    pub fn new(num: i64, den: i64) -> Offset {
        Offset::try_new(num, den).expect("invalid offset")
    }

    pub fn try_new(num: i64, den: i64) -> Result<Offset, OffsetError> {
        if den <= 0 {
            return Err(OffsetError::NonPositiveDenominator);
        }
        if num < 0 {
            return Err(OffsetError::Negative);
        }
        Ok(Offset(Ratio::new(num, den)))
    }

    pub fn from_int(num: i64) -> Offset {
        Offset::new(num, 1)
    }

    /// Numerator of the reduced fraction.
    pub fn numer(&self) -> i64 {
        *self.0.numer()
    }

    /// Denominator of the reduced fraction (always positive).
    pub fn denom(&self) -> i64 {
        *self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// Difference `self - other`, saturating at zero when `other` is later.
    pub fn saturating_sub(&self, other: Offset) -> Offset {
        if other.0 > self.0 {
            Offset::ZERO
        } else {
            Offset(self.0 - other.0)
        }
    }
}

impl Add for Offset {
    type Output = Offset;
    fn add(self, rhs: Offset) -> Offset {
        Offset(self.0 + rhs.0)
    }
}

impl AddAssign for Offset {
    fn add_assign(&mut self, rhs: Offset) {
        self.0 += rhs.0;
    }
}

impl Sub for Offset {
    type Output = Offset;
    fn sub(self, rhs: Offset) -> Offset {
        let r = self.0 - rhs.0;
        debug_assert!(r >= Ratio::zero(), "offset subtraction went negative");
        Offset(r)
    }
}

impl fmt::Display for Offset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numer(), self.denom())
    }
}

impl fmt::Debug for Offset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Offset({}/{})", self.numer(), self.denom())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum OffsetError {
    #[error("offset denominator must be positive")]
    NonPositiveDenominator,
    #[error("offset must be non-negative")]
    Negative,
}
