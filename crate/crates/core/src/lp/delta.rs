//! Scalars of the ordered field ℚ(δ) truncated to first order: `r + s·δ`
//! with δ a positive infinitesimal.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::rational::Rational;

#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct DeltaRational {
    pub r: Rational,
    pub d: Rational,
}

impl DeltaRational {
    pub fn new(r: Rational, d: Rational) -> Self {
        Self { r, d }
    }

    pub fn real(r: Rational) -> Self {
        Self { r, d: Rational::zero() }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn is_zero(&self) -> bool {
        self.r.is_zero() && self.d.is_zero()
    }

    pub fn is_real(&self) -> bool {
        self.d.is_zero()
    }

    pub fn scale(&self, k: &Rational) -> Self {
        Self {
            r: &self.r * k,
            d: &self.d * k,
        }
    }

    pub fn div_scalar(&self, k: &Rational) -> Self {
        Self {
            r: &self.r / k,
            d: &self.d / k,
        }
    }

    /// Value at a concrete positive δ.
    pub fn at(&self, delta: &Rational) -> Rational {
        &self.r + &(&self.d * delta)
    }
}

impl Ord for DeltaRational {
    fn cmp(&self, other: &Self) -> Ordering {
        self.r.cmp(&other.r).then_with(|| self.d.cmp(&other.d))
    }
}

impl PartialOrd for DeltaRational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add<&DeltaRational> for &DeltaRational {
    type Output = DeltaRational;
    fn add(self, o: &DeltaRational) -> DeltaRational {
        DeltaRational {
            r: &self.r + &o.r,
            d: &self.d + &o.d,
        }
    }
}

impl Sub<&DeltaRational> for &DeltaRational {
    type Output = DeltaRational;
    fn sub(self, o: &DeltaRational) -> DeltaRational {
        DeltaRational {
            r: &self.r - &o.r,
            d: &self.d - &o.d,
        }
    }
}

impl Mul<&Rational> for &DeltaRational {
    type Output = DeltaRational;
    fn mul(self, k: &Rational) -> DeltaRational {
        self.scale(k)
    }
}

impl Neg for &DeltaRational {
    type Output = DeltaRational;
    fn neg(self) -> DeltaRational {
        DeltaRational {
            r: -&self.r,
            d: -&self.d,
        }
    }
}

impl fmt::Debug for DeltaRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.d.is_zero() {
            write!(f, "{}", self.r)
        } else {
            write!(f, "{} + {}δ", self.r, self.d)
        }
    }
}
