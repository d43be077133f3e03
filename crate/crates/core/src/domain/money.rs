use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MICROS_PER_UNIT: u64 = 1_000_000;

/// Non-negative amount of currency in integer micro-units.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Money(u64);

impl Money {
    pub const ZERO: Money = Money(0);

    pub const fn from_micros(micros: u64) -> Self {
        Money(micros)
    }

    pub const fn micros(self) -> u64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    /// Converts a decimal currency amount, rounding to the nearest micro.
    pub fn from_units(units: f64) -> Result<Self> {
        if !units.is_finite() || units < 0.0 {
            return Err(Error::invalid(format!("money amount {units} must be finite and >= 0")));
        }
        let micros = (units * MICROS_PER_UNIT as f64).round();
        if micros > u64::MAX as f64 {
            return Err(Error::invalid(format!("money amount {units} overflows")));
        }
        Ok(Money(micros as u64))
    }

    pub fn as_units(self) -> f64 {
        self.0 as f64 / MICROS_PER_UNIT as f64
    }

    pub fn saturating_sub(self, rhs: Money) -> Money {
        Money(self.0.saturating_sub(rhs.0))
    }

    pub fn checked_add(self, rhs: Money) -> Option<Money> {
        self.0.checked_add(rhs.0).map(Money)
    }

    /// `self * factor`, floored to whole micros. Negative or NaN products give zero.
    pub fn mul_floor(self, factor: f64) -> Money {
        floor_micros(self.0 as f64 * factor)
    }
}

/// Floors a micro amount computed in floating point.
///
/// The value is nudged up by a few ulps first so that products such as
/// `0.002 * 50_000_000` land on the integer they represent.
pub fn floor_micros(x: f64) -> Money {
    if x.is_nan() || x <= 0.0 {
        return Money::ZERO;
    }
    let nudged = x + x * 8.0 * f64::EPSILON;
    if nudged >= u64::MAX as f64 {
        Money(u64::MAX)
    } else {
        Money(nudged.floor() as u64)
    }
}

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0 + rhs.0)
    }
}

impl AddAssign for Money {
    fn add_assign(&mut self, rhs: Money) {
        self.0 += rhs.0;
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        iter.fold(Money::ZERO, Add::add)
    }
}

impl<'a> Sum<&'a Money> for Money {
    fn sum<I: Iterator<Item = &'a Money>>(iter: I) -> Money {
        iter.copied().sum()
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "${}.{:06}",
            self.0 / MICROS_PER_UNIT,
            self.0 % MICROS_PER_UNIT
        )
    }
}
