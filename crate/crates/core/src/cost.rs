//! Exact integer money and objective arithmetic.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, Sub};

use serde::{Deserialize, Serialize};

/// Amount in nano-cents (1e-9 cent).
///
/// Rewards and the weighted comfort term are both expressed in this unit so
/// that optimiser comparisons are exact.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Cost(pub i64);

impl Cost {
    pub const ZERO: Cost = Cost(0);
    pub const PER_CENT: i64 = 1_000_000_000;
    pub const PER_MICRO_CENT: i64 = 1_000;

    pub fn from_cents(cents: f64) -> Cost {
        Cost((cents * Self::PER_CENT as f64).round() as i64)
    }

    pub fn cents(self) -> f64 {
        self.0 as f64 / Self::PER_CENT as f64
    }

    pub fn nano_cents(self) -> i64 {
        self.0
    }
}

impl Add for Cost {
    type Output = Cost;
    fn add(self, rhs: Cost) -> Cost {
        Cost(self.0 + rhs.0)
    }
}

impl AddAssign for Cost {
    fn add_assign(&mut self, rhs: Cost) {
        self.0 += rhs.0;
    }
}

impl Sub for Cost {
    type Output = Cost;
    fn sub(self, rhs: Cost) -> Cost {
        Cost(self.0 - rhs.0)
    }
}

impl Mul<i64> for Cost {
    type Output = Cost;
    fn mul(self, rhs: i64) -> Cost {
        Cost(self.0 * rhs)
    }
}

impl Sum for Cost {
    fn sum<I: Iterator<Item = Cost>>(iter: I) -> Cost {
        iter.fold(Cost::ZERO, Add::add)
    }
}

impl<'a> Sum<&'a Cost> for Cost {
    fn sum<I: Iterator<Item = &'a Cost>>(iter: I) -> Cost {
        iter.copied().sum()
    }
}

impl fmt::Display for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.4}¢", self.cents())
    }
}

/// Rate in micro-cents per kW, rounded from cents per kW.
pub fn rate_micro_cents(rate_cents: f64) -> i64 {
    (rate_cents * 1e6).round() as i64
}

/// Reward for keeping `power_units` grid units off for one step at
/// `rate_cents` per kW. Exact whenever `units_per_kw` divides 1000.
pub fn reward_cost(power_units: u32, units_per_kw: u32, rate_cents: f64) -> Cost {
    let numerator = i128::from(power_units) * i128::from(rate_micro_cents(rate_cents)) * 1000;
    let units = i128::from(units_per_kw);
    // round half away from zero; numerator is never negative
    Cost(((numerator + units / 2) / units) as i64)
}

/// Squared comfort margin quantised to thousandths.
pub fn quantised_cm_squared(cm: f64) -> i64 {
    (cm * cm * 1000.0).round() as i64
}

/// `weight_micro_cents · CM²` in nano-cents.
pub fn comfort_cost(weight_micro_cents: u64, cm: f64) -> Cost {
    Cost(weight_micro_cents as i64 * quantised_cm_squared(cm))
}
