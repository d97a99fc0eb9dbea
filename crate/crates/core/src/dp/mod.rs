//! Differential-privacy primitives: budgets, seeded randomness, the Laplace
//! and exponential mechanisms, and the budget ledger.

mod ledger;
mod mechanisms;
mod rng;

pub use ledger::{verify_composition, BudgetLedger, Charge, CompositionReport, Purpose, ScopeKey};
pub use mechanisms::{exp_mechanism, laplace, laplace_inverse_cdf};
pub use rng::RandomStream;

use std::fmt;

use crate::error::{Error, Result};

/// A strictly positive, finite privacy budget.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Epsilon(f64);

impl Epsilon {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value > 0.0 {
            Ok(Self(value))
        } else {
            Err(Error::param("epsilon", format!("must be finite and > 0 (got {value})")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl fmt::Display for Epsilon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epsilon_domain() {
        assert!(Epsilon::new(0.5).is_ok());
        assert!(Epsilon::new(0.0).is_err());
        assert!(Epsilon::new(-1.0).is_err());
        assert!(Epsilon::new(f64::INFINITY).is_err());
        assert!(Epsilon::new(f64::NAN).is_err());
    }
}
