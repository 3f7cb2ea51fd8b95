//! Enumeration budgets. Every exhaustive operation checks its exact
//! workload against a budget up front and fails with
//! [`Error::BudgetExceeded`] instead of truncating.

use crate::error::{Error, Result};

/// State-space limit for the independent brute-force oracles.
pub const ORACLE_STATE_LIMIT: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    /// Maximum number of assignments / configurations enumerated.
    pub states: u64,
    /// Maximum number of `(x, pi, omega)` triples evaluated by an audit.
    pub triples: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            states: 1 << 22,
            triples: 1 << 32,
        }
    }
}

impl Budget {
    pub fn check_states(&self, what: &'static str, size: u128) -> Result<()> {
        check(what, size, self.states)
    }

    pub fn check_triples(&self, what: &'static str, size: u128) -> Result<()> {
        check(what, size, self.triples)
    }
}

pub(crate) fn check(what: &'static str, size: u128, limit: u64) -> Result<()> {
    if size > limit as u128 {
        Err(Error::BudgetExceeded { what, size, limit })
    } else {
        Ok(())
    }
}

/// `base^exp` saturating at `u128::MAX`.
pub fn space_size(base: u64, exp: usize) -> u128 {
    let mut acc: u128 = 1;
    for _ in 0..exp {
        acc = match acc.checked_mul(base as u128) {
            Some(v) => v,
            None => return u128::MAX,
        };
    }
    acc
}

/// `2^exp` saturating at `u128::MAX`.
pub fn pow2(exp: usize) -> u128 {
    if exp >= 128 {
        u128::MAX
    } else {
        1u128 << exp
    }
}
