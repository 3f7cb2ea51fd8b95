//! Reductions from parallelizable probabilistically checkable proofs of
//! proximity (PCPPs) to gap CSP reconfiguration, together with the exact
//! enumeration oracles used to audit them at small scale.
//!
//! Module map:
//!
//! * [`csp`]: q-CSP instances, assignments and the exact value function.
//! * [`reconfig`]: reconfiguration paths, exact and bottleneck (gap) values.
//! * [`ecc`]: binary linear codes (Hadamard by default) with brute-force decoding.
//! * [`pcpp`]: verifiers as randomness-indexed query tables, plus audits.
//! * [`parallel`]: layered verifier systems, the (q+1)-CSP reduction and the
//!   four-layer encoded construction with its completeness path and extraction.
//! * [`gen`]: instance families and seeded random instances.
//! * [`suite`]: the acceptance battery shared by tests and the CLI.

pub mod bits;
pub mod budget;
pub mod csp;
pub mod ecc;
pub mod error;
pub mod gen;
pub mod parallel;
pub mod pcpp;
pub mod rational;
pub mod reconfig;
pub mod rng;
pub mod suite;
mod text;

pub use bits::BitString;
pub use budget::Budget;
pub use csp::{Assignment, Constraint, CspInstance, Predicate, Symbol};
pub use error::{Error, Result};
pub use rational::Rational;
