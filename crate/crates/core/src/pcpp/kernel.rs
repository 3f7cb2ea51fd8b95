//! Exhaustive `(x, pi, omega)` audit kernel.
//!
//! Inputs and proofs are packed little-endian into `u64`s. For each outcome
//! the accept-table index splits into an input part and a proof part, since
//! each query slot reads exactly one of the two. Proof parts for every
//! `(pi, omega)` are precomputed when the table fits in memory, which makes
//! the inner loop one OR and one bit lookup per outcome.

use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;

use super::{Circuit, ScalarPcpp};
use crate::bits::BitString;
use crate::budget::{pow2, Budget};
use crate::error::{Error, Result};
use crate::rational::{ratio, Rational};

const MAX_PROOF_PART_TABLE: usize = 1 << 24;

pub(super) fn check_workload(v: &ScalarPcpp, budget: &Budget) -> Result<()> {
    if v.input_len() > 63 || v.proof_len() > 63 {
        return Err(Error::BudgetExceeded {
            what: "audit (x, pi, omega) triples",
            size: pow2(v.input_len() + v.proof_len() + v.randomness()),
            limit: budget.triples,
        });
    }
    budget.check_triples(
        "audit (x, pi, omega) triples",
        pow2(v.input_len() + v.proof_len() + v.randomness()),
    )
}

/// Inputs at relative distance at least `delta` from every solution.
pub(super) fn far_inputs(c: &Circuit, delta: &Rational, budget: &Budget) -> Result<Vec<u64>> {
    let n = c.input_len();
    let sols: Vec<u64> = c.solutions(budget)?.iter().map(BitString::to_u64).collect();
    Ok((0..1u64 << n)
        .into_par_iter()
        .filter(|&x| match sols.iter().map(|&w| (x ^ w).count_ones()).min() {
            None => true,
            Some(d) => ratio(d as u64, n as u64) >= *delta,
        })
        .collect())
}

pub(super) struct Kernel<'a> {
    v: &'a ScalarPcpp,
    /// Per outcome: `(input position, slot)` pairs.
    x_slots: Vec<Vec<(u32, u32)>>,
    /// Per outcome: `(proof position, slot)` pairs.
    pi_slots: Vec<Vec<(u32, u32)>>,
    /// `proof_parts[pi * R + omega]`, when small enough to precompute.
    proof_parts: Option<Vec<u32>>,
}

#[inline]
fn gather(bits: u64, slots: &[(u32, u32)]) -> u64 {
    slots
        .iter()
        .fold(0u64, |acc, &(p, s)| acc | (((bits >> p) & 1) << s))
}

type Slots = Vec<(usize, u32)>;

impl<'a> Kernel<'a> {
    pub(super) fn new(v: &'a ScalarPcpp) -> Self {
        let n = v.input_len();
        let mut x_slots: Vec<Vec<(u32, u32)>> = Vec::with_capacity(v.num_outcomes());
        let mut pi_slots: Vec<Vec<(u32, u32)>> = Vec::with_capacity(v.num_outcomes());
        for tuple in v.query_map() {
            let (xs, ps): (Slots, Slots) = tuple
                .iter()
                .enumerate()
                .map(|(l, &p)| (p, l as u32))
                .partition(|&(p, _)| p < n);
            x_slots.push(xs.into_iter().map(|(p, l)| (p as u32, l)).collect());
            pi_slots.push(ps.into_iter().map(|(p, l)| ((p - n) as u32, l)).collect());
        }
        let outcomes = v.num_outcomes();
        let proofs = 1usize.checked_shl(v.proof_len() as u32).unwrap_or(usize::MAX);
        let proof_parts = proofs
            .checked_mul(outcomes)
            .filter(|&size| size <= MAX_PROOF_PART_TABLE)
            .map(|_| {
                (0..proofs as u64)
                    .flat_map(|pi| pi_slots.iter().map(move |s| gather(pi, s) as u32))
                    .collect()
            });
        Kernel {
            v,
            x_slots,
            pi_slots,
            proof_parts,
        }
    }

    /// Best accept count over all proofs for input `x`. Stops early once
    /// `stop_at` is reached; skips proofs that cannot beat `floor`.
    pub(super) fn best(&self, x: u64, stop_at: u64, floor: &AtomicU64) -> u64 {
        let outcomes = self.v.num_outcomes();
        let preds = self.v.predicates();
        let x_parts: Vec<u64> = self.x_slots.iter().map(|s| gather(x, s)).collect();
        let mut best = 0u64;
        for pi in 0..1u64 << self.v.proof_len() {
            let bar = best.max(floor.load(Ordering::Relaxed));
            let mut count = 0u64;
            for omega in 0..outcomes {
                let pp = match &self.proof_parts {
                    Some(t) => t[pi as usize * outcomes + omega] as u64,
                    None => gather(pi, &self.pi_slots[omega]),
                };
                if preds[omega].accepts(x_parts[omega] | pp) {
                    count += 1;
                }
                let remaining = (outcomes - omega - 1) as u64;
                if count + remaining <= bar {
                    break;
                }
            }
            if count > best {
                best = count;
                if best >= stop_at {
                    break;
                }
            }
        }
        best
    }
}

/// Maximum accept count over `xs` and all proofs.
pub(super) fn max_acceptance(v: &ScalarPcpp, xs: &[u64]) -> u64 {
    let kernel = Kernel::new(v);
    let full = v.num_outcomes() as u64;
    let floor = AtomicU64::new(0);
    xs.par_iter()
        .map(|&x| {
            let b = kernel.best(x, full, &floor);
            floor.fetch_max(b, Ordering::Relaxed);
            b
        })
        .max()
        .unwrap_or(0)
}

/// Whether every input in `xs` has some proof accepted on all outcomes.
pub(super) fn all_fully_accepted(v: &ScalarPcpp, xs: &[u64]) -> bool {
    let kernel = Kernel::new(v);
    let full = v.num_outcomes() as u64;
    xs.par_iter()
        .all(|&x| kernel.best(x, full, &AtomicU64::new(0)) == full)
}
