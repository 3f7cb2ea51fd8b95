//! PCPP verifiers as explicit randomness-indexed query tables.
//!
//! A verifier on input length `n` and proof length `m` tosses `r` coins; for
//! each coin outcome `omega` it reads the positions `I_omega` of `x ∘ pi`
//! (input positions `0..n`, proof positions `n..n+m`) and applies an accept
//! table to the bits read. Queries are non-adaptive. Acceptance
//! probabilities are exact counts over all `2^r` outcomes.

mod format;
mod kernel;

use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::bits::BitString;
use crate::budget::{pow2, Budget};
use crate::error::{Error, Result};
use crate::rational::{self, ratio, Rational};

/// Largest randomness length a verifier may have.
pub const MAX_RANDOMNESS: usize = 24;
/// Accept tables hold `2^q` bits per outcome; this caps `r + q`.
pub const MAX_TABLE_LOG2: usize = 28;
/// Largest truth-table circuit.
pub const MAX_TRUTH_TABLE_INPUTS: usize = 24;

/// Proximity parameter used when none is configured.
pub fn default_delta() -> Rational {
    ratio(1, 4)
}

type EvalFn = dyn Fn(&BitString) -> bool + Send + Sync;

#[derive(Clone)]
enum Evaluator {
    /// Entry `i` is the output on the input whose little-endian value is `i`.
    Table(Arc<Vec<bool>>),
    Func(Arc<EvalFn>),
}

/// A Boolean function `{0,1}^n -> {0,1}`.
#[derive(Clone)]
pub struct Circuit {
    input_len: usize,
    eval: Evaluator,
    solutions: Arc<OnceLock<Vec<BitString>>>,
}

impl fmt::Debug for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.eval {
            Evaluator::Table(_) => "table",
            Evaluator::Func(_) => "fn",
        };
        write!(f, "Circuit({} inputs, {kind})", self.input_len)
    }
}

impl Circuit {
    pub fn from_truth_table(input_len: usize, table: Vec<bool>) -> Result<Self> {
        if input_len > MAX_TRUTH_TABLE_INPUTS {
            return Err(Error::Precondition(format!(
                "truth tables are limited to {MAX_TRUTH_TABLE_INPUTS} inputs"
            )));
        }
        if table.len() != 1 << input_len {
            return Err(Error::LengthMismatch {
                what: "truth table",
                expected: 1 << input_len,
                got: table.len(),
            });
        }
        Ok(Circuit {
            input_len,
            eval: Evaluator::Table(Arc::new(table)),
            solutions: Arc::default(),
        })
    }

    pub fn from_fn(input_len: usize, f: impl Fn(&BitString) -> bool + Send + Sync + 'static) -> Self {
        Circuit {
            input_len,
            eval: Evaluator::Func(Arc::new(f)),
            solutions: Arc::default(),
        }
    }

    /// Conjunction of all `n` inputs.
    pub fn and(n: usize) -> Self {
        Circuit::from_fn(n, |x| x.iter().all(|b| b))
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    /// Panics if `x` has the wrong length.
    pub fn eval(&self, x: &BitString) -> bool {
        assert_eq!(x.len(), self.input_len, "circuit input length");
        match &self.eval {
            Evaluator::Table(t) => t[x.to_u64() as usize],
            Evaluator::Func(f) => f(x),
        }
    }

    /// Output on the input whose little-endian value is `x`.
    pub fn eval_index(&self, x: u64) -> bool {
        match &self.eval {
            Evaluator::Table(t) => t[x as usize],
            Evaluator::Func(f) => f(&BitString::from_u64(x, self.input_len)),
        }
    }

    pub fn truth_table(&self, budget: &Budget) -> Result<Vec<bool>> {
        if let Evaluator::Table(t) = &self.eval {
            return Ok(t.as_ref().clone());
        }
        budget.check_states("circuit truth table", pow2(self.input_len))?;
        Ok((0..1u64 << self.input_len).map(|i| self.eval_index(i)).collect())
    }

    /// All satisfying inputs in increasing little-endian order. Cached after
    /// the first successful call.
    pub fn solutions(&self, budget: &Budget) -> Result<&[BitString]> {
        if let Some(s) = self.solutions.get() {
            return Ok(s);
        }
        budget.check_states("circuit solution enumeration", pow2(self.input_len))?;
        let sols: Vec<BitString> = (0..1u64 << self.input_len)
            .filter(|&i| self.eval_index(i))
            .map(|i| BitString::from_u64(i, self.input_len))
            .collect();
        Ok(self.solutions.get_or_init(|| sols))
    }
}

/// `2^arity` accept decisions; bit `b` is the decision for the queried tuple
/// whose little-endian value is `b`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct AcceptTable {
    arity: usize,
    words: Vec<u64>,
}

impl AcceptTable {
    pub fn from_fn(arity: usize, f: impl Fn(u64) -> bool) -> Self {
        let len = 1u64 << arity;
        let mut words = vec![0u64; (len as usize).div_ceil(64)];
        for b in 0..len {
            if f(b) {
                words[(b / 64) as usize] |= 1 << (b % 64);
            }
        }
        AcceptTable { arity, words }
    }

    pub fn constant(arity: usize, accept: bool) -> Self {
        AcceptTable::from_fn(arity, |_| accept)
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    #[inline]
    pub fn accepts(&self, tuple: u64) -> bool {
        (self.words[(tuple / 64) as usize] >> (tuple % 64)) & 1 == 1
    }

    /// Accept decision for a tuple of bits (`bits[l]` is slot `l`).
    pub fn accepts_bits(&self, bits: impl IntoIterator<Item = bool>) -> bool {
        let idx = bits
            .into_iter()
            .enumerate()
            .fold(0u64, |acc, (l, b)| acc | ((b as u64) << l));
        self.accepts(idx)
    }
}

pub type HonestProofFn = dyn Fn(&BitString) -> BitString + Send + Sync;

#[derive(Clone)]
pub struct ScalarPcpp {
    input_len: usize,
    proof_len: usize,
    randomness: usize,
    queries: usize,
    query_map: Vec<Vec<usize>>,
    predicates: Vec<AcceptTable>,
    honest_proof: Option<Arc<HonestProofFn>>,
    declared_delta: Rational,
    declared_kappa: Rational,
}

impl fmt::Debug for ScalarPcpp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarPcpp")
            .field("n", &self.input_len)
            .field("m", &self.proof_len)
            .field("r", &self.randomness)
            .field("q", &self.queries)
            .field("honest_proof", &self.honest_proof.is_some())
            .field("delta", &self.declared_delta.to_string())
            .field("kappa", &self.declared_kappa.to_string())
            .finish()
    }
}

impl ScalarPcpp {
    /// Verifier whose query tuples consist of distinct positions.
    pub fn new(
        input_len: usize,
        proof_len: usize,
        query_map: Vec<Vec<usize>>,
        predicates: Vec<AcceptTable>,
    ) -> Result<Self> {
        for (omega, tuple) in query_map.iter().enumerate() {
            for (l, p) in tuple.iter().enumerate() {
                if tuple[..l].contains(p) {
                    return Err(Error::Precondition(format!(
                        "omega {omega}: position {p} queried twice"
                    )));
                }
            }
        }
        ScalarPcpp::with_repeats(input_len, proof_len, query_map, predicates)
    }

    /// Like [`new`](Self::new) but query tuples may repeat positions, as
    /// happens when columns are sampled with replacement.
    pub fn with_repeats(
        input_len: usize,
        proof_len: usize,
        query_map: Vec<Vec<usize>>,
        predicates: Vec<AcceptTable>,
    ) -> Result<Self> {
        let outcomes = query_map.len();
        if outcomes == 0 || !outcomes.is_power_of_two() {
            return Err(Error::Precondition(format!(
                "query map needs 2^r entries, got {outcomes}"
            )));
        }
        let randomness = outcomes.trailing_zeros() as usize;
        if randomness > MAX_RANDOMNESS {
            return Err(Error::Precondition(format!(
                "randomness {randomness} exceeds {MAX_RANDOMNESS}"
            )));
        }
        if predicates.len() != outcomes {
            return Err(Error::LengthMismatch {
                what: "predicate map",
                expected: outcomes,
                got: predicates.len(),
            });
        }
        let queries = query_map[0].len();
        if queries + randomness > MAX_TABLE_LOG2 {
            return Err(Error::BudgetExceeded {
                what: "accept tables",
                size: pow2(queries + randomness),
                limit: 1 << MAX_TABLE_LOG2,
            });
        }
        let total = input_len + proof_len;
        for (omega, (tuple, pred)) in query_map.iter().zip(&predicates).enumerate() {
            if tuple.len() != queries {
                return Err(Error::Precondition(format!(
                    "omega {omega}: {} queries, expected {queries}",
                    tuple.len()
                )));
            }
            if let Some(p) = tuple.iter().find(|&&p| p >= total) {
                return Err(Error::OutOfRange {
                    what: "query position",
                    index: *p,
                    limit: total,
                });
            }
            if pred.arity() != queries {
                return Err(Error::Precondition(format!(
                    "omega {omega}: accept table arity {} differs from q = {queries}",
                    pred.arity()
                )));
            }
        }
        Ok(ScalarPcpp {
            input_len,
            proof_len,
            randomness,
            queries,
            query_map,
            predicates,
            honest_proof: None,
            declared_delta: default_delta(),
            declared_kappa: rational::from_int(1),
        })
    }

    pub fn with_honest_proof(
        mut self,
        f: impl Fn(&BitString) -> BitString + Send + Sync + 'static,
    ) -> Self {
        self.honest_proof = Some(Arc::new(f));
        self
    }

    pub fn with_declared(mut self, delta: Rational, kappa: Rational) -> Self {
        self.declared_delta = delta;
        self.declared_kappa = kappa;
        self
    }

    /// Copy with the accept table of one outcome replaced.
    pub fn with_predicate(mut self, omega: usize, table: AcceptTable) -> Result<Self> {
        if omega >= self.predicates.len() {
            return Err(Error::OutOfRange {
                what: "omega",
                index: omega,
                limit: self.predicates.len(),
            });
        }
        if table.arity() != self.queries {
            return Err(Error::Precondition("replacement table has the wrong arity".into()));
        }
        self.predicates[omega] = table;
        Ok(self)
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn proof_len(&self) -> usize {
        self.proof_len
    }

    pub fn randomness(&self) -> usize {
        self.randomness
    }

    pub fn queries(&self) -> usize {
        self.queries
    }

    pub fn num_outcomes(&self) -> usize {
        self.query_map.len()
    }

    pub fn query_map(&self) -> &[Vec<usize>] {
        &self.query_map
    }

    pub fn predicates(&self) -> &[AcceptTable] {
        &self.predicates
    }

    pub fn declared_delta(&self) -> &Rational {
        &self.declared_delta
    }

    pub fn declared_kappa(&self) -> &Rational {
        &self.declared_kappa
    }

    pub fn has_honest_proof(&self) -> bool {
        self.honest_proof.is_some()
    }

    pub fn honest_proof(&self, x: &BitString) -> Result<BitString> {
        let f = self.honest_proof.as_ref().ok_or(Error::MissingHonestProof)?;
        let pi = f(x);
        pi.check_len("honest proof", self.proof_len)?;
        Ok(pi)
    }

    /// Whether outcome `omega` accepts on `bit(p)` for each queried position.
    #[inline]
    pub fn accepts_with(&self, omega: usize, bit: impl Fn(usize) -> bool) -> bool {
        let idx = self.query_map[omega]
            .iter()
            .enumerate()
            .fold(0u64, |acc, (l, &p)| acc | ((bit(p) as u64) << l));
        self.predicates[omega].accepts(idx)
    }

    /// Number of accepting outcomes on `x ∘ pi`.
    pub fn accept_count(&self, x: &BitString, pi: &BitString) -> Result<usize> {
        x.check_len("input", self.input_len)?;
        pi.check_len("proof", self.proof_len)?;
        let n = self.input_len;
        let bit = |p: usize| if p < n { x.get(p) } else { pi.get(p - n) };
        Ok((0..self.num_outcomes())
            .filter(|&omega| self.accepts_with(omega, bit))
            .count())
    }

    pub fn accept_prob(&self, x: &BitString, pi: &BitString) -> Result<Rational> {
        let c = self.accept_count(x, pi)?;
        Ok(ratio(c as u64, self.num_outcomes() as u64))
    }

    pub fn serialize(&self) -> String {
        format::write_pcpp(self)
    }

    /// Parses a verifier file. Parsed verifiers have no honest proof.
    pub fn parse(text: &str) -> Result<Self> {
        format::parse_pcpp(text)
    }
}

pub use format::{parse_circuit, write_circuit};
pub(crate) use format::{parse_omega_line, parse_table, table_bits};

pub fn accept_prob(v: &ScalarPcpp, x: &BitString, pi: &BitString) -> Result<Rational> {
    v.accept_prob(x, pi)
}

/// Whether `x` is at relative distance at least `delta` from every solution
/// of `c`. Vacuously true when `c` has no solutions.
pub fn is_delta_far(c: &Circuit, x: &BitString, delta: &Rational, budget: &Budget) -> Result<bool> {
    x.check_len("input", c.input_len())?;
    let nearest = c.solutions(budget)?.iter().map(|w| w.hamming(x)).min();
    Ok(match nearest {
        None => true,
        Some(d) => ratio(d as u64, c.input_len() as u64) >= *delta,
    })
}

fn check_same_input(v: &ScalarPcpp, c: &Circuit) -> Result<()> {
    if v.input_len() != c.input_len() {
        return Err(Error::LengthMismatch {
            what: "circuit input vs verifier input",
            expected: v.input_len(),
            got: c.input_len(),
        });
    }
    Ok(())
}

/// Whether the honest proof makes the verifier accept every solution with
/// probability 1. Vacuously true for unsatisfiable circuits.
pub fn audit_completeness(v: &ScalarPcpp, c: &Circuit, budget: &Budget) -> Result<bool> {
    check_same_input(v, c)?;
    if v.honest_proof.is_none() {
        return Err(Error::MissingHonestProof);
    }
    for x in c.solutions(budget)? {
        let pi = v.honest_proof(x)?;
        if v.accept_count(x, &pi)? != v.num_outcomes() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Completeness without an honest proof generator: every solution must have
/// some proof accepted with probability 1, found by exhaustive search.
pub fn audit_completeness_exhaustive(v: &ScalarPcpp, c: &Circuit, budget: &Budget) -> Result<bool> {
    check_same_input(v, c)?;
    let xs: Vec<u64> = c.solutions(budget)?.iter().map(BitString::to_u64).collect();
    kernel::check_workload(v, budget)?;
    Ok(kernel::all_fully_accepted(v, &xs))
}

/// Exact soundness: the maximum acceptance probability over every
/// `delta`-far input and every proof. Zero when no input is `delta`-far.
pub fn audit_soundness(v: &ScalarPcpp, c: &Circuit, delta: &Rational, budget: &Budget) -> Result<Rational> {
    check_same_input(v, c)?;
    kernel::check_workload(v, budget)?;
    let far = kernel::far_inputs(c, delta, budget)?;
    let best = kernel::max_acceptance(v, &far);
    Ok(ratio(best, v.num_outcomes() as u64))
}

/// Whether all verifiers share `(n, m, r, q)` and query identical positions
/// for every outcome. Predicates may differ.
pub fn check_parallelizable(vs: &[ScalarPcpp]) -> bool {
    let Some(first) = vs.first() else {
        return false;
    };
    vs.iter().all(|v| {
        v.input_len == first.input_len
            && v.proof_len == first.proof_len
            && v.randomness == first.randomness
            && v.queries == first.queries
            && v.query_map == first.query_map
    })
}

/// Soundness guaranteed by [`build_proximity_pcpp`] with `k` samples on
/// inputs of length `n`: `(1 - ceil(delta * n) / n)^k`.
pub fn proximity_soundness_bound(n: usize, k: usize, delta: &Rational) -> Rational {
    let far = rational::ceil_times(delta, n).min(n as u64);
    let miss = ratio(n as u64 - far, n as u64);
    rational::pow(&miss, k as u32)
}

/// Spot-check verifier for a circuit on `n = 2^j` inputs.
///
/// The proof is a claimed solution `w` (`m = n`). Each outcome picks `k`
/// input columns uniformly with replacement (`r = k * j`), reads the whole
/// proof and those columns (`q = n + k`), and accepts iff `c(w) = 1` and `x`
/// agrees with `w` on every sampled column. Query tuples list the proof
/// positions first, then the sampled columns. The honest proof of `x` is `x`.
pub fn build_proximity_pcpp(c: &Circuit, k: usize) -> Result<ScalarPcpp> {
    let n = c.input_len();
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::Precondition(format!(
            "input length must be a power of two, got {n}"
        )));
    }
    if k == 0 {
        return Err(Error::Precondition("need at least one repetition".into()));
    }
    let log_n = n.trailing_zeros() as usize;
    let r = k * log_n;
    let q = n + k;
    if r > MAX_RANDOMNESS || r + q > MAX_TABLE_LOG2 || n > MAX_TRUTH_TABLE_INPUTS {
        return Err(Error::BudgetExceeded {
            what: "proximity verifier tables",
            size: pow2(r + q),
            limit: 1 << MAX_TABLE_LOG2,
        });
    }
    let tt = c.truth_table(&Budget {
        states: 1 << MAX_TRUTH_TABLE_INPUTS,
        ..Budget::default()
    })?;
    let mask = (1usize << log_n) - 1;
    let mut query_map = Vec::with_capacity(1 << r);
    let mut predicates = Vec::with_capacity(1 << r);
    for omega in 0..1usize << r {
        let cols: Vec<usize> = (0..k).map(|l| (omega >> (l * log_n)) & mask).collect();
        let mut tuple: Vec<usize> = (n..2 * n).collect();
        tuple.extend(&cols);
        let table = AcceptTable::from_fn(q, |idx| {
            let w = idx & ((1u64 << n) - 1);
            let xs = idx >> n;
            tt[w as usize]
                && cols
                    .iter()
                    .enumerate()
                    .all(|(l, &col)| (xs >> l) & 1 == (w >> col) & 1)
        });
        query_map.push(tuple);
        predicates.push(table);
    }
    let delta = default_delta();
    let kappa = proximity_soundness_bound(n, k, &delta);
    Ok(ScalarPcpp::with_repeats(n, n, query_map, predicates)?
        .with_honest_proof(|x| x.clone())
        .with_declared(delta, kappa))
}
