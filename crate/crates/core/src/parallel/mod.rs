//! Stacked verifiers and their reduction to a CSP with an indicator variable.
//!
//! `t` verifiers that share one query map are written into a table with `t`
//! rows. Column `j` holds the `t` bits at position `j` of every row, read as
//! a symbol of `{0,1}^t` whose bit `i` is row `i`. Input columns come first,
//! then proof columns. The reduced CSP has one extra variable `v` naming the
//! verifier currently in charge; values `t..2^t` make every constraint fail.

mod format;
mod km24;
#[cfg(test)]
mod tests;

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::bits::BitString;
use crate::budget::{space_size, Budget};
use crate::csp::{Assignment, Constraint, CspInstance, Predicate, StructuredPredicate, Symbol};
use crate::error::{Error, Result};
use crate::pcpp::{check_parallelizable, AcceptTable, Circuit, ScalarPcpp};
use crate::rational::{ratio, Rational};

pub use format::{
    load_problem, load_system, parse_problem_with, parse_system, reduced_problem_text, SystemFile,
};
pub use km24::{
    completeness_path, extract_assignment, km24_build, km24_circuit, Km24Instance, KM24_LAYERS,
};

/// Largest supported number of layers.
pub const MAX_LAYERS: usize = 16;

#[derive(Clone)]
enum Layers {
    /// `tables[i][omega]`: layer `i` reads only its own row.
    RowLocal(Vec<Vec<AcceptTable>>),
    Km24(Arc<km24::Checks>),
}

/// `t` verifiers over a shared column layout and query map.
#[derive(Clone)]
pub struct ParallelPcppSystem {
    t: usize,
    x_cols: usize,
    proof_cols: usize,
    randomness: usize,
    query_map: Vec<Vec<usize>>,
    layers: Layers,
    verifiers: Vec<ScalarPcpp>,
    circuits: Vec<Circuit>,
    declared_delta: Rational,
    declared_kappa: Rational,
}

impl fmt::Debug for ParallelPcppSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.layers {
            Layers::RowLocal(_) => "row-local",
            Layers::Km24(_) => "km24",
        };
        f.debug_struct("ParallelPcppSystem")
            .field("kind", &kind)
            .field("t", &self.t)
            .field("x_cols", &self.x_cols)
            .field("proof_cols", &self.proof_cols)
            .field("r", &self.randomness)
            .finish()
    }
}

/// Stacks parallelizable verifiers; layer `i` applies `vs[i]` to row `i`.
pub fn lift_scalars(vs: Vec<ScalarPcpp>) -> Result<ParallelPcppSystem> {
    if !check_parallelizable(&vs) {
        return Err(Error::Precondition(
            "verifiers are not parallelizable: shapes or query maps differ".into(),
        ));
    }
    if vs.len() > MAX_LAYERS {
        return Err(Error::Precondition(format!(
            "{} layers exceed the limit of {MAX_LAYERS}",
            vs.len()
        )));
    }
    let first = &vs[0];
    let kappa = vs.iter().map(|v| v.declared_kappa().clone()).max().unwrap();
    Ok(ParallelPcppSystem {
        t: vs.len(),
        x_cols: first.input_len(),
        proof_cols: first.proof_len(),
        randomness: first.randomness(),
        query_map: first.query_map().to_vec(),
        layers: Layers::RowLocal(vs.iter().map(|v| v.predicates().to_vec()).collect()),
        declared_delta: first.declared_delta().clone(),
        declared_kappa: kappa,
        verifiers: vs,
        circuits: Vec::new(),
    })
}

impl ParallelPcppSystem {
    /// Attaches one circuit per layer, for audits.
    pub fn with_circuits(mut self, circuits: Vec<Circuit>) -> Result<Self> {
        if circuits.len() != self.t {
            return Err(Error::LengthMismatch {
                what: "circuits",
                expected: self.t,
                got: circuits.len(),
            });
        }
        self.circuits = circuits;
        Ok(self)
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn x_cols(&self) -> usize {
        self.x_cols
    }

    pub fn proof_cols(&self) -> usize {
        self.proof_cols
    }

    pub fn num_cols(&self) -> usize {
        self.x_cols + self.proof_cols
    }

    pub fn randomness(&self) -> usize {
        self.randomness
    }

    pub fn num_outcomes(&self) -> usize {
        self.query_map.len()
    }

    /// Columns read per outcome, repeats included.
    pub fn queries(&self) -> usize {
        self.query_map[0].len()
    }

    pub fn query_map(&self) -> &[Vec<usize>] {
        &self.query_map
    }

    pub fn alphabet_size(&self) -> Symbol {
        1 << self.t
    }

    pub fn is_row_local(&self) -> bool {
        matches!(self.layers, Layers::RowLocal(_))
    }

    /// The stacked scalar verifiers of a row-local system.
    pub fn verifiers(&self) -> &[ScalarPcpp] {
        &self.verifiers
    }

    pub fn circuits(&self) -> &[Circuit] {
        &self.circuits
    }

    pub fn declared_delta(&self) -> &Rational {
        &self.declared_delta
    }

    pub fn declared_kappa(&self) -> &Rational {
        &self.declared_kappa
    }

    /// Whether layer `layer` accepts outcome `omega` given the symbols of the
    /// queried columns, in query-map order.
    pub fn layer_accepts(&self, omega: usize, layer: usize, values: &[Symbol]) -> bool {
        debug_assert!(layer < self.t);
        match &self.layers {
            Layers::RowLocal(tables) => {
                let idx = values
                    .iter()
                    .enumerate()
                    .fold(0u64, |acc, (l, &s)| acc | ((((s >> layer) & 1) as u64) << l));
                tables[layer][omega].accepts(idx)
            }
            Layers::Km24(checks) => checks.accepts(omega, layer, values),
        }
    }

    /// Honest proof row of layer `layer` for the rows currently in `psi`.
    pub fn honest_proof(&self, layer: usize, psi: &LayeredAssignment) -> Result<BitString> {
        self.check_psi(psi)?;
        self.check_layer(layer)?;
        match &self.layers {
            Layers::RowLocal(_) => self.verifiers[layer].honest_proof(&psi.x_row(layer)),
            Layers::Km24(_) => Ok(km24::honest_proof(psi, layer)),
        }
    }

    fn check_layer(&self, layer: usize) -> Result<()> {
        if layer >= self.t {
            return Err(Error::OutOfRange {
                what: "layer",
                index: layer,
                limit: self.t,
            });
        }
        Ok(())
    }

    fn check_psi(&self, psi: &LayeredAssignment) -> Result<()> {
        if psi.t != self.t || psi.x_cols != self.x_cols || psi.columns.len() != self.num_cols() {
            return Err(Error::MalformedAssignment(format!(
                "layered assignment shape (t {}, {} + {} columns) does not match the system (t {}, {} + {})",
                psi.t,
                psi.x_cols,
                psi.columns.len() - psi.x_cols,
                self.t,
                self.x_cols,
                self.proof_cols
            )));
        }
        Ok(())
    }

    fn accept_count_raw(&self, columns: &[Symbol], layer: usize, buf: &mut Vec<Symbol>) -> u64 {
        (0..self.num_outcomes())
            .filter(|&omega| {
                buf.clear();
                buf.extend(self.query_map[omega].iter().map(|&c| columns[c]));
                self.layer_accepts(omega, layer, buf)
            })
            .count() as u64
    }

    /// Number of outcomes whose layer-`layer` predicate accepts `psi`.
    pub fn accept_count(&self, psi: &LayeredAssignment, layer: usize) -> Result<u64> {
        self.check_psi(psi)?;
        self.check_layer(layer)?;
        Ok(self.accept_count_raw(&psi.columns, layer, &mut Vec::new()))
    }
}

/// Symbols for every column plus the indicator `v`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LayeredAssignment {
    t: usize,
    x_cols: usize,
    columns: Vec<Symbol>,
    v: Symbol,
}

impl LayeredAssignment {
    pub fn new(t: usize, x_cols: usize, columns: Vec<Symbol>, v: Symbol) -> Result<Self> {
        if t == 0 || t > MAX_LAYERS {
            return Err(Error::MalformedAssignment(format!("layer count {t} out of range")));
        }
        if x_cols > columns.len() {
            return Err(Error::MalformedAssignment(format!(
                "{x_cols} input columns but only {} columns",
                columns.len()
            )));
        }
        let limit = 1u64 << t;
        if let Some((j, &s)) = columns.iter().enumerate().find(|(_, &s)| s as u64 >= limit) {
            return Err(Error::MalformedAssignment(format!(
                "column {j} holds {s}, outside {{0,1}}^{t}"
            )));
        }
        if v as u64 >= limit {
            return Err(Error::MalformedAssignment(format!("indicator {v} outside [0, 2^{t})")));
        }
        Ok(LayeredAssignment {
            t,
            x_cols,
            columns,
            v,
        })
    }

    /// All-zero table shaped for `system`, with `v = 0`.
    pub fn zeros(system: &ParallelPcppSystem) -> Self {
        LayeredAssignment {
            t: system.t,
            x_cols: system.x_cols,
            columns: vec![0; system.num_cols()],
            v: 0,
        }
    }

    /// Reads the CSP assignment `[v, columns...]` of a reduced instance.
    pub fn from_assignment(system: &ParallelPcppSystem, a: &Assignment) -> Result<Self> {
        if a.len() != system.num_cols() + 1 {
            return Err(Error::LengthMismatch {
                what: "reduced assignment",
                expected: system.num_cols() + 1,
                got: a.len(),
            });
        }
        let s = a.symbols();
        LayeredAssignment::new(system.t, system.x_cols, s[1..].to_vec(), s[0])
    }

    pub fn to_assignment(&self) -> Assignment {
        let mut s = Vec::with_capacity(self.columns.len() + 1);
        s.push(self.v);
        s.extend_from_slice(&self.columns);
        Assignment::new(s)
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn x_cols(&self) -> usize {
        self.x_cols
    }

    pub fn proof_cols(&self) -> usize {
        self.columns.len() - self.x_cols
    }

    pub fn columns(&self) -> &[Symbol] {
        &self.columns
    }

    pub fn v(&self) -> Symbol {
        self.v
    }

    pub fn set_v(&mut self, v: Symbol) {
        assert!((v as u64) < 1u64 << self.t, "indicator out of range");
        self.v = v;
    }

    pub fn bit(&self, layer: usize, col: usize) -> bool {
        (self.columns[col] >> layer) & 1 == 1
    }

    pub fn set_bit(&mut self, layer: usize, col: usize, bit: bool) {
        assert!(layer < self.t, "layer out of range");
        let mask = 1 << layer;
        if bit {
            self.columns[col] |= mask;
        } else {
            self.columns[col] &= !mask;
        }
    }

    fn row(&self, layer: usize, cols: std::ops::Range<usize>) -> BitString {
        BitString::from_bits(cols.map(|c| self.bit(layer, c)).collect())
    }

    /// Input row of layer `layer`.
    pub fn x_row(&self, layer: usize) -> BitString {
        self.row(layer, 0..self.x_cols)
    }

    /// Proof row of layer `layer`.
    pub fn proof_row(&self, layer: usize) -> BitString {
        self.row(layer, self.x_cols..self.columns.len())
    }

    pub fn set_x_row(&mut self, layer: usize, row: &BitString) -> Result<()> {
        row.check_len("input row", self.x_cols)?;
        for (c, b) in row.iter().enumerate() {
            self.set_bit(layer, c, b);
        }
        Ok(())
    }

    pub fn set_proof_row(&mut self, layer: usize, row: &BitString) -> Result<()> {
        row.check_len("proof row", self.proof_cols())?;
        for (c, b) in row.iter().enumerate() {
            self.set_bit(layer, self.x_cols + c, b);
        }
        Ok(())
    }

    /// Number of CSP variables (columns and `v`) that differ.
    pub fn diff_count(&self, other: &LayeredAssignment) -> usize {
        let cols = self
            .columns
            .iter()
            .zip(&other.columns)
            .filter(|(a, b)| a != b)
            .count();
        cols + usize::from(self.v != other.v)
    }
}

/// Fraction of outcomes on which layer `i` accepts; `v` is ignored.
pub fn parallel_accept_prob(system: &ParallelPcppSystem, psi: &LayeredAssignment, i: usize) -> Result<Rational> {
    let c = system.accept_count(psi, i)?;
    Ok(ratio(c, system.num_outcomes() as u64))
}

/// Best acceptance probability over all layers.
pub fn parallel_value(system: &ParallelPcppSystem, psi: &LayeredAssignment) -> Result<Rational> {
    system.check_psi(psi)?;
    let best = (0..system.t)
        .map(|i| system.accept_count_raw(&psi.columns, i, &mut Vec::new()))
        .max()
        .unwrap_or(0);
    Ok(ratio(best, system.num_outcomes() as u64))
}

/// Reduced constraint for one outcome. Its variables are `v` followed by the
/// distinct queried columns (shifted by one); `slots[l]` locates query `l`.
struct ReducedConstraint {
    system: Arc<ParallelPcppSystem>,
    omega: usize,
    slots: Vec<usize>,
}

impl fmt::Debug for ReducedConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ReducedConstraint(omega {})", self.omega)
    }
}

impl StructuredPredicate for ReducedConstraint {
    fn accepts(&self, tuple: &[Symbol]) -> bool {
        let v = tuple[0] as usize;
        if v >= self.system.t {
            return false;
        }
        let values: Vec<Symbol> = self.slots.iter().map(|&s| tuple[1 + s]).collect();
        self.system.layer_accepts(self.omega, v, &values)
    }
}

/// The CSP whose variable 0 is `v` and whose variables `1..` are the
/// columns, with one structured constraint per outcome.
pub fn parallelize_to_csp(system: &Arc<ParallelPcppSystem>) -> CspInstance {
    let constraints = system
        .query_map
        .iter()
        .enumerate()
        .map(|(omega, tuple)| {
            let mut distinct: Vec<usize> = Vec::with_capacity(tuple.len());
            let slots = tuple
                .iter()
                .map(|&c| match distinct.iter().position(|&d| d == c) {
                    Some(s) => s,
                    None => {
                        distinct.push(c);
                        distinct.len() - 1
                    }
                })
                .collect();
            let vars = std::iter::once(0).chain(distinct.iter().map(|&c| c + 1)).collect();
            let pred = ReducedConstraint {
                system: Arc::clone(system),
                omega,
                slots,
            };
            Constraint::structured(vars, Arc::new(pred))
        })
        .collect();
    CspInstance::new(system.num_cols() + 1, system.alphabet_size(), constraints)
        .expect("reduced instance is well-formed by construction")
}

#[derive(PartialEq, Eq)]
struct Frontier {
    score: u64,
    state: u64,
}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .cmp(&other.score)
            .then_with(|| other.state.cmp(&self.state))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Widest path on the product graph `base^digits`, where neighbours differ
/// in one digit. Scores are indexed by state.
fn widest_path(base: u64, digits: usize, scores: &[u64], src: u64, dst: u64) -> u64 {
    let mut best = vec![None::<u64>; scores.len()];
    let mut done = vec![false; scores.len()];
    best[src as usize] = Some(scores[src as usize]);
    let mut heap = BinaryHeap::new();
    heap.push(Frontier {
        score: scores[src as usize],
        state: src,
    });
    while let Some(Frontier { score, state }) = heap.pop() {
        if done[state as usize] {
            continue;
        }
        done[state as usize] = true;
        if state == dst {
            return score;
        }
        let mut place = 1u64;
        for _ in 0..digits {
            let digit = (state / place) % base;
            for d in 0..base {
                if d == digit {
                    continue;
                }
                let nb = state - digit * place + d * place;
                let cand = score.min(scores[nb as usize]);
                if best[nb as usize].is_none_or(|b| cand > b) {
                    best[nb as usize] = Some(cand);
                    heap.push(Frontier {
                        score: cand,
                        state: nb,
                    });
                }
            }
            place *= base;
        }
    }
    unreachable!("the product graph is connected")
}

fn encode_columns(columns: &[Symbol], base: u64) -> u64 {
    columns
        .iter()
        .rev()
        .fold(0u64, |acc, &s| acc * base + s as u64)
}

fn decode_columns(mut state: u64, base: u64, len: usize) -> Vec<Symbol> {
    (0..len)
        .map(|_| {
            let s = (state % base) as Symbol;
            state /= base;
            s
        })
        .collect()
}

fn state_scores(
    system: &ParallelPcppSystem,
    budget: &Budget,
    what: &'static str,
    digits: usize,
    score: impl Fn(&[Symbol], &mut Vec<Symbol>) -> u64 + Sync,
) -> Result<Vec<u64>> {
    use rayon::prelude::*;
    let base = system.alphabet_size() as u64;
    budget.check_states(what, space_size(base, digits))?;
    let total = base.pow(digits as u32);
    Ok((0..total)
        .into_par_iter()
        .map_init(Vec::new, |buf, s| score(&decode_columns(s, base, digits), buf))
        .collect())
}

/// Reconfiguration value of the layered formulation with the indicator as
/// part of the state.
///
/// States are pairs `(psi, v)`; a step changes one column or `v`. A state
/// scores `parallel_accept_prob(psi, v)` when `v < t` and 0 otherwise. This
/// enumerates layered states directly through the layer predicates and a
/// widest-path search, without building the reduced CSP.
pub fn indicator_bottleneck_value(
    system: &ParallelPcppSystem,
    ini: &LayeredAssignment,
    tar: &LayeredAssignment,
    budget: &Budget,
) -> Result<Rational> {
    system.check_psi(ini)?;
    system.check_psi(tar)?;
    let cols = system.num_cols();
    let t = system.t;
    // Digit `cols` (most significant) is v.
    let scores = state_scores(system, budget, "layered state enumeration", cols + 1, |s, buf| {
        let v = s[cols] as usize;
        if v < t {
            system.accept_count_raw(&s[..cols], v, buf)
        } else {
            0
        }
    })?;
    let base = system.alphabet_size() as u64;
    let enc = |p: &LayeredAssignment| {
        let mut s = p.columns.clone();
        s.push(p.v);
        encode_columns(&s, base)
    };
    let best = widest_path(base, cols + 1, &scores, enc(ini), enc(tar));
    Ok(ratio(best, system.num_outcomes() as u64))
}

/// Reconfiguration value of the layered formulation without an indicator:
/// states are tables `psi`, scored by `parallel_value(psi)`.
///
/// Every path of the reduced CSP projects onto a path of this graph with no
/// smaller step values, so this bounds the reduced value from above.
pub fn parallel_bottleneck_value(
    system: &ParallelPcppSystem,
    ini: &LayeredAssignment,
    tar: &LayeredAssignment,
    budget: &Budget,
) -> Result<Rational> {
    system.check_psi(ini)?;
    system.check_psi(tar)?;
    let cols = system.num_cols();
    let scores = state_scores(system, budget, "layered state enumeration", cols, |s, buf| {
        (0..system.t)
            .map(|i| system.accept_count_raw(s, i, buf))
            .max()
            .unwrap_or(0)
    })?;
    let base = system.alphabet_size() as u64;
    let best = widest_path(
        base,
        cols,
        &scores,
        encode_columns(&ini.columns, base),
        encode_columns(&tar.columns, base),
    );
    Ok(ratio(best, system.num_outcomes() as u64))
}

/// Random row-local system with `t` in `{1, 2}`, at most four columns, at
/// most two coin flips and at most three queries per outcome.
pub fn random_micro_system<R: Rng>(rng: &mut R) -> ParallelPcppSystem {
    let t = rng.gen_range(1..=2);
    let total = rng.gen_range(1..=4);
    let x_cols = rng.gen_range(1..=total);
    let proof_cols = total - x_cols;
    let r = rng.gen_range(0..=2);
    let q = rng.gen_range(1..=total.min(3));
    let query_map: Vec<Vec<usize>> = (0..1 << r)
        .map(|_| rand::seq::index::sample(rng, total, q).into_vec())
        .collect();
    let vs = (0..t)
        .map(|_| {
            let bias = rng.gen_range(0.3..0.9);
            let preds = (0..1 << r)
                .map(|_| {
                    let bits: Vec<bool> = (0..1 << q).map(|_| rng.gen_bool(bias)).collect();
                    AcceptTable::from_fn(q, |b| bits[b as usize])
                })
                .collect();
            ScalarPcpp::new(x_cols, proof_cols, query_map.clone(), preds)
                .expect("micro verifier is well-formed")
        })
        .collect();
    lift_scalars(vs).expect("micro verifiers share a query map")
}

/// Uniformly random table and indicator for `system`.
pub fn random_layered_assignment<R: Rng>(system: &ParallelPcppSystem, rng: &mut R) -> LayeredAssignment {
    let a = system.alphabet_size();
    LayeredAssignment {
        t: system.t,
        x_cols: system.x_cols,
        columns: (0..system.num_cols()).map(|_| rng.gen_range(0..a)).collect(),
        v: rng.gen_range(0..a),
    }
}

fn symbol_width(alphabet: Symbol) -> Result<usize> {
    if alphabet < 2 || !alphabet.is_power_of_two() {
        return Err(Error::Unsupported(format!(
            "binarization needs a power-of-two alphabet of size at least 2, got {alphabet}"
        )));
    }
    Ok(alphabet.trailing_zeros() as usize)
}

/// Replaces each variable over `{0,1}^b` by `b` binary variables holding its
/// bits little-endian: variable `u` becomes `u*b .. u*b + b`.
pub fn binarize_csp(instance: &CspInstance) -> Result<CspInstance> {
    let b = symbol_width(instance.alphabet_size())?;
    let constraints = instance
        .constraints()
        .iter()
        .enumerate()
        .map(|(ci, c)| {
            let Predicate::Table(set) = c.predicate() else {
                return Err(Error::Unsupported(format!(
                    "constraint {ci} is structured and cannot be binarized"
                )));
            };
            let vars = c
                .vars()
                .iter()
                .flat_map(|&u| (0..b).map(move |i| u * b + i))
                .collect();
            let accepted = set.iter().map(|t| {
                t.iter()
                    .flat_map(|&s| (0..b).map(move |i| (s >> i) & 1))
                    .collect::<Vec<Symbol>>()
            });
            Ok(Constraint::table(vars, accepted.collect::<Vec<_>>()))
        })
        .collect::<Result<Vec<_>>>()?;
    CspInstance::new(instance.num_vars() * b, 2, constraints)
}

/// The binarized form of an assignment over `alphabet`.
pub fn binarize_assignment(a: &Assignment, alphabet: Symbol) -> Result<Assignment> {
    let b = symbol_width(alphabet)?;
    if let Some(&s) = a.symbols().iter().find(|&&s| s >= alphabet) {
        return Err(Error::MalformedAssignment(format!(
            "symbol {s} outside alphabet of size {alphabet}"
        )));
    }
    Ok(Assignment::new(
        a.symbols()
            .iter()
            .flat_map(|&s| (0..b).map(move |i| (s >> i) & 1))
            .collect(),
    ))
}
