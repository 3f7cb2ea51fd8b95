//! q-CSP instances over a finite alphabet, assignments, and the exact value
//! function: the fraction of constraints (counted with multiplicity) that an
//! assignment satisfies.

use std::collections::BTreeSet;
use std::fmt;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::budget::{space_size, Budget};
use crate::error::{Error, Result};
use crate::rational::{ratio, Rational};
use crate::text::Lines;

/// Alphabet symbols are `0..alphabet_size`.
pub type Symbol = u32;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Assignment(Vec<Symbol>);

impl Assignment {
    pub fn new(symbols: Vec<Symbol>) -> Self {
        Assignment(symbols)
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> Symbol {
        self.0[i]
    }

    pub fn with(&self, i: usize, s: Symbol) -> Assignment {
        let mut out = self.clone();
        out.0[i] = s;
        out
    }

    /// Number of coordinates where the two assignments differ.
    pub fn diff_count(&self, other: &Assignment) -> usize {
        if self.len() != other.len() {
            return usize::MAX;
        }
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }

    pub fn into_inner(self) -> Vec<Symbol> {
        self.0
    }
}

impl From<Vec<Symbol>> for Assignment {
    fn from(v: Vec<Symbol>) -> Self {
        Assignment(v)
    }
}

impl fmt::Debug for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|s| s.to_string()).collect();
        f.write_str(&parts.join(" "))
    }
}

/// A predicate evaluated by code rather than by table lookup. Receives the
/// symbols of the constraint's variables, in `var_indices` order.
pub trait StructuredPredicate: Send + Sync + fmt::Debug {
    fn accepts(&self, tuple: &[Symbol]) -> bool;
}

#[derive(Clone)]
pub enum Predicate {
    /// Explicit set of accepted tuples.
    Table(BTreeSet<Vec<Symbol>>),
    Structured(Arc<dyn StructuredPredicate>),
}

impl PartialEq for Predicate {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Predicate::Table(a), Predicate::Table(b)) => a == b,
            (Predicate::Structured(a), Predicate::Structured(b)) => {
                std::ptr::eq(Arc::as_ptr(a) as *const (), Arc::as_ptr(b) as *const ())
            }
            _ => false,
        }
    }
}

impl fmt::Debug for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::Table(t) => f.debug_tuple("Table").field(t).finish(),
            Predicate::Structured(p) => f.debug_tuple("Structured").field(p).finish(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    vars: Vec<usize>,
    predicate: Predicate,
}

impl Constraint {
    pub fn table<I>(vars: Vec<usize>, accepted: I) -> Self
    where
        I: IntoIterator<Item = Vec<Symbol>>,
    {
        Constraint {
            vars,
            predicate: Predicate::Table(accepted.into_iter().collect()),
        }
    }

    pub fn structured(vars: Vec<usize>, predicate: Arc<dyn StructuredPredicate>) -> Self {
        Constraint {
            vars,
            predicate: Predicate::Structured(predicate),
        }
    }

    /// Table constraint accepting every tuple of `alphabet_size^arity`
    /// satisfying `f`.
    pub fn from_fn(vars: Vec<usize>, alphabet_size: Symbol, f: impl Fn(&[Symbol]) -> bool) -> Self {
        let arity = vars.len();
        let accepted = all_tuples(arity, alphabet_size).filter(|t| f(t));
        Constraint::table(vars, accepted.collect::<Vec<_>>())
    }

    pub fn vars(&self) -> &[usize] {
        &self.vars
    }

    pub fn arity(&self) -> usize {
        self.vars.len()
    }

    pub fn predicate(&self) -> &Predicate {
        &self.predicate
    }

    pub fn accepts(&self, tuple: &[Symbol]) -> bool {
        match &self.predicate {
            Predicate::Table(set) => set.contains(tuple),
            Predicate::Structured(p) => p.accepts(tuple),
        }
    }

    fn eval_on(&self, symbols: &[Symbol], buf: &mut Vec<Symbol>) -> bool {
        buf.clear();
        buf.extend(self.vars.iter().map(|&v| symbols[v]));
        self.accepts(buf)
    }
}

/// Every tuple of the given arity over `0..alphabet_size`, lexicographically.
pub fn all_tuples(arity: usize, alphabet_size: Symbol) -> impl Iterator<Item = Vec<Symbol>> {
    let total = space_size(alphabet_size as u64, arity);
    LexIter::new(arity, alphabet_size, total)
}

/// A q-CSP instance. Constraints form a multiset: duplicates are kept and
/// each copy counts once in the value.
#[derive(Clone, Debug, PartialEq)]
pub struct CspInstance {
    num_vars: usize,
    alphabet_size: Symbol,
    constraints: Vec<Constraint>,
}

impl CspInstance {
    pub fn new(num_vars: usize, alphabet_size: Symbol, constraints: Vec<Constraint>) -> Result<Self> {
        if num_vars == 0 {
            return Err(Error::InvalidInstance("instance needs at least one variable".into()));
        }
        if alphabet_size == 0 {
            return Err(Error::InvalidInstance("alphabet must be non-empty".into()));
        }
        if constraints.is_empty() {
            return Err(Error::InvalidInstance("constraint list is empty".into()));
        }
        for (ci, c) in constraints.iter().enumerate() {
            if c.vars.is_empty() {
                return Err(Error::InvalidInstance(format!("constraint {ci} has arity 0")));
            }
            for (k, &v) in c.vars.iter().enumerate() {
                if v >= num_vars {
                    return Err(Error::InvalidInstance(format!(
                        "constraint {ci}: variable {v} out of range (num_vars {num_vars})"
                    )));
                }
                if c.vars[..k].contains(&v) {
                    return Err(Error::InvalidInstance(format!(
                        "constraint {ci}: variable {v} repeated"
                    )));
                }
            }
            if let Predicate::Table(set) = &c.predicate {
                for t in set {
                    if t.len() != c.arity() {
                        return Err(Error::InvalidInstance(format!(
                            "constraint {ci}: accepted tuple {t:?} has length {}, arity is {}",
                            t.len(),
                            c.arity()
                        )));
                    }
                    if let Some(s) = t.iter().find(|&&s| s >= alphabet_size) {
                        return Err(Error::InvalidInstance(format!(
                            "constraint {ci}: symbol {s} outside alphabet of size {alphabet_size}"
                        )));
                    }
                }
            }
        }
        Ok(CspInstance {
            num_vars,
            alphabet_size,
            constraints,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn alphabet_size(&self) -> Symbol {
        self.alphabet_size
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn max_arity(&self) -> usize {
        self.constraints.iter().map(Constraint::arity).max().unwrap_or(0)
    }

    /// Copy of the instance with one more constraint appended.
    pub fn with_constraint(&self, c: Constraint) -> Result<Self> {
        let mut cs = self.constraints.clone();
        cs.push(c);
        CspInstance::new(self.num_vars, self.alphabet_size, cs)
    }

    pub fn check_assignment(&self, a: &Assignment) -> Result<()> {
        if a.len() != self.num_vars {
            return Err(Error::MalformedAssignment(format!(
                "length {} but instance has {} variables",
                a.len(),
                self.num_vars
            )));
        }
        if let Some((i, s)) = a.0.iter().enumerate().find(|(_, &s)| s >= self.alphabet_size) {
            return Err(Error::MalformedAssignment(format!(
                "variable {i} has symbol {s}, alphabet size is {}",
                self.alphabet_size
            )));
        }
        Ok(())
    }

    pub fn eval_constraint(&self, idx: usize, a: &Assignment) -> Result<bool> {
        self.check_assignment(a)?;
        let c = self.constraints.get(idx).ok_or(Error::OutOfRange {
            what: "constraint",
            index: idx,
            limit: self.constraints.len(),
        })?;
        Ok(c.eval_on(&a.0, &mut Vec::with_capacity(c.arity())))
    }

    /// Number of satisfied constraints, counted with multiplicity.
    pub fn satisfied_count(&self, a: &Assignment) -> Result<usize> {
        self.check_assignment(a)?;
        Ok(self.count_satisfied(&a.0))
    }

    /// Unchecked counterpart of [`satisfied_count`](Self::satisfied_count)
    /// for callers that already validated `symbols`.
    pub(crate) fn count_satisfied(&self, symbols: &[Symbol]) -> usize {
        let mut buf = Vec::with_capacity(self.max_arity());
        self.constraints
            .iter()
            .filter(|c| c.eval_on(symbols, &mut buf))
            .count()
    }

    pub fn value(&self, a: &Assignment) -> Result<Rational> {
        let sat = self.satisfied_count(a)?;
        Ok(ratio(sat as u64, self.constraints.len() as u64))
    }

    pub fn is_solution(&self, a: &Assignment) -> Result<bool> {
        Ok(self.satisfied_count(a)? == self.constraints.len())
    }

    /// `alphabet_size^num_vars`, saturating.
    pub fn state_space_size(&self) -> u128 {
        space_size(self.alphabet_size as u64, self.num_vars)
    }

    /// All assignments in lexicographic order (variable 0 most significant).
    pub fn enumerate_assignments(&self, budget: &Budget) -> Result<Assignments> {
        let total = self.state_space_size();
        budget.check_states("assignment enumeration", total)?;
        Ok(Assignments(LexIter::new(self.num_vars, self.alphabet_size, total)))
    }

    /// Text form; see the crate README for the grammar. Structured
    /// constraints cannot be written as tables and are rejected.
    pub fn serialize(&self) -> Result<String> {
        let mut out = String::new();
        writeln!(
            out,
            "csp {} {} {}",
            self.num_vars,
            self.alphabet_size,
            self.constraints.len()
        )
        .unwrap();
        for (ci, c) in self.constraints.iter().enumerate() {
            let Predicate::Table(set) = &c.predicate else {
                return Err(Error::Unsupported(format!(
                    "constraint {ci} is structured; serialize its owning system instead"
                )));
            };
            let vars: Vec<String> = c.vars.iter().map(|v| v.to_string()).collect();
            writeln!(out, "con {} {} {}", c.arity(), vars.join(" "), set.len()).unwrap();
            for t in set {
                let syms: Vec<String> = t.iter().map(|s| s.to_string()).collect();
                writeln!(out, "acc {}", syms.join(" ")).unwrap();
            }
        }
        Ok(out)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = Lines::new(text);
        let inst = parse_instance(&mut lines)?;
        lines.expect_end()?;
        Ok(inst)
    }
}

/// Header line `csp <num_vars> <alphabet_size> <num_constraints>`.
pub(crate) struct Header {
    pub line: usize,
    pub num_vars: usize,
    pub alphabet_size: Symbol,
    pub num_constraints: usize,
}

pub(crate) fn parse_header(lines: &mut Lines<'_>) -> Result<Header> {
    let head = lines.next_line("`csp` header")?;
    head.expect_keyword("csp")?;
    head.expect_len(4)?;
    Ok(Header {
        line: head.no,
        num_vars: head.field(1, "num_vars")?,
        alphabet_size: head.field(2, "alphabet_size")?,
        num_constraints: head.field(3, "num_constraints")?,
    })
}

pub(crate) fn parse_instance(lines: &mut Lines<'_>) -> Result<CspInstance> {
    let h = parse_header(lines)?;
    parse_table_body(lines, &h)
}

pub(crate) fn parse_table_body(lines: &mut Lines<'_>, h: &Header) -> Result<CspInstance> {
    if h.num_constraints == 0 {
        return Err(Error::parse(h.line, "instance must have at least one constraint"));
    }
    let mut constraints = Vec::with_capacity(h.num_constraints);
    for _ in 0..h.num_constraints {
        let con = lines.next_line("`con` line")?;
        if con.keyword() == "structured" {
            return Err(con.err("structured reference needs a system loader"));
        }
        con.expect_keyword("con")?;
        let arity: usize = con.field(1, "arity")?;
        if arity == 0 {
            return Err(con.err("arity must be positive"));
        }
        con.expect_len(arity + 3)?;
        let vars: Vec<usize> = (0..arity)
            .map(|k| con.field(2 + k, "variable"))
            .collect::<Result<_>>()?;
        for (k, &v) in vars.iter().enumerate() {
            if v >= h.num_vars {
                return Err(con.err(format!(
                    "variable index {v} out of range (num_vars {})",
                    h.num_vars
                )));
            }
            if vars[..k].contains(&v) {
                return Err(con.err(format!("variable index {v} repeated")));
            }
        }
        let num_acc: usize = con.field(arity + 2, "num_accepted")?;
        let mut accepted = BTreeSet::new();
        for _ in 0..num_acc {
            let acc = lines.next_line("`acc` line")?;
            acc.expect_keyword("acc")?;
            acc.expect_len(arity + 1)?;
            let t: Vec<Symbol> = acc.fields_from(1, "symbol")?;
            if let Some(s) = t.iter().find(|&&s| s >= h.alphabet_size) {
                return Err(acc.err(format!(
                    "symbol {s} outside alphabet of size {}",
                    h.alphabet_size
                )));
            }
            if !accepted.insert(t) {
                return Err(acc.err("duplicate accepted tuple"));
            }
        }
        constraints.push(Constraint {
            vars,
            predicate: Predicate::Table(accepted),
        });
    }
    CspInstance::new(h.num_vars, h.alphabet_size, constraints)
        .map_err(|e| Error::parse(h.line, e.to_string()))
}

/// Iterator over all assignments of an instance; see
/// [`CspInstance::enumerate_assignments`].
pub struct Assignments(LexIter);

impl Iterator for Assignments {
    type Item = Assignment;

    fn next(&mut self) -> Option<Assignment> {
        self.0.next().map(Assignment)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        self.0.size_hint()
    }
}

struct LexIter {
    current: Vec<Symbol>,
    base: Symbol,
    remaining: u128,
}

impl LexIter {
    fn new(len: usize, base: Symbol, total: u128) -> Self {
        LexIter {
            current: vec![0; len],
            base,
            remaining: if base == 0 { 0 } else { total },
        }
    }
}

impl Iterator for LexIter {
    type Item = Vec<Symbol>;

    fn next(&mut self) -> Option<Vec<Symbol>> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let out = self.current.clone();
        for s in self.current.iter_mut().rev() {
            *s += 1;
            if *s < self.base {
                break;
            }
            *s = 0;
        }
        Some(out)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = usize::try_from(self.remaining).unwrap_or(usize::MAX);
        (n, usize::try_from(self.remaining).ok())
    }
}
