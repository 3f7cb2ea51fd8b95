//! Reconfiguration over the configuration graph of a CSP instance.
//!
//! Two assignments are adjacent when they differ in exactly one coordinate.
//! A path's value is the minimum instance value over its steps, and the
//! reconfiguration value of a problem is the best such value over all paths
//! between its endpoints. Restricting to simple paths loses nothing, so the
//! searches below work over the finite state graph.

use std::collections::VecDeque;
use std::fmt;
use std::fmt::Write as _;

use crate::budget::{check, Budget, ORACLE_STATE_LIMIT};
use crate::csp::{self, Assignment, CspInstance, Symbol};
use crate::error::{Error, Result};
use crate::rational::{ratio, Rational};
use crate::text::{Line, Lines};

#[derive(Clone, Debug, PartialEq)]
pub struct ReconfigProblem {
    instance: CspInstance,
    ini: Assignment,
    tar: Assignment,
    relaxed: bool,
}

impl ReconfigProblem {
    /// Both endpoints must be solutions of `instance`.
    pub fn new(instance: CspInstance, ini: Assignment, tar: Assignment) -> Result<Self> {
        instance.check_assignment(&ini)?;
        instance.check_assignment(&tar)?;
        for (name, a) in [("initial", &ini), ("target", &tar)] {
            if !instance.is_solution(a)? {
                return Err(Error::Precondition(format!(
                    "{name} assignment {a} is not a solution"
                )));
            }
        }
        Ok(ReconfigProblem {
            instance,
            ini,
            tar,
            relaxed: false,
        })
    }

    /// Endpoints need only be well-formed. Used by oracle tests that sweep
    /// arbitrary endpoint pairs.
    pub fn relaxed(instance: CspInstance, ini: Assignment, tar: Assignment) -> Result<Self> {
        instance.check_assignment(&ini)?;
        instance.check_assignment(&tar)?;
        Ok(ReconfigProblem {
            instance,
            ini,
            tar,
            relaxed: true,
        })
    }

    /// Strict if both endpoints are solutions, relaxed otherwise.
    pub fn new_or_relaxed(instance: CspInstance, ini: Assignment, tar: Assignment) -> Result<Self> {
        instance.check_assignment(&ini)?;
        instance.check_assignment(&tar)?;
        let strict = instance.is_solution(&ini)? && instance.is_solution(&tar)?;
        Ok(ReconfigProblem {
            instance,
            ini,
            tar,
            relaxed: !strict,
        })
    }

    pub fn instance(&self) -> &CspInstance {
        &self.instance
    }

    pub fn ini(&self) -> &Assignment {
        &self.ini
    }

    pub fn tar(&self) -> &Assignment {
        &self.tar
    }

    pub fn is_relaxed(&self) -> bool {
        self.relaxed
    }

    /// Same problem with the endpoints exchanged.
    pub fn swapped(&self) -> Self {
        ReconfigProblem {
            instance: self.instance.clone(),
            ini: self.tar.clone(),
            tar: self.ini.clone(),
            relaxed: self.relaxed,
        }
    }

    /// Instance text followed by `ini` and `tar` lines.
    pub fn serialize(&self) -> Result<String> {
        let mut out = self.instance.serialize()?;
        writeln!(out, "ini {}", self.ini).unwrap();
        writeln!(out, "tar {}", self.tar).unwrap();
        Ok(out)
    }

    /// Parses a problem file with table constraints. Problems whose
    /// endpoints are not solutions come back relaxed.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = Lines::new(text);
        let instance = csp::parse_instance(&mut lines)?;
        let (ini, tar) = parse_endpoints(&mut lines, &instance)?;
        lines.expect_end()?;
        ReconfigProblem::new_or_relaxed(instance, ini, tar)
    }
}

pub(crate) fn parse_endpoints(
    lines: &mut Lines<'_>,
    instance: &CspInstance,
) -> Result<(Assignment, Assignment)> {
    let mut read = |kw: &str| -> Result<Assignment> {
        let l = lines.next_line(&format!("`{kw}` line"))?;
        l.expect_keyword(kw)?;
        parse_assignment_line(&l, instance)
    };
    let ini = read("ini")?;
    let tar = read("tar")?;
    Ok((ini, tar))
}

fn parse_assignment_line(l: &Line<'_>, instance: &CspInstance) -> Result<Assignment> {
    l.expect_len(instance.num_vars() + 1)?;
    let a: Assignment = l.fields_from::<Symbol>(1, "symbol")?.into();
    instance
        .check_assignment(&a)
        .map_err(|e| l.err(e.to_string()))?;
    Ok(a)
}

/// A non-empty sequence of assignments.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReconfigPath {
    steps: Vec<Assignment>,
}

impl ReconfigPath {
    pub fn new(steps: Vec<Assignment>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::Precondition("a path needs at least one step".into()));
        }
        Ok(ReconfigPath { steps })
    }

    pub fn steps(&self) -> &[Assignment] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn first(&self) -> &Assignment {
        &self.steps[0]
    }

    pub fn last(&self) -> &Assignment {
        &self.steps[self.steps.len() - 1]
    }

    /// One `step <s_1> ... <s_n>` line per step.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for s in &self.steps {
            writeln!(out, "step {s}").unwrap();
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = Lines::new(text);
        let mut steps = Vec::new();
        while lines.peek_keyword().is_some() {
            let l = lines.next_line("`step` line")?;
            l.expect_keyword("step")?;
            steps.push(l.fields_from::<Symbol>(1, "symbol")?.into());
        }
        ReconfigPath::new(steps)
    }
}

/// Why a path failed verification.
#[derive(Clone, Debug, PartialEq)]
pub enum PathViolation {
    WrongStart,
    WrongEnd,
    Malformed { step: usize, reason: String },
    Jump { step: usize, changed: usize },
    LowValue { step: usize, value: Rational },
}

impl fmt::Display for PathViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathViolation::WrongStart => f.write_str("first step is not the initial assignment"),
            PathViolation::WrongEnd => f.write_str("last step is not the target assignment"),
            PathViolation::Malformed { step, reason } => write!(f, "step {step}: {reason}"),
            PathViolation::Jump { step, changed } => {
                write!(f, "step {step} changes {changed} coordinates")
            }
            PathViolation::LowValue { step, value } => {
                write!(f, "step {step} has value {value}, below threshold")
            }
        }
    }
}

/// Assignments at Hamming distance exactly one from `a`, coordinate by
/// coordinate, symbols ascending.
pub fn neighbors<'a>(
    instance: &'a CspInstance,
    a: &'a Assignment,
) -> Result<impl Iterator<Item = Assignment> + 'a> {
    instance.check_assignment(a)?;
    let sigma = instance.alphabet_size();
    Ok((0..a.len()).flat_map(move |i| {
        (0..sigma)
            .filter(move |&s| s != a.get(i))
            .map(move |s| a.with(i, s))
    }))
}

/// Checks endpoints, single-coordinate steps (equal consecutive steps are
/// allowed) and that every step has value at least `threshold`.
pub fn check_path(
    problem: &ReconfigProblem,
    path: &ReconfigPath,
    threshold: &Rational,
) -> std::result::Result<(), PathViolation> {
    let inst = &problem.instance;
    for (i, s) in path.steps.iter().enumerate() {
        if let Err(e) = inst.check_assignment(s) {
            return Err(PathViolation::Malformed {
                step: i,
                reason: e.to_string(),
            });
        }
    }
    if path.first() != &problem.ini {
        return Err(PathViolation::WrongStart);
    }
    if path.last() != &problem.tar {
        return Err(PathViolation::WrongEnd);
    }
    for (i, w) in path.steps.windows(2).enumerate() {
        let changed = w[0].diff_count(&w[1]);
        if changed > 1 {
            return Err(PathViolation::Jump { step: i + 1, changed });
        }
    }
    let total = inst.num_constraints() as u64;
    for (i, s) in path.steps.iter().enumerate() {
        let value = ratio(inst.count_satisfied(s.symbols()) as u64, total);
        if &value < threshold {
            return Err(PathViolation::LowValue { step: i, value });
        }
    }
    Ok(())
}

pub fn verify_path(problem: &ReconfigProblem, path: &ReconfigPath, threshold: &Rational) -> bool {
    check_path(problem, path, threshold).is_ok()
}

/// The instance's configuration graph with every state's satisfied count
/// precomputed. States are indexed lexicographically (variable 0 most
/// significant).
struct StateGraph {
    base: u64,
    weights: Vec<u64>,
    counts: Vec<u32>,
}

impl StateGraph {
    fn build(instance: &CspInstance, budget: &Budget) -> Result<Self> {
        let counts = instance
            .enumerate_assignments(budget)?
            .map(|a| instance.count_satisfied(a.symbols()) as u32)
            .collect();
        let base = instance.alphabet_size() as u64;
        let n = instance.num_vars();
        let mut weights = vec![1u64; n];
        for i in (0..n.saturating_sub(1)).rev() {
            weights[i] = weights[i + 1] * base;
        }
        Ok(StateGraph {
            base,
            weights,
            counts,
        })
    }

    fn index(&self, a: &Assignment) -> usize {
        a.symbols()
            .iter()
            .zip(&self.weights)
            .map(|(&s, &w)| s as u64 * w)
            .sum::<u64>() as usize
    }

    fn assignment(&self, mut idx: usize) -> Assignment {
        let mut out = Vec::with_capacity(self.weights.len());
        for &w in &self.weights {
            out.push((idx as u64 / w) as Symbol);
            idx = (idx as u64 % w) as usize;
        }
        out.into()
    }

    /// Neighbour indices in ascending order (= lexicographic order).
    fn neighbors_into(&self, idx: usize, out: &mut Vec<usize>) {
        out.clear();
        for &w in &self.weights {
            let digit = (idx as u64 / w) % self.base;
            let stem = idx as u64 - digit * w;
            for s in 0..self.base {
                if s != digit {
                    out.push((stem + s * w) as usize);
                }
            }
        }
        out.sort_unstable();
    }

    /// BFS from `from` through states with count >= `min_count`. Returns the
    /// shortest path to `to`, ties broken toward lexicographically smaller
    /// states.
    fn bfs(&self, from: usize, to: usize, min_count: u32) -> Option<Vec<usize>> {
        if self.counts[from] < min_count || self.counts[to] < min_count {
            return None;
        }
        let mut parent = vec![usize::MAX; self.counts.len()];
        parent[from] = from;
        let mut queue = VecDeque::from([from]);
        let mut nbrs = Vec::new();
        while let Some(u) = queue.pop_front() {
            if u == to {
                let mut path = vec![to];
                let mut cur = to;
                while cur != from {
                    cur = parent[cur];
                    path.push(cur);
                }
                path.reverse();
                return Some(path);
            }
            self.neighbors_into(u, &mut nbrs);
            for &w in &nbrs {
                if parent[w] == usize::MAX && self.counts[w] >= min_count {
                    parent[w] = u;
                    queue.push_back(w);
                }
            }
        }
        None
    }

    fn path(&self, idxs: Vec<usize>) -> ReconfigPath {
        ReconfigPath {
            steps: idxs.into_iter().map(|i| self.assignment(i)).collect(),
        }
    }

    /// Largest count `k` such that the endpoints are connected through
    /// states of count >= k, by binary search over the candidates.
    fn best_threshold(&self, from: usize, to: usize) -> u32 {
        let mut lo = 0u32; // always connected: the Hamming graph is connected
        let mut hi = self.counts[from].min(self.counts[to]);
        while lo < hi {
            let mid = lo + (hi - lo).div_ceil(2);
            if self.bfs(from, to, mid).is_some() {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        lo
    }
}

/// Shortest path through solutions only, if any.
pub fn exact_path(problem: &ReconfigProblem, budget: &Budget) -> Result<Option<ReconfigPath>> {
    let g = StateGraph::build(&problem.instance, budget)?;
    let full = problem.instance.num_constraints() as u32;
    Ok(g
        .bfs(g.index(&problem.ini), g.index(&problem.tar), full)
        .map(|p| g.path(p)))
}

/// Bottleneck value: the maximum over paths of the minimum step value.
pub fn reconfig_value(problem: &ReconfigProblem, budget: &Budget) -> Result<Rational> {
    Ok(bottleneck_path(problem, budget)?.0)
}

/// Bottleneck value together with a shortest path attaining it.
pub fn bottleneck_path(problem: &ReconfigProblem, budget: &Budget) -> Result<(Rational, ReconfigPath)> {
    let g = StateGraph::build(&problem.instance, budget)?;
    let (from, to) = (g.index(&problem.ini), g.index(&problem.tar));
    let k = g.best_threshold(from, to);
    let path = g
        .bfs(from, to, k)
        .expect("best threshold is attained by some path");
    let total = problem.instance.num_constraints() as u64;
    Ok((ratio(k as u64, total), g.path(path)))
}

/// Independent oracle for [`reconfig_value`]: widest-bottleneck relaxation
/// over the explicit configuration graph, iterated to a fixed point. Limited
/// to [`ORACLE_STATE_LIMIT`] states.
pub fn brute_force_reconfig_value(problem: &ReconfigProblem) -> Result<Rational> {
    let inst = &problem.instance;
    check("brute-force reconfiguration oracle", inst.state_space_size(), ORACLE_STATE_LIMIT)?;
    let states: Vec<Assignment> = inst
        .enumerate_assignments(&Budget {
            states: ORACLE_STATE_LIMIT,
            ..Budget::default()
        })?
        .collect();
    let lookup: std::collections::HashMap<&Assignment, usize> =
        states.iter().enumerate().map(|(i, a)| (a, i)).collect();
    let value: Vec<i64> = states
        .iter()
        .map(|a| inst.satisfied_count(a).map(|c| c as i64))
        .collect::<Result<_>>()?;
    let adjacency: Vec<Vec<usize>> = states
        .iter()
        .map(|a| {
            neighbors(inst, a)
                .map(|it| it.map(|b| lookup[&b]).collect())
        })
        .collect::<Result<_>>()?;

    let mut best = vec![-1i64; states.len()];
    let start = lookup[&problem.ini];
    best[start] = value[start];
    loop {
        let mut changed = false;
        for u in 0..states.len() {
            if best[u] < 0 {
                continue;
            }
            for &w in &adjacency[u] {
                let cand = best[u].min(value[w]);
                if cand > best[w] {
                    best[w] = cand;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let got = best[lookup[&problem.tar]];
    Ok(ratio(got as u64, inst.num_constraints() as u64))
}
