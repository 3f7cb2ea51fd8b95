//! The acceptance battery: eight exhaustive checks at exact tolerances,
//! shared by the `acceptance` test target and the `suite` CLI command.
//!
//! Every check derives its instances from one seed through named streams,
//! so a run is reproducible from `(seed, criterion)`.

use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::Rng;

use crate::bits::BitString;
use crate::budget::Budget;
use crate::csp::Assignment;
use crate::ecc::{hadamard_code, min_distance};
use crate::error::Result;
use crate::gen::{random_problem, random_yes_source, RandomCspParams};
use crate::parallel::{
    completeness_path, extract_assignment, indicator_bottleneck_value, km24_build, parallel_accept_prob,
    parallel_bottleneck_value, parallelize_to_csp, random_layered_assignment, random_micro_system,
    Km24Instance, LayeredAssignment, ParallelPcppSystem,
};
use crate::pcpp::{audit_completeness, audit_soundness, build_proximity_pcpp, proximity_soundness_bound, Circuit};
use crate::rational::{from_int, ratio};
use crate::reconfig::{brute_force_reconfig_value, exact_path, reconfig_value, verify_path, ReconfigPath, ReconfigProblem};
use crate::rng::substream;

pub const DEFAULT_SEED: u64 = 20240501;

const MICRO_SYSTEMS: u64 = 60;
const ENGINE_INSTANCES: u64 = 120;
const KM24_SOURCES: u64 = 12;

/// Result of one criterion.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub limit: Duration,
}

impl Outcome {
    pub fn within_limit(&self) -> bool {
        self.elapsed < self.limit
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed && self.within_limit() { "PASS" } else { "FAIL" };
        write!(
            f,
            "[{verdict}] criterion {}: {} ({:.2}s / {}s) {}",
            self.id,
            self.name,
            self.elapsed.as_secs_f64(),
            self.limit.as_secs(),
            self.detail
        )
    }
}

pub struct Criterion {
    pub id: u8,
    pub name: &'static str,
    pub limit: Duration,
    check: fn(u64) -> Result<Verdict>,
}

/// `(passed, detail)`.
type Verdict = (bool, String);

impl Criterion {
    pub fn run(&self, seed: u64) -> Outcome {
        let start = Instant::now();
        let (passed, detail) = match (self.check)(seed) {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        Outcome {
            id: self.id,
            name: self.name,
            passed,
            detail,
            elapsed: start.elapsed(),
            limit: self.limit,
        }
    }
}

pub const CRITERIA: [Criterion; 8] = [
    Criterion {
        id: 1,
        name: "reduced CSP value equals layer acceptance probability",
        limit: Duration::from_secs(10),
        check: value_identity,
    },
    Criterion {
        id: 2,
        name: "reconfiguration values of reduced CSP and layered formulation agree",
        limit: Duration::from_secs(60),
        check: reconfig_agreement,
    },
    Criterion {
        id: 3,
        name: "reconfiguration engine agrees with brute-force oracle",
        limit: Duration::from_secs(30),
        check: engine_vs_oracle,
    },
    Criterion {
        id: 4,
        name: "Hadamard distance and unique decoding",
        limit: Duration::from_secs(10),
        check: ecc_suite,
    },
    Criterion {
        id: 5,
        name: "proximity PCPP completeness and soundness audits",
        limit: Duration::from_secs(60),
        check: pcpp_audits,
    },
    Criterion {
        id: 6,
        name: "four-layer completeness path verifies at threshold 1",
        limit: Duration::from_secs(120),
        check: km24_completeness,
    },
    Criterion {
        id: 7,
        name: "majority-vote extraction along value-1 paths",
        limit: Duration::from_secs(30),
        check: extraction,
    },
    Criterion {
        id: 8,
        name: "reduced instance structural parameters",
        limit: Duration::from_secs(1),
        check: structure,
    },
];

pub fn run_all(seed: u64) -> Vec<Outcome> {
    CRITERIA.iter().map(|c| c.run(seed)).collect()
}

/// The `i`-th micro system of the battery.
pub fn micro_system(seed: u64, i: u64) -> ParallelPcppSystem {
    random_micro_system(&mut substream(seed, "micro-system", i))
}

fn all_tables(system: &ParallelPcppSystem) -> impl Iterator<Item = LayeredAssignment> + '_ {
    crate::csp::all_tuples(system.num_cols(), system.alphabet_size())
        .map(|cols| LayeredAssignment::new(system.t(), system.x_cols(), cols, 0).expect("in range"))
}

fn value_identity(seed: u64) -> Result<Verdict> {
    let mut checks = 0u64;
    for i in 0..MICRO_SYSTEMS {
        let sys = Arc::new(micro_system(seed, i));
        let csp = parallelize_to_csp(&sys);
        for mut psi in all_tables(&sys) {
            for v in 0..sys.alphabet_size() {
                psi.set_v(v);
                let got = csp.value(&psi.to_assignment())?;
                let want = if (v as usize) < sys.t() {
                    parallel_accept_prob(&sys, &psi, v as usize)?
                } else {
                    ratio(0, 1)
                };
                if got != want {
                    return Ok((false, format!("system {i}, table {:?}, v = {v}: CSP {got} vs layer {want}", psi.columns())));
                }
                checks += 1;
            }
        }
    }
    Ok((true, format!("{MICRO_SYSTEMS} systems, {checks} (table, v) pairs")))
}

fn reconfig_agreement(seed: u64) -> Result<Verdict> {
    let budget = Budget::default();
    let mut pairs = 0;
    let mut strict_gaps = 0;
    for i in 0..MICRO_SYSTEMS {
        let sys = Arc::new(micro_system(seed, i));
        let csp = parallelize_to_csp(&sys);
        let mut rng = substream(seed, "micro-endpoints", i);
        for _ in 0..2 {
            let ini = random_layered_assignment(&sys, &mut rng);
            let tar = random_layered_assignment(&sys, &mut rng);
            let problem = ReconfigProblem::relaxed(csp.clone(), ini.to_assignment(), tar.to_assignment())?;
            let oracle = brute_force_reconfig_value(&problem)?;
            let layered = indicator_bottleneck_value(&sys, &ini, &tar, &budget)?;
            if oracle != layered {
                return Ok((false, format!("system {i}: reduced CSP {oracle} vs layered {layered}")));
            }
            let free = parallel_bottleneck_value(&sys, &ini, &tar, &budget)?;
            if oracle > free {
                return Ok((false, format!("system {i}: reduced CSP {oracle} exceeds indicator-free value {free}")));
            }
            strict_gaps += usize::from(oracle < free);
            pairs += 1;
        }
    }
    Ok((
        true,
        format!("{pairs} endpoint pairs; indicator-free value strictly larger on {strict_gaps}"),
    ))
}

fn engine_vs_oracle(seed: u64) -> Result<Verdict> {
    let budget = Budget::default();
    let mut yes = 0;
    for i in 0..ENGINE_INSTANCES {
        let mut rng = substream(seed, "engine-instance", i);
        let (alphabet_size, num_vars) = if rng.gen_bool(0.5) {
            (2, rng.gen_range(1..=6))
        } else {
            (3, rng.gen_range(1..=4))
        };
        let params = RandomCspParams {
            num_vars,
            alphabet_size,
            num_constraints: rng.gen_range(1..=5),
            max_arity: 3,
            density: rng.gen_range(0.3..0.8),
        };
        let p = random_problem(&mut rng, &params)?;
        let engine = reconfig_value(&p, &budget)?;
        let oracle = brute_force_reconfig_value(&p)?;
        if engine != oracle {
            return Ok((false, format!("instance {i}: engine {engine} vs oracle {oracle}")));
        }
        let has_path = exact_path(&p, &budget)?.is_some();
        if has_path != (engine == from_int(1)) {
            return Ok((false, format!("instance {i}: exact path {has_path} but value {engine}")));
        }
        yes += usize::from(has_path);
    }
    Ok((true, format!("{ENGINE_INSTANCES} instances, {yes} with value 1")))
}

/// Every word of length `len` and weight at most `w`.
fn error_patterns(len: usize, w: usize) -> Vec<BitString> {
    (0..1u64 << len)
        .filter(|e| e.count_ones() as usize <= w)
        .map(|e| BitString::from_u64(e, len))
        .collect()
}

fn ecc_suite(_seed: u64) -> Result<Verdict> {
    let mut decodes = 0;
    for k in 1..=4usize {
        let code = hadamard_code(k)?;
        let d = min_distance(&code);
        if d != 1 << (k - 1) {
            return Ok((false, format!("hadamard({k}): distance {d}")));
        }
        if k > 3 {
            continue;
        }
        let radius = (d - 1) / 2;
        let errors = error_patterns(code.block_len(), radius);
        for m in 0..1u64 << k {
            let msg = BitString::from_u64(m, k);
            let cw = code.encode(&msg)?;
            for e in &errors {
                let got = code.decode_nearest(&cw.xor(e))?;
                if got.message() != Some(&msg) {
                    return Ok((false, format!("hadamard({k}): message {msg} with error {e} decoded to {got:?}")));
                }
                decodes += 1;
            }
        }
    }
    Ok((true, format!("distances 1, 2, 4, 8; {decodes} corrupted words decoded")))
}

/// Random truth-table circuit on `n` inputs with at least one solution.
fn audit_circuit(seed: u64, n: usize, k: usize) -> Result<Circuit> {
    let mut rng = substream(seed, "audit-circuit", (n * 8 + k) as u64);
    let mut tt: Vec<bool> = (0..1usize << n).map(|_| rng.gen_bool(0.2)).collect();
    let planted = rng.gen_range(0..tt.len());
    tt[planted] = true;
    Circuit::from_truth_table(n, tt)
}

fn pcpp_audits(seed: u64) -> Result<Verdict> {
    let budget = Budget::default();
    let delta = ratio(1, 4);
    let mut rows = Vec::new();
    for n in [2usize, 4, 8] {
        for k in 1..=3usize {
            let c = audit_circuit(seed, n, k)?;
            let v = build_proximity_pcpp(&c, k)?;
            if !audit_completeness(&v, &c, &budget)? {
                return Ok((false, format!("n = {n}, k = {k}: completeness failed")));
            }
            let measured = audit_soundness(&v, &c, &delta, &budget)?;
            let bound = proximity_soundness_bound(n, k, &delta);
            if measured > bound {
                return Ok((false, format!("n = {n}, k = {k}: soundness {measured} exceeds {bound}")));
            }
            rows.push(format!("n{n}k{k}={measured}<={bound}"));
        }
    }
    Ok((true, rows.join(" ")))
}

struct Km24Case {
    source: ReconfigProblem,
    inst: Km24Instance,
    path: Vec<LayeredAssignment>,
}

fn km24_case(seed: u64, i: u64) -> Result<Km24Case> {
    let mut rng = substream(seed, "km24-source", i);
    let n = if i.is_multiple_of(2) { 2 } else { 3 };
    let (source, source_path) = random_yes_source(&mut rng, n)?;
    let inst = km24_build(&source, hadamard_code(n)?, 1)?;
    let path = completeness_path(&inst, &source_path)?;
    Ok(Km24Case { source, inst, path })
}

fn km24_completeness(seed: u64) -> Result<Verdict> {
    let mut total_steps = 0;
    for i in 0..KM24_SOURCES {
        let case = km24_case(seed, i)?;
        if let Some(s) = case.path.windows(2).position(|w| w[0].diff_count(&w[1]) != 1) {
            return Ok((false, format!("source {i}: step {} changes other than one variable", s + 1)));
        }
        let problem = case.inst.reduced_problem()?;
        let csp_path = ReconfigPath::new(case.path.iter().map(LayeredAssignment::to_assignment).collect())?;
        if !verify_path(&problem, &csp_path, &from_int(1)) {
            return Ok((false, format!("source {i}: lifted path fails verification")));
        }
        total_steps += case.path.len();
    }
    Ok((true, format!("{KM24_SOURCES} sources, {total_steps} lifted steps")))
}

fn as_assignment(y: &BitString) -> Assignment {
    Assignment::new(y.iter().map(u32::from).collect())
}

fn extraction(seed: u64) -> Result<Verdict> {
    let mut extracted = 0;
    let mut corrupted = 0;
    for i in 0..KM24_SOURCES {
        let case = km24_case(seed, i)?;
        let mut prev: Option<BitString> = None;
        for (s, psi) in case.path.iter().enumerate() {
            let Some(y) = extract_assignment(&case.inst, psi)? else {
                return Ok((false, format!("source {i}, step {s}: no extraction")));
            };
            if !case.source.instance().is_solution(&as_assignment(&y))? {
                return Ok((false, format!("source {i}, step {s}: extraction {y} is not a solution")));
            }
            if let Some(p) = &prev {
                if p.hamming(&y) > 1 {
                    return Ok((false, format!("source {i}, step {s}: extraction jumps from {p} to {y}")));
                }
            }
            prev = Some(y);
            extracted += 1;
        }

        let code = case.inst.code();
        let sigma = BitString::from_bits(case.source.ini().symbols().iter().map(|&s| s == 1).collect());
        let errors = error_patterns(code.block_len(), code.unique_radius());
        for v in 0..4u32 {
            for j in (0..4).filter(|&j| j != v as usize) {
                for e in &errors {
                    let mut psi = case.inst.psi_ini().clone();
                    psi.set_v(v);
                    psi.set_x_row(j, &psi.x_row(j).xor(e))?;
                    if extract_assignment(&case.inst, &psi)?.as_ref() != Some(&sigma) {
                        return Ok((false, format!("source {i}: corruption {e} of row {j} with v = {v} changes extraction")));
                    }
                    corrupted += 1;
                }
            }
        }
    }
    Ok((true, format!("{extracted} path extractions, {corrupted} corrupted tables")))
}

fn check_shape(sys: &Arc<ParallelPcppSystem>) -> std::result::Result<(), String> {
    let csp = parallelize_to_csp(sys);
    let want = (sys.num_cols() + 1, 1u32 << sys.t(), 1usize << sys.randomness());
    let got = (csp.num_vars(), csp.alphabet_size(), csp.num_constraints());
    if got != want {
        return Err(format!("(vars, alphabet, |E|) = {got:?}, expected {want:?}"));
    }
    for (omega, (c, tuple)) in csp.constraints().iter().zip(sys.query_map()).enumerate() {
        let mut cols = tuple.clone();
        cols.sort_unstable();
        cols.dedup();
        if c.arity() != cols.len() + 1 {
            return Err(format!("omega {omega}: arity {} for {} distinct columns", c.arity(), cols.len()));
        }
    }
    Ok(())
}

fn structure(seed: u64) -> Result<Verdict> {
    let mut systems: Vec<(String, Arc<ParallelPcppSystem>)> = (0..MICRO_SYSTEMS)
        .map(|i| (format!("micro {i}"), Arc::new(micro_system(seed, i))))
        .collect();
    for k in 1..=2 {
        let inst = km24_build(&crate::gen::or_chain(2)?, hadamard_code(2)?, k)?;
        systems.push((format!("four-layer k = {k}"), Arc::clone(inst.system())));
    }
    for (name, sys) in &systems {
        if let Err(msg) = check_shape(sys) {
            return Ok((false, format!("{name}: {msg}")));
        }
    }
    Ok((true, format!("{} systems", systems.len())))
}
