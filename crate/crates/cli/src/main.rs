//! `pcppr`: generate instances, run reductions and audits, and check paths.
//!
//! Exit codes: 0 pass, 1 semantic failure, 2 usage or parse error, 3 budget
//! exceeded.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use pcpp_reconfig::rational::{self, Rational};
use pcpp_reconfig::suite::DEFAULT_SEED;
use pcpp_reconfig::{Budget, Error};

#[derive(Parser, Debug)]
#[command(name = "pcppr", version, about = "PCPP-to-CSP reconfiguration reductions and exact audits")]
pub struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Proximity parameter, a fraction in (0, 1/2].
    #[arg(long, global = true, default_value = "1/4", value_parser = parse_delta)]
    delta: Rational,
    /// Sampled columns per outcome (repetitions).
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    reps: u64,
    /// Most assignments any enumeration may visit.
    #[arg(long = "budget-states", global = true, default_value_t = Budget::default().states,
          value_parser = clap::value_parser!(u64).range(1..))]
    budget_states: u64,
    /// Most (x, pi, omega) triples an audit may evaluate.
    #[arg(long = "budget-triples", global = true, default_value_t = Budget::default().triples,
          value_parser = clap::value_parser!(u64).range(1..))]
    budget_triples: u64,
    /// Output file (gen, recval path, reports) or directory (reduce).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a reconfiguration problem of the given family.
    Gen {
        kind: GenKind,
        /// `key=value` parameters: n, alphabet, constraints, arity, density.
        params: Vec<String>,
    },
    /// Build the four-layer system and its reduced CSP from a source problem.
    Reduce {
        source: PathBuf,
        /// Binarize a source over a power-of-two alphabet first.
        #[arg(long)]
        binarize: bool,
        /// Also write a completeness path lifted from an exact source path.
        #[arg(long)]
        with_path: bool,
    },
    /// Exact completeness and soundness audits.
    Audit {
        /// Verifier (`pcpp`), system (`psys`, `psys-micro`) or, with
        /// `--base`, circuit file.
        file: PathBuf,
        /// Circuit file for verifier and micro-system audits.
        circuit: Option<PathBuf>,
        /// Audit the built-in proximity verifier for the circuit in `file`.
        #[arg(long)]
        base: bool,
        /// Declared soundness to check the measured value against.
        #[arg(long, value_parser = parse_rational)]
        kappa: Option<Rational>,
    },
    /// Exact reconfiguration value with an optimal path.
    Recval { problem: PathBuf },
    /// Check a path file against a problem at a threshold.
    Verify {
        problem: PathBuf,
        path: PathBuf,
        #[arg(long, default_value = "1", value_parser = parse_rational)]
        threshold: Rational,
    },
    /// Run the acceptance battery.
    Suite,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum GenKind {
    RandomCsp,
    EqualityChain,
    OrChain,
}

fn parse_rational(s: &str) -> Result<Rational, String> {
    rational::parse(s).ok_or_else(|| format!("`{s}` is not a fraction like 1/4"))
}

fn parse_delta(s: &str) -> Result<Rational, String> {
    let d = parse_rational(s)?;
    if d <= rational::ratio(0, 1) || d > rational::ratio(1, 2) {
        return Err(format!("delta must lie in (0, 1/2], got {d}"));
    }
    Ok(d)
}

/// A command failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub msg: String,
}

impl Failure {
    pub fn usage(msg: impl Into<String>) -> Self {
        Failure { code: 2, msg: msg.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_budget() { 3 } else { 2 };
        Failure { code, msg: e.to_string() }
    }
}

impl Cli {
    fn budget(&self) -> Budget {
        Budget {
            states: self.budget_states,
            triples: self.budget_triples,
        }
    }

    fn config_hash(&self) -> String {
        report::config_hash(&format!(
            "seed={} delta={} reps={} states={} triples={} command={:?}",
            self.seed, self.delta, self.reps, self.budget_states, self.budget_triples, self.command
        ))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
