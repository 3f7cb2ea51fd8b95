use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use pcpp_reconfig::budget::ORACLE_STATE_LIMIT;
use pcpp_reconfig::ecc::hadamard_code;
use pcpp_reconfig::gen::{self, RandomCspParams};
use pcpp_reconfig::parallel::{
    binarize_assignment, binarize_csp, completeness_path, km24_build, load_problem, load_system,
    parallel_accept_prob, reduced_problem_text, Km24Instance, LayeredAssignment, ParallelPcppSystem,
    SystemFile,
};
use pcpp_reconfig::pcpp::{
    audit_completeness, audit_completeness_exhaustive, audit_soundness, build_proximity_pcpp,
    parse_circuit, Circuit, ScalarPcpp,
};
use pcpp_reconfig::rational::Rational;
use pcpp_reconfig::reconfig::{
    bottleneck_path, brute_force_reconfig_value, check_path, exact_path, ReconfigPath, ReconfigProblem,
};
use pcpp_reconfig::rng;
use pcpp_reconfig::suite;

use crate::report::{Report, Row};
use crate::{Cli, Command, Failure, GenKind};

type Outcome = Result<bool, Failure>;

pub fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Gen { kind, params } => gen_cmd(cli, *kind, params),
        Command::Reduce {
            source,
            binarize,
            with_path,
        } => reduce(cli, source, *binarize, *with_path),
        Command::Audit {
            file,
            circuit,
            base,
            kappa,
        } => audit(cli, file, circuit.as_deref(), *base, kappa.as_ref()),
        Command::Recval { problem } => recval(cli, problem),
        Command::Verify {
            problem,
            path,
            threshold,
        } => verify(cli, problem, path, threshold),
        Command::Suite => suite_cmd(cli),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn report(cli: &Cli, command: &'static str) -> Report {
    Report::new(command, cli.seed, cli.config_hash())
}

/// Prints the report and, when `--out` names a report file, writes the
/// `key=value` rows there.
fn finish(cli: &Cli, r: Report, out_is_report: bool) -> Outcome {
    print!("{}", r.table());
    print!("{}", r.key_values());
    if out_is_report {
        if let Some(out) = &cli.out {
            write(out, &r.key_values())?;
        }
    }
    Ok(r.passed)
}

fn ms(start: Instant) -> String {
    format!("{:.1}", start.elapsed().as_secs_f64() * 1000.0)
}

fn gen_params(params: &[String]) -> Result<BTreeMap<String, String>, Failure> {
    params
        .iter()
        .map(|p| match p.split_once('=') {
            Some((k, v)) => Ok((k.to_string(), v.to_string())),
            None => Err(Failure::usage(format!("parameter `{p}` is not key=value"))),
        })
        .collect()
}

fn take<T: std::str::FromStr>(m: &mut BTreeMap<String, String>, key: &str, default: T) -> Result<T, Failure> {
    match m.remove(key) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|_| Failure::usage(format!("parameter {key}: cannot parse `{v}`"))),
    }
}

fn gen_cmd(cli: &Cli, kind: GenKind, params: &[String]) -> Outcome {
    let mut m = gen_params(params)?;
    let problem = match kind {
        GenKind::EqualityChain => gen::equality_chain(take(&mut m, "n", 4)?)?,
        GenKind::OrChain => gen::or_chain(take(&mut m, "n", 4)?)?,
        GenKind::RandomCsp => {
            let p = RandomCspParams {
                num_vars: take(&mut m, "n", 4)?,
                alphabet_size: take(&mut m, "alphabet", 2)?,
                num_constraints: take(&mut m, "constraints", 4)?,
                max_arity: take(&mut m, "arity", 2)?,
                density: take(&mut m, "density", 0.5)?,
            };
            let space = (p.alphabet_size as u128).checked_pow(p.num_vars as u32);
            if space.is_none_or(|s| s > cli.budget_states as u128) {
                return Err(Failure {
                    code: 3,
                    msg: format!(
                        "{}^{} assignments exceed the state budget {}",
                        p.alphabet_size, p.num_vars, cli.budget_states
                    ),
                });
            }
            gen::random_csp(&mut rng::stream(cli.seed, "gen random-csp"), &p)?
        }
    };
    if let Some(k) = m.keys().next() {
        return Err(Failure::usage(format!("unknown parameter `{k}` for {kind:?}")));
    }
    let text = problem.serialize()?;
    match &cli.out {
        Some(out) => {
            write(out, &text)?;
            let mut r = report(cli, "gen");
            let inst = problem.instance();
            r.push(
                Row::new("instance")
                    .field("kind", format!("{kind:?}"))
                    .field("vars", inst.num_vars())
                    .field("alphabet", inst.alphabet_size())
                    .field("constraints", inst.num_constraints())
                    .field("file", out.display()),
            );
            finish(cli, r, false)
        }
        None => {
            print!("{text}");
            Ok(true)
        }
    }
}

fn prepare_source(source: ReconfigProblem, binarize: bool) -> Result<ReconfigProblem, Failure> {
    let a = source.instance().alphabet_size();
    if a == 2 {
        return Ok(source);
    }
    if !binarize {
        return Err(Failure::usage(format!(
            "source alphabet has size {a}; the construction needs a binary source (rerun with --binarize)"
        )));
    }
    let inst = binarize_csp(source.instance())?;
    let ini = binarize_assignment(source.ini(), a)?;
    let tar = binarize_assignment(source.tar(), a)?;
    Ok(ReconfigProblem::new_or_relaxed(inst, ini, tar)?)
}

fn reduce(cli: &Cli, source_path: &Path, binarize: bool, with_path: bool) -> Outcome {
    let out = cli
        .out
        .as_ref()
        .ok_or_else(|| Failure::usage("reduce needs --out <directory>"))?;
    let start = Instant::now();
    let source = prepare_source(load_problem(source_path)?, binarize)?;
    if source.is_relaxed() {
        return Err(Failure::usage(
            "source endpoints must be solutions of the source instance",
        ));
    }
    let code = hadamard_code(source.instance().num_vars())?;
    code.check_proximity(&cli.delta)?;
    let inst = km24_build(&source, code, cli.reps as usize)?;
    let reduced = inst.reduced_problem()?;

    fs::create_dir_all(out).map_err(|e| Failure::usage(format!("{}: {e}", out.display())))?;
    write(&out.join("source.csp"), &source.serialize()?)?;
    write(&out.join("system.psys"), &inst.system_file("source.csp"))?;
    let reduced_file = out.join("reduced.csp");
    write(
        &reduced_file,
        &reduced_problem_text(reduced.instance(), "system.psys", reduced.ini(), reduced.tar()),
    )?;

    let reparsed = load_problem(&reduced_file)?;
    let round_trip = reparsed.ini() == reduced.ini()
        && reparsed.tar() == reduced.tar()
        && reparsed.instance().num_constraints() == reduced.instance().num_constraints();

    let sys = inst.system();
    let csp = reduced.instance();
    let mut r = report(cli, "reduce");
    r.push(
        Row::new("summary")
            .field("t", sys.t())
            .field("x_cols", sys.x_cols())
            .field("proof_cols", sys.proof_cols())
            .field("vars", csp.num_vars())
            .field("alphabet", csp.alphabet_size())
            .field("constraints", csp.num_constraints())
            .field("randomness", sys.randomness())
            .field("queries", sys.queries())
            .field("max_arity", csp.max_arity())
            .field("code", inst.code().tag().replace(' ', ":"))
            .field("delta", &cli.delta)
            .field("declared_kappa", sys.declared_kappa()),
    );
    r.push(Row::new("files").field("dir", out.display()).field("reparse", round_trip));
    if !round_trip {
        r.fail();
    }
    if with_path {
        lift_path(cli, &inst, &reduced, out, &mut r)?;
    }
    r.push(Row::new("timing").field("elapsed_ms", ms(start)));
    finish(cli, r, false)
}

fn lift_path(cli: &Cli, inst: &Km24Instance, reduced: &ReconfigProblem, out: &Path, r: &mut Report) -> Result<(), Failure> {
    match exact_path(inst.source(), &cli.budget())? {
        None => r.push(Row::new("completeness_path").field("status", "no exact source path")),
        Some(sp) => {
            let lifted = completeness_path(inst, &sp)?;
            let path = ReconfigPath::new(lifted.iter().map(LayeredAssignment::to_assignment).collect())?;
            let ok = check_path(reduced, &path, &pcpp_reconfig::rational::from_int(1)).is_ok();
            write(&out.join("completeness.path"), &path.serialize())?;
            r.push(
                Row::new("completeness_path")
                    .field("status", if ok { "verified" } else { "failed" })
                    .field("source_steps", sp.len())
                    .field("steps", path.len()),
            );
            if !ok {
                r.fail();
            }
        }
    }
    Ok(())
}

fn first_keyword(text: &str) -> Option<&str> {
    text.lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .and_then(|l| l.split_whitespace().next())
}

fn load_circuit(path: Option<&Path>, what: &str) -> Result<Circuit, Failure> {
    let path = path.ok_or_else(|| Failure::usage(format!("{what} needs a circuit file")))?;
    Ok(parse_circuit(&read(path)?)?)
}

/// Audits one verifier, appending rows named after `name`.
fn audit_verifier(
    cli: &Cli,
    r: &mut Report,
    name: &str,
    v: &ScalarPcpp,
    c: &Circuit,
    kappa: Option<&Rational>,
) -> Result<(), Failure> {
    let budget = cli.budget();
    let start = Instant::now();
    let complete = if v.has_honest_proof() {
        audit_completeness(v, c, &budget)?
    } else {
        audit_completeness_exhaustive(v, c, &budget)?
    };
    let measured = audit_soundness(v, c, &cli.delta, &budget)?;
    let mut row = Row::new(name)
        .field("n", v.input_len())
        .field("m", v.proof_len())
        .field("r", v.randomness())
        .field("q", v.queries())
        .field("completeness", complete)
        .field("delta", &cli.delta)
        .field("measured_soundness", &measured);
    let sound = match kappa {
        Some(k) => {
            row = row.field("declared_kappa", k).field("soundness_ok", &measured <= k);
            &measured <= k
        }
        None => true,
    };
    r.push(row.field("elapsed_ms", ms(start)));
    if !(complete && sound) {
        r.fail();
    }
    Ok(())
}

fn audit(cli: &Cli, file: &Path, circuit: Option<&Path>, base: bool, kappa: Option<&Rational>) -> Outcome {
    let mut r = report(cli, "audit");
    if base {
        let c = parse_circuit(&read(file)?)?;
        let v = build_proximity_pcpp(&c, cli.reps as usize)?;
        let declared = kappa.cloned().unwrap_or_else(|| {
            pcpp_reconfig::pcpp::proximity_soundness_bound(c.input_len(), cli.reps as usize, &cli.delta)
        });
        audit_verifier(cli, &mut r, "base", &v, &c, Some(&declared))?;
        return finish(cli, r, true);
    }
    let text = read(file)?;
    match first_keyword(&text) {
        Some("pcpp") => {
            let v = ScalarPcpp::parse(&text)?;
            let c = load_circuit(circuit, "verifier audit")?;
            audit_verifier(cli, &mut r, "verifier", &v, &c, kappa)?;
        }
        Some("psys") | Some("psys-micro") => match load_system(file)? {
            SystemFile::Km24(inst) => audit_km24(&inst, &mut r)?,
            SystemFile::Micro(sys) => audit_micro(cli, &sys, circuit, kappa, &mut r)?,
        },
        other => {
            return Err(Failure::usage(format!(
                "{}: expected a `pcpp`, `psys` or `psys-micro` file, found {other:?}",
                file.display()
            )))
        }
    }
    finish(cli, r, true)
}

fn audit_km24(inst: &Km24Instance, r: &mut Report) -> Result<(), Failure> {
    let sys = inst.system();
    for (name, psi) in [("psi_ini", inst.psi_ini()), ("psi_tar", inst.psi_tar())] {
        let mut row = Row::new(name);
        let mut all_one = true;
        for i in 0..sys.t() {
            let p = parallel_accept_prob(sys, psi, i)?;
            all_one &= p == pcpp_reconfig::rational::from_int(1);
            row = row.field(&format!("layer{i}"), p);
        }
        r.push(row.field("complete", all_one));
        if !all_one {
            r.fail();
        }
    }
    r.push(
        Row::new("declared")
            .field("delta", sys.declared_delta())
            .field("kappa", sys.declared_kappa()),
    );
    Ok(())
}

fn audit_micro(
    cli: &Cli,
    sys: &ParallelPcppSystem,
    circuit: Option<&Path>,
    kappa: Option<&Rational>,
    r: &mut Report,
) -> Result<(), Failure> {
    r.push(
        Row::new("system")
            .field("t", sys.t())
            .field("x_cols", sys.x_cols())
            .field("proof_cols", sys.proof_cols())
            .field("randomness", sys.randomness()),
    );
    let c = load_circuit(circuit, "micro-system audit")?;
    for (i, v) in sys.verifiers().iter().enumerate() {
        audit_verifier(cli, r, &format!("layer{i}"), v, &c, kappa)?;
    }
    Ok(())
}

fn recval(cli: &Cli, problem_path: &Path) -> Outcome {
    let start = Instant::now();
    let problem = load_problem(problem_path)?;
    let (value, path) = bottleneck_path(&problem, &cli.budget())?;
    let engine_ms = ms(start);
    let mut r = report(cli, "recval");
    let inst = problem.instance();
    r.push(
        Row::new("problem")
            .field("vars", inst.num_vars())
            .field("alphabet", inst.alphabet_size())
            .field("constraints", inst.num_constraints())
            .field("relaxed", problem.is_relaxed()),
    );
    r.push(
        Row::new("value")
            .field("value", &value)
            .field("path_len", path.len())
            .field("elapsed_ms", engine_ms),
    );
    let oracle = if inst.state_space_size() <= ORACLE_STATE_LIMIT as u128 {
        let o = brute_force_reconfig_value(&problem)?;
        if o != value {
            r.fail();
        }
        Row::new("oracle")
            .field("value", &o)
            .field("agree", o == value)
    } else {
        Row::new("oracle").field("agree", "skipped")
    };
    r.push(oracle);
    if let Some(out) = &cli.out {
        write(out, &path.serialize())?;
    } else {
        for (i, s) in path.steps().iter().enumerate() {
            println!("step {i}: {s}");
        }
    }
    finish(cli, r, false)
}

fn verify(cli: &Cli, problem_path: &Path, path_file: &Path, threshold: &Rational) -> Outcome {
    let problem = load_problem(problem_path)?;
    let path = ReconfigPath::parse(&read(path_file)?)?;
    let mut r = report(cli, "verify");
    let mut row = Row::new("path")
        .field("steps", path.len())
        .field("threshold", threshold);
    match check_path(&problem, &path, threshold) {
        Ok(()) => row = row.field("result", "pass"),
        Err(v) => {
            row = row.field("result", "fail").field("reason", format!("\"{v}\""));
            r.fail();
        }
    }
    r.push(row);
    finish(cli, r, true)
}

fn suite_cmd(cli: &Cli) -> Outcome {
    let mut r = report(cli, "suite");
    for o in suite::run_all(cli.seed) {
        let ok = o.passed && o.within_limit();
        println!("{o}");
        r.push(
            Row::new(format!("criterion{}", o.id))
                .field("passed", ok)
                .field("elapsed_ms", format!("{:.1}", o.elapsed.as_secs_f64() * 1000.0))
                .field("limit_s", o.limit.as_secs()),
        );
        if !ok {
            r.fail();
        }
    }
    finish(cli, r, true)
}
