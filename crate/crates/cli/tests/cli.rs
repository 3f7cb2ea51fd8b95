use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn pcppr(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pcppr"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("run pcppr")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

/// Value of `key` in the first `key=value` row named `row`.
fn kv(out: &str, row: &str, key: &str) -> Option<String> {
    let tag = format!(" row={row} ");
    let line = out.lines().find(|l| l.starts_with("command=") && l.contains(&tag))?;
    line.split_whitespace()
        .find_map(|f| f.strip_prefix(&format!("{key}=")).map(str::to_string))
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

#[test]
fn gen_is_deterministic() {
    let d = TempDir::new().unwrap();
    let a = pcppr(d.path(), &["gen", "random-csp", "n=4", "alphabet=3", "--seed", "9"]);
    let b = pcppr(d.path(), &["gen", "random-csp", "n=4", "alphabet=3", "--seed", "9"]);
    let c = pcppr(d.path(), &["gen", "random-csp", "n=4", "alphabet=3", "--seed", "10"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);

    let eq = pcppr(d.path(), &["gen", "equality-chain", "n=2"]);
    assert_eq!(stdout(&eq), "csp 2 2 1\ncon 2 0 1 2\nacc 0 0\nacc 1 1\nini 0 0\ntar 1 1\n");
}

#[test]
fn gen_rejects_bad_parameters() {
    let d = TempDir::new().unwrap();
    assert_eq!(code(&pcppr(d.path(), &["gen", "or-chain", "m=3"])), 2);
    assert_eq!(code(&pcppr(d.path(), &["gen", "or-chain", "n"])), 2);
    assert_eq!(code(&pcppr(d.path(), &["gen", "equality-chain", "n=1"])), 2);
    assert_eq!(code(&pcppr(d.path(), &["gen", "random-csp", "n=30", "alphabet=4"])), 3);
}

#[test]
fn generated_instance_round_trips_through_recval() {
    let d = TempDir::new().unwrap();
    let g = pcppr(d.path(), &["gen", "random-csp", "n=3", "--out", "r.csp"]);
    assert_eq!(code(&g), 0);
    let r = pcppr(d.path(), &["recval", "r.csp", "--out", "r.path"]);
    let out = stdout(&r);
    assert_eq!(code(&r), 0, "{out}");
    assert_eq!(kv(&out, "oracle", "agree").as_deref(), Some("true"));
    // Planted endpoints are solutions, and the engine's path attains its value.
    let v = kv(&out, "value", "value").unwrap();
    let ok = pcppr(d.path(), &["verify", "r.csp", "r.path", "--threshold", &v]);
    assert_eq!(code(&ok), 0);
}

#[test]
fn recval_equality_chain_is_zero() {
    let d = TempDir::new().unwrap();
    pcppr(d.path(), &["gen", "equality-chain", "n=2", "--out", "eq.csp"]);
    let r = pcppr(d.path(), &["recval", "eq.csp"]);
    let out = stdout(&r);
    assert_eq!(code(&r), 0);
    assert_eq!(kv(&out, "value", "value").as_deref(), Some("0"));
    assert_eq!(kv(&out, "oracle", "agree").as_deref(), Some("true"));
    assert!(kv(&out, "value", "seed").is_some());
    assert_eq!(kv(&out, "value", "config").unwrap().len(), 16);
}

#[test]
fn reduce_summary_and_artifacts() {
    let d = TempDir::new().unwrap();
    pcppr(d.path(), &["gen", "or-chain", "n=2", "--out", "src.csp"]);
    let r = pcppr(d.path(), &["reduce", "src.csp", "--reps", "2", "--with-path", "--out", "red"]);
    let out = stdout(&r);
    assert_eq!(code(&r), 0, "{out}");
    assert_eq!(kv(&out, "summary", "t").as_deref(), Some("4"));
    assert_eq!(kv(&out, "summary", "vars").as_deref(), Some("17"));
    assert_eq!(kv(&out, "summary", "alphabet").as_deref(), Some("16"));
    assert_eq!(kv(&out, "files", "reparse").as_deref(), Some("true"));
    for f in ["source.csp", "system.psys", "reduced.csp", "completeness.path"] {
        assert!(d.path().join("red").join(f).exists(), "{f}");
    }

    let v = pcppr(d.path(), &["verify", "red/reduced.csp", "red/completeness.path"]);
    assert_eq!(code(&v), 0, "{}", stdout(&v));

    let a = pcppr(d.path(), &["audit", "red/system.psys"]);
    assert_eq!(code(&a), 0, "{}", stdout(&a));
    assert_eq!(kv(&stdout(&a), "psi_ini", "complete").as_deref(), Some("true"));

    let path = fs::read_to_string(d.path().join("red/completeness.path")).unwrap();
    let lines: Vec<&str> = path.lines().collect();
    write(d.path(), "short.path", &(lines[..lines.len() - 1].join("\n") + "\n"));
    let t = pcppr(d.path(), &["verify", "red/reduced.csp", "short.path"]);
    assert_eq!(code(&t), 1);
    assert_eq!(kv(&stdout(&t), "path", "result").as_deref(), Some("fail"));

    write(d.path(), "one.path", &format!("{}\n", lines[0]));
    assert_eq!(code(&pcppr(d.path(), &["verify", "red/reduced.csp", "one.path"])), 1);
}

#[test]
fn reduce_errors() {
    let d = TempDir::new().unwrap();
    pcppr(d.path(), &["gen", "random-csp", "n=2", "alphabet=4", "--out", "q.csp"]);
    let r = pcppr(d.path(), &["reduce", "q.csp", "--out", "red"]);
    assert_eq!(code(&r), 2);
    assert!(String::from_utf8_lossy(&r.stderr).contains("--binarize"));
    assert_eq!(code(&pcppr(d.path(), &["reduce", "q.csp", "--binarize", "--out", "red"])), 0);

    pcppr(d.path(), &["gen", "or-chain", "n=2", "--out", "src.csp"]);
    assert_eq!(code(&pcppr(d.path(), &["reduce", "src.csp"])), 2);
}

#[test]
fn verify_rejects_wrong_endpoint() {
    let d = TempDir::new().unwrap();
    pcppr(d.path(), &["gen", "or-chain", "n=3", "--out", "o.csp"]);
    write(d.path(), "good.path", "step 1 0 1\nstep 1 1 1\n");
    write(d.path(), "bad.path", "step 1 0 1\nstep 1 1 0\n");
    assert_eq!(code(&pcppr(d.path(), &["verify", "o.csp", "good.path"])), 0);
    assert_eq!(code(&pcppr(d.path(), &["verify", "o.csp", "bad.path"])), 1);
    write(d.path(), "junk.path", "step 1 x\n");
    assert_eq!(code(&pcppr(d.path(), &["verify", "o.csp", "junk.path"])), 2);
}

#[test]
fn audits() {
    let d = TempDir::new().unwrap();
    write(d.path(), "c4.circ", "circuit 4\ntt 1000000000000001\n");
    let base = pcppr(d.path(), &["audit", "c4.circ", "--base", "--reps", "2"]);
    let out = stdout(&base);
    assert_eq!(code(&base), 0, "{out}");
    assert_eq!(kv(&out, "base", "completeness").as_deref(), Some("true"));
    assert_eq!(kv(&out, "base", "soundness_ok").as_deref(), Some("true"));

    // Only 00 satisfies the circuit; the honest verifier checks one input bit
    // per outcome, the mutant accepts everything on outcome 0.
    write(d.path(), "c.circ", "circuit 2\ntt 1000\n");
    write(d.path(), "good.pcpp", "pcpp 2 0 1 1\nomega 0 0\npred 10\nomega 1 1\npred 10\n");
    write(d.path(), "weak.pcpp", "pcpp 2 0 1 1\nomega 0 0\npred 11\nomega 1 1\npred 10\n");
    let good = pcppr(d.path(), &["audit", "good.pcpp", "c.circ", "--kappa", "1/2"]);
    assert_eq!(code(&good), 0, "{}", stdout(&good));
    let weak = pcppr(d.path(), &["audit", "weak.pcpp", "c.circ", "--kappa", "1/2"]);
    assert_eq!(code(&weak), 1);
    assert_eq!(kv(&stdout(&weak), "verifier", "measured_soundness").as_deref(), Some("1"));
    assert_eq!(kv(&stdout(&weak), "verifier", "soundness_ok").as_deref(), Some("false"));

    // Every input satisfies this circuit, so nothing is far.
    write(d.path(), "all.circ", "circuit 2\ntt 1111\n");
    write(d.path(), "acc.pcpp", "pcpp 2 0 1 1\nomega 0 0\npred 11\nomega 1 1\npred 11\n");
    let empty = pcppr(d.path(), &["audit", "acc.pcpp", "all.circ", "--kappa", "0"]);
    assert_eq!(code(&empty), 0);
    assert_eq!(kv(&stdout(&empty), "verifier", "measured_soundness").as_deref(), Some("0"));

    let over = pcppr(d.path(), &["audit", "good.pcpp", "c.circ", "--budget-triples", "2"]);
    assert_eq!(code(&over), 3);
    assert_eq!(code(&pcppr(d.path(), &["audit", "good.pcpp"])), 2);
}

#[test]
fn report_file_and_global_flags() {
    let d = TempDir::new().unwrap();
    write(d.path(), "c.circ", "circuit 2\ntt 1000\n");
    let a = pcppr(d.path(), &["audit", "c.circ", "--base", "--out", "rep.txt"]);
    assert_eq!(code(&a), 0);
    let rep = fs::read_to_string(d.path().join("rep.txt")).unwrap();
    assert!(rep.lines().all(|l| l.starts_with("command=audit row=")));
    assert!(rep.ends_with("passed=true\n"));

    let h1 = kv(&stdout(&a), "base", "config").unwrap();
    let b = pcppr(d.path(), &["audit", "c.circ", "--base", "--delta", "1/2"]);
    assert_ne!(kv(&stdout(&b), "base", "config").unwrap(), h1);
    assert_eq!(code(&pcppr(d.path(), &["audit", "c.circ", "--base", "--delta", "3/4"])), 2);
    assert_eq!(code(&pcppr(d.path(), &["audit", "c.circ", "--base", "--reps", "0"])), 2);
}

#[test]
fn suite_passes() {
    let d = TempDir::new().unwrap();
    let s = pcppr(d.path(), &["suite"]);
    let out = stdout(&s);
    assert_eq!(code(&s), 0, "{out}");
    assert_eq!(out.matches("[PASS] criterion").count(), 8);
}
