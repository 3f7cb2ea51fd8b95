//! System files and reduced-instance files.
//!
//! ```text
//! psys 4 <x_cols> <proof_cols> <r> <k> code=hadamard <k_code> source=<file>
//!
//! psys-micro <t> <x_cols> <proof_cols> <r> <q>
//! omega <w> <c_1> ... <c_q>     # one block per outcome
//! layer <i> pred <2^q bits>     # one line per layer, i = 0 .. t-1
//!
//! csp <num_vars> <alphabet_size> <num_constraints>
//! structured <system file>
//! ini <symbols>
//! tar <symbols>
//! ```
//!
//! Relative paths are resolved against the directory of the referring file.
//! Reduced instances are never written as tables.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::{km24_build, lift_scalars, parallelize_to_csp, Km24Instance, ParallelPcppSystem, KM24_LAYERS};
use crate::csp::{self, Assignment, CspInstance};
use crate::ecc::{hadamard_code, CodeFamily};
use crate::error::{Error, Result};
use crate::pcpp::ScalarPcpp;
use crate::reconfig::{self, ReconfigProblem};
use crate::text::{Line, Lines};

/// A loaded system file.
#[derive(Clone, Debug)]
pub enum SystemFile {
    Micro(Arc<ParallelPcppSystem>),
    Km24(Box<Km24Instance>),
}

impl SystemFile {
    pub fn system(&self) -> &Arc<ParallelPcppSystem> {
        match self {
            SystemFile::Micro(s) => s,
            SystemFile::Km24(inst) => inst.system(),
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn resolve(base: &Path, reference: &str) -> PathBuf {
    let p = Path::new(reference);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.parent().unwrap_or(Path::new(".")).join(p)
    }
}

fn in_file(path: &Path, e: Error) -> Error {
    match e {
        Error::Parse { line, msg } => Error::Parse {
            line,
            msg: format!("{}: {msg}", path.display()),
        },
        other => other,
    }
}

impl ParallelPcppSystem {
    /// `psys-micro` text of a row-local system.
    pub fn serialize_micro(&self) -> Result<String> {
        let super::Layers::RowLocal(tables) = &self.layers else {
            return Err(Error::Unsupported(
                "only row-local systems have an explicit table form".into(),
            ));
        };
        let mut out = String::new();
        writeln!(
            out,
            "psys-micro {} {} {} {} {}",
            self.t,
            self.x_cols,
            self.proof_cols,
            self.randomness,
            self.queries()
        )
        .unwrap();
        for (omega, tuple) in self.query_map.iter().enumerate() {
            write!(out, "omega {omega}").unwrap();
            for c in tuple {
                write!(out, " {c}").unwrap();
            }
            out.push('\n');
            for (i, layer) in tables.iter().enumerate() {
                writeln!(out, "layer {i} pred {}", crate::pcpp::table_bits(&layer[omega])).unwrap();
            }
        }
        Ok(out)
    }
}

impl Km24Instance {
    /// `psys` header line referring to the source problem at `source_ref`.
    pub fn system_file(&self, source_ref: &str) -> String {
        let s = self.system();
        format!(
            "psys {} {} {} {} {} code={} {} source={source_ref}\n",
            s.t(),
            s.x_cols(),
            s.proof_cols(),
            s.randomness(),
            self.repetitions(),
            self.code().family(),
            self.code().msg_len()
        )
    }
}

fn parse_micro(head: &Line<'_>, lines: &mut Lines<'_>) -> Result<ParallelPcppSystem> {
    head.expect_len(6)?;
    let t: usize = head.field(1, "t")?;
    let x_cols: usize = head.field(2, "x_cols")?;
    let proof_cols: usize = head.field(3, "proof_cols")?;
    let r: usize = head.field(4, "r")?;
    let q: usize = head.field(5, "q")?;
    if t == 0 || t > super::MAX_LAYERS {
        return Err(head.err(format!("layer count {t} out of range")));
    }
    if r > crate::pcpp::MAX_RANDOMNESS || r + q > crate::pcpp::MAX_TABLE_LOG2 {
        return Err(head.err(format!("r = {r}, q = {q} exceed the table limits")));
    }
    let mut query_map = Vec::with_capacity(1 << r);
    let mut tables = vec![Vec::with_capacity(1 << r); t];
    for omega in 0..1usize << r {
        let ol = lines.next_line("`omega` line")?;
        let tuple = crate::pcpp::parse_omega_line(&ol, omega, q)?;
        if let Some(c) = tuple.iter().find(|&&c| c >= x_cols + proof_cols) {
            return Err(ol.err(format!("column {c} out of range")));
        }
        query_map.push(tuple);
        for (i, layer) in tables.iter_mut().enumerate() {
            let ll = lines.next_line("`layer` line")?;
            ll.expect_keyword("layer")?;
            ll.expect_len(4)?;
            let idx: usize = ll.field(1, "layer")?;
            if idx != i {
                return Err(ll.err(format!("expected layer {i}, found {idx}")));
            }
            if ll.tokens[2] != "pred" {
                return Err(ll.err(format!("expected `pred`, found `{}`", ll.tokens[2])));
            }
            layer.push(crate::pcpp::parse_table(&ll, 3, q)?);
        }
    }
    let vs = tables
        .into_iter()
        .map(|preds| ScalarPcpp::with_repeats(x_cols, proof_cols, query_map.clone(), preds))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| head.err(e.to_string()))?;
    lift_scalars(vs).map_err(|e| head.err(e.to_string()))
}

fn prefixed<'a>(line: &Line<'a>, i: usize, prefix: &str) -> Result<&'a str> {
    let tok = line.tokens.get(i).ok_or_else(|| line.err(format!("missing `{prefix}` field")))?;
    tok.strip_prefix(prefix)
        .ok_or_else(|| line.err(format!("expected `{prefix}...`, found `{tok}`")))
}

fn parse_km24(head: &Line<'_>, load_source: &dyn Fn(&str) -> Result<ReconfigProblem>) -> Result<Km24Instance> {
    head.expect_len(9)?;
    let t: usize = head.field(1, "t")?;
    let x_cols: usize = head.field(2, "x_cols")?;
    let proof_cols: usize = head.field(3, "proof_cols")?;
    let r: usize = head.field(4, "r")?;
    let k: usize = head.field(5, "k")?;
    let family = prefixed(head, 6, "code=")?;
    if family != CodeFamily::Hadamard.to_string() {
        return Err(head.err(format!("unsupported code family `{family}`")));
    }
    let k_code: usize = head.field(7, "k_code")?;
    let source = load_source(prefixed(head, 8, "source=")?)?;
    let inst = km24_build(&source, hadamard_code(k_code)?, k).map_err(|e| head.err(e.to_string()))?;
    let s = inst.system();
    let found = (s.t(), s.x_cols(), s.proof_cols(), s.randomness());
    if (t, x_cols, proof_cols, r) != found || t != KM24_LAYERS {
        return Err(head.err(format!(
            "header declares (t, x_cols, proof_cols, r) = {:?}, construction gives {found:?}",
            (t, x_cols, proof_cols, r)
        )));
    }
    Ok(inst)
}

/// Parses a system file; `load_source` reads the source problem a `psys`
/// header refers to.
pub fn parse_system(text: &str, load_source: &dyn Fn(&str) -> Result<ReconfigProblem>) -> Result<SystemFile> {
    let mut lines = Lines::new(text);
    let head = lines.next_line("system header")?;
    let out = match head.keyword() {
        "psys-micro" => SystemFile::Micro(Arc::new(parse_micro(&head, &mut lines)?)),
        "psys" => SystemFile::Km24(Box::new(parse_km24(&head, load_source)?)),
        other => return Err(head.err(format!("expected `psys` or `psys-micro`, found `{other}`"))),
    };
    lines.expect_end()?;
    Ok(out)
}

pub fn load_system(path: &Path) -> Result<SystemFile> {
    let text = read(path)?;
    let load_source = |r: &str| -> Result<ReconfigProblem> {
        let p = resolve(path, r);
        load_problem(&p)
    };
    parse_system(&text, &load_source).map_err(|e| in_file(path, e))
}

/// Text of a reduced problem whose constraints live in `system_ref`.
pub fn reduced_problem_text(csp: &CspInstance, system_ref: &str, ini: &Assignment, tar: &Assignment) -> String {
    format!(
        "csp {} {} {}\nstructured {system_ref}\nini {ini}\ntar {tar}\n",
        csp.num_vars(),
        csp.alphabet_size(),
        csp.num_constraints()
    )
}

/// Parses a problem file whose constraints are either tables or a
/// `structured` reference resolved by `load_system`.
pub fn parse_problem_with(text: &str, load_system: &dyn Fn(&str) -> Result<SystemFile>) -> Result<ReconfigProblem> {
    let mut lines = Lines::new(text);
    let h = csp::parse_header(&mut lines)?;
    let instance = if lines.peek_keyword() == Some("structured") {
        let l = lines.next_line("`structured` line")?;
        l.expect_len(2)?;
        let sys = load_system(l.tokens[1])?;
        let inst = parallelize_to_csp(sys.system());
        let found = (inst.num_vars(), inst.alphabet_size(), inst.num_constraints());
        if (h.num_vars, h.alphabet_size, h.num_constraints) != found {
            return Err(Error::parse(
                h.line,
                format!(
                    "header declares (vars, alphabet, constraints) = {:?}, system gives {found:?}",
                    (h.num_vars, h.alphabet_size, h.num_constraints)
                ),
            ));
        }
        inst
    } else {
        csp::parse_table_body(&mut lines, &h)?
    };
    let (ini, tar) = reconfig::parse_endpoints(&mut lines, &instance)?;
    lines.expect_end()?;
    ReconfigProblem::new_or_relaxed(instance, ini, tar)
}

/// Reads a problem file, loading any referenced system.
pub fn load_problem(path: &Path) -> Result<ReconfigProblem> {
    let text = read(path)?;
    let sys = |r: &str| load_system(&resolve(path, r));
    parse_problem_with(&text, &sys).map_err(|e| in_file(path, e))
}
