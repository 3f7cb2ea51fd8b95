//! Verifier and circuit files.
//!
//! ```text
//! pcpp <n> <m> <r> <q>
//! omega <w> <i_1> ... <i_q>     # one block per outcome, w = 0, 1, ...
//! pred <2^q bits>               # bit b: decision on the tuple whose value is b
//!
//! circuit <n>
//! tt <2^n bits>                 # bit b: output on the input whose value is b
//! ```

use std::fmt::Write as _;

use super::{AcceptTable, Circuit, ScalarPcpp};
use crate::budget::Budget;
use crate::error::{Error, Result};
use crate::text::{Line, Lines};

pub(super) fn write_pcpp(v: &ScalarPcpp) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "pcpp {} {} {} {}",
        v.input_len(),
        v.proof_len(),
        v.randomness(),
        v.queries()
    )
    .unwrap();
    for (omega, (tuple, pred)) in v.query_map().iter().zip(v.predicates()).enumerate() {
        write!(out, "omega {omega}").unwrap();
        for p in tuple {
            write!(out, " {p}").unwrap();
        }
        out.push('\n');
        writeln!(out, "pred {}", table_bits(pred)).unwrap();
    }
    out
}

pub(crate) fn table_bits(t: &AcceptTable) -> String {
    (0..1u64 << t.arity())
        .map(|b| if t.accepts(b) { '1' } else { '0' })
        .collect()
}

pub(crate) fn parse_table(line: &Line<'_>, field: usize, arity: usize) -> Result<AcceptTable> {
    let bits = line.tokens.get(field).ok_or_else(|| line.err("missing accept bits"))?;
    if bits.len() != 1 << arity {
        return Err(line.err(format!(
            "accept table needs {} bits, found {}",
            1u64 << arity,
            bits.len()
        )));
    }
    if let Some(c) = bits.chars().find(|&c| c != '0' && c != '1') {
        return Err(line.err(format!("invalid bit character {c:?}")));
    }
    let bytes = bits.as_bytes();
    Ok(AcceptTable::from_fn(arity, |b| bytes[b as usize] == b'1'))
}

pub(crate) fn parse_omega_line(line: &Line<'_>, omega: usize, q: usize) -> Result<Vec<usize>> {
    line.expect_keyword("omega")?;
    line.expect_len(q + 2)?;
    let w: usize = line.field(1, "omega")?;
    if w != omega {
        return Err(line.err(format!("expected omega {omega}, found {w}")));
    }
    line.fields_from(2, "query position")
}

pub(super) fn parse_pcpp(text: &str) -> Result<ScalarPcpp> {
    let mut lines = Lines::new(text);
    let head = lines.next_line("`pcpp` header")?;
    head.expect_keyword("pcpp")?;
    head.expect_len(5)?;
    let n: usize = head.field(1, "n")?;
    let m: usize = head.field(2, "m")?;
    let r: usize = head.field(3, "r")?;
    let q: usize = head.field(4, "q")?;
    if r > super::MAX_RANDOMNESS || r + q > super::MAX_TABLE_LOG2 {
        return Err(head.err(format!("r = {r}, q = {q} exceed the table limits")));
    }
    let mut query_map = Vec::with_capacity(1 << r);
    let mut predicates = Vec::with_capacity(1 << r);
    for omega in 0..1usize << r {
        let ol = lines.next_line("`omega` line")?;
        let tuple = parse_omega_line(&ol, omega, q)?;
        if let Some(p) = tuple.iter().find(|&&p| p >= n + m) {
            return Err(ol.err(format!("query position {p} out of range (n + m = {})", n + m)));
        }
        let pl = lines.next_line("`pred` line")?;
        pl.expect_keyword("pred")?;
        pl.expect_len(2)?;
        predicates.push(parse_table(&pl, 1, q)?);
        query_map.push(tuple);
    }
    lines.expect_end()?;
    ScalarPcpp::with_repeats(n, m, query_map, predicates)
        .map_err(|e| Error::parse(head.no, e.to_string()))
}

/// Writes a circuit as a truth table; fails if it cannot be materialized
/// within `budget`.
pub fn write_circuit(c: &Circuit, budget: &Budget) -> Result<String> {
    let tt = c.truth_table(budget)?;
    let bits: String = tt.iter().map(|&b| if b { '1' } else { '0' }).collect();
    Ok(format!("circuit {}\ntt {bits}\n", c.input_len()))
}

pub fn parse_circuit(text: &str) -> Result<Circuit> {
    let mut lines = Lines::new(text);
    let head = lines.next_line("`circuit` header")?;
    head.expect_keyword("circuit")?;
    head.expect_len(2)?;
    let n: usize = head.field(1, "n")?;
    if n > super::MAX_TRUTH_TABLE_INPUTS {
        return Err(head.err(format!("circuits are limited to {} inputs", super::MAX_TRUTH_TABLE_INPUTS)));
    }
    let tl = lines.next_line("`tt` line")?;
    tl.expect_keyword("tt")?;
    tl.expect_len(2)?;
    let table = parse_table(&tl, 1, n)?;
    lines.expect_end()?;
    let tt = (0..1u64 << n).map(|b| table.accepts(b)).collect();
    Circuit::from_truth_table(n, tt)
}
