//! Line-oriented reports: `key=value` rows for machines, an aligned table
//! for people. Every row carries the seed and the config hash.

use std::fmt::Write as _;

use sha2::{Digest, Sha256};

/// First 16 hex digits of the SHA-256 of `canonical`.
pub fn config_hash(canonical: &str) -> String {
    hex::encode(&Sha256::digest(canonical.as_bytes())[..8])
}

pub struct Row {
    name: String,
    fields: Vec<(String, String)>,
}

impl Row {
    pub fn new(name: impl Into<String>) -> Self {
        Row {
            name: name.into(),
            fields: Vec::new(),
        }
    }

    pub fn field(mut self, key: &str, value: impl ToString) -> Self {
        self.fields.push((key.to_string(), value.to_string()));
        self
    }
}

pub struct Report {
    command: &'static str,
    seed: u64,
    hash: String,
    rows: Vec<Row>,
    pub passed: bool,
}

impl Report {
    pub fn new(command: &'static str, seed: u64, hash: String) -> Self {
        Report {
            command,
            seed,
            hash,
            rows: Vec::new(),
            passed: true,
        }
    }

    pub fn push(&mut self, row: Row) {
        self.rows.push(row);
    }

    pub fn fail(&mut self) {
        self.passed = false;
    }

    pub fn key_values(&self) -> String {
        let mut out = String::new();
        for r in &self.rows {
            write!(
                out,
                "command={} row={} seed={} config={}",
                self.command, r.name, self.seed, self.hash
            )
            .unwrap();
            for (k, v) in &r.fields {
                write!(out, " {k}={v}").unwrap();
            }
            out.push('\n');
        }
        writeln!(
            out,
            "command={} row=verdict seed={} config={} passed={}",
            self.command, self.seed, self.hash, self.passed
        )
        .unwrap();
        out
    }

    pub fn table(&self) -> String {
        let mut lines = vec![("row".to_string(), "key".to_string(), "value".to_string())];
        for r in &self.rows {
            for (i, (k, v)) in r.fields.iter().enumerate() {
                let name = if i == 0 { r.name.clone() } else { String::new() };
                lines.push((name, k.clone(), v.clone()));
            }
        }
        let w0 = lines.iter().map(|l| l.0.len()).max().unwrap_or(0);
        let w1 = lines.iter().map(|l| l.1.len()).max().unwrap_or(0);
        let mut out = format!(
            "{} (seed {}, config {}): {}\n",
            self.command,
            self.seed,
            self.hash,
            if self.passed { "PASS" } else { "FAIL" }
        );
        for (a, b, c) in lines {
            writeln!(out, "  {a:<w0$}  {b:<w1$}  {c}").unwrap();
        }
        out
    }
}
