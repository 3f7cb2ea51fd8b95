//! Four-layer construction from a binary source reconfiguration problem.
//!
//! Each input row `x_j` is meant to encode an assignment `y_j` of the source
//! instance. Verifier `i` ignores `x_i` and checks the other three rows
//! against a claimed triple `w = (w_j)_{j != i}` stored in proof row `i`:
//! every `w_j` must be a codeword of a source solution, the three decoded
//! solutions must pairwise differ in at most one bit, and `x_j` must agree
//! with `w_j` on `k` sampled columns. The indicator `v` lets one verifier
//! stand aside while its own row is rewritten.

use std::sync::Arc;

use super::{LayeredAssignment, Layers, ParallelPcppSystem};
use crate::bits::BitString;
use crate::csp::{Assignment, CspInstance, Symbol};
use crate::ecc::{Decoding, LinearCode};
use crate::error::{Error, Result};
use crate::pcpp::{default_delta, proximity_soundness_bound, Circuit, MAX_RANDOMNESS};
use crate::rational::from_int;
use crate::reconfig::{verify_path, ReconfigPath, ReconfigProblem};

pub const KM24_LAYERS: usize = 4;

/// Layers read by verifier `i`, in increasing order.
fn others(i: usize) -> [usize; 3] {
    let mut out = [0; 3];
    let mut n = 0;
    for j in 0..KM24_LAYERS {
        if j != i {
            out[n] = j;
            n += 1;
        }
    }
    out
}

pub(super) struct Checks {
    source: CspInstance,
    code: LinearCode,
    block: usize,
    log_block: usize,
    k: usize,
}

impl Checks {
    fn new(source: &CspInstance, code: &LinearCode, k: usize) -> Result<Self> {
        if source.alphabet_size() != 2 {
            return Err(Error::Unsupported(format!(
                "source alphabet has size {}; binarize the source first",
                source.alphabet_size()
            )));
        }
        if code.msg_len() != source.num_vars() {
            return Err(Error::Precondition(format!(
                "code encodes {} bits but the source has {} variables",
                code.msg_len(),
                source.num_vars()
            )));
        }
        let block = code.block_len();
        if !block.is_power_of_two() {
            return Err(Error::Precondition(format!(
                "code block length {block} is not a power of two"
            )));
        }
        Ok(Checks {
            source: source.clone(),
            code: code.clone(),
            block,
            log_block: block.trailing_zeros() as usize,
            k,
        })
    }

    fn decoded_solution(&self, w: &BitString) -> Option<BitString> {
        let y = self.code.exact_message(w)?;
        let a = Assignment::new(y.iter().map(Symbol::from).collect());
        self.source.is_solution(&a).ok()?.then_some(y)
    }

    fn circuit_accepts(&self, ws: [&BitString; 3]) -> bool {
        let mut ys = Vec::with_capacity(3);
        for w in ws {
            match self.decoded_solution(w) {
                Some(y) => ys.push(y),
                None => return false,
            }
        }
        ys[0].hamming(&ys[1]) <= 1 && ys[0].hamming(&ys[2]) <= 1 && ys[1].hamming(&ys[2]) <= 1
    }

    fn sampled_column(&self, omega: usize, l: usize) -> usize {
        (omega >> (l * self.log_block)) & (self.block - 1)
    }

    /// `values`: all proof columns, then the `k` sampled input columns.
    pub(super) fn accepts(&self, omega: usize, layer: usize, values: &[Symbol]) -> bool {
        let n = self.block;
        let row = |j: usize| -> BitString {
            BitString::from_bits(
                values[j * n..(j + 1) * n]
                    .iter()
                    .map(|&s| (s >> layer) & 1 == 1)
                    .collect(),
            )
        };
        let ws = [row(0), row(1), row(2)];
        if !self.circuit_accepts([&ws[0], &ws[1], &ws[2]]) {
            return false;
        }
        let layers = others(layer);
        (0..self.k).all(|l| {
            let c = self.sampled_column(omega, l);
            let x = values[3 * n + l];
            layers
                .iter()
                .zip(&ws)
                .all(|(&j, w)| ((x >> j) & 1 == 1) == w.get(c))
        })
    }
}

/// Circuit on `3 * block_len` bits read as `(w_j)_{j != i}` in increasing
/// `j`: accepts iff each `w_j` is the codeword of a source solution and the
/// three solutions pairwise differ in at most one bit.
pub fn km24_circuit(source: &CspInstance, code: &LinearCode, i: usize) -> Result<Circuit> {
    if i >= KM24_LAYERS {
        return Err(Error::OutOfRange {
            what: "excluded layer",
            index: i,
            limit: KM24_LAYERS,
        });
    }
    let checks = Checks::new(source, code, 1)?;
    let n = checks.block;
    Ok(Circuit::from_fn(3 * n, move |w| {
        let parts = [w.slice(0, n), w.slice(n, n), w.slice(2 * n, n)];
        checks.circuit_accepts([&parts[0], &parts[1], &parts[2]])
    }))
}

pub(super) fn honest_proof(psi: &LayeredAssignment, layer: usize) -> BitString {
    let rows: Vec<BitString> = others(layer).iter().map(|&j| psi.x_row(j)).collect();
    BitString::concat(&[&rows[0], &rows[1], &rows[2]])
}

/// The four-layer system built from a source problem, with its honest
/// endpoint tables.
#[derive(Clone, Debug)]
pub struct Km24Instance {
    system: Arc<ParallelPcppSystem>,
    source: ReconfigProblem,
    code: LinearCode,
    k: usize,
    psi_ini: LayeredAssignment,
    psi_tar: LayeredAssignment,
}

impl Km24Instance {
    pub fn system(&self) -> &Arc<ParallelPcppSystem> {
        &self.system
    }

    pub fn source(&self) -> &ReconfigProblem {
        &self.source
    }

    pub fn code(&self) -> &LinearCode {
        &self.code
    }

    /// Sampled columns per outcome.
    pub fn repetitions(&self) -> usize {
        self.k
    }

    pub fn psi_ini(&self) -> &LayeredAssignment {
        &self.psi_ini
    }

    pub fn psi_tar(&self) -> &LayeredAssignment {
        &self.psi_tar
    }

    /// Table with every input row `E(sigma)`, every proof row honest, `v = 0`.
    pub fn honest_table(&self, sigma: &BitString) -> Result<LayeredAssignment> {
        honest_table(&self.system, &self.code, sigma)
    }

    /// The reduced CSP with the honest endpoint tables as endpoints.
    pub fn reduced_problem(&self) -> Result<ReconfigProblem> {
        let csp = super::parallelize_to_csp(&self.system);
        ReconfigProblem::new(csp, self.psi_ini.to_assignment(), self.psi_tar.to_assignment())
    }
}

fn assignment_bits(a: &Assignment) -> BitString {
    BitString::from_bits(a.symbols().iter().map(|&s| s == 1).collect())
}

fn honest_table(system: &ParallelPcppSystem, code: &LinearCode, sigma: &BitString) -> Result<LayeredAssignment> {
    let cw = code.encode(sigma)?;
    let mut psi = LayeredAssignment::zeros(system);
    for j in 0..KM24_LAYERS {
        psi.set_x_row(j, &cw)?;
    }
    for i in 0..KM24_LAYERS {
        let pi = honest_proof(&psi, i);
        psi.set_proof_row(i, &pi)?;
    }
    Ok(psi)
}

/// Builds the four-layer system for `source` with `k` sampled columns per
/// outcome.
pub fn km24_build(source: &ReconfigProblem, code: LinearCode, k: usize) -> Result<Km24Instance> {
    if source.is_relaxed() {
        return Err(Error::Precondition(
            "source endpoints must both be solutions".into(),
        ));
    }
    if k == 0 {
        return Err(Error::Precondition("need at least one sampled column".into()));
    }
    let checks = Checks::new(source.instance(), &code, k)?;
    let n = checks.block;
    let r = k * checks.log_block;
    if r > MAX_RANDOMNESS {
        return Err(Error::BudgetExceeded {
            what: "outcomes",
            size: 1u128 << r.min(127),
            limit: 1 << MAX_RANDOMNESS,
        });
    }
    let query_map: Vec<Vec<usize>> = (0..1usize << r)
        .map(|omega| {
            (n..4 * n)
                .chain((0..k).map(|l| checks.sampled_column(omega, l)))
                .collect()
        })
        .collect();
    let circuits = (0..KM24_LAYERS)
        .map(|i| km24_circuit(source.instance(), &code, i))
        .collect::<Result<Vec<_>>>()?;
    let delta = default_delta();
    let kappa = proximity_soundness_bound(n, k, &delta);
    let system = Arc::new(ParallelPcppSystem {
        t: KM24_LAYERS,
        x_cols: n,
        proof_cols: 3 * n,
        randomness: r,
        query_map,
        layers: Layers::Km24(Arc::new(checks)),
        verifiers: Vec::new(),
        circuits,
        declared_delta: delta,
        declared_kappa: kappa,
    });
    let psi_ini = honest_table(&system, &code, &assignment_bits(source.ini()))?;
    let psi_tar = honest_table(&system, &code, &assignment_bits(source.tar()))?;
    Ok(Km24Instance {
        system,
        source: source.clone(),
        code,
        k,
        psi_ini,
        psi_tar,
    })
}

/// Records a table after every single-variable change.
struct Walk {
    cur: LayeredAssignment,
    steps: Vec<LayeredAssignment>,
}

impl Walk {
    fn set_v(&mut self, v: usize) {
        if self.cur.v() as usize != v {
            self.cur.set_v(v as Symbol);
            self.steps.push(self.cur.clone());
        }
    }

    fn write(&mut self, layer: usize, offset: usize, row: &BitString) {
        for (c, b) in row.iter().enumerate() {
            if self.cur.bit(layer, offset + c) != b {
                self.cur.set_bit(layer, offset + c, b);
                self.steps.push(self.cur.clone());
            }
        }
    }

    fn write_x(&mut self, layer: usize, row: &BitString) {
        self.write(layer, 0, row);
    }

    fn refresh_proof(&mut self, layer: usize) {
        let pi = honest_proof(&self.cur, layer);
        let offset = self.cur.x_cols();
        self.write(layer, offset, &pi);
    }
}

/// Lifts an exact source path to a value-1 path of the layered instance
/// from `psi_ini` to `psi_tar`, one CSP variable per step.
///
/// For each source step `z -> z'`, layer by layer: move `v` to the layer,
/// rewrite its input row to `E(z')`, then refresh the proof row of the next
/// layer. Verifier `v` never reads its own rows, and every view it sees
/// consists of codewords of `z` and `z'`. After the last step the two proof rows still holding mixed views
/// are refreshed before `v` returns to 0.
pub fn completeness_path(inst: &Km24Instance, source_path: &ReconfigPath) -> Result<Vec<LayeredAssignment>> {
    if !verify_path(&inst.source, source_path, &from_int(1)) {
        return Err(Error::Precondition(
            "source path is not an exact reconfiguration path between the source endpoints".into(),
        ));
    }
    let mut walk = Walk {
        cur: inst.psi_ini.clone(),
        steps: vec![inst.psi_ini.clone()],
    };
    let mut moved = false;
    for pair in source_path.steps().windows(2) {
        if pair[0] == pair[1] {
            continue;
        }
        moved = true;
        let cw = inst.code.encode(&assignment_bits(&pair[1]))?;
        for layer in 0..KM24_LAYERS {
            walk.set_v(layer);
            walk.write_x(layer, &cw);
            walk.refresh_proof((layer + 1) % KM24_LAYERS);
        }
    }
    if moved {
        walk.refresh_proof(1);
        walk.refresh_proof(2);
        walk.set_v(0);
    }
    debug_assert_eq!(walk.cur, inst.psi_tar);
    Ok(walk.steps)
}

/// Majority vote over the decoded input rows other than `v`. `None` when
/// `v` names no layer, fewer than two rows decode, or a bit is tied.
pub fn extract_assignment(inst: &Km24Instance, psi: &LayeredAssignment) -> Result<Option<BitString>> {
    inst.system.check_psi(psi)?;
    let v = psi.v() as usize;
    if v >= KM24_LAYERS {
        return Ok(None);
    }
    let mut votes = Vec::with_capacity(3);
    for j in others(v) {
        if let Decoding::Unique { message, .. } = inst.code.decode_nearest(&psi.x_row(j))? {
            votes.push(message);
        }
    }
    if votes.len() < 2 {
        return Ok(None);
    }
    let len = inst.code.msg_len();
    let mut out = BitString::zeros(len);
    for b in 0..len {
        let ones = votes.iter().filter(|y| y.get(b)).count();
        let zeros = votes.len() - ones;
        if ones == zeros {
            return Ok(None);
        }
        out.set(b, ones > zeros);
    }
    Ok(Some(out))
}
