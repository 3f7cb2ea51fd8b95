//! Binary linear codes with exhaustive nearest-codeword decoding.
//!
//! Messages are bit strings of length `k`; message bit `i` selects generator
//! row `i`. The Hadamard code of dimension `k` has one column per
//! `s in [0, 2^k)` with `s` read as a little-endian bit vector, and its
//! codeword for `m` is `(<m, s> mod 2)_s`.

use std::collections::HashMap;
use std::fmt;

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::rational::{ratio, Rational};

pub const MAX_HADAMARD_K: usize = 12;
/// Exhaustive decoding enumerates `2^k` codewords of `block_len` bits; this
/// bounds their product.
pub const MAX_CODE_BITS: u64 = 1 << 26;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CodeFamily {
    Hadamard,
    Generic,
}

impl fmt::Display for CodeFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CodeFamily::Hadamard => "hadamard",
            CodeFamily::Generic => "generic",
        })
    }
}

/// Result of nearest-codeword decoding.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Decoding {
    Unique { message: BitString, distance: usize },
    /// The word is outside the unique-decoding radius, or several codewords
    /// are nearest.
    Ambiguous,
}

impl Decoding {
    pub fn message(&self) -> Option<&BitString> {
        match self {
            Decoding::Unique { message, .. } => Some(message),
            Decoding::Ambiguous => None,
        }
    }
}

#[derive(Clone)]
pub struct LinearCode {
    family: CodeFamily,
    msg_len: usize,
    block_len: usize,
    rows: Vec<BitString>,
    /// Codeword of the message whose little-endian integer value is the index.
    codewords: Vec<Vec<u64>>,
    by_codeword: HashMap<Vec<u64>, usize>,
    distance: usize,
}

impl fmt::Debug for LinearCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LinearCode")
            .field("family", &self.family)
            .field("msg_len", &self.msg_len)
            .field("block_len", &self.block_len)
            .field("distance", &self.distance)
            .finish()
    }
}

impl PartialEq for LinearCode {
    fn eq(&self, other: &Self) -> bool {
        self.family == other.family && self.rows == other.rows
    }
}

pub fn hadamard_code(k: usize) -> Result<LinearCode> {
    if k == 0 || k > MAX_HADAMARD_K {
        return Err(Error::Precondition(format!(
            "hadamard code dimension must be in 1..={MAX_HADAMARD_K}, got {k}"
        )));
    }
    let n = 1usize << k;
    let rows = (0..k)
        .map(|i| BitString::from_bits((0..n).map(|s| (s >> i) & 1 == 1).collect()))
        .collect();
    LinearCode::build(CodeFamily::Hadamard, rows)
}

impl LinearCode {
    /// Code generated by `rows` (one row per message bit). Fails unless the
    /// encoding is injective.
    pub fn from_generator(rows: Vec<BitString>) -> Result<Self> {
        LinearCode::build(CodeFamily::Generic, rows)
    }

    fn build(family: CodeFamily, rows: Vec<BitString>) -> Result<Self> {
        let k = rows.len();
        if k == 0 {
            return Err(Error::Precondition("generator needs at least one row".into()));
        }
        let n = rows[0].len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Precondition("generator rows must share a positive length".into()));
        }
        let size = (1u128 << k.min(127)) * n as u128;
        if k >= 64 || size > MAX_CODE_BITS as u128 {
            return Err(Error::BudgetExceeded {
                what: "codeword table",
                size,
                limit: MAX_CODE_BITS,
            });
        }
        let packed_rows: Vec<Vec<u64>> = rows.iter().map(BitString::to_words).collect();
        let words = n.div_ceil(64);
        let mut codewords = vec![vec![0u64; words]; 1 << k];
        for idx in 1usize..(1 << k) {
            let low = idx & (idx - 1);
            let row = &packed_rows[idx.trailing_zeros() as usize];
            let cw: Vec<u64> = codewords[low].iter().zip(row).map(|(a, b)| a ^ b).collect();
            codewords[idx] = cw;
        }
        let distance = codewords[1..]
            .iter()
            .map(|cw| cw.iter().map(|w| w.count_ones() as usize).sum::<usize>())
            .min()
            .unwrap_or(0);
        if distance == 0 {
            return Err(Error::Precondition(
                "generator rows are linearly dependent; encoding is not injective".into(),
            ));
        }
        let by_codeword = codewords
            .iter()
            .enumerate()
            .map(|(i, cw)| (cw.clone(), i))
            .collect();
        Ok(LinearCode {
            family,
            msg_len: k,
            block_len: n,
            rows,
            codewords,
            by_codeword,
            distance,
        })
    }

    pub fn family(&self) -> CodeFamily {
        self.family
    }

    pub fn msg_len(&self) -> usize {
        self.msg_len
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn generator(&self) -> &[BitString] {
        &self.rows
    }

    /// Exact minimum distance (minimum nonzero codeword weight).
    pub fn min_distance(&self) -> usize {
        self.distance
    }

    pub fn relative_distance(&self) -> Rational {
        ratio(self.distance as u64, self.block_len as u64)
    }

    /// `floor((d - 1) / 2)`.
    pub fn unique_radius(&self) -> usize {
        (self.distance - 1) / 2
    }

    /// `family k` tag used in system files, e.g. `hadamard 3`.
    pub fn tag(&self) -> String {
        format!("{} {}", self.family, self.msg_len)
    }

    /// Whether proximity parameter `delta` keeps every word that is not
    /// `delta`-far from a codeword strictly inside the unique-decoding
    /// radius: words closer than `delta * n` are within `d / 2` iff
    /// `2 * delta <= d / n`.
    pub fn admits_proximity(&self, delta: &Rational) -> bool {
        delta * ratio(2, 1) <= self.relative_distance()
    }

    pub fn check_proximity(&self, delta: &Rational) -> Result<()> {
        if !self.admits_proximity(delta) {
            return Err(Error::Precondition(format!(
                "proximity {delta} exceeds half the relative distance {} of {}",
                self.relative_distance(),
                self.tag()
            )));
        }
        Ok(())
    }

    pub fn encode(&self, msg: &BitString) -> Result<BitString> {
        msg.check_len("message", self.msg_len)?;
        let idx = msg.to_u64() as usize;
        Ok(self.unpack(&self.codewords[idx]))
    }

    /// Message of `word` if it is exactly a codeword.
    pub fn exact_message(&self, word: &BitString) -> Option<BitString> {
        if word.len() != self.block_len {
            return None;
        }
        self.by_codeword
            .get(&word.to_words())
            .map(|&i| BitString::from_u64(i as u64, self.msg_len))
    }

    pub fn decode_nearest(&self, word: &BitString) -> Result<Decoding> {
        word.check_len("word", self.block_len)?;
        let w = word.to_words();
        let mut best = usize::MAX;
        let mut best_idx = 0;
        let mut tie = false;
        for (i, cw) in self.codewords.iter().enumerate() {
            let d: usize = cw.iter().zip(&w).map(|(a, b)| (a ^ b).count_ones() as usize).sum();
            if d < best {
                best = d;
                best_idx = i;
                tie = false;
            } else if d == best {
                tie = true;
            }
        }
        if tie || best > self.unique_radius() {
            return Ok(Decoding::Ambiguous);
        }
        Ok(Decoding::Unique {
            message: BitString::from_u64(best_idx as u64, self.msg_len),
            distance: best,
        })
    }

    fn unpack(&self, words: &[u64]) -> BitString {
        BitString::from_bits(
            (0..self.block_len)
                .map(|i| (words[i / 64] >> (i % 64)) & 1 == 1)
                .collect(),
        )
    }
}

/// Free-function form of [`LinearCode::min_distance`].
pub fn min_distance(code: &LinearCode) -> usize {
    code.min_distance()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    /// Pairwise distance over all distinct message pairs, without using
    /// linearity.
    fn pairwise_min_distance(code: &LinearCode) -> usize {
        let k = code.msg_len();
        let words: Vec<BitString> = (0..1u64 << k)
            .map(|m| code.encode(&BitString::from_u64(m, k)).unwrap())
            .collect();
        let mut best = usize::MAX;
        for i in 0..words.len() {
            for j in i + 1..words.len() {
                best = best.min(words[i].hamming(&words[j]));
            }
        }
        best
    }

    #[test]
    fn hadamard_k2_codewords() {
        let c = hadamard_code(2).unwrap();
        assert_eq!(c.block_len(), 4);
        assert_eq!(c.encode(&bs("00")).unwrap(), bs("0000"));
        assert_eq!(c.encode(&bs("10")).unwrap(), bs("0101"));
        assert_eq!(c.encode(&bs("01")).unwrap(), bs("0011"));
        assert_eq!(c.encode(&bs("11")).unwrap(), bs("0110"));
        assert_eq!(c.min_distance(), 2);
        assert_eq!(pairwise_min_distance(&c), 2);
        assert_eq!(c.tag(), "hadamard 2");
    }

    #[test]
    fn hadamard_k3_all_ones_is_column_parity() {
        let c = hadamard_code(3).unwrap();
        let cw = c.encode(&bs("111")).unwrap();
        for s in 0..8usize {
            assert_eq!(cw.get(s), s.count_ones() % 2 == 1, "column {s}");
        }
    }

    #[test]
    fn hadamard_distances() {
        for k in 1..=6 {
            let c = hadamard_code(k).unwrap();
            assert_eq!(c.min_distance(), 1 << (k - 1));
            assert_eq!(c.relative_distance(), ratio(1, 2));
            if k <= 4 {
                assert_eq!(pairwise_min_distance(&c), 1 << (k - 1));
            }
        }
        assert!(hadamard_code(0).is_err());
        assert!(hadamard_code(MAX_HADAMARD_K + 1).is_err());
    }

    #[test]
    fn single_row_code_distance_is_row_weight() {
        let c = LinearCode::from_generator(vec![bs("10110")]).unwrap();
        assert_eq!(c.min_distance(), 3);
        assert_eq!(min_distance(&c), 3);
        assert!(LinearCode::from_generator(vec![bs("0000")]).is_err());
        assert!(LinearCode::from_generator(vec![bs("0110"), bs("0110")]).is_err());
        assert!(LinearCode::from_generator(vec![bs("0110"), bs("01")]).is_err());
    }

    #[test]
    fn decoding_examples() {
        let c2 = hadamard_code(2).unwrap();
        let w = c2.encode(&bs("10")).unwrap();
        assert_eq!(
            c2.decode_nearest(&w).unwrap(),
            Decoding::Unique { message: bs("10"), distance: 0 }
        );
        for i in 0..4 {
            let mut bad = w.clone();
            bad.flip(i);
            assert_eq!(c2.decode_nearest(&bad).unwrap(), Decoding::Ambiguous);
        }

        let c3 = hadamard_code(3).unwrap();
        assert_eq!(c3.unique_radius(), 1);
        let mut w = c3.encode(&bs("101")).unwrap();
        w.flip(6);
        assert_eq!(
            c3.decode_nearest(&w).unwrap(),
            Decoding::Unique { message: bs("101"), distance: 1 }
        );
        assert!(c3.decode_nearest(&bs("0101")).is_err());
        assert!(c3.encode(&bs("01")).is_err());
    }

    #[test]
    fn exact_codeword_lookup() {
        let c = hadamard_code(3).unwrap();
        let w = c.encode(&bs("011")).unwrap();
        assert_eq!(c.exact_message(&w), Some(bs("011")));
        let mut bad = w.clone();
        bad.flip(0);
        assert_eq!(c.exact_message(&bad), None);
    }

    #[test]
    fn proximity_admission() {
        let c = hadamard_code(2).unwrap();
        assert!(c.admits_proximity(&ratio(1, 4)));
        assert!(!c.admits_proximity(&ratio(1, 3)));
        assert!(c.check_proximity(&ratio(1, 2)).is_err());
    }

    proptest! {
        #[test]
        fn decode_inverts_encode_within_radius(k in 1usize..=5, m in any::<u64>(), flips in proptest::collection::vec(any::<usize>(), 0..4)) {
            let c = hadamard_code(k).unwrap();
            let msg = BitString::from_u64(m & ((1 << k) - 1), k);
            let mut w = c.encode(&msg).unwrap();
            let mut flipped = std::collections::BTreeSet::new();
            for f in flips.into_iter().take(c.unique_radius()) {
                flipped.insert(f % c.block_len());
            }
            for &f in &flipped {
                w.flip(f);
            }
            prop_assert_eq!(
                c.decode_nearest(&w).unwrap(),
                Decoding::Unique { message: msg, distance: flipped.len() }
            );
        }

        #[test]
        fn hadamard_is_linear(k in 1usize..=6, a in any::<u64>(), b in any::<u64>()) {
            let c = hadamard_code(k).unwrap();
            let mask = (1u64 << k) - 1;
            let (ma, mb) = (BitString::from_u64(a & mask, k), BitString::from_u64(b & mask, k));
            let lhs = c.encode(&ma.xor(&mb)).unwrap();
            let rhs = c.encode(&ma).unwrap().xor(&c.encode(&mb).unwrap());
            prop_assert_eq!(lhs, rhs);
        }
    }
}
