//! Fixed-length bit strings.
//!
//! Bit `i` of a string is its `i`-th character in the textual form, and the
//! least significant bit when a string is read as an integer (little-endian).

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct BitString {
    bits: Vec<bool>,
}

impl BitString {
    pub fn zeros(len: usize) -> Self {
        BitString {
            bits: vec![false; len],
        }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        BitString { bits }
    }

    /// The low `len` bits of `value`, bit 0 first. `len` must be at most 64.
    pub fn from_u64(value: u64, len: usize) -> Self {
        assert!(len <= 64, "BitString::from_u64 supports at most 64 bits");
        BitString {
            bits: (0..len).map(|i| (value >> i) & 1 == 1).collect(),
        }
    }

    /// Little-endian integer value. Panics if longer than 64 bits.
    pub fn to_u64(&self) -> u64 {
        assert!(self.bits.len() <= 64, "BitString::to_u64 supports at most 64 bits");
        self.bits
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &b)| acc | ((b as u64) << i))
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn set(&mut self, i: usize, bit: bool) {
        self.bits[i] = bit;
    }

    pub fn flip(&mut self, i: usize) {
        self.bits[i] = !self.bits[i];
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.bits
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.bits.iter().copied()
    }

    pub fn weight(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Hamming distance. Panics on a length mismatch.
    pub fn hamming(&self, other: &BitString) -> usize {
        assert_eq!(self.len(), other.len(), "hamming distance of unequal lengths");
        self.bits
            .iter()
            .zip(&other.bits)
            .filter(|(a, b)| a != b)
            .count()
    }

    pub fn xor(&self, other: &BitString) -> BitString {
        assert_eq!(self.len(), other.len(), "xor of unequal lengths");
        BitString {
            bits: self.bits.iter().zip(&other.bits).map(|(a, b)| a ^ b).collect(),
        }
    }

    pub fn concat(parts: &[&BitString]) -> BitString {
        BitString {
            bits: parts.iter().flat_map(|p| p.bits.iter().copied()).collect(),
        }
    }

    pub fn slice(&self, start: usize, len: usize) -> BitString {
        BitString {
            bits: self.bits[start..start + len].to_vec(),
        }
    }

    /// Packs into 64-bit words, bit `i` at word `i / 64`, position `i % 64`.
    pub fn to_words(&self) -> Vec<u64> {
        let mut words = vec![0u64; self.len().div_ceil(64)];
        for (i, &b) in self.bits.iter().enumerate() {
            if b {
                words[i / 64] |= 1 << (i % 64);
            }
        }
        words
    }

    pub fn check_len(&self, what: &'static str, expected: usize) -> Result<()> {
        if self.len() != expected {
            return Err(Error::LengthMismatch {
                what,
                expected,
                got: self.len(),
            });
        }
        Ok(())
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::parse(0, format!("invalid bit character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(BitString::from_bits)
    }
}

impl From<Vec<bool>> for BitString {
    fn from(bits: Vec<bool>) -> Self {
        BitString { bits }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_and_integer_forms_agree() {
        let b: BitString = "1011".parse().unwrap();
        assert_eq!(b.to_u64(), 0b1101);
        assert_eq!(BitString::from_u64(0b1101, 4), b);
        assert_eq!(b.to_string(), "1011");
        assert_eq!(b.weight(), 3);
    }

    #[test]
    fn hamming_and_xor() {
        let a: BitString = "0011".parse().unwrap();
        let b: BitString = "0101".parse().unwrap();
        assert_eq!(a.hamming(&b), 2);
        assert_eq!(a.xor(&b).to_string(), "0110");
    }

    #[test]
    fn words_pack_little_endian() {
        let mut b = BitString::zeros(70);
        b.set(0, true);
        b.set(65, true);
        assert_eq!(b.to_words(), vec![1, 2]);
    }

    #[test]
    fn rejects_bad_characters() {
        assert!("01x".parse::<BitString>().is_err());
    }
}
