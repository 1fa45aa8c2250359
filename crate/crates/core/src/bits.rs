//! Dense binary messages, packed 64 bits per word.

use std::fmt;

use crate::error::{Error, Result};

/// A length-`d` binary string, the unit sent to the shuffler.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitMessage {
    d: usize,
    words: Vec<u64>,
}

impl BitMessage {
    pub fn zero(d: usize) -> Self {
        BitMessage {
            d,
            words: vec![0u64; d.div_ceil(64)],
        }
    }

    /// Build from 0-based positions of set bits. Positions may arrive in any
    /// order; duplicates are idempotent.
    pub fn from_ones(d: usize, ones: &[u32]) -> Result<Self> {
        let mut msg = Self::zero(d);
        for &j in ones {
            if j as usize >= d {
                return Err(Error::Domain(format!(
                    "bit index {j} out of range for d={d}"
                )));
            }
            msg.words[(j / 64) as usize] |= 1u64 << (j % 64);
        }
        Ok(msg)
    }

    /// Parse a string of '0'/'1' characters, e.g. "101".
    pub fn from_bit_str(s: &str) -> Result<Self> {
        let mut msg = Self::zero(s.len());
        for (j, c) in s.chars().enumerate() {
            match c {
                '0' => {}
                '1' => msg.toggle(j),
                _ => return Err(Error::Parse(format!("invalid bit character {c:?}"))),
            }
        }
        Ok(msg)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn get(&self, j: usize) -> bool {
        debug_assert!(j < self.d);
        self.words[j / 64] >> (j % 64) & 1 == 1
    }

    #[inline]
    pub fn toggle(&mut self, j: usize) {
        debug_assert!(j < self.d);
        self.words[j / 64] ^= 1u64 << (j % 64);
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// 0-based positions of set bits, ascending.
    pub fn ones(&self) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.count_ones());
        for (wi, &word) in self.words.iter().enumerate() {
            let mut w = word;
            while w != 0 {
                let tz = w.trailing_zeros();
                out.push((wi as u32) * 64 + tz);
                w &= w - 1;
            }
        }
        out
    }

    pub(crate) fn words(&self) -> &[u64] {
        &self.words
    }
}

impl fmt::Display for BitMessage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for j in 0..self.d {
            f.write_str(if self.get(j) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitMessage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitMessage({self})")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_ones() {
        let msg = BitMessage::from_ones(130, &[0, 63, 64, 129]).unwrap();
        assert_eq!(msg.ones(), vec![0, 63, 64, 129]);
        assert_eq!(msg.count_ones(), 4);
        assert!(msg.get(64));
        assert!(!msg.get(65));
    }

    #[test]
    fn out_of_range_rejected() {
        assert!(BitMessage::from_ones(4, &[4]).is_err());
    }

    #[test]
    fn bit_str_display() {
        let msg = BitMessage::from_bit_str("0101").unwrap();
        assert_eq!(msg.to_string(), "0101");
        assert_eq!(msg.ones(), vec![1, 3]);
    }
}
