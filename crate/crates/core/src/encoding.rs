//! Cumulative ("up-to-k") binary encoding of ordinal labels.
//!
//! A label `y` in `1..=K` becomes `K-1` bits where bit `k` (1-indexed) is set iff `k < y`.
//! Valid codes are therefore a run of ones followed by a run of zeros; a `0 -> 1`
//! transition never occurs. Storage is 0-indexed: `bits[i]` is bit `i + 1`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Result, StormError};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EncodedLabel {
    bits: Vec<u8>,
}

impl EncodedLabel {
    /// Builds a code from raw bits (each must be 0 or 1). The code may be invalid.
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        if bits.is_empty() {
            return Err(StormError::arg("a code needs at least one bit (K >= 2)"));
        }
        if let Some(b) = bits.iter().find(|&&b| b > 1) {
            return Err(StormError::arg(format!("bit value {b} is not 0 or 1")));
        }
        Ok(Self { bits: bits.to_vec() })
    }

    /// The valid code whose first `ones` bits are set.
    fn prefix(ones: usize, len: usize) -> Self {
        let bits = (0..len).map(|i| u8::from(i < ones)).collect();
        Self { bits }
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    /// Number of categories `K` (one more than the code length).
    pub fn cardinality(&self) -> usize {
        self.bits.len() + 1
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }

    pub fn is_valid(&self) -> bool {
        is_valid_code(self)
    }
}

impl fmt::Display for EncodedLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, b) in self.bits.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{b}")?;
        }
        f.write_str(")")
    }
}

pub fn encode_label(label: usize, k: usize) -> Result<EncodedLabel> {
    if k < 2 {
        return Err(StormError::arg(format!("K must be at least 2, got {k}")));
    }
    if label < 1 || label > k {
        return Err(StormError::arg(format!("label {label} outside 1..={k}")));
    }
    Ok(EncodedLabel::prefix(label - 1, k - 1))
}

pub fn decode_label(code: &EncodedLabel) -> Result<usize> {
    if !is_valid_code(code) {
        return Err(StormError::InvalidCode { bits: code.bits.clone() });
    }
    Ok(1 + code.count_ones())
}

pub fn is_valid_code(code: &EncodedLabel) -> bool {
    code.bits.windows(2).all(|w| !(w[0] == 0 && w[1] == 1))
}

/// Closest valid code in Hamming distance; ties go to the smaller decoded label.
///
/// Runs in `O(K)`: the distance to the prefix code with `m` ones is the number of
/// zeros among the first `m` bits plus the number of ones after them.
pub fn nearest_valid_code(code: &EncodedLabel) -> EncodedLabel {
    let len = code.bits.len();
    let mut ones_after: usize = code.count_ones();
    let mut zeros_before = 0usize;
    let mut best = (ones_after, 0usize);
    for m in 1..=len {
        if code.bits[m - 1] == 1 {
            ones_after -= 1;
        } else {
            zeros_before += 1;
        }
        let dist = zeros_before + ones_after;
        if dist < best.0 {
            best = (dist, m);
        }
    }
    EncodedLabel::prefix(best.1, len)
}

/// Repairs then decodes; never fails for a well-formed code.
pub fn repair_and_decode(code: &EncodedLabel) -> usize {
    1 + nearest_valid_code(code).count_ones()
}
