//! Sequential tag aggregation: hash accumulator, XOR, or addition mod
//! 2^130 - 5, as an init / fold / finalize state machine.

use subtle::ConstantTimeEq;
use zeroize::Zeroize;

use crate::config::AggMode;
use crate::error::{Error, Result};
use crate::field::Fe;
use crate::primitives::hash_parts;

/// Window an aggregate covers: `[start_index, start_index + count)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Window {
    pub start_index: u64,
    pub count: u32,
}

#[derive(Clone, Debug)]
enum Acc {
    Hash([u8; 32]),
    Xor([u8; 16]),
    AddQ(Fe),
}

/// Running aggregate `sigma_{i,j}`.
#[derive(Clone, Debug)]
pub struct AggState {
    acc: Acc,
    folded: u64,
}

impl AggState {
    /// Hash mode starts from 32 zero bytes; XOR and Add_q from zero.
    pub fn new(mode: AggMode) -> Self {
        let acc = match mode {
            AggMode::Hash => Acc::Hash([0; 32]),
            AggMode::Xor => Acc::Xor([0; 16]),
            AggMode::AddQ => Acc::AddQ(Fe::ZERO),
        };
        AggState { acc, folded: 0 }
    }

    pub fn mode(&self) -> AggMode {
        match self.acc {
            Acc::Hash(_) => AggMode::Hash,
            Acc::Xor(_) => AggMode::Xor,
            Acc::AddQ(_) => AggMode::AddQ,
        }
    }

    pub fn folded(&self) -> u64 {
        self.folded
    }

    /// Absorbs one per-message tag (16 bytes, or 32 for HMAC tags). Hash
    /// mode takes the tag whole; XOR and Add_q use its first 16 bytes.
    pub fn fold(&mut self, tag: &[u8]) {
        debug_assert!(tag.len() >= 16);
        match &mut self.acc {
            Acc::Hash(acc) => {
                let mut d = hash_parts(&[acc.as_slice(), tag]);
                *acc = d.0;
                d.0.zeroize();
            }
            Acc::Xor(acc) => acc.iter_mut().zip(&tag[..16]).for_each(|(a, t)| *a ^= t),
            Acc::AddQ(acc) => {
                let t = Fe::from_block(tag[..16].try_into().unwrap(), false);
                *acc = acc.add(&t);
            }
        }
        self.folded += 1;
    }

    /// Emits the aggregate for `window`; the number of folds must equal
    /// the window size.
    pub fn finalize(self, window: Window) -> Result<AggregateTag> {
        if self.folded != window.count as u64 {
            return Err(Error::WindowMismatch {
                expected: window.count as u64,
                got: self.folded,
            });
        }
        let bytes = match &self.acc {
            Acc::Hash(a) => a.to_vec(),
            Acc::Xor(a) => a.to_vec(),
            Acc::AddQ(f) => f.to_le_bytes17().to_vec(),
        };
        Ok(AggregateTag {
            mode: self.mode(),
            bytes,
            window,
        })
    }
}

impl Drop for AggState {
    fn drop(&mut self) {
        match &mut self.acc {
            Acc::Hash(a) => a.zeroize(),
            Acc::Xor(a) => a.zeroize(),
            Acc::AddQ(f) => *f = Fe::ZERO,
        }
    }
}

pub fn agg_init(mode: AggMode) -> AggState {
    AggState::new(mode)
}

/// Compact aggregate tag `sigma_{i,i+n}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AggregateTag {
    pub mode: AggMode,
    pub bytes: Vec<u8>,
    pub window: Window,
}

impl AggregateTag {
    /// Constant-time comparison of mode, window and tag bytes.
    pub fn ct_eq(&self, other: &AggregateTag) -> bool {
        let meta = self.mode == other.mode && self.window == other.window;
        let bytes: bool = self.bytes.ct_eq(&other.bytes).into();
        meta & bytes
    }

    /// `mode || width || bytes`.
    pub fn to_wire(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(2 + self.bytes.len());
        out.push(self.mode.code());
        out.push(self.bytes.len() as u8);
        out.extend_from_slice(&self.bytes);
        out
    }

    pub fn from_wire(bytes: &[u8], window: Window) -> Result<AggregateTag> {
        if bytes.len() < 2 {
            return Err(Error::Decode {
                pos: bytes.len(),
                reason: "aggregate tag truncated",
            });
        }
        let mode = AggMode::from_code(bytes[0]).map_err(|_| Error::Decode {
            pos: 0,
            reason: "unknown aggregation mode",
        })?;
        let width = bytes[1] as usize;
        if width != mode.tag_width() {
            return Err(Error::Decode {
                pos: 1,
                reason: "tag width does not match mode",
            });
        }
        if bytes.len() != 2 + width {
            return Err(Error::Decode {
                pos: bytes.len().min(2 + width),
                reason: "aggregate tag length mismatch",
            });
        }
        Ok(AggregateTag {
            mode,
            bytes: bytes[2..].to_vec(),
            window,
        })
    }
}
