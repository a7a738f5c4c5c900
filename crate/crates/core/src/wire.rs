//! Byte framing for sealed batches. All integers are big-endian.
//!
//! ```text
//! version u8 (=1) | instantiation u8 | agg_mode u8 | start_index u64
//! | count u32 | uniform u8 | lengths (one u32, or count u32s)
//! | ciphertexts | aggregate tag (32, 16 or 17 bytes by mode)
//! ```
//!
//! The uniform form is used exactly when all ciphertexts share one length,
//! which keeps the encoding canonical.

use crate::aggregator::{AggregateTag, Window};
use crate::config::{AggMode, Instantiation};
use crate::engine::SealedBatch;
use crate::error::{Error, Result};
use crate::ootable::Reader;

pub const WIRE_VERSION: u8 = 1;

/// Fixed header bytes before the length field(s).
pub const HEADER_BYTES: usize = 16;

/// Largest item count `decode_batch` will materialize.
pub const MAX_DECODE_ITEMS: u32 = 1 << 20;

fn is_uniform(items: &[Vec<u8>]) -> bool {
    items.windows(2).all(|w| w[0].len() == w[1].len())
}

/// Encoded size of `sealed` without building it.
pub fn encoded_len(sealed: &SealedBatch) -> usize {
    let lens = if is_uniform(&sealed.ciphertexts) {
        4
    } else {
        4 * sealed.ciphertexts.len()
    };
    HEADER_BYTES
        + lens
        + sealed.ciphertexts.iter().map(Vec::len).sum::<usize>()
        + sealed.aggregate.bytes.len()
}

pub fn encode_batch(sealed: &SealedBatch) -> Result<Vec<u8>> {
    let count = u32::try_from(sealed.ciphertexts.len())
        .map_err(|_| Error::Encode("more than 2^32 - 1 items"))?;
    if count == 0 {
        return Err(Error::Encode("empty batch"));
    }
    if sealed.aggregate.bytes.len() != sealed.aggregate.mode.tag_width() {
        return Err(Error::Encode("aggregate width does not match its mode"));
    }
    if sealed.aggregate.window
        != (Window {
            start_index: sealed.start_index,
            count,
        })
    {
        return Err(Error::Encode("aggregate window does not match batch"));
    }
    let mut out = Vec::with_capacity(encoded_len(sealed));
    out.push(WIRE_VERSION);
    out.push(sealed.instantiation.code());
    out.push(sealed.aggregate.mode.code());
    out.extend_from_slice(&sealed.start_index.to_be_bytes());
    out.extend_from_slice(&count.to_be_bytes());
    let uniform = is_uniform(&sealed.ciphertexts);
    out.push(uniform as u8);
    let lens: &[Vec<u8>] = if uniform {
        &sealed.ciphertexts[..1]
    } else {
        &sealed.ciphertexts
    };
    for c in lens {
        let l =
            u32::try_from(c.len()).map_err(|_| Error::Encode("ciphertext longer than 2^32 - 1"))?;
        out.extend_from_slice(&l.to_be_bytes());
    }
    for c in &sealed.ciphertexts {
        out.extend_from_slice(c);
    }
    out.extend_from_slice(&sealed.aggregate.bytes);
    Ok(out)
}

pub fn decode_batch(bytes: &[u8]) -> Result<SealedBatch> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.u8()? != WIRE_VERSION {
        return Err(Error::Decode {
            pos: 0,
            reason: "unknown version",
        });
    }
    let instantiation = Instantiation::from_code(r.u8()?).ok_or(Error::Decode {
        pos: 1,
        reason: "unknown instantiation",
    })?;
    let mode = AggMode::from_code(r.u8()?).map_err(|_| Error::Decode {
        pos: 2,
        reason: "unknown aggregation mode",
    })?;
    let start_index = r.u64()?;
    let count = r.u32()?;
    if count == 0 {
        return Err(Error::Decode {
            pos: 11,
            reason: "empty batch",
        });
    }
    if count > MAX_DECODE_ITEMS {
        return Err(Error::Decode {
            pos: 11,
            reason: "item count exceeds decoder limit",
        });
    }
    let uniform = match r.u8()? {
        0 => false,
        1 => true,
        _ => {
            return Err(Error::Decode {
                pos: 15,
                reason: "bad uniform flag",
            })
        }
    };
    let n = count as usize;
    let lengths: Vec<u64> = if uniform {
        vec![r.u32()? as u64; n]
    } else {
        if (r.remaining() as u64) < 4 * count as u64 {
            return Err(Error::Decode {
                pos: bytes.len(),
                reason: "length table truncated",
            });
        }
        let lens: Vec<u64> = (0..n)
            .map(|_| r.u32().map(u64::from))
            .collect::<Result<_>>()?;
        if n > 1 && lens.windows(2).all(|w| w[0] == w[1]) {
            return Err(Error::Decode {
                pos: HEADER_BYTES,
                reason: "non-canonical length table",
            });
        }
        lens
    };
    let total: u64 = lengths.iter().sum();
    let tag_width = mode.tag_width() as u64;
    let expected = total.checked_add(tag_width).ok_or(Error::Decode {
        pos: r.pos,
        reason: "length overflow",
    })?;
    if (r.remaining() as u64) != expected {
        return Err(Error::Decode {
            pos: r.pos,
            reason: if (r.remaining() as u64) < expected {
                "payload truncated"
            } else {
                "trailing bytes"
            },
        });
    }
    let ciphertexts = lengths
        .iter()
        .map(|l| r.take(*l as usize).map(<[u8]>::to_vec))
        .collect::<Result<Vec<_>>>()?;
    let window = Window { start_index, count };
    let aggregate = AggregateTag {
        mode,
        bytes: r.take(tag_width as usize)?.to_vec(),
        window,
    };
    Ok(SealedBatch {
        instantiation,
        start_index,
        ciphertexts,
        aggregate,
    })
}
