//! Poly1305 one-time authenticator: `tag = (F_r(m) mod q + s) mod 2^128`.

use zeroize::{Zeroize, ZeroizeOnDrop};

use crate::field::Fe;
use crate::primitives::Block128;

const CLAMP: [u8; 16] = [
    0xff, 0xff, 0xff, 0x0f, 0xfc, 0xff, 0xff, 0x0f, 0xfc, 0xff, 0xff, 0x0f, 0xfc, 0xff, 0xff, 0x0f,
];

/// One-time Poly1305 key. `r` is always stored clamped.
#[derive(Clone, Zeroize, ZeroizeOnDrop)]
pub struct PolyKey {
    r: [u8; 16],
    s: [u8; 16],
}

impl PolyKey {
    /// Builds a key from raw `r` and `s`, clamping `r`.
    pub fn new(r: &[u8; 16], s: &[u8; 16]) -> Self {
        let mut k = PolyKey { r: *r, s: *s };
        for (b, m) in k.r.iter_mut().zip(CLAMP) {
            *b &= m;
        }
        k
    }

    /// The 32-byte `r || s` layout used by RFC 8439.
    pub fn from_bytes(bytes: &[u8; 32]) -> Self {
        let (r, s) = bytes.split_at(16);
        Self::new(r.try_into().unwrap(), s.try_into().unwrap())
    }

    pub fn r(&self) -> &[u8; 16] {
        &self.r
    }

    pub fn s(&self) -> &[u8; 16] {
        &self.s
    }

    pub fn is_clamped(r: &[u8; 16]) -> bool {
        r.iter().zip(CLAMP).all(|(b, m)| b & !m == 0)
    }
}

impl std::fmt::Debug for PolyKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("PolyKey(..)")
    }
}

/// Evaluates the message polynomial at `r`, reduced mod 2^130 - 5.
pub(crate) fn poly_eval(r: &[u8; 16], data: &[u8]) -> Fe {
    let r = Fe::from_block(r, false);
    let s = r.mul_table();
    let mut h = Fe::ZERO;
    let mut chunks = data.chunks_exact(16);
    for c in &mut chunks {
        h = h
            .add(&Fe::from_block(c.try_into().unwrap(), true))
            .mul(&r, &s);
    }
    let rest = chunks.remainder();
    if !rest.is_empty() {
        let mut last = [0u8; 16];
        last[..rest.len()].copy_from_slice(rest);
        last[rest.len()] = 1;
        h = h.add(&Fe::from_block(&last, false)).mul(&r, &s);
        last.zeroize();
    }
    h
}

/// Poly1305 tag of `data` under `key`.
pub fn poly_tag(key: &PolyKey, data: &[u8]) -> Block128 {
    let h = u128::from_le_bytes(poly_eval(&key.r, data).to_le_bytes16());
    let s = u128::from_le_bytes(key.s);
    Block128(h.wrapping_add(s).to_le_bytes())
}
