//! Arithmetic modulo q = 2^130 - 5, shared by Poly1305 and the `Add_q`
//! aggregation mode.
//!
//! Elements are five 26-bit limbs, little-endian. Limbs may hold values
//! slightly above 2^26 between operations; `freeze` produces the canonical
//! representative.

use subtle::ConditionallySelectable;

const MASK26: u64 = 0x3ff_ffff;

#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Fe([u64; 5]);

impl Fe {
    pub const ZERO: Fe = Fe([0; 5]);

    /// Loads 16 little-endian bytes, optionally setting bit 128 (the Poly1305
    /// block terminator).
    pub fn from_block(b: &[u8; 16], hibit: bool) -> Fe {
        let lo = u64::from_le_bytes(b[0..8].try_into().unwrap());
        let hi = u64::from_le_bytes(b[8..16].try_into().unwrap());
        Fe([
            lo & MASK26,
            (lo >> 26) & MASK26,
            ((lo >> 52) | (hi << 12)) & MASK26,
            (hi >> 14) & MASK26,
            (hi >> 40) | ((hibit as u64) << 24),
        ])
    }

    #[cfg(test)]
    /// Loads up to 17 little-endian bytes (values below 2^136) and reduces
    /// the result once so that limbs fit the 26-bit shape.
    pub fn from_le_bytes17(b: &[u8; 17]) -> Fe {
        let mut lo = [0u8; 16];
        lo.copy_from_slice(&b[..16]);
        let mut f = Fe::from_block(&lo, false);
        f.0[4] |= (b[16] as u64) << 24;
        f.carry();
        f
    }

    pub fn add(&self, o: &Fe) -> Fe {
        let mut r = Fe([
            self.0[0] + o.0[0],
            self.0[1] + o.0[1],
            self.0[2] + o.0[2],
            self.0[3] + o.0[3],
            self.0[4] + o.0[4],
        ]);
        r.carry();
        r
    }

    /// Multiplication with `r` precomputed as `(r, 5*r[1..])`.
    pub fn mul(&self, r: &Fe, s: &[u64; 4]) -> Fe {
        let h = &self.0;
        let r = &r.0;
        let d0 = h[0] * r[0] + h[1] * s[3] + h[2] * s[2] + h[3] * s[1] + h[4] * s[0];
        let d1 = h[0] * r[1] + h[1] * r[0] + h[2] * s[3] + h[3] * s[2] + h[4] * s[1];
        let d2 = h[0] * r[2] + h[1] * r[1] + h[2] * r[0] + h[3] * s[3] + h[4] * s[2];
        let d3 = h[0] * r[3] + h[1] * r[2] + h[2] * r[1] + h[3] * r[0] + h[4] * s[3];
        let d4 = h[0] * r[4] + h[1] * r[3] + h[2] * r[2] + h[3] * r[1] + h[4] * r[0];

        let mut c = d0 >> 26;
        let h0 = d0 & MASK26;
        let d1 = d1 + c;
        c = d1 >> 26;
        let h1 = d1 & MASK26;
        let d2 = d2 + c;
        c = d2 >> 26;
        let h2 = d2 & MASK26;
        let d3 = d3 + c;
        c = d3 >> 26;
        let h3 = d3 & MASK26;
        let d4 = d4 + c;
        c = d4 >> 26;
        let h4 = d4 & MASK26;
        let h0 = h0 + c * 5;
        let c = h0 >> 26;
        Fe([h0 & MASK26, h1 + c, h2, h3, h4])
    }

    /// The `5 * r[i]` multipliers used by `mul`.
    pub fn mul_table(&self) -> [u64; 4] {
        [self.0[1] * 5, self.0[2] * 5, self.0[3] * 5, self.0[4] * 5]
    }

    fn carry(&mut self) {
        let h = &mut self.0;
        let mut c;
        c = h[0] >> 26;
        h[0] &= MASK26;
        h[1] += c;
        c = h[1] >> 26;
        h[1] &= MASK26;
        h[2] += c;
        c = h[2] >> 26;
        h[2] &= MASK26;
        h[3] += c;
        c = h[3] >> 26;
        h[3] &= MASK26;
        h[4] += c;
        c = h[4] >> 26;
        h[4] &= MASK26;
        h[0] += c * 5;
        c = h[0] >> 26;
        h[0] &= MASK26;
        h[1] += c;
    }

    /// Fully reduced representative in `[0, q)`.
    pub fn freeze(&self) -> Fe {
        let mut h = *self;
        h.carry();
        h.carry();

        // g = h + 5 - 2^130; keep g when it does not underflow.
        let mut g = [0u64; 5];
        let mut c = 5u64;
        for (gi, hi) in g.iter_mut().zip(h.0) {
            let t = hi + c;
            *gi = t & MASK26;
            c = t >> 26;
        }
        // c == 1 exactly when h >= q.
        let take_g = subtle::Choice::from(c as u8);
        let mut out = [0u64; 5];
        for i in 0..5 {
            out[i] = u64::conditional_select(&h.0[i], &g[i], take_g);
        }
        Fe(out)
    }

    /// Canonical 17-byte little-endian encoding (value < 2^130).
    pub fn to_le_bytes17(self) -> [u8; 17] {
        let h = self.freeze().0;
        let mut acc: u128 = 0;
        for (i, limb) in h.iter().take(4).enumerate() {
            acc |= (*limb as u128) << (26 * i);
        }
        // bits 0..104 so far; limb 4 carries bits 104..130.
        acc |= ((h[4] as u128) & ((1 << 24) - 1)) << 104;
        let mut out = [0u8; 17];
        out[..16].copy_from_slice(&acc.to_le_bytes());
        out[16] = (h[4] >> 24) as u8;
        out
    }

    /// Low 128 bits of the canonical value, little-endian.
    pub fn to_le_bytes16(self) -> [u8; 16] {
        let b = self.to_le_bytes17();
        let mut out = [0u8; 16];
        out.copy_from_slice(&b[..16]);
        out
    }
}
