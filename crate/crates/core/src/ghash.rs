//! GHASH over GF(2^128), the universal hash inside AES-GCM.
//!
//! Multiplication uses the constant-time 64-bit carry-less technique
//! (integer multiplies with holes every fourth bit) and Karatsuba on the
//! bit-reversed halves, so there are no secret-dependent table lookups.
//! On x86_64 with PCLMULQDQ the carry-less multiply runs in hardware instead.

use crate::primitives::Block128;

#[inline]
fn bmul64(x: u64, y: u64) -> u64 {
    const M0: u64 = 0x1111_1111_1111_1111;
    const M1: u64 = 0x2222_2222_2222_2222;
    const M2: u64 = 0x4444_4444_4444_4444;
    const M3: u64 = 0x8888_8888_8888_8888;
    let (x0, x1, x2, x3) = (x & M0, x & M1, x & M2, x & M3);
    let (y0, y1, y2, y3) = (y & M0, y & M1, y & M2, y & M3);
    let m = |a: u64, b: u64| a.wrapping_mul(b);
    let z0 = m(x0, y0) ^ m(x1, y3) ^ m(x2, y2) ^ m(x3, y1);
    let z1 = m(x0, y1) ^ m(x1, y0) ^ m(x2, y3) ^ m(x3, y2);
    let z2 = m(x0, y2) ^ m(x1, y1) ^ m(x2, y0) ^ m(x3, y3);
    let z3 = m(x0, y3) ^ m(x1, y2) ^ m(x2, y1) ^ m(x3, y0);
    (z0 & M0) | (z1 & M1) | (z2 & M2) | (z3 & M3)
}

/// Incremental GHASH state keyed by `H`.
pub(crate) struct Ghash {
    h0: u64,
    h1: u64,
    h0r: u64,
    h1r: u64,
    h2: u64,
    h2r: u64,
    y0: u64,
    y1: u64,
}

impl Ghash {
    pub fn new(hash_key: &Block128) -> Self {
        let h1 = u64::from_be_bytes(hash_key.0[0..8].try_into().unwrap());
        let h0 = u64::from_be_bytes(hash_key.0[8..16].try_into().unwrap());
        let h0r = h0.reverse_bits();
        let h1r = h1.reverse_bits();
        Ghash {
            h0,
            h1,
            h0r,
            h1r,
            h2: h0 ^ h1,
            h2r: h0r ^ h1r,
            y0: 0,
            y1: 0,
        }
    }

    fn block(&mut self, b: &[u8; 16]) {
        let y1 = self.y1 ^ u64::from_be_bytes(b[0..8].try_into().unwrap());
        let y0 = self.y0 ^ u64::from_be_bytes(b[8..16].try_into().unwrap());
        let y1r = y1.reverse_bits();
        let y0r = y0.reverse_bits();
        let y2 = y0 ^ y1;
        let y2r = y0r ^ y1r;

        let z0 = bmul64(y0, self.h0);
        let z1 = bmul64(y1, self.h1);
        let mut z2 = bmul64(y2, self.h2);
        let mut z0h = bmul64(y0r, self.h0r);
        let mut z1h = bmul64(y1r, self.h1r);
        let mut z2h = bmul64(y2r, self.h2r);
        z2 ^= z0 ^ z1;
        z2h ^= z0h ^ z1h;
        z0h = z0h.reverse_bits() >> 1;
        z1h = z1h.reverse_bits() >> 1;
        z2h = z2h.reverse_bits() >> 1;

        let mut v0 = z0;
        let mut v1 = z0h ^ z2;
        let mut v2 = z1 ^ z2h;
        let mut v3 = z1h;

        v3 = (v3 << 1) | (v2 >> 63);
        v2 = (v2 << 1) | (v1 >> 63);
        v1 = (v1 << 1) | (v0 >> 63);
        v0 <<= 1;

        v2 ^= v0 ^ (v0 >> 1) ^ (v0 >> 2) ^ (v0 >> 7);
        v1 ^= (v0 << 63) ^ (v0 << 62) ^ (v0 << 57);
        v3 ^= v1 ^ (v1 >> 1) ^ (v1 >> 2) ^ (v1 >> 7);
        v2 ^= (v1 << 63) ^ (v1 << 62) ^ (v1 << 57);

        self.y0 = v2;
        self.y1 = v3;
    }

    /// Absorbs `data`, zero-padding the final partial block.
    pub fn update_padded(&mut self, data: &[u8]) {
        let mut chunks = data.chunks_exact(16);
        for c in &mut chunks {
            self.block(c.try_into().unwrap());
        }
        let rest = chunks.remainder();
        if !rest.is_empty() {
            let mut last = [0u8; 16];
            last[..rest.len()].copy_from_slice(rest);
            self.block(&last);
        }
    }

    pub fn finalize(self) -> Block128 {
        let mut out = [0u8; 16];
        out[..8].copy_from_slice(&self.y1.to_be_bytes());
        out[8..].copy_from_slice(&self.y0.to_be_bytes());
        Block128(out)
    }
}

impl Drop for Ghash {
    fn drop(&mut self) {
        use zeroize::Zeroize;
        self.h0.zeroize();
        self.h1.zeroize();
        self.h0r.zeroize();
        self.h1r.zeroize();
        self.h2.zeroize();
        self.h2r.zeroize();
    }
}

fn length_block(data_len: usize) -> [u8; 16] {
    let mut len = [0u8; 16];
    len[8..].copy_from_slice(&((data_len as u64) * 8).to_be_bytes());
    len
}

fn soft_ghash(hash_key: &Block128, data: &[u8]) -> Block128 {
    let mut g = Ghash::new(hash_key);
    g.update_padded(data);
    g.block(&length_block(data.len()));
    g.finalize()
}

/// GHASH of `data` (no associated data) with the GCM length block, XORed
/// with `pad`. With `H = E_k(0)` and `pad = E_k(J0)` this is the GCM tag.
pub fn ghash_tag(hash_key: &Block128, pad: &Block128, data: &[u8]) -> Block128 {
    #[cfg(target_arch = "x86_64")]
    if clmul::available() {
        // SAFETY: the required CPU features were detected at runtime.
        let y = unsafe { clmul::ghash(&hash_key.0, data, &length_block(data.len())) };
        return Block128(y).xor(pad);
    }
    soft_ghash(hash_key, data).xor(pad)
}

#[cfg(target_arch = "x86_64")]
mod clmul {
    use std::arch::x86_64::*;

    pub fn available() -> bool {
        std::arch::is_x86_feature_detected!("pclmulqdq")
            && std::arch::is_x86_feature_detected!("ssse3")
    }

    // Product in GF(2^128) of two byte-reversed GCM elements: 256-bit
    // carry-less product, shift left by one for the reflected bit order,
    // then reduce by x^128 + x^7 + x^2 + x + 1.
    #[target_feature(enable = "pclmulqdq,sse2,ssse3")]
    unsafe fn gfmul(a: __m128i, b: __m128i) -> __m128i {
        let mut lo = _mm_clmulepi64_si128(a, b, 0x00);
        let mut hi = _mm_clmulepi64_si128(a, b, 0x11);
        let mid = _mm_xor_si128(
            _mm_clmulepi64_si128(a, b, 0x10),
            _mm_clmulepi64_si128(a, b, 0x01),
        );
        lo = _mm_xor_si128(lo, _mm_slli_si128(mid, 8));
        hi = _mm_xor_si128(hi, _mm_srli_si128(mid, 8));

        let lo_carry = _mm_srli_epi32(lo, 31);
        let hi_carry = _mm_srli_epi32(hi, 31);
        lo = _mm_slli_epi32(lo, 1);
        hi = _mm_slli_epi32(hi, 1);
        let cross = _mm_srli_si128(lo_carry, 12);
        lo = _mm_or_si128(lo, _mm_slli_si128(lo_carry, 4));
        hi = _mm_or_si128(hi, _mm_slli_si128(hi_carry, 4));
        hi = _mm_or_si128(hi, cross);

        let t = _mm_xor_si128(
            _mm_xor_si128(_mm_slli_epi32(lo, 31), _mm_slli_epi32(lo, 30)),
            _mm_slli_epi32(lo, 25),
        );
        let t_hi = _mm_srli_si128(t, 4);
        lo = _mm_xor_si128(lo, _mm_slli_si128(t, 12));
        let u = _mm_xor_si128(
            _mm_xor_si128(_mm_srli_epi32(lo, 1), _mm_srli_epi32(lo, 2)),
            _mm_srli_epi32(lo, 7),
        );
        lo = _mm_xor_si128(lo, _mm_xor_si128(u, t_hi));
        _mm_xor_si128(hi, lo)
    }

    #[target_feature(enable = "pclmulqdq,sse2,ssse3")]
    unsafe fn load_rev(b: &[u8; 16]) -> __m128i {
        let rev = _mm_set_epi8(0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15);
        _mm_shuffle_epi8(_mm_loadu_si128(b.as_ptr().cast()), rev)
    }

    #[target_feature(enable = "pclmulqdq,sse2,ssse3")]
    pub unsafe fn ghash(hash_key: &[u8; 16], data: &[u8], len_block: &[u8; 16]) -> [u8; 16] {
        let h = load_rev(hash_key);
        let mut y = _mm_setzero_si128();
        let mut chunks = data.chunks_exact(16);
        for c in &mut chunks {
            y = gfmul(_mm_xor_si128(y, load_rev(c.try_into().unwrap())), h);
        }
        let rest = chunks.remainder();
        if !rest.is_empty() {
            let mut last = [0u8; 16];
            last[..rest.len()].copy_from_slice(rest);
            y = gfmul(_mm_xor_si128(y, load_rev(&last)), h);
        }
        y = gfmul(_mm_xor_si128(y, load_rev(len_block)), h);
        let rev = _mm_set_epi8(0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15);
        let mut out = [0u8; 16];
        _mm_storeu_si128(out.as_mut_ptr().cast(), _mm_shuffle_epi8(y, rev));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Bit-serial GF(2^128) multiply straight from the GCM definition.
    fn gf_mul_ref(x: u128, y: u128) -> u128 {
        const R: u128 = 0xe1 << 120;
        let mut z = 0u128;
        let mut v = y;
        for i in 0..128 {
            if (x >> (127 - i)) & 1 == 1 {
                z ^= v;
            }
            v = if v & 1 == 1 { (v >> 1) ^ R } else { v >> 1 };
        }
        z
    }

    fn ghash_ref(h: &[u8; 16], data: &[u8]) -> [u8; 16] {
        let h = u128::from_be_bytes(*h);
        let mut y = 0u128;
        for c in data.chunks(16) {
            let mut b = [0u8; 16];
            b[..c.len()].copy_from_slice(c);
            y = gf_mul_ref(y ^ u128::from_be_bytes(b), h);
        }
        let len = (data.len() as u128) * 8;
        y = gf_mul_ref(y ^ len, h);
        y.to_be_bytes()
    }

    #[test]
    fn matches_bit_serial_reference() {
        let mut seed = 0x1234_5678_9abc_def0u64;
        let mut next = || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            seed
        };
        for len in [0usize, 1, 15, 16, 17, 33, 64, 100] {
            let mut h = [0u8; 16];
            h.iter_mut().for_each(|b| *b = next() as u8);
            let data: Vec<u8> = (0..len).map(|_| next() as u8).collect();
            let tag = ghash_tag(&Block128(h), &Block128::ZERO, &data);
            assert_eq!(tag.0, ghash_ref(&h, &data), "len {len}");
            assert_eq!(
                soft_ghash(&Block128(h), &data).0,
                ghash_ref(&h, &data),
                "soft len {len}"
            );
            #[cfg(target_arch = "x86_64")]
            if clmul::available() {
                let hw = unsafe { clmul::ghash(&h, &data, &length_block(data.len())) };
                assert_eq!(hw, ghash_ref(&h, &data), "clmul len {len}");
            }
        }
    }

    #[test]
    fn empty_data_is_length_block_only() {
        let h = Block128([0x42; 16]);
        let pad = Block128([0x0f; 16]);
        // length block is all zero for empty data, and 0 * H = 0
        assert_eq!(ghash_tag(&h, &pad, b""), pad);
    }

    #[test]
    fn pad_linearity() {
        let h = Block128([9; 16]);
        let (p1, p2) = (Block128([1; 16]), Block128([0xfe; 16]));
        let a = ghash_tag(&h, &p1, b"telemetry");
        let b = ghash_tag(&h, &p2, b"telemetry");
        assert_eq!(a.xor(&b), p1.xor(&p2));
    }
}
