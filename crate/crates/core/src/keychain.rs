//! Root key generation and forward-secure key evolution.
//!
//! The chain is `sk_{i+1} = H(sk_i)` (truncated to kappa bits), applied to
//! both the encryption and MAC components. Superseded key bytes are
//! overwritten before the new state is handed out.

use rand::{CryptoRng, RngCore};
use zeroize::{Zeroize, ZeroizeOnDrop, Zeroizing};

use crate::config::{InstantiationConfig, Kappa};
use crate::error::{Error, Result};
use crate::primitives::{hash, hash_parts, prf_block};

pub const KEY_RECORD_MAGIC: &[u8; 4] = b"GKS1";

/// Which chain component a one-time key is derived from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KeyRole {
    Enc,
    Mac,
}

/// Evolving key pair `(sk_i, sk_i')` at absolute index `i`.
#[derive(Clone, Zeroize, ZeroizeOnDrop)]
pub struct KeyState {
    #[zeroize(skip)]
    kappa: Kappa,
    index: u64,
    sk: [u8; 32],
    sk_prime: [u8; 32],
}

impl std::fmt::Debug for KeyState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KeyState")
            .field("kappa", &self.kappa.bits())
            .field("index", &self.index)
            .finish_non_exhaustive()
    }
}

/// Per-index one-time keys: `s_j` for the keystream and the MAC key.
pub struct OneTimeKeys {
    pub j: u64,
    pub enc: Zeroizing<Vec<u8>>,
    pub mac: Zeroizing<Vec<u8>>,
}

impl KeyState {
    fn from_parts(kappa: Kappa, index: u64, sk: &[u8], sk_prime: &[u8]) -> Self {
        let w = kappa.key_bytes();
        let mut s = KeyState {
            kappa,
            index,
            sk: [0; 32],
            sk_prime: [0; 32],
        };
        s.sk[..w].copy_from_slice(&sk[..w]);
        s.sk_prime[..w].copy_from_slice(&sk_prime[..w]);
        s
    }

    pub fn kappa(&self) -> Kappa {
        self.kappa
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    /// Current encryption chain key `sk_i`.
    pub fn enc_key(&self) -> &[u8] {
        &self.sk[..self.kappa.key_bytes()]
    }

    /// Current MAC chain key `sk_i'`.
    pub fn mac_key(&self) -> &[u8] {
        &self.sk_prime[..self.kappa.key_bytes()]
    }

    /// Computes the successor state and wipes `self`. The returned state is
    /// the only remaining holder of key material.
    #[allow(clippy::should_implement_trait)]
    pub fn next(&mut self) -> Result<KeyState> {
        self.step(1)
    }

    /// Advances one step in place (`index + 1`). The previous keys are
    /// overwritten.
    pub fn upd(&mut self) -> Result<()> {
        self.step_in_place(1)
    }

    /// One hash step that jumps the index by a whole window of `n`. Used by
    /// the precomputed path, which evolves the chain once per window.
    pub fn advance_window(&mut self, n: u64) -> Result<()> {
        self.step_in_place(n)
    }

    fn next_index(&self, by: u64) -> Result<u64> {
        self.index
            .checked_add(by)
            .filter(|i| *i < u64::MAX)
            .ok_or(Error::ChainExhausted(self.index))
    }

    fn step(&mut self, by: u64) -> Result<KeyState> {
        let mut next = self.clone();
        next.step_in_place(by)?;
        self.zeroize();
        Ok(next)
    }

    fn step_in_place(&mut self, by: u64) -> Result<()> {
        let index = self.next_index(by)?;
        let w = self.kappa.key_bytes();
        let mut a = hash(&self.sk[..w]);
        let mut b = hash(&self.sk_prime[..w]);
        self.sk[..w].copy_from_slice(&a.0[..w]);
        self.sk_prime[..w].copy_from_slice(&b.0[..w]);
        a.0.zeroize();
        b.0.zeroize();
        self.index = index;
        Ok(())
    }

    /// Whether both key buffers are all zero (a spent state).
    pub fn is_wiped(&self) -> bool {
        self.sk.iter().chain(self.sk_prime.iter()).all(|b| *b == 0)
    }

    /// One-time key for index `j` of the window `[index, index + n)`.
    ///
    /// `Enc` gives `PRF_{sk_i}(j)`. `Mac` gives `PRF_{sk_i'}(j)` at width 16
    /// and `PRF_{sk_i'}(2j) || PRF_{sk_i'}(2j + 1)` at width 32.
    pub fn derive_intra(
        &self,
        n: u64,
        j: u64,
        role: KeyRole,
        width: usize,
    ) -> Result<Zeroizing<Vec<u8>>> {
        self.check_window(n, j)?;
        if width != 16 && width != 32 {
            return Err(Error::InvalidArgument(
                "one-time key width must be 16 or 32",
            ));
        }
        let mut out = Zeroizing::new(Vec::with_capacity(width));
        match (role, width) {
            (KeyRole::Enc, 16) => out.extend_from_slice(&prf_block(self.enc_key(), j)?.0),
            (KeyRole::Enc, _) => {
                return Err(Error::InvalidArgument("encryption keys are 16 bytes"))
            }
            (KeyRole::Mac, 16) => out.extend_from_slice(&prf_block(self.mac_key(), j)?.0),
            (KeyRole::Mac, _) => {
                let j2 =
                    j.checked_mul(2)
                        .filter(|v| *v < u64::MAX)
                        .ok_or(Error::InvalidArgument(
                            "index too large for 32-byte derivation",
                        ))?;
                out.extend_from_slice(&prf_block(self.mac_key(), j2)?.0);
                out.extend_from_slice(&prf_block(self.mac_key(), j2 + 1)?.0);
            }
        }
        Ok(out)
    }

    /// Both one-time keys for index `j`.
    pub fn one_time_keys(&self, n: u64, j: u64, mac_width: usize) -> Result<OneTimeKeys> {
        Ok(OneTimeKeys {
            j,
            enc: self.derive_intra(n, j, KeyRole::Enc, 16)?,
            mac: self.derive_intra(n, j, KeyRole::Mac, mac_width)?,
        })
    }

    /// Seed of the Poly1305 `r` for the first index of the window,
    /// `PRF_{sk_i'}(0)`. Index 0 is never a message index (chains start at 1),
    /// so it cannot collide with a per-index key. Later indices use
    /// [`ratchet_window_key`].
    pub fn window_mac_key(&self) -> Result<Zeroizing<[u8; 16]>> {
        Ok(Zeroizing::new(prf_block(self.mac_key(), 0)?.0))
    }

    pub fn check_window(&self, n: u64, j: u64) -> Result<()> {
        if j < self.index || j - self.index >= n {
            return Err(Error::OutOfWindow {
                index: j,
                start: self.index,
                count: n,
            });
        }
        Ok(())
    }

    /// `GKS1 || kappa/8 || be64(index) || sk || sk'`.
    pub fn to_record(&self) -> Zeroizing<Vec<u8>> {
        let w = self.kappa.key_bytes();
        let mut out = Zeroizing::new(Vec::with_capacity(13 + 2 * w));
        out.extend_from_slice(KEY_RECORD_MAGIC);
        out.push(w as u8);
        out.extend_from_slice(&self.index.to_be_bytes());
        out.extend_from_slice(self.enc_key());
        out.extend_from_slice(self.mac_key());
        out
    }

    pub fn from_record(bytes: &[u8]) -> Result<KeyState> {
        let (state, used) = KeyState::parse_record(bytes)?;
        if used != bytes.len() {
            return Err(Error::Decode {
                pos: used,
                reason: "trailing bytes after key record",
            });
        }
        Ok(state)
    }

    /// Parses a record prefix, returning the state and bytes consumed.
    pub(crate) fn parse_record(bytes: &[u8]) -> Result<(KeyState, usize)> {
        if bytes.len() < 13 {
            return Err(Error::Decode {
                pos: bytes.len(),
                reason: "key record truncated",
            });
        }
        if &bytes[..4] != KEY_RECORD_MAGIC {
            return Err(Error::Decode {
                pos: 0,
                reason: "bad key record magic",
            });
        }
        let kappa = Kappa::from_key_bytes(bytes[4]).ok_or(Error::Decode {
            pos: 4,
            reason: "unsupported key width",
        })?;
        let index = u64::from_be_bytes(bytes[5..13].try_into().unwrap());
        let w = kappa.key_bytes();
        let end = 13 + 2 * w;
        if bytes.len() < end {
            return Err(Error::Decode {
                pos: bytes.len(),
                reason: "key record truncated",
            });
        }
        Ok((
            KeyState::from_parts(kappa, index, &bytes[13..13 + w], &bytes[13 + w..end]),
            end,
        ))
    }
}

/// Root keys `(sk_1, sk_1')` drawn independently from `entropy`.
/// One-way step of the in-window `r` seed, `w <- AES_w(0)`. Knowing the
/// current seed gives no handle on earlier ones.
pub fn ratchet_window_key(w: &mut [u8; 16]) -> Result<()> {
    let mut next = prf_block(&w[..], 0)?;
    w.copy_from_slice(&next.0);
    next.0.zeroize();
    Ok(())
}

pub fn kg<R: RngCore + CryptoRng>(
    config: &InstantiationConfig,
    entropy: &mut R,
) -> Result<KeyState> {
    config.validate()?;
    let w = config.kappa.key_bytes();
    let mut buf = Zeroizing::new([0u8; 64]);
    entropy
        .try_fill_bytes(&mut buf[..2 * w])
        .map_err(|e| Error::KeyGeneration(e.to_string()))?;
    Ok(KeyState::from_parts(
        config.kappa,
        1,
        &buf[..w],
        &buf[w..2 * w],
    ))
}

/// Root keys from a single seed: `sk_1 = H(seed || 0)`, `sk_1' = H(seed || 1)`,
/// each truncated to kappa bits.
pub fn kg_unified(config: &InstantiationConfig, seed: &[u8]) -> Result<KeyState> {
    config.validate()?;
    let mut a = hash_parts(&[seed, &[0]]);
    let mut b = hash_parts(&[seed, &[1]]);
    let s = KeyState::from_parts(config.kappa, 1, &a.0, &b.0);
    a.0.zeroize();
    b.0.zeroize();
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Instantiation;
    use rand::SeedableRng;

    fn cfg() -> InstantiationConfig {
        InstantiationConfig::new(Instantiation::GraphenePoly, 8, 16)
    }

    #[test]
    fn kg_shapes() {
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(1);
        let s = kg(&cfg(), &mut rng).unwrap();
        assert_eq!(s.index(), 1);
        assert_eq!(s.enc_key().len(), 16);
        assert_eq!(s.mac_key().len(), 16);
        assert_ne!(s.enc_key(), s.mac_key());
        let t = kg(&cfg(), &mut rng).unwrap();
        assert_ne!(s.enc_key(), t.enc_key());
    }

    #[test]
    fn unified_seed_vector() {
        let s = kg_unified(&cfg(), &[0u8; 32]).unwrap();
        assert_eq!(hex::encode(s.enc_key()), "7f9c9e31ac8256ca2f258583df262dbc");
        assert_eq!(hex::encode(s.mac_key()), "1fd4247443c9440cb3c48c2885193719");
    }

    #[test]
    fn upd_256_zero_key() {
        let mut s = KeyState::from_parts(Kappa::K256, 5, &[0; 32], &[0; 32]);
        s.upd().unwrap();
        assert_eq!(
            hex::encode(s.enc_key()),
            "66687aadf862bd776c8fc18b8e9f8e20089714856ee233b3902a591d0d5f2925"
        );
        assert_eq!(s.index(), 6);
    }

    #[test]
    fn upd_counts_and_wipes() {
        let mut s = kg_unified(&cfg(), b"seed").unwrap();
        let next = s.next().unwrap();
        assert!(s.is_wiped());
        assert_eq!(next.index(), 2);
        let mut n = next.clone();
        n.upd().unwrap();
        n.upd().unwrap();
        assert_eq!(n.index(), next.index() + 2);
        // 128-bit chains truncate SHA-256 to its first 16 bytes
        assert_eq!(n.enc_key(), &hash(&hash(next.enc_key()).0[..16]).0[..16]);
    }

    #[test]
    fn chain_exhaustion() {
        let mut s = KeyState::from_parts(Kappa::K128, u64::MAX - 1, &[1; 16], &[2; 16]);
        assert_eq!(s.upd(), Err(Error::ChainExhausted(u64::MAX - 1)));
        let mut s = KeyState::from_parts(Kappa::K128, u64::MAX - 4, &[1; 16], &[2; 16]);
        assert!(s.advance_window(8).is_err());
    }

    #[test]
    fn derive_intra_window_and_widths() {
        let s = kg_unified(&cfg(), b"w").unwrap();
        let n = 8;
        assert!(s.derive_intra(n, 0, KeyRole::Enc, 16).is_err());
        assert!(s.derive_intra(n, 9, KeyRole::Enc, 16).is_err());
        let e1 = s.derive_intra(n, 1, KeyRole::Enc, 16).unwrap();
        let e2 = s.derive_intra(n, 2, KeyRole::Enc, 16).unwrap();
        assert_ne!(*e1, *e2);
        assert_eq!(&e1[..], &prf_block(s.enc_key(), 1).unwrap().0);
        let m = s.derive_intra(n, 3, KeyRole::Mac, 32).unwrap();
        assert_eq!(&m[..16], &prf_block(s.mac_key(), 6).unwrap().0);
        assert_eq!(&m[16..], &prf_block(s.mac_key(), 7).unwrap().0);
        assert!(s.derive_intra(n, 3, KeyRole::Mac, 24).is_err());
        let otk = s.one_time_keys(n, 4, 16).unwrap();
        assert_eq!(otk.j, 4);
        assert_eq!(otk.mac.len(), 16);
    }

    #[test]
    fn record_roundtrip_and_errors() {
        let s = kg_unified(&cfg(), b"r").unwrap();
        let rec = s.to_record();
        assert_eq!(rec.len(), 45);
        let back = KeyState::from_record(&rec).unwrap();
        assert_eq!(back.to_record(), rec);
        assert!(KeyState::from_record(&rec[..20]).is_err());
        let mut bad = rec.to_vec();
        bad[0] = b'X';
        assert!(KeyState::from_record(&bad).is_err());
        bad = rec.to_vec();
        bad[4] = 24;
        assert!(KeyState::from_record(&bad).is_err());
    }

    #[test]
    fn deterministic_replay() {
        let mut a = kg_unified(&cfg(), b"same").unwrap();
        let mut b = kg_unified(&cfg(), b"same").unwrap();
        for _ in 0..5 {
            a.upd().unwrap();
            b.upd().unwrap();
            assert_eq!(a.to_record(), b.to_record());
        }
        a.advance_window(8).unwrap();
        b.advance_window(8).unwrap();
        assert_eq!(a.to_record(), b.to_record());
    }
}
