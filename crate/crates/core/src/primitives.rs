//! Concrete symmetric primitives behind the framework's abstract roles:
//! AES as PRF and keystream generator, SHA-256 as the chain hash, and the
//! HMAC / AES-CBC pair used by the standard baseline.

use aes::cipher::{BlockEncrypt, KeyInit};
use aes::{Aes128Dec, Aes128Enc, Aes256Dec, Aes256Enc};
use cbc::cipher::block_padding::Pkcs7;
use cbc::cipher::{BlockDecryptMut, BlockEncryptMut, KeyIvInit};
use hmac::{Hmac, Mac};
use sha2::{Digest, Sha256};
use subtle::ConstantTimeEq;
use zeroize::Zeroize;

use crate::error::{Error, Result};

pub use crate::ghash::ghash_tag;
pub use crate::poly1305::{poly_tag, PolyKey};

/// A 16-byte block: PRF output, GHASH/Poly1305 tag, or counter block.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Block128(pub [u8; 16]);

impl Block128 {
    pub const ZERO: Block128 = Block128([0; 16]);

    pub fn xor(&self, other: &Block128) -> Block128 {
        let mut out = self.0;
        out.iter_mut().zip(other.0).for_each(|(a, b)| *a ^= b);
        Block128(out)
    }

    pub fn ct_eq(&self, other: &Block128) -> bool {
        self.0.ct_eq(&other.0).into()
    }
}

impl std::fmt::Debug for Block128 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Block128(")?;
        self.0.iter().try_for_each(|b| write!(f, "{b:02x}"))?;
        write!(f, ")")
    }
}

/// A SHA-256 output.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Digest256(pub [u8; 32]);

impl std::fmt::Debug for Digest256 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Digest256(")?;
        self.0.iter().try_for_each(|b| write!(f, "{b:02x}"))?;
        write!(f, ")")
    }
}

/// An expanded AES key (128 or 256 bits, picked by key length).
#[derive(Clone)]
// short-lived and hot; boxing the larger schedule would cost an allocation
#[allow(clippy::large_enum_variant)]
pub(crate) enum BlockKey {
    Aes128(Aes128Enc),
    Aes256(Aes256Enc),
}

impl BlockKey {
    pub fn new(key: &[u8]) -> Result<Self> {
        match key.len() {
            16 => Ok(BlockKey::Aes128(Aes128Enc::new_from_slice(key).unwrap())),
            32 => Ok(BlockKey::Aes256(Aes256Enc::new_from_slice(key).unwrap())),
            _ => Err(Error::InvalidArgument("AES key must be 16 or 32 bytes")),
        }
    }

    pub fn encrypt(&self, block: &Block128) -> Block128 {
        let mut b = aes::Block::from(block.0);
        match self {
            BlockKey::Aes128(c) => c.encrypt_block(&mut b),
            BlockKey::Aes256(c) => c.encrypt_block(&mut b),
        }
        Block128(b.into())
    }

    fn encrypt_many(&self, blocks: &mut [aes::Block]) {
        match self {
            BlockKey::Aes128(c) => c.encrypt_blocks(blocks),
            BlockKey::Aes256(c) => c.encrypt_blocks(blocks),
        }
    }

    /// Fills `out` with counter-mode keystream. Block `k` encrypts
    /// `first + k`, where the addition runs over the whole 128-bit block
    /// (`inc32 == false`) or only its low 32 bits, as in GCM.
    pub fn ctr_fill(&self, first: u128, inc32: bool, out: &mut [u8]) {
        const BATCH: usize = 8;
        let mut blocks = [aes::Block::default(); BATCH];
        let mut k: u128 = 0;
        for chunk in out.chunks_mut(16 * BATCH) {
            let nblocks = chunk.len().div_ceil(16);
            for b in blocks.iter_mut().take(nblocks) {
                let ctr = if inc32 {
                    (first & !0xffff_ffff) | ((first as u32).wrapping_add(k as u32) as u128)
                } else {
                    first.wrapping_add(k)
                };
                *b = aes::Block::from(ctr.to_be_bytes());
                k += 1;
            }
            self.encrypt_many(&mut blocks[..nblocks]);
            for (dst, src) in chunk.chunks_mut(16).zip(blocks.iter()) {
                dst.copy_from_slice(&src[..dst.len()]);
            }
        }
        blocks.iter_mut().for_each(|b| b.as_mut_slice().zeroize());
    }
}

/// `AES_key(0^64 || be64(index))`. AES-128 for 16-byte keys, AES-256 for 32.
pub fn prf_block(key: &[u8], index: u64) -> Result<Block128> {
    Ok(BlockKey::new(key)?.encrypt(&index_block(index)))
}

pub(crate) fn index_block(index: u64) -> Block128 {
    let mut b = [0u8; 16];
    b[8..].copy_from_slice(&index.to_be_bytes());
    Block128(b)
}

/// SHA-256.
pub fn hash(data: &[u8]) -> Digest256 {
    Digest256(Sha256::digest(data).into())
}

/// SHA-256 over the concatenation of `parts`.
pub(crate) fn hash_parts(parts: &[&[u8]]) -> Digest256 {
    let mut h = Sha256::new();
    parts.iter().for_each(|p| h.update(p));
    Digest256(h.finalize().into())
}

/// `length` bytes of AES-CTR keystream under `key`: all-zero nonce, 128-bit
/// big-endian block counter starting at 0.
pub fn keystream(key: &[u8; 16], length: usize) -> Vec<u8> {
    let mut out = vec![0u8; length];
    keystream_into(key, &mut out);
    out
}

pub(crate) fn keystream_into(key: &[u8; 16], out: &mut [u8]) {
    BlockKey::Aes128(Aes128Enc::new(key.into())).ctr_fill(0, false, out);
}

/// The 96-bit GCM nonce for message index `j`: four zero bytes then `be64(j)`.
pub fn gcm_nonce(j: u64) -> [u8; 12] {
    let mut n = [0u8; 12];
    n[4..].copy_from_slice(&j.to_be_bytes());
    n
}

pub(crate) fn gcm_counter_block(nonce: &[u8; 12], ctr: u32) -> u128 {
    let mut b = [0u8; 16];
    b[..12].copy_from_slice(nonce);
    b[12..].copy_from_slice(&ctr.to_be_bytes());
    u128::from_be_bytes(b)
}

/// GCM payload keystream (counter blocks `nonce || 2`, `nonce || 3`, ...).
pub fn gcm_keystream(key: &[u8], nonce: &[u8; 12], length: usize) -> Result<Vec<u8>> {
    let mut out = vec![0u8; length];
    BlockKey::new(key)?.ctr_fill(gcm_counter_block(nonce, 2), true, &mut out);
    Ok(out)
}

/// GCM authenticator material for `(key, nonce)`: `H = E_k(0)` and the tag
/// pad `E_k(nonce || 1)`.
pub fn gcm_mac_keys(key: &[u8], nonce: &[u8; 12]) -> Result<(Block128, Block128)> {
    let k = BlockKey::new(key)?;
    Ok(gcm_mac_keys_with(&k, nonce))
}

pub(crate) fn gcm_mac_keys_with(k: &BlockKey, nonce: &[u8; 12]) -> (Block128, Block128) {
    let h = k.encrypt(&Block128::ZERO);
    let pad = k.encrypt(&Block128(gcm_counter_block(nonce, 1).to_be_bytes()));
    (h, pad)
}

/// HMAC-SHA-256.
pub fn hmac_sha256(key: &[u8], data: &[u8]) -> Digest256 {
    let mut m = <Hmac<Sha256> as Mac>::new_from_slice(key).expect("HMAC accepts any key length");
    m.update(data);
    Digest256(m.finalize().into_bytes().into())
}

/// AES-CBC with PKCS#7 padding. The key selects AES-128 or AES-256.
pub fn cbc_encrypt(key: &[u8], iv: &Block128, plaintext: &[u8]) -> Result<Vec<u8>> {
    let iv = &iv.0.into();
    Ok(match key.len() {
        16 => cbc::Encryptor::<Aes128Enc>::new(key.into(), iv)
            .encrypt_padded_vec_mut::<Pkcs7>(plaintext),
        32 => cbc::Encryptor::<Aes256Enc>::new(key.into(), iv)
            .encrypt_padded_vec_mut::<Pkcs7>(plaintext),
        _ => return Err(Error::InvalidArgument("AES key must be 16 or 32 bytes")),
    })
}

pub fn cbc_decrypt(key: &[u8], iv: &Block128, ciphertext: &[u8]) -> Result<Vec<u8>> {
    let iv = &iv.0.into();
    let out = match key.len() {
        16 => cbc::Decryptor::<Aes128Dec>::new(key.into(), iv)
            .decrypt_padded_vec_mut::<Pkcs7>(ciphertext),
        32 => cbc::Decryptor::<Aes256Dec>::new(key.into(), iv)
            .decrypt_padded_vec_mut::<Pkcs7>(ciphertext),
        _ => return Err(Error::InvalidArgument("AES key must be 16 or 32 bytes")),
    };
    out.map_err(|_| Error::Padding)
}

/// Overwrites `buffer` with zeros using volatile writes.
pub fn zeroize(buffer: &mut [u8]) {
    buffer.zeroize();
}

pub(crate) fn xor_into(dst: &mut [u8], src: &[u8]) {
    dst.iter_mut().zip(src).for_each(|(a, b)| *a ^= b);
}
