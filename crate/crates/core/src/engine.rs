//! Batch sealing and aggregate verification for the three instantiations.
//!
//! A sender seals one window of `n` messages into ciphertexts plus one
//! aggregate tag. The verifier holds the same root chain, recomputes every
//! per-message tag from the ciphertexts, and only decrypts once the
//! recomputed aggregate matches.

use zeroize::Zeroizing;

use crate::aggregator::{AggState, AggregateTag, Window};
use crate::config::{Instantiation, InstantiationConfig};
use crate::error::{Error, Result};
use crate::keychain::{ratchet_window_key, KeyRole, KeyState};
use crate::ootable::{precompute, OOTable};
use crate::primitives::{
    cbc_decrypt, cbc_encrypt, gcm_keystream, gcm_mac_keys_with, gcm_nonce, ghash_tag, hmac_sha256,
    index_block, keystream_into, poly_tag, xor_into, Block128, BlockKey, PolyKey,
};

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"GSN1";

/// Indexed plaintexts (or decrypted output) for one window.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Batch {
    pub start_index: u64,
    pub items: Vec<Vec<u8>>,
}

/// Ciphertexts of one window with their aggregate tag.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SealedBatch {
    pub instantiation: Instantiation,
    pub start_index: u64,
    pub ciphertexts: Vec<Vec<u8>>,
    pub aggregate: AggregateTag,
}

/// Poly1305 tag under a one-time `(r, s)`.
pub fn mac_oo_poly(key: &PolyKey, c: &[u8]) -> Block128 {
    poly_tag(key, c)
}

/// GCM authenticator: GHASH of `c` under `hash_key`, masked with `pad`.
pub fn mac_oo_gcm(hash_key: &Block128, pad: &Block128, c: &[u8]) -> Block128 {
    ghash_tag(hash_key, pad, c)
}

/// One direction of a channel: a sender or a verifier.
pub struct EngineState {
    config: InstantiationConfig,
    keys: KeyState,
    table: Option<OOTable>,
    breach_simulation: bool,
}

impl std::fmt::Debug for EngineState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EngineState")
            .field("config", &self.config)
            .field("keys", &self.keys)
            .field("table", &self.table)
            .finish()
    }
}

impl EngineState {
    pub fn new(config: InstantiationConfig, keys: KeyState) -> Result<Self> {
        config.validate()?;
        if keys.kappa() != config.kappa {
            return Err(Error::InvalidConfig(
                "key width does not match kappa".into(),
            ));
        }
        Ok(EngineState {
            config,
            keys,
            table: None,
            breach_simulation: false,
        })
    }

    pub fn config(&self) -> &InstantiationConfig {
        &self.config
    }

    pub fn keys(&self) -> &KeyState {
        &self.keys
    }

    pub fn table(&self) -> Option<&OOTable> {
        self.table.as_ref()
    }

    /// First index of the window the next `seal` will cover.
    pub fn window_start(&self) -> u64 {
        match &self.table {
            Some(t) => t.start_index(),
            None => self.keys.index(),
        }
    }

    /// Runs the offline phase for the next window.
    pub fn precompute(&mut self) -> Result<()> {
        if self.table.is_some() {
            return Err(Error::Precompute(
                "a table for the current window is still live".into(),
            ));
        }
        self.table = Some(precompute(&mut self.keys, &self.config)?);
        Ok(())
    }

    /// Installs a table produced elsewhere (e.g. loaded from a table file).
    pub fn install_table(&mut self, table: OOTable) -> Result<()> {
        if table.instantiation() != self.config.instantiation
            || table.count() != self.config.n
            || table.max_msg_len() != self.config.max_msg_len
        {
            return Err(Error::InvalidConfig(
                "table does not match configuration".into(),
            ));
        }
        self.table = Some(table);
        Ok(())
    }

    /// Permits `snapshot_for_breach`.
    pub fn enable_breach_simulation(&mut self) {
        self.breach_simulation = true;
    }

    /// Seals exactly `n` messages as one window.
    pub fn seal<M: AsRef<[u8]>>(&mut self, messages: &[M]) -> Result<SealedBatch> {
        if messages.len() != self.config.n as usize {
            return Err(Error::WindowMismatch {
                expected: self.config.n as u64,
                got: messages.len() as u64,
            });
        }
        let max = self.config.max_msg_len as usize;
        if let Some(m) = messages.iter().find(|m| m.as_ref().len() > max) {
            return Err(Error::Oversize {
                len: m.as_ref().len(),
                max,
            });
        }
        let mut sealer = self.begin_window()?;
        for m in messages {
            sealer.push(m.as_ref())?;
        }
        sealer.finish()
    }

    /// Opens a window for message-at-a-time sealing.
    pub fn begin_window(&mut self) -> Result<WindowSealer<'_>> {
        let start = self.window_start();
        if self.config.uses_table() {
            match &self.table {
                Some(t) if t.start_index() == start => {}
                _ => return Err(Error::Reuse(start)),
            }
        }
        let agg = AggState::new(self.config.agg);
        Ok(WindowSealer {
            engine: self,
            start,
            next: start,
            agg,
            ciphertexts: Vec::new(),
            poly_w: None,
        })
    }

    fn check_header(&self, sealed: &SealedBatch) -> Result<bool> {
        let start = self.keys.index();
        if sealed.start_index != start {
            return Err(Error::Sync {
                expected: start,
                got: sealed.start_index,
            });
        }
        let n = self.config.n as u64;
        if sealed.ciphertexts.len() as u64 != n {
            return Err(Error::WindowMismatch {
                expected: n,
                got: sealed.ciphertexts.len() as u64,
            });
        }
        Ok(sealed.instantiation == self.config.instantiation
            && sealed.aggregate.mode == self.config.agg
            && sealed.aggregate.window
                == Window {
                    start_index: start,
                    count: self.config.n,
                })
    }

    /// Aggregate verification: recomputes every tag and compares the
    /// folded result in constant time. Does not change the state.
    pub fn aver(&self, sealed: &SealedBatch) -> Result<bool> {
        if !self.check_header(sealed)? {
            return Ok(false);
        }
        let n = self.config.n as u64;
        let max = self.config.max_msg_len as usize;
        let mut agg = AggState::new(self.config.agg);
        let start = sealed.start_index;
        match self.config.instantiation {
            Instantiation::StdFaae => {
                let mut chain = self.keys.clone();
                for c in &sealed.ciphertexts {
                    if c.len() > cbc_len(max) {
                        return Ok(false);
                    }
                    agg.fold(&hmac_sha256(chain.mac_key(), c).0);
                    chain.upd()?;
                }
            }
            Instantiation::GrapheneAe => {
                let mut chain = self.keys.clone();
                for (k, c) in sealed.ciphertexts.iter().enumerate() {
                    if c.len() > max {
                        return Ok(false);
                    }
                    let cipher = BlockKey::new(chain.enc_key())?;
                    let (h, pad) = gcm_mac_keys_with(&cipher, &gcm_nonce(start + k as u64));
                    agg.fold(&mac_oo_gcm(&h, &pad, c).0);
                    chain.upd()?;
                }
            }
            Instantiation::GraphenePoly => {
                let mut w = self.keys.window_mac_key()?;
                for (k, c) in sealed.ciphertexts.iter().enumerate() {
                    if c.len() > max {
                        return Ok(false);
                    }
                    let pad = self
                        .keys
                        .derive_intra(n, start + k as u64, KeyRole::Mac, 16)?;
                    let key = PolyKey::new(&w, pad[..].try_into().unwrap());
                    agg.fold(&mac_oo_poly(&key, c).0);
                    ratchet_window_key(&mut w)?;
                }
            }
        }
        let expect = agg.finalize(Window {
            start_index: start,
            count: self.config.n,
        })?;
        Ok(expect.ct_eq(&sealed.aggregate))
    }

    /// Verifies, then decrypts the whole window and advances to the next.
    pub fn verdec(&mut self, sealed: &SealedBatch) -> Result<Batch> {
        let mut items = Vec::new();
        self.verdec_into(sealed, &mut items)?;
        Ok(Batch {
            start_index: sealed.start_index,
            items,
        })
    }

    /// Like `verdec`, appending plaintexts to `out`. On any failure `out` is
    /// left untouched and nothing has been decrypted.
    pub fn verdec_into(&mut self, sealed: &SealedBatch, out: &mut Vec<Vec<u8>>) -> Result<()> {
        if !self.aver(sealed)? {
            return Err(Error::VerificationFailed);
        }
        let n = self.config.n as u64;
        let start = sealed.start_index;
        let mut plain = Vec::with_capacity(sealed.ciphertexts.len());
        let next_keys = match self.config.instantiation {
            Instantiation::StdFaae => {
                let mut chain = self.keys.clone();
                for c in &sealed.ciphertexts {
                    let iv = BlockKey::new(chain.enc_key())?.encrypt(&index_block(0));
                    plain.push(cbc_decrypt(chain.enc_key(), &iv, c)?);
                    chain.upd()?;
                }
                chain
            }
            Instantiation::GrapheneAe => {
                let mut chain = self.keys.clone();
                for (k, c) in sealed.ciphertexts.iter().enumerate() {
                    let ks = Zeroizing::new(gcm_keystream(
                        chain.enc_key(),
                        &gcm_nonce(start + k as u64),
                        c.len(),
                    )?);
                    let mut m = c.clone();
                    xor_into(&mut m, &ks);
                    plain.push(m);
                    chain.upd()?;
                }
                chain
            }
            Instantiation::GraphenePoly => {
                for (k, c) in sealed.ciphertexts.iter().enumerate() {
                    let s_j = self
                        .keys
                        .derive_intra(n, start + k as u64, KeyRole::Enc, 16)?;
                    let mut m = c.clone();
                    let mut ks = Zeroizing::new(vec![0u8; c.len()]);
                    keystream_into(s_j[..].try_into().unwrap(), &mut ks);
                    xor_into(&mut m, &ks);
                    plain.push(m);
                }
                let mut chain = self.keys.clone();
                chain.advance_window(n)?;
                chain
            }
        };
        self.keys = next_keys;
        out.extend(plain);
        Ok(())
    }

    /// Serializes the live secret state: the current chain keys and any
    /// unconsumed table entries. Requires breach simulation to be enabled.
    pub fn snapshot_for_breach(&self) -> Result<Zeroizing<Vec<u8>>> {
        if !self.breach_simulation {
            return Err(Error::Forbidden);
        }
        let mut out = Zeroizing::new(Vec::new());
        out.extend_from_slice(SNAPSHOT_MAGIC);
        out.extend_from_slice(&self.keys.to_record());
        match &self.table {
            Some(t) if !t.is_spent() => {
                out.push(1);
                out.extend_from_slice(&t.serialize_table());
            }
            _ => out.push(0),
        }
        Ok(out)
    }
}

fn cbc_len(max_msg_len: usize) -> usize {
    (max_msg_len / 16 + 1) * 16
}

/// Parsed form of a breach snapshot.
pub struct BreachSnapshot {
    pub keys: KeyState,
    pub table: Option<OOTable>,
}

impl BreachSnapshot {
    pub fn parse(bytes: &[u8]) -> Result<BreachSnapshot> {
        if bytes.len() < 4 || &bytes[..4] != SNAPSHOT_MAGIC {
            return Err(Error::Decode {
                pos: 0,
                reason: "bad snapshot magic",
            });
        }
        let (keys, used) = KeyState::parse_record(&bytes[4..])?;
        let pos = 4 + used;
        let table = match bytes.get(pos) {
            Some(0) if bytes.len() == pos + 1 => None,
            Some(1) => Some(OOTable::deserialize_table(&bytes[pos + 1..])?),
            _ => {
                return Err(Error::Decode {
                    pos,
                    reason: "bad snapshot table marker",
                })
            }
        };
        Ok(BreachSnapshot { keys, table })
    }
}

/// An open window on a sender. Messages are sealed one at a time; key
/// material for each index is consumed as soon as its message is sealed.
pub struct WindowSealer<'a> {
    engine: &'a mut EngineState,
    start: u64,
    next: u64,
    agg: AggState,
    ciphertexts: Vec<Vec<u8>>,
    // running `r` seed when sealing without a table
    poly_w: Option<Zeroizing<[u8; 16]>>,
}

impl WindowSealer<'_> {
    /// Index the next pushed message will get.
    pub fn next_index(&self) -> u64 {
        self.next
    }

    pub fn ciphertexts(&self) -> &[Vec<u8>] {
        &self.ciphertexts
    }

    pub fn table(&self) -> Option<&OOTable> {
        self.engine.table.as_ref()
    }

    /// Encrypts and authenticates one message, folding its tag.
    pub fn push(&mut self, m: &[u8]) -> Result<()> {
        let e = &mut *self.engine;
        let n = e.config.n as u64;
        let j = self.next;
        if j - self.start >= n {
            return Err(Error::WindowMismatch {
                expected: n,
                got: n + 1,
            });
        }
        let max = e.config.max_msg_len as usize;
        if m.len() > max {
            return Err(Error::Oversize { len: m.len(), max });
        }
        let c = match e.config.instantiation {
            Instantiation::StdFaae => {
                let iv = BlockKey::new(e.keys.enc_key())?.encrypt(&index_block(0));
                let c = cbc_encrypt(e.keys.enc_key(), &iv, m)?;
                self.agg.fold(&hmac_sha256(e.keys.mac_key(), &c).0);
                e.keys.upd()?;
                c
            }
            Instantiation::GrapheneAe => {
                let nonce = gcm_nonce(j);
                let mut c = m.to_vec();
                match e.table.as_mut() {
                    Some(t) => t.take_enc_with(j, |ks| xor_into(&mut c, &ks[..m.len()]))?,
                    None => xor_into(
                        &mut c,
                        &Zeroizing::new(gcm_keystream(e.keys.enc_key(), &nonce, m.len())?),
                    ),
                }
                let cipher = BlockKey::new(e.keys.enc_key())?;
                let (h, pad) = gcm_mac_keys_with(&cipher, &nonce);
                self.agg.fold(&mac_oo_gcm(&h, &pad, &c).0);
                e.keys.upd()?;
                c
            }
            Instantiation::GraphenePoly => {
                let mut c = m.to_vec();
                let key = match e.table.as_mut() {
                    Some(t) => {
                        let r = t.take_window_key()?;
                        t.take_enc_with(j, |ks| xor_into(&mut c, &ks[..m.len()]))?;
                        let pad = t.take_mac(j)?;
                        PolyKey::new(&r, &pad)
                    }
                    None => {
                        let s_j = e.keys.derive_intra(n, j, KeyRole::Enc, 16)?;
                        let mut ks = Zeroizing::new(vec![0u8; m.len()]);
                        keystream_into(s_j[..].try_into().unwrap(), &mut ks);
                        xor_into(&mut c, &ks);
                        let pad = e.keys.derive_intra(n, j, KeyRole::Mac, 16)?;
                        let w = match self.poly_w.as_mut() {
                            Some(w) => w,
                            None => self.poly_w.insert(e.keys.window_mac_key()?),
                        };
                        let key = PolyKey::new(w, pad[..].try_into().unwrap());
                        ratchet_window_key(w)?;
                        key
                    }
                };
                self.agg.fold(&mac_oo_poly(&key, &c).0);
                c
            }
        };
        self.ciphertexts.push(c);
        self.next += 1;
        Ok(())
    }

    /// Closes the window. Fails unless exactly `n` messages were pushed.
    pub fn finish(self) -> Result<SealedBatch> {
        let e = self.engine;
        let window = Window {
            start_index: self.start,
            count: e.config.n,
        };
        let aggregate = self.agg.finalize(window)?;
        if e.table.as_ref().is_some_and(|t| t.is_spent()) {
            e.table = None;
        } else if e.config.instantiation == Instantiation::GraphenePoly && !e.config.uses_table() {
            e.keys.advance_window(e.config.n as u64)?;
        }
        Ok(SealedBatch {
            instantiation: e.config.instantiation,
            start_index: self.start,
            ciphertexts: self.ciphertexts,
            aggregate,
        })
    }

    pub fn snapshot_for_breach(&self) -> Result<Zeroizing<Vec<u8>>> {
        self.engine.snapshot_for_breach()
    }
}
