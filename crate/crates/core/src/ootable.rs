//! Offline precomputation of one window's per-index material.
//!
//! Graphene-AE tables hold the GCM payload keystream for each index.
//! Graphene-Poly tables hold an AES-CTR keystream and a 16-byte one-time
//! Poly1305 pad per index, plus the window's clamped Poly1305 `r`.
//! Every entry is handed out at most once and wiped as it leaves the table.

use zeroize::{Zeroize, Zeroizing};

use crate::config::{Instantiation, InstantiationConfig};
use crate::error::{Error, Result};
use crate::keychain::{ratchet_window_key, KeyRole, KeyState};
use crate::primitives::{gcm_counter_block, gcm_nonce, keystream_into, BlockKey};

pub const TABLE_MAGIC: &[u8; 4] = b"GOT1";

/// Width of one precomputed MAC pad.
pub const MAC_ENTRY_BYTES: usize = 16;

pub struct OOTable {
    instantiation: Instantiation,
    start_index: u64,
    count: u32,
    max_msg_len: u32,
    window_key: Option<Zeroizing<[u8; 16]>>,
    enc: Zeroizing<Vec<u8>>,
    enc_live: Vec<bool>,
    mac: Zeroizing<Vec<u8>>,
    mac_live: Vec<bool>,
}

impl std::fmt::Debug for OOTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OOTable")
            .field("instantiation", &self.instantiation)
            .field("start_index", &self.start_index)
            .field("count", &self.count)
            .field("max_msg_len", &self.max_msg_len)
            .field("live_bytes", &self.table_bytes())
            .finish()
    }
}

fn alloc(len: usize) -> Result<Zeroizing<Vec<u8>>> {
    let mut v = Vec::new();
    v.try_reserve_exact(len)
        .map_err(|_| Error::Precompute(format!("cannot allocate {len} bytes")))?;
    v.resize(len, 0);
    Ok(Zeroizing::new(v))
}

/// Fills the table for the window starting at `state.index()`.
///
/// For Graphene-Poly the chain is then evolved once and jumps to the next
/// window. Graphene-AE keeps `state` at the window start: its online phase
/// still walks the chain one message at a time to key the authenticator.
pub fn precompute(state: &mut KeyState, config: &InstantiationConfig) -> Result<OOTable> {
    config.validate()?;
    if !config.uses_table() {
        return Err(Error::InvalidConfig(
            "precomputation needs b_enc_oo or b_mac_oo".into(),
        ));
    }
    let n = config.n as usize;
    let len = config.max_msg_len as usize;
    let start = state.index();
    start
        .checked_add(config.n as u64)
        .ok_or(Error::ChainExhausted(start))?;
    let enc_bytes = n
        .checked_mul(len)
        .ok_or_else(|| Error::Precompute("table size overflows".into()))?;

    let mut table = OOTable {
        instantiation: config.instantiation,
        start_index: start,
        count: config.n,
        max_msg_len: config.max_msg_len,
        window_key: None,
        enc: alloc(if config.enc_oo { enc_bytes } else { 0 })?,
        enc_live: vec![config.enc_oo; n],
        mac: alloc(if config.mac_oo {
            n * MAC_ENTRY_BYTES
        } else {
            0
        })?,
        mac_live: vec![config.mac_oo; n],
    };

    match config.instantiation {
        Instantiation::GrapheneAe => {
            // Walk a private copy of the chain: entry k is the GCM keystream
            // under sk_{start+k} with nonce start+k.
            let mut chain = state.clone();
            for (k, entry) in table.enc.chunks_exact_mut(len.max(1)).take(n).enumerate() {
                let j = start + k as u64;
                let cipher = BlockKey::new(chain.enc_key())?;
                cipher.ctr_fill(gcm_counter_block(&gcm_nonce(j), 2), true, entry);
                chain.upd()?;
            }
        }
        Instantiation::GraphenePoly => {
            let n64 = config.n as u64;
            for k in 0..n {
                let j = start + k as u64;
                let s_j = state.derive_intra(n64, j, KeyRole::Enc, 16)?;
                keystream_into(
                    s_j[..].try_into().unwrap(),
                    &mut table.enc[k * len..(k + 1) * len],
                );
                let pad = state.derive_intra(n64, j, KeyRole::Mac, MAC_ENTRY_BYTES)?;
                table.mac[k * MAC_ENTRY_BYTES..(k + 1) * MAC_ENTRY_BYTES].copy_from_slice(&pad);
            }
            table.window_key = Some(state.window_mac_key()?);
            state.advance_window(n64)?;
        }
        Instantiation::StdFaae => unreachable!("rejected by validate"),
    }
    Ok(table)
}

impl OOTable {
    pub fn instantiation(&self) -> Instantiation {
        self.instantiation
    }

    pub fn start_index(&self) -> u64 {
        self.start_index
    }

    pub fn count(&self) -> u32 {
        self.count
    }

    pub fn max_msg_len(&self) -> u32 {
        self.max_msg_len
    }

    pub fn has_enc(&self) -> bool {
        !self.enc.is_empty()
    }

    pub fn has_mac(&self) -> bool {
        !self.mac.is_empty()
    }

    /// Current `r` seed, for the next unconsumed index.
    pub fn window_key(&self) -> Option<&[u8; 16]> {
        self.window_key.as_deref()
    }

    /// Returns the current `r` seed and ratchets the stored copy forward.
    pub fn take_window_key(&mut self) -> Result<Zeroizing<[u8; 16]>> {
        let w = self
            .window_key
            .as_mut()
            .ok_or(Error::Reuse(self.start_index))?;
        let out = Zeroizing::new(**w);
        ratchet_window_key(w)?;
        Ok(out)
    }

    fn slot(&self, j: u64) -> Result<usize> {
        if j < self.start_index || j - self.start_index >= self.count as u64 {
            return Err(Error::OutOfWindow {
                index: j,
                start: self.start_index,
                count: self.count as u64,
            });
        }
        Ok((j - self.start_index) as usize)
    }

    /// Lends the keystream for `j` to `f`, then wipes and retires it.
    pub fn take_enc_with<R>(&mut self, j: u64, f: impl FnOnce(&[u8]) -> R) -> Result<R> {
        let k = self.slot(j)?;
        if !self.enc_live[k] {
            return Err(Error::Reuse(j));
        }
        let len = self.max_msg_len as usize;
        let entry = &mut self.enc[k * len..(k + 1) * len];
        let r = f(entry);
        entry.zeroize();
        self.enc_live[k] = false;
        Ok(r)
    }

    /// Removes and returns the keystream for `j`.
    pub fn take_enc(&mut self, j: u64) -> Result<Zeroizing<Vec<u8>>> {
        self.take_enc_with(j, |e| Zeroizing::new(e.to_vec()))
    }

    /// Removes and returns the one-time MAC pad for `j`.
    pub fn take_mac(&mut self, j: u64) -> Result<Zeroizing<[u8; 16]>> {
        let k = self.slot(j)?;
        if !self.mac_live[k] {
            return Err(Error::Reuse(j));
        }
        let entry = &mut self.mac[k * MAC_ENTRY_BYTES..(k + 1) * MAC_ENTRY_BYTES];
        let out = Zeroizing::new(<[u8; 16]>::try_from(&*entry).unwrap());
        entry.zeroize();
        self.mac_live[k] = false;
        Ok(out)
    }

    /// Live precomputed bytes, excluding fixed per-window metadata.
    pub fn table_bytes(&self) -> usize {
        let enc = if self.has_enc() {
            self.enc_live.iter().filter(|l| **l).count() * self.max_msg_len as usize
        } else {
            0
        };
        let mac = if self.has_mac() {
            self.mac_live.iter().filter(|l| **l).count() * MAC_ENTRY_BYTES
        } else {
            0
        };
        enc + mac
    }

    /// Whether every entry has been consumed.
    pub fn is_spent(&self) -> bool {
        self.table_bytes() == 0
    }

    /// True if every consumed entry reads back as zeros.
    pub fn retired_entries_zeroed(&self) -> bool {
        let len = self.max_msg_len as usize;
        (0..self.count as usize).all(|k| {
            let enc_ok = !self.has_enc()
                || self.enc_live[k]
                || self.enc[k * len..(k + 1) * len].iter().all(|b| *b == 0);
            let mac_ok = !self.has_mac()
                || self.mac_live[k]
                || self.mac[k * MAC_ENTRY_BYTES..(k + 1) * MAC_ENTRY_BYTES]
                    .iter()
                    .all(|b| *b == 0);
            enc_ok && mac_ok
        })
    }

    /// Every live byte buffer in the table, for breach analysis.
    pub fn live_entries(&self) -> Vec<(u64, &[u8])> {
        let len = self.max_msg_len as usize;
        let mut out = Vec::new();
        for k in 0..self.count as usize {
            let j = self.start_index + k as u64;
            if self.has_enc() && self.enc_live[k] {
                out.push((j, &self.enc[k * len..(k + 1) * len]));
            }
            if self.has_mac() && self.mac_live[k] {
                out.push((j, &self.mac[k * MAC_ENTRY_BYTES..(k + 1) * MAC_ENTRY_BYTES]));
            }
        }
        out
    }

    /// Table file layout:
    ///
    /// ```text
    /// "GOT1" | inst u8 | start u64 BE | count u32 BE | max_msg_len u32 BE
    /// | flags u8 (bit0 enc side, bit1 mac side) | key_len u8 | window key
    /// | enc bitmap | mac bitmap | entries in index order (enc, then mac)
    /// ```
    ///
    /// Bitmaps are `ceil(count / 8)` bytes, MSB-first, and only present for
    /// the sides the table carries. Consumed entries are absent.
    pub fn serialize_table(&self) -> Zeroizing<Vec<u8>> {
        let n = self.count as usize;
        let mut out = Zeroizing::new(Vec::with_capacity(24 + n / 4 + self.table_bytes()));
        out.extend_from_slice(TABLE_MAGIC);
        out.push(self.instantiation.code());
        out.extend_from_slice(&self.start_index.to_be_bytes());
        out.extend_from_slice(&self.count.to_be_bytes());
        out.extend_from_slice(&self.max_msg_len.to_be_bytes());
        out.push(self.has_enc() as u8 | ((self.has_mac() as u8) << 1));
        match &self.window_key {
            Some(k) => {
                out.push(16);
                out.extend_from_slice(&k[..]);
            }
            None => out.push(0),
        }
        if self.has_enc() {
            out.extend_from_slice(&bitmap(&self.enc_live));
        }
        if self.has_mac() {
            out.extend_from_slice(&bitmap(&self.mac_live));
        }
        for (_, e) in self.live_entries() {
            out.extend_from_slice(e);
        }
        out
    }

    pub fn deserialize_table(bytes: &[u8]) -> Result<OOTable> {
        let (t, used) = Self::parse(bytes)?;
        if used != bytes.len() {
            return Err(Error::Decode {
                pos: used,
                reason: "trailing bytes after table",
            });
        }
        Ok(t)
    }

    pub(crate) fn parse(bytes: &[u8]) -> Result<(OOTable, usize)> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(4)? != TABLE_MAGIC {
            return Err(Error::Decode {
                pos: 0,
                reason: "bad table magic",
            });
        }
        let inst_pos = r.pos;
        let instantiation = match Instantiation::from_code(r.u8()?) {
            Some(i @ (Instantiation::GrapheneAe | Instantiation::GraphenePoly)) => i,
            _ => {
                return Err(Error::Decode {
                    pos: inst_pos,
                    reason: "bad table instantiation",
                })
            }
        };
        let start_index = r.u64()?;
        let count = r.u32()?;
        let max_msg_len = r.u32()?;
        let flags_pos = r.pos;
        let flags = r.u8()?;
        if flags & !3 != 0 || flags == 0 {
            return Err(Error::Decode {
                pos: flags_pos,
                reason: "bad table side flags",
            });
        }
        let (has_enc, has_mac) = (flags & 1 != 0, flags & 2 != 0);
        if count == 0 || start_index.checked_add(count as u64).is_none() {
            return Err(Error::Decode {
                pos: 13,
                reason: "bad table window",
            });
        }
        if has_enc && max_msg_len == 0 {
            return Err(Error::Decode {
                pos: 17,
                reason: "zero entry length",
            });
        }
        let key_pos = r.pos;
        let window_key = match r.u8()? {
            0 => None,
            16 => Some(Zeroizing::new(<[u8; 16]>::try_from(r.take(16)?).unwrap())),
            _ => {
                return Err(Error::Decode {
                    pos: key_pos,
                    reason: "bad window key length",
                })
            }
        };
        let n = count as usize;
        let map_len = n.div_ceil(8);
        let enc_live = if has_enc {
            unbitmap(r.take(map_len)?, n)
        } else {
            vec![false; n]
        };
        let mac_live = if has_mac {
            unbitmap(r.take(map_len)?, n)
        } else {
            vec![false; n]
        };

        let len = max_msg_len as usize;
        let live_enc = enc_live.iter().filter(|l| **l).count();
        let live_mac = mac_live.iter().filter(|l| **l).count();
        let need = live_enc
            .checked_mul(len)
            .and_then(|e| e.checked_add(live_mac * MAC_ENTRY_BYTES))
            .ok_or(Error::Decode {
                pos: r.pos,
                reason: "table size overflows",
            })?;
        if r.remaining() < need {
            return Err(Error::Decode {
                pos: bytes.len(),
                reason: "table entries truncated",
            });
        }

        let enc_total =
            if has_enc { n.checked_mul(len) } else { Some(0) }.ok_or(Error::Decode {
                pos: 17,
                reason: "table size overflows",
            })?;
        let mut enc = alloc(enc_total).map_err(|_| Error::Decode {
            pos: 17,
            reason: "table too large",
        })?;
        let mut mac = Zeroizing::new(vec![0u8; if has_mac { n * MAC_ENTRY_BYTES } else { 0 }]);
        for k in 0..n {
            if has_enc && enc_live[k] {
                enc[k * len..(k + 1) * len].copy_from_slice(r.take(len)?);
            }
            if has_mac && mac_live[k] {
                mac[k * MAC_ENTRY_BYTES..(k + 1) * MAC_ENTRY_BYTES]
                    .copy_from_slice(r.take(MAC_ENTRY_BYTES)?);
            }
        }
        Ok((
            OOTable {
                instantiation,
                start_index,
                count,
                max_msg_len,
                window_key,
                enc,
                enc_live,
                mac,
                mac_live,
            },
            r.pos,
        ))
    }
}

fn bitmap(live: &[bool]) -> Vec<u8> {
    let mut out = vec![0u8; live.len().div_ceil(8)];
    for (k, l) in live.iter().enumerate() {
        if *l {
            out[k / 8] |= 0x80 >> (k % 8);
        }
    }
    out
}

fn unbitmap(bytes: &[u8], n: usize) -> Vec<bool> {
    (0..n)
        .map(|k| bytes[k / 8] & (0x80 >> (k % 8)) != 0)
        .collect()
}

/// Bounds-checked cursor; every read validates before it copies.
pub(crate) struct Reader<'a> {
    pub buf: &'a [u8],
    pub pos: usize,
}

impl<'a> Reader<'a> {
    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        if self.remaining() < len {
            return Err(Error::Decode {
                pos: self.buf.len(),
                reason: "unexpected end of input",
            });
        }
        let s = &self.buf[self.pos..self.pos + len];
        self.pos += len;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }
}
