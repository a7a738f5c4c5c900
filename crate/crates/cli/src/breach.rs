use anyhow::{bail, Result};
use graphene::primitives::{
    cbc_decrypt, gcm_keystream, gcm_mac_keys, gcm_nonce, ghash_tag, hmac_sha256, keystream,
    poly_tag, prf_block, PolyKey,
};
use graphene::{
    ratchet_window_key, AggState, BreachSnapshot, EngineState, Instantiation, InstantiationConfig,
    KeyState, SealedBatch, Window,
};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

const MSG_LEN: usize = 32;

/// Outcome of one simulated compromise at index `j_prime`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BreachReport {
    pub instantiation: Option<Instantiation>,
    pub j_prime: u64,
    pub n: u32,
    /// Ciphertexts with index below `j_prime`.
    pub prior_ciphertexts: usize,
    /// Distinct key candidates an attacker derives from the snapshot.
    pub snapshot_keys: usize,
    /// Live precomputed entries in the snapshot.
    pub snapshot_entries: usize,
    pub decrypt_attempts: u64,
    pub decrypt_successes: u64,
    pub forgery_attempts: u64,
    pub forgery_successes: u64,
    /// Earlier secrets (chain keys, one-time keys, keystreams) found verbatim
    /// in the snapshot.
    pub leaked_prior_secrets: u64,
    /// Consumed table entries read back as zeros and `next()` wiped its input.
    pub wiped: bool,
}

impl BreachReport {
    pub fn passed(&self) -> bool {
        self.decrypt_successes == 0
            && self.forgery_successes == 0
            && self.leaked_prior_secrets == 0
            && self.wiped
    }
}

struct Prior {
    index: u64,
    plain: Vec<u8>,
    cipher: Vec<u8>,
}

/// Seals messages up to index `j_prime - 1`, snapshots the sender, and runs
/// every attack available to an adversary holding that snapshot. `allow`
/// must be set (the CLI derives it from GRAPHENE_ALLOW_SNAPSHOT).
pub fn cmd_breach(
    inst: Instantiation,
    j_prime: u64,
    n: u32,
    seed: u64,
    allow: bool,
) -> Result<BreachReport> {
    if !allow {
        bail!(
            "breach simulation is disabled; set {}=1",
            crate::SNAPSHOT_ENV
        );
    }
    if j_prime < 2 {
        bail!("j' must be at least 2 so that some ciphertext precedes it");
    }
    let config = InstantiationConfig::new(inst, n, MSG_LEN as u32);
    config.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let root = graphene::kg(&config, &mut rng)?;
    let mut sender = EngineState::new(config.clone(), root.clone())?;
    sender.enable_breach_simulation();
    let mut verifier = EngineState::new(config.clone(), root.clone())?;

    let mut next_msgs = |count: usize| -> Vec<Vec<u8>> {
        (0..count)
            .map(|_| {
                let mut m = vec![0u8; MSG_LEN];
                rng.fill_bytes(&mut m);
                m
            })
            .collect()
    };

    let mut prior = Vec::new();
    // (verifier keys at window start, sealed window)
    let mut windows: Vec<(KeyState, SealedBatch)> = Vec::new();
    let n64 = n as u64;
    while sender.window_start() + n64 <= j_prime {
        if config.uses_table() {
            sender.precompute()?;
        }
        let msgs = next_msgs(n as usize);
        let sealed = sender.seal(&msgs)?;
        let before = verifier.keys().clone();
        verifier.verdec(&sealed)?;
        for (k, (m, c)) in msgs.into_iter().zip(&sealed.ciphertexts).enumerate() {
            prior.push(Prior {
                index: sealed.start_index + k as u64,
                plain: m,
                cipher: c.clone(),
            });
        }
        windows.push((before, sealed));
    }

    let start = sender.window_start();
    let (snapshot, retired_zeroed) = if start < j_prime {
        if config.uses_table() {
            sender.precompute()?;
        }
        let msgs = next_msgs((j_prime - start) as usize);
        let mut w = sender.begin_window()?;
        for m in &msgs {
            w.push(m)?;
        }
        for (k, (m, c)) in msgs.into_iter().zip(w.ciphertexts()).enumerate() {
            prior.push(Prior {
                index: start + k as u64,
                plain: m,
                cipher: c.clone(),
            });
        }
        let zeroed = w.table().is_none_or(|t| t.retired_entries_zeroed());
        (w.snapshot_for_breach()?, zeroed)
    } else {
        (sender.snapshot_for_breach()?, true)
    };

    let parsed = BreachSnapshot::parse(&snapshot)?;
    let mut report = BreachReport {
        instantiation: Some(inst),
        j_prime,
        n,
        prior_ciphertexts: prior.len(),
        ..Default::default()
    };

    // attacker key candidates: the chain key pair, everything reachable
    // forward along the chain, and the table contents
    let mut chain_keys: Vec<Vec<u8>> = Vec::new();
    let mut walk = parsed.keys.clone();
    for _ in 0..=2 * n {
        chain_keys.push(walk.enc_key().to_vec());
        chain_keys.push(walk.mac_key().to_vec());
        let mut old = walk.clone();
        let next = old.next()?;
        report.wiped = old.is_wiped();
        walk = next;
        if !report.wiped {
            break;
        }
    }
    report.wiped &= retired_zeroed;
    let mut entries: Vec<Vec<u8>> = Vec::new();
    if let Some(t) = &parsed.table {
        if let Some(w) = t.window_key() {
            let mut w = *w;
            for _ in 0..=n {
                chain_keys.push(w.to_vec());
                ratchet_window_key(&mut w)?;
            }
        }
        for (_, e) in t.live_entries() {
            if e.len() >= 16 {
                chain_keys.push(e[..16].to_vec());
            }
            entries.push(e.to_vec());
        }
    }
    chain_keys.sort();
    chain_keys.dedup();
    report.snapshot_keys = chain_keys.len();
    report.snapshot_entries = entries.len();

    for p in &prior {
        for k in &chain_keys {
            for plain in candidate_decryptions(k, p.index, &p.cipher) {
                report.decrypt_attempts += 1;
                if plain == p.plain {
                    report.decrypt_successes += 1;
                }
            }
        }
        for e in &entries {
            report.decrypt_attempts += 1;
            if e.len() >= p.cipher.len() {
                let plain: Vec<u8> = p.cipher.iter().zip(e).map(|(c, k)| c ^ k).collect();
                if plain == p.plain {
                    report.decrypt_successes += 1;
                }
            }
        }
    }

    report.leaked_prior_secrets = count_leaks(&config, &root, j_prime, &prior, &snapshot)?;

    for (before, sealed) in &windows {
        let v = EngineState::new(config.clone(), before.clone())?;
        assert!(v.aver(sealed)?, "honest window must verify");
        let mut forged = Vec::new();

        let mut short = sealed.clone();
        short.ciphertexts.pop();
        short.aggregate.window.count = n - 1;
        forged.push(short);

        let mut flipped = sealed.clone();
        flipped.ciphertexts[0][0] ^= 1;
        for k in &chain_keys {
            // full re-tag under a recovered key
            let mut agg = AggState::new(config.agg);
            for (i, c) in flipped.ciphertexts.iter().enumerate() {
                agg.fold(&attacker_tag(inst, k, sealed.start_index + i as u64, c)?);
            }
            let mut f = flipped.clone();
            f.aggregate = agg.finalize(Window {
                start_index: sealed.start_index,
                count: n,
            })?;
            forged.push(f);

            // swap one tag's contribution inside the aggregate
            if config.agg == graphene::AggMode::Xor {
                let old = attacker_tag(inst, k, sealed.start_index, &sealed.ciphertexts[0])?;
                let new = attacker_tag(inst, k, sealed.start_index, &flipped.ciphertexts[0])?;
                let mut f = flipped.clone();
                for ((a, o), x) in f.aggregate.bytes.iter_mut().zip(&old).zip(&new) {
                    *a ^= o ^ x;
                }
                forged.push(f);
            }
        }
        for f in &forged {
            report.forgery_attempts += 1;
            if matches!(v.aver(f), Ok(true)) {
                report.forgery_successes += 1;
            }
        }
        // replay into the current verifier
        report.forgery_attempts += 1;
        if matches!(verifier.aver(sealed), Ok(true)) {
            report.forgery_successes += 1;
        }
    }
    Ok(report)
}

/// Every way a candidate key could have produced the keystream for `j`.
fn candidate_decryptions(k: &[u8], j: u64, c: &[u8]) -> Vec<Vec<u8>> {
    let xor = |ks: &[u8]| c.iter().zip(ks).map(|(a, b)| a ^ b).collect::<Vec<u8>>();
    let mut out = Vec::new();
    if let Ok(k16) = <&[u8; 16]>::try_from(k) {
        out.push(xor(&keystream(k16, c.len())));
    }
    if let Ok(s) = prf_block(k, j) {
        out.push(xor(&keystream(&s.0, c.len())));
    }
    if let Ok(ks) = gcm_keystream(k, &gcm_nonce(j), c.len()) {
        out.push(xor(&ks));
    }
    if let Ok(iv) = prf_block(k, 0) {
        out.push(cbc_decrypt(k, &iv, c).unwrap_or_default());
    }
    out
}

fn attacker_tag(inst: Instantiation, k: &[u8], j: u64, c: &[u8]) -> Result<Vec<u8>> {
    Ok(match inst {
        Instantiation::StdFaae => hmac_sha256(k, c).0.to_vec(),
        Instantiation::GrapheneAe => {
            let (h, pad) = gcm_mac_keys(k, &gcm_nonce(j))?;
            ghash_tag(&h, &pad, c).0.to_vec()
        }
        Instantiation::GraphenePoly => {
            let r: [u8; 16] = k[..16].try_into()?;
            poly_tag(&PolyKey::new(&r, &prf_block(k, j)?.0), c)
                .0
                .to_vec()
        }
    })
}

/// Recomputes every secret that protected an index below `j_prime` from the
/// root and counts how many appear verbatim in `snapshot`.
fn count_leaks(
    config: &InstantiationConfig,
    root: &KeyState,
    j_prime: u64,
    prior: &[Prior],
    snapshot: &[u8],
) -> Result<u64> {
    let n = config.n as u64;
    let mut secrets: Vec<Vec<u8>> = Vec::new();
    let mut keys = root.clone();
    match config.instantiation {
        Instantiation::StdFaae | Instantiation::GrapheneAe => {
            while keys.index() < j_prime {
                secrets.push(keys.enc_key().to_vec());
                secrets.push(keys.mac_key().to_vec());
                keys.upd()?;
            }
        }
        Instantiation::GraphenePoly => {
            while keys.index() < j_prime {
                secrets.push(keys.enc_key().to_vec());
                secrets.push(keys.mac_key().to_vec());
                let mut w = *keys.window_mac_key()?;
                for j in keys.index()..(keys.index() + n).min(j_prime) {
                    secrets.push(w.to_vec());
                    secrets.push(prf_block(keys.enc_key(), j)?.0.to_vec());
                    secrets.push(prf_block(keys.mac_key(), j)?.0.to_vec());
                    ratchet_window_key(&mut w)?;
                }
                keys.advance_window(n)?;
            }
        }
    }
    for p in prior {
        secrets.push(p.cipher.iter().zip(&p.plain).map(|(c, m)| c ^ m).collect());
    }
    Ok(secrets
        .iter()
        .filter(|s| s.len() >= 16 && snapshot.windows(s.len()).any(|win| win == &s[..]))
        .count() as u64)
}
