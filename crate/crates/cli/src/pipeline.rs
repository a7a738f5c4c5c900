use std::fmt;
use std::str::FromStr;
use std::sync::mpsc;
use std::thread;

use graphene::{decode_batch, encode_batch, EngineState, Error, InstantiationConfig, KeyState};

/// Flip of one bit of one encoded window while it is in transit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Tamper {
    pub window: u64,
    pub byte: usize,
    pub bit: u8,
}

impl FromStr for Tamper {
    type Err = String;

    /// `window:byte:bit`, all zero-based.
    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("tamper spec {s:?} is not window:byte:bit"));
        }
        let num = |p: &str| {
            p.trim()
                .parse::<u64>()
                .map_err(|e| format!("tamper spec {s:?}: {e}"))
        };
        let bit = num(parts[2])?;
        if bit > 7 {
            return Err(format!("tamper bit {bit} is not in 0..8"));
        }
        Ok(Tamper {
            window: num(parts[0])?,
            byte: num(parts[1])? as usize,
            bit: bit as u8,
        })
    }
}

#[derive(Debug)]
pub enum PipelineError {
    Usage(String),
    /// The verifier refused window `window` (zero-based).
    Rejected {
        window: u64,
        error: Error,
    },
    /// A window verified but its plaintexts differ from the input.
    Mismatch {
        window: u64,
    },
    Sender(Error),
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PipelineError::Usage(m) => write!(f, "usage: {m}"),
            PipelineError::Rejected { window, error } => {
                write!(f, "window {window} rejected: {error}")
            }
            PipelineError::Mismatch { window } => {
                write!(f, "window {window} decrypted to the wrong plaintexts")
            }
            PipelineError::Sender(e) => write!(f, "sender failed: {e}"),
        }
    }
}

impl std::error::Error for PipelineError {}

#[derive(Debug)]
pub struct PipelineReport {
    pub windows: u64,
    pub wire_bytes: usize,
    pub plaintexts: Vec<Vec<u8>>,
}

/// Runs sender and verifier as two threads joined by a queue:
/// precompute, seal, encode | decode, verdec. Messages must fill whole windows.
pub fn cmd_pipeline(
    config: &InstantiationConfig,
    keys: &KeyState,
    messages: &[Vec<u8>],
    tamper: Option<Tamper>,
) -> Result<PipelineReport, PipelineError> {
    config
        .validate()
        .map_err(|e| PipelineError::Usage(e.to_string()))?;
    let n = config.n as usize;
    if messages.is_empty() || !messages.len().is_multiple_of(n) {
        return Err(PipelineError::Usage(format!(
            "{} messages do not fill whole windows of n={n}",
            messages.len()
        )));
    }
    let max = config.max_msg_len as usize;
    if let Some(i) = messages.iter().position(|m| m.len() > max) {
        return Err(PipelineError::Usage(format!(
            "message {i} is {} bytes, over max_msg_len {max}",
            messages[i].len()
        )));
    }
    let mut sender =
        EngineState::new(config.clone(), keys.clone()).map_err(PipelineError::Sender)?;
    let mut verifier =
        EngineState::new(config.clone(), keys.clone()).map_err(PipelineError::Sender)?;
    let (tx, rx) = mpsc::sync_channel::<Vec<u8>>(2);

    thread::scope(|scope| {
        let send = scope.spawn(move || -> Result<(), Error> {
            for (w, window) in messages.chunks(n).enumerate() {
                if config.uses_table() {
                    sender.precompute()?;
                }
                let mut wire = encode_batch(&sender.seal(window)?)?;
                if let Some(t) = tamper.filter(|t| t.window == w as u64) {
                    if let Some(b) = wire.get_mut(t.byte) {
                        *b ^= 1 << t.bit;
                    }
                }
                if tx.send(wire).is_err() {
                    // verifier hung up after a rejection
                    break;
                }
            }
            Ok(())
        });

        let recv = scope.spawn(move || -> Result<PipelineReport, PipelineError> {
            let mut report = PipelineReport {
                windows: 0,
                wire_bytes: 0,
                plaintexts: Vec::with_capacity(messages.len()),
            };
            for (w, wire) in rx.iter().enumerate() {
                let w = w as u64;
                report.wire_bytes += wire.len();
                let rejected = |error| PipelineError::Rejected { window: w, error };
                let sealed = decode_batch(&wire).map_err(rejected)?;
                let batch = verifier.verdec(&sealed).map_err(rejected)?;
                let expected = &messages[w as usize * n..(w as usize + 1) * n];
                if batch.items != expected {
                    return Err(PipelineError::Mismatch { window: w });
                }
                report.plaintexts.extend(batch.items);
                report.windows += 1;
            }
            Ok(report)
        });

        let received = recv.join().expect("verifier thread panicked");
        let sent = send.join().expect("sender thread panicked");
        let report = received?;
        sent.map_err(PipelineError::Sender)?;
        Ok(report)
    })
}
