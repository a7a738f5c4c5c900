//! Forward-secure, aggregate, offline-online authenticated encryption for
//! batched telemetry.
//!
//! A sender seals windows of `n` messages under keys that evolve along a
//! SHA-256 hash chain, folding per-message tags into one aggregate. With
//! offline-online processing the keystreams and one-time MAC pads for a
//! window are precomputed, so sealing a message costs an XOR and a short
//! universal hash. The verifier checks the aggregate before decrypting
//! anything.
//!
//! Three instantiations are provided:
//!
//! - [`Instantiation::GrapheneAe`]: AES-GCM per message, keystreams
//!   precomputed, SHA-256 hash-accumulator aggregation.
//! - [`Instantiation::GraphenePoly`]: AES-CTR + Poly1305 with keystreams
//!   and pads precomputed, XOR aggregation.
//! - [`Instantiation::StdFaae`]: the AES-CBC + HMAC-SHA-256 baseline.
//!
//! ```
//! use graphene::{kg_unified, EngineState, Instantiation, InstantiationConfig};
//!
//! let config = InstantiationConfig::new(Instantiation::GraphenePoly, 4, 16);
//! let root = kg_unified(&config, b"pre-shared seed").unwrap();
//! let mut sender = EngineState::new(config.clone(), root.clone()).unwrap();
//! let mut verifier = EngineState::new(config, root).unwrap();
//!
//! sender.precompute().unwrap();
//! let msgs = [b"t=21.5".to_vec(), b"t=21.6".to_vec(), b"t=21.4".to_vec(), b"t=21.9".to_vec()];
//! let sealed = sender.seal(&msgs).unwrap();
//! let opened = verifier.verdec(&sealed).unwrap();
//! assert_eq!(opened.items, msgs);
//! ```

mod field;
mod ghash;
mod poly1305;

pub mod aggregator;
pub mod config;
pub mod engine;
pub mod error;
pub mod keychain;
pub mod ootable;
pub mod primitives;
pub mod wire;

pub use aggregator::{agg_init, AggState, AggregateTag, Window};
pub use config::{AggMode, Instantiation, InstantiationConfig, Kappa};
pub use engine::{
    mac_oo_gcm, mac_oo_poly, Batch, BreachSnapshot, EngineState, SealedBatch, WindowSealer,
};
pub use error::{Error, Result};
pub use keychain::{kg, kg_unified, ratchet_window_key, KeyRole, KeyState, OneTimeKeys};
pub use ootable::{precompute, OOTable};
pub use wire::{decode_batch, encode_batch};
