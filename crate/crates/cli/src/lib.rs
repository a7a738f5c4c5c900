//! Driver for the graphene engine: key generation, a two-party seal/verify
//! pipeline, the benchmark matrix and the breach simulation.

pub mod bench;
pub mod breach;
pub mod pipeline;

use anyhow::{bail, Context, Result};
use graphene::{kg, kg_unified, AggMode, Instantiation, InstantiationConfig, Kappa, KeyState};
use rand::rngs::OsRng;

pub use bench::{cmd_bench, BenchGrid, BenchRecord, Phase};
pub use breach::{cmd_breach, BreachReport};
pub use pipeline::{cmd_pipeline, PipelineError, PipelineReport, Tamper};

/// Environment variable that must be `1` before the breach command runs.
pub const SNAPSHOT_ENV: &str = "GRAPHENE_ALLOW_SNAPSHOT";

pub fn snapshot_allowed() -> bool {
    std::env::var(SNAPSHOT_ENV).is_ok_and(|v| v == "1")
}

/// Builds and validates a config from command-line style options.
pub fn build_config(
    inst: Instantiation,
    n: u32,
    max_msg_len: u32,
    kappa: Kappa,
    agg: Option<AggMode>,
) -> Result<InstantiationConfig> {
    let mut config = InstantiationConfig::new(inst, n, max_msg_len).with_kappa(kappa);
    if let Some(agg) = agg {
        config = config.with_agg(agg);
    }
    config.validate()?;
    Ok(config)
}

/// Root key record (GKS1) shared by sender and verifier. With a seed the
/// output is deterministic.
pub fn cmd_keygen(config: &InstantiationConfig, seed: Option<&[u8]>) -> Result<Vec<u8>> {
    config.validate()?;
    let keys = match seed {
        Some(seed) => kg_unified(config, seed)?,
        None => kg(config, &mut OsRng)?,
    };
    Ok(keys.to_record().to_vec())
}

pub fn load_keys(record: &[u8], config: &InstantiationConfig) -> Result<KeyState> {
    let keys = KeyState::from_record(record).context("reading key record")?;
    if keys.kappa() != config.kappa {
        bail!(
            "key record is for kappa={} but the configuration asks for kappa={}",
            keys.kappa().bits(),
            config.kappa.bits()
        );
    }
    Ok(keys)
}
