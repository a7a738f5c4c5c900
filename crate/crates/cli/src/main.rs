use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use graphene::{AggMode, Instantiation, Kappa};
use graphene_cli::{
    bench, build_config, cmd_breach, cmd_keygen, cmd_pipeline, load_keys, BenchGrid, PipelineError,
    Tamper,
};

#[derive(Parser)]
#[command(
    name = "graphene",
    version,
    about = "Forward-secure aggregate authenticated encryption driver"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a root key record shared by sender and verifier.
    Keygen {
        #[arg(long, default_value_t = 128)]
        kappa: u16,
        #[arg(long, default_value_t = 1024)]
        n: u32,
        #[arg(long, default_value = "graphene_poly")]
        inst: Instantiation,
        /// Aggregation mode: 1 hash, 2 xor, 3 add mod 2^130-5.
        #[arg(long)]
        agg: Option<u8>,
        /// Deterministic seed (UTF-8 bytes); random if absent.
        #[arg(long)]
        seed: Option<String>,
        /// Request MAC precomputation (only graphene_poly supports it).
        #[arg(long)]
        mac_oo: Option<bool>,
        #[arg(long, default_value = "graphene.key")]
        out: PathBuf,
    },
    /// Seal, encode, decode and verify newline-separated messages.
    Pipeline {
        #[arg(long, default_value = "graphene_poly")]
        inst: Instantiation,
        #[arg(long)]
        n: u32,
        #[arg(long = "in")]
        input: PathBuf,
        /// Key record from `keygen`; defaults to a fixed seed.
        #[arg(long)]
        key: Option<PathBuf>,
        #[arg(long)]
        agg: Option<u8>,
        /// Flip one bit in transit: window:byte:bit.
        #[arg(long)]
        tamper: Option<Tamper>,
        /// Where to write the verified plaintexts.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time offline and online phases over a grid.
    Bench {
        /// LENSxNS, e.g. 16,32,128,256x1024
        #[arg(long, default_value = "16,32,64,128,256x1024")]
        grid: BenchGrid,
        #[arg(long, default_value_t = 100)]
        reps: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Simulate a sender compromise at index j (needs GRAPHENE_ALLOW_SNAPSHOT=1).
    Breach {
        #[arg(long)]
        j: u64,
        #[arg(long, default_value_t = 8)]
        n: u32,
        /// Limit to one instantiation; all three by default.
        #[arg(long)]
        inst: Option<Instantiation>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

const DEFAULT_PIPELINE_SEED: &[u8] = b"graphene pipeline";

fn agg_mode(code: Option<u8>) -> Result<Option<AggMode>> {
    code.map(|c| AggMode::from_code(c).context("--agg"))
        .transpose()
}

fn read_messages(path: &PathBuf) -> Result<Vec<Vec<u8>>> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).split(b'\n') {
        let mut line = line?;
        if line.last() == Some(&b'\r') {
            line.pop();
        }
        out.push(line);
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Keygen {
            kappa,
            n,
            inst,
            agg,
            seed,
            mac_oo,
            out,
        } => {
            let mut config = build_config(inst, n, 256, Kappa::from_bits(kappa)?, agg_mode(agg)?)?;
            if let Some(mac_oo) = mac_oo {
                let enc_oo = config.enc_oo;
                config = config.with_oo(enc_oo, mac_oo);
            }
            let record = cmd_keygen(&config, seed.as_deref().map(str::as_bytes))?;
            fs::write(&out, &record).with_context(|| format!("writing {}", out.display()))?;
            println!(
                "wrote {} ({} bytes, kappa={})",
                out.display(),
                record.len(),
                kappa
            );
        }
        Command::Pipeline {
            inst,
            n,
            input,
            key,
            agg,
            tamper,
            out,
        } => {
            let messages = read_messages(&input)?;
            let max_len = messages.iter().map(Vec::len).max().unwrap_or(0).max(1) as u32;
            let record = match &key {
                Some(path) => {
                    Some(fs::read(path).with_context(|| format!("reading {}", path.display()))?)
                }
                None => None,
            };
            let kappa = match &record {
                Some(r) => graphene::KeyState::from_record(r)?.kappa(),
                None => Kappa::K128,
            };
            let config = build_config(inst, n, max_len, kappa, agg_mode(agg)?)?;
            let keys = match &record {
                Some(r) => load_keys(r, &config)?,
                None => graphene::kg_unified(&config, DEFAULT_PIPELINE_SEED)?,
            };
            match cmd_pipeline(&config, &keys, &messages, tamper) {
                Ok(report) => {
                    if let Some(path) = out {
                        let mut f = fs::File::create(&path)?;
                        for m in &report.plaintexts {
                            f.write_all(m)?;
                            f.write_all(b"\n")?;
                        }
                    }
                    println!(
                        "verified {} windows, {} messages, {} wire bytes",
                        report.windows,
                        report.plaintexts.len(),
                        report.wire_bytes
                    );
                }
                Err(e @ PipelineError::Usage(_)) => {
                    eprintln!("error: {e}");
                    return Ok(ExitCode::from(2));
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    return Ok(ExitCode::from(1));
                }
            }
        }
        Command::Bench { grid, reps, csv } => {
            if reps < bench::MIN_REPS {
                eprintln!("error: --reps must be at least {}", bench::MIN_REPS);
                return Ok(ExitCode::from(2));
            }
            let records = graphene_cli::cmd_bench(&grid, reps)?;
            if let Some(path) = csv {
                fs::write(&path, bench::to_csv(&records))?;
            }
            print!("{}", bench::to_markdown(&records));
        }
        Command::Breach { j, n, inst, seed } => {
            if !graphene_cli::snapshot_allowed() {
                eprintln!(
                    "error: breach simulation requires {}=1",
                    graphene_cli::SNAPSHOT_ENV
                );
                return Ok(ExitCode::from(2));
            }
            let mut ok = true;
            for inst in inst.map_or(Instantiation::ALL.to_vec(), |i| vec![i]) {
                let r = cmd_breach(inst, j, n, seed, true)?;
                println!(
                    "{inst}: j'={j} n={n} prior={} keys={} entries={} decrypt {}/{} forge {}/{} leaked={} wiped={} => {}",
                    r.prior_ciphertexts,
                    r.snapshot_keys,
                    r.snapshot_entries,
                    r.decrypt_successes,
                    r.decrypt_attempts,
                    r.forgery_successes,
                    r.forgery_attempts,
                    r.leaked_prior_secrets,
                    r.wiped,
                    if r.passed() { "all attacks failed" } else { "ATTACK SUCCEEDED" }
                );
                ok &= r.passed();
            }
            if !ok {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
