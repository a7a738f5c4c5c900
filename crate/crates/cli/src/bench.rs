use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use anyhow::{bail, Result};
use graphene::{kg_unified, EngineState, Instantiation, InstantiationConfig, SealedBatch};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    Offline,
    OnlineEncMac,
    OnlineVerify,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::Offline, Phase::OnlineEncMac, Phase::OnlineVerify];

    pub fn name(self) -> &'static str {
        match self {
            Phase::Offline => "offline",
            Phase::OnlineEncMac => "online_encmac",
            Phase::OnlineVerify => "online_verify",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One cell of the benchmark matrix. `ns_per_op` is per message.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchRecord {
    pub instantiation: Instantiation,
    pub phase: Phase,
    pub msg_len: usize,
    pub n: u32,
    pub ns_per_op: f64,
    pub table_bytes: usize,
    /// Std FAAE time over this time for the same cell; `None` when Std has
    /// no such phase.
    pub ratio_vs_std: Option<f64>,
}

/// `LENS x NS`, e.g. `16,32,128,256x1024` or `16x1,16`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BenchGrid {
    pub msg_lens: Vec<usize>,
    pub ns: Vec<u32>,
    pub instantiations: Vec<Instantiation>,
}

impl Default for BenchGrid {
    fn default() -> Self {
        BenchGrid {
            msg_lens: vec![16, 32, 64, 128, 256],
            ns: vec![1024],
            instantiations: Instantiation::ALL.to_vec(),
        }
    }
}

impl FromStr for BenchGrid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (lens, ns) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("grid {s:?} is not LENSxNS"))?;
        fn list<T: FromStr>(part: &str, what: &str) -> Result<Vec<T>, String> {
            part.split(',')
                .map(|v| {
                    v.trim()
                        .parse::<T>()
                        .map_err(|_| format!("bad {what} {v:?}"))
                })
                .collect()
        }
        let grid = BenchGrid {
            msg_lens: list(lens, "message length")?,
            ns: list(ns, "batch size")?,
            instantiations: Instantiation::ALL.to_vec(),
        };
        if grid.msg_lens.contains(&0) || grid.ns.contains(&0) {
            return Err("grid values must be positive".into());
        }
        Ok(grid)
    }
}

pub const MIN_REPS: usize = 100;
const WARMUP_REPS: usize = 5;
// each repetition covers at least this many messages, so tiny windows are
// not dominated by clock overhead
const MIN_MSGS_PER_REP: usize = 1024;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len() / 2;
    if v.len() % 2 == 1 {
        v[k]
    } else {
        (v[k - 1] + v[k]) / 2.0
    }
}

struct CellTimes {
    offline: Vec<f64>,
    online: Vec<f64>,
    verify: Vec<f64>,
    table_bytes: usize,
}

fn time_cell(inst: Instantiation, msg_len: usize, n: u32, reps: usize) -> Result<CellTimes> {
    let config = InstantiationConfig::new(inst, n, msg_len as u32);
    let root = kg_unified(&config, b"bench")?;
    let windows = MIN_MSGS_PER_REP.div_ceil(n as usize);
    let mut rng = ChaCha20Rng::seed_from_u64(msg_len as u64 ^ ((n as u64) << 20));
    let msgs: Vec<Vec<u8>> = (0..n)
        .map(|_| {
            let mut m = vec![0u8; msg_len];
            rng.fill_bytes(&mut m);
            m
        })
        .collect();
    let mut out = CellTimes {
        offline: Vec::with_capacity(reps),
        online: Vec::with_capacity(reps),
        verify: Vec::with_capacity(reps),
        table_bytes: 0,
    };
    let per_msg = (windows * n as usize) as f64;
    for rep in 0..reps + WARMUP_REPS {
        let (mut offline, mut online, mut verify) = (0u128, 0u128, 0u128);
        let mut sender = EngineState::new(config.clone(), root.clone())?;
        let mut verifier = EngineState::new(config.clone(), root.clone())?;
        let mut sealed: Vec<SealedBatch> = Vec::with_capacity(windows);
        for _ in 0..windows {
            if config.uses_table() {
                let t = Instant::now();
                sender.precompute()?;
                offline += t.elapsed().as_nanos();
                out.table_bytes = sender.table().map_or(0, |t| t.table_bytes());
            }
            let t = Instant::now();
            let s = sender.seal(&msgs)?;
            online += t.elapsed().as_nanos();
            sealed.push(s);
        }
        for s in &sealed {
            let t = Instant::now();
            let b = verifier.verdec(s)?;
            verify += t.elapsed().as_nanos();
            std::hint::black_box(b);
        }
        if rep >= WARMUP_REPS {
            out.offline.push(offline as f64 / per_msg);
            out.online.push(online as f64 / per_msg);
            out.verify.push(verify as f64 / per_msg);
        }
    }
    Ok(out)
}

/// Median-of-means timing over `reps` repetitions for every grid cell.
/// Precompute is timed as the offline phase and excluded from online.
pub fn cmd_bench(grid: &BenchGrid, reps: usize) -> Result<Vec<BenchRecord>> {
    if reps < MIN_REPS {
        bail!("repetitions must be at least {MIN_REPS}, got {reps}");
    }
    let mut records = Vec::new();
    for &n in &grid.ns {
        for &msg_len in &grid.msg_lens {
            let mut cell = Vec::new();
            for &inst in &grid.instantiations {
                let times = time_cell(inst, msg_len, n, reps)?;
                for (phase, samples) in [
                    (Phase::Offline, times.offline),
                    (Phase::OnlineEncMac, times.online),
                    (Phase::OnlineVerify, times.verify),
                ] {
                    if phase == Phase::Offline && inst == Instantiation::StdFaae {
                        continue;
                    }
                    cell.push(BenchRecord {
                        instantiation: inst,
                        phase,
                        msg_len,
                        n,
                        ns_per_op: median(samples).max(f64::MIN_POSITIVE),
                        table_bytes: times.table_bytes,
                        ratio_vs_std: None,
                    });
                }
            }
            let std_of = |phase: Phase, cell: &[BenchRecord]| {
                cell.iter()
                    .find(|r| r.instantiation == Instantiation::StdFaae && r.phase == phase)
                    .map(|r| r.ns_per_op)
            };
            let ratios: Vec<Option<f64>> = cell
                .iter()
                .map(|r| std_of(r.phase, &cell).map(|s| s / r.ns_per_op))
                .collect();
            for (r, ratio) in cell.iter_mut().zip(ratios) {
                r.ratio_vs_std = ratio;
            }
            records.extend(cell);
        }
    }
    Ok(records)
}

pub fn find(
    records: &[BenchRecord],
    inst: Instantiation,
    phase: Phase,
    msg_len: usize,
    n: u32,
) -> Option<&BenchRecord> {
    records
        .iter()
        .find(|r| r.instantiation == inst && r.phase == phase && r.msg_len == msg_len && r.n == n)
}

/// Offline plus online sealing cost per message.
pub fn amortized_ns(
    records: &[BenchRecord],
    inst: Instantiation,
    msg_len: usize,
    n: u32,
) -> Option<f64> {
    let online = find(records, inst, Phase::OnlineEncMac, msg_len, n)?.ns_per_op;
    let offline = find(records, inst, Phase::Offline, msg_len, n).map_or(0.0, |r| r.ns_per_op);
    Some(online + offline)
}

pub const CSV_HEADER: &str = "instantiation,phase,msg_len,n,ns_per_op,table_bytes,ratio_vs_std";

pub fn to_csv(records: &[BenchRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        let ratio = r
            .ratio_vs_std
            .map(|x| format!("{x:.3}"))
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{:.1},{},{}\n",
            r.instantiation, r.phase, r.msg_len, r.n, r.ns_per_op, r.table_bytes, ratio
        ));
    }
    out
}

pub fn to_markdown(records: &[BenchRecord]) -> String {
    let mut out = String::from(
        "| instantiation | phase | msg_len | n | ns/op | table bytes | vs std |\n|---|---|---:|---:|---:|---:|---:|\n",
    );
    for r in records {
        let ratio = r
            .ratio_vs_std
            .map(|x| format!("{x:.2}x"))
            .unwrap_or_else(|| "-".into());
        out.push_str(&format!(
            "| {} | {} | {} | {} | {:.1} | {} | {} |\n",
            r.instantiation, r.phase, r.msg_len, r.n, r.ns_per_op, r.table_bytes, ratio
        ));
    }
    let mut cells: Vec<(usize, u32)> = records.iter().map(|r| (r.msg_len, r.n)).collect();
    cells.dedup();
    out.push_str(
        "\nSpeedup over std_faae (online = seal only, amortized = precompute + seal):\n\n",
    );
    out.push_str(
        "| msg_len | n | instantiation | online | amortized |\n|---:|---:|---|---:|---:|\n",
    );
    for (len, n) in cells {
        let Some(std_amortized) = amortized_ns(records, Instantiation::StdFaae, len, n) else {
            continue;
        };
        for inst in [Instantiation::GrapheneAe, Instantiation::GraphenePoly] {
            let (Some(online), Some(amortized)) = (
                find(records, inst, Phase::OnlineEncMac, len, n).and_then(|r| r.ratio_vs_std),
                amortized_ns(records, inst, len, n),
            ) else {
                continue;
            };
            out.push_str(&format!(
                "| {len} | {n} | {inst} | {online:.2}x | {:.2}x |\n",
                std_amortized / amortized
            ));
        }
    }
    out.push_str(
        "\nReference ratios from the original evaluation, reported and not asserted: \
         graphene_poly on a Cortex-M4 at (n=1024, |m|=16) is 28x faster online and 8.1x overall; \
         graphene_ae on commodity x86 at the same point is 4.3x online and 2.4x amortized. \
         The Cortex-M4 figures are platform-bound.\n",
    );
    out
}
