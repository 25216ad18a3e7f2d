//! Subcommands behind the `meshnoc` binary: the golden round trip, rate
//! sweeps to CSV, analytic bounds and two small demonstrations.
//!
//! Sweep CSV schema, one row per `(rate, seed)` point in plan order:
//!
//! | column | meaning |
//! |---|---|
//! | `pattern` | traffic pattern |
//! | `cols`, `rows` | mesh size |
//! | `seed` | RNG seed of the point |
//! | `offered_rate` | packets per node per cycle |
//! | `offered_normalized` | `offered_rate / (4 / max(cols, rows))` |
//! | `accepted_throughput` | deliveries per node per cycle in the window |
//! | `latency_mean`, `latency_median`, `latency_p99` | source-queue arrival to consumption, cycles |
//! | `saturated` | source-queue backlog kept growing, or the cycle budget ran out |
//! | `bisection_crossings` | measured packets crossing the vertical cut |
//! | `delivered` | measured packets delivered |

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use meshnoc::demo::{self, FREEZE_TARGET};
use meshnoc::endpoint::{credits_recommended, EndpointConfig};
use meshnoc::error::{ConfigError, SimError};
use meshnoc::packet::OpCode;
use meshnoc::sim::bounds::{diameter, round_trip_cycles};
use meshnoc::sim::{
    bisection_bound, simulate, FabricConfig, MeshDims, TrafficPattern, TrafficSpec,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("check failed: {0}")]
    Check(String),
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl CliError {
    /// 1 for failed checks and protocol violations, 2 for bad input.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Check(_) => 1,
            CliError::Sim(e) if e.is_protocol() => 1,
            CliError::Sim(_) | CliError::Config(_) | CliError::Output { .. } => 2,
        }
    }
}

/// Sweep settings as they appear in a TOML config file. Every key is
/// optional and mirrors a command-line flag of the same name with
/// underscores for dashes.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanFile {
    pub cols: Option<u32>,
    pub rows: Option<u32>,
    pub pattern: Option<String>,
    pub rates: Option<Vec<f64>>,
    pub seeds: Option<Vec<u64>>,
    pub router_fifo_depth: Option<usize>,
    pub endpoint_fifo_depth: Option<usize>,
    pub credits: Option<u32>,
    pub warmup: Option<u64>,
    pub measure: Option<u64>,
    pub load_fraction: Option<f64>,
    pub max_cycles: Option<u64>,
    pub output: Option<PathBuf>,
}

impl PlanFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Fills every unset key from `base`.
    pub fn or(self, base: PlanFile) -> PlanFile {
        PlanFile {
            cols: self.cols.or(base.cols),
            rows: self.rows.or(base.rows),
            pattern: self.pattern.or(base.pattern),
            rates: self.rates.or(base.rates),
            seeds: self.seeds.or(base.seeds),
            router_fifo_depth: self.router_fifo_depth.or(base.router_fifo_depth),
            endpoint_fifo_depth: self.endpoint_fifo_depth.or(base.endpoint_fifo_depth),
            credits: self.credits.or(base.credits),
            warmup: self.warmup.or(base.warmup),
            measure: self.measure.or(base.measure),
            load_fraction: self.load_fraction.or(base.load_fraction),
            max_cycles: self.max_cycles.or(base.max_cycles),
            output: self.output.or(base.output),
        }
    }
}

/// A validated sweep: one simulation per `(rate, seed)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub fabric: FabricConfig,
    pub traffic: TrafficSpec,
    pub rates: Vec<f64>,
    pub seeds: Vec<u64>,
    pub output: Option<PathBuf>,
}

impl ExperimentPlan {
    pub fn from_file(f: PlanFile) -> Result<Self, CliError> {
        let mut fabric = FabricConfig::mesh(f.cols.unwrap_or(8), f.rows.unwrap_or(8));
        if let Some(d) = f.router_fifo_depth {
            fabric.router_fifo_depth = d;
        }
        if let Some(d) = f.endpoint_fifo_depth {
            fabric.endpoint.fifo_els = d;
        }
        let pattern: TrafficPattern = f.pattern.as_deref().unwrap_or("uniform").parse()?;
        let defaults = TrafficSpec::default();
        let traffic = TrafficSpec {
            pattern,
            load_fraction: f.load_fraction.unwrap_or(defaults.load_fraction),
            warmup_cycles: f.warmup.unwrap_or(defaults.warmup_cycles),
            measure_packets: f.measure.unwrap_or(defaults.measure_packets),
            drain: false,
            max_cycles: f.max_cycles.unwrap_or(60_000),
            credits: f.credits,
            ..defaults
        };
        let plan = ExperimentPlan {
            fabric,
            traffic,
            rates: f.rates.unwrap_or_default(),
            seeds: f.seeds.unwrap_or_else(|| vec![1]),
            output: f.output,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.rates.is_empty() {
            return Err(CliError::Config("rate list is empty".into()));
        }
        if self.rates.windows(2).any(|w| w[1] < w[0]) {
            return Err(CliError::Config("rates must be sorted ascending".into()));
        }
        if self.seeds.is_empty() {
            return Err(CliError::Config("at least one seed is required".into()));
        }
        for &rate in &self.rates {
            TrafficSpec {
                injection_rate: rate,
                ..self.traffic
            }
            .validate()?;
        }
        self.traffic.pattern.validate(self.fabric.dims())?;
        Ok(())
    }

    fn points(&self) -> Vec<(f64, u64)> {
        self.rates
            .iter()
            .flat_map(|&r| self.seeds.iter().map(move |&s| (r, s)))
            .collect()
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub pattern: String,
    pub cols: u32,
    pub rows: u32,
    pub seed: u64,
    pub offered_rate: f64,
    pub offered_normalized: f64,
    pub accepted_throughput: f64,
    pub latency_mean: Option<f64>,
    pub latency_median: Option<f64>,
    pub latency_p99: Option<f64>,
    pub saturated: bool,
    pub bisection_crossings: u64,
    pub delivered: u64,
}

pub const CSV_HEADER: &str = "pattern,cols,rows,seed,offered_rate,offered_normalized,\
accepted_throughput,latency_mean,latency_median,latency_p99,saturated,bisection_crossings,delivered";

/// Runs every point of the plan on the rayon pool. Rows come back in plan
/// order whatever order the points finish in.
pub fn run_sweep(plan: &ExperimentPlan) -> Result<Vec<SweepRow>, CliError> {
    plan.validate()?;
    let k = plan.fabric.cols.max(plan.fabric.rows).max(2);
    let norm = bisection_bound(k)?;
    plan.points()
        .into_par_iter()
        .map(|(rate, seed)| {
            let cfg = FabricConfig {
                seed,
                ..plan.fabric
            };
            let spec = TrafficSpec {
                injection_rate: rate,
                ..plan.traffic
            };
            let r = simulate(&cfg, &spec)?;
            Ok(SweepRow {
                pattern: r.pattern.to_string(),
                cols: cfg.cols,
                rows: cfg.rows,
                seed,
                offered_rate: rate,
                offered_normalized: rate / norm,
                accepted_throughput: r.accepted_throughput,
                latency_mean: r.latency.map(|l| l.mean),
                latency_median: r.latency.map(|l| l.median),
                latency_p99: r.latency.map(|l| l.p99),
                saturated: r.saturated,
                bisection_crossings: r.bisection_crossings,
                delivered: r.delivered,
            })
        })
        .collect()
}

pub fn write_csv(rows: &[SweepRow], out: impl Write) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(CSV_HEADER.split(','))?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Runs the sweep and writes the CSV to the plan's output path, or to
/// `stdout` when there is none.
pub fn cmd_sweep(plan: &ExperimentPlan, stdout: impl Write) -> Result<Vec<SweepRow>, CliError> {
    // Fail on an unwritable path before spending time simulating.
    let file = match &plan.output {
        Some(path) => Some(
            std::fs::File::create(path).map_err(|source| CliError::Output {
                path: path.clone(),
                source,
            })?,
        ),
        None => None,
    };
    let rows = run_sweep(plan)?;
    let res = match file {
        Some(f) => write_csv(&rows, f),
        None => write_csv(&rows, stdout),
    };
    res.map_err(|e| CliError::Output {
        path: plan.output.clone().unwrap_or_else(|| "-".into()),
        source: e.into(),
    })?;
    Ok(rows)
}

/// Runs the two-router round trip and checks the 7, 8, 9 response pattern.
/// A mismatch reports the full cycle trace.
pub fn cmd_golden(words: u32, endpoint_fifo: usize) -> Result<String, CliError> {
    if words == 0 {
        return Err(CliError::Config("need at least one word".into()));
    }
    let ep = EndpointConfig {
        fifo_els: endpoint_fifo,
        ..EndpointConfig::default()
    };
    let run = demo::golden_roundtrip(words, ep)?;
    let want: Vec<u64> = (0..words as u64).map(|i| 7 + i).collect();
    let mut out = run.monitor_lines().join("\n");
    out.push('\n');
    if !run.passed || run.counters() != want {
        return Err(CliError::Check(format!(
            "expected responses at {want:?}, got {:?}\n{out}{}",
            run.counters(),
            run.trace.join("\n")
        )));
    }
    Ok(out)
}

pub fn cmd_bounds(k: u32) -> Result<String, CliError> {
    if k < 2 {
        return Err(CliError::Config(format!("k must be at least 2, got {k}")));
    }
    let bound = bisection_bound(k)?;
    let mut s = String::new();
    writeln!(s, "{k}x{k} mesh").unwrap();
    writeln!(s, "bisection links: {k} per direction").unwrap();
    writeln!(
        s,
        "packets crossing per round of uniform traffic: {}",
        k * k / 4
    )
    .unwrap();
    if bound > 1.0 {
        writeln!(
            s,
            "per-node saturation bound: {:.3} packets/node/cycle (4/k = {bound:.3}, clamped: a node injects at most one packet per cycle)",
            1.0
        )
        .unwrap();
    } else {
        writeln!(
            s,
            "per-node saturation bound: {bound:.3} packets/node/cycle (1 per {} cycles)",
            fmt_cycles(1.0 / bound)
        )
        .unwrap();
    }
    writeln!(
        s,
        "note: normalizing by 2/k instead gives {:.3}, which assumes both directions of traffic share the same k links",
        (2.0 / k as f64).min(1.0)
    )
    .unwrap();
    let dims = MeshDims::square(k);
    let rt = round_trip_cycles(diameter(dims), OpCode::RemoteStore);
    let credits = credits_recommended(rt, 1.0).expect("positive round trip");
    writeln!(
        s,
        "corner-to-corner: {} hops, {rt}-cycle store round trip, {credits} credits for one store per cycle",
        diameter(dims)
    )
    .unwrap();
    Ok(s)
}

fn fmt_cycles(c: f64) -> String {
    if (c - c.round()).abs() < 1e-9 {
        format!("{}", c.round())
    } else {
        format!("{c:.2}")
    }
}

pub fn cmd_ordering_demo() -> Result<String, CliError> {
    let loads = demo::ordering_demo()?;
    let mut s = String::new();
    for l in &loads {
        writeln!(
            s,
            "load to {} fired at {}, data {:#x} back at {}",
            l.dest, l.fired, l.data, l.returned
        )
        .unwrap();
    }
    let (far, near) = (loads[0], loads[1]);
    if near.returned >= far.returned {
        return Err(CliError::Check(format!(
            "near reply did not overtake:\n{s}"
        )));
    }
    writeln!(
        s,
        "the load to {} overtook the earlier load to {} by {} cycles",
        near.dest,
        far.dest,
        far.returned - near.returned
    )
    .unwrap();
    Ok(s)
}

pub fn cmd_freeze_demo(cycles: u64) -> Result<String, CliError> {
    let samples = demo::freeze_demo(cycles)?;
    let mut s = String::new();
    let mut prev: Option<(bool, bool)> = None;
    let mut issued_while_frozen = 0;
    let mut issued = 0;
    for w in samples.windows(2) {
        if w[0].freeze && w[1].issued {
            issued_while_frozen += 1;
        }
    }
    for x in &samples {
        issued += x.issued as u32;
        let now = (x.freeze, x.arb_priority);
        if prev != Some(now) {
            writeln!(
                s,
                "cycle {:>4}: freeze={} arb_priority={} (requests so far {issued})",
                x.cycle, now.0 as u8, now.1 as u8
            )
            .unwrap();
            prev = Some(now);
        }
    }
    writeln!(
        s,
        "{FREEZE_TARGET} issued {issued} requests in {cycles} cycles"
    )
    .unwrap();
    if issued_while_frozen > 0 {
        return Err(CliError::Check(format!(
            "{issued_while_frozen} requests issued while frozen\n{s}"
        )));
    }
    Ok(s)
}
