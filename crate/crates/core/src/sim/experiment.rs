//! Latency/throughput experiments with infinite source queues.

use serde::{Deserialize, Serialize};

use crate::endpoint::{credits_recommended, EndpointKind};
use crate::error::{ConfigError, SimError};
use crate::nodes::{TrafficNode, TrafficNodeConfig};
use crate::packet::{OpCode, PacketFormat};
use crate::sim::bounds::{count_bisection_crossings, diameter, round_trip_cycles};
use crate::sim::{Fabric, FabricConfig, LinkUse, Network, PacketRecord, TrafficPattern};

/// Number of sub-windows the measurement window is split into for the
/// saturation test.
pub const SUB_WINDOWS: usize = 4;

/// Minimum growth, in packets per node, between consecutive sub-window
/// backlog samples for the growth to count as an increase.
pub const BACKLOG_NOISE_FLOOR: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrafficSpec {
    pub pattern: TrafficPattern,
    /// Packets per node per cycle, in (0, 1].
    pub injection_rate: f64,
    /// Fraction of loads; the rest are stores.
    pub load_fraction: f64,
    pub warmup_cycles: u64,
    /// Packets to generate inside the measurement window, network-wide.
    pub measure_packets: u64,
    /// Stop generating after the window and run until everything drains.
    pub drain: bool,
    /// Hard cap on simulated cycles for the whole experiment.
    pub max_cycles: u64,
    /// Per-endpoint credits; `None` sizes them for the longest round trip
    /// at one request per cycle.
    pub credits: Option<u32>,
}

impl Default for TrafficSpec {
    fn default() -> Self {
        TrafficSpec {
            pattern: TrafficPattern::UniformRandom,
            injection_rate: 0.1,
            load_fraction: 0.0,
            warmup_cycles: 1_000,
            measure_packets: 10_000,
            drain: true,
            max_cycles: 200_000,
            credits: None,
        }
    }
}

impl TrafficSpec {
    pub fn new(pattern: TrafficPattern, injection_rate: f64) -> Self {
        TrafficSpec {
            pattern,
            injection_rate,
            ..TrafficSpec::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.injection_rate > 0.0 && self.injection_rate <= 1.0) {
            return Err(ConfigError::invalid(format!(
                "injection rate {} outside (0, 1]",
                self.injection_rate
            )));
        }
        if !(0.0..=1.0).contains(&self.load_fraction) {
            return Err(ConfigError::invalid("load fraction outside [0, 1]"));
        }
        if self.measure_packets == 0 {
            return Err(ConfigError::invalid("measure_packets must be positive"));
        }
        if self.credits == Some(0) {
            return Err(ConfigError::invalid("credits must be at least 1"));
        }
        Ok(())
    }
}

/// Credits for a traffic endpoint: enough for the longest uncontended
/// round trip at one request per cycle.
pub fn default_traffic_credits(cfg: &FabricConfig, spec: &TrafficSpec) -> u32 {
    let op = if spec.load_fraction > 0.0 {
        OpCode::RemoteLoad
    } else {
        OpCode::RemoteStore
    };
    let rt = round_trip_cycles(diameter(cfg.dims()), op);
    credits_recommended(rt, 1.0).expect("round trip is positive")
}

/// A mesh with a [`TrafficNode`] on every tile.
pub fn build_traffic_fabric(cfg: &FabricConfig, spec: &TrafficSpec) -> Result<Fabric, ConfigError> {
    spec.validate()?;
    let dims = cfg.dims();
    spec.pattern.validate(dims)?;
    let format = PacketFormat::for_mesh(cfg.cols, cfg.rows, cfg.addr_width, cfg.data_width)?;
    let mut ep = cfg.endpoint;
    ep.max_out_credits = spec
        .credits
        .unwrap_or_else(|| default_traffic_credits(cfg, spec));
    let mut b = Fabric::builder(*cfg);
    for (i, at) in dims.coords().enumerate() {
        let node = TrafficNode::new(TrafficNodeConfig {
            pattern: spec.pattern,
            dims,
            rate: spec.injection_rate,
            load_fraction: spec.load_fraction,
            format,
            seed: cfg.seed,
            stream: i as u64,
        })?;
        b = b.node_with(at, EndpointKind::Standard(ep), node);
    }
    b.build()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatencyStats {
    pub mean: f64,
    pub median: f64,
    pub p99: f64,
    pub max: u64,
}

impl LatencyStats {
    /// Nearest-rank percentiles.
    pub fn from_samples(mut samples: Vec<u64>) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        samples.sort_unstable();
        let n = samples.len();
        let rank = |q: f64| samples[((q * n as f64).ceil() as usize).clamp(1, n) - 1] as f64;
        Some(LatencyStats {
            mean: samples.iter().sum::<u64>() as f64 / n as f64,
            median: rank(0.5),
            p99: rank(0.99),
            max: samples[n - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub pattern: TrafficPattern,
    pub nodes: u32,
    pub offered_rate: f64,
    pub measure_start: u64,
    pub measure_end: u64,
    pub end_cycle: u64,
    /// Requests created inside the measurement window.
    #[serde(skip)]
    pub records: Vec<PacketRecord>,
    pub injected: u64,
    pub delivered: u64,
    /// Deliveries per node per cycle during the measurement window.
    pub accepted_throughput: f64,
    pub latency: Option<LatencyStats>,
    /// Network-entry to delivery, same packets.
    pub network_latency: Option<LatencyStats>,
    pub saturated: bool,
    pub budget_exhausted: bool,
    /// Mean source backlog per node at the end of each sub-window.
    pub backlog_samples: Vec<f64>,
    /// Mean unanswered requests per node at the end of each sub-window.
    pub outstanding_samples: Vec<f64>,
    pub bisection_crossings: u64,
    #[serde(skip)]
    pub link_utilization: Vec<LinkUse>,
    pub turns_fwd: [[u64; 5]; 5],
    pub turns_rev: [[u64; 5]; 5],
    pub backpressure_fwd: u64,
    /// Reply-checker findings; empty for a conforming run.
    pub findings: Vec<String>,
}

impl SimReport {
    pub fn crossing_fraction(&self) -> f64 {
        if self.delivered == 0 {
            0.0
        } else {
            self.bisection_crossings as f64 / self.delivered as f64
        }
    }
}

fn mean_backlog(fabric: &Fabric, nodes: u32) -> f64 {
    fabric.backlog() as f64 / nodes as f64
}

fn mean_outstanding(fabric: &Fabric, nodes: u32) -> f64 {
    let total: u64 = fabric
        .attached()
        .filter_map(|c| fabric.outstanding(c))
        .map(u64::from)
        .sum();
    total as f64 / nodes as f64
}

/// Source queues still hold a request created before `cycle`.
fn queued_before(fabric: &Fabric, cycle: u64) -> bool {
    fabric
        .nodes::<TrafficNode>()
        .any(|(_, n)| n.oldest_queued().is_some_and(|o| o < cycle))
}

/// Backlog rising by more than the noise floor across the last
/// `SUB_WINDOWS - 1` sub-windows.
pub fn backlog_growing(samples: &[f64]) -> bool {
    samples.len() >= SUB_WINDOWS
        && samples[samples.len() - SUB_WINDOWS..]
            .windows(2)
            .all(|w| w[1] - w[0] > BACKLOG_NOISE_FLOOR)
}

/// Runs warmup, a measurement window sized to `measure_packets`, then
/// either drains the network or keeps generating until every measured
/// request has been delivered.
///
/// Latency runs from source-queue arrival to consumption, so time spent
/// waiting in the infinite source queue is included.
pub fn run_experiment(fabric: &mut Fabric, spec: &TrafficSpec) -> Result<SimReport, SimError> {
    spec.validate()?;
    let nodes = fabric.nodes::<TrafficNode>().count() as u32;
    if nodes == 0 {
        return Err(ConfigError::invalid("fabric has no traffic nodes").into());
    }
    let start = fabric.cycle();
    let deadline = start + spec.max_cycles;
    let mut budget_exhausted = false;

    let warm_end = (start + spec.warmup_cycles).min(deadline);
    fabric.run(warm_end - fabric.cycle())?;

    let window = (spec.measure_packets as f64 / (spec.injection_rate * nodes as f64)).ceil() as u64;
    let sub = window.div_ceil(SUB_WINDOWS as u64).max(1);
    let measure_start = fabric.cycle();
    let first_record = fabric.records().len();
    let mut backlog_samples = Vec::with_capacity(SUB_WINDOWS);
    let mut outstanding_samples = Vec::with_capacity(SUB_WINDOWS);
    for _ in 0..SUB_WINDOWS {
        let n = sub.min(deadline.saturating_sub(fabric.cycle()));
        fabric.run(n)?;
        backlog_samples.push(mean_backlog(fabric, nodes));
        outstanding_samples.push(mean_outstanding(fabric, nodes));
    }
    let measure_end = fabric.cycle();
    let window_deliveries = fabric.records()[..]
        .iter()
        .filter(|r| {
            r.delivery
                .is_some_and(|d| d >= measure_start && d < measure_end)
        })
        .count() as u64;

    // Requests created inside the window: all have fired once no source
    // queue holds an older one; then wait for their deliveries.
    let in_window = |r: &PacketRecord| r.origin >= measure_start && r.origin < measure_end;
    if spec.drain {
        fabric.for_each_node::<TrafficNode>(|n| n.set_generating(false));
    }
    let mut cursor = first_record;
    loop {
        if !queued_before(fabric, measure_end) {
            let recs = fabric.records();
            while cursor < recs.len()
                && (!in_window(&recs[cursor]) || recs[cursor].delivery.is_some())
            {
                cursor += 1;
            }
            let pending = recs[cursor..]
                .iter()
                .any(|r| in_window(r) && r.delivery.is_none());
            if !pending && (!spec.drain || fabric.is_quiescent()) {
                break;
            }
        }
        if fabric.cycle() >= deadline {
            budget_exhausted = true;
            break;
        }
        fabric.run(16.min(deadline - fabric.cycle()))?;
    }

    let records: Vec<PacketRecord> = fabric.records()[first_record..]
        .iter()
        .filter(|r| in_window(r))
        .copied()
        .collect();
    let injected = records.len() as u64
        + fabric
            .nodes::<TrafficNode>()
            .map(|(_, n)| n.queued_between(measure_start, measure_end))
            .sum::<u64>();
    let delivered: Vec<&PacketRecord> = records.iter().filter(|r| r.delivery.is_some()).collect();
    let latency =
        LatencyStats::from_samples(delivered.iter().filter_map(|r| r.latency()).collect());
    let network_latency = LatencyStats::from_samples(
        delivered
            .iter()
            .filter_map(|r| r.network_latency())
            .collect(),
    );
    let cols = fabric.dims().cols;
    let window_cycles = (measure_end - measure_start).max(1);

    Ok(SimReport {
        pattern: spec.pattern,
        nodes,
        offered_rate: spec.injection_rate,
        measure_start,
        measure_end,
        end_cycle: fabric.cycle(),
        injected,
        delivered: delivered.len() as u64,
        accepted_throughput: window_deliveries as f64 / (nodes as f64 * window_cycles as f64),
        latency,
        network_latency,
        saturated: budget_exhausted || backlog_growing(&backlog_samples),
        budget_exhausted,
        backlog_samples,
        outstanding_samples,
        bisection_crossings: count_bisection_crossings(&records, cols),
        link_utilization: fabric.link_utilization(),
        turns_fwd: fabric.turn_histogram(Network::Forward),
        turns_rev: fabric.turn_histogram(Network::Reverse),
        backpressure_fwd: fabric.backpressure_events(Network::Forward),
        findings: fabric
            .reply_findings()
            .iter()
            .filter(|f| spec.drain || !matches!(f, crate::sim::ReplyFinding::Missing { .. }))
            .map(ToString::to_string)
            .collect(),
        records,
    })
}

/// Builds a traffic fabric and runs one experiment on it.
pub fn simulate(cfg: &FabricConfig, spec: &TrafficSpec) -> Result<SimReport, SimError> {
    let mut fabric = build_traffic_fabric(cfg, spec)?;
    run_experiment(&mut fabric, spec)
}
