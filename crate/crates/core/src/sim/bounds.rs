//! Closed-form and enumerated throughput and latency bounds.

use crate::error::ConfigError;
use crate::packet::{Coordinate, OpCode};
use crate::sim::{MeshDims, PacketRecord, TrafficPattern};

/// Cycles from a request firing to its consumption at a destination `h`
/// hops away, with no contention: `h + 1` router input FIFOs plus the
/// endpoint input FIFO.
pub fn one_way_latency(hops: u32) -> u32 {
    hops + 2
}

/// Cycles from a request firing until the requesting core can observe its
/// completion with no contention: the restored credit for a store, the
/// registered returned data for a load or swap.
pub fn round_trip_cycles(hops: u32, op: OpCode) -> u32 {
    match op {
        OpCode::RemoteStore => 2 * hops + 4,
        _ => 2 * hops + 5,
    }
}

/// Longest hop count between two tiles of the mesh.
pub fn diameter(dims: MeshDims) -> u32 {
    dims.cols - 1 + dims.rows - 1
}

/// Per-node injection rate at which uniform random traffic fills the
/// bisection of a `k` x `k` mesh: `k` links carry `k^2/4` packets per
/// round, so each node may inject every `k/4` cycles.
pub fn bisection_bound(k: u32) -> Result<f64, ConfigError> {
    if k < 2 {
        return Err(ConfigError::invalid("bisection bound needs k >= 2"));
    }
    Ok(4.0 / k as f64)
}

/// Which side of the vertical bisection a column is on.
fn left_of_bisection(x: u32, cols: u32) -> bool {
    x < cols / 2
}

pub fn crosses_bisection(src: Coordinate, dest: Coordinate, cols: u32) -> bool {
    left_of_bisection(src.x, cols) != left_of_bisection(dest.x, cols)
}

/// Expected fraction of uniform random packets (self-sends excluded) that
/// cross the vertical bisection of a `cols` x `rows` mesh.
pub fn uniform_crossing_fraction(dims: MeshDims) -> f64 {
    let n = dims.nodes() as f64;
    let left = (dims.cols / 2 * dims.rows) as f64;
    let right = n - left;
    2.0 * left * right / (n * (n - 1.0))
}

/// Delivered packets whose endpoints sit on opposite sides of the vertical
/// bisection of a `k`-column mesh.
pub fn count_bisection_crossings<'a>(
    records: impl IntoIterator<Item = &'a PacketRecord>,
    k: u32,
) -> u64 {
    records
        .into_iter()
        .filter(|r| r.delivery.is_some() && crosses_bisection(r.src, r.dest, k))
        .count() as u64
}

/// Mean Manhattan distance of a pattern, every node injecting equally.
pub fn mean_hops(pattern: TrafficPattern, dims: MeshDims) -> f64 {
    let total: f64 = dims
        .coords()
        .flat_map(|s| {
            pattern
                .distribution(s, dims)
                .into_iter()
                .map(move |(d, p)| p * s.distance(d) as f64)
        })
        .sum();
    total / dims.nodes() as f64
}

/// Zero-load request latency from source-queue arrival to consumption.
pub fn zero_load_latency(pattern: TrafficPattern, dims: MeshDims) -> f64 {
    mean_hops(pattern, dims) + one_way_latency(0) as f64
}

/// Routing-independent upper bound on the per-node injection rate of a
/// pattern: the tightest of every straight cut of the mesh (links per
/// direction against the expected traffic crossing in that direction),
/// the busiest ejection port, and one packet per node per cycle.
pub fn pattern_capacity(pattern: TrafficPattern, dims: MeshDims) -> Result<f64, ConfigError> {
    pattern.validate(dims)?;
    let flows: Vec<(Coordinate, Coordinate, f64)> = dims
        .coords()
        .flat_map(|s| {
            pattern
                .distribution(s, dims)
                .into_iter()
                .map(move |(d, p)| (s, d, p))
        })
        .collect();

    let mut cap: f64 = 1.0;
    let mut tighten = |links: u32, load: f64| {
        if load > 0.0 {
            cap = cap.min(links as f64 / load);
        }
    };
    for c in 1..dims.cols {
        let east: f64 = flows
            .iter()
            .filter(|(s, d, _)| s.x < c && d.x >= c)
            .map(|f| f.2)
            .sum();
        let west: f64 = flows
            .iter()
            .filter(|(s, d, _)| s.x >= c && d.x < c)
            .map(|f| f.2)
            .sum();
        tighten(dims.rows, east.max(west));
    }
    for c in 1..dims.rows {
        let south: f64 = flows
            .iter()
            .filter(|(s, d, _)| s.y < c && d.y >= c)
            .map(|f| f.2)
            .sum();
        let north: f64 = flows
            .iter()
            .filter(|(s, d, _)| s.y >= c && d.y < c)
            .map(|f| f.2)
            .sum();
        tighten(dims.cols, south.max(north));
    }
    let mut eject = vec![0.0; dims.nodes() as usize];
    for (_, d, p) in &flows {
        eject[dims.index(*d)] += p;
    }
    tighten(1, eject.iter().cloned().fold(0.0, f64::max));
    Ok(cap)
}
