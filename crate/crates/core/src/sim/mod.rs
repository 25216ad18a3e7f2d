//! Fabric assembly, the tick engine, traffic generation, experiments and
//! analytic bounds.

pub mod bounds;
mod experiment;
mod fabric;
mod traffic;

pub use bounds::{
    bisection_bound, count_bisection_crossings, pattern_capacity, uniform_crossing_fraction,
    zero_load_latency,
};
pub use experiment::{
    backlog_growing, build_traffic_fabric, default_traffic_credits, run_experiment, simulate,
    LatencyStats, SimReport, TrafficSpec, BACKLOG_NOISE_FLOOR, SUB_WINDOWS,
};
pub use fabric::{
    Fabric, FabricBuilder, FabricConfig, LinkUse, Network, PacketRecord, ReplyFinding,
};
pub use traffic::{gen_destination, MeshDims, TrafficPattern};
