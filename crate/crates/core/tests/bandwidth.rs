//! Every tile of a 16-wide mesh streaming stores to its mirror image across
//! the vertical bisection.

use meshnoc::nodes::{MemorySlave, Pair, StreamingMaster};
use meshnoc::packet::Coordinate;
use meshnoc::sim::{Fabric, FabricConfig, MeshDims};

const K: u32 = 16;

fn mirror_fabric(cycles: u64) -> (Fabric, f64) {
    let mut b = Fabric::builder(FabricConfig::mesh(K, K));
    for at in MeshDims::square(K).coords() {
        let peer = Coordinate::new(K - 1 - at.x, at.y);
        let master = StreamingMaster::new(peer, 0, u64::MAX, 32, 32);
        b = b.node(at, Pair::new(master, MemorySlave::new(32)));
    }
    let mut f = b.build().unwrap();
    f.run(2_000).unwrap();
    let before = f.records().iter().filter(|r| r.delivery.is_some()).count();
    f.run(cycles).unwrap();
    let after = f.records().iter().filter(|r| r.delivery.is_some()).count();
    let rate = (after - before) as f64 / (cycles as f64 * (K * K) as f64);
    (f, rate)
}

#[test]
fn bisection_limits_per_node_rate() {
    let (f, rate) = mirror_fabric(4_000);
    // 16 links each way, 128 senders each way.
    let bound = K as f64 / (K * K / 2) as f64;
    assert_eq!(bound, 0.125);
    assert!(rate <= bound + 1e-9, "per-node rate {rate}");
    // Row traffic never contends in Y, so the cut is the only limit and
    // the mesh runs right at it: twice one store per 16 cycles.
    assert!(rate > 1.0 / 16.0, "per-node rate {rate}");
    assert!(f
        .records()
        .iter()
        .all(|r| (r.src.x < K / 2) != (r.dest.x < K / 2)));
}
