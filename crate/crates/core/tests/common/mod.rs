//! Shared helpers for the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use meshnoc::endpoint::{EndpointConfig, EndpointKind};
use meshnoc::nodes::{
    MemorySlave, Pair, RawSlave, ScriptStep, ScriptedMaster, TrafficNode, TrafficNodeConfig,
};
use meshnoc::packet::{Coordinate, OpCode, Packet, PacketFormat};
use meshnoc::sim::{Fabric, FabricConfig, MeshDims, PacketRecord, TrafficPattern};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy)]
pub enum TileKind {
    Traffic,
    Memory,
    Scripted,
    Raw,
}

/// A randomly generated fabric plus how long to keep traffic flowing.
pub struct Scenario {
    pub seed: u64,
    pub dims: MeshDims,
    pub io: Option<Coordinate>,
    pub kinds: Vec<TileKind>,
    pub fabric: Fabric,
    pub active_cycles: u64,
}

/// Builds a random mix of traffic sources, memories, scripted masters and
/// barebones slaves. Every tile serves requests, so any tile is a legal
/// destination.
pub fn random_scenario(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = MeshDims::new(rng.random_range(2..=8), rng.random_range(2..=8));
    let io = rng
        .random_bool(0.5)
        .then(|| Coordinate::new(rng.random_range(0..dims.cols), dims.rows));
    let cfg = FabricConfig {
        router_fifo_depth: rng.random_range(1..=4),
        seed,
        ..FabricConfig::mesh(dims.cols, dims.rows)
    };
    let rows_total = dims.rows + io.is_some() as u32;
    let format =
        PacketFormat::for_mesh(cfg.cols, rows_total, cfg.addr_width, cfg.data_width).unwrap();
    let mut targets: Vec<Coordinate> = dims.coords().collect();
    targets.extend(io);

    let mut b = Fabric::builder(cfg);
    let mut kinds = Vec::new();
    for (i, at) in dims.coords().enumerate() {
        let ep = EndpointKind::Standard(EndpointConfig {
            fifo_els: rng.random_range(2..=6),
            max_out_credits: rng.random_range(1..=16),
            ..EndpointConfig::default()
        });
        let roll: f64 = rng.random();
        let kind = if roll < 0.5 {
            TileKind::Traffic
        } else if roll < 0.7 {
            TileKind::Memory
        } else if roll < 0.85 {
            TileKind::Scripted
        } else {
            TileKind::Raw
        };
        kinds.push(kind);
        b = match kind {
            TileKind::Traffic => {
                let pattern = match rng.random_range(0..3) {
                    1 => TrafficPattern::NearestNeighbor,
                    2 if dims.cols == dims.rows => TrafficPattern::Transpose,
                    _ => TrafficPattern::UniformRandom,
                };
                let node = TrafficNode::new(TrafficNodeConfig {
                    pattern,
                    dims,
                    rate: rng.random_range(0.01..0.4),
                    load_fraction: rng.random_range(0.0..1.0),
                    format,
                    seed,
                    stream: i as u64,
                })
                .unwrap();
                b.node_with(at, ep, node)
            }
            TileKind::Memory => b.node_with(at, ep, MemorySlave::new(32)),
            TileKind::Scripted => {
                let steps: Vec<ScriptStep> = (0..rng.random_range(1..40))
                    .map(|_| {
                        let dest = targets[rng.random_range(0..targets.len())];
                        let addr = rng.random_range(0..64);
                        let data = rng.random_range(0..1u64 << 32);
                        let p = match rng.random_range(0..4) {
                            0 => Packet::load(at, dest, addr),
                            1 => Packet::store(at, dest, addr, data, format.full_mask()),
                            2 => Packet::swap(OpCode::RemoteSwapAq, at, dest, addr, data, 0xF),
                            _ => Packet::swap(OpCode::RemoteSwapRl, at, dest, addr, data, 0xF),
                        };
                        ScriptStep::at(rng.random_range(0..300), p)
                    })
                    .collect();
                let mut steps = steps;
                steps.sort_by_key(|s| s.not_before);
                b.node_with(
                    at,
                    ep,
                    Pair::new(ScriptedMaster::new(steps), MemorySlave::new(32)),
                )
            }
            TileKind::Raw => b.node_with(
                at,
                EndpointKind::Barebones {
                    fifo_els: rng.random_range(2..=4),
                },
                RawSlave::new(32),
            ),
        };
    }
    if let Some(at) = io {
        b = b.io(at, 1, MemorySlave::new(32));
    }
    Scenario {
        seed,
        dims,
        io,
        kinds,
        fabric: b.build().unwrap(),
        active_cycles: rng.random_range(200..1500),
    }
}

impl Scenario {
    /// Runs the active phase, stops the generators and drains.
    pub fn run_and_drain(&mut self, budget: u64) -> bool {
        self.fabric.run(self.active_cycles).unwrap();
        self.fabric
            .for_each_node::<TrafficNode>(|n| n.set_generating(false));
        self.fabric.run_until_quiescent(budget).unwrap()
    }
}

/// Pairs whose consumption order differs from their firing order.
pub fn ordering_violations(records: &[PacketRecord]) -> Vec<(u64, u64)> {
    let mut last: BTreeMap<(Coordinate, Coordinate), (u64, u64)> = BTreeMap::new();
    let mut bad = Vec::new();
    for r in records {
        let Some(d) = r.delivery else { continue };
        if let Some(&(id, prev)) = last.get(&(r.src, r.dest)) {
            if d <= prev {
                bad.push((id, r.id));
            }
        }
        last.insert((r.src, r.dest), (r.id, d));
    }
    bad
}
