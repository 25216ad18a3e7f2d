//! Small canned scenarios: the two-router round trip, the out-of-order
//! reply example and a freeze/unfreeze run.

use crate::endpoint::EndpointConfig;
use crate::error::SimError;
use crate::nodes::{
    MemorySlave, ReadCheck, ScriptStep, ScriptedMaster, SequenceMaster, StreamingMaster,
};
use crate::packet::{ConfigReg, Coordinate, Packet, PacketFormat};
use crate::sim::{Fabric, FabricConfig};

/// Master tile of the two-router topology.
pub const GOLDEN_MASTER: Coordinate = Coordinate::new(0, 0);
/// Memory hanging off the south port of router (1, 0).
pub const GOLDEN_MEMORY: Coordinate = Coordinate::new(1, 1);

#[derive(Debug, Clone)]
pub struct GoldenRun {
    pub checks: Vec<ReadCheck>,
    /// `(cycle, out_credits, max_out_credits)` when the fence completed.
    pub fence_exit: Option<(u64, u32, u32)>,
    pub passed: bool,
    pub trace: Vec<String>,
}

impl GoldenRun {
    /// Cycles from the first read firing to each response.
    pub fn counters(&self) -> Vec<u64> {
        self.checks.iter().map(|c| c.counter).collect()
    }

    pub fn monitor_lines(&self) -> Vec<String> {
        self.checks.iter().map(ReadCheck::monitor_line).collect()
    }
}

/// Two routers in a row, a master at (0, 0) and a memory on the south edge
/// under router (1, 0). The master writes `words` words, fences and reads
/// them back.
pub fn golden_roundtrip(words: u32, endpoint: EndpointConfig) -> Result<GoldenRun, SimError> {
    let cfg = FabricConfig {
        endpoint,
        ..FabricConfig::mesh(2, 1)
    };
    let dw = cfg.data_width;
    let mut fabric = Fabric::builder(cfg)
        .node(
            GOLDEN_MASTER,
            SequenceMaster::new(GOLDEN_MEMORY, 0, words, dw),
        )
        .io(GOLDEN_MEMORY, 1, MemorySlave::new(dw))
        .build()?;
    fabric.enable_trace();
    fabric.run_until_quiescent(10_000 + 10 * words as u64)?;
    let m = fabric
        .node::<SequenceMaster>(GOLDEN_MASTER)
        .expect("master attached");
    Ok(GoldenRun {
        checks: m.checks().to_vec(),
        fence_exit: m.fence_exit(),
        passed: m.passed(),
        trace: fabric.trace().to_vec(),
    })
}

/// One load of the ordering example.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrderedLoad {
    pub dest: Coordinate,
    pub fired: u64,
    /// Cycle the master saw the data.
    pub returned: u64,
    pub data: u64,
}

/// A master at (0, 0) loads from a far slave at (3, 0) and one cycle later
/// from a near slave at (1, 0), then loads the far slave again. Replies
/// come back in distance order, not issue order, except that the two loads
/// to the same slave stay ordered.
pub fn ordering_demo() -> Result<Vec<OrderedLoad>, SimError> {
    let master = Coordinate::new(0, 0);
    let near = Coordinate::new(1, 0);
    let far = Coordinate::new(3, 0);
    let mut near_mem = MemorySlave::new(32);
    near_mem.write(0, 0x5A0);
    let mut far_mem = MemorySlave::new(32);
    far_mem.write(0, 0x5B1);
    far_mem.write(1, 0x5B2);
    let script = ScriptedMaster::new([
        ScriptStep::at(4, Packet::load(master, far, 0)),
        ScriptStep::at(4, Packet::load(master, near, 0)),
        ScriptStep::at(4, Packet::load(master, far, 1)),
    ]);
    let mut fabric = Fabric::builder(FabricConfig::mesh(4, 1))
        .node(master, script)
        .node(near, near_mem)
        .node(far, far_mem)
        .build()?;
    fabric.run_until_quiescent(1_000)?;
    let m = fabric
        .node::<ScriptedMaster>(master)
        .expect("master attached");
    let mut loads: Vec<OrderedLoad> = fabric
        .records()
        .iter()
        .map(|r| {
            let returned = r.reply_delivered.expect("drained") + 1;
            let data = m
                .returns()
                .iter()
                .find(|(c, _)| *c == returned)
                .map(|&(_, d)| d)
                .expect("every reply observed");
            OrderedLoad {
                dest: r.dest,
                fired: r.entry,
                returned,
                data,
            }
        })
        .collect();
    loads.sort_by_key(|l| l.fired);
    Ok(loads)
}

/// Per-cycle view of the frozen tile in [`freeze_demo`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FreezeSample {
    pub cycle: u64,
    pub freeze: bool,
    pub arb_priority: bool,
    /// The tile's master fired a request this cycle.
    pub issued: bool,
}

pub const FREEZE_CONTROLLER: Coordinate = Coordinate::new(0, 0);
pub const FREEZE_TARGET: Coordinate = Coordinate::new(1, 0);

/// A controller at (0, 0) freezes the streaming master at (1, 0), thaws it,
/// then writes the arbiter-priority register twice.
pub fn freeze_demo(cycles: u64) -> Result<Vec<FreezeSample>, SimError> {
    let sink = Coordinate::new(2, 0);
    let cfg = FabricConfig::mesh(3, 1);
    let fmt = PacketFormat::for_mesh(cfg.cols, cfg.rows, cfg.addr_width, cfg.data_width)?;
    let freeze = fmt.config_addr(ConfigReg::Freeze);
    let arb = fmt.config_addr(ConfigReg::ArbiterPriority);
    let mask = fmt.full_mask();
    let c = FREEZE_CONTROLLER;
    let t = FREEZE_TARGET;
    let controller = ScriptedMaster::new([
        ScriptStep::at(20, Packet::store(c, t, freeze, 1, mask)),
        ScriptStep::at(60, Packet::store(c, t, freeze, 0, mask)),
        ScriptStep::at(80, Packet::store(c, t, arb, 1, mask)),
        ScriptStep::at(90, Packet::store(c, t, arb, 1, mask)),
    ]);
    let mut fabric = Fabric::builder(cfg)
        .node(c, controller)
        .node(t, StreamingMaster::new(sink, 0, u64::MAX, 4, 32))
        .node(sink, MemorySlave::new(32))
        .build()?;
    let mut samples = Vec::with_capacity(cycles as usize);
    for _ in 0..cycles {
        let cycle = fabric.cycle();
        let before = fabric
            .node::<StreamingMaster>(t)
            .map_or(0, StreamingMaster::sent);
        fabric.tick()?;
        let ep = fabric
            .endpoint(t)
            .and_then(|e| e.as_standard())
            .expect("standard endpoint");
        samples.push(FreezeSample {
            cycle,
            freeze: ep.freeze(),
            arb_priority: ep.arb_priority(),
            issued: fabric
                .node::<StreamingMaster>(t)
                .map_or(0, StreamingMaster::sent)
                > before,
        });
    }
    Ok(samples)
}
