//! Five-port mesh router: XY dimension-ordered routing, the reduced
//! crossbar, round-robin output arbitration and input FIFOs.
//!
//! Routers have input FIFOs only. Each cycle every output picks at most one
//! input whose head is routed to it; the winner moves straight into the
//! downstream input FIFO (or endpoint). Only FIFO heads arbitrate, so a
//! blocked head stalls everything queued behind it.

use serde::{Deserialize, Serialize};

use crate::error::ProtocolViolation;
use crate::link::Fifo;
use crate::packet::{Coordinate, Packet, ReturnPacket};

/// Router port. The integer encoding is fixed: `P=0, W, E, N, S`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Direction {
    P = 0,
    W = 1,
    E = 2,
    N = 3,
    S = 4,
}

impl Direction {
    pub const ALL: [Direction; 5] = [
        Direction::P,
        Direction::W,
        Direction::E,
        Direction::N,
        Direction::S,
    ];

    pub const fn index(self) -> usize {
        self as usize
    }

    pub const fn from_index(i: usize) -> Direction {
        Direction::ALL[i % 5]
    }

    /// The port on the neighboring router that faces this one.
    pub const fn opposite(self) -> Direction {
        match self {
            Direction::P => Direction::P,
            Direction::W => Direction::E,
            Direction::E => Direction::W,
            Direction::N => Direction::S,
            Direction::S => Direction::N,
        }
    }
}

/// Stub bits over `{W, E, N, S}`; bit 0 is W. The processor port can never
/// be stubbed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct StubMask(u8);

impl StubMask {
    pub const NONE: StubMask = StubMask(0);
    pub const ALL: StubMask = StubMask(0b1111);

    pub fn from_bits(bits: u8) -> Self {
        StubMask(bits & 0b1111)
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn with(self, dir: Direction) -> Self {
        match dir {
            Direction::P => self,
            d => StubMask(self.0 | 1 << (d.index() - 1)),
        }
    }

    pub fn is_stubbed(self, dir: Direction) -> bool {
        match dir {
            Direction::P => false,
            d => self.0 & (1 << (d.index() - 1)) != 0,
        }
    }
}

/// XY dimension-ordered route: resolve X completely, then Y.
pub fn route_decision(my: Coordinate, dest: Coordinate) -> Direction {
    use std::cmp::Ordering::*;
    match (dest.x.cmp(&my.x), dest.y.cmp(&my.y)) {
        (Greater, _) => Direction::E,
        (Less, _) => Direction::W,
        (Equal, Greater) => Direction::S,
        (Equal, Less) => Direction::N,
        (Equal, Equal) => Direction::P,
    }
}

/// Whether the crossbar has a path from input `from` to output `to`.
///
/// Only N→W and N→E are missing. S→W and S→E exist so that south-edge IO
/// can reach any column.
pub fn check_turn_legal(from: Direction, to: Direction) -> bool {
    !(from == Direction::N && matches!(to, Direction::W | Direction::E))
}

/// Round-robin pointer for one output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RoundRobin {
    pointer: usize,
}

impl RoundRobin {
    pub fn pointer(&self) -> Direction {
        Direction::from_index(self.pointer)
    }

    /// Grants the first requester at or after the pointer, cyclically, and
    /// moves the pointer just past it. `requests` is a 5-bit mask indexed by
    /// [`Direction::index`].
    pub fn grant(&mut self, requests: u8) -> Option<Direction> {
        let requests = requests & 0b1_1111;
        if requests == 0 {
            return None;
        }
        let winner = (0..5)
            .map(|i| (self.pointer + i) % 5)
            .find(|&i| requests & (1 << i) != 0)?;
        self.pointer = (winner + 1) % 5;
        Some(Direction::from_index(winner))
    }
}

/// One round-robin pointer per output port.
#[derive(Debug, Clone, Default)]
pub struct ArbiterState {
    outputs: [RoundRobin; 5],
}

impl ArbiterState {
    pub fn pointer(&self, out: Direction) -> Direction {
        self.outputs[out.index()].pointer()
    }

    pub fn arbiter_grant(&mut self, out: Direction, requests: u8) -> Option<Direction> {
        self.outputs[out.index()].grant(requests)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RouterConfig {
    pub my: Coordinate,
    pub stub: StubMask,
    pub fifo_depth: usize,
}

/// Anything a router can carry.
pub trait Routable {
    fn dest(&self) -> Coordinate;
}

impl Routable for Packet {
    fn dest(&self) -> Coordinate {
        self.dest
    }
}

impl Routable for ReturnPacket {
    fn dest(&self) -> Coordinate {
        self.dest
    }
}

/// A payload in flight plus simulator bookkeeping that is not part of the
/// wire format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Flit<T> {
    pub payload: T,
    /// Id of the forward request this flit belongs to.
    pub id: u64,
    /// Router input FIFOs crossed so far.
    pub routers: u32,
}

/// State of whatever an output port drives, sampled before the cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Downstream {
    Ready,
    Busy,
    /// Nothing attached.
    Tied,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grant {
    pub input: Direction,
    pub output: Direction,
}

#[derive(Debug, Clone, Default)]
pub struct RouterStats {
    /// Flits sent per output port.
    pub forwarded: [u64; 5],
    /// Cycles in which some head routed to an output was held back because
    /// the downstream was not ready.
    pub backpressure: [u64; 5],
    /// Head-of-FIFO requests that lost arbitration.
    pub arbitration_losses: u64,
    /// `turns[in][out]` hop counts.
    pub turns: [[u64; 5]; 5],
}

#[derive(Debug, Clone)]
pub struct Router<T> {
    cfg: RouterConfig,
    inputs: [Option<Fifo<Flit<T>>>; 5],
    arb: ArbiterState,
    pub stats: RouterStats,
}

impl<T: Routable> Router<T> {
    pub fn new(cfg: RouterConfig) -> Self {
        let inputs = std::array::from_fn(|i| {
            let dir = Direction::from_index(i);
            (!cfg.stub.is_stubbed(dir)).then(|| Fifo::new(cfg.fifo_depth))
        });
        Router {
            cfg,
            inputs,
            arb: ArbiterState::default(),
            stats: RouterStats::default(),
        }
    }

    pub fn config(&self) -> &RouterConfig {
        &self.cfg
    }

    pub fn arbiter(&self) -> &ArbiterState {
        &self.arb
    }

    /// `ready` of an input port. Stubbed ports are never ready.
    pub fn input_ready(&self, dir: Direction) -> bool {
        self.inputs[dir.index()]
            .as_ref()
            .is_some_and(Fifo::can_accept)
    }

    pub fn input(&self, dir: Direction) -> Option<&Fifo<Flit<T>>> {
        self.inputs[dir.index()].as_ref()
    }

    /// Writes into an input FIFO. Panics on a stubbed or full port.
    pub fn accept(&mut self, dir: Direction, mut flit: Flit<T>, now: u64) {
        flit.routers += 1;
        self.inputs[dir.index()]
            .as_mut()
            .unwrap_or_else(|| panic!("write to stubbed port {dir:?} at {}", self.cfg.my))
            .push(flit, now);
    }

    /// Flits currently buffered.
    pub fn resident(&self) -> usize {
        self.inputs.iter().flatten().map(Fifo::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.resident() == 0
    }

    /// Combinational phase: picks at most one input per output.
    ///
    /// `downstream[d]` is the pre-cycle state of whatever output `d` drives.
    /// Outputs are evaluated in `P, W, E, N, S` order.
    pub fn plan(
        &mut self,
        now: u64,
        downstream: &[Downstream; 5],
    ) -> Result<Vec<Grant>, ProtocolViolation> {
        let my = self.cfg.my;
        let mut requests = [0u8; 5];
        let mut blocked = [false; 5];
        for input in Direction::ALL {
            let Some(head) = self.inputs[input.index()]
                .as_ref()
                .and_then(|f| f.peek(now))
            else {
                continue;
            };
            let dest = head.payload.dest();
            let out = route_decision(my, dest);
            if self.cfg.stub.is_stubbed(out) {
                return Err(ProtocolViolation::StubbedPort {
                    at: my,
                    dir: out,
                    dest,
                });
            }
            if !check_turn_legal(input, out) {
                return Err(ProtocolViolation::IllegalTurn {
                    at: my,
                    from: input,
                    to: out,
                });
            }
            match downstream[out.index()] {
                Downstream::Ready => requests[out.index()] |= 1 << input.index(),
                Downstream::Busy => blocked[out.index()] = true,
                Downstream::Tied => {
                    return Err(ProtocolViolation::TiedPort {
                        at: my,
                        dir: out,
                        dest,
                    })
                }
            }
        }

        let mut grants = Vec::new();
        for out in Direction::ALL {
            if blocked[out.index()] {
                self.stats.backpressure[out.index()] += 1;
            }
            let req = requests[out.index()];
            if let Some(input) = self.arb.arbiter_grant(out, req) {
                self.stats.arbitration_losses += (req.count_ones() - 1) as u64;
                grants.push(Grant { input, output: out });
            }
        }
        Ok(grants)
    }

    /// Registered phase for one grant: removes the winning head.
    pub fn take(&mut self, grant: Grant, now: u64) -> Flit<T> {
        self.stats.forwarded[grant.output.index()] += 1;
        self.stats.turns[grant.input.index()][grant.output.index()] += 1;
        self.inputs[grant.input.index()]
            .as_mut()
            .expect("grant from stubbed input")
            .pop(now)
    }
}
