use std::any::Any;
use std::collections::VecDeque;

use super::{CoreDrive, CorePort, Node, Outgoing};
use crate::packet::{Coordinate, Packet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeqState {
    Writing,
    Fence,
    Reading,
    Done,
}

/// One checked read response.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReadCheck {
    pub cycle: u64,
    /// Cycles since the first read request fired.
    pub counter: u64,
    pub returned: u64,
    pub expected: Option<u64>,
}

impl ReadCheck {
    pub fn ok(&self) -> bool {
        self.expected == Some(self.returned)
    }

    /// Monitor line in the style of the hardware testbench.
    pub fn monitor_line(&self) -> String {
        format!(
            "cycle {}, returned={:08x}, expected={:03x}",
            self.counter,
            self.returned,
            self.expected.unwrap_or(0)
        )
    }
}

/// Writes `i` to `base + i` for `i < n`, fences, then reads the words
/// back and checks them in issue order.
#[derive(Debug, Clone)]
pub struct SequenceMaster {
    dest: Coordinate,
    base: u32,
    n: u32,
    full_mask: u8,
    data_mask: u64,
    state: SeqState,
    cursor: u32,
    expected: VecDeque<u64>,
    first_read_fire: Option<u64>,
    checks: Vec<ReadCheck>,
    fence_exit: Option<(u64, u32, u32)>,
}

impl SequenceMaster {
    pub fn new(dest: Coordinate, base: u32, n: u32, data_width: u32) -> Self {
        SequenceMaster {
            dest,
            base,
            n,
            full_mask: ((1u16 << (data_width / 8)) - 1) as u8,
            data_mask: if data_width >= 64 {
                u64::MAX
            } else {
                (1 << data_width) - 1
            },
            state: if n == 0 {
                SeqState::Done
            } else {
                SeqState::Writing
            },
            cursor: 0,
            expected: VecDeque::new(),
            first_read_fire: None,
            checks: Vec::new(),
            fence_exit: None,
        }
    }

    pub fn state(&self) -> SeqState {
        self.state
    }

    pub fn checks(&self) -> &[ReadCheck] {
        &self.checks
    }

    pub fn first_read_fire(&self) -> Option<u64> {
        self.first_read_fire
    }

    /// `(cycle, out_credits, max_out_credits)` when the fence completed.
    pub fn fence_exit(&self) -> Option<(u64, u32, u32)> {
        self.fence_exit
    }

    pub fn monitor_lines(&self) -> Vec<String> {
        self.checks.iter().map(ReadCheck::monitor_line).collect()
    }

    /// Every word read back and matched.
    pub fn passed(&self) -> bool {
        self.state == SeqState::Done
            && self.expected.is_empty()
            && self.checks.len() == self.n as usize
            && self.checks.iter().all(ReadCheck::ok)
    }

    fn issue(&mut self, port: &CorePort) -> Option<Outgoing> {
        if self.state == SeqState::Fence && port.fence_done() {
            self.fence_exit = Some((port.cycle, port.out_credits, port.max_out_credits));
            self.state = SeqState::Reading;
        }
        if port.freeze {
            return None;
        }
        let addr = self.base + self.cursor;
        let packet = match self.state {
            SeqState::Writing => Packet::store(
                port.my,
                self.dest,
                addr,
                self.cursor as u64 & self.data_mask,
                self.full_mask,
            ),
            SeqState::Reading => Packet::load(port.my, self.dest, addr),
            SeqState::Fence | SeqState::Done => return None,
        };
        if port.out_ready {
            if self.state == SeqState::Reading {
                if self.cursor == 0 {
                    self.first_read_fire = Some(port.cycle);
                }
                self.expected.push_back(self.cursor as u64 & self.data_mask);
            }
            self.cursor += 1;
            if self.cursor == self.n {
                self.cursor = 0;
                self.state = match self.state {
                    SeqState::Writing => SeqState::Fence,
                    _ => SeqState::Done,
                };
            }
        }
        Some(Outgoing {
            packet,
            origin: port.cycle,
        })
    }
}

impl Node for SequenceMaster {
    fn tick(&mut self, port: &CorePort) -> CoreDrive {
        if let Some(returned) = port.returned {
            let first = self.first_read_fire.unwrap_or(port.cycle);
            self.checks.push(ReadCheck {
                cycle: port.cycle,
                counter: port.cycle - first,
                returned,
                expected: self.expected.pop_front(),
            });
        }
        CoreDrive {
            out: self.issue(port),
            ..CoreDrive::idle()
        }
    }

    fn is_idle(&self) -> bool {
        self.state == SeqState::Done && self.expected.is_empty()
    }

    fn as_any(&self) -> &dyn Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}

/// Streams stores to one peer, never letting more than `capacity` go
/// unacknowledged. With `capacity` equal to the peer's input FIFO depth
/// the stream can never back up into the network.
#[derive(Debug, Clone)]
pub struct StreamingMaster {
    dest: Coordinate,
    addr: u32,
    total: u64,
    sent: u64,
    capacity: u32,
    peak: u32,
    full_mask: u8,
}

impl StreamingMaster {
    pub fn new(dest: Coordinate, addr: u32, total: u64, capacity: u32, data_width: u32) -> Self {
        assert!(capacity >= 1, "peer capacity must be at least 1");
        StreamingMaster {
            dest,
            addr,
            total,
            sent: 0,
            capacity,
            peak: 0,
            full_mask: ((1u16 << (data_width / 8)) - 1) as u8,
        }
    }

    pub fn sent(&self) -> u64 {
        self.sent
    }

    /// Highest number of unacknowledged stores observed.
    pub fn peak_outstanding(&self) -> u32 {
        self.peak
    }
}

impl Node for StreamingMaster {
    fn tick(&mut self, port: &CorePort) -> CoreDrive {
        let outstanding = port.max_out_credits - port.out_credits;
        self.peak = self.peak.max(outstanding);
        if self.sent == self.total || outstanding >= self.capacity || port.freeze {
            return CoreDrive::idle();
        }
        let packet = Packet::store(port.my, self.dest, self.addr, self.sent, self.full_mask);
        if port.out_ready {
            self.sent += 1;
            self.peak = self.peak.max(outstanding + 1);
        }
        CoreDrive {
            out: Some(Outgoing {
                packet,
                origin: port.cycle,
            }),
            ..CoreDrive::idle()
        }
    }

    fn is_idle(&self) -> bool {
        self.sent == self.total
    }

    fn as_any(&self) -> &dyn Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}

/// A request to issue no earlier than `not_before`. The source coordinate
/// is filled in at issue time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScriptStep {
    pub not_before: u64,
    pub packet: Packet,
}

impl ScriptStep {
    pub fn at(not_before: u64, packet: Packet) -> Self {
        ScriptStep { not_before, packet }
    }
}

/// Issues a fixed list of requests in order and records what comes back.
#[derive(Debug, Clone, Default)]
pub struct ScriptedMaster {
    steps: VecDeque<ScriptStep>,
    fired: Vec<(u64, Packet)>,
    returns: Vec<(u64, u64)>,
}

impl ScriptedMaster {
    pub fn new(steps: impl IntoIterator<Item = ScriptStep>) -> Self {
        ScriptedMaster {
            steps: steps.into_iter().collect(),
            ..ScriptedMaster::default()
        }
    }

    /// `(fire cycle, packet)` per issued request.
    pub fn fired(&self) -> &[(u64, Packet)] {
        &self.fired
    }

    /// `(cycle, data)` per returned-data observation.
    pub fn returns(&self) -> &[(u64, u64)] {
        &self.returns
    }
}

impl Node for ScriptedMaster {
    fn tick(&mut self, port: &CorePort) -> CoreDrive {
        if let Some(data) = port.returned {
            self.returns.push((port.cycle, data));
        }
        let Some(step) = self.steps.front() else {
            return CoreDrive::idle();
        };
        if port.cycle < step.not_before || port.freeze {
            return CoreDrive::idle();
        }
        let packet = Packet {
            src: port.my,
            ..step.packet
        };
        if port.out_ready {
            self.steps.pop_front();
            self.fired.push((port.cycle, packet));
        }
        CoreDrive {
            out: Some(Outgoing {
                packet,
                origin: port.cycle,
            }),
            ..CoreDrive::idle()
        }
    }

    fn is_idle(&self) -> bool {
        self.steps.is_empty()
    }

    fn as_any(&self) -> &dyn Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}
