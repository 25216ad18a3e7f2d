use std::any::Any;

use super::{CoreDrive, CorePort, Node, Outgoing};
use crate::packet::{Coordinate, OpCode, Packet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LockPhase {
    Acquire,
    WaitAcquire,
    Backoff { until: u64 },
    Load,
    WaitLoad,
    Store,
    Fence,
    Release,
    WaitRelease,
    Done,
}

/// Spin-lock client: acquire with `swap_aq`, bump a shared counter with a
/// plain load/store pair, fence, release with `swap_rl`.
///
/// The counter update is not atomic, so a final counter below the total
/// number of critical sections means two clients overlapped.
#[derive(Debug, Clone)]
pub struct LockClient {
    id: u64,
    lock: (Coordinate, u32),
    counter: (Coordinate, u32),
    iterations: u32,
    done: u32,
    phase: LockPhase,
    value: u64,
    full_mask: u8,
    acquired_at: Option<u64>,
    holds: Vec<(u64, u64)>,
    failed_acquires: u64,
    bad_releases: u32,
}

impl LockClient {
    /// `id` must be non-zero: it is the value written into the lock word.
    pub fn new(
        id: u64,
        lock: (Coordinate, u32),
        counter: (Coordinate, u32),
        iterations: u32,
        data_width: u32,
    ) -> Self {
        assert!(id != 0, "lock client id must be non-zero");
        LockClient {
            id,
            lock,
            counter,
            iterations,
            done: 0,
            phase: if iterations == 0 {
                LockPhase::Done
            } else {
                LockPhase::Acquire
            },
            value: 0,
            full_mask: ((1u16 << (data_width / 8)) - 1) as u8,
            acquired_at: None,
            holds: Vec::new(),
            failed_acquires: 0,
            bad_releases: 0,
        }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn phase(&self) -> LockPhase {
        self.phase
    }

    pub fn completed(&self) -> u32 {
        self.done
    }

    /// `(acquire observed, release issued)` per critical section.
    pub fn holds(&self) -> &[(u64, u64)] {
        &self.holds
    }

    pub fn failed_acquires(&self) -> u64 {
        self.failed_acquires
    }

    /// Releases whose reply was not this client's own id.
    pub fn bad_releases(&self) -> u32 {
        self.bad_releases
    }

    fn observe(&mut self, cycle: u64, data: u64) {
        self.phase = match self.phase {
            LockPhase::WaitAcquire if data == 0 => {
                self.acquired_at = Some(cycle);
                LockPhase::Load
            }
            LockPhase::WaitAcquire => {
                self.failed_acquires += 1;
                LockPhase::Backoff {
                    until: cycle + 1 + 2 * self.id,
                }
            }
            LockPhase::WaitLoad => {
                self.value = data;
                LockPhase::Store
            }
            LockPhase::WaitRelease => {
                if data != self.id {
                    self.bad_releases += 1;
                }
                self.done += 1;
                if self.done == self.iterations {
                    LockPhase::Done
                } else {
                    LockPhase::Acquire
                }
            }
            other => panic!("lock client {} got data in phase {other:?}", self.id),
        };
    }

    fn request(&self, my: Coordinate) -> Option<Packet> {
        let (lock_at, lock_addr) = self.lock;
        let (ctr_at, ctr_addr) = self.counter;
        match self.phase {
            LockPhase::Acquire => Some(Packet::swap(
                OpCode::RemoteSwapAq,
                my,
                lock_at,
                lock_addr,
                self.id,
                self.full_mask,
            )),
            LockPhase::Load => Some(Packet::load(my, ctr_at, ctr_addr)),
            LockPhase::Store => Some(Packet::store(
                my,
                ctr_at,
                ctr_addr,
                self.value + 1,
                self.full_mask,
            )),
            LockPhase::Release => Some(Packet::swap(
                OpCode::RemoteSwapRl,
                my,
                lock_at,
                lock_addr,
                0,
                self.full_mask,
            )),
            _ => None,
        }
    }
}

impl Node for LockClient {
    fn tick(&mut self, port: &CorePort) -> CoreDrive {
        if let Some(data) = port.returned {
            self.observe(port.cycle, data);
        }
        match self.phase {
            LockPhase::Backoff { until } if port.cycle >= until => self.phase = LockPhase::Acquire,
            LockPhase::Fence if port.fence_done() => self.phase = LockPhase::Release,
            _ => {}
        }
        if port.freeze {
            return CoreDrive::idle();
        }
        let Some(packet) = self.request(port.my) else {
            return CoreDrive::idle();
        };
        if port.out_ready {
            self.phase = match self.phase {
                LockPhase::Acquire => LockPhase::WaitAcquire,
                LockPhase::Load => LockPhase::WaitLoad,
                LockPhase::Store => LockPhase::Fence,
                LockPhase::Release => {
                    let acquired = self.acquired_at.take().expect("release without acquire");
                    self.holds.push((acquired, port.cycle));
                    LockPhase::WaitRelease
                }
                other => other,
            };
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
        self.phase == LockPhase::Done
    }

    fn as_any(&self) -> &dyn Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}
