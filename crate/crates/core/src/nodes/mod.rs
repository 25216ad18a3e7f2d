//! Models of cores attached to endpoints.
//!
//! A node sees one [`CorePort`] per cycle and answers with a [`CoreDrive`].
//! Everything a node learns about the network comes through that port, so
//! nodes never share state except through packets.

use std::any::Any;

pub use crate::endpoint::{CoreDrive, CorePort, InRequest, Outgoing};

mod lock;
mod master;
mod memory;
mod raw;
mod traffic;

pub use lock::{LockClient, LockPhase};
pub use master::{
    ReadCheck, ScriptStep, ScriptedMaster, SeqState, SequenceMaster, StreamingMaster,
};
pub use memory::{Commit, IoVirtualMeshNode, MemorySlave};
pub use raw::RawSlave;
pub use traffic::{TrafficNode, TrafficNodeConfig};

/// A core attached to an endpoint.
pub trait Node: Send + Any {
    fn tick(&mut self, port: &CorePort) -> CoreDrive;

    /// No work pending inside the node itself. Network state is checked
    /// separately.
    fn is_idle(&self) -> bool {
        true
    }

    /// Requests waiting at the source, for nodes that model a source queue.
    fn backlog(&self) -> usize {
        0
    }

    fn as_any(&self) -> &dyn Any;

    fn as_any_mut(&mut self) -> &mut dyn Any;
}

/// A node that never drives anything.
#[derive(Debug, Clone, Default)]
pub struct IdleNode;

impl Node for IdleNode {
    fn tick(&mut self, _port: &CorePort) -> CoreDrive {
        CoreDrive::idle()
    }

    fn as_any(&self) -> &dyn Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}

/// A master and a slave sharing one endpoint. The slave answers incoming
/// requests; the master owns the outgoing request channel.
pub struct Pair<M, S> {
    pub master: M,
    pub slave: S,
}

impl<M: Node, S: Node> Pair<M, S> {
    pub fn new(master: M, slave: S) -> Self {
        Pair { master, slave }
    }
}

impl<M: Node, S: Node> Node for Pair<M, S> {
    fn tick(&mut self, port: &CorePort) -> CoreDrive {
        let slave = self.slave.tick(port);
        let master = self.master.tick(port);
        slave.merge_master(master)
    }

    fn is_idle(&self) -> bool {
        self.master.is_idle() && self.slave.is_idle()
    }

    fn backlog(&self) -> usize {
        self.master.backlog()
    }

    fn as_any(&self) -> &dyn Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}

/// Replaces bytes of `old` selected by `mask` with those of `new`.
pub(crate) fn apply_mask(old: u64, new: u64, mask: u8) -> u64 {
    (0..8).fold(old, |acc, byte| {
        if mask & (1 << byte) == 0 {
            acc
        } else {
            let lane = 0xFFu64 << (8 * byte);
            (acc & !lane) | (new & lane)
        }
    })
}
