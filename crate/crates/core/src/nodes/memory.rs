use std::any::Any;
use std::collections::HashMap;

use super::{apply_mask, CoreDrive, CorePort, InRequest, Node};
use crate::packet::{Coordinate, OpCode};

/// One committed access, in commit order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Commit {
    pub cycle: u64,
    pub src: Coordinate,
    pub dest: Coordinate,
    pub addr: u32,
    pub op: OpCode,
    pub old: u64,
    pub new: u64,
}

/// Word-addressed memory that accepts a request every cycle and answers
/// loads and swaps one cycle after consuming them.
///
/// `swap_aq` writes its data only if the old word is zero; `swap_rl`
/// always writes. Both reply with the old word.
#[derive(Debug, Clone)]
pub struct MemorySlave {
    words: HashMap<u32, u64>,
    data_mask: u64,
    pending: Option<u64>,
    log: Option<Vec<Commit>>,
    served: u64,
}

impl MemorySlave {
    pub fn new(data_width: u32) -> Self {
        MemorySlave {
            words: HashMap::new(),
            data_mask: if data_width >= 64 {
                u64::MAX
            } else {
                (1 << data_width) - 1
            },
            pending: None,
            log: None,
            served: 0,
        }
    }

    /// Keeps a log of every commit.
    pub fn with_log(mut self) -> Self {
        self.log = Some(Vec::new());
        self
    }

    pub fn read(&self, addr: u32) -> u64 {
        self.words.get(&addr).copied().unwrap_or(0)
    }

    pub fn write(&mut self, addr: u32, value: u64) {
        self.words.insert(addr, value & self.data_mask);
    }

    pub fn commits(&self) -> &[Commit] {
        self.log.as_deref().unwrap_or(&[])
    }

    /// Requests consumed so far.
    pub fn served(&self) -> u64 {
        self.served
    }

    /// Applies one request; returns the reply data for loads and swaps.
    pub(crate) fn serve(&mut self, cycle: u64, req: &InRequest) -> Option<u64> {
        self.served += 1;
        let old = self.read(req.addr);
        let data = req.data & self.data_mask;
        let (new, reply) = match req.op {
            OpCode::RemoteLoad => (old, Some(old)),
            OpCode::RemoteStore => (apply_mask(old, data, req.mask), None),
            OpCode::RemoteSwapAq => (if old == 0 { data } else { old }, Some(old)),
            OpCode::RemoteSwapRl => (data, Some(old)),
        };
        if new != old {
            self.write(req.addr, new);
        }
        if let Some(log) = &mut self.log {
            log.push(Commit {
                cycle,
                src: req.src,
                dest: req.dest,
                addr: req.addr,
                op: req.op,
                old,
                new,
            });
        }
        reply
    }
}

impl Node for MemorySlave {
    fn tick(&mut self, port: &CorePort) -> CoreDrive {
        let mut drive = CoreDrive {
            returning: self.pending.take(),
            ..CoreDrive::idle()
        };
        if let Some(req) = port.in_request {
            drive.in_yumi = true;
            self.pending = self.serve(port.cycle, &req);
        }
        drive
    }

    fn is_idle(&self) -> bool {
        self.pending.is_none()
    }

    fn as_any(&self) -> &dyn Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}

/// A large IO device on the south edge that claims `span` coordinates
/// `(base.x, base.y + j)`, each backed by its own word store.
#[derive(Debug, Clone)]
pub struct IoVirtualMeshNode {
    base: Coordinate,
    banks: Vec<MemorySlave>,
    pending: Option<u64>,
}

impl IoVirtualMeshNode {
    pub fn new(base: Coordinate, span: u32, data_width: u32) -> Self {
        assert!(span >= 1, "IO span must be at least 1");
        IoVirtualMeshNode {
            base,
            banks: (0..span).map(|_| MemorySlave::new(data_width)).collect(),
            pending: None,
        }
    }

    pub fn base(&self) -> Coordinate {
        self.base
    }

    pub fn span(&self) -> u32 {
        self.banks.len() as u32
    }

    /// Coordinates this device answers for.
    pub fn claimed(&self) -> impl Iterator<Item = Coordinate> + '_ {
        (0..self.span()).map(|j| Coordinate::new(self.base.x, self.base.y + j))
    }

    pub fn bank(&self, coord: Coordinate) -> Option<&MemorySlave> {
        self.index(coord).map(|i| &self.banks[i])
    }

    fn index(&self, coord: Coordinate) -> Option<usize> {
        (coord.x == self.base.x && coord.y >= self.base.y)
            .then(|| (coord.y - self.base.y) as usize)
            .filter(|&i| i < self.banks.len())
    }
}

impl Node for IoVirtualMeshNode {
    fn tick(&mut self, port: &CorePort) -> CoreDrive {
        let mut drive = CoreDrive {
            returning: self.pending.take(),
            ..CoreDrive::idle()
        };
        if let Some(req) = port.in_request {
            let i = self
                .index(req.dest)
                .unwrap_or_else(|| panic!("IO at {} handed request for {}", self.base, req.dest));
            drive.in_yumi = true;
            self.pending = self.banks[i].serve(port.cycle, &req);
        }
        drive
    }

    fn is_idle(&self) -> bool {
        self.pending.is_none()
    }

    fn as_any(&self) -> &dyn Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(op: OpCode, addr: u32, data: u64) -> InRequest {
        InRequest {
            addr,
            data,
            mask: if op == OpCode::RemoteLoad { 0 } else { 0xF },
            we: op == OpCode::RemoteStore,
            op,
            src: Coordinate::new(0, 0),
            dest: Coordinate::new(1, 1),
        }
    }

    fn port(cycle: u64, r: Option<InRequest>) -> CorePort {
        CorePort {
            cycle,
            my: Coordinate::new(1, 1),
            in_request: r,
            out_ready: false,
            returned: None,
            out_credits: 0,
            max_out_credits: 0,
            freeze: false,
            arb_priority: false,
            returned_packet: None,
            reverse_ready: false,
        }
    }

    #[test]
    fn read_your_write() {
        let mut m = MemorySlave::new(32);
        assert_eq!(m.serve(0, &req(OpCode::RemoteStore, 5, 0xAB)), None);
        assert_eq!(m.serve(1, &req(OpCode::RemoteLoad, 5, 0)), Some(0xAB));
    }

    #[test]
    fn swap_semantics() {
        let mut m = MemorySlave::new(32);
        assert_eq!(m.serve(0, &req(OpCode::RemoteSwapAq, 0, 1)), Some(0));
        assert_eq!(m.read(0), 1);
        assert_eq!(m.serve(1, &req(OpCode::RemoteSwapAq, 0, 2)), Some(1));
        assert_eq!(m.read(0), 1);
        assert_eq!(m.serve(2, &req(OpCode::RemoteSwapRl, 0, 0)), Some(1));
        assert_eq!(m.read(0), 0);
    }

    #[test]
    fn response_one_cycle_after_consume() {
        let mut m = MemorySlave::new(32);
        m.write(3, 77);
        let d = m.tick(&port(10, Some(req(OpCode::RemoteLoad, 3, 0))));
        assert!(d.in_yumi);
        assert_eq!(d.returning, None);
        let d = m.tick(&port(11, None));
        assert!(!d.in_yumi);
        assert_eq!(d.returning, Some(77));
        assert!(m.is_idle());
    }

    #[test]
    fn store_respects_mask_and_width() {
        let mut m = MemorySlave::new(16);
        let mut r = req(OpCode::RemoteStore, 1, 0x1_2345);
        r.mask = 0b01;
        m.serve(0, &r);
        assert_eq!(m.read(1), 0x45);
    }

    #[test]
    fn commit_log() {
        let mut m = MemorySlave::new(32).with_log();
        m.serve(4, &req(OpCode::RemoteStore, 2, 9));
        assert_eq!(m.commits().len(), 1);
        assert_eq!(m.commits()[0].new, 9);
        assert_eq!(m.served(), 1);
    }

    #[test]
    fn io_banks_are_independent() {
        let mut io = IoVirtualMeshNode::new(Coordinate::new(2, 4), 3, 32);
        assert_eq!(
            io.claimed().collect::<Vec<_>>(),
            vec![
                Coordinate::new(2, 4),
                Coordinate::new(2, 5),
                Coordinate::new(2, 6)
            ]
        );
        let mut r = req(OpCode::RemoteStore, 0, 11);
        r.dest = Coordinate::new(2, 5);
        io.tick(&port(0, Some(r)));
        assert_eq!(io.bank(Coordinate::new(2, 5)).unwrap().read(0), 11);
        assert_eq!(io.bank(Coordinate::new(2, 4)).unwrap().read(0), 0);
        assert!(io.bank(Coordinate::new(2, 7)).is_none());
    }
}
