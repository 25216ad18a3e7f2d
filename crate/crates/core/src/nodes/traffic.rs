use std::any::Any;
use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CoreDrive, CorePort, MemorySlave, Node, Outgoing};
use crate::error::ConfigError;
use crate::packet::{Packet, PacketFormat};
use crate::sim::{gen_destination, MeshDims, TrafficPattern};

/// Addresses used by generated traffic wrap at this many words.
const TRAFFIC_ADDR_WORDS: u64 = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficNodeConfig {
    pub pattern: TrafficPattern,
    pub dims: MeshDims,
    /// Bernoulli arrival probability per cycle.
    pub rate: f64,
    /// Fraction of generated requests that are loads; the rest are stores.
    pub load_fraction: f64,
    pub format: PacketFormat,
    pub seed: u64,
    /// Independent random stream per node.
    pub stream: u64,
}

/// Synthetic traffic source with an unbounded source queue, plus a memory
/// so that it can serve the traffic other nodes send it.
///
/// Arrivals are generated whether or not the network accepts them; each
/// request remembers its arrival cycle as its origin.
#[derive(Debug, Clone)]
pub struct TrafficNode {
    cfg: TrafficNodeConfig,
    rng: ChaCha8Rng,
    queue: VecDeque<Outgoing>,
    generating: bool,
    slave: MemorySlave,
    generated: u64,
    issued: u64,
}

impl TrafficNode {
    pub fn new(cfg: TrafficNodeConfig) -> Result<Self, ConfigError> {
        cfg.pattern.validate(cfg.dims)?;
        if !(cfg.rate > 0.0 && cfg.rate <= 1.0) {
            return Err(ConfigError::invalid(format!(
                "injection rate {} outside (0, 1]",
                cfg.rate
            )));
        }
        if !(0.0..=1.0).contains(&cfg.load_fraction) {
            return Err(ConfigError::invalid("load fraction outside [0, 1]"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(cfg.stream);
        Ok(TrafficNode {
            rng,
            queue: VecDeque::new(),
            generating: true,
            slave: MemorySlave::new(cfg.format.data_width),
            generated: 0,
            issued: 0,
            cfg,
        })
    }

    pub fn config(&self) -> &TrafficNodeConfig {
        &self.cfg
    }

    pub fn set_generating(&mut self, on: bool) {
        self.generating = on;
    }

    pub fn generated(&self) -> u64 {
        self.generated
    }

    pub fn issued(&self) -> u64 {
        self.issued
    }

    /// Origin cycle of the oldest request still in the source queue.
    pub fn oldest_queued(&self) -> Option<u64> {
        self.queue.front().map(|o| o.origin)
    }

    /// Queued requests created in `[from, to)`.
    pub fn queued_between(&self, from: u64, to: u64) -> u64 {
        self.queue
            .iter()
            .filter(|o| o.origin >= from && o.origin < to)
            .count() as u64
    }

    pub fn memory(&self) -> &MemorySlave {
        &self.slave
    }

    fn arrival(&mut self, port: &CorePort) {
        if !self.rng.random_bool(self.cfg.rate) {
            return;
        }
        let dest = gen_destination(self.cfg.pattern, port.my, self.cfg.dims, &mut self.rng)
            .expect("pattern validated at construction");
        let addr = (self.generated % TRAFFIC_ADDR_WORDS) as u32;
        let is_load = self.cfg.load_fraction > 0.0 && self.rng.random_bool(self.cfg.load_fraction);
        let packet = if is_load {
            Packet::load(port.my, dest, addr)
        } else {
            Packet::store(
                port.my,
                dest,
                addr,
                self.generated & self.cfg.format.data_mask(),
                self.cfg.format.full_mask(),
            )
        };
        self.generated += 1;
        self.queue.push_back(Outgoing {
            packet,
            origin: port.cycle,
        });
    }
}

impl Node for TrafficNode {
    fn tick(&mut self, port: &CorePort) -> CoreDrive {
        let mut drive = self.slave.tick(port);
        if self.generating {
            self.arrival(port);
        }
        if !port.freeze {
            drive.out = self.queue.front().copied();
            if drive.out.is_some() && port.out_ready {
                self.queue.pop_front();
                self.issued += 1;
            }
        }
        drive
    }

    fn is_idle(&self) -> bool {
        self.queue.is_empty() && self.slave.is_idle()
    }

    fn backlog(&self) -> usize {
        self.queue.len()
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
    use crate::packet::Coordinate;

    fn cfg(rate: f64) -> TrafficNodeConfig {
        TrafficNodeConfig {
            pattern: TrafficPattern::UniformRandom,
            dims: MeshDims::square(4),
            rate,
            load_fraction: 0.0,
            format: PacketFormat::default(),
            seed: 9,
            stream: 3,
        }
    }

    fn port(cycle: u64, out_ready: bool) -> CorePort {
        CorePort {
            cycle,
            my: Coordinate::new(1, 2),
            in_request: None,
            out_ready,
            returned: None,
            out_credits: 4,
            max_out_credits: 4,
            freeze: false,
            arb_priority: false,
            returned_packet: None,
            reverse_ready: false,
        }
    }

    #[test]
    fn queue_grows_when_blocked() {
        let mut n = TrafficNode::new(cfg(1.0)).unwrap();
        for c in 0..10 {
            n.tick(&port(c, false));
        }
        assert_eq!(n.backlog(), 10);
        assert_eq!(n.oldest_queued(), Some(0));
        let d = n.tick(&port(10, true));
        let out = d.out.unwrap();
        assert_eq!(out.origin, 0);
        assert_ne!(out.packet.dest, Coordinate::new(1, 2));
        assert_eq!(n.backlog(), 10);
    }

    #[test]
    fn rate_is_respected() {
        let mut n = TrafficNode::new(cfg(0.25)).unwrap();
        for c in 0..40_000 {
            n.tick(&port(c, true));
        }
        let r = n.generated() as f64 / 40_000.0;
        assert!((r - 0.25).abs() < 0.01, "rate {r}");
    }

    #[test]
    fn same_seed_same_stream() {
        let mut a = TrafficNode::new(cfg(0.5)).unwrap();
        let mut b = TrafficNode::new(cfg(0.5)).unwrap();
        for c in 0..200 {
            assert_eq!(a.tick(&port(c, true)), b.tick(&port(c, true)));
        }
    }

    #[test]
    fn rejects_bad_rates() {
        assert!(TrafficNode::new(cfg(0.0)).is_err());
        assert!(TrafficNode::new(cfg(1.5)).is_err());
    }
}
