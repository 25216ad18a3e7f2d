//! Link protocol primitives: registered FIFOs, handshake disciplines and the
//! forward/reverse channel pair.

use std::collections::VecDeque;

use crate::error::ProtocolViolation;

/// Latency-insensitive handshake used on a channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HandshakeKind {
    /// Transfer when valid and ready are both high in the same cycle.
    ValidReady,
    /// The receiver raises yumi only while it sees valid; yumi alone
    /// completes the transfer.
    ValidYumi,
    /// No backpressure. A presented datum is always consumed.
    ValidOnly,
}

/// Whether a transfer happens this cycle.
///
/// `ready_or_yumi` is ignored for [`HandshakeKind::ValidOnly`].
pub fn handshake_fire(
    kind: HandshakeKind,
    valid: bool,
    ready_or_yumi: bool,
) -> Result<bool, ProtocolViolation> {
    match kind {
        HandshakeKind::ValidReady => Ok(valid && ready_or_yumi),
        HandshakeKind::ValidYumi => {
            if ready_or_yumi && !valid {
                Err(ProtocolViolation::YumiWithoutValid)
            } else {
                Ok(ready_or_yumi)
            }
        }
        HandshakeKind::ValidOnly => Ok(valid),
    }
}

/// Bounded FIFO with one cycle of traversal latency.
///
/// Every element remembers the cycle it was written in and only becomes
/// visible at the head in a strictly later cycle. Enqueue on a full FIFO or
/// dequeue without a visible head panics: both are protocol violations the
/// caller must prevent by honoring `ready`.
#[derive(Debug, Clone)]
pub struct Fifo<T> {
    depth: usize,
    slots: VecDeque<(T, u64)>,
}

impl<T> Fifo<T> {
    pub fn new(depth: usize) -> Self {
        assert!(depth >= 1, "FIFO depth must be at least 1");
        Fifo {
            depth,
            slots: VecDeque::with_capacity(depth),
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.slots.len() == self.depth
    }

    /// `ready` of the write side.
    pub fn can_accept(&self) -> bool {
        !self.is_full()
    }

    pub fn free(&self) -> usize {
        self.depth - self.slots.len()
    }

    pub fn push(&mut self, elem: T, now: u64) {
        assert!(
            !self.is_full(),
            "enqueue on full FIFO (depth {}) in cycle {now}",
            self.depth
        );
        self.slots.push_back((elem, now));
    }

    /// The head element, if it was written before cycle `now`.
    pub fn peek(&self, now: u64) -> Option<&T> {
        match self.slots.front() {
            Some((elem, written)) if *written < now => Some(elem),
            _ => None,
        }
    }

    pub fn peek_mut(&mut self, now: u64) -> Option<&mut T> {
        match self.slots.front_mut() {
            Some((elem, written)) if *written < now => Some(elem),
            _ => None,
        }
    }

    pub fn pop(&mut self, now: u64) -> T {
        match self.slots.front() {
            Some((_, written)) if *written < now => self.slots.pop_front().unwrap().0,
            Some(_) => panic!("dequeue in cycle {now} of an element written this cycle"),
            None => panic!("dequeue of empty FIFO in cycle {now}"),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.slots.iter().map(|(e, _)| e)
    }
}

/// Traffic counters for one direction of a link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Channel {
    pub handshake: Option<HandshakeKind>,
    pub transfers: u64,
}

impl Channel {
    fn with_kind(kind: HandshakeKind) -> Self {
        Channel {
            handshake: Some(kind),
            transfers: 0,
        }
    }
}

/// A forward channel and a reverse channel sharing the same wires between
/// two neighbors. The two are independent: neither handshake looks at the
/// other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LinkSif {
    pub fwd: Channel,
    pub rev: Channel,
}

impl LinkSif {
    /// Router-to-router link.
    pub fn between_routers() -> Self {
        LinkSif {
            fwd: Channel::with_kind(HandshakeKind::ValidReady),
            rev: Channel::with_kind(HandshakeKind::ValidReady),
        }
    }

    /// Router-to-endpoint link: requests are backpressured, final reverse
    /// deliveries never are.
    pub fn to_endpoint() -> Self {
        LinkSif {
            fwd: Channel::with_kind(HandshakeKind::ValidReady),
            rev: Channel::with_kind(HandshakeKind::ValidOnly),
        }
    }

    /// Unconnected side of a router.
    pub fn tieoff() -> Self {
        LinkSif::default()
    }

    pub fn is_tied(&self) -> bool {
        self.fwd.handshake.is_none() && self.rev.handshake.is_none()
    }
}
