//! Endpoints bridge a core to the forward and reverse networks.
//!
//! The [`StandardEndpoint`] buffers incoming requests, masks them until a
//! reply can be absorbed, counts credits for outgoing requests, registers
//! returned data for the core and decodes the configuration registers. The
//! [`BarebonesEndpoint`] keeps only the input FIFO and packet decode; the
//! attached core is then responsible for protocol compliance.
//!
//! Each cycle the fabric asks the endpoint for a [`CorePort`] built from
//! pre-cycle state, hands it to the attached node, and feeds the node's
//! [`CoreDrive`] back through [`Endpoint::step`].

use std::collections::VecDeque;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::ProtocolViolation;
use crate::link::{handshake_fire, Fifo, HandshakeKind};
use crate::packet::{
    decode_local_address, ConfigReg, Coordinate, LocalAddress, OpCode, Packet, PacketFormat,
    ReturnKind, ReturnPacket,
};
use crate::router::Flit;

/// Replies the standard endpoint can hold on behalf of requests it has
/// already handed out: responses the core still owes plus replies waiting
/// for the reverse router.
pub const REPLY_SLOTS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EndpointConfig {
    /// Input FIFO depth.
    pub fifo_els: usize,
    pub max_out_credits: u32,
    pub warn_out_of_credits: bool,
    /// Freeze register after reset. `true` = frozen.
    pub freeze_init: bool,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            fifo_els: 4,
            max_out_credits: 32,
            warn_out_of_credits: false,
            freeze_init: false,
        }
    }
}

/// `ceil(round_trip_cycles * issue_rate)`: enough credits to cover the
/// bandwidth-delay product of the longest round trip. `None` for
/// non-positive inputs.
pub fn credits_recommended(round_trip_cycles: u32, issue_rate: f64) -> Option<u32> {
    if round_trip_cycles == 0 || issue_rate <= 0.0 || !issue_rate.is_finite() {
        return None;
    }
    Some((round_trip_cycles as f64 * issue_rate).ceil() as u32)
}

/// Incoming request as seen by the core.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InRequest {
    /// Word address.
    pub addr: u32,
    pub data: u64,
    pub mask: u8,
    /// Write enable; set for stores.
    pub we: bool,
    pub op: OpCode,
    pub src: Coordinate,
    /// The coordinate the request was addressed to.
    pub dest: Coordinate,
}

impl InRequest {
    fn from_packet(p: &Packet) -> Self {
        InRequest {
            addr: p.addr,
            data: p.data,
            mask: p.op_ex,
            we: p.op == OpCode::RemoteStore,
            op: p.op,
            src: p.src,
            dest: p.dest,
        }
    }

    /// The request as it travelled on the wire.
    pub fn to_packet(&self) -> Packet {
        Packet {
            addr: self.addr,
            op: self.op,
            op_ex: self.mask,
            data: self.data,
            src: self.src,
            dest: self.dest,
        }
    }
}

/// An outgoing request plus the cycle it was created at its source, which
/// may be earlier than the cycle it enters the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Outgoing {
    pub packet: Packet,
    pub origin: u64,
}

/// Signals presented to the core in one cycle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorePort {
    pub cycle: u64,
    pub my: Coordinate,
    /// `in_v` together with the request fields.
    pub in_request: Option<InRequest>,
    /// `ready` of the outgoing request channel.
    pub out_ready: bool,
    /// Registered returned data (`returned_v_r` / `returned_data_r`). The
    /// core must take it this cycle.
    pub returned: Option<u64>,
    pub out_credits: u32,
    pub max_out_credits: u32,
    pub freeze: bool,
    pub arb_priority: bool,
    /// Barebones only: any reverse packet delivered, credits included.
    pub returned_packet: Option<ReturnPacket>,
    /// Barebones only: whether a raw reply would be accepted.
    pub reverse_ready: bool,
}

impl CorePort {
    /// Fence condition: every outstanding request has been answered.
    pub fn fence_done(&self) -> bool {
        self.out_credits == self.max_out_credits
    }
}

/// Signals driven by the core in one cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CoreDrive {
    pub in_yumi: bool,
    /// `returning_v` / `returning_data`: response to an earlier load or swap.
    pub returning: Option<u64>,
    /// `out_v` / `out_packet`. Fires iff `out_ready` was high.
    pub out: Option<Outgoing>,
    /// Barebones only: a raw reverse packet. Fires iff `reverse_ready`.
    pub reply: Option<ReturnPacket>,
}

impl CoreDrive {
    pub fn idle() -> Self {
        CoreDrive::default()
    }

    /// Combines the slave half of `self` with the master half of `other`.
    pub fn merge_master(self, other: CoreDrive) -> CoreDrive {
        CoreDrive {
            out: other.out,
            ..self
        }
    }
}

/// A consumed forward request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Consumed {
    pub id: u64,
    pub packet: Packet,
    /// `false` when the endpoint answered a configuration access itself.
    pub by_core: bool,
}

/// What one endpoint step asks the fabric to commit.
#[derive(Debug, Clone, Default)]
pub struct EndpointEffects {
    pub consumed: Option<Consumed>,
    /// Request that fired into the forward network.
    pub fired: Option<Outgoing>,
    /// Reply written into the reverse network this cycle.
    pub reply: Option<Flit<ReturnPacket>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EndpointStats {
    pub consumed: u64,
    pub config_accesses: u64,
    pub credit_warnings: u64,
    pub masked_cycles: u64,
    pub max_reply_buffer: usize,
    pub sent: u64,
    pub returns: u64,
}

#[derive(Debug, Clone, Copy)]
struct Owed {
    id: u64,
    requester: Coordinate,
    consumed_at: u64,
}

/// Full-featured endpoint.
#[derive(Debug, Clone)]
pub struct StandardEndpoint {
    cfg: EndpointConfig,
    format: PacketFormat,
    my: Coordinate,
    in_fifo: Fifo<Flit<Packet>>,
    credits: u32,
    freeze: bool,
    arb_priority: bool,
    returned_slot: Option<u64>,
    returned_next: Option<u64>,
    owed: VecDeque<Owed>,
    reply_buf: VecDeque<Flit<ReturnPacket>>,
    pub stats: EndpointStats,
}

impl StandardEndpoint {
    pub fn new(cfg: EndpointConfig, format: PacketFormat, my: Coordinate) -> Self {
        assert!(cfg.max_out_credits >= 1, "max_out_credits must be >= 1");
        StandardEndpoint {
            in_fifo: Fifo::new(cfg.fifo_els),
            credits: cfg.max_out_credits,
            freeze: cfg.freeze_init,
            arb_priority: false,
            returned_slot: None,
            returned_next: None,
            owed: VecDeque::new(),
            reply_buf: VecDeque::new(),
            stats: EndpointStats::default(),
            cfg,
            format,
            my,
        }
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.cfg
    }

    pub fn credits(&self) -> u32 {
        self.credits
    }

    pub fn freeze(&self) -> bool {
        self.freeze
    }

    pub fn arb_priority(&self) -> bool {
        self.arb_priority
    }

    pub fn fence_done(&self) -> bool {
        self.credits == self.cfg.max_out_credits
    }

    fn reply_capacity(&self) -> bool {
        self.owed.len() + self.reply_buf.len() < REPLY_SLOTS
    }

    fn head_is_config(&self, now: u64) -> Option<bool> {
        self.in_fifo.peek(now).map(|f| {
            matches!(
                decode_local_address(f.payload.addr, self.format.addr_width),
                LocalAddress::ConfigReg(_)
            )
        })
    }

    fn present(&self, now: u64, fwd_ready: bool) -> CorePort {
        let in_request = match self.head_is_config(now) {
            Some(false) if self.reply_capacity() => self
                .in_fifo
                .peek(now)
                .map(|f| InRequest::from_packet(&f.payload)),
            _ => None,
        };
        CorePort {
            cycle: now,
            my: self.my,
            in_request,
            out_ready: self.credits > 0 && fwd_ready,
            returned: self.returned_slot,
            out_credits: self.credits,
            max_out_credits: self.cfg.max_out_credits,
            freeze: self.freeze,
            arb_priority: self.arb_priority,
            returned_packet: None,
            reverse_ready: false,
        }
    }

    fn apply_config(&mut self, p: &Packet) -> u64 {
        let LocalAddress::ConfigReg(reg) = decode_local_address(p.addr, self.format.addr_width)
        else {
            unreachable!("data-space access handled by the core")
        };
        self.stats.config_accesses += 1;
        let current = match reg {
            ConfigReg::Freeze => self.freeze as u64,
            ConfigReg::ArbiterPriority => self.arb_priority as u64,
            ConfigReg::Reserved(_) => 0,
        };
        if p.op == OpCode::RemoteStore {
            match reg {
                ConfigReg::Freeze => self.freeze = p.data & 1 == 1,
                ConfigReg::ArbiterPriority => self.arb_priority = !self.arb_priority,
                ConfigReg::Reserved(_) => {}
            }
        }
        current
    }

    fn step(
        &mut self,
        now: u64,
        port: &CorePort,
        drive: CoreDrive,
        rev_ready: bool,
    ) -> Result<EndpointEffects, ProtocolViolation> {
        let mut fx = EndpointEffects::default();
        let mut new_replies: Vec<Flit<ReturnPacket>> = Vec::with_capacity(2);

        // in_request: consumed either by the core (valid/yumi) or, for
        // configuration accesses, by the endpoint itself.
        if handshake_fire(
            HandshakeKind::ValidYumi,
            port.in_request.is_some(),
            drive.in_yumi,
        )? {
            let flit = self.in_fifo.pop(now);
            let p = flit.payload;
            if p.op.returns_data() {
                self.owed.push_back(Owed {
                    id: flit.id,
                    requester: p.src,
                    consumed_at: now,
                });
            } else {
                new_replies.push(reply_flit(ReturnPacket::credit(p.src), flit.id));
            }
            fx.consumed = Some(Consumed {
                id: flit.id,
                packet: p,
                by_core: true,
            });
        } else if self.head_is_config(now) == Some(true) && self.reply_capacity() {
            let flit = self.in_fifo.pop(now);
            let value = self.apply_config(&flit.payload);
            new_replies.push(reply_flit(
                ReturnPacket::for_request(&flit.payload, value),
                flit.id,
            ));
            fx.consumed = Some(Consumed {
                id: flit.id,
                packet: flit.payload,
                by_core: false,
            });
        } else if self.in_fifo.peek(now).is_some() {
            self.stats.masked_cycles += 1;
        }
        if fx.consumed.is_some() {
            self.stats.consumed += 1;
        }

        // in_response.
        if let Some(data) = drive.returning {
            let owed = *self
                .owed
                .front()
                .ok_or(ProtocolViolation::UnexpectedResponse)?;
            if owed.consumed_at >= now {
                return Err(ProtocolViolation::ResponseTooEarly {
                    consumed_at: owed.consumed_at,
                    at: now,
                });
            }
            self.owed.pop_front();
            new_replies.push(reply_flit(
                ReturnPacket::data(owed.requester, data & self.format.data_mask()),
                owed.id,
            ));
        }

        // Reverse injection: buffered replies first, one per cycle.
        self.reply_buf.extend(new_replies);
        if rev_ready {
            fx.reply = self.reply_buf.pop_front();
        }
        self.stats.max_reply_buffer = self.stats.max_reply_buffer.max(self.reply_buf.len());
        debug_assert!(self.reply_buf.len() <= REPLY_SLOTS);

        // out_request.
        if let Some(out) = drive.out {
            self.check_outgoing(&out.packet)?;
            if self.credits == 0 {
                self.stats.credit_warnings += 1;
                if self.cfg.warn_out_of_credits {
                    warn!("endpoint {} out of credits in cycle {now}", self.my);
                }
            }
            if handshake_fire(HandshakeKind::ValidReady, true, port.out_ready)? {
                self.credits -= 1;
                self.stats.sent += 1;
                fx.fired = Some(out);
            }
        }
        Ok(fx)
    }

    fn check_outgoing(&self, p: &Packet) -> Result<(), ProtocolViolation> {
        p.check_op_fields()
            .map_err(ProtocolViolation::MalformedPacket)?;
        self.format
            .check_fits(p)
            .map_err(|e| ProtocolViolation::MalformedPacket(e.to_string()))
    }

    fn receive_return(&mut self, rp: &ReturnPacket) -> Result<(), ProtocolViolation> {
        if self.credits >= self.cfg.max_out_credits {
            return Err(ProtocolViolation::CreditOverflow {
                max: self.cfg.max_out_credits,
            });
        }
        self.credits += 1;
        self.stats.returns += 1;
        if rp.kind == ReturnKind::Data {
            debug_assert!(self.returned_next.is_none());
            self.returned_next = Some(rp.data);
        }
        Ok(())
    }

    /// Requests the core has consumed but not yet answered, plus replies
    /// not yet handed to the reverse router.
    pub fn pending_replies(&self) -> usize {
        self.owed.len() + self.reply_buf.len()
    }
}

fn reply_flit(payload: ReturnPacket, id: u64) -> Flit<ReturnPacket> {
    Flit {
        payload,
        id,
        routers: 0,
    }
}

/// Minimal endpoint: input FIFO and decode only. No credits, no masking,
/// no configuration registers.
#[derive(Debug, Clone)]
pub struct BarebonesEndpoint {
    format: PacketFormat,
    my: Coordinate,
    in_fifo: Fifo<Flit<Packet>>,
    returned_slot: Option<ReturnPacket>,
    returned_next: Option<ReturnPacket>,
    pub stats: EndpointStats,
}

impl BarebonesEndpoint {
    pub fn new(fifo_els: usize, format: PacketFormat, my: Coordinate) -> Self {
        BarebonesEndpoint {
            format,
            my,
            in_fifo: Fifo::new(fifo_els),
            returned_slot: None,
            returned_next: None,
            stats: EndpointStats::default(),
        }
    }

    fn present(&self, now: u64, fwd_ready: bool, rev_ready: bool) -> CorePort {
        CorePort {
            cycle: now,
            my: self.my,
            in_request: self
                .in_fifo
                .peek(now)
                .map(|f| InRequest::from_packet(&f.payload)),
            out_ready: fwd_ready,
            returned: self
                .returned_slot
                .filter(|r| r.kind == ReturnKind::Data)
                .map(|r| r.data),
            out_credits: 0,
            max_out_credits: 0,
            freeze: false,
            arb_priority: false,
            returned_packet: self.returned_slot,
            reverse_ready: rev_ready,
        }
    }

    fn step(
        &mut self,
        now: u64,
        port: &CorePort,
        drive: CoreDrive,
        consumed_ids: &mut VecDeque<u64>,
    ) -> Result<EndpointEffects, ProtocolViolation> {
        let mut fx = EndpointEffects::default();
        if handshake_fire(
            HandshakeKind::ValidYumi,
            port.in_request.is_some(),
            drive.in_yumi,
        )? {
            let flit = self.in_fifo.pop(now);
            self.stats.consumed += 1;
            consumed_ids.push_back(flit.id);
            fx.consumed = Some(Consumed {
                id: flit.id,
                packet: flit.payload,
                by_core: true,
            });
        }
        if let Some(reply) = drive.reply {
            if handshake_fire(HandshakeKind::ValidReady, true, port.reverse_ready)? {
                // Replies are matched to consumed requests in order; an
                // unmatched reply gets id u64::MAX and the checker flags it.
                let id = consumed_ids.pop_front().unwrap_or(u64::MAX);
                fx.reply = Some(reply_flit(reply, id));
            }
        }
        if let Some(out) = drive.out {
            self.format
                .check_fits(&out.packet)
                .map_err(|e| ProtocolViolation::MalformedPacket(e.to_string()))?;
            if handshake_fire(HandshakeKind::ValidReady, true, port.out_ready)? {
                self.stats.sent += 1;
                fx.fired = Some(out);
            }
        }
        Ok(fx)
    }
}

/// Either endpoint flavor.
#[derive(Debug, Clone)]
pub enum Endpoint {
    Standard(StandardEndpoint),
    Barebones(BarebonesEndpoint, VecDeque<u64>),
}

/// Which endpoint to build for an attached node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EndpointKind {
    Standard(EndpointConfig),
    Barebones { fifo_els: usize },
}

impl Default for EndpointKind {
    fn default() -> Self {
        EndpointKind::Standard(EndpointConfig::default())
    }
}

impl Endpoint {
    pub fn new(kind: EndpointKind, format: PacketFormat, my: Coordinate) -> Self {
        match kind {
            EndpointKind::Standard(cfg) => {
                Endpoint::Standard(StandardEndpoint::new(cfg, format, my))
            }
            EndpointKind::Barebones { fifo_els } => Endpoint::Barebones(
                BarebonesEndpoint::new(fifo_els, format, my),
                VecDeque::new(),
            ),
        }
    }

    pub fn as_standard(&self) -> Option<&StandardEndpoint> {
        match self {
            Endpoint::Standard(ep) => Some(ep),
            Endpoint::Barebones(..) => None,
        }
    }

    pub fn stats(&self) -> &EndpointStats {
        match self {
            Endpoint::Standard(ep) => &ep.stats,
            Endpoint::Barebones(ep, _) => &ep.stats,
        }
    }

    fn in_fifo(&self) -> &Fifo<Flit<Packet>> {
        match self {
            Endpoint::Standard(ep) => &ep.in_fifo,
            Endpoint::Barebones(ep, _) => &ep.in_fifo,
        }
    }

    /// `ready` toward the forward router.
    pub fn in_ready(&self) -> bool {
        self.in_fifo().can_accept()
    }

    pub fn buffered_requests(&self) -> usize {
        self.in_fifo().len()
    }

    /// Pre-cycle view for the core. `fwd_ready` / `rev_ready` are the
    /// readiness of the router input FIFOs this endpoint writes into.
    pub fn present(&self, now: u64, fwd_ready: bool, rev_ready: bool) -> CorePort {
        match self {
            Endpoint::Standard(ep) => ep.present(now, fwd_ready),
            Endpoint::Barebones(ep, _) => ep.present(now, fwd_ready, rev_ready),
        }
    }

    pub fn step(
        &mut self,
        now: u64,
        port: &CorePort,
        drive: CoreDrive,
        rev_ready: bool,
    ) -> Result<EndpointEffects, ProtocolViolation> {
        match self {
            Endpoint::Standard(ep) => ep.step(now, port, drive, rev_ready),
            Endpoint::Barebones(ep, ids) => ep.step(now, port, drive, ids),
        }
    }

    /// Forward delivery from the router (valid/ready).
    pub fn accept_forward(&mut self, flit: Flit<Packet>, now: u64) {
        match self {
            Endpoint::Standard(ep) => ep.in_fifo.push(flit, now),
            Endpoint::Barebones(ep, _) => ep.in_fifo.push(flit, now),
        }
    }

    /// Final reverse delivery. Never backpressured.
    pub fn receive_return(&mut self, rp: &ReturnPacket) -> Result<(), ProtocolViolation> {
        match self {
            Endpoint::Standard(ep) => ep.receive_return(rp),
            Endpoint::Barebones(ep, _) => {
                ep.stats.returns += 1;
                ep.returned_next = Some(*rp);
                Ok(())
            }
        }
    }

    /// Clock edge for the registered returned-data slot.
    pub fn end_cycle(&mut self) {
        match self {
            Endpoint::Standard(ep) => ep.returned_slot = ep.returned_next.take(),
            Endpoint::Barebones(ep, _) => ep.returned_slot = ep.returned_next.take(),
        }
    }

    /// Nothing buffered and nothing owed.
    pub fn is_idle(&self) -> bool {
        match self {
            Endpoint::Standard(ep) => {
                ep.in_fifo.is_empty()
                    && ep.owed.is_empty()
                    && ep.reply_buf.is_empty()
                    && ep.fence_done()
                    && ep.returned_next.is_none()
                    && ep.returned_slot.is_none()
            }
            Endpoint::Barebones(ep, _) => {
                ep.in_fifo.is_empty() && ep.returned_next.is_none() && ep.returned_slot.is_none()
            }
        }
    }
}
