//! Fabric assembly and the two-phase tick.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::endpoint::{Endpoint, EndpointConfig, EndpointEffects, EndpointKind};
use crate::error::{ConfigError, ProtocolViolation, SimError};
use crate::nodes::Node;
use crate::packet::{Coordinate, OpCode, Packet, PacketFormat, ReturnPacket};
use crate::router::{
    Direction, Downstream, Flit, Grant, Routable, Router, RouterConfig, RouterStats, StubMask,
};
use crate::sim::MeshDims;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FabricConfig {
    pub cols: u32,
    pub rows: u32,
    pub router_fifo_depth: usize,
    pub endpoint: EndpointConfig,
    pub addr_width: u32,
    pub data_width: u32,
    pub seed: u64,
}

impl Default for FabricConfig {
    fn default() -> Self {
        FabricConfig {
            cols: 8,
            rows: 8,
            router_fifo_depth: 2,
            endpoint: EndpointConfig::default(),
            addr_width: 20,
            data_width: 32,
            seed: 1,
        }
    }
}

impl FabricConfig {
    pub fn mesh(cols: u32, rows: u32) -> Self {
        FabricConfig {
            cols,
            rows,
            ..FabricConfig::default()
        }
    }

    pub fn dims(&self) -> MeshDims {
        MeshDims::new(self.cols, self.rows)
    }
}

/// Which of the two physical networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Network {
    Forward,
    Reverse,
}

impl fmt::Display for Network {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Network::Forward => "fwd",
            Network::Reverse => "rev",
        })
    }
}

/// Lifetime of one request and its reply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketRecord {
    pub id: u64,
    pub src: Coordinate,
    pub dest: Coordinate,
    pub op: OpCode,
    /// Cycle the request was created at its source.
    pub origin: u64,
    /// Cycle it fired into the forward network.
    pub entry: u64,
    /// Cycle it was consumed at the destination.
    pub delivery: Option<u64>,
    pub reply_injected: Option<u64>,
    /// Cycle the reply reached the requester's endpoint.
    pub reply_delivered: Option<u64>,
    /// Router input FIFOs crossed on the forward path.
    pub routers: u32,
    pub reply_routers: u32,
}

impl PacketRecord {
    /// Source-queue arrival to consumption.
    pub fn latency(&self) -> Option<u64> {
        self.delivery.map(|d| d - self.origin)
    }

    /// Network entry to consumption.
    pub fn network_latency(&self) -> Option<u64> {
        self.delivery.map(|d| d - self.entry)
    }
}

/// Something the reply checker noticed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReplyFinding {
    /// A consumed request that has not been answered.
    Missing {
        id: u64,
        at: Coordinate,
        consumed: u64,
    },
    /// A reply with no consumed request to match.
    Unsolicited { at: Coordinate, cycle: u64 },
}

impl fmt::Display for ReplyFinding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReplyFinding::Missing { id, at, consumed } => write!(
                f,
                "request {id} consumed at {at} in cycle {consumed} was never answered"
            ),
            ReplyFinding::Unsolicited { at, cycle } => {
                write!(f, "unsolicited reply from {at} in cycle {cycle}")
            }
        }
    }
}

/// Traffic through one router output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkUse {
    pub network: Network,
    pub router: Coordinate,
    pub dir: Direction,
    pub transfers: u64,
    pub utilization: f64,
}

enum Site {
    Tile(Coordinate),
    Io { base: Coordinate, span: u32 },
}

struct Placement {
    site: Site,
    kind: EndpointKind,
    node: Box<dyn Node>,
}

/// Collects node placements and validates them into a [`Fabric`].
pub struct FabricBuilder {
    cfg: FabricConfig,
    placements: Vec<Placement>,
}

impl FabricBuilder {
    pub fn new(cfg: FabricConfig) -> Self {
        FabricBuilder {
            cfg,
            placements: Vec::new(),
        }
    }

    /// Attaches `node` to the P port of the tile at `at` behind a standard
    /// endpoint built from the fabric configuration.
    pub fn node(self, at: Coordinate, node: impl Node) -> Self {
        let kind = EndpointKind::Standard(self.cfg.endpoint);
        self.node_boxed(at, kind, Box::new(node))
    }

    pub fn node_with(self, at: Coordinate, kind: EndpointKind, node: impl Node) -> Self {
        self.node_boxed(at, kind, Box::new(node))
    }

    pub fn node_boxed(mut self, at: Coordinate, kind: EndpointKind, node: Box<dyn Node>) -> Self {
        self.placements.push(Placement {
            site: Site::Tile(at),
            kind,
            node,
        });
        self
    }

    /// Attaches an IO device below the south edge. It answers for
    /// `(base.x, base.y .. base.y + span)`; `base.y` must equal the row
    /// count.
    pub fn io(self, base: Coordinate, span: u32, node: impl Node) -> Self {
        let kind = EndpointKind::Standard(self.cfg.endpoint);
        self.io_boxed(base, span, kind, Box::new(node))
    }

    pub fn io_boxed(
        mut self,
        base: Coordinate,
        span: u32,
        kind: EndpointKind,
        node: Box<dyn Node>,
    ) -> Self {
        self.placements.push(Placement {
            site: Site::Io { base, span },
            kind,
            node,
        });
        self
    }

    pub fn build(self) -> Result<Fabric, ConfigError> {
        let cfg = self.cfg;
        if cfg.cols == 0 || cfg.rows == 0 {
            return Err(ConfigError::invalid("mesh dimensions must be non-zero"));
        }
        if cfg.router_fifo_depth == 0 {
            return Err(ConfigError::invalid("router FIFO depth must be at least 1"));
        }
        let dims = cfg.dims();

        let mut max_y = cfg.rows - 1;
        for p in &self.placements {
            match p.site {
                Site::Tile(c) if !dims.contains(c) => {
                    return Err(ConfigError::invalid(format!(
                        "tile {c} outside the {}x{} mesh",
                        cfg.cols, cfg.rows
                    )))
                }
                Site::Io { base, span } => {
                    if base.y != cfg.rows || base.x >= cfg.cols {
                        return Err(ConfigError::invalid(format!(
                            "IO at {base}: IO can only attach on the south boundary (y = {})",
                            cfg.rows
                        )));
                    }
                    if span == 0 {
                        return Err(ConfigError::invalid("IO span must be at least 1"));
                    }
                    max_y = max_y.max(base.y + span - 1);
                }
                _ => {}
            }
            match p.kind {
                EndpointKind::Standard(ep) if ep.fifo_els == 0 || ep.max_out_credits == 0 => {
                    return Err(ConfigError::invalid(
                        "endpoint FIFO depth and max_out_credits must be at least 1",
                    ))
                }
                EndpointKind::Barebones { fifo_els: 0 } => {
                    return Err(ConfigError::invalid(
                        "endpoint FIFO depth must be at least 1",
                    ))
                }
                _ => {}
            }
        }
        let format = PacketFormat::for_mesh(cfg.cols, max_y + 1, cfg.addr_width, cfg.data_width)?;

        let n = dims.nodes() as usize;
        let mut port_attach = vec![[None; 5]; n];
        let mut owner = HashMap::new();
        let mut attachments = Vec::with_capacity(self.placements.len());
        for (idx, p) in self.placements.into_iter().enumerate() {
            let (coords, router, port) = match p.site {
                Site::Tile(c) => (vec![c], dims.index(c), Direction::P),
                Site::Io { base, span } => (
                    (0..span)
                        .map(|j| Coordinate::new(base.x, base.y + j))
                        .collect(),
                    dims.index(Coordinate::new(base.x, cfg.rows - 1)),
                    Direction::S,
                ),
            };
            for &c in &coords {
                if owner.insert(c, idx).is_some() {
                    return Err(ConfigError::invalid(format!(
                        "coordinate {c} claimed twice"
                    )));
                }
            }
            if port_attach[router][port.index()].replace(idx).is_some() {
                return Err(ConfigError::invalid(format!(
                    "two attachments on the {port:?} port of router {}",
                    coords[0]
                )));
            }
            let endpoint = Endpoint::new(p.kind, format, coords[0]);
            attachments.push(Attachment {
                coords,
                router,
                port,
                endpoint,
                node: p.node,
                outstanding: 0,
                obligations: Vec::new(),
            });
        }

        let mut fwd = Vec::with_capacity(n);
        let mut rev = Vec::with_capacity(n);
        for my in dims.coords() {
            let mut stub = StubMask::NONE;
            if my.x == 0 {
                stub = stub.with(Direction::W);
            }
            if my.x + 1 == cfg.cols {
                stub = stub.with(Direction::E);
            }
            if my.y == 0 {
                stub = stub.with(Direction::N);
            }
            if my.y + 1 == cfg.rows && port_attach[dims.index(my)][Direction::S.index()].is_none() {
                stub = stub.with(Direction::S);
            }
            let rc = RouterConfig {
                my,
                stub,
                fifo_depth: cfg.router_fifo_depth,
            };
            fwd.push(Router::new(rc));
            rev.push(Router::new(rc));
        }

        Ok(Fabric {
            cfg,
            dims,
            format,
            fwd,
            rev,
            attachments,
            owner,
            port_attach,
            cycle: 0,
            records: Vec::new(),
            unsolicited: Vec::new(),
            trace: None,
            grants: Vec::new(),
            effects: Vec::new(),
        })
    }
}

struct Attachment {
    coords: Vec<Coordinate>,
    router: usize,
    port: Direction,
    endpoint: Endpoint,
    node: Box<dyn Node>,
    /// Requests fired and not yet answered, counted independently of the
    /// endpoint's credit counter.
    outstanding: u32,
    /// Consumed requests still owed a reply, as `(id, consume cycle)`.
    obligations: Vec<(u64, u64)>,
}

/// A built mesh: two routers per tile, endpoints and their nodes.
pub struct Fabric {
    cfg: FabricConfig,
    dims: MeshDims,
    format: PacketFormat,
    fwd: Vec<Router<Packet>>,
    rev: Vec<Router<ReturnPacket>>,
    attachments: Vec<Attachment>,
    owner: HashMap<Coordinate, usize>,
    port_attach: Vec<[Option<usize>; 5]>,
    cycle: u64,
    records: Vec<PacketRecord>,
    unsolicited: Vec<ReplyFinding>,
    trace: Option<Vec<String>>,
    grants: Vec<(Network, usize, Grant)>,
    effects: Vec<EndpointEffects>,
}

impl fmt::Debug for Fabric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Fabric")
            .field("dims", &self.dims)
            .field("attachments", &self.attachments.len())
            .field("cycle", &self.cycle)
            .finish()
    }
}

impl Fabric {
    pub fn builder(cfg: FabricConfig) -> FabricBuilder {
        FabricBuilder::new(cfg)
    }

    pub fn config(&self) -> &FabricConfig {
        &self.cfg
    }

    pub fn dims(&self) -> MeshDims {
        self.dims
    }

    pub fn format(&self) -> PacketFormat {
        self.format
    }

    /// The next cycle to be simulated.
    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    /// Starts recording a human-readable event trace.
    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    pub fn trace(&self) -> &[String] {
        self.trace.as_deref().unwrap_or(&[])
    }

    pub fn records(&self) -> &[PacketRecord] {
        &self.records
    }

    pub fn attached(&self) -> impl Iterator<Item = Coordinate> + '_ {
        self.attachments.iter().map(|a| a.coords[0])
    }

    pub fn node<T: Node>(&self, at: Coordinate) -> Option<&T> {
        let a = &self.attachments[*self.owner.get(&at)?];
        a.node.as_any().downcast_ref()
    }

    pub fn node_mut<T: Node>(&mut self, at: Coordinate) -> Option<&mut T> {
        let idx = *self.owner.get(&at)?;
        self.attachments[idx].node.as_any_mut().downcast_mut()
    }

    /// Applies `f` to every attached node of type `T`.
    pub fn for_each_node<T: Node>(&mut self, mut f: impl FnMut(&mut T)) {
        for a in &mut self.attachments {
            if let Some(n) = a.node.as_any_mut().downcast_mut() {
                f(n);
            }
        }
    }

    pub fn nodes<T: Node>(&self) -> impl Iterator<Item = (Coordinate, &T)> + '_ {
        self.attachments
            .iter()
            .filter_map(|a| a.node.as_any().downcast_ref().map(|n| (a.coords[0], n)))
    }

    pub fn endpoint(&self, at: Coordinate) -> Option<&Endpoint> {
        self.owner.get(&at).map(|&i| &self.attachments[i].endpoint)
    }

    /// Requests fired by the node at `at` and not yet answered.
    pub fn outstanding(&self, at: Coordinate) -> Option<u32> {
        self.owner
            .get(&at)
            .map(|&i| self.attachments[i].outstanding)
    }

    pub fn router(&self, network: Network, at: Coordinate) -> Option<&RouterStats> {
        if !self.dims.contains(at) {
            return None;
        }
        let i = self.dims.index(at);
        Some(match network {
            Network::Forward => &self.fwd[i].stats,
            Network::Reverse => &self.rev[i].stats,
        })
    }

    pub fn stub_mask(&self, at: Coordinate) -> Option<StubMask> {
        self.dims
            .contains(at)
            .then(|| self.fwd[self.dims.index(at)].config().stub)
    }

    /// `turns[in][out]` summed over all routers of one network.
    pub fn turn_histogram(&self, network: Network) -> [[u64; 5]; 5] {
        let mut h = [[0u64; 5]; 5];
        let mut add = |s: &RouterStats| {
            for (row, src) in h.iter_mut().zip(s.turns.iter()) {
                for (a, b) in row.iter_mut().zip(src.iter()) {
                    *a += b;
                }
            }
        };
        match network {
            Network::Forward => self.fwd.iter().for_each(|r| add(&r.stats)),
            Network::Reverse => self.rev.iter().for_each(|r| add(&r.stats)),
        }
        h
    }

    /// Cycles in which some head was held back by a full downstream FIFO,
    /// summed over routers and outputs of one network.
    pub fn backpressure_events(&self, network: Network) -> u64 {
        let sum = |s: &RouterStats| s.backpressure.iter().sum::<u64>();
        match network {
            Network::Forward => self.fwd.iter().map(|r| sum(&r.stats)).sum(),
            Network::Reverse => self.rev.iter().map(|r| sum(&r.stats)).sum(),
        }
    }

    /// Per-output transfer counts, normalized by elapsed cycles.
    pub fn link_utilization(&self) -> Vec<LinkUse> {
        let cycles = self.cycle.max(1) as f64;
        let mut out = Vec::new();
        for (network, stats) in [
            (
                Network::Forward,
                self.fwd.iter().map(|r| &r.stats).collect::<Vec<_>>(),
            ),
            (
                Network::Reverse,
                self.rev.iter().map(|r| &r.stats).collect(),
            ),
        ] {
            for (router, s) in self.dims.coords().zip(stats) {
                for dir in Direction::ALL {
                    let transfers = s.forwarded[dir.index()];
                    if transfers > 0 {
                        out.push(LinkUse {
                            network,
                            router,
                            dir,
                            transfers,
                            utilization: transfers as f64 / cycles,
                        });
                    }
                }
            }
        }
        out
    }

    /// Sum of all source-queue backlogs.
    pub fn backlog(&self) -> usize {
        self.attachments.iter().map(|a| a.node.backlog()).sum()
    }

    /// Flits buffered in routers of both networks.
    pub fn in_flight(&self) -> usize {
        self.fwd.iter().map(Router::resident).sum::<usize>()
            + self.rev.iter().map(Router::resident).sum::<usize>()
    }

    /// Nothing buffered, owed or pending anywhere.
    pub fn is_quiescent(&self) -> bool {
        self.in_flight() == 0
            && self
                .attachments
                .iter()
                .all(|a| a.endpoint.is_idle() && a.node.is_idle() && a.outstanding == 0)
    }

    /// Replies still owed plus any unsolicited replies seen so far.
    pub fn reply_findings(&self) -> Vec<ReplyFinding> {
        let mut out = self.unsolicited.clone();
        for a in &self.attachments {
            for &(id, consumed) in &a.obligations {
                out.push(ReplyFinding::Missing {
                    id,
                    at: a.coords[0],
                    consumed,
                });
            }
        }
        out
    }

    pub fn run(&mut self, cycles: u64) -> Result<(), SimError> {
        for _ in 0..cycles {
            self.tick()?;
        }
        Ok(())
    }

    /// Ticks until quiescent. Returns `false` if `budget` cycles pass first.
    pub fn run_until_quiescent(&mut self, budget: u64) -> Result<bool, SimError> {
        for _ in 0..budget {
            if self.is_quiescent() {
                return Ok(true);
            }
            self.tick()?;
        }
        Ok(self.is_quiescent())
    }

    fn violation(&self, location: String, violation: ProtocolViolation) -> SimError {
        SimError::Protocol {
            cycle: self.cycle,
            location,
            violation,
        }
    }

    fn neighbor(&self, r: usize, dir: Direction) -> Option<usize> {
        let c = self.fwd[r].config().my;
        let n = match dir {
            Direction::W if c.x > 0 => Coordinate::new(c.x - 1, c.y),
            Direction::E if c.x + 1 < self.dims.cols => Coordinate::new(c.x + 1, c.y),
            Direction::N if c.y > 0 => Coordinate::new(c.x, c.y - 1),
            Direction::S if c.y + 1 < self.dims.rows => Coordinate::new(c.x, c.y + 1),
            _ => return None,
        };
        Some(self.dims.index(n))
    }

    fn downstream(&self, network: Network, r: usize) -> [Downstream; 5] {
        let mut ds = [Downstream::Tied; 5];
        for dir in Direction::ALL {
            ds[dir.index()] = if let Some(a) = self.port_attach[r][dir.index()] {
                match network {
                    Network::Forward if !self.attachments[a].endpoint.in_ready() => {
                        Downstream::Busy
                    }
                    _ => Downstream::Ready,
                }
            } else if let Some(n) = self.neighbor(r, dir) {
                let ready = match network {
                    Network::Forward => self.fwd[n].input_ready(dir.opposite()),
                    Network::Reverse => self.rev[n].input_ready(dir.opposite()),
                };
                if ready {
                    Downstream::Ready
                } else {
                    Downstream::Busy
                }
            } else {
                Downstream::Tied
            };
        }
        ds
    }

    fn log(&mut self, line: impl FnOnce() -> String) {
        if let Some(t) = &mut self.trace {
            t.push(format!("cycle {}: {}", self.cycle, line()));
        }
    }

    /// One clock cycle.
    ///
    /// Every handshake and grant is decided from pre-cycle state first;
    /// FIFO writes are committed afterwards, stamped with this cycle, so
    /// they become visible in the next one.
    pub fn tick(&mut self) -> Result<(), SimError> {
        let now = self.cycle;
        let mut grants = std::mem::take(&mut self.grants);
        let mut effects = std::mem::take(&mut self.effects);
        grants.clear();
        effects.clear();

        // Router arbitration.
        for r in 0..self.fwd.len() {
            let ds = self.downstream(Network::Forward, r);
            match self.fwd[r].plan(now, &ds) {
                Ok(g) => grants.extend(g.into_iter().map(|g| (Network::Forward, r, g))),
                Err(v) => {
                    let at = self.fwd[r].config().my;
                    return Err(self.violation(format!("fwd router {at}"), v));
                }
            }
            let ds = self.downstream(Network::Reverse, r);
            match self.rev[r].plan(now, &ds) {
                Ok(g) => grants.extend(g.into_iter().map(|g| (Network::Reverse, r, g))),
                Err(v) => {
                    let at = self.rev[r].config().my;
                    return Err(self.violation(format!("rev router {at}"), v));
                }
            }
        }

        // Endpoints and nodes, against pre-cycle router readiness.
        for i in 0..self.attachments.len() {
            let (r, port) = (self.attachments[i].router, self.attachments[i].port);
            let fwd_ready = self.fwd[r].input_ready(port);
            let rev_ready = self.rev[r].input_ready(port);
            let a = &mut self.attachments[i];
            let core_port = a.endpoint.present(now, fwd_ready, rev_ready);
            let drive = a.node.tick(&core_port);
            match a.endpoint.step(now, &core_port, drive, rev_ready) {
                Ok(fx) => effects.push(fx),
                Err(v) => {
                    let at = a.coords[0];
                    return Err(self.violation(format!("endpoint {at}"), v));
                }
            }
        }

        // Commit router moves.
        for &(network, r, g) in &grants {
            match network {
                Network::Forward => {
                    let flit = self.fwd[r].take(g, now);
                    self.deliver_forward(r, g.output, flit)?;
                }
                Network::Reverse => {
                    let flit = self.rev[r].take(g, now);
                    self.deliver_reverse(r, g.output, flit)?;
                }
            }
        }

        // Commit endpoint effects.
        for (i, fx) in effects.drain(..).enumerate() {
            self.commit_endpoint(i, fx);
        }

        for a in &mut self.attachments {
            a.endpoint.end_cycle();
        }
        self.check_credits()?;
        self.grants = grants;
        self.effects = effects;
        self.cycle += 1;
        Ok(())
    }

    fn deliver_forward(
        &mut self,
        r: usize,
        out: Direction,
        flit: Flit<Packet>,
    ) -> Result<(), SimError> {
        let now = self.cycle;
        if let Some(a) = self.port_attach[r][out.index()] {
            let dest = flit.payload.dest;
            if !self.attachments[a].coords.contains(&dest) {
                let at = self.attachments[a].coords[0];
                return Err(self.violation(
                    format!("endpoint {at}"),
                    ProtocolViolation::Misrouted { at, dest },
                ));
            }
            self.records[flit.id as usize].routers = flit.routers;
            self.log(|| format!("request {} arrives at endpoint {dest}", flit.id));
            self.attachments[a].endpoint.accept_forward(flit, now);
        } else {
            let n = self.neighbor(r, out).expect("grant toward a tied port");
            self.fwd[n].accept(out.opposite(), flit, now);
        }
        Ok(())
    }

    fn deliver_reverse(
        &mut self,
        r: usize,
        out: Direction,
        flit: Flit<ReturnPacket>,
    ) -> Result<(), SimError> {
        let now = self.cycle;
        if let Some(a) = self.port_attach[r][out.index()] {
            let at = self.attachments[a].coords[0];
            let dest = flit.payload.dest();
            if dest != at {
                return Err(self.violation(
                    format!("endpoint {at}"),
                    ProtocolViolation::Misrouted { at, dest },
                ));
            }
            if let Err(v) = self.attachments[a].endpoint.receive_return(&flit.payload) {
                return Err(self.violation(format!("endpoint {at}"), v));
            }
            let att = &mut self.attachments[a];
            att.outstanding = att.outstanding.saturating_sub(1);
            if let Some(rec) = self.records.get_mut(flit.id as usize) {
                rec.reply_delivered = Some(now);
                rec.reply_routers = flit.routers;
            }
            self.log(|| format!("reply {} delivered to {at}: {:?}", flit.id, flit.payload));
        } else {
            let n = self.neighbor(r, out).expect("grant toward a tied port");
            self.rev[n].accept(out.opposite(), flit, now);
        }
        Ok(())
    }

    fn commit_endpoint(&mut self, i: usize, fx: EndpointEffects) {
        let now = self.cycle;
        let (r, port, at) = {
            let a = &self.attachments[i];
            (a.router, a.port, a.coords[0])
        };
        if let Some(c) = fx.consumed {
            self.attachments[i].obligations.push((c.id, now));
            if let Some(rec) = self.records.get_mut(c.id as usize) {
                rec.delivery = Some(now);
            }
            self.log(|| format!("request {} consumed at {at}", c.id));
        }
        if let Some(reply) = fx.reply {
            let obligations = &mut self.attachments[i].obligations;
            match obligations.iter().position(|&(id, _)| id == reply.id) {
                Some(pos) => {
                    obligations.remove(pos);
                }
                None => self
                    .unsolicited
                    .push(ReplyFinding::Unsolicited { at, cycle: now }),
            }
            if let Some(rec) = self.records.get_mut(reply.id as usize) {
                rec.reply_injected = Some(now);
            }
            self.log(|| format!("reply {} injected at {at}", reply.id));
            self.rev[r].accept(port, reply, now);
        }
        if let Some(out) = fx.fired {
            let id = self.records.len() as u64;
            let p = out.packet;
            self.records.push(PacketRecord {
                id,
                src: p.src,
                dest: p.dest,
                op: p.op,
                origin: out.origin,
                entry: now,
                delivery: None,
                reply_injected: None,
                reply_delivered: None,
                routers: 0,
                reply_routers: 0,
            });
            if matches!(self.attachments[i].endpoint, Endpoint::Standard(_)) {
                self.attachments[i].outstanding += 1;
            }
            self.log(|| format!("request {id} fired {:?} {} -> {}", p.op, p.src, p.dest));
            self.fwd[r].accept(
                port,
                Flit {
                    payload: p,
                    id,
                    routers: 0,
                },
                now,
            );
        }
    }

    fn check_credits(&self) -> Result<(), SimError> {
        for a in &self.attachments {
            if let Some(ep) = a.endpoint.as_standard() {
                let max = ep.config().max_out_credits;
                if ep.credits() + a.outstanding != max {
                    return Err(self.violation(
                        format!("endpoint {}", a.coords[0]),
                        ProtocolViolation::CreditConservation {
                            credits: ep.credits(),
                            outstanding: a.outstanding,
                            max,
                        },
                    ));
                }
            }
        }
        Ok(())
    }
}
