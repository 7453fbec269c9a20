//! Cycle-approximate 32-bit Network-on-Chip.
//!
//! Packets are single 32-bit flits. Every router has one input FIFO per port
//! (port 0 is the local injection/ejection port) and forwards at most one
//! flit per output port per cycle. Arbitration per output is round-robin,
//! starting at the lowest port index.
//!
//! The NoC's aggregate throughput is one 32-bit word per cycle: all routers
//! share a single ejection stage, granted round-robin across nodes. This is
//! the word stream the chip bridge monitor observes through the tap.
//!
//! Two topologies are modeled:
//!
//! * `Mesh3x3` - nodes 0..=8 on a 3x3 grid (node = y * 3 + x), XY
//!   dimension-order routing. Nodes 0..=6 are the compute arrays, node 7 the
//!   processor and node 8 the chip bridge endpoint.
//! * `Ring8` - bidirectional ring of 8 nodes, shortest-direction routing
//!   (ties go clockwise), bubble flow control on injection.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type NodeId = u8;

pub const WORD_BITS: u32 = 32;
pub const PROCESSOR_NODE: NodeId = 7;
const LOCAL: usize = 0;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NocError {
    #[error("node {node} does not exist ({nodes} nodes)")]
    BadNodeId { node: NodeId, nodes: usize },
    #[error("packet from node {0} addressed to itself")]
    SelfAddressed(NodeId),
    #[error("a tap is already attached")]
    TapAlreadyAttached,
    #[error("invalid NoC configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NoCPacket {
    pub src: NodeId,
    pub dst: NodeId,
    pub payload: u32,
    pub tag: u32,
    pub inject_cycle: u64,
    pub deliver_cycle: Option<u64>,
}

impl NoCPacket {
    pub fn new(src: NodeId, dst: NodeId, payload: u32, tag: u32) -> Self {
        Self {
            src,
            dst,
            payload,
            tag,
            inject_cycle: 0,
            deliver_cycle: None,
        }
    }

    pub fn latency(&self) -> Option<u64> {
        self.deliver_cycle.map(|d| d - self.inject_cycle)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Topology {
    #[default]
    Mesh3x3,
    Ring8,
}

impl Topology {
    pub fn nodes(self) -> usize {
        match self {
            Self::Mesh3x3 => 9,
            Self::Ring8 => 8,
        }
    }

    pub fn ports(self) -> usize {
        match self {
            Self::Mesh3x3 => 5,
            Self::Ring8 => 3,
        }
    }

    /// The node where the chip bridge is addressable, if any.
    pub fn bridge_node(self) -> Option<NodeId> {
        match self {
            Self::Mesh3x3 => Some(8),
            Self::Ring8 => None,
        }
    }

    /// Output port at router `at` for a packet headed to `dst`.
    ///
    /// Mesh ports: 1 north (y-1), 2 east (x+1), 3 south (y+1), 4 west (x-1).
    /// Ring ports: 1 clockwise (+1), 2 counter-clockwise (-1).
    pub fn route(self, at: usize, dst: usize) -> usize {
        if at == dst {
            return LOCAL;
        }
        match self {
            Self::Mesh3x3 => {
                let (ax, ay) = (at % 3, at / 3);
                let (dx, dy) = (dst % 3, dst / 3);
                if dx > ax {
                    2
                } else if dx < ax {
                    4
                } else if dy > ay {
                    3
                } else {
                    1
                }
            }
            Self::Ring8 => {
                let n = self.nodes();
                let cw = (dst + n - at) % n;
                if cw <= n / 2 {
                    1
                } else {
                    2
                }
            }
        }
    }

    /// Downstream router and its input port for output `out` of router `at`.
    pub fn link(self, at: usize, out: usize) -> (usize, usize) {
        match self {
            Self::Mesh3x3 => match out {
                1 => (at - 3, 3),
                2 => (at + 1, 4),
                3 => (at + 3, 1),
                4 => (at - 1, 2),
                _ => unreachable!("local port has no link"),
            },
            Self::Ring8 => {
                let n = self.nodes();
                match out {
                    1 => ((at + 1) % n, 1),
                    2 => ((at + n - 1) % n, 2),
                    _ => unreachable!("local port has no link"),
                }
            }
        }
    }
}

fn default_pipeline() -> u64 {
    1
}
fn default_width() -> u32 {
    WORD_BITS
}
fn default_clock() -> u64 {
    1_000_000_000
}
fn default_depth() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NocConfig {
    #[serde(default)]
    pub topology: Topology,
    #[serde(default = "default_pipeline")]
    pub router_pipeline_cycles: u64,
    #[serde(default = "default_width")]
    pub link_width_bits: u32,
    #[serde(default = "default_clock")]
    pub clock_hz: u64,
    #[serde(default = "default_depth")]
    pub fifo_depth: usize,
}

impl Default for NocConfig {
    fn default() -> Self {
        Self {
            topology: Topology::default(),
            router_pipeline_cycles: default_pipeline(),
            link_width_bits: default_width(),
            clock_hz: default_clock(),
            fifo_depth: default_depth(),
        }
    }
}

impl NocConfig {
    pub fn validate(&self) -> Result<(), NocError> {
        let bad = |m: &str| Err(NocError::InvalidConfig(m.to_string()));
        if self.link_width_bits != WORD_BITS {
            return bad("link width must be 32 bits");
        }
        if self.clock_hz == 0 || self.clock_hz > 1_000_000_000 {
            return bad("clock must be in (0, 1 GHz]");
        }
        if self.router_pipeline_cycles == 0 {
            return bad("router pipeline must be at least one cycle");
        }
        if self.fifo_depth == 0 {
            return bad("fifo depth must be at least one");
        }
        if self.topology == Topology::Ring8 && self.fifo_depth < 2 {
            return bad("ring bubble flow control needs fifo depth >= 2");
        }
        Ok(())
    }
}

/// Receives a copy of every delivered packet, in delivery order, in the
/// cycle it is delivered.
pub trait TapSink {
    /// `false` means the sink could not take the word.
    fn offer(&mut self, pkt: &NoCPacket) -> bool;

    /// Whether a packet addressed to the bridge endpoint may be ejected this
    /// cycle. Consulted only when this sink is attached.
    fn endpoint_ready(&self) -> bool {
        true
    }
}

/// Placeholder tap type for networks that never get one.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullTap;

impl TapSink for NullTap {
    fn offer(&mut self, _: &NoCPacket) -> bool {
        true
    }
}

impl TapSink for Vec<NoCPacket> {
    fn offer(&mut self, pkt: &NoCPacket) -> bool {
        self.push(pkt.clone());
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceKind {
    Inject,
    Deliver,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub cycle: u64,
    pub src: NodeId,
    pub dst: NodeId,
    pub tag: u32,
    pub event: TraceKind,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NocStats {
    pub injected: u64,
    pub delivered: u64,
    pub in_flight: u64,
    pub refused: u64,
    pub tap_refused: u64,
    pub elapsed_cycles: u64,
    pub mean_latency_cycles: f64,
    pub max_latency_cycles: u64,
    pub peak_link_bits_per_cycle: u32,
    pub offered_gbps: f64,
}

#[derive(Debug, Clone)]
struct Flit {
    pkt: NoCPacket,
    ready_at: u64,
}

#[derive(Debug, Clone)]
struct Router {
    inputs: Vec<VecDeque<Flit>>,
    rr: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Noc<T = NullTap> {
    config: NocConfig,
    routers: Vec<Router>,
    now: u64,
    eject_rr: usize,
    tap: Option<T>,
    injected: u64,
    delivered: u64,
    refused: u64,
    tap_refused: u64,
    latency_sum: u64,
    latency_max: u64,
    peak_link_moves: u32,
    trace: Option<Vec<TraceEvent>>,
}

impl<T: TapSink> Noc<T> {
    pub fn new(config: NocConfig) -> Result<Self, NocError> {
        config.validate()?;
        let ports = config.topology.ports();
        let routers = (0..config.topology.nodes())
            .map(|_| Router {
                inputs: vec![VecDeque::new(); ports],
                rr: vec![0; ports],
            })
            .collect();
        Ok(Self {
            config,
            routers,
            now: 0,
            eject_rr: 0,
            tap: None,
            injected: 0,
            delivered: 0,
            refused: 0,
            tap_refused: 0,
            latency_sum: 0,
            latency_max: 0,
            peak_link_moves: 0,
            trace: None,
        })
    }

    pub fn config(&self) -> &NocConfig {
        &self.config
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn nodes(&self) -> usize {
        self.routers.len()
    }

    pub fn in_flight(&self) -> u64 {
        self.injected - self.delivered
    }

    pub fn is_idle(&self) -> bool {
        self.in_flight() == 0
    }

    /// Starts recording inject/deliver events.
    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    pub fn trace(&self) -> &[TraceEvent] {
        self.trace.as_deref().unwrap_or(&[])
    }

    pub fn attach_tap(&mut self, sink: T) -> Result<(), NocError> {
        if self.tap.is_some() {
            return Err(NocError::TapAlreadyAttached);
        }
        self.tap = Some(sink);
        Ok(())
    }

    pub fn tap(&self) -> Option<&T> {
        self.tap.as_ref()
    }

    pub fn tap_mut(&mut self) -> Option<&mut T> {
        self.tap.as_mut()
    }

    fn check_node(&self, node: NodeId) -> Result<(), NocError> {
        if usize::from(node) < self.nodes() {
            Ok(())
        } else {
            Err(NocError::BadNodeId {
                node,
                nodes: self.nodes(),
            })
        }
    }

    /// Queues `pkt` at its source's injection port. Returns `false` when
    /// that queue is full; the packet is then not in the network.
    pub fn inject(&mut self, mut pkt: NoCPacket) -> Result<bool, NocError> {
        self.check_node(pkt.src)?;
        self.check_node(pkt.dst)?;
        if pkt.src == pkt.dst {
            return Err(NocError::SelfAddressed(pkt.src));
        }
        let queue = &mut self.routers[usize::from(pkt.src)].inputs[LOCAL];
        if queue.len() >= self.config.fifo_depth {
            self.refused += 1;
            return Ok(false);
        }
        pkt.inject_cycle = self.now;
        pkt.deliver_cycle = None;
        if let Some(t) = self.trace.as_mut() {
            t.push(TraceEvent {
                cycle: self.now,
                src: pkt.src,
                dst: pkt.dst,
                tag: pkt.tag,
                event: TraceKind::Inject,
            });
        }
        queue.push_back(Flit {
            pkt,
            ready_at: self.now,
        });
        self.injected += 1;
        Ok(true)
    }

    pub fn advance(&mut self, cycles: u64) -> Vec<NoCPacket> {
        let mut out = Vec::new();
        for _ in 0..cycles {
            self.cycle(&mut out);
        }
        out
    }

    /// Advances until nothing is in flight or `max_cycles` have passed.
    pub fn drain(&mut self, max_cycles: u64) -> Vec<NoCPacket> {
        let mut out = Vec::new();
        let mut n = 0;
        while !self.is_idle() && n < max_cycles {
            self.cycle(&mut out);
            n += 1;
        }
        out
    }

    fn ejection_blocked(&self, dst: usize) -> bool {
        match (&self.tap, self.config.topology.bridge_node()) {
            (Some(tap), Some(b)) if usize::from(b) == dst => !tap.endpoint_ready(),
            _ => false,
        }
    }

    fn cycle(&mut self, out: &mut Vec<NoCPacket>) {
        let now = self.now;
        let topo = self.config.topology;
        let ports = topo.ports();
        let depth = self.config.fifo_depth;
        let occupancy: Vec<usize> = self
            .routers
            .iter()
            .flat_map(|r| r.inputs.iter().map(VecDeque::len))
            .collect();

        let mut moves: Vec<(usize, usize, usize)> = Vec::new();
        let mut ejects: Vec<(usize, usize)> = Vec::new();
        for (r, router) in self.routers.iter().enumerate() {
            for o in 0..ports {
                let start = router.rr[o];
                for k in 0..ports {
                    let ip = (start + k) % ports;
                    let Some(f) = router.inputs[ip].front() else {
                        continue;
                    };
                    let dst = usize::from(f.pkt.dst);
                    if f.ready_at > now || topo.route(r, dst) != o {
                        continue;
                    }
                    if o == LOCAL {
                        if self.ejection_blocked(dst) {
                            continue;
                        }
                        ejects.push((r, ip));
                        break;
                    }
                    let (nr, nip) = topo.link(r, o);
                    // bubble rule: a ring injection must leave one free slot
                    let need = if topo == Topology::Ring8 && ip == LOCAL {
                        2
                    } else {
                        1
                    };
                    if occupancy[nr * ports + nip] + need <= depth {
                        moves.push((r, ip, o));
                        break;
                    }
                }
            }
        }

        let mut link_moves = vec![0u32; self.routers.len() * ports];
        let mut lifted = Vec::with_capacity(moves.len());
        for &(r, ip, o) in &moves {
            let flit = self.routers[r].inputs[ip]
                .pop_front()
                .expect("head checked");
            self.routers[r].rr[o] = (ip + 1) % ports;
            link_moves[r * ports + o] += 1;
            lifted.push((topo.link(r, o), flit));
        }
        for ((nr, nip), mut flit) in lifted {
            flit.ready_at = now + self.config.router_pipeline_cycles;
            self.routers[nr].inputs[nip].push_back(flit);
        }

        let n = self.routers.len();
        let granted = ejects
            .iter()
            .min_by_key(|(r, _)| (r + n - self.eject_rr) % n)
            .copied();
        let mut eject_moves = 0;
        if let Some((r, ip)) = granted {
            let mut pkt = self.routers[r].inputs[ip]
                .pop_front()
                .expect("head checked")
                .pkt;
            self.routers[r].rr[LOCAL] = (ip + 1) % ports;
            self.eject_rr = (r + 1) % n;
            eject_moves = 1;
            pkt.deliver_cycle = Some(now + 1);
            self.record_delivery(&pkt);
            if let Some(tap) = self.tap.as_mut() {
                if !tap.offer(&pkt) {
                    self.tap_refused += 1;
                }
            }
            out.push(pkt);
        }

        let peak = link_moves
            .iter()
            .copied()
            .max()
            .unwrap_or(0)
            .max(eject_moves);
        self.peak_link_moves = self.peak_link_moves.max(peak);
        self.now += 1;
    }

    fn record_delivery(&mut self, pkt: &NoCPacket) {
        let latency = pkt.latency().expect("delivered");
        self.delivered += 1;
        self.latency_sum += latency;
        self.latency_max = self.latency_max.max(latency);
        if let Some(t) = self.trace.as_mut() {
            t.push(TraceEvent {
                cycle: pkt.deliver_cycle.expect("delivered"),
                src: pkt.src,
                dst: pkt.dst,
                tag: pkt.tag,
                event: TraceKind::Deliver,
            });
        }
    }

    pub fn stats(&self) -> NocStats {
        let mean = if self.delivered == 0 {
            0.0
        } else {
            self.latency_sum as f64 / self.delivered as f64
        };
        let gbps = if self.now == 0 {
            0.0
        } else {
            self.delivered as f64 * f64::from(WORD_BITS) * self.config.clock_hz as f64
                / self.now as f64
                / 1e9
        };
        NocStats {
            injected: self.injected,
            delivered: self.delivered,
            in_flight: self.in_flight(),
            refused: self.refused,
            tap_refused: self.tap_refused,
            elapsed_cycles: self.now,
            mean_latency_cycles: mean,
            max_latency_cycles: self.latency_max,
            peak_link_bits_per_cycle: self.peak_link_moves * self.config.link_width_bits,
            offered_gbps: gbps,
        }
    }
}
