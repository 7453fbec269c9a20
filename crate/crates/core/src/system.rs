//! Simulation kernel: one chip (or a connected pair) advanced on the NoC
//! clock.
//!
//! Per cycle, in order:
//!
//! 1. sample `irq_in` and commit the register bank every consumer sees;
//! 2. move AXI bytes;
//! 3. step the sequencer on processor clock edges;
//! 4. step each compute array that is not busy;
//! 5. inject synthetic traffic;
//! 6. accept TTL bytes and move inbound bridge words toward the NoC;
//! 7. advance the NoC one cycle and hand deliveries to node inboxes;
//! 8. run the bridge TX lanes for the beats of this cycle.
//!
//! All NoC side effects of steps 3-6 are committed before step 7, so the
//! order in which arrays are stepped within a cycle cannot be observed.

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arrays::{
    ArrayConfig, ArrayError, ComputeArray, EventCounts, InstrResult, LocalInstr, NocPort,
    StepOutcome, CA_COUNT,
};
use crate::bridge::{
    self, BeatSink, BridgeError, ChipBridge, MonitorReceiver, ReadyPattern, BEAT_HZ,
};
use crate::budget::{ActivityLog, BudgetError};
use crate::chipdesc::{
    self, ChipDescription, DescError, AXI_BLOCK, BRIDGE_BLOCK, BRIDGE_IN_BLOCK, BRIDGE_OUT_BLOCK,
    CA_ANALOG_BLOCK, CA_CONTROLLER_BLOCK, CA_SRAM_BLOCK, NOC_BLOCK, PROCESSOR_BLOCK,
    SHARED_SRAM_BLOCK,
};
use crate::control::{
    mbist_run, scan_chain_check, ActiveConfig, AxiStream, ControlError, IrqCause, IrqIn, IrqOut,
    MbistResult, RegisterFile, ScanChain, ScanResult, SeqInstr, SeqTraceEntry, SeqWord,
};
use crate::noc::{NoCPacket, Noc, NocError, NodeId, PROCESSOR_NODE};
use crate::seed;
use crate::sram::{Sram, SHARED_SRAM_BYTES};

/// Tags with this bit set mark synthetic traffic, which is counted but not
/// handed to node inboxes.
pub const SYNTHETIC_TAG: u32 = 1 << 31;
/// Traffic endpoints: the compute arrays and the processor.
pub const TRAFFIC_NODES: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SystemError {
    #[error(transparent)]
    Desc(#[from] DescError),
    #[error("CA{ca}: {source}")]
    Array { ca: usize, source: ArrayError },
    #[error(transparent)]
    Noc(#[from] NocError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Budget(#[from] BudgetError),
    #[error(transparent)]
    Bridge(#[from] BridgeError),
    #[error("cycle budget of {0} cycles exhausted")]
    CycleBudgetExhausted(u64),
    #[error("no compute array {0}")]
    BadCa(usize),
    #[error("description has {0} compute arrays, the chip has {CA_COUNT}")]
    ArrayCount(usize),
    #[error("invalid traffic: {0}")]
    Traffic(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "pattern")]
pub enum TrafficPattern {
    UniformRandom,
    Hotspot {
        node: NodeId,
        fraction: f64,
    },
    /// Each node sends to the next one.
    Pipeline,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficSpec {
    #[serde(flatten)]
    pub pattern: TrafficPattern,
    /// Packets per node per cycle.
    pub rate: f64,
}

/// Open-loop synthetic traffic. Each node holds at most one packet that the
/// NoC refused and retries it before generating more.
#[derive(Debug, Clone)]
struct TrafficGen {
    spec: TrafficSpec,
    rng: ChaCha8Rng,
    pending: Vec<Option<NoCPacket>>,
    counter: u32,
}

impl TrafficGen {
    fn new(spec: TrafficSpec, seed: u64) -> Result<Self, SystemError> {
        if !(0.0..=1.0).contains(&spec.rate) {
            return Err(SystemError::Traffic(format!(
                "rate {} outside [0, 1]",
                spec.rate
            )));
        }
        if let TrafficPattern::Hotspot { node, fraction } = spec.pattern {
            if usize::from(node) >= TRAFFIC_NODES || !(0.0..=1.0).contains(&fraction) {
                return Err(SystemError::Traffic(
                    "hotspot node or fraction out of range".into(),
                ));
            }
        }
        Ok(Self {
            spec,
            rng: seed::rng(&[seed, 0x5452]),
            pending: vec![None; TRAFFIC_NODES],
            counter: 0,
        })
    }

    fn pick_dst(&mut self, src: usize) -> usize {
        let uniform = |rng: &mut ChaCha8Rng| {
            let d = rng.random_range(0..TRAFFIC_NODES - 1);
            if d >= src {
                d + 1
            } else {
                d
            }
        };
        match self.spec.pattern {
            TrafficPattern::UniformRandom => uniform(&mut self.rng),
            TrafficPattern::Hotspot { node, fraction } => {
                let hot = usize::from(node);
                if hot != src && self.rng.random::<f64>() < fraction {
                    hot
                } else {
                    uniform(&mut self.rng)
                }
            }
            TrafficPattern::Pipeline => (src + 1) % TRAFFIC_NODES,
        }
    }

    fn inject(&mut self, noc: &mut Noc<ChipBridge>) -> Result<(), NocError> {
        for src in 0..TRAFFIC_NODES {
            if self.pending[src].is_none() && self.rng.random::<f64>() < self.spec.rate {
                let dst = self.pick_dst(src);
                let tag = SYNTHETIC_TAG | (self.counter & !SYNTHETIC_TAG);
                self.counter = self.counter.wrapping_add(1);
                let payload = self.rng.random();
                self.pending[src] =
                    Some(NoCPacket::new(src as NodeId, dst as NodeId, payload, tag));
            }
            if let Some(p) = self.pending[src].take() {
                if !noc.inject(p.clone())? {
                    self.pending[src] = Some(p);
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
struct CaRunner {
    program: Vec<LocalInstr>,
    pc: usize,
    busy_until: u64,
    results: Vec<InstrResult>,
    error: Option<ArrayError>,
}

impl CaRunner {
    fn has_work(&self) -> bool {
        self.error.is_none() && self.pc < self.program.len()
    }

    /// Work left, or the last instruction still occupying the array.
    fn active(&self, now: u64) -> bool {
        self.error.is_none() && (self.pc < self.program.len() || self.busy_until > now)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaStatus {
    pub id: usize,
    pub paradigm: crate::arrays::Paradigm,
    pub instructions_done: usize,
    pub running: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub events: EventCounts,
}

#[derive(Debug, Clone, Default)]
struct SeqRunner {
    program: Vec<SeqInstr>,
    pc: usize,
    halted: bool,
    trace: Vec<SeqTraceEntry>,
    error: Option<SystemError>,
}

enum SeqStep {
    Done(Option<u32>),
    Blocked,
    Halt,
}

/// A node's NoC attachment as seen by its compute array.
struct KernelPort<'a> {
    node: NodeId,
    noc: &'a mut Noc<ChipBridge>,
    inbox: &'a mut VecDeque<NoCPacket>,
}

impl NocPort for KernelPort<'_> {
    fn try_send(&mut self, dst: NodeId, tag: u32, payload: u32) -> Result<bool, ArrayError> {
        Ok(self
            .noc
            .inject(NoCPacket::new(self.node, dst, payload, tag))?)
    }

    fn try_recv(&mut self) -> Option<NoCPacket> {
        self.inbox.pop_front()
    }
}

#[derive(Debug, Clone)]
pub struct System {
    desc: ChipDescription,
    seed: u64,
    cycle: u64,
    pub arrays: Vec<ComputeArray>,
    runners: Vec<CaRunner>,
    noc: Noc<ChipBridge>,
    pub regs: RegisterFile,
    irq_in: IrqIn,
    pub irq_out: IrqOut,
    pub axi: AxiStream,
    seq: Option<SeqRunner>,
    inboxes: Vec<VecDeque<NoCPacket>>,
    pub shared_sram: [Sram; 2],
    pub scan: ScanChain,
    traffic: Option<TrafficGen>,
    rx_feed: VecDeque<(u8, u8)>,
    receiver: MonitorReceiver,
    beat_acc: u64,
    proc_div: u64,
    config: ActiveConfig,
    activity: ActivityLog,
    inbound_discarded: u64,
}

impl System {
    pub fn new(desc: &ChipDescription, seed: u64) -> Result<Self, SystemError> {
        desc.check()?;
        let blocks: Vec<_> = desc.compute_arrays().collect();
        if blocks.len() != CA_COUNT {
            return Err(SystemError::ArrayCount(blocks.len()));
        }
        let arrays = blocks
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let cfg = b
                    .array
                    .clone()
                    .unwrap_or_else(|| ArrayConfig::new(chipdesc::REFERENCE_PARADIGMS[i]));
                ComputeArray::new(i as u8, cfg, seed)
                    .map_err(|source| SystemError::Array { ca: i, source })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut noc = Noc::new(desc.noc.clone())?;
        let endpoint = desc.noc.topology.bridge_node();
        noc.attach_tap(ChipBridge::new(desc.bridge.clone(), endpoint))?;
        let nodes = noc.nodes();
        let hz = desc.noc.clock_hz;
        let regs = RegisterFile::default();
        let config = regs.config();
        let mut activity = ActivityLog::new(hz);
        activity.clocks.insert(NOC_BLOCK.into(), hz as f64);
        activity.clocks.insert(BRIDGE_BLOCK.into(), hz as f64);
        Ok(Self {
            desc: desc.clone(),
            seed,
            cycle: 0,
            arrays,
            runners: vec![CaRunner::default(); CA_COUNT],
            noc,
            regs,
            irq_in: IrqIn::default(),
            irq_out: IrqOut::default(),
            axi: AxiStream::new(hz),
            seq: None,
            inboxes: vec![VecDeque::new(); nodes],
            shared_sram: [Sram::new(SHARED_SRAM_BYTES), Sram::new(SHARED_SRAM_BYTES)],
            scan: ScanChain::default(),
            traffic: None,
            rx_feed: VecDeque::new(),
            receiver: MonitorReceiver::new(ReadyPattern::Always),
            beat_acc: 0,
            proc_div: hz.div_ceil(desc.processor_clock_hz.max(1)).max(1),
            config,
            activity,
            inbound_discarded: 0,
        })
    }

    pub fn description(&self) -> &ChipDescription {
        &self.desc
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    pub fn noc(&self) -> &Noc<ChipBridge> {
        &self.noc
    }

    pub fn noc_mut(&mut self) -> &mut Noc<ChipBridge> {
        &mut self.noc
    }

    pub fn bridge(&self) -> &ChipBridge {
        self.noc.tap().expect("bridge attached at construction")
    }

    pub fn bridge_mut(&mut self) -> &mut ChipBridge {
        self.noc.tap_mut().expect("bridge attached at construction")
    }

    pub fn receiver(&self) -> &MonitorReceiver {
        &self.receiver
    }

    pub fn set_receiver(&mut self, pattern: ReadyPattern) {
        self.receiver = MonitorReceiver::new(pattern);
    }

    /// Handle to the `irq_in` line; may be driven from another thread.
    pub fn irq_in(&self) -> IrqIn {
        self.irq_in.clone()
    }

    pub fn set_irq_in(&self, level: bool) {
        self.irq_in.set(level);
    }

    /// Configuration decoded from the bank active during the last cycle.
    pub fn active_config(&self) -> &ActiveConfig {
        &self.config
    }

    pub fn inbox(&self, node: NodeId) -> Option<&VecDeque<NoCPacket>> {
        self.inboxes.get(usize::from(node))
    }

    pub fn activity(&self) -> ActivityLog {
        let mut log = self.activity.clone();
        for a in &self.arrays {
            log.events.add(&a.events());
        }
        log
    }

    pub fn inbound_discarded(&self) -> u64 {
        self.inbound_discarded
    }

    pub fn set_traffic(&mut self, spec: Option<TrafficSpec>) -> Result<(), SystemError> {
        self.traffic = spec.map(|s| TrafficGen::new(s, self.seed)).transpose()?;
        Ok(())
    }

    /// Queues bytes on the TTL RX lines; they are offered one per cycle and
    /// retried while the lines are busy.
    pub fn feed_rx(&mut self, bytes: impl IntoIterator<Item = (u8, u8)>) {
        self.rx_feed.extend(bytes);
    }

    pub fn form_all(&mut self, v: f64) -> Result<u64, SystemError> {
        let mut n = 0;
        for (ca, a) in self.arrays.iter_mut().enumerate() {
            n += a
                .form_all(v)
                .map_err(|source| SystemError::Array { ca, source })?;
        }
        Ok(n)
    }

    pub fn load_ca(&mut self, ca: usize, program: Vec<LocalInstr>) -> Result<(), SystemError> {
        let runner = self.runners.get_mut(ca).ok_or(SystemError::BadCa(ca))?;
        *runner = CaRunner {
            program,
            ..CaRunner::default()
        };
        if let Some(p) = self.config.ca_modes[ca] {
            if let Err(source) = self.arrays[ca].set_paradigm(p) {
                runner.error = Some(source.clone());
                self.irq_out
                    .raise(self.cycle, &format!("CA{ca}"), IrqCause::SoftError);
            }
        }
        Ok(())
    }

    pub fn ca_running(&self, ca: usize) -> bool {
        self.runners.get(ca).is_some_and(|r| r.active(self.cycle))
    }

    pub fn ca_results(&self, ca: usize) -> &[InstrResult] {
        self.runners.get(ca).map_or(&[], |r| &r.results)
    }

    pub fn ca_status(&self) -> Vec<CaStatus> {
        self.runners
            .iter()
            .zip(&self.arrays)
            .enumerate()
            .map(|(id, (r, a))| CaStatus {
                id,
                paradigm: a.paradigm(),
                instructions_done: r.results.len(),
                running: r.active(self.cycle),
                error: r.error.as_ref().map(ToString::to_string),
                events: a.events(),
            })
            .collect()
    }

    pub fn load_sequencer(&mut self, program: Vec<SeqInstr>) {
        self.seq = Some(SeqRunner {
            program,
            ..SeqRunner::default()
        });
    }

    pub fn sequencer_halted(&self) -> bool {
        self.seq.as_ref().is_none_or(|s| s.halted)
    }

    pub fn sequencer_trace(&self) -> &[SeqTraceEntry] {
        self.seq.as_ref().map_or(&[], |s| &s.trace)
    }

    pub fn sequencer_error(&self) -> Option<&SystemError> {
        self.seq.as_ref().and_then(|s| s.error.as_ref())
    }

    /// Nothing left to do: sequencer halted, arrays finished, NoC drained,
    /// no queued bridge or AXI traffic.
    pub fn is_quiescent(&self) -> bool {
        self.sequencer_halted()
            && !self.runners.iter().any(|r| r.active(self.cycle))
            && self.noc.is_idle()
            && self.bridge().fifo_len() == 0
            && self.bridge().inbound_len() == 0
            && self.rx_feed.is_empty()
            && self.axi.is_idle()
    }

    /// One full cycle with the bridge TX lanes feeding the local receiver.
    pub fn tick(&mut self) -> Result<(), SystemError> {
        self.step_core()?;
        let beats = self.beats_this_cycle();
        let bridge = self.noc.tap_mut().expect("bridge attached at construction");
        let moved = bridge.advance_beats(beats, &mut self.receiver);
        self.account_beats(moved);
        Ok(())
    }

    pub fn run(&mut self, cycles: u64) -> Result<(), SystemError> {
        for _ in 0..cycles {
            self.tick()?;
        }
        Ok(())
    }

    /// Runs `program` on the sequencer until it halts.
    pub fn run_sequencer(
        &mut self,
        program: Vec<SeqInstr>,
        budget: u64,
    ) -> Result<Vec<SeqTraceEntry>, SystemError> {
        self.load_sequencer(program);
        let start = self.cycle;
        while !self.sequencer_halted() {
            if self.cycle - start >= budget {
                return Err(SystemError::CycleBudgetExhausted(budget));
            }
            self.tick()?;
        }
        if let Some(e) = self.sequencer_error() {
            return Err(e.clone());
        }
        Ok(self.sequencer_trace().to_vec())
    }

    /// Memory self-test of every SRAM instance: the seven array-local ones,
    /// then the two shared ones.
    pub fn mbist_all(&mut self) -> Vec<MbistResult> {
        let mut out: Vec<MbistResult> = self
            .arrays
            .iter_mut()
            .map(|a| mbist_run(&mut a.sram))
            .collect();
        out.extend(self.shared_sram.iter_mut().map(mbist_run));
        out
    }

    pub fn scan_check(&self) -> Result<ScanResult, SystemError> {
        Ok(scan_chain_check(&self.scan, self.seed)?)
    }

    fn beats_this_cycle(&mut self) -> u64 {
        self.beat_acc += BEAT_HZ;
        let hz = self.desc.noc.clock_hz;
        let n = self.beat_acc / hz;
        self.beat_acc %= hz;
        n
    }

    fn account_beats(&mut self, moved: u64) {
        if moved > 0 {
            self.activity.add(BRIDGE_OUT_BLOCK, 1);
            self.activity.add(BRIDGE_BLOCK, 1);
        }
    }

    /// Steps 1-7 of a cycle.
    pub fn step_core(&mut self) -> Result<(), SystemError> {
        let now = self.cycle;
        self.regs.select_bank(u8::from(self.irq_in.level()));
        self.config = self.regs.config();
        let monitor = self.config.monitor_enabled;
        self.bridge_mut().set_monitor_enabled(monitor);

        if self.axi.tick(now) {
            self.activity.add(AXI_BLOCK, 1);
        }
        if now.is_multiple_of(self.proc_div) {
            self.step_sequencer();
        }
        if !self.sequencer_halted() {
            self.activity.add(PROCESSOR_BLOCK, 1);
        }
        self.step_arrays();
        if let Some(t) = self.traffic.as_mut() {
            t.inject(&mut self.noc)?;
        }
        self.move_inbound()?;

        let in_flight = !self.noc.is_idle();
        for pkt in self.noc.advance(1) {
            if pkt.tag & SYNTHETIC_TAG != 0 || Some(pkt.dst) == self.desc.noc.topology.bridge_node()
            {
                continue;
            }
            self.inboxes[usize::from(pkt.dst)].push_back(pkt);
        }
        if in_flight {
            self.activity.add(NOC_BLOCK, 1);
        }
        self.activity.cycles += 1;
        self.cycle += 1;
        Ok(())
    }

    fn step_arrays(&mut self) {
        let hz = self.desc.noc.clock_hz;
        for ca in 0..CA_COUNT {
            let runner = &mut self.runners[ca];
            if !runner.has_work() || runner.busy_until > self.cycle {
                continue;
            }
            let mut port = KernelPort {
                node: ca as NodeId,
                noc: &mut self.noc,
                inbox: &mut self.inboxes[ca],
            };
            let array = &mut self.arrays[ca];
            match array.step(&runner.program[runner.pc], &mut port) {
                Ok(StepOutcome::Done { result, cost }) => {
                    let div = self.config.ca_dividers[ca];
                    let digital = array.timeline_cycles(
                        crate::arrays::Cost {
                            digital: cost.digital,
                            analog: 0,
                        },
                        hz,
                        div,
                    );
                    let analog = array.timeline_cycles(
                        crate::arrays::Cost {
                            digital: 0,
                            analog: cost.analog,
                        },
                        hz,
                        1,
                    );
                    runner.busy_until = self.cycle + (digital + analog).max(1);
                    runner.results.push(result);
                    runner.pc += 1;
                    self.activity.add(CA_CONTROLLER_BLOCK, digital.max(1));
                    self.activity.add(CA_SRAM_BLOCK, digital);
                    self.activity.add(CA_ANALOG_BLOCK, analog);
                }
                Ok(StepOutcome::Blocked) => {}
                Err(e) => {
                    runner.error = Some(e);
                    self.irq_out
                        .raise(self.cycle, &format!("CA{ca}"), IrqCause::SoftError);
                }
            }
        }
    }

    fn step_sequencer(&mut self) {
        let Some(seq) = self.seq.as_ref() else {
            return;
        };
        if seq.halted {
            return;
        }
        let pc = seq.pc;
        let Some(instr) = seq.program.get(pc).cloned() else {
            self.seq.as_mut().expect("checked").halted = true;
            return;
        };
        let step = self.exec_seq(&instr);
        let now = self.cycle;
        let seq = self.seq.as_mut().expect("checked");
        match step {
            Ok(SeqStep::Done(value)) => {
                seq.trace.push(SeqTraceEntry {
                    cycle: now,
                    pc,
                    op: instr.name().into(),
                    value,
                });
                seq.pc += 1;
                self.activity.add(SHARED_SRAM_BLOCK, self.proc_div);
            }
            Ok(SeqStep::Blocked) => {}
            Ok(SeqStep::Halt) => {
                seq.halted = true;
                self.irq_out.raise(now, "sequencer", IrqCause::Ready);
            }
            Err(e) => {
                seq.halted = true;
                seq.error = Some(e);
                self.irq_out.raise(now, "sequencer", IrqCause::SoftError);
            }
        }
    }

    fn exec_seq(&mut self, instr: &SeqInstr) -> Result<SeqStep, SystemError> {
        Ok(match instr {
            SeqInstr::WriteReg { bank, addr, value } => {
                let bank = bank.unwrap_or(self.regs.active_bank());
                self.regs.jtag_write(bank, *addr, *value)?;
                SeqStep::Done(None)
            }
            SeqInstr::ReadReg { addr } => SeqStep::Done(Some(self.regs.active(*addr)?)),
            SeqInstr::SendNoC { dst, tag, word } => {
                let payload = match word {
                    SeqWord::Literal(w) => *w,
                    SeqWord::Mailbox => {
                        if self.axi.mailbox.len() < 4 {
                            return Ok(SeqStep::Blocked);
                        }
                        let b: Vec<u8> = self.axi.mailbox.iter().take(4).copied().collect();
                        u32::from_le_bytes([b[0], b[1], b[2], b[3]])
                    }
                };
                let pkt = NoCPacket::new(PROCESSOR_NODE, *dst, payload, *tag);
                if !self.noc.inject(pkt)? {
                    return Ok(SeqStep::Blocked);
                }
                if *word == SeqWord::Mailbox {
                    self.axi.mailbox.drain(..4);
                }
                SeqStep::Done(Some(payload))
            }
            SeqInstr::AwaitNoC => match self.inboxes[usize::from(PROCESSOR_NODE)].pop_front() {
                None => SeqStep::Blocked,
                Some(p) => {
                    self.axi.send_to_host(&p.payload.to_le_bytes());
                    SeqStep::Done(Some(p.payload))
                }
            },
            SeqInstr::RunCA { ca, program } => {
                if *ca >= CA_COUNT {
                    return Err(SystemError::BadCa(*ca));
                }
                if self.ca_running(*ca) {
                    return Ok(SeqStep::Blocked);
                }
                self.load_ca(*ca, program.clone())?;
                SeqStep::Done(None)
            }
            SeqInstr::WaitIrq => {
                if self.irq_in.level() {
                    SeqStep::Done(None)
                } else {
                    SeqStep::Blocked
                }
            }
            SeqInstr::RaiseIrqOut { cause } => {
                self.irq_out.raise(self.cycle, "sequencer", *cause);
                SeqStep::Done(None)
            }
            SeqInstr::Halt => SeqStep::Halt,
        })
    }

    /// TTL bytes into the bridge, then at most one inbound word into the
    /// NoC from the bridge endpoint. On a topology without an endpoint the
    /// word goes straight to the target inbox.
    fn move_inbound(&mut self) -> Result<(), SystemError> {
        if let Some(&(byte, addr)) = self.rx_feed.front() {
            if self.bridge_mut().rx_push(byte, addr) {
                self.rx_feed.pop_front();
                self.activity.add(BRIDGE_IN_BLOCK, 1);
            }
        }
        let Some((stream, word)) = self.bridge().peek_inbound() else {
            return Ok(());
        };
        let route = self.config.rx_routes[usize::from(stream) % bridge::STREAMS];
        let Some(dst) = route else {
            self.bridge_mut().pop_inbound();
            self.inbound_discarded += 1;
            return Ok(());
        };
        match self.desc.noc.topology.bridge_node() {
            Some(ep) => {
                if self
                    .noc
                    .inject(NoCPacket::new(ep, dst, word, u32::from(stream)))?
                {
                    self.bridge_mut().pop_inbound();
                }
            }
            None => {
                let inbox = self
                    .inboxes
                    .get_mut(usize::from(dst))
                    .ok_or(NocError::BadNodeId {
                        node: dst,
                        nodes: TRAFFIC_NODES,
                    })?;
                let mut p = NoCPacket::new(dst, dst, word, u32::from(stream));
                p.inject_cycle = self.cycle;
                p.deliver_cycle = Some(self.cycle);
                inbox.push_back(p);
                self.noc.tap_mut().expect("bridge attached").pop_inbound();
            }
        }
        Ok(())
    }
}

/// Two chips whose bridges are cross-connected: each one's TX lanes feed the
/// other's inbound queue.
#[derive(Debug, Clone)]
pub struct ChipPair {
    pub a: System,
    pub b: System,
}

impl ChipPair {
    pub fn new(mut a: System, mut b: System) -> Result<Self, SystemError> {
        bridge::connect(a.bridge_mut(), b.bridge_mut())?;
        Ok(Self { a, b })
    }

    pub fn tick(&mut self) -> Result<(), SystemError> {
        self.a.step_core()?;
        self.b.step_core()?;
        let na = self.a.beats_this_cycle();
        let nb = self.b.beats_this_cycle();
        let (ab, bb) = (
            self.a.noc.tap_mut().expect("bridge attached"),
            self.b.noc.tap_mut().expect("bridge attached"),
        );
        let ma = ab.advance_beats(na, bb as &mut dyn BeatSink);
        let mb = bb.advance_beats(nb, ab as &mut dyn BeatSink);
        self.a.account_beats(ma);
        self.b.account_beats(mb);
        Ok(())
    }

    pub fn run(&mut self, cycles: u64) -> Result<(), SystemError> {
        for _ in 0..cycles {
            self.tick()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
