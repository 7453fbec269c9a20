//! Local controller: sequential execution of per-array programs.
//!
//! Instructions operate on a small accumulator register. `LoadSram`,
//! `Mvm`, `Search`, `SnnStep`, `PcSample` and `RecvNoC` overwrite it;
//! `SendNoC` and operand-less `Mvm`/`SnnStep` read it.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{parse_key, ArrayError, ComputeArray};
use crate::noc::{NoCPacket, NodeId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProgramData {
    Levels {
        levels: Vec<Vec<u32>>,
    },
    Ternary {
        ternary: Vec<String>,
    },
    /// Level matrix stored in a separate JSON file; the harness replaces it
    /// with `Levels` when loading a workload.
    File {
        file: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Node(NodeId),
    /// Source node of the most recently received packet.
    Sender,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WordSource {
    Literal(u32),
    Acc(usize),
    /// Little-endian 32-bit word at this SRAM byte address.
    Sram(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op")]
pub enum LocalInstr {
    LoadSram {
        addr: u32,
        len: u32,
    },
    StoreSram {
        addr: u32,
        data: Vec<u8>,
    },
    Program(ProgramData),
    Mvm {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        input: Option<Vec<u32>>,
    },
    Search {
        key: String,
    },
    SnnStep {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        spikes: Option<Vec<bool>>,
    },
    PcSample {
        n: u32,
    },
    SendNoC {
        dst: Target,
        #[serde(default)]
        tag: u32,
        word: WordSource,
    },
    RecvNoC,
}

impl LocalInstr {
    pub fn name(&self) -> &'static str {
        match self {
            Self::LoadSram { .. } => "LoadSram",
            Self::StoreSram { .. } => "StoreSram",
            Self::Program(_) => "Program",
            Self::Mvm { .. } => "Mvm",
            Self::Search { .. } => "Search",
            Self::SnnStep { .. } => "SnnStep",
            Self::PcSample { .. } => "PcSample",
            Self::SendNoC { .. } => "SendNoC",
            Self::RecvNoC => "RecvNoC",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstrResult {
    Loaded { data: Vec<u8> },
    Stored { addr: u32, len: u32 },
    Programmed { devices: usize },
    Mvm { codes: Vec<u32> },
    Search { matches: Vec<bool> },
    Spikes { spikes: Vec<bool> },
    Samples { bits: Vec<Vec<bool>> },
    Sent { dst: NodeId, tag: u32, payload: u32 },
    Received { src: NodeId, tag: u32, payload: u32 },
}

/// Work done by one instruction, in array clock cycles.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Cost {
    pub digital: u64,
    pub analog: u64,
}

impl Cost {
    fn digital(n: u64) -> Self {
        Self {
            digital: n,
            analog: 0,
        }
    }
    fn analog(n: u64) -> Self {
        Self {
            digital: 0,
            analog: n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    Done {
        result: InstrResult,
        cost: Cost,
    },
    /// Waiting on the NoC; retry on a later cycle.
    Blocked,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Execution {
    pub results: Vec<InstrResult>,
    /// Cycles on the simulation timeline.
    pub cycles: u64,
}

/// An array's attachment to the NoC.
pub trait NocPort {
    /// `Ok(false)` is backpressure.
    fn try_send(&mut self, dst: NodeId, tag: u32, payload: u32) -> Result<bool, ArrayError>;
    fn try_recv(&mut self) -> Option<NoCPacket>;
}

/// A port backed by plain queues: sends are recorded, receives come from a
/// preloaded inbox. Never backpressures.
#[derive(Debug, Clone, Default)]
pub struct BufferPort {
    pub node: NodeId,
    pub sent: Vec<NoCPacket>,
    pub inbox: VecDeque<NoCPacket>,
}

impl BufferPort {
    pub fn new(node: NodeId) -> Self {
        Self {
            node,
            ..Self::default()
        }
    }
}

impl NocPort for BufferPort {
    fn try_send(&mut self, dst: NodeId, tag: u32, payload: u32) -> Result<bool, ArrayError> {
        self.sent.push(NoCPacket::new(self.node, dst, payload, tag));
        Ok(true)
    }

    fn try_recv(&mut self) -> Option<NoCPacket> {
        self.inbox.pop_front()
    }
}

fn words(len: usize) -> u64 {
    (len as u64).div_ceil(4).max(1)
}

impl ComputeArray {
    fn sram_range(&self, addr: u32, len: u64) -> Result<usize, ArrayError> {
        let size = self.sram.len();
        if u64::from(addr) + len > size as u64 {
            return Err(ArrayError::SramOutOfRange {
                addr: u64::from(addr),
                len,
                size,
            });
        }
        Ok(addr as usize)
    }

    fn word_from(&self, src: WordSource) -> Result<u32, ArrayError> {
        match src {
            WordSource::Literal(w) => Ok(w),
            WordSource::Acc(i) => self
                .acc
                .get(i)
                .copied()
                .ok_or(ArrayError::AccumulatorEmpty(i)),
            WordSource::Sram(addr) => {
                let a = self.sram_range(addr, 4)?;
                let b = self.sram.read_slice(a, 4).expect("range checked");
                Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            }
        }
    }

    /// Executes one instruction. On `Blocked` no state has changed.
    pub fn step(
        &mut self,
        instr: &LocalInstr,
        port: &mut dyn NocPort,
    ) -> Result<StepOutcome, ArrayError> {
        let (result, cost) = match instr {
            LocalInstr::LoadSram { addr, len } => {
                let a = self.sram_range(*addr, u64::from(*len))?;
                let data = self
                    .sram
                    .read_slice(a, *len as usize)
                    .expect("range checked")
                    .to_vec();
                self.acc = data.iter().map(|&b| u32::from(b)).collect();
                (
                    InstrResult::Loaded { data },
                    Cost::digital(words(*len as usize)),
                )
            }
            LocalInstr::StoreSram { addr, data } => {
                let a = self.sram_range(*addr, data.len() as u64)?;
                self.sram.write_slice(a, data).expect("range checked");
                (
                    InstrResult::Stored {
                        addr: *addr,
                        len: data.len() as u32,
                    },
                    Cost::digital(words(data.len())),
                )
            }
            LocalInstr::Program(ProgramData::Levels { levels }) => {
                self.program_matrix(levels)?;
                let devices = self.crossbar.rows * self.crossbar.cols;
                (
                    InstrResult::Programmed { devices },
                    Cost::analog(self.crossbar.rows as u64),
                )
            }
            LocalInstr::Program(ProgramData::Ternary { ternary }) => {
                for (row, word) in ternary.iter().enumerate() {
                    self.cam_store(row, word)?;
                }
                (
                    InstrResult::Programmed {
                        devices: ternary.len() * self.crossbar.cols,
                    },
                    Cost::analog(ternary.len() as u64),
                )
            }
            LocalInstr::Program(ProgramData::File { file }) => {
                return Err(ArrayError::InvalidConfig(format!(
                    "matrix file {file} was not loaded"
                )));
            }
            LocalInstr::Mvm { input } => {
                let x = input.as_ref().unwrap_or(&self.acc);
                let codes = self.cim_mvm(x)?;
                self.acc = codes.clone();
                (
                    InstrResult::Mvm { codes },
                    Cost::analog(self.config.mvm_pipeline_cycles),
                )
            }
            LocalInstr::Search { key } => {
                let key = parse_key(key)?;
                let matches = self.cam_search(&key)?;
                self.acc = matches.iter().map(|&m| u32::from(m)).collect();
                (InstrResult::Search { matches }, Cost::analog(1))
            }
            LocalInstr::SnnStep { spikes } => {
                let input: Vec<bool> = match spikes {
                    Some(s) => s.clone(),
                    None => self.acc.iter().map(|&w| w != 0).collect(),
                };
                let spikes = self.snn_step(&input)?;
                self.acc = spikes.iter().map(|&s| u32::from(s)).collect();
                (InstrResult::Spikes { spikes }, Cost::analog(1))
            }
            LocalInstr::PcSample { n } => {
                let bits = self.pc_sample(*n as usize)?;
                self.acc = bits
                    .iter()
                    .map(|col| col.iter().filter(|&&b| b).count() as u32)
                    .collect();
                (
                    InstrResult::Samples { bits },
                    Cost::analog(u64::from(*n).max(1)),
                )
            }
            LocalInstr::SendNoC { dst, tag, word } => {
                let dst = match dst {
                    Target::Node(n) => *n,
                    Target::Sender => self.last_sender.ok_or(ArrayError::NoSender)?,
                };
                let payload = self.word_from(*word)?;
                if !port.try_send(dst, *tag, payload)? {
                    return Ok(StepOutcome::Blocked);
                }
                (
                    InstrResult::Sent {
                        dst,
                        tag: *tag,
                        payload,
                    },
                    Cost::digital(1),
                )
            }
            LocalInstr::RecvNoC => match port.try_recv() {
                None => return Ok(StepOutcome::Blocked),
                Some(p) => {
                    self.acc = vec![p.payload];
                    self.last_sender = Some(p.src);
                    (
                        InstrResult::Received {
                            src: p.src,
                            tag: p.tag,
                            payload: p.payload,
                        },
                        Cost::digital(1),
                    )
                }
            },
        };
        Ok(StepOutcome::Done { result, cost })
    }

    /// Converts array clock cycles to cycles of a timeline running at
    /// `timeline_hz`, with the digital clock divided by `divider`.
    pub fn timeline_cycles(&self, cost: Cost, timeline_hz: u64, divider: u64) -> u64 {
        let per_digital = timeline_hz.div_ceil(self.config.digital_clock_hz) * divider.max(1);
        let per_analog = timeline_hz.div_ceil(self.config.analog_clock_hz);
        cost.digital * per_digital + cost.analog * per_analog
    }

    /// Runs a whole program outside the simulation kernel. Any instruction
    /// that would wait on the NoC fails with `WouldBlock`.
    pub fn execute(
        &mut self,
        program: &[LocalInstr],
        port: &mut dyn NocPort,
        timeline_hz: u64,
    ) -> Result<Execution, ArrayError> {
        let mut results = Vec::with_capacity(program.len());
        let mut cycles = 0;
        for (pc, instr) in program.iter().enumerate() {
            match self.step(instr, port)? {
                StepOutcome::Done { result, cost } => {
                    cycles += self.timeline_cycles(cost, timeline_hz, 1);
                    results.push(result);
                }
                StepOutcome::Blocked => return Err(ArrayError::WouldBlock { pc }),
            }
        }
        Ok(Execution { results, cycles })
    }
}
