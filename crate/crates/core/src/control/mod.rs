//! Control plane: the dual-bank register file programmed over JTAG, the two
//! interrupt lines, the AXI stream to the processor, the sequencer program
//! format, and the test machinery (MBIST, scan chain).
//!
//! Register map (byte addresses, 32-bit registers, both banks identical):
//!
//! | addr          | name          | meaning                                    |
//! |---------------|---------------|--------------------------------------------|
//! | 0x04          | CTRL          | bit 0: disable NoC monitor on the bridge   |
//! | 0x10 + 4*i    | CA_DIV[i]     | digital clock divider of CA i (0 means 1)  |
//! | 0x30 + 4*i    | CA_MODE[i]    | bit 8: override, bits 1:0 paradigm         |
//! | 0x50 + 4*s    | RX_ROUTE[s]   | bit 8: route valid, bits 3:0 target node   |
//!
//! Other addresses up to 0xFC are scratch. An unrouted inbound bridge
//! stream goes to the processor, except the monitor stream, which is
//! discarded.

mod mbist;
mod scan;
mod sequencer;

pub use mbist::{mbist_run, MbistResult};
pub use scan::{scan_chain_check, ScanChain, ScanResult};
pub use sequencer::{SeqInstr, SeqTraceEntry, SeqWord};

use std::collections::VecDeque;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arrays::{Paradigm, CA_COUNT};
use crate::bridge::STREAM_MONITOR;
use crate::noc::{NodeId, PROCESSOR_NODE};

pub const REGISTERS: usize = 64;
pub const REG_CTRL: u32 = 0x04;
pub const CTRL_MONITOR_OFF: u32 = 1;
pub const ROUTE_VALID: u32 = 1 << 8;
pub const MODE_OVERRIDE: u32 = 1 << 8;

pub fn reg_ca_div(ca: usize) -> u32 {
    0x10 + 4 * ca as u32
}

pub fn reg_ca_mode(ca: usize) -> u32 {
    0x30 + 4 * ca as u32
}

pub fn reg_rx_route(stream: u8) -> u32 {
    0x50 + 4 * u32::from(stream)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ControlError {
    #[error("register address {0:#x} outside the map or unaligned")]
    BadAddress(u32),
    #[error("no register bank {0}")]
    BadBank(u8),
    #[error("scan enable is low")]
    ScanDisabled,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterFile {
    banks: [[u32; REGISTERS]; 2],
    active: u8,
}

impl Default for RegisterFile {
    fn default() -> Self {
        Self {
            banks: [[0; REGISTERS]; 2],
            active: 0,
        }
    }
}

fn index(addr: u32) -> Result<usize, ControlError> {
    if !addr.is_multiple_of(4) || addr as usize / 4 >= REGISTERS {
        return Err(ControlError::BadAddress(addr));
    }
    Ok(addr as usize / 4)
}

impl RegisterFile {
    pub fn jtag_write(&mut self, bank: u8, addr: u32, value: u32) -> Result<(), ControlError> {
        let i = index(addr)?;
        let b = self
            .banks
            .get_mut(usize::from(bank))
            .ok_or(ControlError::BadBank(bank))?;
        b[i] = value;
        Ok(())
    }

    pub fn jtag_read(&self, bank: u8, addr: u32) -> Result<u32, ControlError> {
        let i = index(addr)?;
        let b = self
            .banks
            .get(usize::from(bank))
            .ok_or(ControlError::BadBank(bank))?;
        Ok(b[i])
    }

    pub fn active_bank(&self) -> u8 {
        self.active
    }

    /// Called by the kernel at a cycle boundary.
    pub fn select_bank(&mut self, bank: u8) {
        self.active = bank & 1;
    }

    /// Value of a register in the active bank.
    pub fn active(&self, addr: u32) -> Result<u32, ControlError> {
        self.jtag_read(self.active, addr)
    }

    pub fn config(&self) -> ActiveConfig {
        let reg = |a: u32| self.active(a).expect("mapped register");
        ActiveConfig {
            ca_dividers: std::array::from_fn(|i| u64::from(reg(reg_ca_div(i))).max(1)),
            ca_modes: std::array::from_fn(|i| {
                let v = reg(reg_ca_mode(i));
                (v & MODE_OVERRIDE != 0).then(|| paradigm_from_bits(v))
            }),
            monitor_enabled: reg(REG_CTRL) & CTRL_MONITOR_OFF == 0,
            rx_routes: std::array::from_fn(|s| {
                let v = reg(reg_rx_route(s as u8));
                if v & ROUTE_VALID != 0 {
                    Some((v & 0xF) as NodeId)
                } else if s as u8 == STREAM_MONITOR {
                    None
                } else {
                    Some(PROCESSOR_NODE)
                }
            }),
        }
    }
}

pub fn paradigm_from_bits(v: u32) -> Paradigm {
    match v & 0b11 {
        0 => Paradigm::CiM,
        1 => Paradigm::CAM,
        2 => Paradigm::SNN,
        _ => Paradigm::PC,
    }
}

pub fn paradigm_bits(p: Paradigm) -> u32 {
    match p {
        Paradigm::CiM => 0,
        Paradigm::CAM => 1,
        Paradigm::SNN => 2,
        Paradigm::PC => 3,
    }
}

/// The configuration every consumer sees during one cycle, decoded from the
/// active bank.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ActiveConfig {
    pub ca_dividers: [u64; CA_COUNT],
    pub ca_modes: [Option<Paradigm>; CA_COUNT],
    pub monitor_enabled: bool,
    /// Target node per inbound bridge stream; `None` discards.
    pub rx_routes: [Option<NodeId>; 4],
}

/// The asynchronous `irq_in` line. Clones share the line, so a handle can be
/// driven from outside the simulation; the kernel samples it at cycle
/// boundaries.
#[derive(Debug, Clone, Default)]
pub struct IrqIn(Arc<AtomicBool>);

impl IrqIn {
    pub fn set(&self, level: bool) {
        self.0.store(level, Ordering::SeqCst);
    }

    pub fn level(&self) -> bool {
        self.0.load(Ordering::SeqCst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IrqCause {
    Ready,
    SoftError,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IrqEvent {
    pub cycle: u64,
    pub source: String,
    pub cause: IrqCause,
}

/// The `irq_out` line and its event log. The line stays high until the
/// host acknowledges.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IrqOut {
    pub level: bool,
    pub events: Vec<IrqEvent>,
}

impl IrqOut {
    pub fn raise(&mut self, cycle: u64, source: &str, cause: IrqCause) -> IrqEvent {
        let ev = IrqEvent {
            cycle,
            source: source.to_string(),
            cause,
        };
        self.level = true;
        self.events.push(ev.clone());
        ev
    }

    pub fn ack(&mut self) {
        self.level = false;
    }
}

/// AXI stream between the external processor and the sequencer. Of the 15
/// lines, 8 carry data; the rest are handshake and sideband. Each direction
/// moves at most one byte per line period (10 ns at 100 Mbit/s).
#[derive(Debug, Clone, Default)]
pub struct AxiStream {
    cycles_per_byte: u64,
    pending_in: VecDeque<u8>,
    pub mailbox: VecDeque<u8>,
    pending_out: VecDeque<u8>,
    pub host_rx: Vec<u8>,
    next_in: u64,
    next_out: u64,
    pub bytes_moved: u64,
}

pub const AXI_DATA_LINES: u32 = 8;
pub const AXI_LINE_BPS: u64 = 100_000_000;

impl AxiStream {
    pub fn new(timeline_hz: u64) -> Self {
        Self {
            cycles_per_byte: timeline_hz.div_ceil(AXI_LINE_BPS).max(1),
            ..Self::default()
        }
    }

    /// Host side: queue bytes toward the sequencer mailbox.
    pub fn host_send(&mut self, bytes: &[u8]) {
        self.pending_in.extend(bytes);
    }

    /// Sequencer side: queue bytes toward the host.
    pub fn send_to_host(&mut self, bytes: &[u8]) {
        self.pending_out.extend(bytes);
    }

    pub fn is_idle(&self) -> bool {
        self.pending_in.is_empty() && self.pending_out.is_empty()
    }

    /// Moves at most one byte per direction when the line period allows.
    /// Returns whether anything moved.
    pub fn tick(&mut self, cycle: u64) -> bool {
        let mut moved = false;
        if cycle >= self.next_in {
            if let Some(b) = self.pending_in.pop_front() {
                self.mailbox.push_back(b);
                self.next_in = cycle + self.cycles_per_byte;
                self.bytes_moved += 1;
                moved = true;
            }
        }
        if cycle >= self.next_out {
            if let Some(b) = self.pending_out.pop_front() {
                self.host_rx.push(b);
                self.next_out = cycle + self.cycles_per_byte;
                self.bytes_moved += 1;
                moved = true;
            }
        }
        moved
    }
}
