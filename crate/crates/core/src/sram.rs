//! Byte-addressed SRAM model with injectable stuck-at faults.

use serde::{Deserialize, Serialize};

pub const CA_SRAM_BYTES: usize = 32 * 1024;
pub const SHARED_SRAM_BYTES: usize = 64 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StuckAt {
    pub addr: usize,
    pub bit: u8,
    pub value: bool,
}

impl StuckAt {
    fn apply(&self, byte: u8) -> u8 {
        let mask = 1u8 << self.bit;
        if self.value {
            byte | mask
        } else {
            byte & !mask
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sram {
    cells: Vec<u8>,
    faults: Vec<StuckAt>,
}

impl Sram {
    pub fn new(bytes: usize) -> Self {
        Self {
            cells: vec![0; bytes],
            faults: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Panics if `fault.addr` is out of range or `fault.bit > 7`.
    pub fn inject(&mut self, fault: StuckAt) {
        assert!(fault.addr < self.cells.len() && fault.bit < 8);
        self.faults.push(fault);
        let stored = self.cells[fault.addr];
        self.cells[fault.addr] = fault.apply(stored);
    }

    pub fn clear_faults(&mut self) {
        self.faults.clear();
    }

    pub fn faults(&self) -> &[StuckAt] {
        &self.faults
    }

    fn masked(&self, addr: usize, byte: u8) -> u8 {
        self.faults
            .iter()
            .filter(|f| f.addr == addr)
            .fold(byte, |b, f| f.apply(b))
    }

    pub fn read(&self, addr: usize) -> Option<u8> {
        self.cells.get(addr).copied()
    }

    pub fn write(&mut self, addr: usize, byte: u8) -> Option<()> {
        let value = self.masked(addr, byte);
        let cell = self.cells.get_mut(addr)?;
        *cell = value;
        Some(())
    }

    pub fn read_slice(&self, addr: usize, len: usize) -> Option<&[u8]> {
        let end = addr.checked_add(len)?;
        self.cells.get(addr..end)
    }

    pub fn write_slice(&mut self, addr: usize, data: &[u8]) -> Option<()> {
        let end = addr.checked_add(data.len())?;
        if end > self.cells.len() {
            return None;
        }
        for (i, &b) in data.iter().enumerate() {
            self.write(addr + i, b)?;
        }
        Some(())
    }
}
