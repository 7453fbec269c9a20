//! Computing Arrays: a memristor crossbar behind DAC/ADC converters, a local
//! controller and 32 KB of local SRAM.
//!
//! Each array runs one paradigm, chosen when the array is built:
//!
//! * `CiM` - analog matrix-vector multiply over column currents.
//! * `CAM` - ternary content-addressable memory, two devices per cell.
//! * `SNN` - leaky integrate-and-fire neurons, one per column, with crossbar
//!   conductances as synaptic weights.
//! * `PC`  - stochastic bit streams drawn from row-0 device conductances.

mod exec;

pub use exec::{
    BufferPort, Cost, Execution, InstrResult, LocalInstr, NocPort, ProgramData, StepOutcome,
    Target, WordSource,
};

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::memristor::{self, DeviceError, DeviceEvent, DeviceParams, DeviceState};
use crate::noc::NocError;
use crate::seed;
use crate::sram::{Sram, CA_SRAM_BYTES};

pub const CA_COUNT: usize = 7;
pub const MAX_CONVERTER_BITS: u32 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Paradigm {
    CiM,
    CAM,
    SNN,
    PC,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ArrayError {
    #[error("operation needs paradigm {expected:?}, array runs {actual:?}")]
    WrongParadigm {
        expected: Paradigm,
        actual: Paradigm,
    },
    #[error("device ({row}, {col}) not formed")]
    NotFormed { row: usize, col: usize },
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("input {index} = {code} exceeds converter maximum {max}")]
    InputOutOfRange { index: usize, code: u32, max: u32 },
    #[error("bad ternary symbol {symbol:?} at position {position}")]
    BadTernarySymbol { symbol: char, position: usize },
    #[error("row {row} out of range ({rows} rows)")]
    RowOutOfRange { row: usize, rows: usize },
    #[error("SRAM access {addr}+{len} outside {size} bytes")]
    SramOutOfRange { addr: u64, len: u64, size: usize },
    #[error("device ({row}, {col}): {source}")]
    Device {
        row: usize,
        col: usize,
        source: DeviceError,
    },
    #[error("accumulator has no word {0}")]
    AccumulatorEmpty(usize),
    #[error("no sender to reply to")]
    NoSender,
    #[error("instruction {pc} would block outside the simulation kernel")]
    WouldBlock { pc: usize },
    #[error("invalid array configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Noc(#[from] NocError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnnParams {
    pub alpha: f64,
    pub threshold: f64,
    pub v_reset: f64,
    pub refractory: u32,
}

impl Default for SnnParams {
    fn default() -> Self {
        Self {
            alpha: 0.9,
            threshold: 1.0,
            v_reset: 0.0,
            refractory: 2,
        }
    }
}

fn default_rows() -> usize {
    64
}
fn default_bits() -> u32 {
    8
}
fn default_v_read() -> f64 {
    0.2
}
fn default_digital_hz() -> u64 {
    1_000_000_000
}
fn default_analog_hz() -> u64 {
    100_000_000
}
fn default_pipeline() -> u64 {
    1
}
fn default_sram() -> usize {
    CA_SRAM_BYTES
}

/// Per-array configuration, stored with each compute-array block of the chip
/// description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayConfig {
    pub paradigm: Paradigm,
    #[serde(default = "default_rows")]
    pub rows: usize,
    #[serde(default = "default_rows")]
    pub cols: usize,
    #[serde(default = "default_bits")]
    pub dac_bits: u32,
    #[serde(default = "default_bits")]
    pub adc_bits: u32,
    #[serde(default = "default_v_read")]
    pub v_read_v: f64,
    #[serde(default = "default_digital_hz")]
    pub digital_clock_hz: u64,
    #[serde(default = "default_analog_hz")]
    pub analog_clock_hz: u64,
    #[serde(default = "default_pipeline")]
    pub mvm_pipeline_cycles: u64,
    #[serde(default = "default_sram")]
    pub local_sram_bytes: usize,
    #[serde(default)]
    pub device: DeviceParams,
    #[serde(default)]
    pub snn: SnnParams,
}

impl ArrayConfig {
    pub fn new(paradigm: Paradigm) -> Self {
        Self {
            paradigm,
            rows: default_rows(),
            cols: default_rows(),
            dac_bits: default_bits(),
            adc_bits: default_bits(),
            v_read_v: default_v_read(),
            digital_clock_hz: default_digital_hz(),
            analog_clock_hz: default_analog_hz(),
            mvm_pipeline_cycles: default_pipeline(),
            local_sram_bytes: default_sram(),
            device: DeviceParams::default(),
            snn: SnnParams::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ArrayError> {
        let bad = |m: String| Err(ArrayError::InvalidConfig(m));
        if self.rows == 0 || self.cols == 0 {
            return bad("crossbar needs at least one row and column".into());
        }
        for (name, bits) in [("dac_bits", self.dac_bits), ("adc_bits", self.adc_bits)] {
            if !(1..=MAX_CONVERTER_BITS).contains(&bits) {
                return bad(format!("{name} = {bits} outside [1, {MAX_CONVERTER_BITS}]"));
            }
        }
        if self.paradigm == Paradigm::CAM && !self.cols.is_multiple_of(2) {
            return bad("CAM needs an even column count".into());
        }
        if !(self.v_read_v > 0.0 && self.v_read_v <= self.device.v_read_max_v) {
            return bad(format!(
                "v_read_v {} outside (0, {}]",
                self.v_read_v, self.device.v_read_max_v
            ));
        }
        if self.digital_clock_hz == 0 || self.digital_clock_hz > 1_000_000_000 {
            return bad("digital clock must be in (0, 1 GHz]".into());
        }
        if self.analog_clock_hz == 0 || self.analog_clock_hz > 100_000_000 {
            return bad("analog clock must be in (0, 100 MHz]".into());
        }
        if self.mvm_pipeline_cycles == 0 {
            return bad("mvm pipeline must be at least one cycle".into());
        }
        self.device
            .validate()
            .map_err(|e| ArrayError::InvalidConfig(e.to_string()))
    }
}

/// Memristor events seen by one array, for energy accounting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub forms: u64,
    pub sets: u64,
    pub resets: u64,
}

impl EventCounts {
    fn record(&mut self, ev: DeviceEvent) {
        match ev {
            DeviceEvent::Form => self.forms += 1,
            DeviceEvent::Set => self.sets += 1,
            DeviceEvent::Reset => self.resets += 1,
        }
    }

    pub fn add(&mut self, other: &EventCounts) {
        self.forms += other.forms;
        self.sets += other.sets;
        self.resets += other.resets;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Crossbar {
    pub rows: usize,
    pub cols: usize,
    pub dac_bits: u32,
    pub adc_bits: u32,
    pub v_read_v: f64,
    pub params: DeviceParams,
    devices: Vec<DeviceState>,
}

impl Crossbar {
    /// All devices start virgin. `id_base` keeps device identities distinct
    /// across arrays.
    pub fn new(config: &ArrayConfig, id_base: u64) -> Self {
        let n = config.rows * config.cols;
        Self {
            rows: config.rows,
            cols: config.cols,
            dac_bits: config.dac_bits,
            adc_bits: config.adc_bits,
            v_read_v: config.v_read_v,
            params: config.device.clone(),
            devices: (0..n as u64)
                .map(|i| DeviceState::virgin(id_base + i))
                .collect(),
        }
    }

    pub fn device(&self, row: usize, col: usize) -> &DeviceState {
        &self.devices[row * self.cols + col]
    }

    pub fn devices(&self) -> &[DeviceState] {
        &self.devices
    }

    pub fn dac_max(&self) -> u32 {
        (1u32 << self.dac_bits) - 1
    }

    pub fn adc_max(&self) -> u32 {
        (1u32 << self.adc_bits) - 1
    }

    pub fn first_unformed(&self) -> Option<(usize, usize)> {
        self.devices
            .iter()
            .position(|d| !d.is_formed())
            .map(|i| (i / self.cols, i % self.cols))
    }

    fn require_formed(&self) -> Result<(), ArrayError> {
        match self.first_unformed() {
            Some((row, col)) => Err(ArrayError::NotFormed { row, col }),
            None => Ok(()),
        }
    }

    pub fn form_device(&mut self, row: usize, col: usize, v: f64) -> Result<(), ArrayError> {
        let i = row * self.cols + col;
        let next = self.devices[i]
            .form(v, &self.params)
            .map_err(|source| ArrayError::Device { row, col, source })?;
        self.devices[i] = next;
        Ok(())
    }

    /// Forms every virgin device. Returns the number of forming events.
    pub fn form_all(&mut self, v: f64) -> Result<u64, ArrayError> {
        let mut formed = 0;
        for i in 0..self.devices.len() {
            if !self.devices[i].is_formed() {
                self.form_device(i / self.cols, i % self.cols, v)?;
                formed += 1;
            }
        }
        Ok(formed)
    }

    fn write(&mut self, row: usize, col: usize, level: u32) -> Result<DeviceEvent, ArrayError> {
        let i = row * self.cols + col;
        let next =
            self.devices[i]
                .set_level(level, &self.params)
                .map_err(|source| match source {
                    DeviceError::NotFormed => ArrayError::NotFormed { row, col },
                    source => ArrayError::Device { row, col, source },
                })?;
        self.devices[i] = next;
        Ok(memristor::write_event(level))
    }

    /// Validates shape, formation and level range before touching any device,
    /// so a failed call leaves the crossbar unchanged.
    pub fn program(&mut self, levels: &[Vec<u32>]) -> Result<EventCounts, ArrayError> {
        let got_cols = levels.first().map_or(0, Vec::len);
        if levels.len() != self.rows || levels.iter().any(|r| r.len() != self.cols) {
            return Err(ArrayError::ShapeMismatch {
                expected: (self.rows, self.cols),
                got: (levels.len(), got_cols),
            });
        }
        self.require_formed()?;
        for (row, r) in levels.iter().enumerate() {
            for (col, &level) in r.iter().enumerate() {
                if level >= self.params.levels {
                    return Err(ArrayError::Device {
                        row,
                        col,
                        source: DeviceError::LevelOutOfRange {
                            level,
                            levels: self.params.levels,
                        },
                    });
                }
            }
        }
        let mut events = EventCounts::default();
        for (row, r) in levels.iter().enumerate() {
            for (col, &level) in r.iter().enumerate() {
                events.record(self.write(row, col, level)?);
            }
        }
        Ok(events)
    }

    /// Normalized synaptic weight of a device in [0, 1].
    fn weight(&self, row: usize, col: usize) -> f64 {
        let p = &self.params;
        (self.device(row, col).g_us - p.g_min_us) / (p.g_max_us - p.g_min_us)
    }

    /// Column currents in µA for the given DAC codes.
    pub fn column_currents(&self, x: &[u32]) -> Result<Vec<f64>, ArrayError> {
        if x.len() != self.rows {
            return Err(ArrayError::ShapeMismatch {
                expected: (self.rows, 1),
                got: (x.len(), 1),
            });
        }
        let dac_max = self.dac_max();
        if let Some((index, &code)) = x.iter().enumerate().find(|(_, &c)| c > dac_max) {
            return Err(ArrayError::InputOutOfRange {
                index,
                code,
                max: dac_max,
            });
        }
        self.require_formed()?;
        let volts: Vec<f64> = x
            .iter()
            .map(|&c| self.v_read_v * f64::from(c) / f64::from(dac_max))
            .collect();
        let mut currents = vec![0.0; self.cols];
        for (row, &v) in volts.iter().enumerate() {
            for (col, acc) in currents.iter_mut().enumerate() {
                *acc += self
                    .device(row, col)
                    .read_current(v, &self.params)
                    .map_err(|source| ArrayError::Device { row, col, source })?;
            }
        }
        Ok(currents)
    }

    /// ADC full scale: every device in a column at g_max, every input at
    /// full DAC code.
    pub fn full_scale_ua(&self) -> f64 {
        self.rows as f64 * self.params.g_max_us * self.v_read_v
    }

    pub fn quantize(&self, current_ua: f64) -> u32 {
        let max = self.adc_max();
        let code = (current_ua / self.full_scale_ua() * f64::from(max)).round();
        code.clamp(0.0, f64::from(max)) as u32
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Neuron {
    pub membrane_v: f64,
    pub refractory_left: u32,
}

#[derive(Debug, Clone)]
pub struct ComputeArray {
    pub id: u8,
    config: ArrayConfig,
    pub crossbar: Crossbar,
    pub sram: Sram,
    neurons: Vec<Neuron>,
    cam_stored: Vec<bool>,
    pc_rng: ChaCha8Rng,
    events: EventCounts,
    acc: Vec<u32>,
    last_sender: Option<u8>,
}

/// Keeps device identities of different arrays apart.
const DEVICE_ID_STRIDE: u64 = 1 << 32;
const PC_STREAM: u64 = 0x5043;

impl ComputeArray {
    pub fn new(id: u8, config: ArrayConfig, chip_seed: u64) -> Result<Self, ArrayError> {
        config.validate()?;
        let crossbar = Crossbar::new(&config, u64::from(id) * DEVICE_ID_STRIDE);
        Ok(Self {
            id,
            sram: Sram::new(config.local_sram_bytes),
            neurons: vec![Neuron::default(); config.cols],
            cam_stored: vec![false; config.rows],
            pc_rng: seed::rng(&[chip_seed, u64::from(id), PC_STREAM]),
            events: EventCounts::default(),
            acc: Vec::new(),
            last_sender: None,
            crossbar,
            config,
        })
    }

    pub fn config(&self) -> &ArrayConfig {
        &self.config
    }

    pub fn paradigm(&self) -> Paradigm {
        self.config.paradigm
    }

    pub fn events(&self) -> EventCounts {
        self.events
    }

    pub fn neurons(&self) -> &[Neuron] {
        &self.neurons
    }

    pub fn accumulator(&self) -> &[u32] {
        &self.acc
    }

    fn expect(&self, p: Paradigm) -> Result<(), ArrayError> {
        if self.config.paradigm == p {
            Ok(())
        } else {
            Err(ArrayError::WrongParadigm {
                expected: p,
                actual: self.config.paradigm,
            })
        }
    }

    /// Reconfigures the array for another paradigm. Device states are kept;
    /// neuron and CAM bookkeeping start fresh.
    pub fn set_paradigm(&mut self, paradigm: Paradigm) -> Result<(), ArrayError> {
        if paradigm == self.config.paradigm {
            return Ok(());
        }
        let mut config = self.config.clone();
        config.paradigm = paradigm;
        config.validate()?;
        self.config = config;
        self.neurons = vec![Neuron::default(); self.crossbar.cols];
        self.cam_stored = vec![false; self.crossbar.rows];
        Ok(())
    }

    pub fn form_all(&mut self, v: f64) -> Result<u64, ArrayError> {
        let n = self.crossbar.form_all(v)?;
        self.events.forms += n;
        Ok(n)
    }

    pub fn program_matrix(&mut self, levels: &[Vec<u32>]) -> Result<(), ArrayError> {
        let ev = self.crossbar.program(levels)?;
        self.events.add(&ev);
        Ok(())
    }

    pub fn cim_mvm(&self, x: &[u32]) -> Result<Vec<u32>, ArrayError> {
        self.expect(Paradigm::CiM)?;
        let currents = self.crossbar.column_currents(x)?;
        Ok(currents
            .iter()
            .map(|&i| self.crossbar.quantize(i))
            .collect())
    }

    pub fn cam_width(&self) -> usize {
        self.crossbar.cols / 2
    }

    pub fn cam_store(&mut self, row: usize, word: &str) -> Result<(), ArrayError> {
        self.expect(Paradigm::CAM)?;
        let cells = parse_ternary(word)?;
        let rows = self.crossbar.rows;
        if row >= rows {
            return Err(ArrayError::RowOutOfRange { row, rows });
        }
        if cells.len() != self.cam_width() {
            return Err(ArrayError::ShapeMismatch {
                expected: (1, self.cam_width()),
                got: (1, cells.len()),
            });
        }
        let cols = self.crossbar.cols;
        if let Some(col) = (0..cols).find(|&c| !self.crossbar.device(row, c).is_formed()) {
            return Err(ArrayError::NotFormed { row, col });
        }
        let top = self.crossbar.params.levels - 1;
        for (j, cell) in cells.iter().enumerate() {
            let (a, b) = match cell {
                Ternary::One => (top, 0),
                Ternary::Zero => (0, top),
                Ternary::DontCare => (0, 0),
            };
            let ea = self.crossbar.write(row, 2 * j, a)?;
            let eb = self.crossbar.write(row, 2 * j + 1, b)?;
            self.events.record(ea);
            self.events.record(eb);
        }
        self.cam_stored[row] = true;
        Ok(())
    }

    /// One match bit per crossbar row. Rows never stored report no match.
    pub fn cam_search(&self, key: &[bool]) -> Result<Vec<bool>, ArrayError> {
        self.expect(Paradigm::CAM)?;
        let width = self.cam_width();
        if key.len() != width {
            return Err(ArrayError::ShapeMismatch {
                expected: (1, width),
                got: (1, key.len()),
            });
        }
        self.crossbar.require_formed()?;
        let xb = &self.crossbar;
        let p = &xb.params;
        let v = xb.v_read_v;
        // A matching row leaks only g_min per cell; a single mismatching cell
        // adds at least (g_max - g_min).
        let threshold = (width as f64 * p.g_min_us + 0.5 * (p.g_max_us - p.g_min_us)) * v;
        let mut out = Vec::with_capacity(xb.rows);
        for row in 0..xb.rows {
            if !self.cam_stored[row] {
                out.push(false);
                continue;
            }
            let mut ml = 0.0;
            for (j, &bit) in key.iter().enumerate() {
                let col = if bit { 2 * j + 1 } else { 2 * j };
                ml += xb
                    .device(row, col)
                    .read_current(v, p)
                    .map_err(|source| ArrayError::Device { row, col, source })?;
            }
            out.push(ml < threshold);
        }
        Ok(out)
    }

    pub fn snn_step(&mut self, in_spikes: &[bool]) -> Result<Vec<bool>, ArrayError> {
        self.expect(Paradigm::SNN)?;
        let xb = &self.crossbar;
        if in_spikes.len() != xb.rows {
            return Err(ArrayError::ShapeMismatch {
                expected: (xb.rows, 1),
                got: (in_spikes.len(), 1),
            });
        }
        xb.require_formed()?;
        let snn = &self.config.snn;
        let mut out = vec![false; xb.cols];
        for (col, neuron) in self.neurons.iter_mut().enumerate() {
            if neuron.refractory_left > 0 {
                neuron.refractory_left -= 1;
                continue;
            }
            let input: f64 = in_spikes
                .iter()
                .enumerate()
                .filter(|(_, &s)| s)
                .map(|(row, _)| xb.weight(row, col))
                .sum();
            neuron.membrane_v = snn.alpha * neuron.membrane_v + input;
            if neuron.membrane_v >= snn.threshold {
                out[col] = true;
                neuron.membrane_v = snn.v_reset;
                neuron.refractory_left = snn.refractory;
            }
        }
        Ok(out)
    }

    /// `n` stochastic bits per column, drawn from the row-0 device of that
    /// column. Returned as `cols` rows of `n` bits.
    pub fn pc_sample(&mut self, n: usize) -> Result<Vec<Vec<bool>>, ArrayError> {
        self.expect(Paradigm::PC)?;
        self.crossbar.require_formed()?;
        let xb = &self.crossbar;
        let mut out = Vec::with_capacity(xb.cols);
        for col in 0..xb.cols {
            let dev = xb.device(0, col);
            let bits = (0..n)
                .map(|_| {
                    dev.sample_bernoulli(&xb.params, &mut self.pc_rng)
                        .map_err(|source| ArrayError::Device {
                            row: 0,
                            col,
                            source,
                        })
                })
                .collect::<Result<Vec<_>, _>>()?;
            out.push(bits);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ternary {
    Zero,
    One,
    DontCare,
}

pub fn parse_ternary(word: &str) -> Result<Vec<Ternary>, ArrayError> {
    word.chars()
        .enumerate()
        .map(|(position, symbol)| match symbol {
            '0' => Ok(Ternary::Zero),
            '1' => Ok(Ternary::One),
            'X' | 'x' => Ok(Ternary::DontCare),
            _ => Err(ArrayError::BadTernarySymbol { symbol, position }),
        })
        .collect()
}

pub fn parse_key(key: &str) -> Result<Vec<bool>, ArrayError> {
    key.chars()
        .enumerate()
        .map(|(position, symbol)| match symbol {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(ArrayError::BadTernarySymbol { symbol, position }),
        })
        .collect()
}

#[cfg(test)]
mod tests;
