//! Workloads, simulation runs and the files a run produces.
//!
//! Output formats:
//!
//! - report: JSON (`SimReport`), or aligned text via `SimReport::to_text`;
//! - NoC trace: CSV with header `cycle,src,dst,tag,event`;
//! - monitor capture: packed little-endian records of 13 bytes
//!   (`beat: u64`, `stream: u8`, `word: u32`).
//!
//! Each format has a matching reader.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arrays::{LocalInstr, ProgramData, CA_COUNT};
use crate::bridge::{BridgeStats, MonitorRecord, ReadyPattern};
use crate::budget::{energy_report, ActivityLog, EnergyTrace};
use crate::chipdesc::ChipDescription;
use crate::control::{IrqEvent, MbistResult, ScanResult, SeqInstr, SeqTraceEntry};
use crate::noc::{NocStats, TraceEvent};
use crate::seed;
use crate::sram::StuckAt;
use crate::system::{CaStatus, System, SystemError, TrafficSpec};

pub const MONITOR_RECORD_BYTES: usize = 13;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid workload: {0}")]
    Workload(String),
    #[error("monitor capture length {0} is not a multiple of {MONITOR_RECORD_BYTES}")]
    MonitorLength(usize),
    #[error(transparent)]
    System(#[from] SystemError),
}

pub fn read_file(path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

pub fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), HarnessError> {
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

fn io_err(path: &Path, e: std::io::Error) -> HarnessError {
    HarnessError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaProgram {
    pub ca: usize,
    pub program: Vec<LocalInstr>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IrqChange {
    pub cycle: u64,
    pub level: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegWrite {
    pub bank: u8,
    pub addr: u32,
    pub value: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RxByte {
    pub addr: u8,
    pub byte: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Workload {
    pub name: String,
    #[serde(default)]
    pub duration_cycles: u64,
    #[serde(default)]
    pub seed: u64,
    /// Register writes applied over JTAG before the first cycle.
    #[serde(default)]
    pub registers: Vec<RegWrite>,
    /// Forms every device at this voltage before the first cycle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub form_voltage_v: Option<f64>,
    #[serde(default)]
    pub programs: Vec<CaProgram>,
    #[serde(default)]
    pub sequencer: Vec<SeqInstr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub traffic: Option<TrafficSpec>,
    #[serde(default = "always_ready")]
    pub monitor: ReadyPattern,
    #[serde(default)]
    pub irq_schedule: Vec<IrqChange>,
    /// Bytes the host sends to the sequencer mailbox.
    #[serde(default)]
    pub axi_in: Vec<u8>,
    #[serde(default)]
    pub bridge_rx: Vec<RxByte>,
}

fn always_ready() -> ReadyPattern {
    ReadyPattern::Always
}

impl Workload {
    pub fn empty(name: &str) -> Self {
        Self {
            name: name.into(),
            duration_cycles: 0,
            seed: 0,
            registers: Vec::new(),
            form_voltage_v: None,
            programs: Vec::new(),
            sequencer: Vec::new(),
            traffic: None,
            monitor: ReadyPattern::Always,
            irq_schedule: Vec::new(),
            axi_in: Vec::new(),
            bridge_rx: Vec::new(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let w: Self = serde_json::from_str(text)?;
        w.validate()?;
        Ok(w)
    }

    /// Reads a workload and inlines matrix files, resolved relative to the
    /// workload's directory.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let mut w: Self = serde_json::from_str(&read_file(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in &mut w.programs {
            for instr in &mut p.program {
                if let LocalInstr::Program(ProgramData::File { file }) = instr {
                    let fpath = base.join(&*file);
                    let levels: Vec<Vec<u32>> = serde_json::from_str(&read_file(&fpath)?)?;
                    *instr = LocalInstr::Program(ProgramData::Levels { levels });
                }
            }
        }
        w.validate()?;
        Ok(w)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("workload serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Workload(m));
        if let Some(t) = &self.traffic {
            if !(0.0..=1.0).contains(&t.rate) {
                return bad(format!("injection rate {} outside [0, 1]", t.rate));
            }
        }
        if let Some(p) = self.programs.iter().find(|p| p.ca >= CA_COUNT) {
            return bad(format!("no compute array {}", p.ca));
        }
        if let ReadyPattern::Ratio { den: 0, .. } = self.monitor {
            return bad("ready ratio with zero denominator".into());
        }
        if !self
            .irq_schedule
            .windows(2)
            .all(|w| w[0].cycle <= w[1].cycle)
        {
            return bad("irq schedule not sorted by cycle".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SimOptions {
    pub trace: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorSummary {
    pub ready: ReadyPattern,
    pub captured_words: u64,
    pub beats_accepted: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequencerSummary {
    pub halted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub trace: Vec<SeqTraceEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub workload: String,
    pub seed: u64,
    pub cycles: u64,
    pub noc: NocStats,
    pub bridge: BridgeStats,
    pub monitor: MonitorSummary,
    pub inbound_discarded: u64,
    pub arrays: Vec<CaStatus>,
    pub sequencer: SequencerSummary,
    pub irq_events: Vec<IrqEvent>,
    pub axi_to_host: Vec<u8>,
    pub activity: ActivityLog,
    pub energy: EnergyTrace,
}

impl SimReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let row = |s: &mut String, k: &str, v: String| {
            let _ = writeln!(s, "  {k:<24} {v:>16}");
        };
        let _ = writeln!(
            s,
            "workload {} (seed {}, {} cycles)",
            self.workload, self.seed, self.cycles
        );
        let _ = writeln!(s, "NoC");
        row(&mut s, "injected", self.noc.injected.to_string());
        row(&mut s, "delivered", self.noc.delivered.to_string());
        row(&mut s, "refused", self.noc.refused.to_string());
        row(
            &mut s,
            "mean latency (cycles)",
            format!("{:.3}", self.noc.mean_latency_cycles),
        );
        row(
            &mut s,
            "max latency (cycles)",
            self.noc.max_latency_cycles.to_string(),
        );
        row(
            &mut s,
            "offered (Gbit/s)",
            format!("{:.3}", self.noc.offered_gbps),
        );
        let _ = writeln!(s, "bridge");
        row(&mut s, "tx words", self.bridge.tx_words.to_string());
        row(
            &mut s,
            "beats transferred",
            self.bridge.beats_transferred.to_string(),
        );
        row(&mut s, "stall beats", self.bridge.stall_beats.to_string());
        row(
            &mut s,
            "monitor words",
            self.bridge.monitor_words.to_string(),
        );
        row(
            &mut s,
            "monitor drops",
            self.bridge.monitor_drops.to_string(),
        );
        row(&mut s, "rx bytes", self.bridge.rx_bytes.to_string());
        row(
            &mut s,
            "monitor captured",
            self.monitor.captured_words.to_string(),
        );
        let _ = writeln!(s, "arrays");
        for a in &self.arrays {
            let state = match (&a.error, a.running) {
                (Some(e), _) => format!("error: {e}"),
                (None, true) => "running".into(),
                (None, false) => "idle".into(),
            };
            let _ = writeln!(
                s,
                "  CA{} {:<4} {:>6} instr  {}",
                a.id,
                format!("{:?}", a.paradigm),
                a.instructions_done,
                state
            );
        }
        let _ = writeln!(s, "sequencer");
        row(
            &mut s,
            "instructions",
            self.sequencer.trace.len().to_string(),
        );
        row(&mut s, "halted", self.sequencer.halted.to_string());
        row(&mut s, "irq_out events", self.irq_events.len().to_string());
        row(&mut s, "bytes to host", self.axi_to_host.len().to_string());
        let _ = writeln!(s, "energy (pJ)");
        for (rail, pj) in &self.energy.rails_pj {
            row(&mut s, rail, format!("{pj:.1}"));
        }
        row(&mut s, "total", format!("{:.1}", self.energy.total_pj));
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub report: SimReport,
    pub trace: Vec<TraceEvent>,
    pub monitor: Vec<MonitorRecord>,
}

/// Builds the chip for `workload` and applies everything that happens
/// before the first cycle.
pub fn prepare(
    desc: &ChipDescription,
    workload: &Workload,
    seed: u64,
) -> Result<System, HarnessError> {
    workload.validate()?;
    let mut sys = System::new(desc, seed)?;
    for w in &workload.registers {
        sys.regs
            .jtag_write(w.bank, w.addr, w.value)
            .map_err(SystemError::from)?;
    }
    if let Some(v) = workload.form_voltage_v {
        sys.form_all(v)?;
    }
    sys.set_traffic(workload.traffic)?;
    sys.set_receiver(workload.monitor);
    sys.axi.host_send(&workload.axi_in);
    sys.feed_rx(workload.bridge_rx.iter().map(|b| (b.byte, b.addr)));
    for p in &workload.programs {
        sys.load_ca(p.ca, p.program.clone())?;
    }
    if !workload.sequencer.is_empty() {
        sys.load_sequencer(workload.sequencer.clone());
    }
    Ok(sys)
}

/// Runs `workload` for exactly `duration_cycles` cycles. `seed` replaces
/// the workload's own seed.
pub fn simulate(
    desc: &ChipDescription,
    workload: &Workload,
    seed: u64,
    opts: SimOptions,
) -> Result<SimOutput, HarnessError> {
    let mut sys = prepare(desc, workload, seed)?;
    if opts.trace {
        sys.noc_mut().enable_trace();
    }
    let irq = sys.irq_in();
    let mut schedule = workload.irq_schedule.iter().peekable();
    for cycle in 0..workload.duration_cycles {
        while let Some(c) = schedule.next_if(|c| c.cycle <= cycle) {
            irq.set(c.level);
        }
        sys.tick()?;
    }
    let report = report(&sys, &workload.name)?;
    Ok(SimOutput {
        report,
        trace: sys.noc().trace().to_vec(),
        monitor: sys.receiver().captured.clone(),
    })
}

pub fn report(sys: &System, name: &str) -> Result<SimReport, HarnessError> {
    let activity = sys.activity();
    let energy = energy_report(sys.description(), &activity).map_err(SystemError::from)?;
    let rx = sys.receiver();
    Ok(SimReport {
        workload: name.into(),
        seed: sys.seed(),
        cycles: sys.cycle(),
        noc: sys.noc().stats(),
        bridge: sys.bridge().stats().clone(),
        monitor: MonitorSummary {
            ready: rx.pattern,
            captured_words: rx.captured.len() as u64,
            beats_accepted: rx.beats_accepted,
        },
        inbound_discarded: sys.inbound_discarded(),
        arrays: sys.ca_status(),
        sequencer: SequencerSummary {
            halted: sys.sequencer_halted(),
            error: sys.sequencer_error().map(ToString::to_string),
            trace: sys.sequencer_trace().to_vec(),
        },
        irq_events: sys.irq_out.events.clone(),
        axi_to_host: sys.axi.host_rx.clone(),
        activity,
        energy,
    })
}

pub fn trace_to_csv(events: &[TraceEvent]) -> Result<String, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for e in events {
        w.serialize(e)?;
    }
    if events.is_empty() {
        w.write_record(["cycle", "src", "dst", "tag", "event"])?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| HarnessError::Workload(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn trace_from_csv(text: &str) -> Result<Vec<TraceEvent>, HarnessError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

pub fn monitor_to_bytes(records: &[MonitorRecord]) -> Vec<u8> {
    let mut out = Vec::with_capacity(records.len() * MONITOR_RECORD_BYTES);
    for r in records {
        out.extend_from_slice(&r.beat.to_le_bytes());
        out.push(r.stream);
        out.extend_from_slice(&r.word.to_le_bytes());
    }
    out
}

pub fn monitor_from_bytes(bytes: &[u8]) -> Result<Vec<MonitorRecord>, HarnessError> {
    if !bytes.len().is_multiple_of(MONITOR_RECORD_BYTES) {
        return Err(HarnessError::MonitorLength(bytes.len()));
    }
    Ok(bytes
        .chunks_exact(MONITOR_RECORD_BYTES)
        .map(|c| MonitorRecord {
            beat: u64::from_le_bytes(c[..8].try_into().expect("8 bytes")),
            stream: c[8],
            word: u32::from_le_bytes(c[9..].try_into().expect("4 bytes")),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MbistEntry {
    pub instance: String,
    pub bytes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub injected: Option<StuckAt>,
    #[serde(flatten)]
    pub result: MbistResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BistReport {
    pub seed: u64,
    pub mbist: Vec<MbistEntry>,
    pub scan: ScanResult,
}

impl BistReport {
    pub fn pass(&self) -> bool {
        self.mbist.iter().all(|m| m.result.pass) && self.scan.first_mismatch.is_none()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "self-test (seed {})", self.seed);
        for m in &self.mbist {
            let status = match m.result.first_fault_addr {
                None => "pass".to_string(),
                Some(a) => format!("FAIL at 0x{a:05x}"),
            };
            let _ = writeln!(s, "  {:<16} {:>6} B  {}", m.instance, m.bytes, status);
        }
        let _ = writeln!(s, "  scan coverage {:.4}", self.scan.coverage);
        s
    }
}

/// MBIST over every SRAM instance plus the scan-chain check. With
/// `inject_fault`, one random stuck-at bit is placed in each instance first.
pub fn bist(
    desc: &ChipDescription,
    seed: u64,
    inject_fault: bool,
) -> Result<BistReport, HarnessError> {
    let mut sys = System::new(desc, seed)?;
    let mut rng = seed::rng(&[seed, 0x4249_5354]);
    let mut injected = Vec::new();
    let mems = sys
        .arrays
        .iter_mut()
        .map(|a| &mut a.sram)
        .chain(sys.shared_sram.iter_mut());
    for mem in mems {
        let fault = inject_fault.then(|| StuckAt {
            addr: rng.random_range(0..mem.len()),
            bit: rng.random_range(0..8),
            value: rng.random(),
        });
        if let Some(f) = fault {
            mem.inject(f);
        }
        injected.push((mem.len(), fault));
    }
    let names = (0..CA_COUNT)
        .map(|i| format!("CA{i} SRAM"))
        .chain((0..2).map(|i| format!("shared SRAM {i}")));
    let mbist = sys
        .mbist_all()
        .into_iter()
        .zip(names)
        .zip(injected)
        .map(|((result, instance), (bytes, injected))| MbistEntry {
            instance,
            bytes,
            injected,
            result,
        })
        .collect();
    Ok(BistReport {
        seed,
        mbist,
        scan: sys.scan_check()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chipdesc::reference_chip;
    use crate::noc::TraceKind;
    use crate::system::TrafficPattern;
    use proptest::prelude::*;

    fn loaded(cycles: u64) -> Workload {
        Workload {
            duration_cycles: cycles,
            traffic: Some(TrafficSpec {
                pattern: TrafficPattern::UniformRandom,
                rate: 0.2,
            }),
            ..Workload::empty("load")
        }
    }

    #[test]
    fn empty_workload_reports_nothing() {
        let out = simulate(
            &reference_chip(),
            &Workload::empty("idle"),
            0,
            SimOptions::default(),
        )
        .unwrap();
        let r = &out.report;
        assert_eq!((r.cycles, r.noc.injected, r.bridge.tx_words), (0, 0, 0));
        assert_eq!(r.energy.total_pj, 0.0);
        assert!(out.trace.is_empty() && out.monitor.is_empty());
    }

    #[test]
    fn workload_json_defaults() {
        let w = Workload::from_json(r#"{"name":"x","traffic":{"pattern":"pipeline","rate":0.5}}"#)
            .unwrap();
        assert_eq!(w.monitor, ReadyPattern::Always);
        assert_eq!(w.duration_cycles, 0);
        assert_eq!(Workload::from_json(&w.to_json()).unwrap(), w);
    }

    #[test]
    fn workload_rejects_bad_rate_and_ca() {
        let e = Workload::from_json(
            r#"{"name":"x","traffic":{"pattern":"uniform_random","rate":1.2}}"#,
        );
        assert!(matches!(e, Err(HarnessError::Workload(_))));
        let e = Workload::from_json(r#"{"name":"x","programs":[{"ca":7,"program":[]}]}"#);
        assert!(matches!(e, Err(HarnessError::Workload(_))));
    }

    #[test]
    fn load_inlines_matrix_files() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("m.json"), "[[1,2],[3,4]]").unwrap();
        let wl =
            r#"{"name":"f","programs":[{"ca":0,"program":[{"op":"Program","file":"m.json"}]}]}"#;
        let path = dir.path().join("w.json");
        fs::write(&path, wl).unwrap();
        let w = Workload::load(&path).unwrap();
        assert_eq!(
            w.programs[0].program[0],
            LocalInstr::Program(ProgramData::Levels {
                levels: vec![vec![1, 2], vec![3, 4]]
            })
        );
        fs::remove_file(dir.path().join("m.json")).unwrap();
        assert!(matches!(
            Workload::load(&path),
            Err(HarnessError::Io { .. })
        ));
    }

    #[test]
    fn report_round_trips() {
        let out = simulate(&reference_chip(), &loaded(300), 4, SimOptions::default()).unwrap();
        let text = out.report.to_json();
        assert_eq!(SimReport::from_json(&text).unwrap(), out.report);
        assert!(out.report.to_text().contains("monitor drops"));
    }

    #[test]
    fn trace_csv_round_trips() {
        let out = simulate(
            &reference_chip(),
            &loaded(200),
            4,
            SimOptions { trace: true },
        )
        .unwrap();
        assert!(!out.trace.is_empty());
        let csv = trace_to_csv(&out.trace).unwrap();
        assert!(csv.starts_with("cycle,src,dst,tag,event\n"));
        assert_eq!(trace_from_csv(&csv).unwrap(), out.trace);
        assert!(trace_from_csv(&trace_to_csv(&[]).unwrap())
            .unwrap()
            .is_empty());
        let delivered = out
            .trace
            .iter()
            .filter(|e| e.event == TraceKind::Deliver)
            .count() as u64;
        assert_eq!(delivered, out.report.noc.delivered);
    }

    #[test]
    fn monitor_capture_layout() {
        let r = MonitorRecord {
            beat: 0x0102_0304_0506_0708,
            stream: 3,
            word: 0xAABB_CCDD,
        };
        let b = monitor_to_bytes(&[r]);
        assert_eq!(b, [8, 7, 6, 5, 4, 3, 2, 1, 3, 0xDD, 0xCC, 0xBB, 0xAA]);
        assert!(matches!(
            monitor_from_bytes(&b[..12]),
            Err(HarnessError::MonitorLength(12))
        ));
    }

    proptest! {
        #[test]
        fn monitor_bytes_round_trip(recs in proptest::collection::vec((any::<u64>(), any::<u8>(), any::<u32>()), 0..50)) {
            let recs: Vec<_> = recs.into_iter().map(|(beat, stream, word)| MonitorRecord { beat, stream, word }).collect();
            prop_assert_eq!(monitor_from_bytes(&monitor_to_bytes(&recs)).unwrap(), recs);
        }
    }

    #[test]
    fn same_seed_same_outputs() {
        let w = loaded(500);
        let a = simulate(&reference_chip(), &w, 11, SimOptions { trace: true }).unwrap();
        let b = simulate(&reference_chip(), &w, 11, SimOptions { trace: true }).unwrap();
        assert_eq!(a.report.to_json(), b.report.to_json());
        assert_eq!(monitor_to_bytes(&a.monitor), monitor_to_bytes(&b.monitor));
        let c = simulate(&reference_chip(), &w, 12, SimOptions::default()).unwrap();
        assert_ne!(a.monitor, c.monitor);
    }

    #[test]
    fn irq_schedule_switches_bank() {
        let mut w = Workload::empty("irq");
        w.duration_cycles = 10;
        w.registers.push(RegWrite {
            bank: 1,
            addr: crate::control::REG_CTRL,
            value: crate::control::CTRL_MONITOR_OFF,
        });
        w.irq_schedule.push(IrqChange {
            cycle: 5,
            level: true,
        });
        let sys = {
            let mut s = prepare(&reference_chip(), &w, 0).unwrap();
            s.run(5).unwrap();
            assert!(s.active_config().monitor_enabled);
            s.set_irq_in(true);
            s.tick().unwrap();
            s
        };
        assert!(!sys.active_config().monitor_enabled);
        simulate(&reference_chip(), &w, 0, SimOptions::default()).unwrap();
    }

    #[test]
    fn bist_clean_and_faulty() {
        let clean = bist(&reference_chip(), 3, false).unwrap();
        assert!(clean.pass());
        assert_eq!(clean.mbist.len(), 9);
        assert_eq!(clean.mbist[8].bytes, 64 * 1024);
        let faulty = bist(&reference_chip(), 3, true).unwrap();
        assert!(!faulty.pass());
        for m in &faulty.mbist {
            assert_eq!(m.result.first_fault_addr, m.injected.map(|f| f.addr));
        }
        let text = serde_json::to_string(&faulty).unwrap();
        assert_eq!(serde_json::from_str::<BistReport>(&text).unwrap(), faulty);
    }
}
