//! Power, pad and bandwidth budgets.
//!
//! Rail currents come from the per-block worst-case estimates, scaled
//! linearly with clock frequency. Pad counts follow from a per-pad current
//! limit or from one pad per served block. The audit compares every derived
//! count against the declared pad counts and the stated pin claims and lists
//! each disagreement; it never replaces a computed number with a claimed one.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arrays::EventCounts;
use crate::bridge::{RX_LANES, RX_LANE_BPS, TX_LANES, TX_LANE_BPS};
use crate::chipdesc::{
    ChipDescription, CurrentEntry, Direction, PadGroup, PadPolicy, PadRole, RailKind, RailSection,
};

/// Block name to operating frequency in Hz.
pub type ClockMap = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BudgetError {
    #[error("block {block} clocked at {hz} Hz above its maximum {max_hz} Hz")]
    ClockAboveMax { block: String, hz: f64, max_hz: f64 },
    #[error("block {block} has invalid clock {hz} Hz")]
    BadClock { block: String, hz: f64 },
}

/// Current of one instance of `entry` at frequency `hz` (maximum clock if
/// `None`). DC entries draw their full current regardless.
pub fn entry_current(entry: &CurrentEntry, hz: Option<f64>) -> Result<f64, BudgetError> {
    let Some(max_hz) = entry.max_clock_hz else {
        return Ok(entry.max_current_ma);
    };
    let f = hz.unwrap_or(max_hz);
    if !(f.is_finite() && f >= 0.0) {
        return Err(BudgetError::BadClock {
            block: entry.block.clone(),
            hz: f,
        });
    }
    if f > max_hz {
        return Err(BudgetError::ClockAboveMax {
            block: entry.block.clone(),
            hz: f,
            max_hz,
        });
    }
    Ok(entry.max_current_ma * f / max_hz)
}

/// Total current per rail in mA. Blocks missing from `clocks` run at their
/// maximum clock. Rails without entries report 0.
pub fn rail_current(
    desc: &ChipDescription,
    clocks: &ClockMap,
) -> Result<BTreeMap<String, f64>, BudgetError> {
    let mut out: BTreeMap<String, f64> = desc.rails.iter().map(|r| (r.name.clone(), 0.0)).collect();
    for e in &desc.current_entries {
        let i = entry_current(e, clocks.get(&e.block).copied())?;
        *out.entry(e.rail.clone()).or_default() += i * f64::from(e.instances);
    }
    Ok(out)
}

pub fn pads_required(
    total_ma: f64,
    pad_limit_ma: f64,
    policy: PadPolicy,
    blocks_served: u32,
) -> u32 {
    match policy {
        PadPolicy::CurrentLimited => {
            // tolerate rounding error just above an integer ratio
            let ratio = total_ma / pad_limit_ma;
            let pads = (ratio - 1e-9).ceil().max(1.0);
            pads as u32
        }
        PadPolicy::PerBlock => blocks_served,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RailBudget {
    pub rail: String,
    pub kind: RailKind,
    pub voltage_v: f64,
    pub total_ma: f64,
    pub pad_limit_ma: f64,
    pub pads_required: u32,
    pub pads_declared: u32,
    pub policy: PadPolicy,
    pub mismatch_exempt: bool,
}

/// Budgets at maximum clocks. Ground rails mirror the supply they return.
pub fn rail_budgets(desc: &ChipDescription) -> Result<Vec<RailBudget>, BudgetError> {
    let currents = rail_current(desc, &ClockMap::new())?;
    let limit = desc.pad_current_limit_ma;
    let own = |name: &str| {
        let r = desc.rail(name).expect("checked description");
        let total = currents[name];
        (
            total,
            pads_required(total, limit, r.policy, r.blocks_served),
        )
    };
    Ok(desc
        .rails
        .iter()
        .map(|r| {
            let (total_ma, pads_required) = match &r.return_of {
                Some(s) => own(s),
                None => own(&r.name),
            };
            RailBudget {
                rail: r.name.clone(),
                kind: r.kind,
                voltage_v: r.voltage_v,
                total_ma,
                pad_limit_ma: limit,
                pads_required,
                pads_declared: r.declared_pads,
                policy: r.policy,
                mismatch_exempt: r.mismatch_exempt,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PinTotals {
    pub supply: u32,
    pub ground: u32,
    pub analog_test: u32,
    pub lvds: u32,
    pub ttl: u32,
    pub clock: u32,
    /// Every pad with a package lead: everything except the down-bonded
    /// ground pads.
    pub total_external: u32,
}

/// Categories a pin claim may refer to.
pub const PIN_CATEGORIES: &[&str] = &[
    "supply",
    "ground",
    "down_bonds",
    "digital_supply",
    "digital_ground",
    "analog_supply",
    "analog_hv_supply",
    "analog_test",
    "lvds",
    "lvds_pairs",
    "lvds_tx",
    "lvds_rx",
    "ttl",
    "bridge_ttl",
    "bridge_ttl_in",
    "bridge_ttl_out",
    "axi",
    "jtag",
    "interrupts",
    "scan_enable",
    "clock",
    "total_external",
];

/// Analog rails above this voltage are the high-voltage (ESD/forming) ones.
const HV_THRESHOLD_V: f64 = 1.5;

/// Derived pin count for every category in `PIN_CATEGORIES`.
pub fn pin_counts(desc: &ChipDescription) -> BTreeMap<String, u32> {
    let rails = |pred: &dyn Fn(&crate::chipdesc::RailSpec) -> bool| -> u32 {
        desc.rails
            .iter()
            .filter(|r| pred(r))
            .map(|r| r.declared_pads)
            .sum()
    };
    let pads = |pred: &dyn Fn(&crate::chipdesc::PadSpec) -> bool| -> u32 {
        desc.io_pads
            .iter()
            .filter(|p| pred(p))
            .map(|p| p.physical_pads())
            .sum()
    };
    let lanes = |pred: &dyn Fn(&crate::chipdesc::PadSpec) -> bool| -> u32 {
        desc.io_pads
            .iter()
            .filter(|p| pred(p))
            .map(|p| p.lane_count)
            .sum()
    };
    let bridge_rx = |p: &crate::chipdesc::PadSpec| {
        matches!(
            p.role,
            PadRole::BridgeRxData
                | PadRole::BridgeRxAddr
                | PadRole::BridgeRxValid
                | PadRole::BridgeRxReady
        )
    };
    let supply = rails(&|r| r.kind == RailKind::Supply);
    let ground = rails(&|r| r.kind == RailKind::Ground);
    let analog_test = pads(&|p| p.group == PadGroup::AnalogTest);
    let lvds = pads(&|p| p.group == PadGroup::LvdsPair);
    let ttl = pads(&|p| p.group == PadGroup::Ttl);
    let clock = pads(&|p| p.group == PadGroup::Clock);
    let entries = [
        ("supply", supply),
        ("ground", ground),
        ("down_bonds", ground),
        (
            "digital_supply",
            rails(&|r| r.kind == RailKind::Supply && r.section == RailSection::Digital),
        ),
        (
            "digital_ground",
            rails(&|r| r.kind == RailKind::Ground && r.section == RailSection::Digital),
        ),
        (
            "analog_supply",
            rails(&|r| {
                r.kind == RailKind::Supply
                    && r.section == RailSection::Analog
                    && r.voltage_v < HV_THRESHOLD_V
            }),
        ),
        (
            "analog_hv_supply",
            rails(&|r| {
                r.kind == RailKind::Supply
                    && r.section == RailSection::Analog
                    && r.voltage_v >= HV_THRESHOLD_V
            }),
        ),
        ("analog_test", analog_test),
        ("lvds", lvds),
        ("lvds_pairs", lanes(&|p| p.group == PadGroup::LvdsPair)),
        (
            "lvds_tx",
            lanes(&|p| p.group == PadGroup::LvdsPair && p.direction == Direction::Out),
        ),
        (
            "lvds_rx",
            lanes(&|p| p.group == PadGroup::LvdsPair && p.direction == Direction::In),
        ),
        ("ttl", ttl),
        ("bridge_ttl", pads(&bridge_rx)),
        (
            "bridge_ttl_in",
            pads(&|p| bridge_rx(p) && p.direction == Direction::In),
        ),
        (
            "bridge_ttl_out",
            pads(&|p| bridge_rx(p) && p.direction == Direction::Out),
        ),
        ("axi", pads(&|p| p.role == PadRole::Axi)),
        ("jtag", pads(&|p| p.role == PadRole::Jtag)),
        ("interrupts", pads(&|p| p.role == PadRole::Interrupt)),
        ("scan_enable", pads(&|p| p.role == PadRole::ScanEnable)),
        ("clock", clock),
        ("total_external", supply + analog_test + lvds + ttl + clock),
    ];
    entries.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mismatch {
    pub claim_source: String,
    pub category: String,
    pub claimed: u32,
    pub computed: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub rails: Vec<RailBudget>,
    pub pin_totals: PinTotals,
    pub pin_counts: BTreeMap<String, u32>,
    pub mismatches: Vec<Mismatch>,
}

pub fn audit(desc: &ChipDescription) -> Result<AuditReport, BudgetError> {
    let rails = rail_budgets(desc)?;
    let counts = pin_counts(desc);
    let get = |k: &str| counts.get(k).copied().unwrap_or(0);
    let pin_totals = PinTotals {
        supply: get("supply"),
        ground: get("ground"),
        analog_test: get("analog_test"),
        lvds: get("lvds"),
        ttl: get("ttl"),
        clock: get("clock"),
        total_external: get("total_external"),
    };
    let mut mismatches = Vec::new();
    for r in &rails {
        if !r.mismatch_exempt && r.pads_required != r.pads_declared {
            mismatches.push(Mismatch {
                claim_source: "declared rail pads".into(),
                category: format!("pads:{}", r.rail),
                claimed: r.pads_declared,
                computed: r.pads_required,
            });
        }
    }
    if desc.clock_inputs != pin_totals.clock {
        mismatches.push(Mismatch {
            claim_source: "clock_inputs".into(),
            category: "clock".into(),
            claimed: desc.clock_inputs,
            computed: pin_totals.clock,
        });
    }
    for c in &desc.claims {
        let computed = get(&c.category);
        if computed != c.claimed {
            mismatches.push(Mismatch {
                claim_source: c.source.clone(),
                category: c.category.clone(),
                claimed: c.claimed,
                computed,
            });
        }
    }
    Ok(AuditReport {
        rails,
        pin_totals,
        pin_counts: counts,
        mismatches,
    })
}

impl AuditReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<10} {:>6} {:>9} {:>8} {:>8}  policy",
            "rail", "volts", "total mA", "required", "declared",
        );
        for r in &self.rails {
            let _ = writeln!(
                s,
                "{:<10} {:>6.1} {:>9.1} {:>8} {:>8}  {:?}{}",
                r.rail,
                r.voltage_v,
                r.total_ma,
                r.pads_required,
                r.pads_declared,
                r.policy,
                if r.mismatch_exempt { " (exempt)" } else { "" }
            );
        }
        let t = &self.pin_totals;
        let _ = writeln!(s);
        let _ = writeln!(s, "pin totals");
        for (k, v) in [
            ("supply", t.supply),
            ("ground", t.ground),
            ("analog_test", t.analog_test),
            ("lvds", t.lvds),
            ("ttl", t.ttl),
            ("clock", t.clock),
            ("total_external", t.total_external),
        ] {
            let _ = writeln!(s, "  {k:<16} {v:>4}");
        }
        let _ = writeln!(s);
        if self.mismatches.is_empty() {
            let _ = writeln!(s, "no mismatches");
        } else {
            let _ = writeln!(s, "{} mismatches", self.mismatches.len());
            let _ = writeln!(
                s,
                "  {:<20} {:<18} {:>7} {:>8}",
                "source", "category", "claimed", "computed"
            );
            for m in &self.mismatches {
                let _ = writeln!(
                    s,
                    "  {:<20} {:<18} {:>7} {:>8}",
                    m.claim_source, m.category, m.claimed, m.computed
                );
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthReport {
    pub noc_peak_gbps: f64,
    pub bridge_tx_gbps: f64,
    pub bridge_rx_gbps: f64,
    pub monitor_at_speed: bool,
    /// bridge TX over NoC peak.
    pub monitor_margin: f64,
    /// bridge TX over bridge RX.
    pub asymmetry: f64,
}

fn lane_gbps(desc: &ChipDescription, role: PadRole) -> Option<f64> {
    let mut found = false;
    let mut total = 0.0;
    for p in desc.io_pads.iter().filter(|p| p.role == role) {
        found = true;
        total += f64::from(p.lane_count) * p.rate_bps_per_line.unwrap_or(0.0);
    }
    found.then_some(total / 1e9)
}

/// Rates from the description's data pads, falling back to the bridge's
/// built-in lane counts when a description has none.
pub fn bandwidth_audit(desc: &ChipDescription) -> BandwidthReport {
    let noc = f64::from(desc.noc.link_width_bits) * desc.noc.clock_hz as f64 / 1e9;
    let tx =
        lane_gbps(desc, PadRole::BridgeTxData).unwrap_or(f64::from(TX_LANES) * TX_LANE_BPS / 1e9);
    let rx =
        lane_gbps(desc, PadRole::BridgeRxData).unwrap_or(f64::from(RX_LANES) * RX_LANE_BPS / 1e9);
    BandwidthReport {
        noc_peak_gbps: noc,
        bridge_tx_gbps: tx,
        bridge_rx_gbps: rx,
        monitor_at_speed: tx >= noc,
        monitor_margin: if noc > 0.0 { tx / noc } else { f64::INFINITY },
        asymmetry: if rx > 0.0 { tx / rx } else { f64::INFINITY },
    }
}

fn default_form_pj() -> f64 {
    1000.0
}
fn default_write_pj() -> f64 {
    10.0
}
fn default_event_rail() -> String {
    "VDDA_EF".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyConfig {
    #[serde(default = "default_form_pj")]
    pub form_pj: f64,
    #[serde(default = "default_write_pj")]
    pub set_pj: f64,
    #[serde(default = "default_write_pj")]
    pub reset_pj: f64,
    /// Fraction of active power drawn by an idle block.
    #[serde(default)]
    pub idle_fraction: f64,
    /// Rail charged with memristor forming and programming events.
    #[serde(default = "default_event_rail")]
    pub event_rail: String,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self {
            form_pj: default_form_pj(),
            set_pj: default_write_pj(),
            reset_pj: default_write_pj(),
            idle_fraction: 0.0,
            event_rail: default_event_rail(),
        }
    }
}

/// Per-block activity over a run, counted in instance-cycles of a timeline
/// clock.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ActivityLog {
    pub timeline_hz: u64,
    pub cycles: u64,
    pub active: BTreeMap<String, u64>,
    /// Operating clocks; blocks not listed run at their maximum.
    #[serde(default)]
    pub clocks: ClockMap,
    pub events: EventCounts,
}

impl ActivityLog {
    pub fn new(timeline_hz: u64) -> Self {
        Self {
            timeline_hz,
            ..Self::default()
        }
    }

    pub fn add(&mut self, block: &str, instance_cycles: u64) {
        if instance_cycles > 0 {
            *self.active.entry(block.to_string()).or_default() += instance_cycles;
        }
    }

    /// Appends a later interval of the same run.
    pub fn append(&mut self, later: &ActivityLog) {
        self.cycles += later.cycles;
        for (k, v) in &later.active {
            *self.active.entry(k.clone()).or_default() += v;
        }
        self.events.add(&later.events);
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyTrace {
    pub rails_pj: BTreeMap<String, f64>,
    pub form_pj: f64,
    pub set_pj: f64,
    pub reset_pj: f64,
    pub total_pj: f64,
}

/// Integrates V * I(f) * t over the active (and, scaled, idle)
/// instance-cycles of every block, plus per-event memristor energies.
pub fn energy_report(
    desc: &ChipDescription,
    log: &ActivityLog,
) -> Result<EnergyTrace, BudgetError> {
    let mut rails: BTreeMap<String, f64> =
        desc.rails.iter().map(|r| (r.name.clone(), 0.0)).collect();
    let seconds = |cycles: u64| {
        if log.timeline_hz == 0 {
            0.0
        } else {
            cycles as f64 / log.timeline_hz as f64
        }
    };
    let idle = desc.energy.idle_fraction;
    for e in &desc.current_entries {
        let v = desc.rail(&e.rail).map_or(0.0, |r| r.voltage_v);
        let i_ma = entry_current(e, log.clocks.get(&e.block).copied())?;
        let active = log.active.get(&e.block).copied().unwrap_or(0);
        let idle_cycles = (u64::from(e.instances) * log.cycles).saturating_sub(active);
        // V * mA * s = mJ = 1e9 pJ
        let pj = v * i_ma * (seconds(active) + idle * seconds(idle_cycles)) * 1e9;
        *rails.entry(e.rail.clone()).or_default() += pj;
    }
    let ev = &log.events;
    let form_pj = ev.forms as f64 * desc.energy.form_pj;
    let set_pj = ev.sets as f64 * desc.energy.set_pj;
    let reset_pj = ev.resets as f64 * desc.energy.reset_pj;
    *rails.entry(desc.energy.event_rail.clone()).or_default() += form_pj + set_pj + reset_pj;
    let total_pj = rails.values().sum();
    Ok(EnergyTrace {
        rails_pj: rails,
        form_pj,
        set_pj,
        reset_pj,
        total_pj,
    })
}
