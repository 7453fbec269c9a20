//! Declarative chip description and floorplan checks.
//!
//! `reference_chip()` transcribes the demonstrator: a 6x6 mm die with seven
//! compute arrays in the memristor-safe center square, its supply rails and
//! their declared pad counts, the worst-case current estimates per block, and
//! the external interface pads.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arrays::{ArrayConfig, Paradigm, CA_COUNT};
use crate::bridge::BridgeConfig;
use crate::budget::EnergyConfig;
use crate::noc::NocConfig;

/// Memristor post-processing needs at least this die edge.
pub const MIN_DIE_MM: f64 = 6.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DescError {
    #[error("malformed description: {0}")]
    Malformed(String),
    #[error("cannot parse description: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockKind {
    ComputeArray,
    Processor,
    SharedSRAM,
    NoC,
    ChipBridge,
    Padframe,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_mm: f64,
    pub y_mm: f64,
    pub w_mm: f64,
    pub h_mm: f64,
}

impl Rect {
    pub fn new(x_mm: f64, y_mm: f64, w_mm: f64, h_mm: f64) -> Self {
        Self {
            x_mm,
            y_mm,
            w_mm,
            h_mm,
        }
    }

    fn within(&self, lo_x: f64, lo_y: f64, hi_x: f64, hi_y: f64) -> bool {
        // small tolerance so that blocks placed exactly on a boundary pass
        const EPS: f64 = 1e-9;
        self.x_mm >= lo_x - EPS
            && self.y_mm >= lo_y - EPS
            && self.x_mm + self.w_mm <= hi_x + EPS
            && self.y_mm + self.h_mm <= hi_y + EPS
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockPlacement {
    pub name: String,
    pub kind: BlockKind,
    pub rect: Rect,
    pub uses_memristors: bool,
    /// Crossbar and controller settings for compute arrays.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub array: Option<ArrayConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RailKind {
    Supply,
    Ground,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RailSection {
    Digital,
    Analog,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PadPolicy {
    CurrentLimited,
    PerBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RailSpec {
    pub name: String,
    /// Ground rails carry the voltage of the domain they return.
    pub voltage_v: f64,
    pub declared_pads: u32,
    pub policy: PadPolicy,
    pub purpose: String,
    pub kind: RailKind,
    pub section: RailSection,
    /// Block count for `PerBlock` rails.
    #[serde(default)]
    pub blocks_served: u32,
    /// For ground rails: the supply whose current this rail returns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub return_of: Option<String>,
    /// Pad count is set by signal integrity rather than current; the audit
    /// reports it but does not flag it.
    #[serde(default)]
    pub mismatch_exempt: bool,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurrentEntry {
    pub rail: String,
    pub block: String,
    /// Per instance.
    pub max_current_ma: f64,
    /// `None` for DC entries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_clock_hz: Option<f64>,
    #[serde(default = "one")]
    pub instances: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PadGroup {
    Clock,
    #[serde(rename = "LVDS_Pair")]
    LvdsPair,
    #[serde(rename = "TTL")]
    Ttl,
    AnalogTest,
    Supply,
    Ground,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    In,
    Out,
    Bidir,
}

/// What a pad group does in the model. Used by the bandwidth audit and the
/// bridge to find their lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PadRole {
    #[default]
    Other,
    Clock,
    BridgeTxData,
    BridgeTxAddr,
    BridgeTxValid,
    BridgeTxReady,
    BridgeRxData,
    BridgeRxAddr,
    BridgeRxValid,
    BridgeRxReady,
    Axi,
    Jtag,
    Interrupt,
    ScanEnable,
    AnalogTest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PadSpec {
    pub name: String,
    pub group: PadGroup,
    pub lane_count: u32,
    /// `None` for DC or untimed lines.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_bps_per_line: Option<f64>,
    pub direction: Direction,
    #[serde(default)]
    pub role: PadRole,
}

impl PadSpec {
    pub fn physical_pads(&self) -> u32 {
        match self.group {
            PadGroup::LvdsPair => 2 * self.lane_count,
            _ => self.lane_count,
        }
    }
}

/// A pin count stated somewhere in the design documentation, checked by the
/// audit against the count derived from the tables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PinClaim {
    pub source: String,
    pub category: String,
    pub claimed: u32,
}

fn default_inset() -> f64 {
    1.5
}
fn default_pad_limit() -> f64 {
    15.0
}
fn default_processor_hz() -> u64 {
    500_000_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChipDescription {
    pub die_width_mm: f64,
    pub die_height_mm: f64,
    pub edge_margin_mm: f64,
    pub blocks: Vec<BlockPlacement>,
    pub rails: Vec<RailSpec>,
    pub current_entries: Vec<CurrentEntry>,
    pub io_pads: Vec<PadSpec>,
    pub clock_inputs: u32,
    pub bond_wire_max_mm: f64,
    /// Distance of the package lead ring outside the die edge.
    #[serde(default = "default_inset")]
    pub lead_ring_inset_mm: f64,
    #[serde(default = "default_pad_limit")]
    pub pad_current_limit_ma: f64,
    #[serde(default)]
    pub claims: Vec<PinClaim>,
    #[serde(default)]
    pub noc: NocConfig,
    #[serde(default)]
    pub bridge: BridgeConfig,
    #[serde(default = "default_processor_hz")]
    pub processor_clock_hz: u64,
    #[serde(default)]
    pub energy: EnergyConfig,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule")]
pub enum Violation {
    OutsideCenterSquare { block: String },
    DieTooSmall { width_mm: f64, height_mm: f64 },
    OutsideDie { block: String },
    BondWireTooLong { pad: String, length_mm: f64 },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::OutsideCenterSquare { block } => {
                write!(f, "{block}: memristor block outside the center square")
            }
            Self::DieTooSmall {
                width_mm,
                height_mm,
            } => {
                write!(
                    f,
                    "die {width_mm} x {height_mm} mm is below {MIN_DIE_MM} x {MIN_DIE_MM} mm"
                )
            }
            Self::OutsideDie { block } => write!(f, "{block}: block extends past the die"),
            Self::BondWireTooLong { pad, length_mm } => {
                write!(f, "{pad}: bond wire {length_mm:.3} mm too long")
            }
        }
    }
}

impl ChipDescription {
    pub fn from_json(text: &str) -> Result<Self, DescError> {
        let desc: Self = serde_json::from_str(text).map_err(|e| DescError::Parse(e.to_string()))?;
        desc.check()?;
        Ok(desc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("description serializes")
    }

    pub fn rail(&self, name: &str) -> Option<&RailSpec> {
        self.rails.iter().find(|r| r.name == name)
    }

    /// Compute-array blocks in description order.
    pub fn compute_arrays(&self) -> impl Iterator<Item = &BlockPlacement> {
        self.blocks
            .iter()
            .filter(|b| b.kind == BlockKind::ComputeArray)
    }

    /// Structural checks: positive dimensions, rails referenced by current
    /// entries exist, lane and pad counts non-zero.
    pub fn check(&self) -> Result<(), DescError> {
        let bad = |m: String| Err(DescError::Malformed(m));
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !pos(self.die_width_mm) || !pos(self.die_height_mm) {
            return bad("die dimensions must be positive".into());
        }
        if !(self.edge_margin_mm.is_finite() && self.edge_margin_mm >= 0.0) {
            return bad("edge margin must be non-negative".into());
        }
        if !pos(self.bond_wire_max_mm) || !(0.0..).contains(&self.lead_ring_inset_mm) {
            return bad("bond-wire limit must be positive and lead ring inset non-negative".into());
        }
        for b in &self.blocks {
            let r = &b.rect;
            if !(r.x_mm.is_finite() && r.y_mm.is_finite() && pos(r.w_mm) && pos(r.h_mm)) {
                return bad(format!("block {} has a degenerate rectangle", b.name));
            }
        }
        let mut names = BTreeSet::new();
        for r in &self.rails {
            if !names.insert(r.name.as_str()) {
                return bad(format!("rail {} declared twice", r.name));
            }
            if r.declared_pads == 0 {
                return bad(format!("rail {} declares no pads", r.name));
            }
        }
        for r in &self.rails {
            if let Some(s) = &r.return_of {
                if self.rail(s).is_none() {
                    return bad(format!("rail {} returns unknown rail {s}", r.name));
                }
            }
        }
        for e in &self.current_entries {
            if self.rail(&e.rail).is_none() {
                return bad(format!(
                    "current entry {} names unknown rail {}",
                    e.block, e.rail
                ));
            }
            if !(0.0..).contains(&e.max_current_ma) || e.max_clock_hz.is_some_and(|f| !pos(f)) {
                return bad(format!("current entry {} has invalid values", e.block));
            }
        }
        if let Some(p) = self.io_pads.iter().find(|p| p.lane_count == 0) {
            return bad(format!("pad group {} has no lanes", p.name));
        }
        if let Some(c) = self
            .claims
            .iter()
            .find(|c| !crate::budget::PIN_CATEGORIES.contains(&c.category.as_str()))
        {
            return bad(format!(
                "claim from {} has unknown category {}",
                c.source, c.category
            ));
        }
        Ok(())
    }

    /// The square (or rectangle) that memristor blocks must stay inside.
    pub fn center_region(&self) -> Rect {
        let m = self.edge_margin_mm;
        Rect::new(
            m,
            m,
            self.die_width_mm - 2.0 * m,
            self.die_height_mm - 2.0 * m,
        )
    }

    /// Every physical pad on the die edge, in ring order: supply and ground
    /// rails first, then interface pads.
    pub fn pad_ring(&self) -> Vec<RingPad> {
        let mut ring = Vec::new();
        for r in &self.rails {
            for k in 0..r.declared_pads {
                ring.push(RingPad {
                    name: format!("{}[{k}]", r.name),
                    down_bond: r.kind == RailKind::Ground,
                });
            }
        }
        for p in &self.io_pads {
            for k in 0..p.physical_pads() {
                ring.push(RingPad {
                    name: format!("{}[{k}]", p.name),
                    down_bond: false,
                });
            }
        }
        ring
    }

    /// Modeled bond-wire lengths of all leaded pads.
    ///
    /// Pads are spread evenly around the die perimeter. Each one bonds to the
    /// lead at the same perimeter fraction on a ring `lead_ring_inset_mm`
    /// outside the die edge. Ground pads are down-bonded to the exposed
    /// paddle and have no lead wire.
    pub fn bond_wires(&self) -> Vec<(String, f64)> {
        let ring = self.pad_ring();
        let n = ring.len();
        let (w, h) = (self.die_width_mm, self.die_height_mm);
        let d = self.lead_ring_inset_mm;
        ring.into_iter()
            .enumerate()
            .filter(|(_, p)| !p.down_bond)
            .map(|(i, p)| {
                let t = (i as f64 + 0.5) / n as f64;
                let (px, py) = perimeter_point(0.0, 0.0, w, h, t);
                let (lx, ly) = perimeter_point(-d, -d, w + 2.0 * d, h + 2.0 * d, t);
                (p.name, (px - lx).hypot(py - ly))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RingPad {
    pub name: String,
    pub down_bond: bool,
}

/// Point at fraction `t` of the perimeter of a rectangle, counter-clockwise
/// from its lower-left corner.
fn perimeter_point(x0: f64, y0: f64, w: f64, h: f64, t: f64) -> (f64, f64) {
    let p = 2.0 * (w + h);
    let s = t.rem_euclid(1.0) * p;
    if s < w {
        (x0 + s, y0)
    } else if s < w + h {
        (x0 + w, y0 + s - w)
    } else if s < 2.0 * w + h {
        (x0 + w - (s - w - h), y0 + h)
    } else {
        (x0, y0 + h - (s - 2.0 * w - h))
    }
}

/// Checks memristor placement, die size and bond-wire lengths. Returns one
/// violation per broken rule instance; empty means compliant.
pub fn validate_floorplan(desc: &ChipDescription) -> Result<Vec<Violation>, DescError> {
    desc.check()?;
    let mut out = Vec::new();
    let (w, h) = (desc.die_width_mm, desc.die_height_mm);
    let center = desc.center_region();
    let mut any_memristor = false;
    for b in &desc.blocks {
        if !b.rect.within(0.0, 0.0, w, h) {
            out.push(Violation::OutsideDie {
                block: b.name.clone(),
            });
        }
        if b.uses_memristors {
            any_memristor = true;
            let inside = center.w_mm > 0.0
                && center.h_mm > 0.0
                && b.rect.within(
                    center.x_mm,
                    center.y_mm,
                    center.x_mm + center.w_mm,
                    center.y_mm + center.h_mm,
                );
            if !inside {
                out.push(Violation::OutsideCenterSquare {
                    block: b.name.clone(),
                });
            }
        }
    }
    if any_memristor && (w < MIN_DIE_MM || h < MIN_DIE_MM) {
        out.push(Violation::DieTooSmall {
            width_mm: w,
            height_mm: h,
        });
    }
    for (pad, length_mm) in desc.bond_wires() {
        if length_mm > desc.bond_wire_max_mm {
            out.push(Violation::BondWireTooLong { pad, length_mm });
        }
    }
    Ok(out)
}

const GRID_ORIGIN_MM: f64 = 0.9;
const GRID_CELL_MM: f64 = 1.4;
const GRID_INSET_MM: f64 = 0.1;
const BLOCK_MM: f64 = 1.2;

/// Lower-left corner of a 3x3 floorplan slot, laid out like the mesh.
fn slot_origin(slot: usize) -> (f64, f64) {
    let (col, row) = (slot % 3, slot / 3);
    (
        GRID_ORIGIN_MM + col as f64 * GRID_CELL_MM + GRID_INSET_MM,
        GRID_ORIGIN_MM + row as f64 * GRID_CELL_MM + GRID_INSET_MM,
    )
}

/// Paradigm of each reference compute array.
pub const REFERENCE_PARADIGMS: [Paradigm; CA_COUNT] = [
    Paradigm::CiM,
    Paradigm::CiM,
    Paradigm::CAM,
    Paradigm::CAM,
    Paradigm::SNN,
    Paradigm::SNN,
    Paradigm::PC,
];

pub const CA_SRAM_BLOCK: &str = "SRAM (32 KB)";
pub const CA_CONTROLLER_BLOCK: &str = "local controller";
pub const CA_ANALOG_BLOCK: &str = "analog component";
pub const PROCESSOR_BLOCK: &str = "RISC-V";
pub const SHARED_SRAM_BLOCK: &str = "SRAM (2x64 KB)";
pub const AXI_BLOCK: &str = "AXI Interface";
pub const NOC_BLOCK: &str = "Network on Chip";
pub const BRIDGE_BLOCK: &str = "Chip Bridge";
pub const BRIDGE_OUT_BLOCK: &str = "Output Chip bridge";
pub const BRIDGE_IN_BLOCK: &str = "Input Chip bridge";

fn blocks() -> Vec<BlockPlacement> {
    let mut out = Vec::new();
    for (i, paradigm) in REFERENCE_PARADIGMS.iter().enumerate() {
        let (x, y) = slot_origin(i);
        out.push(BlockPlacement {
            name: format!("CA{i}"),
            kind: BlockKind::ComputeArray,
            rect: Rect::new(x, y, BLOCK_MM, BLOCK_MM),
            uses_memristors: true,
            array: Some(ArrayConfig::new(*paradigm)),
        });
    }
    let (x, y) = slot_origin(7);
    let plain = |name: &str, kind, rect| BlockPlacement {
        name: name.into(),
        kind,
        rect,
        uses_memristors: false,
        array: None,
    };
    out.push(plain(
        "Processor",
        BlockKind::Processor,
        Rect::new(x, y, BLOCK_MM, 0.4),
    ));
    out.push(plain(
        "SharedSRAM0",
        BlockKind::SharedSRAM,
        Rect::new(x, y + 0.4, 0.6, 0.8),
    ));
    out.push(plain(
        "SharedSRAM1",
        BlockKind::SharedSRAM,
        Rect::new(x + 0.6, y + 0.4, 0.6, 0.8),
    ));
    let (x, y) = slot_origin(8);
    out.push(plain(
        "ChipBridge",
        BlockKind::ChipBridge,
        Rect::new(x, y, BLOCK_MM, BLOCK_MM),
    ));
    let span = 3.0 * GRID_CELL_MM;
    out.push(plain(
        "NoC",
        BlockKind::NoC,
        Rect::new(GRID_ORIGIN_MM, GRID_ORIGIN_MM, span, span),
    ));
    out
}

fn rails() -> Vec<RailSpec> {
    use PadPolicy::*;
    use RailKind::*;
    use RailSection::*;
    let rail = |name: &str,
                v,
                pads,
                policy,
                purpose: &str,
                kind,
                section,
                served,
                ret: Option<&str>,
                exempt| {
        RailSpec {
            name: name.into(),
            voltage_v: v,
            declared_pads: pads,
            policy,
            purpose: purpose.into(),
            kind,
            section,
            blocks_served: served,
            return_of: ret.map(Into::into),
            mismatch_exempt: exempt,
        }
    };
    let ca = CA_COUNT as u32;
    vec![
        rail(
            "VDD_CORE",
            0.9,
            20,
            CurrentLimited,
            "0.9 V supply of digital part",
            Supply,
            Digital,
            0,
            None,
            false,
        ),
        rail(
            "VSS_CORE",
            0.9,
            20,
            CurrentLimited,
            "Low supply of digital part",
            Ground,
            Digital,
            0,
            Some("VDD_CORE"),
            false,
        ),
        rail(
            "VDD_CLK",
            0.9,
            1,
            CurrentLimited,
            "0.9 V supply of clock buffer",
            Supply,
            Digital,
            0,
            None,
            false,
        ),
        rail(
            "VSS_CLK",
            0.9,
            1,
            CurrentLimited,
            "Low supply of clock buffer",
            Ground,
            Digital,
            0,
            Some("VDD_CLK"),
            false,
        ),
        rail(
            "VDD_IO",
            3.3,
            2,
            CurrentLimited,
            "3.3 V supply of digital section of padframe",
            Supply,
            Digital,
            0,
            None,
            false,
        ),
        rail(
            "VSS_IO",
            3.3,
            2,
            CurrentLimited,
            "Low supply of digital part of the padframe",
            Ground,
            Digital,
            0,
            Some("VDD_IO"),
            false,
        ),
        rail(
            "VDD_LVDS",
            1.4,
            13,
            PerBlock,
            "1.4 V supply of LVDS",
            Supply,
            Digital,
            13,
            None,
            true,
        ),
        rail(
            "VSS_LVDS",
            1.4,
            13,
            PerBlock,
            "Low supply of LVDS",
            Ground,
            Digital,
            13,
            Some("VDD_LVDS"),
            true,
        ),
        rail(
            "VDD_ANA",
            0.9,
            ca,
            PerBlock,
            "0.9 V supply of analog part of the CA",
            Supply,
            Analog,
            ca,
            None,
            false,
        ),
        rail(
            "VSS_ANA",
            0.9,
            ca,
            PerBlock,
            "Low supply of analog part of the CA",
            Ground,
            Analog,
            ca,
            Some("VDD_ANA"),
            false,
        ),
        rail(
            "VDDA_ESD",
            3.3,
            2,
            CurrentLimited,
            "3.3 V supply of analog section of padframe",
            Supply,
            Analog,
            0,
            None,
            false,
        ),
        rail(
            "VSSA_ESD",
            3.3,
            2,
            CurrentLimited,
            "Low supply of analog part of the padframe",
            Ground,
            Analog,
            0,
            Some("VDDA_ESD"),
            false,
        ),
        rail(
            "VDDA_EF",
            3.3,
            ca,
            PerBlock,
            "3.3 V for electroforming, set and reset of memristors",
            Supply,
            Analog,
            ca,
            None,
            false,
        ),
    ]
}

fn current_entries() -> Vec<CurrentEntry> {
    let entry = |rail: &str, block: &str, ma, hz: Option<f64>, instances| CurrentEntry {
        rail: rail.into(),
        block: block.into(),
        max_current_ma: ma,
        max_clock_hz: hz,
        instances,
    };
    let ca = CA_COUNT as u32;
    vec![
        entry("VDD_CORE", CA_SRAM_BLOCK, 18.9, Some(1e9), ca),
        entry("VDD_CORE", CA_CONTROLLER_BLOCK, 10.0, Some(1e9), ca),
        entry("VDD_ANA", CA_ANALOG_BLOCK, 3.5, Some(1e8), ca),
        entry("VDD_CORE", PROCESSOR_BLOCK, 10.0, Some(5e8), 1),
        entry("VDD_CORE", SHARED_SRAM_BLOCK, 51.6, Some(5e8), 1),
        entry("VDD_CORE", AXI_BLOCK, 2.0, Some(1e8), 1),
        entry("VDD_CORE", NOC_BLOCK, 10.0, Some(1e9), 1),
        entry("VDD_CORE", BRIDGE_BLOCK, 10.0, Some(1e9), 1),
        entry("VDD_LVDS", BRIDGE_OUT_BLOCK, 95.0, Some(1e9), 1),
        entry("VDD_CORE", BRIDGE_IN_BLOCK, 12.0, Some(1e8), 1),
    ]
}

fn io_pads() -> Vec<PadSpec> {
    use Direction::*;
    use PadGroup::*;
    use PadRole::*;
    let pad = |name: &str, group, lanes, rate: Option<f64>, direction, role| PadSpec {
        name: name.into(),
        group,
        lane_count: lanes,
        rate_bps_per_line: rate,
        direction,
        role,
    };
    vec![
        pad("CLK", PadGroup::Clock, 4, Some(1e9), In, PadRole::Clock),
        pad("CBTXDAT", LvdsPair, 16, Some(2e9), Out, BridgeTxData),
        pad("CBTXADD", LvdsPair, 2, Some(2e9), Out, BridgeTxAddr),
        pad("CBTXVAL", LvdsPair, 1, Some(2e9), Out, BridgeTxValid),
        pad("CBTXREA", LvdsPair, 1, Some(2e9), In, BridgeTxReady),
        pad("CBRXDAT", Ttl, 8, Some(1e8), In, BridgeRxData),
        pad("CBRXADD", Ttl, 1, Some(1e8), In, BridgeRxAddr),
        pad("CBRXVAL", Ttl, 1, Some(1e8), In, BridgeRxValid),
        pad("CBRXREA", Ttl, 1, Some(1e8), Out, BridgeRxReady),
        pad("AXI", Ttl, 15, Some(1e8), Bidir, Axi),
        pad("JTAG", Ttl, 5, Some(1e7), Bidir, Jtag),
        pad("INTRPT", Ttl, 2, None, Bidir, Interrupt),
        pad("SCAN_EN", Ttl, 1, None, In, ScanEnable),
        pad(
            "TESTAC",
            PadGroup::AnalogTest,
            7,
            Some(5e8),
            Bidir,
            PadRole::AnalogTest,
        ),
        pad(
            "TESTDC",
            PadGroup::AnalogTest,
            7,
            None,
            Bidir,
            PadRole::AnalogTest,
        ),
    ]
}

fn claims() -> Vec<PinClaim> {
    let claim = |source: &str, category: &str, claimed| PinClaim {
        source: source.into(),
        category: category.into(),
        claimed,
    };
    vec![
        claim("interfaces text", "lvds_pairs", 22),
        claim("interfaces text", "bridge_ttl", 11),
        claim("interfaces text", "axi", 15),
        claim("interfaces text", "interrupts", 2),
        claim("interfaces text", "clock", 4),
        claim("summary", "digital_supply", 36),
        claim("summary", "digital_ground", 36),
        claim("summary", "analog_supply", 7),
        claim("summary", "analog_hv_supply", 9),
        claim("summary", "analog_test", 14),
        claim("summary", "lvds_tx", 20),
        claim("summary", "lvds_rx", 1),
        claim("summary", "bridge_ttl_in", 10),
        claim("summary", "bridge_ttl_out", 1),
        claim("summary", "axi", 15),
        claim("summary", "jtag", 5),
        claim("summary", "interrupts", 2),
        claim("summary", "clock", 4),
        claim("summary", "scan_enable", 1),
        claim("summary", "supply", 46),
        claim("summary", "ground", 46),
        claim("summary", "lvds", 42),
        claim("summary", "ttl", 31),
        claim("summary", "total_external", 140),
        claim("summary", "down_bonds", 46),
    ]
}

/// The demonstrator chip.
pub fn reference_chip() -> ChipDescription {
    ChipDescription {
        die_width_mm: 6.0,
        die_height_mm: 6.0,
        edge_margin_mm: 0.8,
        blocks: blocks(),
        rails: rails(),
        current_entries: current_entries(),
        io_pads: io_pads(),
        clock_inputs: 4,
        bond_wire_max_mm: 3.0,
        lead_ring_inset_mm: default_inset(),
        pad_current_limit_ma: default_pad_limit(),
        claims: claims(),
        noc: NocConfig::default(),
        bridge: BridgeConfig::default(),
        processor_clock_hz: default_processor_hz(),
        energy: EnergyConfig::default(),
        seed: 0,
    }
}
