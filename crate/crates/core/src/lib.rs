//! Cycle-level model of a memristive multi-paradigm SoC: seven computing
//! arrays on a network-on-chip, a processor subsystem, an off-chip bridge,
//! and the physical description (floorplan, pads, rails) needed to audit it.

pub mod arrays;
pub mod bridge;
pub mod budget;
pub mod chipdesc;
pub mod control;
pub mod harness;
pub mod memristor;
pub mod noc;
pub mod seed;
pub mod sram;
pub mod system;
