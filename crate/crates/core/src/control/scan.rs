//! Scan-chain test model.
//!
//! The chain is `length` flip-flops; cell 0 sits at scan-out. A test captures
//! a pseudo-random pattern in parallel, shifts it out and compares, then does
//! the same with the inverted pattern. A break between cell k and cell k-1
//! forces everything shifted across it to a constant, so cells k.. fail in
//! one of the two passes and cells ..k pass both. The first failing cell
//! therefore locates the break.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ControlError;
use crate::seed;

pub const DEFAULT_SCAN_LENGTH: usize = 4096;
const SCAN_STREAM: u64 = 0x5343;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanChain {
    pub length: usize,
    pub scan_enable: bool,
    /// Break feeding cell `k - 1` from cell `k`, stuck at the given level.
    pub break_at: Option<(usize, bool)>,
}

impl Default for ScanChain {
    fn default() -> Self {
        Self {
            length: DEFAULT_SCAN_LENGTH,
            scan_enable: true,
            break_at: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    /// Fraction of cells whose captured value came out intact in both passes.
    pub coverage: f64,
    pub first_mismatch: Option<usize>,
}

impl ScanChain {
    /// Captures `cells` and shifts them out; returns the scan-out stream.
    fn capture_and_shift(&self, cells: &[bool]) -> Vec<bool> {
        let mut chain = cells.to_vec();
        let mut out = Vec::with_capacity(chain.len());
        for _ in 0..chain.len() {
            out.push(chain[0]);
            for i in 0..chain.len() - 1 {
                chain[i] = match self.break_at {
                    Some((k, level)) if k == i + 1 => level,
                    _ => chain[i + 1],
                };
            }
            if let Some(last) = chain.last_mut() {
                *last = false;
            }
        }
        out
    }
}

pub fn scan_chain_check(chain: &ScanChain, seed: u64) -> Result<ScanResult, ControlError> {
    if !chain.scan_enable {
        return Err(ControlError::ScanDisabled);
    }
    let mut rng = seed::rng(&[seed, SCAN_STREAM]);
    let pattern: Vec<bool> = (0..chain.length).map(|_| rng.random()).collect();
    let inverted: Vec<bool> = pattern.iter().map(|b| !b).collect();
    let a = chain.capture_and_shift(&pattern);
    let b = chain.capture_and_shift(&inverted);
    let first = (0..chain.length).find(|&i| a[i] != pattern[i] || b[i] != inverted[i]);
    let good = first.unwrap_or(chain.length);
    Ok(ScanResult {
        coverage: if chain.length == 0 {
            1.0
        } else {
            good as f64 / chain.length as f64
        },
        first_mismatch: first,
    })
}
