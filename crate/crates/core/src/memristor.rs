//! Behavioral model of a single memristive device.
//!
//! A device starts `Virgin` and must be electroformed once at or above the
//! forming voltage before it can be programmed or read. Programming selects
//! one of `levels` conductance states on a linear map between `g_min_us` and
//! `g_max_us`, perturbed by a seeded relative Gaussian.
//!
//! Device state is a plain value. Every transition returns a new state and
//! leaves the input untouched.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DeviceError {
    #[error("forming voltage {v} V below threshold {required} V")]
    VoltageTooLow { v: f64, required: f64 },
    #[error("device already formed")]
    AlreadyFormed,
    #[error("device not formed")]
    NotFormed,
    #[error("level {level} out of range (levels = {levels})")]
    LevelOutOfRange { level: u32, levels: u32 },
    #[error("read voltage {v} V exceeds {max} V")]
    ReadVoltageTooHigh { v: f64, max: f64 },
    #[error("invalid device parameters: {0}")]
    InvalidParams(String),
}

fn default_levels() -> u32 {
    16
}
fn default_v_form() -> f64 {
    3.0
}
fn default_v_read_max() -> f64 {
    0.9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    pub g_min_us: f64,
    pub g_max_us: f64,
    #[serde(default = "default_levels")]
    pub levels: u32,
    #[serde(default = "default_v_form")]
    pub v_form_v: f64,
    #[serde(default = "default_v_read_max")]
    pub v_read_max_v: f64,
    #[serde(default)]
    pub sigma_rel: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for DeviceParams {
    fn default() -> Self {
        Self {
            g_min_us: 10.0,
            g_max_us: 100.0,
            levels: default_levels(),
            v_form_v: default_v_form(),
            v_read_max_v: default_v_read_max(),
            sigma_rel: 0.0,
            seed: 0,
        }
    }
}

impl DeviceParams {
    pub fn validate(&self) -> Result<(), DeviceError> {
        let bad = |m: &str| Err(DeviceError::InvalidParams(m.to_string()));
        if !(self.g_min_us > 0.0 && self.g_min_us < self.g_max_us) {
            return bad("require 0 < g_min_us < g_max_us");
        }
        if self.levels < 2 {
            return bad("levels must be at least 2");
        }
        if !(0.0..0.5).contains(&self.sigma_rel) {
            return bad("sigma_rel must lie in [0, 0.5)");
        }
        if [self.v_read_max_v, self.v_form_v]
            .iter()
            .any(|v| v.is_nan() || *v <= 0.0)
        {
            return bad("voltages must be positive");
        }
        Ok(())
    }

    /// Nominal conductance of level `k` (no variability).
    pub fn level_conductance(&self, k: u32) -> f64 {
        let step = (self.g_max_us - self.g_min_us) / f64::from(self.levels - 1);
        self.g_min_us + f64::from(k) * step
    }

    fn clamp(&self, g: f64) -> f64 {
        g.clamp(self.g_min_us, self.g_max_us)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Virgin,
    Formed,
}

/// What a state transition did, for energy accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeviceEvent {
    Form,
    Set,
    Reset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceState {
    /// Identity used to key the variability stream of this device.
    pub id: u64,
    pub phase: Phase,
    pub level: u32,
    pub g_us: f64,
    pub cycles: u64,
}

impl DeviceState {
    pub fn virgin(id: u64) -> Self {
        Self {
            id,
            phase: Phase::Virgin,
            level: 0,
            g_us: 0.0,
            cycles: 0,
        }
    }

    pub fn is_formed(&self) -> bool {
        self.phase == Phase::Formed
    }

    fn require_formed(&self) -> Result<(), DeviceError> {
        match self.phase {
            Phase::Formed => Ok(()),
            Phase::Virgin => Err(DeviceError::NotFormed),
        }
    }

    /// Relative Gaussian factor for the next write, keyed by
    /// (params seed, device id, write count).
    fn variability(&self, params: &DeviceParams) -> f64 {
        if params.sigma_rel == 0.0 {
            return 1.0;
        }
        let mut rng = seed::rng(&[params.seed, self.id, self.cycles]);
        // sigma_rel is validated finite and non-negative
        let normal = Normal::new(1.0, params.sigma_rel).expect("valid sigma");
        normal.sample(&mut rng)
    }

    /// Electroforming. Strict threshold, no partial forming.
    pub fn form(&self, v: f64, params: &DeviceParams) -> Result<DeviceState, DeviceError> {
        if self.phase == Phase::Formed {
            return Err(DeviceError::AlreadyFormed);
        }
        if v < params.v_form_v {
            return Err(DeviceError::VoltageTooLow {
                v,
                required: params.v_form_v,
            });
        }
        let g = params.clamp(params.g_min_us * self.variability(params));
        Ok(DeviceState {
            id: self.id,
            phase: Phase::Formed,
            level: 0,
            g_us: g,
            cycles: self.cycles + 1,
        })
    }

    pub fn set_level(&self, k: u32, params: &DeviceParams) -> Result<DeviceState, DeviceError> {
        self.require_formed()?;
        if k >= params.levels {
            return Err(DeviceError::LevelOutOfRange {
                level: k,
                levels: params.levels,
            });
        }
        let g = params.clamp(params.level_conductance(k) * self.variability(params));
        Ok(DeviceState {
            id: self.id,
            phase: Phase::Formed,
            level: k,
            g_us: g,
            cycles: self.cycles + 1,
        })
    }

    pub fn reset_device(&self, params: &DeviceParams) -> Result<DeviceState, DeviceError> {
        self.set_level(0, params)
    }

    /// Ohmic read in µA. Reads above the compute-domain voltage would disturb
    /// the state and are refused.
    pub fn read_current(&self, v: f64, params: &DeviceParams) -> Result<f64, DeviceError> {
        self.require_formed()?;
        if v.abs() > params.v_read_max_v {
            return Err(DeviceError::ReadVoltageTooHigh {
                v,
                max: params.v_read_max_v,
            });
        }
        Ok(self.g_us * v)
    }

    /// Probability of a 1 when the device is used as a stochastic bit.
    pub fn bernoulli_p(&self, params: &DeviceParams) -> Result<f64, DeviceError> {
        self.require_formed()?;
        let p = (self.g_us - params.g_min_us) / (params.g_max_us - params.g_min_us);
        Ok(p.clamp(0.0, 1.0))
    }

    pub fn sample_bernoulli<R: Rng + ?Sized>(
        &self,
        params: &DeviceParams,
        rng: &mut R,
    ) -> Result<bool, DeviceError> {
        let p = self.bernoulli_p(params)?;
        Ok(rng.random::<f64>() < p)
    }
}

/// Event kind emitted by `set_level(k)`.
pub fn write_event(level: u32) -> DeviceEvent {
    if level == 0 {
        DeviceEvent::Reset
    } else {
        DeviceEvent::Set
    }
}
