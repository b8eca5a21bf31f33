//! Run configuration: a versioned JSON schema with unknown keys rejected.
//!
//! Desk-scale defaults reproduce the published enclosures in minutes on one
//! core; the `--long-run` variants use the full published subdivision
//! counts.

use crate::error::{LibrateError, Result};
use crate::family::FamilyBox;
use crate::model::MU_DEFAULT;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default)]
    pub integrator: IntegratorOpts,
    #[serde(default)]
    pub family: FamilyOpts,
    #[serde(default)]
    pub chart: ChartOpts,
    #[serde(default)]
    pub fibers: FiberOpts,
    #[serde(default)]
    pub transversal: TransversalOpts,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
}

fn default_mu() -> f64 {
    MU_DEFAULT
}

fn default_output_dir() -> String {
    "out".into()
}

/// Validated-integrator options; recorded in certificates for provenance.
/// The proof pipelines are tuned against these exact values, so deviating
/// ones are rejected rather than silently ignored.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorOpts {
    pub taylor_order: usize,
    pub abs_tolerance: f64,
    pub max_step: f64,
    /// Abort threshold on enclosure widths.
    pub width_cap: f64,
}

impl Default for IntegratorOpts {
    fn default() -> Self {
        IntegratorOpts {
            taylor_order: 20,
            abs_tolerance: 1e-15,
            max_step: 0.02,
            width_cap: 1e-2,
        }
    }
}

/// Family box and continuation-chain parameters.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct FamilyOpts {
    pub x_c: f64,
    pub py_c: f64,
    pub slope: f64,
    pub rx: f64,
    pub r0: f64,
    pub r1: f64,
    /// Chain geometry (seeded by the non-rigorous oracle).
    pub chain_n: usize,
    pub chain_rx: f64,
    pub chain_r0: f64,
    pub chain_r1: f64,
    /// Offset of the chain start below `x_c`.
    pub chain_offset: f64,
    pub long_chain_n: usize,
}

impl Default for FamilyOpts {
    fn default() -> Self {
        let bx = FamilyBox::reference();
        FamilyOpts {
            x_c: bx.x_c,
            py_c: bx.py_c,
            slope: bx.slope,
            rx: bx.rx,
            r0: bx.r0,
            r1: bx.r1,
            chain_n: 50,
            chain_rx: 1.1007716e-6,
            chain_r0: 2.5e-8,
            chain_r1: 5e-8,
            chain_offset: 5.5e-5,
            long_chain_n: 15_000,
        }
    }
}

impl FamilyOpts {
    pub fn family_box(&self) -> FamilyBox {
        FamilyBox {
            x_c: self.x_c,
            py_c: self.py_c,
            slope: self.slope,
            rx: self.rx,
            r0: self.r0,
            r1: self.r1,
        }
    }
}

/// Chart-fitting parameters: polynomial degree and chart scale.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ChartOpts {
    pub degree: usize,
    pub sigma: f64,
}

impl Default for ChartOpts {
    fn default() -> Self {
        ChartOpts {
            degree: 4,
            sigma: 0.1,
        }
    }
}

/// Unstable-fiber certification parameters.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct FiberOpts {
    pub alpha: f64,
    /// Expansion floor `m` for the cone conditions.
    pub m: f64,
    pub x_lo: f64,
    pub x_hi: f64,
    pub n: usize,
    /// Internal per-part `x` refinement of the derivative hull.
    pub refine: usize,
    pub long_x_hi: f64,
    pub long_n: usize,
}

impl Default for FiberOpts {
    fn default() -> Self {
        FiberOpts {
            alpha: 2.56e-6,
            m: 1000.0,
            x_lo: -1e-11,
            x_hi: 5e-7,
            n: 150,
            refine: 1,
            long_x_hi: 4.5e-6,
            long_n: 1200,
        }
    }
}

/// Transversality probe parameters; `x_m` comes from the non-rigorous
/// oracle (the rightmost homoclinic point).
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TransversalOpts {
    pub x_m: f64,
    pub half_width: f64,
    pub n_parts: usize,
    pub refine: usize,
    pub long_n_parts: usize,
    pub long_refine: usize,
}

impl Default for TransversalOpts {
    fn default() -> Self {
        TransversalOpts {
            x_m: 4.461867506615821e-6,
            half_width: 1e-11,
            n_parts: 100,
            refine: 1,
            long_n_parts: 600,
            long_refine: 2,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema: SCHEMA_VERSION,
            mu: MU_DEFAULT,
            integrator: IntegratorOpts::default(),
            family: FamilyOpts::default(),
            chart: ChartOpts::default(),
            fibers: FiberOpts::default(),
            transversal: TransversalOpts::default(),
            output_dir: default_output_dir(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = serde_json::from_str(text)
            .map_err(|e| LibrateError::Config(format!("bad config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        RunConfig::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA_VERSION {
            return Err(LibrateError::Config(format!(
                "unsupported schema version {} (expected {SCHEMA_VERSION})",
                self.schema
            )));
        }
        if !(self.mu > 0.0 && self.mu < 0.5) {
            return Err(LibrateError::Config(format!(
                "mass ratio mu must lie in (0, 1/2), got {}",
                self.mu
            )));
        }
        let it = &self.integrator;
        if it != &IntegratorOpts::default() {
            return Err(LibrateError::Config(
                "the proof pipelines are tuned against the default integrator \
                 options (taylor_order 20, abs_tolerance 1e-15, max_step 0.02, \
                 width_cap 1e-2); other values are not supported"
                    .into(),
            ));
        }
        self.family.family_box().validate()?;
        if self.family.chain_n == 0 && self.family.long_chain_n == 0 {
            return Err(LibrateError::Config("empty chain in both profiles".into()));
        }
        if !(self.family.chain_r0 > 0.0 && self.family.chain_r1 > self.family.chain_r0) {
            return Err(LibrateError::Config("chain radii must satisfy 0 < r0 < r1".into()));
        }
        if self.chart.degree < 2 || self.chart.sigma <= 0.0 {
            return Err(LibrateError::Config(format!(
                "chart needs degree >= 2 and positive sigma, got {} / {}",
                self.chart.degree, self.chart.sigma
            )));
        }
        let fb = &self.fibers;
        if !(fb.alpha > 0.0 && fb.m > 1.0 && fb.x_lo < fb.x_hi && fb.n > 0 && fb.refine > 0) {
            return Err(LibrateError::Config(format!("bad fiber options: {fb:?}")));
        }
        let tv = &self.transversal;
        if !(tv.half_width > 0.0 && tv.n_parts > 0 && tv.refine > 0) {
            return Err(LibrateError::Config(format!("bad transversal options: {tv:?}")));
        }
        if self.output_dir.is_empty() {
            return Err(LibrateError::Config("output_dir must be non-empty".into()));
        }
        Ok(())
    }
}
