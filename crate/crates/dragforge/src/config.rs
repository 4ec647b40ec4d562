//! JSON run configuration with explicit defaults for every knob the paper
//! left unspecified; `print-config` dumps this so each constant is visible
//! and overridable.

use serde::{Deserialize, Serialize};

use crate::active::LoopConfig;
use crate::constraints::Rect;
use crate::error::{Error, Result};
use crate::flow::FlowConfig;
use crate::geometry::ShapeParams;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Case width; bounds the θ sampling box.
    pub width: f64,
    /// Grid levels per θ dimension (5 -> 625 samples).
    pub levels: usize,
    pub flow: FlowConfig,
    pub train: TrainSection,
    pub optimize: OptimizeSection,
    pub constraint: Option<ConstraintSection>,
    pub output_dir: String,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub seed: u64,
    pub search_epochs: usize,
    pub train_epochs: usize,
    pub restarts: usize,
    pub test_fraction: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self { seed: 0, search_epochs: 3000, train_epochs: 15_000, restarts: 4, test_fraction: 0.2 }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeSection {
    pub max_rounds: usize,
    pub confirm_tolerance: f64,
}

impl Default for OptimizeSection {
    fn default() -> Self {
        Self { max_rounds: 25, confirm_tolerance: 0.02 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstraintSection {
    /// Path to a 0/1 text-grid mask, as written by the mask export.
    pub region_file: Option<String>,
    /// Axis-aligned rectangles rasterized onto the flow grid.
    pub rects: Vec<Rect>,
    pub sgld_step_size: Option<f64>,
    pub sgld_noise_scale: Option<f64>,
    pub sgld_iterations: usize,
    pub sgld_max_resamples: usize,
    pub sgld_seed: u64,
}

impl Default for ConstraintSection {
    fn default() -> Self {
        Self {
            region_file: None,
            rects: Vec::new(),
            sgld_step_size: None,
            sgld_noise_scale: None,
            sgld_iterations: 5000,
            sgld_max_resamples: 50,
            sgld_seed: 0,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            width: 0.18,
            levels: 5,
            flow: FlowConfig::default(),
            train: TrainSection::default(),
            optimize: OptimizeSection::default(),
            constraint: None,
            output_dir: "out".into(),
        }
    }
}

impl RunConfig {
    /// Validates every module precondition before any compute starts.
    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0) {
            return Err(Error::invalid("width", "must be > 0"));
        }
        if self.levels < 1 {
            return Err(Error::invalid("levels", "must be >= 1"));
        }
        self.flow.validate()?;
        if self.optimize.max_rounds < 1 {
            return Err(Error::invalid("optimize.max_rounds", "must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.train.test_fraction) {
            return Err(Error::invalid("train.test_fraction", "must lie in [0, 1)"));
        }
        if self.train.search_epochs < 1 || self.train.train_epochs < 1 {
            return Err(Error::invalid("train.epochs", "must be >= 1"));
        }
        // the sampling box must rasterize inside the flow grid
        let probe = ShapeParams::new([self.width; 4], self.width)?;
        let curve = crate::geometry::build_boundary(&probe, 32)?;
        crate::geometry::rasterize(&curve, &self.flow.grid)?;
        if let Some(c) = &self.constraint {
            if c.region_file.is_none() && c.rects.is_empty() {
                return Err(Error::invalid(
                    "constraint",
                    "needs region_file or at least one rectangle",
                ));
            }
            if c.sgld_iterations < 1 {
                return Err(Error::invalid("constraint.sgld_iterations", "must be >= 1"));
            }
        }
        Ok(())
    }

    pub fn loop_config(&self) -> LoopConfig {
        LoopConfig {
            seed: self.train.seed,
            max_rounds: self.optimize.max_rounds,
            search_epochs: self.train.search_epochs,
            train_epochs: self.train.train_epochs,
            restarts: self.train.restarts,
            confirm_tolerance: self.optimize.confirm_tolerance,
        }
    }

    pub fn from_file(path: &str) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}
