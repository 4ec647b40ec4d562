//! The θ→drag dataset: factorial sampling grid, batch simulation, outlier
//! filtering, and CSV persistence.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{self, FlowConfig};
use crate::geometry::ShapeParams;

/// One simulated point. `drag` is NaN when the simulation failed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DragSample {
    pub params: ShapeParams,
    pub drag: f64,
    pub converged: bool,
}

/// Anything that can map shape parameters to a drag sample. The lattice
/// solver is the production evaluator; tests substitute analytic ones.
pub trait DragEvaluator: Sync {
    fn evaluate(&self, params: &ShapeParams) -> DragSample;
}

/// The production evaluator backed by the lattice solver.
pub struct LbmEvaluator {
    pub cfg: FlowConfig,
}

impl DragEvaluator for LbmEvaluator {
    fn evaluate(&self, params: &ShapeParams) -> DragSample {
        flow::evaluate_shape(params, &self.cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<DragSample>,
    pub width: f64,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Minimum drag over converged samples.
    pub fn min_drag(&self) -> Option<f64> {
        self.samples
            .iter()
            .filter(|s| s.converged && s.drag.is_finite())
            .map(|s| s.drag)
            .fold(None, |acc, d| Some(acc.map_or(d, |a: f64| a.min(d))))
    }

    /// The converged sample with the lowest drag.
    pub fn best_sample(&self) -> Option<&DragSample> {
        self.samples
            .iter()
            .filter(|s| s.converged && s.drag.is_finite())
            .min_by(|a, b| a.drag.total_cmp(&b.drag))
    }
}

/// Full-factorial grid: `levels` equally spaced values per θ dimension over
/// the sampling box, in lexicographic order.
pub fn sample_grid(width: f64, levels: usize) -> Vec<ShapeParams> {
    assert!(levels >= 1, "levels must be >= 1");
    let (lo, hi) = ShapeParams::bounds(width);
    let value = |ix: usize| {
        if levels == 1 {
            lo
        } else {
            lo + (hi - lo) * ix as f64 / (levels - 1) as f64
        }
    };
    let mut out = Vec::with_capacity(levels.pow(4));
    for a in 0..levels {
        for b in 0..levels {
            for c in 0..levels {
                for d in 0..levels {
                    out.push(ShapeParams {
                        theta: [value(a), value(b), value(c), value(d)],
                        width,
                    });
                }
            }
        }
    }
    out
}

/// Simulates every grid point. Failures become non-converged samples.
pub fn generate(width: f64, levels: usize, evaluator: &dyn DragEvaluator) -> Dataset {
    let points = sample_grid(width, levels);
    let samples: Vec<DragSample> = points.par_iter().map(|p| evaluator.evaluate(p)).collect();
    Dataset { samples, width }
}

/// Drops non-converged / non-finite samples and drags outside the robust
/// fence [median − 5·IQR, median + 5·IQR].
pub fn filter_outliers(ds: &Dataset) -> Result<Dataset> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset("nothing to filter".into()));
    }
    let mut drags: Vec<f64> = ds
        .samples
        .iter()
        .filter(|s| s.converged && s.drag.is_finite())
        .map(|s| s.drag)
        .collect();
    if drags.is_empty() {
        return Err(Error::EmptyDataset("no converged samples".into()));
    }
    drags.sort_by(f64::total_cmp);
    let q = |p: f64| -> f64 {
        // linear-interpolated quantile
        let h = p * (drags.len() - 1) as f64;
        let k = h.floor() as usize;
        let frac = h - k as f64;
        if k + 1 < drags.len() {
            drags[k] * (1.0 - frac) + drags[k + 1] * frac
        } else {
            drags[k]
        }
    };
    let median = q(0.5);
    let iqr = q(0.75) - q(0.25);
    let (lo, hi) = (median - 5.0 * iqr, median + 5.0 * iqr);
    let samples: Vec<DragSample> = ds
        .samples
        .iter()
        .filter(|s| s.converged && s.drag.is_finite() && s.drag >= lo && s.drag <= hi)
        .copied()
        .collect();
    if samples.is_empty() {
        return Err(Error::EmptyDataset("all samples filtered out".into()));
    }
    Ok(Dataset { samples, width: ds.width })
}

const CSV_HEADER: &str = "theta1,theta2,theta3,theta4,width,drag,converged";

/// Serializes with shortest round-trip float formatting (lossless on load).
pub fn to_csv(ds: &Dataset) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for s in &ds.samples {
        let t = s.params.theta;
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            t[0], t[1], t[2], t[3], s.params.width, s.drag, s.converged
        ));
    }
    out
}

pub fn from_csv(text: &str) -> Result<Dataset> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        Some((_, h)) => {
            return Err(Error::Parse { line: 1, reason: format!("bad header `{h}`") });
        }
        None => return Err(Error::EmptyDataset("empty file".into())),
    }
    let mut samples = Vec::new();
    let mut width = None;
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::Parse {
                line: lineno + 1,
                reason: format!("expected 7 columns, got {}", fields.len()),
            });
        }
        let num = |s: &str| -> Result<f64> {
            s.trim().parse().map_err(|_| Error::Parse {
                line: lineno + 1,
                reason: format!("bad number `{s}`"),
            })
        };
        let theta = [num(fields[0])?, num(fields[1])?, num(fields[2])?, num(fields[3])?];
        let w = num(fields[4])?;
        let drag = num(fields[5])?;
        let converged = match fields[6].trim() {
            "true" => true,
            "false" => false,
            other => {
                return Err(Error::Parse {
                    line: lineno + 1,
                    reason: format!("bad converged flag `{other}`"),
                })
            }
        };
        if let Some(prev) = width {
            if w != prev {
                return Err(Error::Parse {
                    line: lineno + 1,
                    reason: format!("width {w} differs from {prev}"),
                });
            }
        } else {
            width = Some(w);
        }
        samples.push(DragSample { params: ShapeParams { theta, width: w }, drag, converged });
    }
    let width = width.ok_or_else(|| Error::EmptyDataset("no data rows".into()))?;
    Ok(Dataset { samples, width })
}

pub fn save(ds: &Dataset, path: &Path) -> Result<()> {
    std::fs::write(path, to_csv(ds))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    from_csv(&text)
}
