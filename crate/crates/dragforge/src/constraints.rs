//! User-constraint machinery: flood-fill containment of a required region
//! and noisy constrained descent that never leaves the feasible set.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, GridSpec, OccupancyMask, ShapeParams};
use crate::surrogate::{mlp_forward, mlp_input_gradient, MlpModel};

/// Cells the final shape must enclose.
#[derive(Debug, Clone)]
pub struct RequiredRegion {
    pub mask: OccupancyMask,
}

impl RequiredRegion {
    pub fn new(mask: OccupancyMask) -> Result<Self> {
        if mask.solid_count() == 0 {
            return Err(Error::invalid("required_region", "must be non-empty"));
        }
        if !is_4_connected(&mask) {
            return Err(Error::invalid("required_region", "must be 4-connected"));
        }
        Ok(Self { mask })
    }

    /// Rasterizes axis-aligned rectangles `{x, y, w, h}` onto `grid`.
    pub fn from_rects(rects: &[Rect], grid: GridSpec) -> Result<Self> {
        let mut mask = OccupancyMask::empty(grid);
        let (gx0, gy0, gx1, gy1) = grid.extent();
        for r in rects {
            if r.x < gx0 || r.y < gy0 || r.x + r.w > gx1 || r.y + r.h > gy1 {
                return Err(Error::invalid(
                    "required_region",
                    format!("rectangle at ({}, {}) extends outside the grid", r.x, r.y),
                ));
            }
            for j in 0..grid.ny {
                for i in 0..grid.nx {
                    let (cx, cy) = grid.cell_center(i, j);
                    if cx >= r.x && cx <= r.x + r.w && cy >= r.y && cy <= r.y + r.h {
                        mask.solid[grid.idx(i, j)] = true;
                    }
                }
            }
        }
        Self::new(mask)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

fn is_4_connected(mask: &OccupancyMask) -> bool {
    let total = mask.solid_count();
    if total == 0 {
        return false;
    }
    let grid = &mask.grid;
    let start = mask.solid.iter().position(|&s| s).unwrap();
    let mut seen = vec![false; mask.solid.len()];
    let mut stack = vec![start];
    seen[start] = true;
    let mut count = 0usize;
    while let Some(idx) = stack.pop() {
        count += 1;
        let (i, j) = (idx % grid.nx, idx / grid.nx);
        for (di, dj) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)] {
            let (ni, nj) = (i as i64 + di, j as i64 + dj);
            if ni < 0 || nj < 0 || ni >= grid.nx as i64 || nj >= grid.ny as i64 {
                continue;
            }
            let nidx = grid.idx(ni as usize, nj as usize);
            if mask.solid[nidx] && !seen[nidx] {
                seen[nidx] = true;
                stack.push(nidx);
            }
        }
    }
    count == total
}

/// All cells 4-connected to `seed_cell` through non-solid cells.
pub fn flood_fill(mask: &OccupancyMask, seed_cell: (usize, usize)) -> Result<OccupancyMask> {
    let grid = mask.grid;
    let (si, sj) = seed_cell;
    if si >= grid.nx || sj >= grid.ny {
        return Err(Error::invalid("seed_cell", "outside the grid"));
    }
    if mask.is_solid(si, sj) {
        return Err(Error::invalid("seed_cell", "lies on a solid cell"));
    }
    let mut reached = OccupancyMask::empty(grid);
    let start = grid.idx(si, sj);
    let mut stack = vec![start];
    reached.solid[start] = true;
    while let Some(idx) = stack.pop() {
        let (i, j) = (idx % grid.nx, idx / grid.nx);
        for (di, dj) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)] {
            let (ni, nj) = (i as i64 + di, j as i64 + dj);
            if ni < 0 || nj < 0 || ni >= grid.nx as i64 || nj >= grid.ny as i64 {
                continue;
            }
            let nidx = grid.idx(ni as usize, nj as usize);
            if !mask.solid[nidx] && !reached.solid[nidx] {
                reached.solid[nidx] = true;
                stack.push(nidx);
            }
        }
    }
    Ok(reached)
}

/// Perimeter of the solid set: solid cells bordering a non-solid cell or
/// the grid edge.
fn outline(mask: &OccupancyMask) -> Vec<bool> {
    let grid = &mask.grid;
    let mut out = vec![false; mask.solid.len()];
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let idx = grid.idx(i, j);
            if !mask.solid[idx] {
                continue;
            }
            if i == 0 || j == 0 || i == grid.nx - 1 || j == grid.ny - 1 {
                out[idx] = true;
                continue;
            }
            if !mask.solid[grid.idx(i - 1, j)]
                || !mask.solid[grid.idx(i + 1, j)]
                || !mask.solid[grid.idx(i, j - 1)]
                || !mask.solid[grid.idx(i, j + 1)]
            {
                out[idx] = true;
            }
        }
    }
    out
}

/// The containment function g: 0 when the candidate shape encloses the
/// required region, 1 otherwise. Enclosure means every required cell is
/// solid in the candidate and a fill seeded inside the region cannot cross
/// the candidate's boundary ring to the grid border.
pub fn containment(
    candidate: &ShapeParams,
    required: &RequiredRegion,
    grid: &GridSpec,
) -> Result<u8> {
    if required.mask.grid != *grid {
        return Err(Error::invalid("required_region", "grid mismatch with candidate grid"));
    }
    let curve = match geometry::build_boundary(candidate, crate::flow::BOUNDARY_SAMPLES) {
        Ok(c) => c,
        Err(_) => return Ok(1),
    };
    let solid = match geometry::rasterize(&curve, grid) {
        Ok(m) => m,
        Err(_) => return Ok(1),
    };
    for (idx, &req) in required.mask.solid.iter().enumerate() {
        if req && !solid.solid[idx] {
            return Ok(1);
        }
    }
    // fill from the required cells through everything except the boundary
    // ring; reaching the grid border means the region leaks out
    let ring = outline(&solid);
    let mut seen = vec![false; solid.solid.len()];
    let mut stack: Vec<usize> = Vec::new();
    for (idx, &req) in required.mask.solid.iter().enumerate() {
        if req && !ring[idx] {
            seen[idx] = true;
            stack.push(idx);
        }
    }
    while let Some(idx) = stack.pop() {
        let (i, j) = (idx % grid.nx, idx / grid.nx);
        if i == 0 || j == 0 || i == grid.nx - 1 || j == grid.ny - 1 {
            return Ok(1);
        }
        for (di, dj) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)] {
            let (ni, nj) = (i as i64 + di, j as i64 + dj);
            let nidx = grid.idx(ni as usize, nj as usize);
            if !ring[nidx] && !seen[nidx] {
                seen[nidx] = true;
                stack.push(nidx);
            }
        }
    }
    Ok(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgldConfig {
    /// Gradient step η.
    pub step_size: f64,
    /// Standard deviation σ of the Gaussian noise.
    pub noise_scale: f64,
    pub iterations: usize,
    pub seed: u64,
    pub max_resamples: usize,
}

impl SgldConfig {
    /// Defaults scaled to the case width.
    pub fn for_width(width: f64, seed: u64) -> Self {
        Self {
            step_size: 1e-3 * width,
            noise_scale: 0.05 * width,
            iterations: 5000,
            seed,
            max_resamples: 50,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0) {
            return Err(Error::invalid("sgld.step_size", "must be > 0"));
        }
        if !(self.noise_scale >= 0.0) {
            return Err(Error::invalid("sgld.noise_scale", "must be >= 0"));
        }
        if self.iterations < 1 {
            return Err(Error::invalid("sgld.iterations", "must be >= 1"));
        }
        Ok(())
    }
}

/// One noisy descent step over the θ components (width stays fixed).
/// Gaussian noise is rejection-filtered so the total step stays within 90°
/// of the descent direction; after `max_resamples` rejections the pure
/// gradient step is taken. The result is clamped to the sampling box.
pub fn half_gaussian_step(
    r: &ShapeParams,
    grad: &[f64; 5],
    cfg: &SgldConfig,
    rng: &mut ChaCha8Rng,
) -> ShapeParams {
    let g = [grad[0], grad[1], grad[2], grad[3]];
    let descent = [-cfg.step_size * g[0], -cfg.step_size * g[1], -cfg.step_size * g[2], -cfg.step_size * g[3]];
    let normal = Normal::new(0.0, cfg.noise_scale.max(0.0)).expect("valid sigma");
    let mut step = descent;
    if cfg.noise_scale > 0.0 {
        let mut accepted = false;
        for _ in 0..=cfg.max_resamples {
            let mut d = descent;
            for v in &mut d {
                *v += normal.sample(rng);
            }
            // within 90° of -grad  <=>  dot(d, -grad) >= 0
            let dot: f64 = d.iter().zip(g.iter()).map(|(dv, gv)| dv * -gv).sum();
            if dot >= 0.0 {
                step = d;
                accepted = true;
                break;
            }
        }
        if !accepted {
            step = descent;
        }
    }
    let (lo, hi) = ShapeParams::bounds(r.width);
    let mut theta = r.theta;
    for (t, s) in theta.iter_mut().zip(step.iter()) {
        *t = (*t + s).clamp(lo, hi);
    }
    ShapeParams { theta, width: r.width }
}

/// Everything a constrained run produced, for property checks and logging.
#[derive(Debug, Clone)]
pub struct ConstrainedTrace {
    pub best_params: ShapeParams,
    pub best_prediction: f64,
    /// Every accepted iterate in order.
    pub iterates: Vec<ShapeParams>,
    /// dot(step, -grad) of every accepted noisy step.
    pub step_descent_dots: Vec<f64>,
    /// Best feasible prediction after each iteration.
    pub best_history: Vec<f64>,
}

/// Noisy descent over the surrogate restricted to shapes that enclose the
/// required region. Infeasible iterates are rejected and redrawn; after
/// `max_resamples` rejections the pure gradient step is halved until it is
/// feasible or vanishes.
pub fn constrained_minimize(
    model: &MlpModel,
    required: &RequiredRegion,
    width: f64,
    cfg: &SgldConfig,
    grid: &GridSpec,
) -> Result<(ShapeParams, f64)> {
    let trace = constrained_minimize_traced(model, required, width, cfg, grid)?;
    Ok((trace.best_params, trace.best_prediction))
}

pub fn constrained_minimize_traced(
    model: &MlpModel,
    required: &RequiredRegion,
    width: f64,
    cfg: &SgldConfig,
    grid: &GridSpec,
) -> Result<ConstrainedTrace> {
    cfg.validate()?;
    let (lo, hi) = ShapeParams::bounds(width);
    let corner = ShapeParams { theta: [hi; 4], width };
    if containment(&corner, required, grid)? == 1 {
        return Err(Error::InfeasibleConstraint(
            "even the box-maximum shape cannot enclose the required region".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    // feasible start: best model prediction among 64 probes
    let mut probes = vec![corner, ShapeParams { theta: [(lo + hi) / 2.0; 4], width }];
    while probes.len() < 64 {
        let theta = [
            rng.gen_range(lo..=hi),
            rng.gen_range(lo..=hi),
            rng.gen_range(lo..=hi),
            rng.gen_range(lo..=hi),
        ];
        probes.push(ShapeParams { theta, width });
    }
    let mut current = corner;
    let mut best_pred = f64::INFINITY;
    for p in &probes {
        if containment(p, required, grid)? == 0 {
            let pred = mlp_forward(model, p);
            if pred < best_pred {
                best_pred = pred;
                current = *p;
            }
        }
    }

    let mut trace = ConstrainedTrace {
        best_params: current,
        best_prediction: best_pred,
        iterates: vec![current],
        step_descent_dots: Vec::new(),
        best_history: vec![best_pred],
    };

    for _ in 0..cfg.iterations {
        let grad = mlp_input_gradient(model, &current);
        let gt = [grad[0], grad[1], grad[2], grad[3]];
        let mut accepted: Option<ShapeParams> = None;
        for _ in 0..=cfg.max_resamples {
            let next = half_gaussian_step(&current, &grad, cfg, &mut rng);
            if containment(&next, required, grid)? == 0 {
                accepted = Some(next);
                break;
            }
        }
        if accepted.is_none() {
            // halve the pure gradient step until feasible or negligible
            let mut eta = cfg.step_size;
            loop {
                let norm: f64 = gt.iter().map(|v| v * v).sum::<f64>();
                if eta * norm.sqrt() < 1e-12 {
                    break;
                }
                let mut theta = current.theta;
                for (t, g) in theta.iter_mut().zip(gt.iter()) {
                    *t = (*t - eta * g).clamp(lo, hi);
                }
                let cand = ShapeParams { theta, width };
                if containment(&cand, required, grid)? == 0 {
                    accepted = Some(cand);
                    break;
                }
                eta *= 0.5;
            }
        }
        let next = accepted.unwrap_or(current);
        let step: Vec<f64> = next.theta.iter().zip(current.theta.iter()).map(|(a, b)| a - b).collect();
        let dot: f64 = step.iter().zip(gt.iter()).map(|(s, g)| s * -g).sum();
        trace.step_descent_dots.push(dot);
        current = next;
        trace.iterates.push(current);
        let pred = mlp_forward(model, &current);
        if pred < trace.best_prediction {
            trace.best_prediction = pred;
            trace.best_params = current;
        }
        trace.best_history.push(trace.best_prediction);
    }
    Ok(trace)
}
