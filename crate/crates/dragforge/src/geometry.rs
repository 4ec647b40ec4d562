//! Shape parameterization: a 4-vector of control heights defines the upper
//! surface of a closed, axis-symmetric body via a natural cubic spline.
//! The same module owns rasterization onto a uniform grid and the derived
//! reference quantities (enclosed area, frontal height).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower bound of the sampling box as a fraction of `width`.
pub const THETA_MIN_FACTOR: f64 = 0.25;

/// Chord stations of the four control heights.
pub const CONTROL_STATIONS: [f64; 4] = [0.2, 0.4, 0.6, 0.8];

/// The 4 control heights plus the per-case width scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeParams {
    pub theta: [f64; 4],
    pub width: f64,
}

impl ShapeParams {
    /// Validates against the sampling box `[0.25·width, width]`.
    pub fn new(theta: [f64; 4], width: f64) -> Result<Self> {
        if !(width > 0.0) || !width.is_finite() {
            return Err(Error::invalid("width", format!("must be > 0, got {width}")));
        }
        let lo = THETA_MIN_FACTOR * width;
        for (i, &t) in theta.iter().enumerate() {
            if !t.is_finite() || t < lo || t > width {
                return Err(Error::invalid(
                    format!("theta[{i}]"),
                    format!("must lie in [{lo}, {width}], got {t}"),
                ));
            }
        }
        Ok(Self { theta, width })
    }

    /// The sampling box for this width.
    pub fn bounds(width: f64) -> (f64, f64) {
        (THETA_MIN_FACTOR * width, width)
    }

    /// Flat input vector for the regression models: (θ₁..θ₄, width).
    pub fn as_features(&self) -> [f64; 5] {
        [
            self.theta[0],
            self.theta[1],
            self.theta[2],
            self.theta[3],
            self.width,
        ]
    }
}

/// Uniform grid shared by the rasterizer and the flow solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub spacing: f64,
    pub origin: (f64, f64),
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, spacing: f64, origin: (f64, f64)) -> Result<Self> {
        if nx < 8 || ny < 8 {
            return Err(Error::invalid("grid", format!("nx, ny must be >= 8, got {nx}x{ny}")));
        }
        if !(spacing > 0.0) {
            return Err(Error::invalid("grid.spacing", format!("must be > 0, got {spacing}")));
        }
        Ok(Self { nx, ny, spacing, origin })
    }

    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.origin.0 + (i as f64 + 0.5) * self.spacing,
            self.origin.1 + (j as f64 + 0.5) * self.spacing,
        )
    }

    /// (x_min, y_min, x_max, y_max) of the grid extent.
    pub fn extent(&self) -> (f64, f64, f64, f64) {
        (
            self.origin.0,
            self.origin.1,
            self.origin.0 + self.nx as f64 * self.spacing,
            self.origin.1 + self.ny as f64 * self.spacing,
        )
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }
}

/// Closed counterclockwise boundary polyline; first point equals last.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCurve {
    pub points: Vec<(f64, f64)>,
}

impl BoundaryCurve {
    pub fn is_closed(&self) -> bool {
        self.points.len() >= 4 && self.points.first() == self.points.last()
    }

    pub fn bounding_box(&self) -> (f64, f64, f64, f64) {
        let mut bb = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &(x, y) in &self.points {
            bb.0 = bb.0.min(x);
            bb.1 = bb.1.min(y);
            bb.2 = bb.2.max(x);
            bb.3 = bb.3.max(y);
        }
        bb
    }

    /// CSV export, `x,y` per row, closing row repeated.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y\n");
        for &(x, y) in &self.points {
            out.push_str(&format!("{x},{y}\n"));
        }
        out
    }
}

/// Boolean raster of a shape; `solid[idx]` is true inside the body.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyMask {
    pub grid: GridSpec,
    pub solid: Vec<bool>,
}

impl OccupancyMask {
    pub fn empty(grid: GridSpec) -> Self {
        Self { solid: vec![false; grid.nx * grid.ny], grid }
    }

    pub fn is_solid(&self, i: usize, j: usize) -> bool {
        self.solid[self.grid.idx(i, j)]
    }

    pub fn solid_count(&self) -> usize {
        self.solid.iter().filter(|&&s| s).count()
    }

    /// Text export: header line `nx ny spacing x0 y0`, then ny rows
    /// (top row first) of space-separated 0/1.
    pub fn to_text(&self) -> String {
        let g = &self.grid;
        let mut out = format!("{} {} {} {} {}\n", g.nx, g.ny, g.spacing, g.origin.0, g.origin.1);
        for j in (0..g.ny).rev() {
            let row: Vec<&str> = (0..g.nx)
                .map(|i| if self.is_solid(i, j) { "1" } else { "0" })
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::Parse { line: 1, reason: "empty mask file".into() })?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 5 {
            return Err(Error::Parse {
                line: 1,
                reason: format!("expected `nx ny spacing x0 y0`, got {} fields", parts.len()),
            });
        }
        let bad = |f: &str| Error::Parse { line: 1, reason: format!("bad header field `{f}`") };
        let nx: usize = parts[0].parse().map_err(|_| bad(parts[0]))?;
        let ny: usize = parts[1].parse().map_err(|_| bad(parts[1]))?;
        let spacing: f64 = parts[2].parse().map_err(|_| bad(parts[2]))?;
        let x0: f64 = parts[3].parse().map_err(|_| bad(parts[3]))?;
        let y0: f64 = parts[4].parse().map_err(|_| bad(parts[4]))?;
        let grid = GridSpec::new(nx, ny, spacing, (x0, y0))?;
        let mut mask = OccupancyMask::empty(grid);
        for row in 0..ny {
            let (lineno, line) = lines.next().ok_or_else(|| Error::Parse {
                line: row + 2,
                reason: "missing mask row".into(),
            })?;
            let j = ny - 1 - row;
            let cells: Vec<&str> = line.split_whitespace().collect();
            if cells.len() != nx {
                return Err(Error::Parse {
                    line: lineno + 1,
                    reason: format!("expected {nx} cells, got {}", cells.len()),
                });
            }
            for (i, c) in cells.iter().enumerate() {
                mask.solid[grid.idx(i, j)] = match *c {
                    "0" => false,
                    "1" => true,
                    other => {
                        return Err(Error::Parse {
                            line: lineno + 1,
                            reason: format!("expected 0 or 1, got `{other}`"),
                        })
                    }
                };
            }
        }
        Ok(mask)
    }
}

/// Natural cubic spline through the fixed knots
/// (0,0), (0.2,θ₁), (0.4,θ₂), (0.6,θ₃), (0.8,θ₄), (1,0).
#[derive(Debug, Clone)]
pub struct ProfileSpline {
    ys: [f64; 6],
    /// Second derivatives at the knots; endpoints zero (natural).
    m: [f64; 6],
}

const KNOTS: [f64; 6] = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
const H: f64 = 0.2;

impl ProfileSpline {
    pub fn new(theta: [f64; 4]) -> Self {
        let ys = [0.0, theta[0], theta[1], theta[2], theta[3], 0.0];
        // Tridiagonal system for interior second derivatives, uniform knots:
        // h/6·M[k-1] + 2h/3·M[k] + h/6·M[k+1] = (y[k+1] - 2y[k] + y[k-1])/h
        let mut diag = [2.0 * H / 3.0; 4];
        let mut rhs = [0.0; 4];
        for k in 0..4 {
            rhs[k] = (ys[k + 2] - 2.0 * ys[k + 1] + ys[k]) / H;
        }
        let off = H / 6.0;
        // Thomas algorithm.
        for k in 1..4 {
            let w = off / diag[k - 1];
            diag[k] -= w * off;
            rhs[k] -= w * rhs[k - 1];
        }
        let mut mi = [0.0; 4];
        mi[3] = rhs[3] / diag[3];
        for k in (0..3).rev() {
            mi[k] = (rhs[k] - off * mi[k + 1]) / diag[k];
        }
        let m = [0.0, mi[0], mi[1], mi[2], mi[3], 0.0];
        Self { ys, m }
    }

    /// Raw spline value at chord position `x` (zero outside [0,1]).
    pub fn eval_raw(&self, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        let k = ((x / H) as usize).min(4);
        let a = KNOTS[k];
        let t = x - a;
        let u = KNOTS[k + 1] - x;
        self.m[k] * u * u * u / (6.0 * H)
            + self.m[k + 1] * t * t * t / (6.0 * H)
            + (self.ys[k] / H - self.m[k] * H / 6.0) * u
            + (self.ys[k + 1] / H - self.m[k + 1] * H / 6.0) * t
    }

    /// Spline value clamped at zero so the profile never crosses the axis.
    pub fn eval(&self, x: f64) -> f64 {
        self.eval_raw(x).max(0.0)
    }

    /// Exact maximum of the raw spline over the chord, per-piece via the
    /// derivative quadratic.
    pub fn max_value(&self) -> f64 {
        let mut best = 0.0f64;
        for k in 0..5 {
            best = best.max(self.eval_raw(KNOTS[k]));
            best = best.max(self.eval_raw(KNOTS[k + 1] - 1e-15));
            // s'(x) = -M[k]·u²/(2h) + M[k+1]·t²/(2h) + (y[k+1]-y[k])/h - (M[k+1]-M[k])·h/6
            // with t = x - x_k, u = h - t. Expand into a·t² + b·t + c.
            let (m0, m1) = (self.m[k], self.m[k + 1]);
            let a = (m1 - m0) / (2.0 * H);
            let b = m0;
            let c = -m0 * H / 2.0 + (self.ys[k + 1] - self.ys[k]) / H - (m1 - m0) * H / 6.0;
            // stable quadratic: the naive (-b ± √disc)/2a form loses the
            // small root to cancellation when a ≈ 0 (symmetric profiles)
            let disc = b * b - 4.0 * a * c;
            let mut roots = Vec::new();
            if disc >= 0.0 {
                let q = -0.5 * (b + b.signum() * disc.sqrt());
                if a != 0.0 {
                    roots.push(q / a);
                }
                if q != 0.0 {
                    roots.push(c / q);
                } else if a == 0.0 && b != 0.0 {
                    roots.push(-c / b);
                }
            }
            for t in roots {
                if (0.0..=H).contains(&t) {
                    best = best.max(self.eval_raw(KNOTS[k] + t));
                }
            }
        }
        best
    }
}

/// Builds the closed counterclockwise boundary: lower (mirrored) profile
/// from leading to trailing edge, then the upper profile back.
pub fn build_boundary(params: &ShapeParams, samples_per_side: usize) -> Result<BoundaryCurve> {
    if samples_per_side < 16 {
        return Err(Error::invalid(
            "samples_per_side",
            format!("must be >= 16, got {samples_per_side}"),
        ));
    }
    for (i, &t) in params.theta.iter().enumerate() {
        if t <= 0.0 {
            return Err(Error::DegenerateShape(format!("theta[{i}] = {t} <= 0")));
        }
    }
    let spline = ProfileSpline::new(params.theta);
    let n = samples_per_side;
    let mut points = Vec::with_capacity(2 * n - 1);
    let xs: Vec<f64> = (0..n).map(|k| k as f64 / (n - 1) as f64).collect();
    for &x in &xs {
        points.push((x, -spline.eval(x)));
    }
    for &x in xs.iter().rev().skip(1) {
        points.push((x, spline.eval(x)));
    }
    // Endpoint ordinates are exactly zero, so the curve closes bit-exactly
    // once -0.0 is normalized.
    points[0].1 = 0.0;
    let last = points.len() - 1;
    points[last] = points[0];
    let mid = n - 1;
    points[mid].1 = 0.0;
    Ok(BoundaryCurve { points })
}

/// Even–odd rule at cell centers.
pub fn rasterize(curve: &BoundaryCurve, grid: &GridSpec) -> Result<OccupancyMask> {
    if !curve.is_closed() {
        return Err(Error::invalid("curve", "must be closed"));
    }
    let (bx0, by0, bx1, by1) = curve.bounding_box();
    let (gx0, gy0, gx1, gy1) = grid.extent();
    if bx0 <= gx0 || by0 <= gy0 || bx1 >= gx1 || by1 >= gy1 {
        return Err(Error::OutOfBounds(format!(
            "curve bbox [{bx0},{by0}]..[{bx1},{by1}] not strictly inside grid [{gx0},{gy0}]..[{gx1},{gy1}]"
        )));
    }
    let mut mask = OccupancyMask::empty(*grid);
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let (cx, cy) = grid.cell_center(i, j);
            if cx < bx0 || cx > bx1 || cy < by0 || cy > by1 {
                continue;
            }
            mask.solid[grid.idx(i, j)] = point_in_polygon_even_odd(cx, cy, &curve.points);
        }
    }
    Ok(mask)
}

/// Ray-crossing parity test; the closing point is skipped so each edge
/// counts once.
pub fn point_in_polygon_even_odd(px: f64, py: f64, poly: &[(f64, f64)]) -> bool {
    let n = poly.len() - 1;
    let mut inside = false;
    for k in 0..n {
        let (x1, y1) = poly[k];
        let (x2, y2) = poly[k + 1];
        if (y1 > py) != (y2 > py) {
            let xc = x1 + (py - y1) / (y2 - y1) * (x2 - x1);
            if px < xc {
                inside = !inside;
            }
        }
    }
    inside
}

/// Solid-cell count times cell area.
pub fn enclosed_area(mask: &OccupancyMask) -> f64 {
    mask.solid_count() as f64 * mask.grid.spacing * mask.grid.spacing
}

/// Total thickness presented to the flow: twice the spline maximum.
pub fn frontal_height(params: &ShapeParams) -> f64 {
    2.0 * ProfileSpline::new(params.theta).max_value()
}
