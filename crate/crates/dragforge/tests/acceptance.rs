//! Acceptance gate: nine pinned criteria covering the dataset budget,
//! surrogate quality and ordering, the step-size schedule, both
//! verification-loop checks, gradient correctness, the flood-fill oracle,
//! SGLD feasibility, and solver properties. Every criterion prints one
//! PASS/FAIL line; any FAIL turns the single test red at the end, so a
//! partial run still reports every verdict it reached.
//!
//! Wall-clock budgets are pinned for a 4-core machine and scaled up
//! proportionally when fewer cores are available.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dragforge::active::{
    detect_degenerate, Verdict,
    choose_step, loss_score, minimize_drag, minimize_drag_with_model, step_size_candidates,
    surrogate_argmin, train_report, LoopConfig,
};
use dragforge::constraints::{
    constrained_minimize_traced, containment, flood_fill, Rect, RequiredRegion, SgldConfig,
};
use dragforge::dataset::{self, Dataset, DragEvaluator, DragSample, LbmEvaluator};
use dragforge::flow::{simulate, FlowConfig};
use dragforge::geometry::{GridSpec, OccupancyMask, ShapeParams};
use dragforge::surrogate::{
    batch_loss, batch_param_gradient, mlp_forward, mlp_init, mlp_init_custom, mlp_input_gradient,
    train, MlpModel, TrainConfig, TrainTrace,
};

/// Budget multiplier: criteria are stated for 4 cores; fewer cores get
/// proportionally more time, more cores get no discount.
fn scale() -> f64 {
    let cores = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1) as f64;
    (4.0 / cores).max(1.0)
}

fn budget(secs_on_4_cores: f64) -> Duration {
    Duration::from_secs_f64(secs_on_4_cores * scale())
}

struct Gate {
    failures: Vec<String>,
}

impl Gate {
    fn report(&mut self, id: &str, pass: bool, detail: &str) {
        println!("criterion {id}: {} — {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failures.push(format!("criterion {id}: {detail}"));
        }
    }
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dragforge"))
}

/// Runs `gen-dataset` through the CLI into `dir` and returns the dataset
/// path plus elapsed wall time.
fn generate_via_cli(dir: &Path, width: f64, levels: usize) -> (PathBuf, Duration) {
    std::fs::create_dir_all(dir).unwrap();
    let config = dir.join("config.json");
    std::fs::write(
        &config,
        format!(
            r#"{{ "width": {width}, "levels": {levels}, "output_dir": {:?} }}"#,
            dir.to_str().unwrap()
        ),
    )
    .unwrap();
    let start = Instant::now();
    let out = bin().args(["gen-dataset", "--config", config.to_str().unwrap()]).output().unwrap();
    let elapsed = start.elapsed();
    assert!(
        out.status.success(),
        "gen-dataset (width {width}, levels {levels}) failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    (dir.join("dataset.csv"), elapsed)
}

/// Analytic evaluator for the loop-soundness check: a paraboloid with its
/// minimum value 0.281 at theta = c.
struct QuadEvaluator {
    c: [f64; 4],
}

impl DragEvaluator for QuadEvaluator {
    fn evaluate(&self, params: &ShapeParams) -> DragSample {
        let drag: f64 =
            0.281 + params.theta.iter().zip(&self.c).map(|(t, c)| (t - c) * (t - c)).sum::<f64>();
        DragSample { params: *params, drag, converged: true }
    }
}

fn trace(losses: &[f64]) -> TrainTrace {
    TrainTrace {
        loss_checkpoints: losses.iter().enumerate().map(|(i, &l)| ((i + 1) * 1000, l)).collect(),
        final_train_mse: losses.last().copied().unwrap_or(0.0),
        final_test_mse: losses.last().copied().unwrap_or(0.0),
        grad_norm_at_init: 1.0,
        seed: 0,
    }
}

/// Smallest |pre-activation| over all hidden units; a case is kink-avoiding
/// when this margin is comfortably larger than the finite-difference step.
fn min_hidden_margin(m: &MlpModel, p: &ShapeParams) -> f64 {
    let feats = p.as_features();
    let mut a: Vec<f64> = (0..5).map(|i| (feats[i] - m.x_mean[i]) / m.x_std[i]).collect();
    let mut margin = f64::INFINITY;
    let last = m.layers.len() - 1;
    for (k, layer) in m.layers.iter().enumerate() {
        let mut next = vec![0.0; layer.b.len()];
        for (r, nv) in next.iter_mut().enumerate() {
            let mut acc = layer.b[r];
            for (c, &av) in a.iter().enumerate() {
                acc += layer.w[(r, c)] * av;
            }
            if k < last {
                margin = margin.min(acc.abs());
                *nv = acc.max(0.0);
            } else {
                *nv = acc;
            }
        }
        a = next;
    }
    margin
}

/// Relative error with a small floor: a ReLU net is piecewise linear, so
/// away from kinks the central difference is exact up to round-off
/// (~eps/h); near-zero gradient components are compared against that floor
/// rather than blowing the ratio up.
fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Independent queue-based BFS used as the flood-fill oracle.
fn bfs_reachable(mask: &OccupancyMask, seed: (usize, usize)) -> Vec<bool> {
    let grid = mask.grid;
    let mut seen = vec![false; grid.nx * grid.ny];
    let mut queue = std::collections::VecDeque::new();
    seen[grid.idx(seed.0, seed.1)] = true;
    queue.push_back(seed);
    while let Some((i, j)) = queue.pop_front() {
        let mut push = |ni: usize, nj: usize| {
            let idx = grid.idx(ni, nj);
            if !mask.solid[idx] && !seen[idx] {
                seen[idx] = true;
                queue.push_back((ni, nj));
            }
        };
        if i > 0 {
            push(i - 1, j);
        }
        if i + 1 < grid.nx {
            push(i + 1, j);
        }
        if j > 0 {
            push(i, j - 1);
        }
        if j + 1 < grid.ny {
            push(i, j + 1);
        }
    }
    seen
}

fn ellipse_mask(grid: GridSpec, cx: f64, cy: f64, rx: f64, ry: f64) -> OccupancyMask {
    let mut mask = OccupancyMask::empty(grid);
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let (x, y) = grid.cell_center(i, j);
            let dx = (x - cx) / rx;
            let dy = (y - cy) / ry;
            if dx * dx + dy * dy <= 1.0 {
                mask.solid[grid.idx(i, j)] = true;
            }
        }
    }
    mask
}

fn criterion_1(gate: &mut Gate, tmp: &Path) -> Option<(Dataset, Dataset)> {
    let (full_path, full_time) = generate_via_cli(&tmp.join("full"), 0.18, 5);
    let (smoke_path, smoke_time) = generate_via_cli(&tmp.join("smoke18"), 0.18, 3);
    let full = dataset::load(&full_path).unwrap();
    let smoke = dataset::load(&smoke_path).unwrap();
    let pass = full.len() == 625
        && smoke.len() == 81
        && full_time <= budget(1800.0)
        && smoke_time <= budget(240.0);
    gate.report(
        "1",
        pass,
        &format!(
            "levels=5 gave {} rows in {:.0}s (budget {:.0}s); levels=3 gave {} rows in {:.0}s (budget {:.0}s)",
            full.len(),
            full_time.as_secs_f64(),
            budget(1800.0).as_secs_f64(),
            smoke.len(),
            smoke_time.as_secs_f64(),
            budget(240.0).as_secs_f64()
        ),
    );
    pass.then_some((full, smoke))
}

fn criterion_2(gate: &mut Gate, full: &Dataset) {
    let (_, _, report) = train_report(full, 0, 3000, 15_000, 4, 0.2).unwrap();
    let six = report.mlp_test_mse;

    // Four hidden layers under the same budget: its own step-size sweep at
    // 3000 epochs, then the same five restart seeds at 15000 epochs.
    let four_arch = |seed: u64, step: f64, epochs: usize| {
        let cfg = TrainConfig { step_size: step, epochs, seed, ..TrainConfig::default() };
        train(&mlp_init_custom(seed, 1.0, 4, 32), full, &cfg)
    };
    // same degenerate filter as step_size_search: a dead-network collapse
    // (flat trace at mean-predictor loss) must not win the tie-break
    let scored: Vec<(f64, Option<usize>)> = step_size_candidates()
        .into_iter()
        .map(|s| {
            let score = four_arch(0, s, 3000).ok().and_then(|(_, t)| {
                let collapsed =
                    detect_degenerate(&t, &[]) != Verdict::Ok && t.final_train_mse > 0.5;
                (!collapsed).then(|| loss_score(&t))
            });
            (s, score)
        })
        .collect();
    let step = choose_step(&scored).unwrap();
    let four = (0..=4u64)
        .filter_map(|k| four_arch(k.wrapping_mul(7919), step, 15_000).ok())
        .map(|(_, t)| t.final_test_mse)
        .fold(f64::INFINITY, f64::min);

    let cap_ok = six <= 5e-3;
    let order_ok = six <= four;
    gate.report(
        "2",
        cap_ok && order_ok,
        &format!(
            "six-layer test MSE {six:.3e} (cap 5e-3: {cap_ok}); \
             four-layer best {four:.3e} at step {step:.6} (six <= four: {order_ok})"
        ),
    );
}

fn criterion_3(gate: &mut Gate, smoke18: &Dataset, tmp: &Path) {
    let (path15, _) = generate_via_cli(&tmp.join("smoke15"), 0.15, 3);
    let smoke15 = dataset::load(&path15).unwrap();
    let mut detail = String::new();
    let mut pass = true;
    for (label, ds) in [("0.18", smoke18), ("0.15", &smoke15)] {
        let (_, _, report) = train_report(ds, 0, 3000, 15_000, 4, 0.2).unwrap();
        pass &= report.mlp_test_mse <= report.linear_test_mse;
        detail.push_str(&format!(
            "width {label}: MLP {:.3e} vs linear {:.3e}; ",
            report.mlp_test_mse, report.linear_test_mse
        ));
    }
    gate.report("3", pass, detail.trim_end_matches("; "));
}

fn criterion_4(gate: &mut Gate) {
    let expected: Vec<f64> = (1..=12).map(|p| 1e-6 * 3f64.powi(p)).collect();
    let schedule_ok = step_size_candidates() == expected;

    // Twenty synthetic loss curves with hand-counted rise scores (a first
    // checkpoint above zero counts as a rise).
    let cases: [(&[f64], usize); 20] = [
        (&[], 0),
        (&[5.0], 1),
        (&[0.0], 0),
        (&[1.0, 2.0, 3.0], 3),
        (&[3.0, 2.0, 1.0], 1),
        (&[1.0, 1.0, 1.0], 1),
        (&[0.0, 0.0, 0.0], 0),
        (&[1.0, 0.0, 1.0], 2),
        (&[2.0, 1.0, 2.0, 1.0, 2.0], 3),
        (&[0.5, 0.4, 0.6, 0.2], 2),
        (&[-1.0, 0.0, 1.0], 2),
        (&[1e-9], 1),
        (&[0.0, 1.0], 1),
        (&[1.0, 1.5, 1.2, 1.3, 0.9], 3),
        (&[10.0, 9.0, 8.0, 7.0, 6.0, 5.0], 1),
        (&[0.0, 1.0, 0.0, 1.0, 0.0, 1.0], 3),
        (&[2.0, 2.0, 3.0], 2),
        (&[0.1, 0.2, 0.3, 0.2, 0.3], 4),
        (&[5.0, 4.0, 4.5, 4.25, 4.75, 4.1], 3),
        (&[1.0, 2.0, 1.0, 2.0, 3.0, 1.0, 0.5, 0.6], 5),
    ];
    let scores_ok = cases.iter().all(|(losses, want)| loss_score(&trace(losses)) == *want);

    // Ties break toward the last minimal candidate; diverged runs (None)
    // are skipped; all-diverged is an error.
    let tie = choose_step(&[(0.1, Some(2)), (0.2, Some(1)), (0.3, Some(1)), (0.4, None)]);
    let tie_ok = tie.map(|s| s == 0.3).unwrap_or(false)
        && choose_step(&[(0.1, None), (0.2, None)]).is_err();

    gate.report(
        "4",
        schedule_ok && scores_ok && tie_ok,
        &format!("schedule exact: {schedule_ok}; 20 hand-counted scores: {scores_ok}; last-minimal tie-break: {tie_ok}"),
    );
}

fn criterion_5a(gate: &mut Gate) -> Option<MlpModel> {
    let width = 0.18;
    let c = [0.08, 0.10, 0.10, 0.08];
    let quad = QuadEvaluator { c };
    // Analytic samples are free, so seed with the denser levels=4 grid and
    // confirm at a tolerance well inside the criterion's 0.02·w coordinate
    // check; the default 0.02 lets the loop verify before the surrogate has
    // localized the bowl.
    let ds = dataset::generate(width, 4, &quad);
    let cfg = LoopConfig { max_rounds: 10, confirm_tolerance: 0.005, ..LoopConfig::default() };
    match minimize_drag_with_model(&ds, &quad, &cfg) {
        Ok((res, model)) => {
            let coord_tol = 0.02 * width;
            let drag_ok = (res.best_drag - 0.281).abs() <= 1e-3;
            let worst_coord = res
                .best_params
                .theta
                .iter()
                .zip(&c)
                .map(|(t, c)| (t - c).abs())
                .fold(0.0, f64::max);
            let coords_ok = worst_coord <= coord_tol;
            let pass = drag_ok && coords_ok && res.rounds <= 10;
            gate.report(
                "5a",
                pass,
                &format!(
                    "best drag {:.6} (target 0.281±1e-3: {drag_ok}); worst coordinate error {worst_coord:.4} (tol {coord_tol:.4}: {coords_ok}); {} rounds",
                    res.best_drag, res.rounds
                ),
            );
            // criterion 8 only needs *a* trained surrogate; keep the model
            // even when the coordinate clause above fails
            Some(model)
        }
        Err(e) => {
            gate.report("5a", false, &format!("minimize_drag failed: {e}"));
            None
        }
    }
}

fn criterion_5b(gate: &mut Gate, full: &Dataset) {
    let initial_min = full.min_drag().unwrap();
    let evaluator = LbmEvaluator { cfg: FlowConfig::default() };
    let cfg = LoopConfig { max_rounds: 10, ..LoopConfig::default() };
    let start = Instant::now();
    match minimize_drag(full, &evaluator, &cfg) {
        Ok(res) => {
            let elapsed = start.elapsed();
            let pass = res.verified
                && res.best_drag < initial_min
                && res.rounds <= 10
                && elapsed <= budget(3600.0);
            gate.report(
                "5b",
                pass,
                &format!(
                    "verified={}, best drag {:.6} vs initial grid min {:.6}, {} rounds, {:.0}s (budget {:.0}s)",
                    res.verified,
                    res.best_drag,
                    initial_min,
                    res.rounds,
                    elapsed.as_secs_f64(),
                    budget(3600.0).as_secs_f64()
                ),
            );
        }
        Err(e) => gate.report("5b", false, &format!("minimize_drag failed: {e}")),
    }
}

fn criterion_6(gate: &mut Gate) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let (lo, hi) = ShapeParams::bounds(0.18);
    let h = 1e-5;
    let mut cases = 0usize;
    let mut worst = 0.0f64;

    while cases < 100 {
        // Fresh model with small positive biases so hidden units sit away
        // from their kinks; reject any case whose margin is still thin.
        let mut model = mlp_init(rng.gen(), 1.0);
        for layer in model.layers.iter_mut() {
            layer.b.mapv_inplace(|_| rng.gen_range(0.01..0.1));
        }
        let theta = [(); 4].map(|_| rng.gen_range(lo..=hi));
        let p = ShapeParams { theta, width: 0.18 };
        if min_hidden_margin(&model, &p) < 1e-3 {
            continue;
        }

        // Input gradient vs central differences over all five features.
        let analytic = mlp_input_gradient(&model, &p);
        for d in 0..5 {
            let bump = |sign: f64| {
                let mut q = p;
                if d < 4 {
                    q.theta[d] += sign * h;
                } else {
                    q.width += sign * h;
                }
                mlp_forward(&model, &q)
            };
            let fd = (bump(1.0) - bump(-1.0)) / (2.0 * h);
            worst = worst.max(rel_err(analytic[d], fd));
        }

        // One random weight coordinate vs central differences of the batch
        // loss on a small random batch.
        let batch: Vec<DragSample> = (0..8)
            .map(|_| DragSample {
                params: ShapeParams {
                    theta: [(); 4].map(|_| rng.gen_range(lo..=hi)),
                    width: 0.18,
                },
                drag: rng.gen_range(0.1..1.0),
                converged: true,
            })
            .collect();
        if batch.iter().any(|s| min_hidden_margin(&model, &s.params) < 1e-3) {
            continue;
        }
        let grads = batch_param_gradient(&model, &batch);
        let l = rng.gen_range(0..model.layers.len());
        let r = rng.gen_range(0..model.layers[l].w.nrows());
        let cix = rng.gen_range(0..model.layers[l].w.ncols());
        let analytic_w = grads[l].0[(r, cix)];
        let perturbed = |sign: f64| {
            let mut m = model.clone();
            m.layers[l].w[(r, cix)] += sign * h;
            batch_loss(&m, &batch)
        };
        let fd_w = (perturbed(1.0) - perturbed(-1.0)) / (2.0 * h);
        worst = worst.max(rel_err(analytic_w, fd_w));
        cases += 1;
    }

    let elapsed = start.elapsed();
    let pass = worst <= 1e-4 && elapsed <= budget(10.0);
    gate.report(
        "6",
        pass,
        &format!(
            "worst relative error {worst:.2e} over {cases} cases in {:.2}s (budget {:.0}s)",
            elapsed.as_secs_f64(),
            budget(10.0).as_secs_f64()
        ),
    );
}

fn criterion_7(gate: &mut Gate) {
    let start = Instant::now();
    let grid = GridSpec { nx: 4, ny: 4, spacing: 1.0, origin: (0.0, 0.0) };
    let mut mismatches = 0usize;
    for pattern in 0u32..65_536 {
        let mut mask = OccupancyMask::empty(grid);
        for bit in 0..16 {
            mask.solid[bit] = pattern >> bit & 1 == 1;
        }
        if pattern == 0xFFFF {
            if flood_fill(&mask, (0, 0)).is_ok() {
                mismatches += 1;
            }
            continue;
        }
        for j in 0..4 {
            for i in 0..4 {
                if mask.is_solid(i, j) {
                    continue;
                }
                let filled = flood_fill(&mask, (i, j)).unwrap();
                if filled.solid != bfs_reachable(&mask, (i, j)) {
                    mismatches += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = mismatches == 0 && elapsed <= budget(5.0);
    gate.report(
        "7",
        pass,
        &format!(
            "{mismatches} mismatches over 65536 patterns (every free seed) in {:.2}s (budget {:.0}s)",
            elapsed.as_secs_f64(),
            budget(5.0).as_secs_f64()
        ),
    );
}

fn criterion_8(gate: &mut Gate, model: &MlpModel) {
    let width = 0.18;
    let grid = FlowConfig::default().grid;
    let required =
        RequiredRegion::from_rects(&[Rect { x: 0.45, y: -0.02, w: 0.1, h: 0.04 }], grid).unwrap();
    let cfg = SgldConfig::for_width(width, 7);
    assert_eq!(cfg.iterations, 5000, "criterion is pinned to a 5000-iteration run");

    match constrained_minimize_traced(model, &required, width, &cfg, &grid) {
        Ok(trace) => {
            let feasible = trace
                .iterates
                .iter()
                .all(|p| containment(p, &required, &grid).unwrap() == 0);
            let descent = trace.step_descent_dots.iter().all(|&d| d >= 0.0);
            // the unconstrained reference must be the model's actual
            // minimum, not one optimizer's terminal point: seed the
            // multi-start argmin with the constrained best (unconstrained
            // descent from a feasible point can only match or improve it)
            // and also take a 21^4 grid scan of the model
            let (_, argmin_pred) =
                surrogate_argmin(model, width, 7, Some(trace.best_params.theta));
            let (lo, hi) = ShapeParams::bounds(width);
            let mut grid_min = f64::INFINITY;
            let at = |k: usize| lo + (hi - lo) * k as f64 / 20.0;
            for a in 0..21 {
                for b in 0..21 {
                    for c in 0..21 {
                        for d in 0..21 {
                            let p = ShapeParams {
                                theta: [at(a), at(b), at(c), at(d)],
                                width,
                            };
                            grid_min = grid_min.min(mlp_forward(model, &p));
                        }
                    }
                }
            }
            let unconstrained = argmin_pred.min(grid_min);
            let ordered = trace.best_prediction >= unconstrained - 1e-9;
            gate.report(
                "8",
                feasible && descent && ordered,
                &format!(
                    "{} accepted iterates all feasible: {feasible}; all dots >= 0: {descent}; constrained pred {:.6} >= unconstrained {:.6}: {ordered}",
                    trace.iterates.len(),
                    trace.best_prediction,
                    unconstrained
                ),
            );
        }
        Err(e) => gate.report("8", false, &format!("constrained run failed: {e}")),
    }
}

fn criterion_9(gate: &mut Gate) {
    let cfg = FlowConfig {
        grid: GridSpec { nx: 80, ny: 40, spacing: 0.02, origin: (-0.3, -0.4) },
        max_steps: 8000,
        ..FlowConfig::default()
    };
    let per_check = budget(120.0);
    let mut pass = true;
    let mut detail = String::new();

    let t = Instant::now();
    let empty = simulate(&OccupancyMask::empty(cfg.grid), &cfg).unwrap();
    pass &= empty.drag_force.abs() < 1e-10 && t.elapsed() <= per_check;
    detail.push_str(&format!("empty-mask |F_D| = {:.2e}; ", empty.drag_force.abs()));

    let t = Instant::now();
    let sym = simulate(&ellipse_mask(cfg.grid, 0.5, 0.0, 0.3, 0.12), &cfg).unwrap();
    pass &= sym.lift_force.abs() <= 1e-8 * sym.drag_force.abs() && t.elapsed() <= per_check;
    detail.push_str(&format!(
        "symmetric lift/drag = {:.2e}; ",
        sym.lift_force.abs() / sym.drag_force.abs()
    ));

    let t = Instant::now();
    let thin = simulate(&ellipse_mask(cfg.grid, 0.5, 0.0, 0.3, 0.05), &cfg).unwrap();
    let fat = simulate(&ellipse_mask(cfg.grid, 0.5, 0.0, 0.3, 0.10), &cfg).unwrap();
    pass &= fat.drag_force > thin.drag_force && t.elapsed() <= per_check;
    detail.push_str(&format!(
        "fat {:.4} > thin {:.4}; ",
        fat.drag_force, thin.drag_force
    ));

    let t = Instant::now();
    let a = simulate(&ellipse_mask(cfg.grid, 0.5, 0.0, 0.25, 0.08), &cfg).unwrap();
    let b = simulate(&ellipse_mask(cfg.grid, 0.5, 0.0, 0.25, 0.08), &cfg).unwrap();
    let bit_exact = a.drag_force.to_bits() == b.drag_force.to_bits()
        && a.lift_force.to_bits() == b.lift_force.to_bits()
        && a.velocity_field == b.velocity_field;
    pass &= bit_exact && t.elapsed() <= per_check;
    detail.push_str(&format!("bit-exact rerun: {bit_exact}"));

    gate.report("9", pass, &detail);
}

#[test]
fn acceptance() {
    let tmp = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    let mut gate = Gate { failures: Vec::new() };

    // Cheap, dataset-free criteria first so their verdicts always print.
    criterion_4(&mut gate);
    criterion_6(&mut gate);
    criterion_7(&mut gate);

    let model_5a = criterion_5a(&mut gate);
    match model_5a {
        Some(model) => criterion_8(&mut gate, &model),
        None => gate.report("8", false, "skipped: no surrogate from criterion 5a"),
    }

    criterion_9(&mut gate);

    // The solver-backed criteria share the 625-sample dataset.
    match criterion_1(&mut gate, &tmp) {
        Some((full, smoke18)) => {
            criterion_2(&mut gate, &full);
            criterion_3(&mut gate, &smoke18, &tmp);
            criterion_5b(&mut gate, &full);
        }
        None => {
            for id in ["2", "3", "5b"] {
                gate.report(id, false, "skipped: 625-sample dataset unavailable");
            }
        }
    }

    assert!(gate.failures.is_empty(), "failed criteria:\n{}", gate.failures.join("\n"));
}
