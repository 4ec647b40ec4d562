//! The self-correcting outer loops: geometric step-size search scored by
//! loss-curve monotonicity, degenerate-training detection with restarts,
//! best-run selection, surrogate minimization, and the drag-minimum
//! verification loop that grows the dataset one simulated proposal at a
//! time.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, DragEvaluator, DragSample};
use crate::error::{Error, Result};
use crate::geometry::ShapeParams;
use crate::surrogate::{
    mlp_forward, mlp_init, mlp_input_gradient, train, MlpModel, TrainConfig, TrainTrace,
};

/// Geometric step-size schedule 1e-6·3^p for p = 1.. while < 1.
pub fn step_size_candidates() -> Vec<f64> {
    let mut out = Vec::new();
    let mut power = 1u32;
    loop {
        let step = 1e-6 * 3f64.powi(power as i32);
        if step >= 1.0 {
            break;
        }
        out.push(step);
        power += 1;
    }
    out
}

/// One candidate of the step-size sweep; `score` is `None` when the run
/// diverged (treated as +∞).
#[derive(Debug, Clone)]
pub struct CandidateRun {
    pub step_size: f64,
    pub score: Option<usize>,
    pub trace: TrainTrace,
}

#[derive(Debug, Clone)]
pub struct StepSizeReport {
    pub candidates: Vec<CandidateRun>,
    pub chosen: f64,
}

/// Number of rises in the loss curve with a leading zero prepended, so a
/// first checkpoint above zero always counts as one rise.
pub fn loss_score(trace: &TrainTrace) -> usize {
    let mut prev = 0.0f64;
    let mut score = 0;
    for &(_, loss) in &trace.loss_checkpoints {
        if loss > prev {
            score += 1;
        }
        prev = loss;
    }
    score
}

/// Trains one fresh model per candidate step size and picks the smallest
/// score; ties break toward the last minimal candidate. Diverged runs and
/// dead-network collapses (zero-derivative trace stuck above mean-predictor
/// loss) score +∞: an oversized step that kills every ReLU leaves a
/// perfectly flat loss curve at standardized MSE 1.0, which would otherwise
/// tie the healthy candidates and win the last-minimal tie-break.
pub fn step_size_search(ds: &Dataset, seed: u64, epochs: usize) -> Result<StepSizeReport> {
    let candidates = step_size_candidates();
    let ci = 1000.min(epochs).max(1);
    let runs: Vec<CandidateRun> = candidates
        .par_iter()
        .map(|&step_size| {
            let cfg = TrainConfig {
                step_size,
                epochs,
                checkpoint_interval: ci,
                test_fraction: 0.0,
                seed,
                init_scale: 1.0,
            };
            let init = mlp_init(seed, cfg.init_scale);
            match train(&init, ds, &cfg) {
                Ok((_, trace)) => {
                    // flat at near-zero loss is converged memorization, not
                    // collapse; flat at mean-predictor loss (1.0) is dead
                    let collapsed = detect_degenerate(&trace, &[]) != Verdict::Ok
                        && trace.final_train_mse > 0.5;
                    let score = (!collapsed).then(|| loss_score(&trace));
                    CandidateRun { step_size, score, trace }
                }
                Err(e) => CandidateRun { step_size, score: None, trace: e.trace },
            }
        })
        .collect();

    let chosen = choose_step(
        &runs.iter().map(|r| (r.step_size, r.score)).collect::<Vec<_>>(),
    )?;
    Ok(StepSizeReport { candidates: runs, chosen })
}

/// Picks the step with the lowest score; ties break toward the *last*
/// minimal candidate; `None` scores (diverged runs) are skipped; all
/// diverged is a schedule-exhausted error.
pub fn choose_step(scored: &[(f64, Option<usize>)]) -> Result<f64> {
    let mut chosen = None;
    let mut best = usize::MAX;
    for &(step, score) in scored {
        if let Some(score) = score {
            if score <= best {
                best = score;
                chosen = Some(step);
            }
        }
    }
    chosen.ok_or(Error::ScheduleExhausted)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Ok,
    ZeroDerivative,
    LocalMinimum,
}

/// Flags zero-gradient / flat runs and runs that a restart beat by 2x.
pub fn detect_degenerate(trace: &TrainTrace, restarts: &[TrainTrace]) -> Verdict {
    if trace.grad_norm_at_init < 1e-12 {
        return Verdict::ZeroDerivative;
    }
    if let (Some(max), Some(min)) = (
        trace.loss_checkpoints.iter().map(|c| c.1).reduce(f64::max),
        trace.loss_checkpoints.iter().map(|c| c.1).reduce(f64::min),
    ) {
        if max - min < 1e-15 {
            return Verdict::ZeroDerivative;
        }
    }
    for r in restarts {
        if r.final_train_mse < 0.5 * trace.final_train_mse {
            return Verdict::LocalMinimum;
        }
    }
    Verdict::Ok
}

/// Primary key lowest test MSE; near-ties (1e-12) break on train/test gap,
/// then on run order.
pub fn select_best_run(runs: &[(MlpModel, TrainTrace)]) -> Result<(MlpModel, TrainTrace)> {
    let viable: Vec<&(MlpModel, TrainTrace)> =
        runs.iter().filter(|(_, t)| t.final_test_mse.is_finite()).collect();
    if viable.is_empty() {
        return Err(Error::NoViableRun);
    }
    let mut best = viable[0];
    for run in &viable[1..] {
        let (bt, rt) = (best.1.final_test_mse, run.1.final_test_mse);
        if rt < bt - 1e-12 {
            best = run;
        } else if (rt - bt).abs() <= 1e-12 {
            let bgap = (best.1.final_test_mse - best.1.final_train_mse).abs();
            let rgap = (run.1.final_test_mse - run.1.final_train_mse).abs();
            if rgap < bgap {
                best = run;
            }
        }
    }
    Ok(best.clone())
}

/// Multi-start projected gradient descent on the surrogate over θ with the
/// width held fixed: 64 seeded starts (box center, the best known point,
/// 62 uniform draws), step 1e-3·w for 2000 iterations, clamped to the box.
pub fn surrogate_argmin(
    model: &MlpModel,
    width: f64,
    seed: u64,
    best_known: Option<[f64; 4]>,
) -> (ShapeParams, f64) {
    let (lo, hi) = ShapeParams::bounds(width);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts = vec![[(lo + hi) / 2.0; 4]];
    starts.push(best_known.unwrap_or([(lo + 2.0 * hi) / 3.0; 4]));
    while starts.len() < 64 {
        starts.push([
            rng.gen_range(lo..=hi),
            rng.gen_range(lo..=hi),
            rng.gen_range(lo..=hi),
            rng.gen_range(lo..=hi),
        ]);
    }
    let eta = 1e-3 * width;
    let results: Vec<(ShapeParams, f64)> = starts
        .par_iter()
        .map(|&start| {
            let mut theta = start;
            for _ in 0..2000 {
                let p = ShapeParams { theta, width };
                let g = mlp_input_gradient(model, &p);
                for k in 0..4 {
                    theta[k] = (theta[k] - eta * g[k]).clamp(lo, hi);
                }
            }
            let p = ShapeParams { theta, width };
            (p, mlp_forward(model, &p))
        })
        .collect();
    results
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least one start")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopConfig {
    pub seed: u64,
    pub max_rounds: usize,
    /// Epoch budget per step-size candidate.
    pub search_epochs: usize,
    /// Epoch budget for the selected-step training runs.
    pub train_epochs: usize,
    /// Extra runs trained from fresh seeds each round.
    pub restarts: usize,
    /// Coordinate tolerance of the confirmation pass, as a fraction of w.
    pub confirm_tolerance: f64,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            max_rounds: 25,
            search_epochs: 3000,
            train_epochs: 15_000,
            restarts: 4,
            confirm_tolerance: 0.02,
        }
    }
}

/// One verification round, as logged to `rounds.jsonl`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub proposed: ShapeParams,
    pub predicted_drag: f64,
    pub simulated_drag: f64,
    pub converged: bool,
    pub dataset_min_before: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub best_params: ShapeParams,
    pub best_drag: f64,
    pub rounds: usize,
    pub history: Vec<RoundRecord>,
    pub verified: bool,
}

fn train_and_select(
    ds: &Dataset,
    step_size: f64,
    seed: u64,
    epochs: usize,
    restarts: usize,
) -> Result<(MlpModel, TrainTrace)> {
    let seeds: Vec<u64> = (0..=restarts as u64).map(|k| seed.wrapping_add(k * 7919)).collect();
    let runs: Vec<Option<(MlpModel, TrainTrace)>> = seeds
        .par_iter()
        .map(|&s| {
            let cfg = TrainConfig {
                step_size,
                epochs,
                checkpoint_interval: 1000.min(epochs).max(1),
                test_fraction: 0.0,
                seed: s,
                init_scale: 1.0,
            };
            train(&mlp_init(s, cfg.init_scale), ds, &cfg).ok()
        })
        .collect();
    let mut viable: Vec<(MlpModel, TrainTrace)> = runs.into_iter().flatten().collect();
    if viable.is_empty() {
        return Err(Error::NoViableRun);
    }
    // refresh the initializer when the primary run degenerated
    let restart_traces: Vec<TrainTrace> = viable[1..].iter().map(|(_, t)| t.clone()).collect();
    if detect_degenerate(&viable[0].1, &restart_traces) == Verdict::ZeroDerivative {
        let s = seed.wrapping_add(104_729);
        let cfg = TrainConfig {
            step_size,
            epochs,
            checkpoint_interval: 1000.min(epochs).max(1),
            test_fraction: 0.0,
            seed: s,
            init_scale: 1.0,
        };
        if let Ok(run) = train(&mlp_init(s, cfg.init_scale), ds, &cfg) {
            viable.push(run);
        }
    }
    select_best_run(&viable)
}

/// Evaluation summary comparing the network against the linear baseline on
/// an identical seeded split; MSEs are in standardized-target units.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub chosen_step_size: f64,
    pub candidates: Vec<CandidateSummary>,
    pub mlp_train_mse: f64,
    pub mlp_test_mse: f64,
    pub linear_train_mse: f64,
    pub linear_test_mse: f64,
    pub linear_cv_mean_mse: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateSummary {
    pub step_size: f64,
    /// None means the run diverged (score +∞).
    pub score: Option<usize>,
    pub final_train_mse: f64,
}

/// Full evaluation pipeline: step-size sweep, restart training with an
/// 80/20-style split, best-run selection, and the linear baseline on the
/// same split.
pub fn train_report(
    ds: &Dataset,
    seed: u64,
    search_epochs: usize,
    train_epochs: usize,
    restarts: usize,
    test_fraction: f64,
) -> Result<(MlpModel, TrainTrace, TrainReport)> {
    use rand::seq::SliceRandom;

    let report = step_size_search(ds, seed, search_epochs)?;
    let seeds: Vec<u64> = (0..=restarts as u64).map(|k| seed.wrapping_add(k * 7919)).collect();
    let runs: Vec<(MlpModel, TrainTrace)> = seeds
        .par_iter()
        .filter_map(|&s| {
            let cfg = TrainConfig {
                step_size: report.chosen,
                epochs: train_epochs,
                checkpoint_interval: 1000.min(train_epochs).max(1),
                test_fraction,
                seed: s,
                init_scale: 1.0,
            };
            train(&mlp_init(s, cfg.init_scale), ds, &cfg).ok()
        })
        .collect();
    let (model, trace) = select_best_run(&runs)?;

    // linear baseline on the identical seeded split, reported in the same
    // standardized units (train-split target variance)
    let mut order: Vec<usize> = (0..ds.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(trace.seed);
    order.shuffle(&mut rng);
    let n_test = (test_fraction * ds.len() as f64).ceil() as usize;
    let n_train = ds.len() - n_test;
    let train_ds = Dataset {
        samples: order[..n_train].iter().map(|&i| ds.samples[i]).collect(),
        width: ds.width,
    };
    let test_ds = Dataset {
        samples: order[n_train..].iter().map(|&i| ds.samples[i]).collect(),
        width: ds.width,
    };
    let lm = crate::surrogate::fit_linear(&train_ds)?;
    let y_mean = train_ds.samples.iter().map(|s| s.drag).sum::<f64>() / n_train as f64;
    let y_var = train_ds.samples.iter().map(|s| (s.drag - y_mean) * (s.drag - y_mean)).sum::<f64>()
        / n_train as f64;
    let y_var = if y_var > 1e-24 { y_var } else { 1.0 };
    let mse_std = |d: &Dataset| {
        if d.is_empty() {
            return 0.0;
        }
        d.samples
            .iter()
            .map(|s| {
                let e = crate::surrogate::predict_linear(&lm, &s.params) - s.drag;
                e * e
            })
            .sum::<f64>()
            / (d.len() as f64 * y_var)
    };
    let linear_train_mse = mse_std(&train_ds);
    let linear_test_mse = if test_ds.is_empty() { linear_train_mse } else { mse_std(&test_ds) };
    let cv = crate::surrogate::kfold_cv(ds, 5.min(ds.len()), seed)?;

    let summary = TrainReport {
        chosen_step_size: report.chosen,
        candidates: report
            .candidates
            .iter()
            .map(|c| CandidateSummary {
                step_size: c.step_size,
                score: c.score,
                final_train_mse: c.trace.final_train_mse,
            })
            .collect(),
        mlp_train_mse: trace.final_train_mse,
        mlp_test_mse: trace.final_test_mse,
        linear_train_mse,
        linear_test_mse,
        linear_cv_mean_mse: cv.mean_mse / y_var,
        seed: trace.seed,
    };
    Ok((model, trace, summary))
}

/// Algorithm-2 style verification loop: train, propose the surrogate
/// argmin, simulate it, grow the dataset, and accept only a strict
/// improvement that survives one retrain-and-re-propose confirmation.
pub fn minimize_drag(
    ds: &Dataset,
    evaluator: &dyn DragEvaluator,
    cfg: &LoopConfig,
) -> Result<OptimizationResult> {
    minimize_drag_with_model(ds, evaluator, cfg).map(|(r, _)| r)
}

/// Same loop, additionally returning the last surrogate trained (used by
/// the constrained search that follows the unconstrained loop).
pub fn minimize_drag_with_model(
    ds: &Dataset,
    evaluator: &dyn DragEvaluator,
    cfg: &LoopConfig,
) -> Result<(OptimizationResult, MlpModel)> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset("minimize_drag needs a seeded dataset".into()));
    }
    if cfg.max_rounds < 1 {
        return Err(Error::invalid("max_rounds", "must be >= 1"));
    }
    let width = ds.width;
    let mut current = ds.clone();
    let mut history = Vec::new();
    let mut last_model: Option<MlpModel> = None;

    for round in 1..=cfg.max_rounds {
        let round_seed = cfg.seed.wrapping_add(round as u64 * 1_000_003);
        let report = step_size_search(&current, round_seed, cfg.search_epochs)?;
        let (model, _) = train_and_select(
            &current,
            report.chosen,
            round_seed,
            cfg.train_epochs,
            cfg.restarts,
        )?;
        let best_known = current.best_sample().map(|s| s.params.theta);
        let (proposal, predicted) = surrogate_argmin(&model, width, round_seed, best_known);

        let sample = evaluator.evaluate(&proposal);
        let simulated = if sample.converged && sample.drag.is_finite() {
            sample.drag
        } else {
            f64::INFINITY
        };
        let min_before = current.min_drag().unwrap_or(f64::INFINITY);
        current.samples.push(DragSample {
            params: proposal,
            drag: simulated,
            converged: sample.converged,
        });

        let mut accepted = false;
        last_model = Some(model);
        if simulated < min_before {
            // confirmation pass: retrain with the new point and require the
            // argmin to stay put
            let confirm_seed = round_seed.wrapping_add(31);
            let (confirm_model, _) = train_and_select(
                &current,
                report.chosen,
                confirm_seed,
                cfg.train_epochs,
                cfg.restarts,
            )?;
            let (confirm_prop, _) =
                surrogate_argmin(&confirm_model, width, confirm_seed, Some(proposal.theta));
            let tol = cfg.confirm_tolerance * width;
            accepted = proposal
                .theta
                .iter()
                .zip(confirm_prop.theta.iter())
                .all(|(a, b)| (a - b).abs() <= tol);
            last_model = Some(confirm_model);
        }

        history.push(RoundRecord {
            round,
            proposed: proposal,
            predicted_drag: predicted,
            simulated_drag: simulated,
            converged: sample.converged,
            dataset_min_before: min_before,
            accepted,
        });

        if accepted {
            let result = OptimizationResult {
                best_params: proposal,
                best_drag: simulated,
                rounds: round,
                history,
                verified: true,
            };
            return Ok((result, last_model.expect("model trained this round")));
        }
    }

    let best = current.best_sample().ok_or(Error::NoViableRun)?;
    let result = OptimizationResult {
        best_params: best.params,
        best_drag: best.drag,
        rounds: cfg.max_rounds,
        history,
        verified: false,
    };
    let model = last_model.ok_or(Error::NoViableRun)?;
    Ok((result, model))
}
