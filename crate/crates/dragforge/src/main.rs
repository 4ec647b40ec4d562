use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dragforge::active::{self, LoopConfig};
use dragforge::config::RunConfig;
use dragforge::constraints::{self, RequiredRegion, SgldConfig};
use dragforge::dataset::{self, LbmEvaluator};
use dragforge::error::Error;
use dragforge::flow;
use dragforge::geometry::{self, OccupancyMask, ShapeParams};

const EXIT_CONFIG: u8 = 1;
const EXIT_NOT_CONVERGED: u8 = 2;
const EXIT_TRAINING: u8 = 3;
const EXIT_INFEASIBLE: u8 = 4;

#[derive(Parser)]
#[command(name = "dragforge", about = "Drag minimization for spline-parameterized 2D shapes")]
struct Cli {
    /// Worker threads (also via DRAGFORGE_JOBS).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Dump the full default configuration as JSON.
    PrintConfig,
    /// Simulate one shape and print the drag sample as JSON.
    Simulate {
        #[command(flatten)]
        config: ConfigArg,
        /// Four control heights, comma separated.
        #[arg(long, value_delimiter = ',')]
        theta: Vec<f64>,
        /// Write the velocity/pressure field to this CSV path.
        #[arg(long)]
        field_dump: Option<PathBuf>,
    },
    /// Simulate the full factorial sampling grid and write dataset.csv.
    GenDataset {
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Step-size search + restart training + linear baseline report.
    Train {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Run the drag-minimum verification loop (and the constrained search
    /// when a required region is configured).
    Optimize {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        dataset: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let jobs = cli
        .jobs
        .or_else(|| std::env::var("DRAGFORGE_JOBS").ok().and_then(|v| v.parse().ok()));
    if let Some(jobs) = jobs {
        if rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global().is_err() {
            eprintln!("warning: thread pool already initialized; --jobs ignored");
        }
    }
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::InfeasibleConstraint(_) => EXIT_INFEASIBLE,
        Error::TrainingDiverged(_) | Error::ScheduleExhausted | Error::NoViableRun => EXIT_TRAINING,
        _ => EXIT_CONFIG,
    }
}

fn load_config(arg: &ConfigArg) -> dragforge::Result<RunConfig> {
    match &arg.config {
        Some(path) => RunConfig::from_file(path),
        None => {
            let cfg = RunConfig::default();
            cfg.validate()?;
            Ok(cfg)
        }
    }
}

fn run(cmd: Command) -> dragforge::Result<ExitCode> {
    match cmd {
        Command::PrintConfig => {
            println!("{}", serde_json::to_string_pretty(&RunConfig::default())?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate { config, theta, field_dump } => {
            let cfg = load_config(&config)?;
            let theta: [f64; 4] = theta.try_into().map_err(|_| {
                Error::invalid("theta", "expected exactly four comma-separated values")
            })?;
            let params = ShapeParams::new(theta, cfg.width)?;
            let sample = flow::evaluate_shape(&params, &cfg.flow);
            if let Some(path) = field_dump {
                let curve = geometry::build_boundary(&params, flow::BOUNDARY_SAMPLES)?;
                let mask = geometry::rasterize(&curve, &cfg.flow.grid)?;
                let result = flow::simulate(&mask, &cfg.flow)?;
                std::fs::write(path, result.field_csv(&cfg.flow.grid))?;
            }
            println!("{}", serde_json::to_string_pretty(&sample)?);
            if sample.converged {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(EXIT_NOT_CONVERGED))
            }
        }
        Command::GenDataset { config } => {
            let cfg = load_config(&config)?;
            let out = Path::new(&cfg.output_dir);
            std::fs::create_dir_all(out)?;
            let evaluator = LbmEvaluator { cfg: cfg.flow };
            let ds = dataset::generate(cfg.width, cfg.levels, &evaluator);
            dataset::save(&ds, &out.join("dataset.csv"))?;
            let meta = serde_json::json!({
                "config_hash": format!("{:016x}", config_hash(&cfg)),
                "rows": ds.len(),
                "width": cfg.width,
                "levels": cfg.levels,
                "generated_at": unix_time(),
            });
            std::fs::write(out.join("dataset.meta.json"), serde_json::to_string_pretty(&meta)?)?;
            eprintln!("wrote {} rows to {}", ds.len(), out.join("dataset.csv").display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Train { config, dataset: ds_path } => {
            let cfg = load_config(&config)?;
            let out = Path::new(&cfg.output_dir);
            std::fs::create_dir_all(out)?;
            let ds = dataset::filter_outliers(&dataset::load(&ds_path)?)?;
            let (model, trace, report) = active::train_report(
                &ds,
                cfg.train.seed,
                cfg.train.search_epochs,
                cfg.train.train_epochs,
                cfg.train.restarts,
                cfg.train.test_fraction,
            )?;
            std::fs::write(out.join("model.json"), model.to_json())?;
            std::fs::write(out.join("report.json"), serde_json::to_string_pretty(&report)?)?;
            let mut trace_csv = String::from("epoch,loss\n");
            for (epoch, loss) in &trace.loss_checkpoints {
                trace_csv.push_str(&format!("{epoch},{loss}\n"));
            }
            std::fs::write(out.join("trace.csv"), trace_csv)?;
            eprintln!(
                "mlp test mse {:.3e}, linear test mse {:.3e}",
                report.mlp_test_mse, report.linear_test_mse
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Optimize { config, dataset: ds_path } => {
            let cfg = load_config(&config)?;
            let out = Path::new(&cfg.output_dir);
            std::fs::create_dir_all(out)?;
            let ds = dataset::filter_outliers(&dataset::load(&ds_path)?)?;
            let evaluator = LbmEvaluator { cfg: cfg.flow };
            let loop_cfg: LoopConfig = cfg.loop_config();
            let (result, model) = active::minimize_drag_with_model(&ds, &evaluator, &loop_cfg)?;

            let mut rounds = String::new();
            for rec in &result.history {
                rounds.push_str(&serde_json::to_string(rec)?);
                rounds.push('\n');
            }
            std::fs::write(out.join("rounds.jsonl"), rounds)?;

            let mut doc = serde_json::to_value(&result)?;
            if let Some(section) = &cfg.constraint {
                let region = load_region(section, &cfg)?;
                let sgld = SgldConfig {
                    step_size: section.sgld_step_size.unwrap_or(1e-3 * cfg.width),
                    noise_scale: section.sgld_noise_scale.unwrap_or(0.05 * cfg.width),
                    iterations: section.sgld_iterations,
                    seed: section.sgld_seed,
                    max_resamples: section.sgld_max_resamples,
                };
                let (c_params, c_pred) = constraints::constrained_minimize(
                    &model,
                    &region,
                    cfg.width,
                    &sgld,
                    &cfg.flow.grid,
                )?;
                let c_sample = flow::evaluate_shape(&c_params, &cfg.flow);
                doc["constrained"] = serde_json::json!({
                    "params": c_params,
                    "predicted_drag": c_pred,
                    "simulated_drag": c_sample.drag,
                    "converged": c_sample.converged,
                });
                let curve = geometry::build_boundary(&c_params, 256)?;
                std::fs::write(out.join("constrained_curve.csv"), curve.to_csv())?;
            }
            std::fs::write(out.join("result.json"), serde_json::to_string_pretty(&doc)?)?;
            let curve = geometry::build_boundary(&result.best_params, 256)?;
            std::fs::write(out.join("curve.csv"), curve.to_csv())?;
            eprintln!(
                "best drag {:.6} after {} rounds (verified: {})",
                result.best_drag, result.rounds, result.verified
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn load_region(
    section: &dragforge::config::ConstraintSection,
    cfg: &RunConfig,
) -> dragforge::Result<RequiredRegion> {
    if let Some(path) = &section.region_file {
        let text = std::fs::read_to_string(path)?;
        RequiredRegion::new(OccupancyMask::from_text(&text)?)
    } else {
        RequiredRegion::from_rects(&section.rects, cfg.flow.grid)
    }
}

fn config_hash(cfg: &RunConfig) -> u64 {
    let text = serde_json::to_string(cfg).expect("serializable config");
    let mut h = DefaultHasher::new();
    text.hash(&mut h);
    h.finish()
}

fn unix_time() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}
