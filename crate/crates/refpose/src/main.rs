use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use refpose::commands::{cmd_estimate, cmd_evaluate, cmd_make_synth, cmd_overlay, report_json};
use refpose::config::RunConfig;
use refpose::core::synth::SynthConfig;
use refpose::{json, Error, Result};

#[derive(Parser)]
#[command(name = "refpose", version, about = "Model-free object pose estimation from posed reference images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the object pose in every query image.
    Estimate(EstimateArgs),
    /// Score predicted poses against ground truth.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        /// Report file; printed to stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Render a synthetic reference set, queries and ground truth.
    MakeSynth {
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 32)]
        n_ref: usize,
        #[arg(long, default_value_t = 24)]
        n_query: usize,
        /// Standard deviation of Gaussian noise added to queries, in [0, 1] intensity units.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
    },
    /// Draw the object cube for predicted (blue) and ground-truth (green) poses.
    Overlay {
        #[arg(long)]
        image: PathBuf,
        /// Camera file with the image's intrinsics.
        #[arg(long)]
        camera: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        pred: Option<PathBuf>,
        #[arg(long)]
        gt: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Args)]
struct EstimateArgs {
    /// Full run configuration as JSON; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long)]
    queries: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    n_detector: Option<usize>,
    #[arg(long)]
    n_selector: Option<usize>,
    #[arg(long)]
    template_size: Option<usize>,
    #[arg(long)]
    view_size: Option<usize>,
    #[arg(long)]
    n_levels: Option<usize>,
    #[arg(long)]
    pyramid_factor: Option<f64>,
    #[arg(long)]
    min_score: Option<f64>,
    #[arg(long)]
    n_angles: Option<usize>,
    #[arg(long)]
    n_neighbors: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    resolution: Option<usize>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    print_config: bool,
}

impl EstimateArgs {
    fn run_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($flag:ident => $($field:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$flag.clone() { cfg.$($field).+ = v.into(); })*
            };
        }
        set! {
            reference => reference,
            queries => queries,
            output => output,
            threads => threads,
            n_detector => database.n_detector,
            n_selector => database.n_selector,
            template_size => database.template_size,
            n_levels => pipeline.detector.n_levels,
            pyramid_factor => pipeline.detector.factor,
            min_score => pipeline.detector.min_score,
            n_angles => pipeline.selector.n_angles,
            n_neighbors => pipeline.refiner.n_neighbors,
            iterations => pipeline.refiner.iterations,
            resolution => pipeline.refiner.resolution,
        }
        if let Some(v) = self.view_size {
            cfg.database.view_size = v;
            cfg.pipeline.refiner.crop_size = v;
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Estimate(args) => {
            let cfg = args.run_config()?;
            if args.print_config {
                print!("{}", cfg.to_json());
                return Ok(());
            }
            let m = cmd_estimate(&cfg)?;
            eprintln!("estimated {} queries, {} failed", m.queries.len(), m.failed.len());
        }
        Command::Evaluate {
            pred,
            gt,
            reference,
            output,
        } => {
            let report = report_json(&cmd_evaluate(&pred, &gt, &reference)?);
            match output {
                Some(p) => json::write(&p, &report)?,
                None => print!("{}", json::to_string(&report)),
            }
        }
        Command::MakeSynth {
            output,
            seed,
            n_ref,
            n_query,
            noise,
        } => {
            if !(noise >= 0.0 && noise.is_finite()) {
                return Err(Error::Config("noise must be non-negative".into()));
            }
            cmd_make_synth(
                &output,
                &SynthConfig {
                    seed,
                    n_ref,
                    n_query,
                    noise,
                    ..SynthConfig::default()
                },
            )?;
        }
        Command::Overlay {
            image,
            camera,
            reference,
            pred,
            gt,
            output,
        } => cmd_overlay(&image, &camera, &reference, pred.as_deref(), gt.as_deref(), &output)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}] {}: {e}", e.exit_code(), e.kind());
            ExitCode::from(e.exit_code())
        }
    }
}
