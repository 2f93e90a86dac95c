use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pcqa::frmetrics::MetricId;
use pcqa::pipeline::{self, Config, Manifest, PipelineError, SplitSpec};

/// Point cloud quality assessment pipeline.
#[derive(Parser, Debug)]
#[command(name = "pcqa", version)]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the dataset, model and training seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for build, score, eval and report.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Comma list: distortion ids for `build`, metric names for `score`.
    #[arg(long, global = true)]
    subset: Option<String>,
    /// Split file or `test=id,id`.
    #[arg(long, global = true)]
    split: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Distort every reference at every level.
    Build {
        #[arg(long)]
        refs: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute full-reference metrics for a manifest.
    Score {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit per-type mappings on subjective scores and label every row.
    Annotate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, required = true, num_args = 1..)]
        scores: Vec<PathBuf>,
        #[arg(long)]
        subjective: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the quality regressor on the train split.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on the test split.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Depth and residual-pattern ablation.
    Report {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn split_for(cli: &Cli, manifest: &PathBuf) -> pipeline::Result<SplitSpec> {
    let arg = cli
        .split
        .as_deref()
        .ok_or_else(|| PipelineError::Validation("--split is required".into()))?;
    SplitSpec::parse(arg, &Manifest::load(manifest)?.reference_ids())
}

fn run(cli: &Cli) -> pipeline::Result<()> {
    let mut config = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(s) = cli.seed {
        config.dataset_seed = s;
        config.model_seed = s;
        config.train.seed = s;
        config.ablation.train.seed = s;
    }
    match &cli.command {
        Command::Build { refs, out } => {
            if let Some(s) = &cli.subset {
                let ids = s
                    .split(',')
                    .map(|x| x.trim().parse::<u8>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| PipelineError::Validation(format!("--subset: {e}")))?;
                config.distortions = Some(ids);
            }
            let summary = pipeline::cmd_build(refs, out, &config, cli.jobs)?;
            println!("{} rows written to {}", summary.rows, summary.manifest.display());
            if !summary.failures.is_empty() {
                println!("{} failed rows:", summary.failures.len());
                for (id, e) in &summary.failures {
                    println!("  {id}: {e}");
                }
            }
        }
        Command::Score { manifest, out } => {
            if let Some(s) = &cli.subset {
                config.metrics = Some(s.split(',').map(|x| x.trim().to_string()).collect());
            }
            let metrics: Vec<MetricId> = config.metric_ids()?;
            let summary = pipeline::cmd_score(manifest, out, &metrics, cli.jobs)?;
            println!("{} scores written, {} inapplicable pairs skipped", summary.rows, summary.skipped.len());
        }
        Command::Annotate { manifest, scores, subjective, out } => {
            let s = pipeline::cmd_annotate(manifest, scores, subjective, out, &config)?;
            println!(
                "{} types calibrated, {} subjects rejected; holdout n={} PLCC {} SROCC {}",
                s.calibration.len(),
                s.rejected_subjects,
                s.holdout_count,
                pipeline::format_cell(s.holdout_plcc),
                pipeline::format_cell(s.holdout_srocc)
            );
        }
        Command::Train { manifest, out } => {
            let split = split_for(cli, manifest)?;
            let s = pipeline::cmd_train(manifest, &split, &config, out)?;
            println!("{} steps, final loss {:.5}; checkpoint {}", s.steps, s.final_loss, s.checkpoint.display());
        }
        Command::Eval { manifest, checkpoint, out } => {
            let split = split_for(cli, manifest)?;
            let expected = cli.config.as_ref().map(|_| &config.model);
            let r = pipeline::cmd_eval(manifest, &split, checkpoint, expected, config.train.voxel, out, cli.jobs)?;
            print!("{}", r.render());
        }
        Command::Report { manifest, out } => {
            let split = split_for(cli, manifest)?;
            let r = pipeline::cmd_report(manifest, &split, &config, out, cli.jobs)?;
            print!("{}", r.render());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
