use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use dvqn_core::agents::Agent;
use dvqn_core::digest::sha256_hex;
use dvqn_core::envs::{make_env, EnvId};
use dvqn_core::harness::{
    emit_latent_scatter, emit_learning_curve, evaluate, run_training, CurveMetric, CurveSeries, ExperimentConfig,
    MetricsRow,
};
use dvqn_core::nnkit::{Checkpoint, Rng};
use dvqn_core::options::{
    choose_k, collect_embeddings, derive_options, kmeans, label_purity, pca_project, silhouette, LatentDataset,
    OptionExport,
};
use dvqn_core::{Error, Result};

#[derive(Parser)]
#[command(name = "dvqn", version, about = "Variational Q-network experiments and latent option discovery")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every trial of an experiment file.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        parallelism: Option<usize>,
        /// Print a progress line every N episodes per trial (0 disables).
        #[arg(long, default_value_t = 100)]
        progress: usize,
    },
    /// Greedy rollouts of a checkpoint; prints a JSON summary.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        env: EnvId,
        #[arg(long)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Collect latents, cluster them and export option specs plus a scatter plot.
    Options {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        env: EnvId,
        #[arg(long)]
        episodes: usize,
        /// Number of clusters, or `auto` to pick by silhouette over 2..=6.
        #[arg(long, default_value = "auto")]
        k: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Render SVG plots.
    Plot {
        #[arg(value_enum)]
        kind: PlotKind,
        /// metrics.csv files (curve) or one embeddings.json (scatter).
        #[arg(long = "in", num_args = 1.., required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = MetricArg::Return)]
        metric: MetricArg,
        /// Colour scatter points by the nearest option in this export.
        #[arg(long)]
        options: Option<PathBuf>,
        #[arg(long)]
        title: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PlotKind {
    Curve,
    Scatter,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Return,
    Steps,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        e if e.is_numerical() => 3,
        _ => 1,
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Train {
            config,
            seed,
            out,
            trials,
            parallelism,
            progress,
        } => train(&config, seed, out, trials, parallelism, progress),
        Command::Eval {
            checkpoint,
            env,
            episodes,
            seed,
        } => {
            let agent = load_agent(&checkpoint)?;
            let mut e = make_env(env, seed);
            let summary = evaluate(&agent, e.as_mut(), episodes, &mut Rng::new(seed).derive("eval"))?;
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
            Ok(ExitCode::SUCCESS)
        }
        Command::Options {
            checkpoint,
            env,
            episodes,
            k,
            out,
            seed,
        } => options(&checkpoint, env, episodes, &k, &out, seed),
        Command::Plot {
            kind,
            inputs,
            out,
            metric,
            options,
            title,
        } => {
            match kind {
                PlotKind::Curve => {
                    let metric = match metric {
                        MetricArg::Return => CurveMetric::Return,
                        MetricArg::Steps => CurveMetric::Steps,
                    };
                    let series = inputs
                        .iter()
                        .map(|p| CurveSeries::from_csv(p, metric))
                        .collect::<Result<Vec<_>>>()?;
                    emit_learning_curve(&series, metric, title.as_deref().unwrap_or("learning curve"), &out)?;
                }
                PlotKind::Scatter => {
                    let [input] = inputs.as_slice() else {
                        return Err(Error::Usage("scatter takes exactly one embeddings file".into()));
                    };
                    let dataset = read_dataset(input)?;
                    let clusters = match options {
                        Some(p) => {
                            let specs = OptionExport::load(&p)?.specs();
                            Some(
                                dataset
                                    .records
                                    .iter()
                                    .map(|r| dvqn_core::options::assign_option(&specs, &r.mu))
                                    .collect::<Vec<_>>(),
                            )
                        }
                        None => None,
                    };
                    scatter(&dataset, clusters.as_deref(), title.as_deref(), &out)?;
                }
            }
            eprintln!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn train(
    path: &Path,
    seed: Option<u64>,
    out: Option<PathBuf>,
    trials: Option<usize>,
    parallelism: Option<usize>,
    progress: usize,
) -> Result<ExitCode> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(o) = out {
        cfg.out_dir = o;
    }
    if let Some(t) = trials {
        cfg.trials = t;
    }
    if let Some(p) = parallelism {
        cfg.parallelism = p;
    }
    cfg.validate()?;
    let report = |r: &MetricsRow| {
        if progress > 0 && (r.episode + 1).is_multiple_of(progress) {
            eprintln!(
                "trial {} episode {} return {:.3} steps {}",
                r.trial,
                r.episode + 1,
                r.episode_return,
                r.steps
            );
        }
    };
    let summary = run_training(&cfg, Some(&report))?;
    println!(
        "{} {} over {} trials: final-{} mean return {:.3} ± {:.3} ({:.1}s); outputs in {}",
        summary.env,
        summary.agent,
        summary.trials,
        summary.final_window,
        summary.final_return_mean,
        summary.final_return_std,
        summary.wall_clock_secs,
        cfg.out_dir.display()
    );
    let aborted = summary.aborted_trials();
    if aborted.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        for t in &summary.trial_summaries {
            if let Some(msg) = &t.aborted {
                eprintln!("trial {} aborted: {msg}", t.trial);
            }
        }
        Ok(ExitCode::from(3))
    }
}

fn load_agent(path: &Path) -> Result<Agent> {
    Agent::from_checkpoint(&Checkpoint::load(path)?)
}

fn read_dataset(path: &Path) -> Result<LatentDataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn scatter(dataset: &LatentDataset, clusters: Option<&[usize]>, title: Option<&str>, out: &Path) -> Result<()> {
    let projection = pca_project(&dataset.points())?;
    let rewards: Vec<f64> = dataset.records.iter().map(|r| r.reward).collect();
    let default_title = format!(
        "{} latent space ({})",
        dataset.meta.env,
        if projection.passthrough { "raw" } else { "PCA" }
    );
    emit_latent_scatter(&projection.points, &rewards, clusters, title.unwrap_or(&default_title), out)
}

fn options(checkpoint: &Path, env: EnvId, episodes: usize, k: &str, out: &Path, seed: u64) -> Result<ExitCode> {
    let bytes = std::fs::read(checkpoint).map_err(|e| Error::Format(format!("{}: {e}", checkpoint.display())))?;
    let agent = Agent::from_checkpoint(&Checkpoint::from_bytes(&bytes)?)?;
    let mut dataset = collect_embeddings(&agent, env, episodes, seed)?;
    dataset.meta.checkpoint_digest = Some(sha256_hex(&bytes));
    let points = dataset.points();
    let rng = Rng::new(seed).derive("options");
    let k = if k == "auto" {
        choose_k(&points, 2..=6, &rng)?.0
    } else {
        k.parse::<usize>()
            .map_err(|_| Error::Config(format!("--k must be a positive integer or `auto`, got `{k}`")))?
    };
    let model = kmeans(&points, k, &rng)?;
    let specs = derive_options(&model, &dataset)?;
    let sil = if k >= 2 {
        Some(silhouette(&points, &model.assignment, k)?)
    } else {
        None
    };
    let purity = if dataset.records.iter().all(|r| r.env_label.is_some()) {
        Some(label_purity(&dataset, &model.assignment, k)?)
    } else {
        None
    };
    std::fs::create_dir_all(out).map_err(|e| Error::Format(format!("{}: {e}", out.display())))?;
    let mut export = OptionExport::new(&dataset, &model, &specs, sil, purity);
    if dataset.latent_dim != 2 {
        export.coordinates = "raw (scatter uses PCA)".into();
    }
    export.save(&out.join("options.json"))?;
    let json = serde_json::to_string(&dataset).expect("dataset serializes");
    let emb = out.join("embeddings.json");
    std::fs::write(&emb, json).map_err(|e| Error::Format(format!("{}: {e}", emb.display())))?;
    scatter(&dataset, Some(&model.assignment), None, &out.join("latent_scatter.svg"))?;
    println!(
        "{} records, k = {k}, silhouette {}, label purity {}; wrote {}",
        dataset.len(),
        sil.map_or("n/a".into(), |s| format!("{s:.4}")),
        purity.map_or("n/a".into(), |p| format!("{p:.4}")),
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}
