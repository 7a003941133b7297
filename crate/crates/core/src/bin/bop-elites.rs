use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use bop_elites::benchmarks::problem_from_id;
use bop_elites::harness::{
    load_artifacts, pm_from_artifact, resolve_output, run_experiment, summarize, write_report,
    ExperimentSpec, Normalization, PmArtifact, Report, RunArtifact,
};
use bop_elites::prediction::{predicted_qd_score, PmOptions};
use bop_elites::Result;

#[derive(Parser)]
#[command(
    name = "bop-elites",
    version,
    about = "Quality-diversity Bayesian optimisation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormArg {
    None,
    PerSeedBest,
}

#[derive(Subcommand)]
enum Command {
    /// Run every cell and seed of an experiment spec.
    Run {
        spec: PathBuf,
        /// Override a spec key, e.g. `--set cells.0.budget=200`.
        #[arg(long = "set", value_name = "PATH=VALUE")]
        set: Vec<String>,
    },
    /// Build a prediction map on a run's own grid.
    Pm {
        artifact: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        generations: Option<usize>,
    },
    /// Build a prediction map on a finer grid from a run's models and history.
    Upscale {
        artifact: PathBuf,
        /// Partitions per descriptor dimension; one value is broadcast.
        #[arg(long, value_delimiter = ',', required = true)]
        resolution: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        generations: Option<usize>,
    },
    /// Evaluate a prediction map on the true problem.
    ScorePm {
        pm: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Aggregate the run artifacts below a directory into tables.
    Report {
        dir: PathBuf,
        #[arg(long, value_enum, default_value = "none")]
        normalization: NormArg,
        #[arg(long, default_value_t = 0.99)]
        confidence: f64,
    },
}

fn print_report(report: &Report) {
    println!(
        "{:<28} {:<16} {:>7} {:>5} {:>14} {:>12} {:>10}",
        "column", "algorithm", "budget", "runs", "mean", "se", "norm"
    );
    for r in &report.summary {
        println!(
            "{:<28} {:<16} {:>7} {:>5} {:>14.4} {:>12.4} {:>10}",
            r.column,
            r.algorithm,
            r.budget,
            r.runs,
            r.mean,
            r.se,
            r.normalized_mean
                .map_or(String::new(), |v| format!("{v:.4}"))
        );
    }
    for t in &report.tests {
        println!(
            "{}: {} vs {}: t = {:.3}, p = {:.4}{}",
            t.column,
            t.best,
            t.runner_up,
            t.t,
            t.p_value,
            if t.significant { " (significant)" } else { "" }
        );
    }
    for f in &report.failures {
        eprintln!(
            "FAILED {} {} seed {}: {}",
            f.column, f.label, f.seed, f.message
        );
    }
}

fn pm_options(generations: Option<usize>) -> PmOptions {
    let d = PmOptions::default();
    PmOptions {
        generations: generations.unwrap_or(d.generations),
        ..d
    }
}

fn build_pm(
    artifact: &Path,
    resolution: Option<&[usize]>,
    out: Option<PathBuf>,
    csv: Option<PathBuf>,
    generations: Option<usize>,
) -> Result<()> {
    let run = RunArtifact::load(artifact)?;
    let pm = pm_from_artifact(&run, resolution, &pm_options(generations))?;
    let default = if resolution.is_some() {
        "upscaled_pm.json"
    } else {
        "pm.json"
    };
    let out = out.unwrap_or_else(|| artifact.with_file_name(default));
    pm.save(&out)?;
    if let Some(csv) = csv {
        pm.pm.write_csv(csv)?;
    }
    println!(
        "{} proposals in {} regions, predicted score {:.4} -> {}",
        pm.pm.filled(),
        pm.pm.grid.region_count(),
        pm.pm.predicted_score(),
        out.display()
    );
    Ok(())
}

fn main_inner(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { spec, set } => {
            let spec = ExperimentSpec::load(&spec, &set)?;
            let (report, _) = run_experiment(&spec)?;
            print_report(&report);
            println!("results in {}", spec.output_root().display());
            Ok(report.failures.is_empty())
        }
        Command::Pm {
            artifact,
            out,
            csv,
            generations,
        } => build_pm(&artifact, None, out, csv, generations).map(|_| true),
        Command::Upscale {
            artifact,
            resolution,
            out,
            csv,
            generations,
        } => build_pm(&artifact, Some(&resolution), out, csv, generations).map(|_| true),
        Command::ScorePm { pm, csv } => {
            let mut art = PmArtifact::load(&pm)?;
            let problem = problem_from_id(&art.problem)?;
            let score = predicted_qd_score(problem.as_ref(), &mut art.pm);
            art.predicted_qd_score = Some(score);
            art.save(&pm)?;
            if let Some(csv) = csv {
                art.pm.write_csv(csv)?;
            }
            println!("{score}");
            Ok(true)
        }
        Command::Report {
            dir,
            normalization,
            confidence,
        } => {
            let dir = resolve_output(&dir);
            let artifacts = load_artifacts(&dir)?;
            let norm = match normalization {
                NormArg::None => Normalization::None,
                NormArg::PerSeedBest => Normalization::PerSeedBest,
            };
            let report = summarize(&artifacts, &[], norm, confidence);
            write_report(&dir, &report, &artifacts)?;
            print_report(&report);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match main_inner(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
