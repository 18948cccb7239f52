use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qdplace::analysis::{HeatmapConfig, HistogramConfig};
use qdplace::pack::{builtin, write_builtin, BUILTIN};
use qdplace::robustness::DrConfig;
use qdplace::run::{self, AnalysisKind, AnalyzeOptions, RunError};

/// Stable placement poses for rigid objects by quality-diversity search over a settling simulator.
#[derive(Parser)]
#[command(name = "qdplace", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one method on one scenario for every configured seed.
    Run(RunArgs),
    /// Median and interquartile coverage per method across run directories.
    Compare(CompareArgs),
    /// Label the elites of an archive as robust or fragile under perturbation.
    FilterDr(FilterArgs),
    /// Coverage curve, contact heatmap or variance histogram of an archive.
    Analyze(AnalyzeArgs),
    /// Bundled scenarios.
    #[command(subcommand)]
    Scenarios(ScenarioCommand),
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration.
    config: PathBuf,
    /// Output root; overrides `out` in the config.
    #[arg(long, env = "QDPLACE_OUT")]
    out: Option<PathBuf>,
    /// Evaluation budget; overrides the config.
    #[arg(long)]
    budget: Option<u64>,
    /// Comma-separated seeds; override the config.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
}

#[derive(Args)]
struct CompareArgs {
    /// Run directories, or directories to search for them.
    #[arg(required = true)]
    runs: Vec<PathBuf>,
    /// Comma-separated evaluation counts; 21 even steps by default.
    #[arg(long, value_delimiter = ',')]
    checkpoints: Vec<u64>,
    /// Directory for compare.csv and compare.svg.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct FilterArgs {
    archive: PathBuf,
    /// Scenario name or path, when the archive's own name does not resolve.
    #[arg(long)]
    scenario: Option<String>,
    /// TOML file with DR settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Trials per elite; overrides the config.
    #[arg(long)]
    trials: Option<usize>,
    /// Labelled archive; defaults to `<archive>.dr.jsonl`.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Summary CSV; defaults to `dr_summary.csv` next to the labelled archive.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    archive: PathBuf,
    /// coverage, heatmap or histogram.
    kind: AnalysisKind,
    /// Output directory; defaults to `analysis` next to the archive.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<String>,
    /// Height of the contact chunk as a fraction of the object's height.
    #[arg(long)]
    chunk_fraction: Option<f64>,
    /// Surface points of the heatmap.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    bins_per_decade: Option<usize>,
}

#[derive(Subcommand)]
enum ScenarioCommand {
    /// Names and hashes of the bundled scenarios.
    List,
    /// Write a bundled scenario's meshes and config to a directory.
    Export { name: String, dir: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}

fn dispatch(command: Command) -> Result<(), RunError> {
    match command {
        Command::Run(a) => run_cmd(a),
        Command::Compare(a) => compare_cmd(a),
        Command::FilterDr(a) => filter_cmd(a),
        Command::Analyze(a) => analyze_cmd(a),
        Command::Scenarios(ScenarioCommand::List) => {
            for name in BUILTIN {
                let sc = builtin(name).map_err(|e| RunError::Scenario { name: name.into(), message: e.to_string() })?;
                println!("{name}\t{}", sc.hash);
            }
            Ok(())
        }
        Command::Scenarios(ScenarioCommand::Export { name, dir }) => {
            write_builtin(&name, &dir).map_err(|source| RunError::Io { path: dir, source })
        }
    }
}

fn run_cmd(a: RunArgs) -> Result<(), RunError> {
    let mut cfg = run::load_config(&a.config)?;
    if a.budget.is_some() {
        cfg.budget = a.budget;
    }
    if !a.seeds.is_empty() {
        cfg.seeds = a.seeds;
    }
    let base = a.config.parent().unwrap_or(Path::new("."));
    let out = a.out.or_else(|| cfg.out.as_ref().map(|o| base.join(o))).unwrap_or_else(|| PathBuf::from("runs"));
    for (dir, m) in run::execute(&cfg, base, &out)? {
        println!("{}\tcoverage {}", dir.display(), m.final_coverage);
    }
    Ok(())
}

fn compare_cmd(a: CompareArgs) -> Result<(), RunError> {
    let dirs = run::find_runs(&a.runs)?;
    let runs = dirs.iter().map(|d| run::load_run(d)).collect::<Result<Vec<_>, _>>()?;
    let rows = run::compare(&runs, &a.checkpoints)?;
    std::fs::create_dir_all(&a.out).map_err(|source| RunError::Io { path: a.out.clone(), source })?;
    for (name, text) in [("compare.csv", run::compare_csv(&rows)), ("compare.svg", run::compare_svg(&rows))] {
        let path = a.out.join(name);
        std::fs::write(&path, text).map_err(|source| RunError::Io { path: path.clone(), source })?;
        println!("{}", path.display());
    }
    Ok(())
}

fn filter_cmd(a: FilterArgs) -> Result<(), RunError> {
    let mut dr = match &a.config {
        Some(p) => run::load_dr_config(p)?,
        None => DrConfig::default(),
    };
    if let Some(t) = a.trials {
        dr.trials = t;
    }
    let output = a.output.unwrap_or_else(|| a.archive.with_extension("dr.jsonl"));
    let summary = a.summary.unwrap_or_else(|| output.with_file_name("dr_summary.csv"));
    let s = run::filter_dr(&a.archive, a.scenario.as_deref(), &dr, &output, &summary)?;
    println!("{}\trobust {} of {} valid", output.display(), s.robust, s.valid);
    Ok(())
}

fn analyze_cmd(a: AnalyzeArgs) -> Result<(), RunError> {
    let mut opts = AnalyzeOptions { scenario: a.scenario, heatmap: HeatmapConfig::default(), histogram: HistogramConfig::default() };
    if let Some(c) = a.chunk_fraction {
        opts.heatmap.chunk_fraction = c;
    }
    if let Some(n) = a.samples {
        opts.heatmap.samples = n;
    }
    if let Some(b) = a.bins_per_decade {
        opts.histogram.bins_per_decade = b;
    }
    let out = a.out.unwrap_or_else(|| a.archive.parent().unwrap_or(Path::new(".")).join("analysis"));
    for f in run::analyze(&a.archive, a.kind, &opts, &out)? {
        println!("{}", f.display());
    }
    Ok(())
}
