//! Run configuration files, orchestration over seeds, run directories and
//! manifests, DR labelling and analysis of stored archives, and cross-run
//! coverage comparison.

use std::fmt;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::statistics::{Data, Median, OrderStatistics};
use thiserror::Error;

use crate::analysis::{
    self, plot, AnalysisError, Aggregation, CoverageSeries, HeatmapConfig, HistogramConfig,
};
use crate::pack::{builtin, load_scenario, BUILTIN};
use crate::qd::io::{read_archive, write_archive, ArchiveIoError, RunMeta};
use crate::qd::{run_cma_mae, run_me_rand, run_me_scs, ArchiveSpec, QdError, QdParams, RunOutput};
use crate::robustness::{label_archive, DrConfig, LabelSummary, RobustnessError};
use crate::samplers::{run_baseline, SamplerConfig, SamplerError, SamplerMethod};
use crate::scenario::Scenario;
use crate::space::SpaceKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    MeRand,
    MeScs,
    CmaMae,
    RandSample,
    FaceAlignment,
    PcaAlignment,
    ContactRandSample,
    ContactMeRand,
    ContactMeScs,
    ContactCmaMae,
}

impl Method {
    pub const ALL: [Method; 10] = [
        Method::MeRand,
        Method::MeScs,
        Method::CmaMae,
        Method::RandSample,
        Method::FaceAlignment,
        Method::PcaAlignment,
        Method::ContactRandSample,
        Method::ContactMeRand,
        Method::ContactMeScs,
        Method::ContactCmaMae,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::MeRand => "me_rand",
            Method::MeScs => "me_scs",
            Method::CmaMae => "cma_mae",
            Method::RandSample => "rand_sample",
            Method::FaceAlignment => "face_alignment",
            Method::PcaAlignment => "pca_alignment",
            Method::ContactRandSample => "contact_rand_sample",
            Method::ContactMeRand => "contact_me_rand",
            Method::ContactMeScs => "contact_me_scs",
            Method::ContactCmaMae => "contact_cma_mae",
        }
    }

    /// Sampler behind a baseline method.
    pub fn sampler(self) -> Option<SamplerMethod> {
        match self {
            Method::RandSample => Some(SamplerMethod::RandSample),
            Method::FaceAlignment => Some(SamplerMethod::FaceAlignment),
            Method::PcaAlignment => Some(SamplerMethod::PcaAlignment),
            Method::ContactRandSample => Some(SamplerMethod::ContactRandSample),
            _ => None,
        }
    }

    pub fn space(self) -> SpaceKind {
        match self {
            Method::ContactMeRand | Method::ContactMeScs | Method::ContactCmaMae | Method::ContactRandSample => SpaceKind::Contact,
            _ => SpaceKind::Naive,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL.into_iter().find(|m| m.as_str() == s).ok_or_else(|| {
            let names: Vec<&str> = Method::ALL.iter().map(|m| m.as_str()).collect();
            format!("unknown method {s:?}, expected one of {}", names.join(", "))
        })
    }
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

/// One experiment: a scenario, a method, and the seeds to run it with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Bundled scenario name, or a scenario directory or file relative to the config file.
    pub scenario: String,
    pub method: Method,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Evaluation budget; replaces `qd.budget` when given.
    #[serde(default)]
    pub budget: Option<u64>,
    /// Output root; the `QDPLACE_OUT` variable takes precedence.
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Label the archive with the DR filter after the run.
    #[serde(default)]
    pub label: bool,
    #[serde(default)]
    pub qd: QdParams,
    /// Its `method` is taken from the run method.
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub dr: DrConfig,
}

impl RunConfig {
    pub fn new(scenario: &str, method: Method) -> Self {
        Self {
            scenario: scenario.to_string(),
            method,
            seeds: default_seeds(),
            budget: None,
            out: None,
            label: false,
            qd: QdParams::default(),
            sampler: SamplerConfig::default(),
            dr: DrConfig::default(),
        }
    }

    pub fn effective_budget(&self) -> u64 {
        self.budget.unwrap_or(self.qd.budget)
    }

    /// Parameters of the method actually used, for the archive header.
    fn method_params(&self) -> serde_json::Value {
        match self.method.sampler() {
            Some(m) => serde_json::to_value(SamplerConfig { method: m, ..self.sampler.clone() }),
            None => serde_json::to_value(QdParams { budget: self.effective_budget(), ..self.qd.clone() }),
        }
        .expect("plain data serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub struct ConfigError {
    pub field: Option<String>,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.line, &self.field) {
            (Some(l), Some(k)) => write!(f, "line {l}, field `{k}`: {}", self.message),
            (Some(l), None) => write!(f, "line {l}: {}", self.message),
            (None, Some(k)) => write!(f, "field `{k}`: {}", self.message),
            (None, None) => f.write_str(&self.message),
        }
    }
}

/// 1-based line of the first `key = ...` or `[key]` in `text`.
fn line_of(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| {
        let l = l.trim_start();
        l.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('=')) || l.trim_end() == format!("[{key}]")
    })
    .map(|i| i + 1)
}

fn key_on_line(line: &str) -> Option<String> {
    let (k, _) = line.split_once('=')?;
    let k = k.trim();
    (!k.is_empty() && !k.starts_with('[')).then(|| k.to_string())
}

fn from_toml<T: serde::de::DeserializeOwned>(text: &str) -> Result<T, ConfigError> {
    toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        let field = line.and_then(|l| text.lines().nth(l - 1)).and_then(key_on_line);
        ConfigError { field, line, message: e.message().to_string() }
    })
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let cfg: RunConfig = from_toml(text)?;
    let fail = |field: &str, message: String| ConfigError { field: Some(field.to_string()), line: line_of(text, field), message };
    if cfg.seeds.is_empty() {
        return Err(fail("seeds", "at least one seed is required".into()));
    }
    if cfg.effective_budget() == 0 {
        return Err(fail("budget", "budget must be positive".into()));
    }
    cfg.qd.validate().map_err(|e| fail("qd", e.to_string()))?;
    cfg.sampler.validate().map_err(|e| fail("sampler", e.to_string()))?;
    cfg.dr.validate().map_err(|e| fail("dr", e.to_string()))?;
    Ok(cfg)
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("scenario {name}: {message}")]
    Scenario { name: String, message: String },
    #[error(transparent)]
    Qd(#[from] QdError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Archive(#[from] ArchiveIoError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Robustness(#[from] RobustnessError),
    #[error("archive spec of {other} differs from {first}")]
    SpecMismatch { first: PathBuf, other: PathBuf },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Invalid(String),
}

impl RunError {
    /// Errors caused by the configuration rather than by running it.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            RunError::Config(_)
                | RunError::Qd(_)
                | RunError::Sampler(SamplerError::InvalidConfig(_) | SamplerError::EmptyBudget)
                | RunError::Robustness(RobustnessError::InvalidConfig(_))
                | RunError::Analysis(AnalysisError::InvalidConfig(_))
        )
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

pub fn load_config(path: &Path) -> Result<RunConfig, RunError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    Ok(parse_config(&text)?)
}

/// A bare DR table, as in the `[dr]` section of a run config.
pub fn parse_dr_config(text: &str) -> Result<DrConfig, ConfigError> {
    let cfg: DrConfig = from_toml(text)?;
    cfg.validate().map_err(|e| ConfigError { field: None, line: None, message: e.to_string() })?;
    Ok(cfg)
}

pub fn load_dr_config(path: &Path) -> Result<DrConfig, RunError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    Ok(parse_dr_config(&text)?)
}

/// Bundled scenario by name, otherwise a scenario directory or file
/// (relative paths resolve against `base`).
pub fn resolve_scenario(name: &str, base: &Path) -> Result<Scenario, RunError> {
    let wrap = |message: String| RunError::Scenario { name: name.to_string(), message };
    if BUILTIN.contains(&name) {
        return builtin(name).map_err(|e| wrap(e.to_string()));
    }
    let path = Path::new(name);
    let path = if path.is_absolute() { path.to_path_buf() } else { base.join(path) };
    if !path.exists() {
        return Err(wrap(format!("not a bundled scenario ({}) and no such path {}", BUILTIN.join(", "), path.display())));
    }
    load_scenario(&path).map_err(|e| wrap(e.to_string()))
}

/// Runs one method for one seed.
pub fn run_method(scenario: &Scenario, cfg: &RunConfig, seed: u64) -> Result<RunOutput, RunError> {
    let budget = cfg.effective_budget();
    if let Some(m) = cfg.method.sampler() {
        let sampler = SamplerConfig { method: m, ..cfg.sampler.clone() };
        return Ok(run_baseline(scenario, &sampler, budget, seed)?);
    }
    let params = QdParams { budget, ..cfg.qd.clone() };
    let space = cfg.method.space();
    Ok(match cfg.method {
        Method::MeRand | Method::ContactMeRand => run_me_rand(scenario, space, &params, seed)?,
        Method::MeScs | Method::ContactMeScs => run_me_scs(scenario, space, &params, seed)?,
        _ => run_cma_mae(scenario, space, &params, seed)?,
    })
}

pub fn run_dir(out: &Path, scenario: &str, method: Method, seed: u64) -> PathBuf {
    out.join(scenario).join(method.as_str()).join(format!("seed_{seed}"))
}

/// Everything needed to reproduce a run directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub code_version: String,
    pub scenario: String,
    pub scenario_hash: String,
    pub method: Method,
    pub seed: u64,
    pub evaluations: u64,
    pub final_coverage: f64,
    pub spec: ArchiveSpec,
    /// The configuration reduced to this seed, with the budget made explicit.
    pub config: RunConfig,
    pub config_hash: String,
    pub archive_sha256: String,
    pub coverage_sha256: String,
    pub labels: Option<LabelSummary>,
}

pub const MANIFEST: &str = "manifest.json";
pub const ARCHIVE: &str = "archive.jsonl";
pub const COVERAGE: &str = "coverage.csv";

fn sha256(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), RunError> {
    std::fs::write(path, bytes).map_err(io_err(path))
}

/// Runs every seed of `cfg` and writes one directory per seed under `out`.
/// `base` resolves a relative scenario path. Seeds run in parallel and share
/// nothing but the read-only scenario.
pub fn execute(cfg: &RunConfig, base: &Path, out: &Path) -> Result<Vec<(PathBuf, Manifest)>, RunError> {
    let scenario = resolve_scenario(&cfg.scenario, base)?;
    cfg.seeds.par_iter().map(|&seed| execute_seed(cfg, &scenario, out, seed)).collect()
}

fn execute_seed(cfg: &RunConfig, scenario: &Scenario, out: &Path, seed: u64) -> Result<(PathBuf, Manifest), RunError> {
    let dir = run_dir(out, &scenario.name, cfg.method, seed);
    std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    log::info!("{} {} seed {seed}: {} evaluations", scenario.name, cfg.method, cfg.effective_budget());
    let mut output = run_method(scenario, cfg, seed)?;
    let labels = if cfg.label { Some(label_archive(&mut output.archive, scenario, &cfg.dr)?) } else { None };
    let resolved = RunConfig { seeds: vec![seed], budget: Some(cfg.effective_budget()), out: None, ..cfg.clone() };
    let meta = RunMeta {
        scenario: scenario.name.clone(),
        scenario_hash: scenario.hash.clone(),
        method: cfg.method.as_str().to_string(),
        seed,
        evaluations: output.evaluations,
        params: cfg.method_params(),
    };
    let mut archive_bytes = Vec::new();
    write_archive(&output.archive, &meta, &mut archive_bytes).map_err(io_err(&dir))?;
    let coverage_csv = output.coverage.to_csv();
    write_file(&dir.join(ARCHIVE), &archive_bytes)?;
    write_file(&dir.join(COVERAGE), coverage_csv.as_bytes())?;
    let config_json = serde_json::to_vec(&resolved).expect("config serializes");
    let manifest = Manifest {
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        scenario: scenario.name.clone(),
        scenario_hash: scenario.hash.clone(),
        method: cfg.method,
        seed,
        evaluations: output.evaluations,
        final_coverage: output.archive.coverage(),
        spec: output.archive.spec,
        config_hash: sha256(&config_json),
        config: resolved,
        archive_sha256: sha256(&archive_bytes),
        coverage_sha256: sha256(coverage_csv.as_bytes()),
        labels,
    };
    let manifest_json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_file(&dir.join(MANIFEST), manifest_json.as_bytes())?;
    let mut log = format!(
        "scenario {}\nmethod {}\nseed {seed}\nevaluations {}\nelites {}\nvalid cells {}\ncoverage {}\nout of bounds {}\n",
        scenario.name,
        cfg.method,
        output.evaluations,
        output.archive.len(),
        output.archive.valid_cells(),
        output.archive.coverage(),
        output.archive.out_of_bounds
    );
    if let Some(l) = labels {
        log.push_str(&format!("robust {}\nfragile {}\n", l.robust, l.fragile));
    }
    write_file(&dir.join("run.log"), log.as_bytes())?;
    Ok((dir, manifest))
}

pub fn read_archive_file(path: &Path) -> Result<(crate::qd::Archive, RunMeta), RunError> {
    let f = File::open(path).map_err(io_err(path))?;
    Ok(read_archive(BufReader::new(f))?)
}

/// Scenario named in an archive header, checked against the stored hash.
pub fn scenario_for_archive(meta: &RunMeta, scenario: Option<&str>, base: &Path) -> Result<Scenario, RunError> {
    let sc = resolve_scenario(scenario.unwrap_or(&meta.scenario), base)?;
    if sc.hash != meta.scenario_hash {
        return Err(RunError::Scenario {
            name: sc.name,
            message: format!("hash {} does not match the archive's {}", sc.hash, meta.scenario_hash),
        });
    }
    Ok(sc)
}

/// Labels a stored archive; writes the labelled archive and a one-row summary CSV.
pub fn filter_dr(
    input: &Path,
    scenario: Option<&str>,
    dr: &DrConfig,
    output: &Path,
    summary_csv: &Path,
) -> Result<LabelSummary, RunError> {
    let (mut archive, meta) = read_archive_file(input)?;
    let base = input.parent().unwrap_or(Path::new("."));
    let sc = scenario_for_archive(&meta, scenario, base)?;
    let summary = label_archive(&mut archive, &sc, dr)?;
    let mut bytes = Vec::new();
    write_archive(&archive, &meta, &mut bytes).map_err(io_err(output))?;
    for p in [output, summary_csv] {
        if let Some(d) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(d).map_err(io_err(d))?;
        }
    }
    write_file(output, &bytes)?;
    write_file(summary_csv, summary.csv(&meta.scenario).as_bytes())?;
    Ok(summary)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalysisKind {
    Coverage,
    Heatmap,
    Histogram,
}

impl FromStr for AnalysisKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "coverage" => Ok(AnalysisKind::Coverage),
            "heatmap" => Ok(AnalysisKind::Heatmap),
            "histogram" => Ok(AnalysisKind::Histogram),
            _ => Err(format!("unknown analysis {s:?}, expected coverage, heatmap or histogram")),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct AnalyzeOptions {
    pub scenario: Option<String>,
    pub heatmap: HeatmapConfig,
    pub histogram: HistogramConfig,
}

/// Writes the artifacts of one analysis of a stored archive into `out`.
pub fn analyze(input: &Path, kind: AnalysisKind, opts: &AnalyzeOptions, out: &Path) -> Result<Vec<PathBuf>, RunError> {
    let (archive, meta) = read_archive_file(input)?;
    let base = input.parent().unwrap_or(Path::new("."));
    let files = match kind {
        AnalysisKind::Coverage => {
            let value = analysis::coverage(&archive, &archive.spec)?;
            let stored = base.join(COVERAGE);
            let series = if stored.exists() {
                let text = std::fs::read_to_string(&stored).map_err(io_err(&stored))?;
                let series = CoverageSeries::from_csv(&text).map_err(RunError::Invalid)?;
                if (series.final_coverage() - value).abs() > 1e-12 {
                    return Err(RunError::Invalid(format!(
                        "archive coverage {value} differs from the final value {} of {}",
                        series.final_coverage(),
                        stored.display()
                    )));
                }
                series
            } else {
                let mut s = CoverageSeries::start(&archive);
                s.points[0].evaluations = meta.evaluations;
                s
            };
            plot::write_coverage(out, &format!("{} {}", meta.method, meta.seed), &series)?
        }
        AnalysisKind::Heatmap => {
            let sc = scenario_for_archive(&meta, opts.scenario.as_deref(), base)?;
            let h = analysis::placement_heatmap(&archive, &sc, &opts.heatmap)?;
            plot::write_heatmap(out, &h)?
        }
        AnalysisKind::Histogram => {
            let mut files = Vec::new();
            for agg in [Aggregation::PerTrial, Aggregation::PoseMean] {
                let h = analysis::perturbation_histogram(&archive, &opts.histogram, agg)?;
                files.extend(plot::write_histogram(out, &h)?);
            }
            files
        }
    };
    Ok(files)
}

/// A finished run directory.
#[derive(Clone, Debug)]
pub struct StoredRun {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub coverage: CoverageSeries,
}

pub fn load_run(dir: &Path) -> Result<StoredRun, RunError> {
    let mpath = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&mpath).map_err(io_err(&mpath))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| RunError::Invalid(format!("{}: {e}", mpath.display())))?;
    let cpath = dir.join(COVERAGE);
    let text = std::fs::read_to_string(&cpath).map_err(io_err(&cpath))?;
    let coverage = CoverageSeries::from_csv(&text).map_err(|e| RunError::Invalid(format!("{}: {e}", cpath.display())))?;
    Ok(StoredRun { dir: dir.to_path_buf(), manifest, coverage })
}

/// Run directories at or below each root, sorted.
pub fn find_runs(roots: &[PathBuf]) -> Result<Vec<PathBuf>, RunError> {
    fn walk(dir: &Path, found: &mut Vec<PathBuf>) -> Result<(), RunError> {
        if dir.join(MANIFEST).is_file() {
            found.push(dir.to_path_buf());
            return Ok(());
        }
        for entry in std::fs::read_dir(dir).map_err(io_err(dir))? {
            let path = entry.map_err(io_err(dir))?.path();
            if path.is_dir() {
                walk(&path, found)?;
            }
        }
        Ok(())
    }
    let mut found = Vec::new();
    for r in roots {
        walk(r, &mut found)?;
    }
    found.sort();
    found.dedup();
    Ok(found)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub method: Method,
    pub evaluations: u64,
    pub runs: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

/// Median and quartiles of coverage per method at each checkpoint. With no
/// checkpoints, 21 evenly spaced ones up to the longest run are used.
pub fn compare(runs: &[StoredRun], checkpoints: &[u64]) -> Result<Vec<CompareRow>, RunError> {
    let first = runs.first().ok_or_else(|| RunError::Invalid("no runs to compare".into()))?;
    if let Some(other) = runs.iter().find(|r| r.manifest.spec != first.manifest.spec) {
        return Err(RunError::SpecMismatch { first: first.dir.clone(), other: other.dir.clone() });
    }
    let checkpoints: Vec<u64> = if checkpoints.is_empty() {
        let max = runs.iter().map(|r| r.manifest.evaluations).max().unwrap_or(0);
        let mut c: Vec<u64> = (0..=20).map(|i| max * i / 20).collect();
        c.dedup();
        c
    } else {
        checkpoints.to_vec()
    };
    let mut methods: Vec<Method> = runs.iter().map(|r| r.manifest.method).collect();
    methods.sort();
    methods.dedup();
    let mut rows = Vec::new();
    for m in methods {
        let group: Vec<&StoredRun> = runs.iter().filter(|r| r.manifest.method == m).collect();
        for &c in &checkpoints {
            let mut data = Data::new(group.iter().map(|r| r.coverage.at(c)).collect::<Vec<f64>>());
            rows.push(CompareRow {
                method: m,
                evaluations: c,
                runs: group.len(),
                median: data.median(),
                q1: data.lower_quartile(),
                q3: data.upper_quartile(),
            });
        }
    }
    Ok(rows)
}

pub fn compare_csv(rows: &[CompareRow]) -> String {
    let mut s = String::from("method,evaluations,runs,median,q1,q3\n");
    for r in rows {
        s.push_str(&format!("{},{},{},{},{},{}\n", r.method, r.evaluations, r.runs, r.median, r.q1, r.q3));
    }
    s
}

pub fn compare_svg(rows: &[CompareRow]) -> String {
    let mut curves: Vec<plot::Curve> = Vec::new();
    for r in rows {
        if curves.last().map_or(true, |c| c.label != r.method.as_str()) {
            curves.push(plot::Curve { label: r.method.as_str().to_string(), ..Default::default() });
        }
        let c = curves.last_mut().expect("pushed above");
        c.points.push((r.evaluations as f64, r.median));
        c.band.push((r.evaluations as f64, r.q1, r.q3));
    }
    plot::line_plot_svg("coverage (median, interquartile band)", "evaluations", "coverage", &curves)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qd::CoveragePoint;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
            let toml = format!("scenario = \"box_on_plane\"\nmethod = \"{m}\"\n");
            assert_eq!(parse_config(&toml).unwrap().method, m);
        }
        assert_eq!(Method::ALL.iter().filter(|m| m.sampler().is_some()).count(), 4);
    }

    #[test]
    fn unknown_method_names_the_field_and_line() {
        let e = parse_config("scenario = \"box_on_plane\"\nseeds = [1]\nmethod = \"cma\"\n").unwrap_err();
        assert_eq!(e.line, Some(3));
        assert_eq!(e.field.as_deref(), Some("method"));
        assert!(e.to_string().contains("unknown variant"), "{e}");
    }

    #[test]
    fn unknown_keys_are_errors() {
        let e = parse_config("scenario = \"box_on_plane\"\nmethod = \"me_rand\"\n[dr]\nsigma_d = 1e-3\n").unwrap_err();
        assert_eq!(e.line, Some(4));
        assert!(e.message.contains("sigma_d"), "{e}");
    }

    #[test]
    fn semantic_checks_point_at_their_key() {
        let e = parse_config("scenario = \"box_on_plane\"\nmethod = \"me_rand\"\nseeds = []\n").unwrap_err();
        assert_eq!((e.line, e.field.as_deref()), (Some(3), Some("seeds")));
        let e = parse_config("scenario = \"x\"\nmethod = \"me_rand\"\n\n[qd]\nalpha = 2.0\n").unwrap_err();
        assert_eq!((e.line, e.field.as_deref()), (Some(4), Some("qd")));
    }

    fn stored(method: Method, values: &[(u64, f64)]) -> StoredRun {
        let spec = crate::pack::builtin("box_on_plane").unwrap().archive_spec();
        let mut cfg = RunConfig::new("box_on_plane", method);
        cfg.budget = Some(100);
        StoredRun {
            dir: PathBuf::from(format!("runs/{method}")),
            manifest: Manifest {
                code_version: "0".into(),
                scenario: "box_on_plane".into(),
                scenario_hash: String::new(),
                method,
                seed: 0,
                evaluations: values.last().unwrap().0,
                final_coverage: values.last().unwrap().1,
                spec,
                config: cfg,
                config_hash: String::new(),
                archive_sha256: String::new(),
                coverage_sha256: String::new(),
                labels: None,
            },
            coverage: CoverageSeries {
                points: values
                    .iter()
                    .map(|&(e, c)| CoveragePoint { evaluations: e, filled_success_cells: 0, total_cells: 1, coverage: c })
                    .collect(),
            },
        }
    }

    #[test]
    fn single_run_comparison_is_its_own_curve() {
        let r = stored(Method::CmaMae, &[(0, 0.0), (10, 0.1), (30, 0.25)]);
        let rows = compare(std::slice::from_ref(&r), &[0, 5, 10, 20, 30]).unwrap();
        for row in &rows {
            assert_eq!(row.median, r.coverage.at(row.evaluations));
            assert_eq!((row.q1, row.q3), (row.median, row.median));
        }
    }

    #[test]
    fn three_seed_median() {
        let runs = [
            stored(Method::MeRand, &[(0, 0.0), (10, 0.3)]),
            stored(Method::MeRand, &[(0, 0.0), (10, 0.1)]),
            stored(Method::MeRand, &[(0, 0.0), (10, 0.2)]),
            stored(Method::RandSample, &[(0, 0.0), (10, 0.05)]),
        ];
        let rows = compare(&runs, &[10]).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!((rows[0].method, rows[0].runs, rows[0].median), (Method::MeRand, 3, 0.2));
        assert!(rows[0].q1 <= 0.2 && rows[0].q3 >= 0.2);
        assert_eq!(rows[1].median, 0.05);
        assert_eq!(compare_csv(&rows).lines().count(), 3);
        assert_eq!(compare_svg(&rows).matches("<polyline").count(), 2);
    }

    #[test]
    fn mismatched_specs_are_rejected() {
        let a = stored(Method::MeRand, &[(0, 0.0)]);
        let mut b = stored(Method::CmaMae, &[(0, 0.0)]);
        b.manifest.spec.feature_max[0] += 1.0;
        assert!(matches!(compare(&[a, b], &[]), Err(RunError::SpecMismatch { .. })));
    }
}
