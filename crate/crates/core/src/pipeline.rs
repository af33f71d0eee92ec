//! Staged run: solve → OTOC → fit, with every stage's products on disk.
//!
//! `report` chains the stages in memory; the staged entry points read the
//! previous stage back from the artifact directory. Floats are written in
//! shortest round-trip form, so both routes produce the same bytes.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use faer::Mat;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, OutputFormat, RunConfig, StateSelection};
use crate::dvr::{build_grid, solve_bound_states, BoundStateBasis, DvrError, RadialGrid};
use crate::eigen::set_linalg_threads;
use crate::potential::PotentialModel;
use crate::sensitivity::{analyse_series, predictions, Regime, SensitivityReport};
use crate::spectral::{
    default_t_max, otoc_truncation_error, otoc_values, position_matrix, probe_times, time_grid, MatrixElements,
    OtocSeries,
};

pub const MANIFEST: &str = "manifest.json";
pub const ELEMENTS: &str = "elements.json";
pub const SPECTRUM: &str = "spectrum.csv";
pub const OTOC: &str = "otoc.csv";
pub const SENSITIVITY: &str = "sensitivity.json";

pub const TOOL_NAME: &str = "vdw-otoc";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("missing {}: {hint}", path.display())]
    MissingArtifact { path: PathBuf, hint: String },
    #[error("{}: {message}", path.display())]
    Artifact { path: PathBuf, message: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("cannot start worker threads: {0}")]
    Threads(String),
    #[error(transparent)]
    Solve(#[from] DvrError),
    #[error("{0}")]
    Numerical(String),
    #[error("no requested state passed the convergence bound {bound}; see {MANIFEST}")]
    NoReportedStates { bound: f64 },
}

impl PipelineError {
    /// 2 for configuration, usage and artifact problems, 3 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_)
            | PipelineError::MissingArtifact { .. }
            | PipelineError::Artifact { .. }
            | PipelineError::Io { .. }
            | PipelineError::Threads(_) => 2,
            PipelineError::Solve(_) | PipelineError::Numerical(_) | PipelineError::NoReportedStates { .. } => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, PipelineError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveRecord {
    pub grid: RadialGrid,
    pub bound_states: usize,
    /// Dissociation limit; null when the potential never dissociates.
    pub threshold: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateEstimate {
    pub n: usize,
    /// Truncation estimate; null when it could not be formed.
    pub estimate: Option<f64>,
    pub reported: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OtocRecord {
    pub t_max: f64,
    pub t_points: usize,
    pub truncation: usize,
    pub convergence_bound: f64,
    pub requested_states: Vec<usize>,
    pub reported_states: Vec<usize>,
    pub estimates: Vec<StateEstimate>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub exponential: usize,
    pub regular: usize,
    pub errors: usize,
    pub seconds: f64,
}

/// Provenance of an artifact directory. Each stage rewrites it before its
/// result files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub threads: usize,
    pub config: RunConfig,
    pub solve: Option<SolveRecord>,
    pub otoc: Option<OtocRecord>,
    pub fit: Option<FitRecord>,
}

/// Bound-state data handed from `solve` to `otoc`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementsFile {
    pub grid: RadialGrid,
    pub mass: f64,
    pub threshold: Option<f64>,
    pub energies: Vec<f64>,
    /// r_nl, row by row.
    pub r: Vec<Vec<f64>>,
}

impl ElementsFile {
    fn new(basis: &BoundStateBasis, elements: &MatrixElements) -> Self {
        let r = elements.r();
        Self {
            grid: *basis.grid(),
            mass: basis.mass(),
            threshold: basis.threshold().is_finite().then_some(basis.threshold()),
            energies: elements.energies().to_vec(),
            r: (0..r.nrows()).map(|i| (0..r.ncols()).map(|j| r[(i, j)]).collect()).collect(),
        }
    }

    fn elements(&self) -> Option<MatrixElements> {
        let k = self.energies.len();
        if k == 0 || self.r.len() != k || self.r.iter().any(|row| row.len() != k) {
            return None;
        }
        let r = Mat::from_fn(k, k, |i, j| self.r[i][j]);
        Some(MatrixElements::from_parts(&r, self.energies.clone(), self.mass))
    }
}

struct SolveStage {
    model: PotentialModel,
    elements: MatrixElements,
    manifest: RunManifest,
}

struct OtocStage {
    solve: SolveStage,
    series: Vec<OtocSeries>,
    record: OtocRecord,
    manifest: RunManifest,
}

/// Number for CSV output: plain decimal for moderate magnitudes, exponent
/// form otherwise. Both are shortest round-trip representations.
pub fn format_float(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn format_opt(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

/// Whether the potential, mass and grid agree.
fn same_physics(a: &RunConfig, b: &RunConfig) -> bool {
    a.potential == b.potential && a.reduced_mass_au == b.reduced_mass_au && a.grid == b.grid
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path.file_name().and_then(|s| s.to_str()).unwrap_or("artifact");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    let io_err = |source| PipelineError::Io { path: path.to_path_buf(), source };
    fs::write(&tmp, bytes).map_err(io_err)?;
    fs::rename(&tmp, path).map_err(io_err)
}

pub struct Pipeline {
    config: RunConfig,
    threads: usize,
}

impl Pipeline {
    /// `threads` = 0 picks rayon's default.
    pub fn new(config: RunConfig, threads: usize) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, threads })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn out_dir(&self) -> &Path {
        &self.config.output.directory
    }

    pub fn artifact(&self, name: &str) -> PathBuf {
        self.out_dir().join(name)
    }

    fn with_pool<T: Send>(&self, job: impl FnOnce() -> Result<T> + Send) -> Result<T> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.threads)
            .build()
            .map_err(|e| PipelineError::Threads(e.to_string()))?;
        pool.install(job)
    }

    fn threads_used(&self) -> usize {
        if self.threads == 0 {
            rayon::current_num_threads()
        } else {
            self.threads
        }
    }

    /// Writes manifest.json, elements.json and spectrum.csv.
    pub fn solve(&self) -> Result<()> {
        self.with_pool(|| self.run_solve().map(drop))
    }

    /// Writes otoc.csv. Without prior solve artifacts the solve stage is rerun
    /// unless `recompute` is false.
    pub fn otoc(&self, recompute: bool) -> Result<()> {
        self.with_pool(|| {
            let solve = match self.load_solve() {
                Ok(solve) => solve,
                Err(PipelineError::MissingArtifact { .. } | PipelineError::Artifact { .. }) if recompute => {
                    self.run_solve()?
                }
                Err(e) => return Err(e),
            };
            self.run_otoc(solve).map(drop)
        })
    }

    /// Re-fits an existing otoc.csv and writes sensitivity.json.
    pub fn fit(&self) -> Result<Vec<SensitivityReport>> {
        self.with_pool(|| {
            let otoc = self.load_otoc()?;
            self.run_fit(otoc)
        })
    }

    /// All stages in one pass.
    pub fn report(&self) -> Result<Vec<SensitivityReport>> {
        self.with_pool(|| {
            let solve = self.run_solve()?;
            let otoc = self.run_otoc(solve)?;
            self.run_fit(otoc)
        })
    }

    fn prepare_dir(&self) -> Result<()> {
        fs::create_dir_all(self.out_dir()).map_err(|source| PipelineError::Io { path: self.out_dir().into(), source })
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| PipelineError::Artifact { path: self.artifact(name), message: e.to_string() })?;
        text.push('\n');
        write_atomic(&self.artifact(name), text.as_bytes())
    }

    fn write_csv(&self, name: &str, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
        let path = self.artifact(name);
        let csv_err = |e: csv::Error| PipelineError::Artifact { path: path.clone(), message: e.to_string() };
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).map_err(csv_err)?;
        for row in rows {
            w.write_record(&row).map_err(csv_err)?;
        }
        let bytes =
            w.into_inner().map_err(|e| PipelineError::Artifact { path: path.clone(), message: e.to_string() })?;
        write_atomic(&path, &bytes)
    }

    fn read_json<T: DeserializeOwned>(&self, name: &str, hint: &str) -> Result<T> {
        let path = self.artifact(name);
        let text = match fs::read_to_string(&path) {
            Ok(text) => text,
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                return Err(PipelineError::MissingArtifact { path, hint: hint.into() })
            }
            Err(source) => return Err(PipelineError::Io { path, source }),
        };
        serde_json::from_str(&text).map_err(|e| PipelineError::Artifact { path, message: e.to_string() })
    }

    fn new_manifest(&self) -> RunManifest {
        RunManifest {
            tool: TOOL_NAME.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            threads: self.threads_used(),
            config: self.config.clone(),
            solve: None,
            otoc: None,
            fit: None,
        }
    }

    fn run_solve(&self) -> Result<SolveStage> {
        let start = Instant::now();
        self.prepare_dir()?;
        let model = self.config.build_model()?;
        let grid = build_grid(&model, self.config.grid.points, self.config.grid_policy())?;
        set_linalg_threads(self.threads_used());
        let basis = solve_bound_states(&model, &grid, self.config.reduced_mass_au, self.config.solve_options())?;
        let file = ElementsFile::new(&basis, &position_matrix(&basis));
        let elements = file.elements().ok_or_else(|| PipelineError::Numerical("empty bound-state basis".into()))?;

        let airy = self.config.fit.airy();
        let rows: Vec<Vec<String>> = (0..elements.len())
            .into_par_iter()
            .map(|n| {
                let e = elements.energies()[n];
                let p = predictions(&model, e, elements.mass(), airy);
                vec![
                    n.to_string(),
                    format_float(e),
                    format_float(elements.r()[(n, n)]),
                    format_opt(p.classical.map(|c| c.r_c)),
                    format_opt(p.classical.map(|c| c.lambda)),
                    format_opt(p.semiclassical.map(|s| s.lambda)),
                ]
            })
            .collect();

        let mut manifest = self.new_manifest();
        manifest.solve = Some(SolveRecord {
            grid,
            bound_states: elements.len(),
            threshold: file.threshold,
            seconds: start.elapsed().as_secs_f64(),
        });
        self.write_json(MANIFEST, &manifest)?;
        self.write_json(ELEMENTS, &file)?;
        if self.config.output.wants(OutputFormat::Csv) {
            self.write_csv(SPECTRUM, &["n", "E_n", "r_nn", "r_c", "lambda_c", "lambda_sc"], rows.into_iter())?;
        }
        Ok(SolveStage { model, elements, manifest })
    }

    fn load_solve(&self) -> Result<SolveStage> {
        let hint = "run `vdw-otoc solve` first";
        let manifest: RunManifest = self.read_json(MANIFEST, hint)?;
        if manifest.solve.is_none() {
            return Err(PipelineError::MissingArtifact { path: self.artifact(MANIFEST), hint: hint.into() });
        }
        if !same_physics(&manifest.config, &self.config) {
            return Err(PipelineError::Artifact {
                path: self.artifact(MANIFEST),
                message: "artifacts were produced for a different potential, mass or grid; run `vdw-otoc solve`".into(),
            });
        }
        let file: ElementsFile = self.read_json(ELEMENTS, hint)?;
        let elements = file.elements().ok_or_else(|| PipelineError::Artifact {
            path: self.artifact(ELEMENTS),
            message: "matrix shape does not match the level count".into(),
        })?;
        let model = self.config.build_model()?;
        Ok(SolveStage { model, elements, manifest })
    }

    fn requested_states(&self, count: usize) -> Result<Vec<usize>> {
        match &self.config.otoc.states {
            StateSelection::Keyword(_) => {
                let dropped = (self.config.otoc.drop_top_fraction * count as f64).ceil() as usize;
                Ok((0..count.saturating_sub(dropped)).collect())
            }
            StateSelection::List(list) => {
                let mut states = list.clone();
                states.sort_unstable();
                if let Some(&n) = states.iter().find(|&&n| n >= count) {
                    return Err(ConfigError::Invalid {
                        field: "otoc.states".into(),
                        message: format!("state {n} is not bound: only {count} bound states"),
                    }
                    .into());
                }
                Ok(states)
            }
        }
    }

    fn run_otoc(&self, solve: SolveStage) -> Result<OtocStage> {
        let start = Instant::now();
        self.prepare_dir()?;
        let spec = &self.config.otoc;
        let elements = &solve.elements;
        let count = elements.len();
        let requested = self.requested_states(count)?;
        let k = match spec.truncation {
            Some(k) if k > count => {
                return Err(ConfigError::Invalid {
                    field: "otoc.truncation".into(),
                    message: format!("{k} exceeds the {count} bound states"),
                }
                .into())
            }
            Some(k) => k,
            None => count,
        };
        let t_max = match spec.t_max {
            Some(t) => t,
            None => default_t_max(&solve.model, elements.mass()).map_err(|e| ConfigError::Invalid {
                field: "otoc.t_max".into(),
                message: format!("required for this potential: {e}"),
            })?,
        };
        let times = time_grid(t_max, spec.t_points).map_err(|e| PipelineError::Numerical(e.to_string()))?;
        let probes = probe_times(&times);
        let bound = spec.convergence_bound;

        set_linalg_threads(1);
        let outcomes: Vec<(StateEstimate, Option<OtocSeries>)> = requested
            .par_iter()
            .map(|&n| {
                let rejected = |estimate, error: String| {
                    (StateEstimate { n, estimate, reported: false, error: Some(error) }, None)
                };
                let estimate = match otoc_truncation_error(n, elements, k, &probes) {
                    Ok(x) => x,
                    Err(e) => return rejected(None, e.to_string()),
                };
                let finite = estimate.is_finite().then_some(estimate);
                if !estimate.is_finite() {
                    return rejected(
                        None,
                        format!("truncation K = {k} leaves too few levels above state {n} to estimate convergence"),
                    );
                }
                if estimate > bound {
                    return rejected(finite, format!("convergence estimate {estimate:e} exceeds bound {bound}"));
                }
                match otoc_values(n, &times, elements, k) {
                    Ok(values) => (
                        StateEstimate { n, estimate: finite, reported: true, error: None },
                        Some(OtocSeries {
                            n,
                            times: times.clone(),
                            values,
                            truncation: k,
                            convergence_estimate: estimate,
                        }),
                    ),
                    Err(e) => rejected(finite, e.to_string()),
                }
            })
            .collect();
        let (estimates, series): (Vec<_>, Vec<_>) = outcomes.into_iter().unzip();
        let series: Vec<OtocSeries> = series.into_iter().flatten().collect();

        let record = OtocRecord {
            t_max,
            t_points: spec.t_points,
            truncation: k,
            convergence_bound: bound,
            requested_states: requested,
            reported_states: series.iter().map(|s| s.n).collect(),
            estimates,
            seconds: start.elapsed().as_secs_f64(),
        };
        let mut manifest = solve.manifest.clone();
        manifest.config = self.config.clone();
        manifest.threads = self.threads_used();
        manifest.otoc = Some(record.clone());
        manifest.fit = None;
        self.write_json(MANIFEST, &manifest)?;
        if series.is_empty() {
            return Err(PipelineError::NoReportedStates { bound });
        }
        if self.config.output.wants(OutputFormat::Csv) {
            let rows = series.iter().flat_map(|s| {
                s.times
                    .iter()
                    .zip(&s.values)
                    .map(move |(&t, &c)| vec![s.n.to_string(), format_float(t), format_float(c)])
            });
            self.write_csv(OTOC, &["n", "t", "C"], rows)?;
        }
        Ok(OtocStage { solve, series, record, manifest })
    }

    fn load_otoc(&self) -> Result<OtocStage> {
        let hint = "run `vdw-otoc otoc` first (with csv in output.formats)";
        let solve = self.load_solve()?;
        let manifest = solve.manifest.clone();
        let record = manifest
            .otoc
            .clone()
            .ok_or_else(|| PipelineError::MissingArtifact { path: self.artifact(MANIFEST), hint: hint.into() })?;
        if manifest.config.otoc != self.config.otoc {
            return Err(PipelineError::Artifact {
                path: self.artifact(MANIFEST),
                message: "otoc.csv was produced with different otoc settings; run `vdw-otoc otoc`".into(),
            });
        }
        let series = self.read_otoc_csv(&record, hint)?;
        Ok(OtocStage { solve, series, record, manifest })
    }

    fn read_otoc_csv(&self, record: &OtocRecord, hint: &str) -> Result<Vec<OtocSeries>> {
        let path = self.artifact(OTOC);
        let bad = |message: String| PipelineError::Artifact { path: path.clone(), message };
        let file = match fs::File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                return Err(PipelineError::MissingArtifact { path, hint: hint.into() })
            }
            Err(source) => return Err(PipelineError::Io { path, source }),
        };
        let mut reader = csv::Reader::from_reader(io::BufReader::new(file));
        let header = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
        if header.iter().collect::<Vec<_>>() != ["n", "t", "C"] {
            return Err(bad(format!("expected header n,t,C, found {}", header.iter().collect::<Vec<_>>().join(","))));
        }
        let mut samples: BTreeMap<usize, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        for (line, row) in reader.records().enumerate() {
            let row = row.map_err(|e| bad(e.to_string()))?;
            let field = |i: usize| row.get(i).unwrap_or("");
            let parse_err = |what: &str| bad(format!("row {}: invalid {what}", line + 2));
            let n: usize = field(0).parse().map_err(|_| parse_err("n"))?;
            let t: f64 = field(1).parse().map_err(|_| parse_err("t"))?;
            let c: f64 = field(2).parse().map_err(|_| parse_err("C"))?;
            let entry = samples.entry(n).or_default();
            entry.0.push(t);
            entry.1.push(c);
        }
        let found: Vec<usize> = samples.keys().copied().collect();
        if found != record.reported_states {
            return Err(bad(format!("states {found:?} do not match the manifest's {:?}", record.reported_states)));
        }
        let estimates: BTreeMap<usize, f64> =
            record.estimates.iter().map(|s| (s.n, s.estimate.unwrap_or(f64::NAN))).collect();
        samples
            .into_iter()
            .map(|(n, (times, values))| {
                if times.len() != record.t_points {
                    return Err(bad(format!("state {n} has {} rows, expected {}", times.len(), record.t_points)));
                }
                let mut s = OtocSeries::from_samples(n, times, values);
                s.truncation = record.truncation;
                s.convergence_estimate = estimates.get(&n).copied().unwrap_or(f64::NAN);
                Ok(s)
            })
            .collect()
    }

    fn run_fit(&self, otoc: OtocStage) -> Result<Vec<SensitivityReport>> {
        let start = Instant::now();
        let options = self.config.fit.window_options();
        let airy = self.config.fit.airy();
        let model = &otoc.solve.model;
        let elements = &otoc.solve.elements;
        let series: BTreeMap<usize, &OtocSeries> = otoc.series.iter().map(|s| (s.n, s)).collect();

        let reports: Vec<SensitivityReport> = otoc
            .record
            .estimates
            .par_iter()
            .map(|state| {
                let energy = elements.energies()[state.n];
                let p = predictions(model, energy, elements.mass(), airy);
                match series.get(&state.n) {
                    Some(s) => analyse_series(s, energy, &p, &options),
                    None => {
                        let mut r = SensitivityReport::unfitted(state.n, energy, &p);
                        r.regime = Regime::Error;
                        r.convergence_estimate = state.estimate;
                        r.error = state.error.clone();
                        r
                    }
                }
            })
            .collect();

        let count = |regime| reports.iter().filter(|r| r.regime == regime).count();
        let mut manifest = otoc.manifest;
        manifest.config = self.config.clone();
        manifest.threads = self.threads_used();
        manifest.fit = Some(FitRecord {
            exponential: count(Regime::Exponential),
            regular: count(Regime::Regular),
            errors: count(Regime::Error),
            seconds: start.elapsed().as_secs_f64(),
        });
        self.write_json(MANIFEST, &manifest)?;
        if self.config.output.wants(OutputFormat::Json) {
            self.write_json(SENSITIVITY, &reports)?;
        }
        Ok(reports)
    }
}

/// Reads an artifact directory's manifest.
pub fn read_manifest(dir: &Path) -> Result<RunManifest> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|source| PipelineError::Io { path: path.clone(), source })?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Artifact { path, message: e.to_string() })
}
