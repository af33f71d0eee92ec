//! Run configuration: a single JSON document in atomic units.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dvr::{GridPolicy, SolveOptions, DEFAULT_TARGET_BINDING, MIN_POINTS};
use crate::potential::PotentialModel;
use crate::sensitivity::{AiryMaximum, WindowOptions};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
    #[error("cannot read config {path}: {message}")]
    Read { path: String, message: String },
    #[error("config is not valid: {0}")]
    Parse(String),
}

impl ConfigError {
    fn invalid(field: &str, message: impl Into<String>) -> Self {
        ConfigError::Invalid { field: field.into(), message: message.into() }
    }

    /// Name of the offending field, when known.
    pub fn field(&self) -> Option<&str> {
        match self {
            ConfigError::Invalid { field, .. } => Some(field),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    Harmonic {
        center: f64,
        curvature: f64,
    },
    InvertedHarmonic {
        center: f64,
        curvature: f64,
    },
    /// Give exactly one of `c12` and `depth`.
    LennardJones {
        c6: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c12: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        depth: Option<f64>,
    },
    /// Two-column "r V" table; relative paths resolve against the config file.
    Tabulated {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        asymptote: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridPolicyKind {
    Auto,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub policy: GridPolicyKind,
    pub points: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_binding: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_states: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatesKeyword {
    AllReported,
}

/// `"all_reported"` or an explicit list of state indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateSelection {
    Keyword(StatesKeyword),
    List(Vec<usize>),
}

impl Default for StateSelection {
    fn default() -> Self {
        StateSelection::Keyword(StatesKeyword::AllReported)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OtocSpec {
    pub states: StateSelection,
    /// Defaults to 50 harmonic periods at the well bottom.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    pub t_points: usize,
    /// Number of levels summed over; defaults to all bound levels.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncation: Option<usize>,
    pub convergence_bound: f64,
    pub drop_top_fraction: f64,
}

impl Default for OtocSpec {
    fn default() -> Self {
        Self {
            states: StateSelection::default(),
            t_max: None,
            t_points: crate::spectral::DEFAULT_TIME_POINTS,
            truncation: None,
            convergence_bound: 0.01,
            drop_top_fraction: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSpec {
    pub r2_min: f64,
    pub min_window_points: usize,
    pub max_slope_drift: f64,
    pub airy_exact: bool,
}

impl Default for FitSpec {
    fn default() -> Self {
        let w = WindowOptions::default();
        Self {
            r2_min: w.r2_min,
            min_window_points: w.min_points,
            max_slope_drift: w.max_slope_drift,
            airy_exact: false,
        }
    }
}

impl FitSpec {
    pub fn window_options(&self) -> WindowOptions {
        WindowOptions { r2_min: self.r2_min, min_points: self.min_window_points, max_slope_drift: self.max_slope_drift }
    }

    pub fn airy(&self) -> AiryMaximum {
        if self.airy_exact {
            AiryMaximum::Exact
        } else {
            AiryMaximum::Approximate
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub directory: PathBuf,
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { directory: PathBuf::from("vdw-otoc-out"), formats: vec![OutputFormat::Csv, OutputFormat::Json] }
    }
}

impl OutputSpec {
    pub fn wants(&self, format: OutputFormat) -> bool {
        self.formats.contains(&format)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub potential: PotentialSpec,
    pub reduced_mass_au: f64,
    pub grid: GridSpec,
    #[serde(default)]
    pub otoc: OtocSpec,
    #[serde(default)]
    pub fit: FitSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

fn positive(field: &str, x: f64) -> Result<(), ConfigError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::invalid(field, format!("must be positive and finite, got {x}")))
    }
}

fn finite(field: &str, x: f64) -> Result<(), ConfigError> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::invalid(field, format!("must be finite, got {x}")))
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let config: RunConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads and validates a config file. Relative table paths are rebased
    /// onto the config file's directory.
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ConfigError::Read { path: path.display().to_string(), message: e.to_string() })?;
        let mut config = Self::from_json(&text)?;
        if let PotentialSpec::Tabulated { path: table, .. } = &mut config.potential {
            if table.is_relative() {
                if let Some(dir) = path.parent() {
                    *table = dir.join(&*table);
                }
            }
        }
        Ok(config)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        positive("reduced_mass_au", self.reduced_mass_au)?;
        match &self.potential {
            PotentialSpec::Harmonic { center, curvature } => {
                finite("potential.center", *center)?;
                finite("potential.curvature", *curvature)?;
                if *curvature < 0.0 {
                    return Err(ConfigError::invalid("potential.curvature", "must be >= 0"));
                }
            }
            PotentialSpec::InvertedHarmonic { center, curvature } => {
                finite("potential.center", *center)?;
                positive("potential.curvature", *curvature)?;
            }
            PotentialSpec::LennardJones { c6, c12, depth } => {
                positive("potential.c6", *c6)?;
                match (c12, depth) {
                    (Some(c12), None) => positive("potential.c12", *c12)?,
                    (None, Some(d)) => positive("potential.depth", *d)?,
                    _ => return Err(ConfigError::invalid("potential", "give exactly one of c12 and depth")),
                }
            }
            PotentialSpec::Tabulated { asymptote, .. } => {
                if let Some(v) = asymptote {
                    finite("potential.asymptote", *v)?;
                }
            }
        }

        let g = &self.grid;
        if g.points < MIN_POINTS {
            return Err(ConfigError::invalid("grid.points", format!("must be >= {MIN_POINTS}, got {}", g.points)));
        }
        match g.policy {
            GridPolicyKind::Explicit => {
                let a = g.a.ok_or_else(|| ConfigError::invalid("grid.a", "required for an explicit grid"))?;
                let b = g.b.ok_or_else(|| ConfigError::invalid("grid.b", "required for an explicit grid"))?;
                finite("grid.a", a)?;
                finite("grid.b", b)?;
                if a >= b {
                    return Err(ConfigError::invalid("grid.b", format!("must exceed grid.a ({a}), got {b}")));
                }
            }
            GridPolicyKind::Auto => {
                if g.a.is_some() || g.b.is_some() {
                    return Err(ConfigError::invalid("grid.policy", "bounds a/b need policy \"explicit\""));
                }
                if let Some(t) = g.target_binding {
                    if !(t > 0.0 && t < 1.0) {
                        return Err(ConfigError::invalid(
                            "grid.target_binding",
                            format!("must lie in (0, 1), got {t}"),
                        ));
                    }
                }
            }
        }
        if g.max_states == Some(0) {
            return Err(ConfigError::invalid("grid.max_states", "must be >= 1"));
        }

        let o = &self.otoc;
        if let StateSelection::List(states) = &o.states {
            if states.is_empty() {
                return Err(ConfigError::invalid("otoc.states", "list must not be empty"));
            }
            let mut sorted = states.clone();
            sorted.sort_unstable();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(ConfigError::invalid("otoc.states", "entries must be unique"));
            }
        }
        if let Some(t) = o.t_max {
            positive("otoc.t_max", t)?;
        }
        if o.t_points < 100 {
            return Err(ConfigError::invalid("otoc.t_points", format!("must be >= 100, got {}", o.t_points)));
        }
        if o.truncation.is_some_and(|k| k < 2) {
            return Err(ConfigError::invalid("otoc.truncation", "must be >= 2"));
        }
        positive("otoc.convergence_bound", o.convergence_bound)?;
        if !(0.0..1.0).contains(&o.drop_top_fraction) {
            return Err(ConfigError::invalid(
                "otoc.drop_top_fraction",
                format!("must lie in [0, 1), got {}", o.drop_top_fraction),
            ));
        }

        let f = &self.fit;
        if !(f.r2_min > 0.0 && f.r2_min <= 1.0) {
            return Err(ConfigError::invalid("fit.r2_min", format!("must lie in (0, 1], got {}", f.r2_min)));
        }
        if f.min_window_points < 3 {
            return Err(ConfigError::invalid("fit.min_window_points", "must be >= 3"));
        }
        positive("fit.max_slope_drift", f.max_slope_drift)?;

        if self.output.formats.is_empty() {
            return Err(ConfigError::invalid("output.formats", "must name at least one of csv, json"));
        }
        Ok(())
    }

    pub fn build_model(&self) -> Result<PotentialModel, ConfigError> {
        let model = match &self.potential {
            PotentialSpec::Harmonic { center, curvature } => PotentialModel::harmonic(*center, *curvature),
            PotentialSpec::InvertedHarmonic { center, curvature } => {
                PotentialModel::inverted_harmonic(*center, *curvature)
            }
            PotentialSpec::LennardJones { c6, c12: Some(c12), .. } => PotentialModel::lennard_jones(*c6, *c12),
            PotentialSpec::LennardJones { c6, depth: Some(d), .. } => PotentialModel::lennard_jones_with_depth(*c6, *d),
            PotentialSpec::LennardJones { .. } => {
                return Err(ConfigError::invalid("potential", "give exactly one of c12 and depth"))
            }
            PotentialSpec::Tabulated { path, asymptote } => {
                let file = fs::File::open(path)
                    .map_err(|e| ConfigError::invalid("potential.path", format!("{}: {e}", path.display())))?;
                let model = PotentialModel::load_tabulated(BufReader::new(file))
                    .map_err(|e| ConfigError::invalid("potential.path", format!("{}: {e}", path.display())))?;
                match asymptote {
                    Some(v) => model.with_asymptote(*v),
                    None => Ok(model),
                }
            }
        };
        model.map_err(|e| ConfigError::invalid("potential", e.to_string()))
    }

    pub fn grid_policy(&self) -> GridPolicy {
        match self.grid.policy {
            GridPolicyKind::Auto => {
                GridPolicy::Auto { target_binding: self.grid.target_binding.unwrap_or(DEFAULT_TARGET_BINDING) }
            }
            GridPolicyKind::Explicit => {
                GridPolicy::Explicit { a: self.grid.a.unwrap_or(f64::NAN), b: self.grid.b.unwrap_or(f64::NAN) }
            }
        }
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions { max_states: self.grid.max_states }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "potential": {"kind": "lennard_jones", "c6": 1.0, "c12": 1.0},
        "reduced_mass_au": 1.0,
        "grid": {"policy": "auto", "points": 100}
    }"#;

    #[test]
    fn defaults_fill_in() {
        let c = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.otoc.states, StateSelection::Keyword(StatesKeyword::AllReported));
        assert_eq!(c.otoc.t_points, 4000);
        assert_eq!(c.otoc.convergence_bound, 0.01);
        assert_eq!(c.fit.r2_min, 0.98);
        assert_eq!(c.fit.min_window_points, 20);
        assert_eq!(c.output.formats, vec![OutputFormat::Csv, OutputFormat::Json]);
        let back = RunConfig::from_json(&c.to_json_pretty()).unwrap();
        assert_eq!(back, c);
    }

    fn with(patch: impl FnOnce(&mut serde_json::Value)) -> Result<RunConfig, ConfigError> {
        let mut v: serde_json::Value = serde_json::from_str(MINIMAL).unwrap();
        patch(&mut v);
        RunConfig::from_json(&v.to_string())
    }

    #[test]
    fn errors_name_the_field() {
        type Patch = Box<dyn FnOnce(&mut serde_json::Value)>;
        let cases: Vec<(&str, Patch)> = vec![
            ("reduced_mass_au", Box::new(|v| v["reduced_mass_au"] = (-1.0).into())),
            ("grid.points", Box::new(|v| v["grid"]["points"] = 8.into())),
            ("otoc.t_points", Box::new(|v| v["otoc"] = serde_json::json!({"t_points": 50}))),
            ("otoc.states", Box::new(|v| v["otoc"] = serde_json::json!({"states": [1, 2, 1]}))),
            ("potential.c6", Box::new(|v| v["potential"]["c6"] = 0.0.into())),
            ("potential", Box::new(|v| v["potential"]["depth"] = 0.3.into())),
            ("fit.r2_min", Box::new(|v| v["fit"] = serde_json::json!({"r2_min": 1.5}))),
            ("grid.a", Box::new(|v| v["grid"]["policy"] = "explicit".into())),
        ];
        for (field, patch) in cases {
            let err = with(patch).unwrap_err();
            assert_eq!(err.field(), Some(field), "{err}");
            assert!(err.to_string().starts_with(field));
        }
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(RunConfig::from_json("{"), Err(ConfigError::Parse(_))));
        let err = with(|v| v["surprise"] = 1.into()).unwrap_err();
        assert!(err.to_string().contains("surprise"));
        let err = with(|v| v["otoc"] = serde_json::json!({"states": "some"})).unwrap_err();
        assert!(matches!(err, ConfigError::Parse(_)));
    }

    #[test]
    fn state_list_roundtrip() {
        let c = with(|v| v["otoc"] = serde_json::json!({"states": [3, 0, 7]})).unwrap();
        assert_eq!(c.otoc.states, StateSelection::List(vec![3, 0, 7]));
    }

    #[test]
    fn tabulated_path_is_rebased() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.json");
        fs::write(
            &cfg,
            r#"{"potential": {"kind": "tabulated", "path": "curve.dat"},
                "reduced_mass_au": 1.0, "grid": {"policy": "auto", "points": 100}}"#,
        )
        .unwrap();
        let c = RunConfig::from_path(&cfg).unwrap();
        match &c.potential {
            PotentialSpec::Tabulated { path, .. } => assert_eq!(path, &dir.path().join("curve.dat")),
            other => panic!("{other:?}"),
        }
        let err = c.build_model().unwrap_err();
        assert_eq!(err.field(), Some("potential.path"));
    }
}
