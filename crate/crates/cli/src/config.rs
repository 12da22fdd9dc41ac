//! Experiment configuration files (TOML, or JSON by extension).

use std::fmt;
use std::path::{Path, PathBuf};

use interface_lab_core::lattice::DomainSpec;
use interface_lab_core::quadrature::QuadratureSpec;
use interface_lab_core::scaling::TestFunction;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Green,
    Sample,
    VarianceInfinite,
    VarianceFinite,
    BesovScaling,
    #[serde(rename = "bridge_1d")]
    Bridge1d,
    ThomeeError,
    SpectralGap,
    SobolevGff,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 9] = [
        ExperimentKind::Green,
        ExperimentKind::Sample,
        ExperimentKind::VarianceInfinite,
        ExperimentKind::VarianceFinite,
        ExperimentKind::BesovScaling,
        ExperimentKind::Bridge1d,
        ExperimentKind::ThomeeError,
        ExperimentKind::SpectralGap,
        ExperimentKind::SobolevGff,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Green => "green",
            ExperimentKind::Sample => "sample",
            ExperimentKind::VarianceInfinite => "variance_infinite",
            ExperimentKind::VarianceFinite => "variance_finite",
            ExperimentKind::BesovScaling => "besov_scaling",
            ExperimentKind::Bridge1d => "bridge_1d",
            ExperimentKind::ThomeeError => "thomee_error",
            ExperimentKind::SpectralGap => "spectral_gap",
            ExperimentKind::SobolevGff => "sobolev_gff",
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            ExperimentKind::Green => "Green's function columns on a lattice domain",
            ExperimentKind::Sample => {
                "exact field samples, checked against Green's function values"
            }
            ExperimentKind::VarianceInfinite => {
                "Var[(Psi_N, f)] in infinite volume (d >= 3) against the continuum limit"
            }
            ExperimentKind::VarianceFinite => {
                "Var[(Psi_N, f)] on a bounded domain against the Dirichlet energy"
            }
            ExperimentKind::BesovScaling => {
                "lambda^d Var[(Psi_N, f_lambda)] over a grid of dilations"
            }
            ExperimentKind::Bridge1d => "d = 1 rescaled field against the Brownian bridge",
            ExperimentKind::ThomeeError => {
                "finite-difference error study with a manufactured solution on a ball"
            }
            ExperimentKind::SpectralGap => {
                "h^-2 mu_1 of the rescaled operator against kappa_1 lambda_1"
            }
            ExperimentKind::SobolevGff => {
                "truncated eigenfunction series of the continuum free field"
            }
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How `bridge_1d` draws its lattice fields.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BridgeSampler {
    /// Exact Gaussian sampling from the precision operator with the configured `kappa`.
    #[default]
    Exact,
    /// Zero-boundary Gaussian random-walk bridge (pure gradient model only).
    Walk,
}

/// Acceptance thresholds. Unset entries fall back to per-experiment defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Largest relative error allowed at the finest grid point.
    pub rel_error: Option<f64>,
    /// Smallest allowed log-log slope of the error against `h`.
    pub slope_min: Option<f64>,
    /// Largest allowed max/min ratio of the scaling statistic.
    pub ratio_max: Option<f64>,
    /// Largest allowed Green's-function sup distance at the finest `N`.
    pub sup_distance: Option<f64>,
    /// Allowed deviation in standard errors for Monte Carlo checks.
    pub stderr_multiple: Option<f64>,
    /// Smallest fraction of covariance pairs that must agree.
    pub pair_fraction: Option<f64>,
    /// Significance level of the Kolmogorov–Smirnov test.
    pub ks_level: Option<f64>,
    /// Largest relative deviation of the mean path maximum from its oracle.
    pub path_max_rel: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub domain: Option<DomainSpec>,
    #[serde(default = "default_kappa")]
    pub kappa: Vec<f64>,
    /// Resolution grid `N`.
    #[serde(default)]
    pub n: Vec<usize>,
    /// Spacing grid `h`, strictly decreasing.
    #[serde(default)]
    pub h: Vec<f64>,
    pub test_function: Option<TestFunction>,
    /// Dilations `λ ∈ (0, 1]` for `besov_scaling`.
    #[serde(default)]
    pub lambdas: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    pub count: Option<usize>,
    /// Spacing of the continuum reference solve for `variance_finite`.
    pub h_ref: Option<f64>,
    /// Number of eigenmodes for `sobolev_gff`.
    pub truncation: Option<usize>,
    /// Sobolev index `s` of the `H^{-s}` norm for `sobolev_gff`.
    pub sobolev_index: Option<f64>,
    /// Source point (continuum coordinates) of the Green's-function column.
    pub source: Option<Vec<f64>>,
    #[serde(default)]
    pub bridge_sampler: BridgeSampler,
    /// Number of steps of the dense random-walk bridge oracle.
    pub oracle_steps: Option<usize>,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Output directory, relative to the output root unless absolute.
    pub output: Option<PathBuf>,
    /// Also write the lattice node lists of every resolution.
    #[serde(default)]
    pub dump_nodes: bool,
}

fn default_kappa() -> Vec<f64> {
    vec![1.0, 1.0]
}

impl ExperimentConfig {
    /// Parse from text; `format` is `"json"` or `"toml"`.
    pub fn parse(text: &str, format: &str) -> Result<Self, CliError> {
        match format {
            "json" => serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string())),
            "toml" => toml::from_str(text).map_err(|e| CliError::Config(e.to_string())),
            other => Err(CliError::Config(format!("unknown config format `{other}`"))),
        }
    }

    /// Read a config file: `.json` is JSON, everything else is TOML.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let json = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"));
        Self::parse(&text, if json { "json" } else { "toml" })
    }

    /// Directory receiving the report and data files.
    pub fn output_dir(&self, root: &Path) -> PathBuf {
        match &self.output {
            Some(p) if p.is_absolute() => p.clone(),
            Some(p) => root.join(p),
            None => root.join("results").join(self.experiment.name()),
        }
    }

    pub fn count_or(&self, default: usize) -> usize {
        self.count.unwrap_or(default)
    }
}
