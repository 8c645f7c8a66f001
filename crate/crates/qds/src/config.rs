//! TOML experiment configuration. Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use qds_core::observable::{ObservableKind, ObservableSpec};
use qds_core::param_curve::{CurveSegment, PiecewiseHolderCurve, SegmentKind};
use qds_core::transfer_op::{DEFAULT_SRB_MAX_ITER, DEFAULT_SRB_TOL};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] qds_core::QdsError),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Decay,
    Perturb,
    Adiabatic,
    Correlation,
    Ergodic,
    ConeCheck,
    Srb,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Self::Decay => "decay",
            Self::Perturb => "perturb",
            Self::Adiabatic => "adiabatic",
            Self::Correlation => "correlation",
            Self::Ergodic => "ergodic",
            Self::ConeCheck => "cone-check",
            Self::Srb => "srb",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub beta_star: f64,
    pub curve: CurveConfig,
    #[serde(default = "default_observable")]
    pub observable: ObservableKind,
    /// Number of Ulam cells `N`.
    #[serde(default = "default_grid")]
    pub grid: usize,
    /// Row levels `n`.
    #[serde(default)]
    pub levels: Vec<usize>,
    /// Monte-Carlo sample count `M`.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub decay: DecayConfig,
    #[serde(default)]
    pub perturb: PerturbConfig,
    #[serde(default)]
    pub adiabatic: AdiabaticConfig,
    #[serde(default)]
    pub correlation: CorrelationConfig,
    #[serde(default)]
    pub ergodic: ErgodicConfig,
    #[serde(default)]
    pub cone_check: ConeCheckConfig,
    #[serde(default)]
    pub srb: SrbConfig,
}

fn default_observable() -> ObservableKind {
    ObservableKind::Affine {
        intercept: 0.0,
        slope: 1.0,
    }
}

fn default_grid() -> usize {
    qds_core::transfer_op::DEFAULT_N_CELLS
}

fn default_samples() -> usize {
    200
}

/// Either `constant = α` or a list of `[[curve.segments]]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveConfig {
    #[serde(default = "one")]
    pub theta: f64,
    #[serde(default)]
    pub constant: Option<f64>,
    #[serde(default)]
    pub segments: Vec<SegmentConfig>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SegmentConfig {
    Constant {
        #[serde(default)]
        t_lo: f64,
        #[serde(default = "one")]
        t_hi: f64,
        value: f64,
    },
    Affine {
        #[serde(default)]
        t_lo: f64,
        #[serde(default = "one")]
        t_hi: f64,
        start: f64,
        end: f64,
    },
    PowerHolder {
        #[serde(default)]
        t_lo: f64,
        #[serde(default = "one")]
        t_hi: f64,
        base: f64,
        amplitude: f64,
        exponent: f64,
    },
    Tabulated {
        #[serde(default)]
        t_lo: f64,
        #[serde(default = "one")]
        t_hi: f64,
        points: Vec<(f64, f64)>,
    },
}

impl SegmentConfig {
    fn build(&self) -> qds_core::Result<CurveSegment<f64>> {
        match self.clone() {
            Self::Constant { t_lo, t_hi, value } => CurveSegment::new(t_lo, t_hi, SegmentKind::Constant { value }),
            Self::Affine { t_lo, t_hi, start, end } => {
                CurveSegment::new(t_lo, t_hi, SegmentKind::Affine { start, end })
            }
            Self::PowerHolder {
                t_lo,
                t_hi,
                base,
                amplitude,
                exponent,
            } => CurveSegment::new(
                t_lo,
                t_hi,
                SegmentKind::PowerHolder {
                    base,
                    amplitude,
                    exponent,
                },
            ),
            Self::Tabulated { t_lo, t_hi, points } => CurveSegment::new(t_lo, t_hi, SegmentKind::Tabulated { points }),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub srb_tol: f64,
    pub srb_max_iter: usize,
    /// Base `ε_cone` for cone checks of pushforwards; `2/N` is added.
    pub cone_eps: f64,
    /// `ε_grid` for the SRB cone bound.
    pub grid_eps: f64,
    /// Allowed L¹ gap between Ulam SRB and orbit histogram.
    pub histogram_l1: f64,
    /// Monte-Carlo agreement window in standard errors.
    pub agreement_se: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            srb_tol: DEFAULT_SRB_TOL,
            srb_max_iter: DEFAULT_SRB_MAX_ITER,
            cone_eps: 1e-6,
            grid_eps: 0.05,
            histogram_l1: 0.05,
            agreement_se: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityChoice {
    /// The constant density 1.
    Uniform,
    /// `(1 − β_*) x^{-β_*}`.
    Profile,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PartitionConfig {
    Uniform,
    /// Geometric cells from `smallest` to `junction`, uniform above.
    /// `geometric_cells` defaults to a quarter of the grid.
    Graded {
        #[serde(default)]
        geometric_cells: Option<usize>,
        #[serde(default = "default_smallest")]
        smallest: f64,
        #[serde(default = "default_junction")]
        junction: f64,
    },
}

fn default_smallest() -> f64 {
    1e-18
}

fn default_junction() -> f64 {
    1.0 / 64.0
}

impl Default for PartitionConfig {
    fn default() -> Self {
        Self::Graded {
            geometric_cells: None,
            smallest: default_smallest(),
            junction: default_junction(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecayConfig {
    pub partition: PartitionConfig,
    pub first: DensityChoice,
    pub second: DensityChoice,
}

impl Default for DecayConfig {
    fn default() -> Self {
        Self {
            partition: PartitionConfig::default(),
            first: DensityChoice::Uniform,
            second: DensityChoice::Profile,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbConfig {
    pub alpha: f64,
    /// `β − α` values.
    pub gaps: Vec<f64>,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        Self {
            alpha: 0.2,
            gaps: (3..=10).map(|k| 2f64.powi(-k)).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdiabaticConfig {
    pub t_points: Vec<f64>,
}

impl Default for AdiabaticConfig {
    fn default() -> Self {
        Self {
            t_points: vec![0.25, 0.5, 0.75],
        }
    }
}

/// Indices `k_1 = start`, then steps of `spacing`, except a step of `gap`
/// right after index `split`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrelationConfig {
    /// One observable per index; empty means the top-level observable at
    /// every index.
    pub observables: Vec<ObservableKind>,
    /// Number of indices `ℓ` when `observables` is empty.
    pub order: usize,
    pub start: usize,
    pub spacing: usize,
    pub split: usize,
    pub gaps: Vec<usize>,
}

impl Default for CorrelationConfig {
    fn default() -> Self {
        Self {
            observables: Vec::new(),
            order: 2,
            start: 0,
            spacing: 0,
            split: 1,
            gaps: vec![8, 32, 128],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ErgodicConfig {
    pub eps: Vec<f64>,
    /// t-grid size; defaults to `min(n, 512) + 1` per level.
    pub t_points: Option<usize>,
    pub n_quad: usize,
}

impl Default for ErgodicConfig {
    fn default() -> Self {
        Self {
            eps: vec![0.05],
            t_points: None,
            n_quad: 256,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConeCheckConfig {
    /// Upper end of the random α range; defaults to `beta_star`.
    pub alpha_max: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SrbConfig {
    /// Parameters to analyse; defaults to the curve's constant value.
    pub alphas: Vec<f64>,
    /// Total orbit points for the histogram cross-check (0 disables it).
    pub orbit_points: u64,
    pub chains: usize,
    pub burn_in: usize,
    /// Histogram bins; defaults to the grid size.
    pub bins: Option<usize>,
}

impl Default for SrbConfig {
    fn default() -> Self {
        Self {
            alphas: Vec::new(),
            orbit_points: 0,
            chains: 1000,
            burn_in: 1000,
            bins: None,
        }
    }
}

/// A validated configuration with its model objects built.
#[derive(Debug, Clone)]
pub struct Setup {
    pub config: ExperimentConfig,
    pub curve: PiecewiseHolderCurve<f64>,
    pub observable: ObservableSpec,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn build_curve(&self) -> Result<PiecewiseHolderCurve<f64>, ConfigError> {
        let c = &self.curve;
        match (c.constant, c.segments.is_empty()) {
            (Some(v), true) => Ok(PiecewiseHolderCurve::constant(v, self.beta_star)?),
            (None, false) => {
                let segments = c.segments.iter().map(SegmentConfig::build).collect::<qds_core::Result<_>>()?;
                Ok(PiecewiseHolderCurve::new(segments, c.theta, self.beta_star)?)
            }
            (Some(_), false) => invalid("curve takes either `constant` or `segments`, not both"),
            (None, true) => invalid("curve needs `constant` or at least one segment"),
        }
    }

    /// Checks every precondition the selected experiment relies on.
    pub fn validate(self) -> Result<Setup, ConfigError> {
        if !(self.beta_star > 0.0 && self.beta_star < 1.0) {
            return invalid(format!("beta_star must lie in (0, 1), got {}", self.beta_star));
        }
        if self.grid < 4 {
            return invalid(format!("grid needs at least 4 cells, got {}", self.grid));
        }
        if self.samples == 0 {
            return invalid("samples must be positive");
        }
        if self.levels.contains(&0) {
            return invalid("levels must be positive");
        }
        let t = &self.tolerances;
        if !(t.srb_tol > 0.0 && t.cone_eps >= 0.0 && t.grid_eps >= 0.0 && t.histogram_l1 > 0.0 && t.agreement_se > 0.0)
        {
            return invalid("tolerances must be positive");
        }
        let curve = self.build_curve()?;
        let checked: Vec<usize> = if self.levels.is_empty() { vec![16] } else { self.levels.clone() };
        let report = curve.verify_admissibility(&checked)?;
        if !report.range_ok {
            return invalid(format!(
                "curve reaches {} above beta_star = {}",
                report.range_max, self.beta_star
            ));
        }
        let observable = ObservableSpec::new(self.observable.clone())?;

        let needs_levels = matches!(
            self.experiment,
            Experiment::Decay | Experiment::Adiabatic | Experiment::Ergodic
        );
        if needs_levels && self.levels.is_empty() {
            return invalid(format!("experiment {} needs `levels`", self.experiment.name()));
        }
        match self.experiment {
            Experiment::Decay => {
                if let PartitionConfig::Graded { geometric_cells, .. } = self.decay.partition {
                    if geometric_cells.is_some_and(|g| g + 2 > self.grid) {
                        return invalid("graded partition has more geometric cells than the grid allows");
                    }
                }
            }
            Experiment::Perturb => {
                let p = &self.perturb;
                if p.gaps.is_empty() {
                    return invalid("perturb needs at least one gap");
                }
                if p.gaps.iter().any(|&g| !(g >= 0.0)) {
                    return invalid("perturb gaps must be nonnegative");
                }
                let top = p.alpha + p.gaps.iter().copied().fold(0.0, f64::max);
                if !(p.alpha >= 0.0) || top > self.beta_star {
                    return invalid(format!(
                        "perturb needs 0 <= alpha < alpha + gap <= beta_star, got alpha = {} and alpha + gap up to {top}",
                        p.alpha
                    ));
                }
            }
            Experiment::Adiabatic => {
                if self.adiabatic.t_points.is_empty()
                    || self.adiabatic.t_points.iter().any(|&t| !(t > 0.0 && t <= 1.0))
                {
                    return invalid("adiabatic t_points must lie in (0, 1]");
                }
            }
            Experiment::Correlation => {
                let c = &self.correlation;
                let order = self.correlation_order();
                if !(2..=4).contains(&order) {
                    return invalid(format!("correlations take 2 to 4 observables, got {order}"));
                }
                if c.split != 1 && c.split != order - 1 {
                    return invalid(format!("split must be 1 or {}, got {}", order - 1, c.split));
                }
                if c.gaps.is_empty() {
                    return invalid("correlation needs at least one gap");
                }
                if self.samples < 2 {
                    return invalid("correlation needs at least two samples");
                }
                for kind in &c.observables {
                    ObservableSpec::new(kind.clone())?;
                }
            }
            Experiment::Ergodic => {
                if self.ergodic.eps.iter().any(|&e| !(e > 0.0)) {
                    return invalid("ergodic eps values must be positive");
                }
                if self.ergodic.t_points.is_some_and(|t| t < 2) {
                    return invalid("ergodic t_points must be at least 2");
                }
                if self.ergodic.n_quad < qds_core::ergodic::MIN_QUAD_NODES {
                    return invalid(format!(
                        "ergodic n_quad must be at least {}",
                        qds_core::ergodic::MIN_QUAD_NODES
                    ));
                }
            }
            Experiment::ConeCheck => {
                if let Some(a) = self.cone_check.alpha_max {
                    if !(a >= 0.0 && a <= self.beta_star) {
                        return invalid("cone_check.alpha_max must lie in [0, beta_star]");
                    }
                }
            }
            Experiment::Srb => {
                if self.srb_alphas(&curve).is_empty() {
                    return invalid("srb needs `srb.alphas` or a constant curve");
                }
                if self.srb.alphas.iter().any(|&a| !(0.0..1.0).contains(&a)) {
                    return invalid("srb alphas must lie in [0, 1)");
                }
                if self.srb.orbit_points > 0 && self.srb.chains == 0 {
                    return invalid("srb histogram needs at least one chain");
                }
                if self.srb.bins.is_some_and(|b| b < 2) {
                    return invalid("srb bins must be at least 2");
                }
            }
        }
        Ok(Setup {
            config: self,
            curve,
            observable,
        })
    }

    pub fn correlation_order(&self) -> usize {
        if self.correlation.observables.is_empty() {
            self.correlation.order
        } else {
            self.correlation.observables.len()
        }
    }

    pub fn srb_alphas(&self, curve: &PiecewiseHolderCurve<f64>) -> Vec<f64> {
        if self.srb.alphas.is_empty() {
            curve.constant_value().into_iter().collect()
        } else {
            self.srb.alphas.clone()
        }
    }
}
