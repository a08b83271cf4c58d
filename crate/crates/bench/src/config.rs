//! Experiment configuration: a TOML file with flat sections.
//!
//! ```toml
//! [experiment]
//! output = "results.csv"
//! repetitions = 20
//! seed = 7
//! sweep = "sigma"                # or "outlier-fraction"
//! values = [0.01, 0.1, 0.3]
//!
//! [generator]                    # or [dataset]
//! m = 60
//! n = 30
//! x_scale = "inv-n"
//! noise = "gaussian"
//!
//! [methods]
//! list = ["maximin:l2", "sdr:l2", "ste:l2"]
//!
//! [solver]
//! eta = 0.02
//! ```
//!
//! Relative paths are resolved against the directory holding the config file.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use maximin::baselines::{LprConfig, SdrConfig, SteConfig};
use maximin::data::{MagnitudeRule, Noise, TargetColumn, XScale};
use maximin::{LossKind, Method, SolveConfig};
use serde::Deserialize;

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub generator: Option<GeneratorSection>,
    pub dataset: Option<DatasetSection>,
    pub methods: MethodsSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub baselines: BaselinesSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKind {
    Sigma,
    OutlierFraction,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default = "default_output")]
    pub output: PathBuf,
    pub repetitions: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_sweep")]
    pub sweep: SweepKind,
    pub values: Vec<f64>,
    /// Record every k-th iterate of maximin runs; 0 disables tracing.
    #[serde(default)]
    pub trace_every: usize,
    #[serde(default = "default_trace_dir")]
    pub trace_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    Gaussian,
    Laplace,
    SparseOutliers,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleKind {
    Unit,
    InvN,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSection {
    pub m: usize,
    pub n: usize,
    #[serde(default = "default_scale")]
    pub x_scale: ScaleKind,
    #[serde(default = "default_noise")]
    pub noise: NoiseKind,
    #[serde(default = "default_magnitude")]
    pub magnitude: f64,
    /// Rows of the fresh noise-free test design used for NRMSE.
    #[serde(default = "default_test_samples")]
    pub test_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub path: PathBuf,
    /// `"last"`, a zero-based column index, or a header name.
    #[serde(default = "default_target")]
    pub target: String,
    #[serde(default)]
    pub header: bool,
    #[serde(default = "default_true")]
    pub normalize: bool,
    #[serde(default = "default_true")]
    pub bias: bool,
    #[serde(default = "default_train_frac")]
    pub train_frac: f64,
    /// Outlier magnitude as a multiple of the train-target standard deviation.
    #[serde(default = "default_magnitude_std")]
    pub magnitude_std: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodsSection {
    pub list: Vec<String>,
    #[serde(default = "default_delta")]
    pub huber_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub method: String,
    pub eta: f64,
    pub gamma0: f64,
    pub gamma_growth: f64,
    pub gamma_max: f64,
    pub adaptive: bool,
    pub max_iters: usize,
    pub binarize_tol: f64,
    pub grad_tol: f64,
    pub divergence_cap: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolveConfig::default();
        Self {
            method: d.method.name().to_string(),
            eta: d.eta,
            gamma0: d.gamma0,
            gamma_growth: d.gamma_growth,
            gamma_max: d.gamma_max,
            adaptive: d.adaptive,
            max_iters: d.max_iters,
            binarize_tol: d.binarize_tol,
            grad_tol: d.grad_tol,
            divergence_cap: d.divergence_cap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselinesSection {
    pub ste_steps: usize,
    pub ste_step_size: f64,
    pub ste_clip: f64,
    pub lpr_max_iters: usize,
    pub sdr_rank: Option<usize>,
    pub sdr_restarts: usize,
    pub sdr_max_iters: usize,
}

impl Default for BaselinesSection {
    fn default() -> Self {
        let ste = SteConfig::default();
        let sdr = SdrConfig::default();
        Self {
            ste_steps: ste.steps,
            ste_step_size: ste.step_size,
            ste_clip: ste.latent_clip,
            lpr_max_iters: LprConfig::default().max_iters,
            sdr_rank: sdr.rank,
            sdr_restarts: sdr.restarts,
            sdr_max_iters: sdr.max_iters,
        }
    }
}

fn default_output() -> PathBuf {
    PathBuf::from("results.csv")
}
fn default_trace_dir() -> PathBuf {
    PathBuf::from("traces")
}
fn default_sweep() -> SweepKind {
    SweepKind::Sigma
}
fn default_scale() -> ScaleKind {
    ScaleKind::InvN
}
fn default_noise() -> NoiseKind {
    NoiseKind::Gaussian
}
fn default_magnitude() -> f64 {
    1e3
}
fn default_test_samples() -> usize {
    1000
}
fn default_target() -> String {
    "last".to_string()
}
fn default_true() -> bool {
    true
}
fn default_train_frac() -> f64 {
    0.7
}
fn default_magnitude_std() -> f64 {
    10.0
}
fn default_delta() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Maximin,
    Lr,
    Lpr,
    Ste,
    Sdr,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Maximin => "maximin",
            Family::Lr => "lr",
            Family::Lpr => "lpr",
            Family::Ste => "ste",
            Family::Sdr => "sdr",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossName {
    L2,
    L1,
    Huber,
    Ce,
}

impl LossName {
    pub fn name(&self) -> &'static str {
        match self {
            LossName::L2 => "l2",
            LossName::L1 => "l1",
            LossName::Huber => "huber",
            LossName::Ce => "ce",
        }
    }

    pub fn kind(&self, huber_delta: f64) -> LossKind {
        match self {
            LossName::L2 => LossKind::Squared,
            LossName::L1 => LossKind::L1,
            LossName::Huber => LossKind::Huber { delta: huber_delta },
            LossName::Ce => LossKind::CrossEntropy,
        }
    }
}

/// One `family:loss` entry of the method list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MethodSpec {
    pub family: Family,
    pub loss: LossName,
}

impl FromStr for MethodSpec {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        let (family, loss) = s
            .split_once(':')
            .ok_or_else(|| BenchError::Config(format!("method `{s}` must have the form family:loss")))?;
        let family = match family.trim() {
            "maximin" => Family::Maximin,
            "lr" => Family::Lr,
            "lpr" => Family::Lpr,
            "ste" => Family::Ste,
            "sdr" => Family::Sdr,
            other => return Err(BenchError::Config(format!("unknown method family `{other}`"))),
        };
        let loss = match loss.trim() {
            "l2" => LossName::L2,
            "l1" => LossName::L1,
            "huber" => LossName::Huber,
            "ce" => LossName::Ce,
            other => return Err(BenchError::Config(format!("unknown loss `{other}`"))),
        };
        if family == Family::Sdr && loss != LossName::L2 {
            return Err(BenchError::Config(format!("sdr supports only l2, got `{s}`")));
        }
        Ok(MethodSpec { family, loss })
    }
}

impl std::fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.family.name(), self.loss.name())
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(BenchError::Config(msg));
        let exp = &self.experiment;
        if exp.repetitions < 1 {
            return bad("repetitions must be at least 1".into());
        }
        if exp.values.is_empty() {
            return bad("sweep values must not be empty".into());
        }
        if self.methods.list.is_empty() {
            return bad("at least one method is required".into());
        }
        let specs = self.method_specs()?;
        for (i, a) in specs.iter().enumerate() {
            if specs[..i].contains(a) {
                return bad(format!("method `{a}` listed twice"));
            }
        }
        if !(self.methods.huber_delta > 0.0 && self.methods.huber_delta.is_finite()) {
            return bad("huber_delta must be positive".into());
        }
        for &v in &exp.values {
            let ok = match exp.sweep {
                SweepKind::Sigma => v.is_finite() && v >= 0.0,
                SweepKind::OutlierFraction => (0.0..1.0).contains(&v),
            };
            if !ok {
                return bad(format!("sweep value {v} out of range"));
            }
        }
        match (&self.generator, &self.dataset) {
            (Some(_), Some(_)) => return bad("give either [generator] or [dataset], not both".into()),
            (None, None) => return bad("one of [generator] or [dataset] is required".into()),
            (Some(g), None) => {
                if g.m == 0 || g.n == 0 {
                    return bad("generator dimensions must be positive".into());
                }
                if g.test_samples == 0 {
                    return bad("test_samples must be positive".into());
                }
                let sweep_ok = matches!(
                    (exp.sweep, g.noise),
                    (SweepKind::Sigma, NoiseKind::Gaussian | NoiseKind::Laplace)
                        | (SweepKind::OutlierFraction, NoiseKind::SparseOutliers)
                );
                if !sweep_ok {
                    return bad("sigma sweeps need gaussian or laplace noise; outlier-fraction sweeps need sparse-outliers".into());
                }
                for v in &exp.values {
                    self.generator_noise(*v)?;
                }
            }
            (None, Some(d)) => {
                if exp.sweep != SweepKind::OutlierFraction {
                    return bad("dataset experiments sweep over outlier-fraction".into());
                }
                if !(d.train_frac > 0.0 && d.train_frac < 1.0) {
                    return bad("train_frac must lie in (0, 1)".into());
                }
                if !(d.magnitude_std > 0.0 && d.magnitude_std.is_finite()) {
                    return bad("magnitude_std must be positive".into());
                }
                self.target_column()?;
            }
        }
        self.solve_config(0)?.validate()?;
        let b = &self.baselines;
        if !(b.ste_step_size > 0.0 && b.ste_clip >= 1.0) {
            return bad("ste_step_size must be positive and ste_clip at least 1".into());
        }
        if b.sdr_restarts == 0 {
            return bad("sdr_restarts must be at least 1".into());
        }
        Ok(())
    }

    pub fn method_specs(&self) -> Result<Vec<MethodSpec>> {
        self.methods.list.iter().map(|s| s.parse()).collect()
    }

    /// Noise model for one sweep value of a synthetic experiment.
    pub fn generator_noise(&self, value: f64) -> Result<Noise> {
        let g = self
            .generator
            .as_ref()
            .ok_or_else(|| BenchError::Config("no [generator] section".into()))?;
        let noise = match (self.experiment.sweep, g.noise) {
            (SweepKind::Sigma, NoiseKind::Gaussian) => Noise::Gaussian { sigma: value },
            (SweepKind::Sigma, NoiseKind::Laplace) => Noise::Laplace { scale: value },
            (SweepKind::OutlierFraction, NoiseKind::SparseOutliers) => Noise::SparseOutliers {
                fraction: value,
                magnitude: g.magnitude,
            },
            _ => return Err(BenchError::Config("sweep kind does not match the noise model".into())),
        };
        Ok(noise)
    }

    pub fn x_scale(&self) -> XScale {
        match self.generator.as_ref().map(|g| g.x_scale) {
            Some(ScaleKind::Unit) => XScale::Unit,
            _ => XScale::InvN,
        }
    }

    pub fn target_column(&self) -> Result<TargetColumn> {
        let d = self
            .dataset
            .as_ref()
            .ok_or_else(|| BenchError::Config("no [dataset] section".into()))?;
        let t = d.target.trim();
        if t == "last" {
            Ok(TargetColumn::Last)
        } else if let Ok(i) = t.parse::<usize>() {
            Ok(TargetColumn::Index(i))
        } else if d.header {
            Ok(TargetColumn::Name(t.to_string()))
        } else {
            Err(BenchError::Config(format!("target `{t}` names a column but header = false")))
        }
    }

    pub fn magnitude_rule(&self) -> MagnitudeRule {
        MagnitudeRule::TargetStdMultiple(self.dataset.as_ref().map_or(10.0, |d| d.magnitude_std))
    }

    pub fn solve_config(&self, seed: u64) -> Result<SolveConfig> {
        let s = &self.solver;
        Ok(SolveConfig {
            method: Method::from_str(&s.method)?,
            eta: s.eta,
            gamma0: s.gamma0,
            gamma_growth: s.gamma_growth,
            gamma_max: s.gamma_max,
            adaptive: s.adaptive,
            max_iters: s.max_iters,
            binarize_tol: s.binarize_tol,
            grad_tol: s.grad_tol,
            divergence_cap: s.divergence_cap,
            trace_every: self.experiment.trace_every,
            seed,
            ..SolveConfig::default()
        })
    }

    pub fn ste_config(&self, seed: u64) -> SteConfig {
        let b = &self.baselines;
        SteConfig {
            steps: b.ste_steps,
            step_size: b.ste_step_size,
            latent_clip: b.ste_clip,
            seed,
        }
    }

    pub fn lpr_config(&self) -> LprConfig {
        LprConfig {
            max_iters: self.baselines.lpr_max_iters,
            ..LprConfig::default()
        }
    }

    pub fn sdr_config(&self, seed: u64) -> SdrConfig {
        let b = &self.baselines;
        SdrConfig {
            rank: b.sdr_rank,
            restarts: b.sdr_restarts,
            max_iters: b.sdr_max_iters,
            seed,
            ..SdrConfig::default()
        }
    }

    /// Number of individual runs the experiment performs.
    pub fn run_count(&self) -> usize {
        self.methods.list.len() * self.experiment.values.len() * self.experiment.repetitions
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [experiment]
        repetitions = 2
        values = [0.0, 0.1]

        [generator]
        m = 20
        n = 5

        [methods]
        list = ["maximin:l2", "lr:huber"]
    "#;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.experiment.sweep, SweepKind::Sigma);
        assert_eq!(cfg.solver, SolverSection::default());
        assert_eq!(cfg.run_count(), 8);
        assert_eq!(cfg.x_scale(), XScale::InvN);
        let specs = cfg.method_specs().unwrap();
        assert_eq!(specs[1].loss.kind(1.0), LossKind::Huber { delta: 1.0 });
        assert_eq!(specs[0].to_string(), "maximin:l2");
    }

    #[test]
    fn rejects_empty_methods_and_zero_reps() {
        let no_methods = MINIMAL.replace(r#"list = ["maximin:l2", "lr:huber"]"#, "list = []");
        assert!(ExperimentConfig::from_toml_str(&no_methods).is_err());
        let zero = MINIMAL.replace("repetitions = 2", "repetitions = 0");
        assert!(ExperimentConfig::from_toml_str(&zero).is_err());
    }

    #[test]
    fn rejects_bad_entries() {
        for (from, to) in [
            ("\"lr:huber\"", "\"sdr:l1\""),
            ("\"lr:huber\"", "\"lr:hinge\""),
            ("\"lr:huber\"", "\"maximin:l2\""),
            ("\"lr:huber\"", "\"lr\""),
            ("values = [0.0, 0.1]", "values = [-0.1]"),
            ("n = 5", "n = 5\nbogus = 1"),
        ] {
            let text = MINIMAL.replace(from, to);
            assert!(ExperimentConfig::from_toml_str(&text).is_err(), "{to}");
        }
    }

    #[test]
    fn sweep_must_match_noise_model() {
        let text = MINIMAL.replace("n = 5", "n = 5\nnoise = \"sparse-outliers\"");
        assert!(ExperimentConfig::from_toml_str(&text).is_err());
        let text = text.replace("values = [0.0, 0.1]", "sweep = \"outlier-fraction\"\nvalues = [0.0, 0.25]");
        let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(
            cfg.generator_noise(0.25).unwrap(),
            Noise::SparseOutliers {
                fraction: 0.25,
                magnitude: 1e3
            }
        );
    }

    #[test]
    fn solver_section_is_validated() {
        let text = format!("{MINIMAL}\n[solver]\neta = -1.0\n");
        assert!(ExperimentConfig::from_toml_str(&text).is_err());
        let text = format!("{MINIMAL}\n[solver]\nmethod = \"ogda\"\neta = 0.01\n");
        let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
        let sc = cfg.solve_config(3).unwrap();
        assert_eq!(sc.method, Method::Ogda);
        assert_eq!(sc.seed, 3);
    }

    #[test]
    fn dataset_target_parsing() {
        let text = r#"
            [experiment]
            repetitions = 1
            sweep = "outlier-fraction"
            values = [0.0]
            [dataset]
            path = "x.csv"
            target = "price"
            [methods]
            list = ["lr:l2"]
        "#;
        assert!(ExperimentConfig::from_toml_str(text).is_err());
        let cfg = ExperimentConfig::from_toml_str(&text.replace("target", "header = true\ntarget")).unwrap();
        assert_eq!(cfg.target_column().unwrap(), TargetColumn::Name("price".into()));
    }
}
