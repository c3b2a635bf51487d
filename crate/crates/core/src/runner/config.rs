//! Scenario configuration (`condgeo.scenario.v1`) and the data sources it
//! references. Relative paths resolve against the config file's directory.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::Result;
use crate::generator::{AffineBijectionPair, FitConfig};
use crate::linalg::matrix_from_rows;
use crate::measures::{measure_from_csv_path, DiscreteMeasure, LabeledDataset};
use crate::ot::MetricSpec;

use super::RunError;

pub const SCENARIO_SCHEMA: &str = "condgeo.scenario.v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<MetricConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitConfig>,
    pub scenario: Scenario,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricConfig {
    Euclidean {
        #[serde(default = "two")]
        p: f64,
    },
    /// Points carry `label_dim` trailing label coordinates weighted by
    /// `label_weight`.
    WeightedProduct {
        #[serde(default = "two")]
        p: f64,
        label_dim: usize,
        label_weight: f64,
    },
}

impl MetricConfig {
    pub fn build(&self) -> Result<MetricSpec> {
        match self {
            MetricConfig::Euclidean { p } => MetricSpec::euclidean(*p),
            MetricConfig::WeightedProduct { p, label_dim, label_weight } => MetricSpec::weighted_product(*p, *label_dim, *label_weight),
        }
    }
}

fn two() -> f64 {
    2.0
}

pub fn default_times() -> Vec<f64> {
    vec![0.0, 0.25, 0.5, 0.75, 1.0]
}

fn default_speed_tol() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Scenario {
    Ot {
        source: MeasureSource,
        target: MeasureSource,
        #[serde(default)]
        solver: OtSolver,
    },
    Geodesic {
        source: MeasureSource,
        target: MeasureSource,
        #[serde(default = "default_times")]
        times: Vec<f64>,
        #[serde(default = "default_speed_tol")]
        tol: f64,
    },
    Barycenter {
        measures: Vec<MeasureSource>,
        alphas: Vec<f64>,
    },
    Conditional {
        p_data: LabeledSource,
        q_data: LabeledSource,
    },
    Pipeline(PipelineScenario),
    Verify {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        filter: Option<String>,
    },
}

impl Scenario {
    pub fn kind(&self) -> &'static str {
        match self {
            Scenario::Ot { .. } => "ot",
            Scenario::Geodesic { .. } => "geodesic",
            Scenario::Barycenter { .. } => "barycenter",
            Scenario::Conditional { .. } => "conditional",
            Scenario::Pipeline(_) => "pipeline",
            Scenario::Verify { .. } => "verify",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OtSolver {
    #[default]
    Exact,
    Sinkhorn {
        epsilon: f64,
        #[serde(default = "default_sinkhorn_iter")]
        max_iter: usize,
        #[serde(default = "default_sinkhorn_tol")]
        tol: f64,
    },
}

fn default_sinkhorn_iter() -> usize {
    10_000
}

fn default_sinkhorn_tol() -> f64 {
    1e-9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineScenario {
    pub data: LabeledSource,
    #[serde(default)]
    pub encoder: EncoderChoice,
    #[serde(default)]
    pub transport: TransportChoice,
    /// Label at which the barycentric generator produces samples.
    pub target_label: Vec<f64>,
    #[serde(default)]
    pub generation: GenerationChoice,
    /// Indices (in sorted label order) of the edge whose geodesic is emitted.
    #[serde(default = "default_edge")]
    pub edge: (usize, usize),
    #[serde(default = "default_times")]
    pub times: Vec<f64>,
}

fn default_edge() -> (usize, usize) {
    (0, 1)
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EncoderChoice {
    #[default]
    Identity,
    /// One affine map per observed label, matrices row-major.
    Affine { matrices: Vec<Vec<f64>>, offsets: Vec<Vec<f64>> },
    /// Fit to the given latent prior with the `fit` block.
    Fit { prior: MeasureSource },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TransportChoice {
    /// Exact latent OT between every pair of vertices.
    #[default]
    Oracle,
    /// Affine maps fitted with the `fit` block.
    Fit,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GenerationChoice {
    #[default]
    Exact,
    Sampling { n: usize },
}

/// An unlabeled measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSource {
    /// `x1..xd[,w]` file.
    Csv(PathBuf),
    Inline {
        points: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
    },
    /// Uniform atoms at the mid-quantiles `(i + ½)/n` of `N(mean, std²)`.
    NormalQuantiles { mean: f64, std: f64, n: usize },
}

/// A labeled dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LabeledSource {
    /// `x1..xd,c1..ck[,w]` file.
    Csv(PathBuf),
    Inline {
        xs: Vec<Vec<f64>>,
        cs: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
    },
    /// `x = A_c⁻¹(z - b_c)` for every atom `z` of a shared latent law and
    /// every label, each label equally likely.
    AffineFamily { latent: MeasureSource, labels: Vec<Vec<f64>>, matrices: Vec<Vec<f64>>, offsets: Vec<Vec<f64>> },
}

pub fn normal_quantiles(mean: f64, std: f64, n: usize) -> Result<DiscreteMeasure> {
    use crate::error::Error;
    if n == 0 {
        return Err(Error::EmptySupport);
    }
    let dist = Normal::new(mean, std).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    DiscreteMeasure::uniform((0..n).map(|i| vec![dist.inverse_cdf((i as f64 + 0.5) / n as f64)]).collect())
}

/// Square row-major matrices of dimension `d` from a list of flat rows.
pub fn pair_from_rows(labels: Vec<Vec<f64>>, matrices: &[Vec<f64>], offsets: &[Vec<f64>]) -> Result<AffineBijectionPair> {
    use crate::error::Error;
    if matrices.len() != labels.len() || offsets.len() != labels.len() {
        return Err(Error::InvalidArgument("need one matrix and one offset per label".into()));
    }
    let mut ms = Vec::with_capacity(matrices.len());
    for (m, b) in matrices.iter().zip(offsets) {
        let d = b.len();
        if m.len() != d * d {
            return Err(Error::DimensionMismatch { expected: d * d, actual: m.len() });
        }
        ms.push(matrix_from_rows(d, d, m));
    }
    let bs: Vec<DVector<f64>> = offsets.iter().map(|b| DVector::from_column_slice(b)).collect();
    AffineBijectionPair::from_parts(labels, ms, bs)
}

impl MeasureSource {
    pub fn load(&self, base: &Path) -> std::result::Result<DiscreteMeasure, RunError> {
        match self {
            MeasureSource::Csv(p) => measure_from_csv_path(&base.join(p)).map_err(RunError::data),
            MeasureSource::Inline { points, weights } => {
                crate::measures::empirical_from_samples(points.clone(), weights.clone()).map_err(RunError::config)
            }
            MeasureSource::NormalQuantiles { mean, std, n } => normal_quantiles(*mean, *std, *n).map_err(RunError::config),
        }
    }

    fn paths(&self) -> Vec<&Path> {
        match self {
            MeasureSource::Csv(p) => vec![p.as_path()],
            _ => vec![],
        }
    }
}

impl LabeledSource {
    pub fn load(&self, base: &Path) -> std::result::Result<LabeledDataset, RunError> {
        match self {
            LabeledSource::Csv(p) => LabeledDataset::from_csv_path(&base.join(p)).map_err(RunError::data),
            LabeledSource::Inline { xs, cs, weights } => LabeledDataset::new(xs.clone(), cs.clone(), weights.clone()).map_err(RunError::config),
            LabeledSource::AffineFamily { latent, labels, matrices, offsets } => {
                let z = latent.load(base)?;
                let pair = pair_from_rows(labels.clone(), matrices, offsets).map_err(RunError::config)?;
                let mut xs = Vec::new();
                let mut cs = Vec::new();
                let mut ws = Vec::new();
                for c in labels {
                    for (p, w) in z.iter() {
                        xs.push(pair.generate(p, c).map_err(RunError::config)?);
                        cs.push(c.clone());
                        ws.push(w / labels.len() as f64);
                    }
                }
                LabeledDataset::new(xs, cs, Some(ws)).map_err(RunError::config)
            }
        }
    }

    fn paths(&self) -> Vec<&Path> {
        match self {
            LabeledSource::Csv(p) => vec![p.as_path()],
            LabeledSource::AffineFamily { latent, .. } => latent.paths(),
            LabeledSource::Inline { .. } => vec![],
        }
    }
}

impl ScenarioConfig {
    /// Parses a config document; field paths are reported on failure.
    pub fn from_json(s: &str) -> std::result::Result<Self, RunError> {
        let de = &mut serde_json::Deserializer::from_str(s);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let at = if path == "." { "top level".to_string() } else { format!("`{path}`") };
            RunError::Config(format!("at {at}: {}", e.inner()))
        })?;
        if cfg.schema != SCENARIO_SCHEMA {
            return Err(RunError::Config(format!("at `schema`: expected {SCENARIO_SCHEMA:?}, found {:?}", cfg.schema)));
        }
        cfg.check_shape()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> std::result::Result<Self, RunError> {
        let s = std::fs::read_to_string(path).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
        let cfg = Self::from_json(&s)?;
        cfg.check_files(path.parent().unwrap_or(Path::new(".")))?;
        Ok(cfg)
    }

    fn check_shape(&self) -> std::result::Result<(), RunError> {
        let kind = self.scenario.kind();
        if self.fit.is_some() && kind != "pipeline" {
            return Err(RunError::Config(format!("at `fit`: only pipeline scenarios take a fit block, not {kind}")));
        }
        if self.metric.is_some() && matches!(kind, "pipeline" | "verify") {
            return Err(RunError::Config(format!("at `metric`: {kind} scenarios set p and the label weight through `fit`")));
        }
        if let Scenario::Barycenter { .. } = &self.scenario {
            let squared = match &self.metric {
                None => true,
                Some(MetricConfig::Euclidean { p }) => *p == 2.0,
                Some(_) => false,
            };
            if !squared {
                return Err(RunError::Config("at `metric`: barycenters use the squared Euclidean cost".into()));
            }
        }
        Ok(())
    }

    /// Every referenced file must exist when the config is loaded.
    pub fn check_files(&self, base: &Path) -> std::result::Result<(), RunError> {
        let mut paths: Vec<&Path> = Vec::new();
        match &self.scenario {
            Scenario::Ot { source, target, .. } | Scenario::Geodesic { source, target, .. } => {
                paths.extend(source.paths());
                paths.extend(target.paths());
            }
            Scenario::Barycenter { measures, .. } => measures.iter().for_each(|m| paths.extend(m.paths())),
            Scenario::Conditional { p_data, q_data } => {
                paths.extend(p_data.paths());
                paths.extend(q_data.paths());
            }
            Scenario::Pipeline(p) => {
                paths.extend(p.data.paths());
                if let EncoderChoice::Fit { prior } = &p.encoder {
                    paths.extend(prior.paths());
                }
            }
            Scenario::Verify { .. } => {}
        }
        for p in paths {
            if !base.join(p).is_file() {
                return Err(RunError::Config(format!("referenced file {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    pub fn metric_spec(&self) -> std::result::Result<MetricSpec, RunError> {
        self.metric.clone().unwrap_or(MetricConfig::Euclidean { p: 2.0 }).build().map_err(RunError::config)
    }
}

/// Dense `d×d` matrix from a row-major slice, for callers outside the crate.
pub fn square(d: usize, rows: &[f64]) -> DMatrix<f64> {
    matrix_from_rows(d, d, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_seed_names_the_field() {
        let s = r#"{"schema":"condgeo.scenario.v1","scenario":{"kind":"verify"}}"#;
        let e = ScenarioConfig::from_json(s).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("seed"), "{e}");
    }

    #[test]
    fn struct_errors_carry_the_full_path() {
        let s = r#"{"schema":"condgeo.scenario.v1","seed":1,"fit":{"step":"big"},"scenario":{"kind":"verify"}}"#;
        let e = ScenarioConfig::from_json(s).unwrap_err().to_string();
        assert!(e.contains("at `fit.step`"), "{e}");
    }

    #[test]
    fn tagged_errors_name_the_field() {
        let s = r#"{"schema":"condgeo.scenario.v1","seed":1,"scenario":{"kind":"ot","source":{"inline":{"points":[[0]]}},"target":{"inline":{"pointz":[[1]]}}}}"#;
        let e = ScenarioConfig::from_json(s).unwrap_err().to_string();
        // Tagged bodies are buffered, so the path stops at the tagged object
        // and the message names the field.
        assert!(e.contains("at `scenario`") && e.contains("pointz"), "{e}");
    }

    #[test]
    fn unknown_kind_is_a_config_error() {
        let s = r#"{"schema":"condgeo.scenario.v1","seed":1,"scenario":{"kind":"teleport"}}"#;
        assert_eq!(ScenarioConfig::from_json(s).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn quantiles_are_symmetric() {
        let m = normal_quantiles(1.0, 2.0, 4).unwrap();
        assert!((m.point(0)[0] + m.point(3)[0] - 2.0).abs() < 1e-12);
        assert!((m.mean()[0] - 1.0).abs() < 1e-12);
    }
}
