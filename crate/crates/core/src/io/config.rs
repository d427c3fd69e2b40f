//! Experiment configuration documents.
//!
//! Every section except the data source is optional. [`ExperimentConfig::resolve`]
//! fills all defaults so the persisted copy records exactly what ran.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::{Activation, GeneratorSpec};
use crate::obsmodels::ObservationModel;
use crate::pointproc::Domain2D;
use crate::synthdata::ScenarioConfig;
use crate::trainer::TrainConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataKind {
    /// CSV with columns `y, x_1..x_p`.
    Regression,
    /// CSV with columns `label, x_1..x_d`, or an IDX image/label pair.
    Classification,
    /// CSV with columns `x, y`.
    Points,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSource {
    pub kind: DataKind,
    pub path: String,
    /// IDX label file accompanying an IDX image file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels_path: Option<String>,
    /// Keep only the first `limit` records.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UqConfig {
    pub draws: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for UqConfig {
    fn default() -> Self {
        Self {
            draws: crate::uq::DEFAULT_DRAWS,
            level: 0.95,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PointProcessConfig {
    pub domain: Domain2D,
    /// Noise draws averaged per cell for the mean intensity map.
    pub mean_draws: usize,
    /// Dominating rate = `bound_factor` x max over a `bound_resolution`^2 grid.
    pub bound_factor: f64,
    pub bound_resolution: usize,
    /// Simulated patterns per `simulate-pp` call.
    pub paths: usize,
}

impl Default for PointProcessConfig {
    fn default() -> Self {
        Self {
            domain: Domain2D::unit_square(20, 20),
            mean_draws: crate::uq::DEFAULT_DRAWS,
            bound_factor: 1.2,
            bound_resolution: 100,
            paths: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ObservationModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorSpec>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub uq: UqConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point_process: Option<PointProcessConfig>,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
}

fn default_output_dir() -> String {
    "out".into()
}

impl ExperimentConfig {
    /// Parses a JSON document; unknown keys are rejected.
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidConfig(vec![e.to_string()]))
    }

    /// Model implied by the scenario when none is given.
    pub fn implied_model(&self) -> Option<ObservationModel> {
        if let Some(m) = self.model {
            return Some(m);
        }
        match self.scenario.as_ref()? {
            ScenarioConfig::Scissors { .. } => Some(ObservationModel::GaussianLinear { p: 1 }),
            ScenarioConfig::OutlierRegression { p, .. } => Some(ObservationModel::GaussianLinear { p: *p }),
            ScenarioConfig::TwoBump { .. } => Some(ObservationModel::PoissonCount {
                k_max: crate::obsmodels::DEFAULT_K_MAX,
            }),
            ScenarioConfig::ClassBlobs { classes, .. } => Some(ObservationModel::Categorical { classes: *classes }),
        }
    }

    /// Default generator for a model; `input_dim` is the classifier's
    /// covariate width.
    pub fn default_generator(model: &ObservationModel, input_dim: usize) -> GeneratorSpec {
        match *model {
            ObservationModel::GaussianLinear { p } => GeneratorSpec::regression(p + 1),
            ObservationModel::Categorical { classes } => GeneratorSpec::classifier(input_dim, 0.5, vec![32, 32], classes),
            ObservationModel::PoissonCount { .. } => GeneratorSpec {
                noise_dim: 8,
                cond_dim: 2,
                hidden_sizes: vec![32, 32],
                out_dim: 1,
                activation: Activation::Tanh,
            },
        }
    }

    /// Lists every violation at once.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        match (&self.scenario, &self.data) {
            (Some(_), Some(_)) => v.push("give either scenario or data, not both".into()),
            (None, None) => v.push("one of scenario or data is required".into()),
            _ => {}
        }
        if let Some(s) = &self.scenario {
            v.extend(s.violations());
        }
        if let Some(d) = &self.data {
            if d.path.is_empty() {
                v.push("data.path must not be empty".into());
            }
            if d.limit == Some(0) {
                v.push("data.limit must be positive".into());
            }
            if d.labels_path.is_some() && d.kind != DataKind::Classification {
                v.push("data.labels_path only applies to classification data".into());
            }
        }
        if self.data.is_some() && self.model.is_none() {
            v.push("model is required when data comes from a file".into());
        }
        let model = self.implied_model();
        if let (Some(m), Some(s)) = (model, &self.scenario) {
            let ok = matches!(
                (m, s),
                (ObservationModel::GaussianLinear { .. }, ScenarioConfig::Scissors { .. })
                    | (ObservationModel::GaussianLinear { .. }, ScenarioConfig::OutlierRegression { .. })
                    | (ObservationModel::PoissonCount { .. }, ScenarioConfig::TwoBump { .. })
                    | (ObservationModel::Categorical { .. }, ScenarioConfig::ClassBlobs { .. })
            );
            if !ok {
                v.push(format!("model {} does not fit the scenario", m.name()));
            }
        }
        if let Some(g) = &self.generator {
            if let Err(e) = g.validate() {
                v.push(format!("generator: {e}"));
            }
            if let Some(m) = model {
                if let Err(e) = m.check_output_dim(g.out_dim) {
                    v.push(format!("generator: {e}"));
                }
                if matches!(m, ObservationModel::PoissonCount { .. }) && g.cond_dim != 2 {
                    v.push("generator.cond_dim must be 2 for intensity fits".into());
                }
                if matches!(m, ObservationModel::GaussianLinear { .. }) && g.cond_dim != 0 {
                    v.push("generator.cond_dim must be 0 for linear regression".into());
                }
            }
        }
        v.extend(self.train.violations());
        if self.uq.draws == 0 {
            v.push("uq.draws must be positive".into());
        }
        if !(self.uq.level > 0.0 && self.uq.level < 1.0) {
            v.push("uq.level must lie in (0, 1)".into());
        }
        if let Some(pp) = &self.point_process {
            v.extend(pp.domain.violations());
            if pp.mean_draws == 0 {
                v.push("point_process.mean_draws must be positive".into());
            }
            if !(pp.bound_factor >= 1.0 && pp.bound_factor.is_finite()) {
                v.push("point_process.bound_factor must be at least 1".into());
            }
            if pp.bound_resolution == 0 {
                v.push("point_process.bound_resolution must be positive".into());
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(v))
        }
    }

    /// Copy with every optional section materialized. `input_dim` is the
    /// covariate width of classification data.
    pub fn resolve(&self, input_dim: usize) -> Result<Self> {
        self.validate()?;
        let model = self.implied_model().expect("validated");
        let generator = self
            .generator
            .clone()
            .unwrap_or_else(|| Self::default_generator(&model, input_dim));
        if let ObservationModel::Categorical { .. } = model {
            if generator.cond_dim != input_dim {
                return Err(Error::InvalidConfig(vec![format!(
                    "generator.cond_dim {} does not match the {input_dim} input columns",
                    generator.cond_dim
                )]));
            }
        }
        let point_process = match model {
            ObservationModel::PoissonCount { .. } => Some(self.point_process.clone().unwrap_or_else(|| {
                let mut pp = PointProcessConfig::default();
                if let Some(ScenarioConfig::TwoBump { grid, .. }) = self.scenario {
                    pp.domain = Domain2D::unit_square(grid, grid);
                }
                pp
            })),
            _ => self.point_process.clone(),
        };
        Ok(Self {
            model: Some(model),
            generator: Some(generator),
            point_process,
            ..self.clone()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_scenario_resolves() {
        let c = ExperimentConfig::parse(r#"{"scenario": {"kind": "scissors", "n": 50, "seed": 1}}"#).unwrap();
        let r = c.resolve(0).unwrap();
        assert_eq!(r.model, Some(ObservationModel::GaussianLinear { p: 1 }));
        assert_eq!(r.generator.as_ref().unwrap().out_dim, 2);
        let text = serde_json::to_string(&r).unwrap();
        assert_eq!(ExperimentConfig::parse(&text).unwrap(), r);
    }

    #[test]
    fn unknown_key_rejected() {
        let err = ExperimentConfig::parse(r#"{"scenario": {"kind": "scissors", "n": 5, "seed": 1}, "lr": 3}"#)
            .unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
    }

    #[test]
    fn every_violation_listed() {
        let c = ExperimentConfig::parse(
            r#"{"train": {"epochs": 0, "lr0": -1, "batch_size": 0}, "uq": {"level": 2, "draws": 0}}"#,
        )
        .unwrap();
        let v = c.violations();
        assert!(v.len() >= 6, "{v:?}");
    }

    #[test]
    fn classifier_width_follows_data() {
        let c = ExperimentConfig::parse(
            r#"{"data": {"kind": "classification", "path": "d.csv"}, "model": {"kind": "categorical", "classes": 10}}"#,
        )
        .unwrap();
        let r = c.resolve(784).unwrap();
        let g = r.generator.unwrap();
        assert_eq!((g.cond_dim, g.noise_dim, g.out_dim), (784, 392, 10));
    }
}
