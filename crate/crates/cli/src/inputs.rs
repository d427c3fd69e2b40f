//! Loading training data and conditioning inputs.

use std::path::Path;

use gps_core::diffcore::DenseArray;
use gps_core::io::{self, DataKind, DataSource, ExperimentConfig};
use gps_core::mmd::Dataset;
use gps_core::obsmodels::ObservationModel;
use gps_core::pointproc::{self, Domain2D};
use gps_core::synthdata::{self, ScenarioConfig};

use crate::{at, CliResult, Failure};

fn read_file(path: &Path) -> gps_core::Result<Vec<u8>> {
    Ok(std::fs::read(path)?)
}

/// Training data in the shape its model expects.
pub enum Loaded {
    Regression { x: DenseArray, y: Vec<f64> },
    Classification { x: DenseArray, labels: Vec<usize> },
    Points(Vec<[f64; 2]>),
}

impl Loaded {
    /// Covariate width seen by a classifier's generator.
    pub fn input_dim(&self) -> usize {
        match self {
            Loaded::Classification { x, .. } => x.cols(),
            _ => 0,
        }
    }

    pub fn from_scenario(s: &ScenarioConfig) -> CliResult<Self> {
        Ok(match s {
            ScenarioConfig::Scissors { .. } => {
                let d = synthdata::scissors_with(s)?.data;
                Loaded::Regression { x: d.x, y: d.y }
            }
            ScenarioConfig::OutlierRegression { .. } => {
                let d = synthdata::outlier_regression(s)?.data;
                Loaded::Regression { x: d.x, y: d.y }
            }
            ScenarioConfig::TwoBump { .. } => Loaded::Points(synthdata::two_bump_points(s)?.points),
            ScenarioConfig::ClassBlobs { .. } => {
                let d = synthdata::class_blobs_with(s)?;
                Loaded::Classification { x: d.x, labels: d.labels }
            }
        })
    }

    /// Reads a data file; relative paths resolve against `base`.
    pub fn from_source(src: &DataSource, base: &Path) -> CliResult<Self> {
        let path = base.join(&src.path);
        let cut = |n: usize| src.limit.map_or(n, |k| k.min(n));
        Ok(match src.kind {
            DataKind::Regression => {
                let (x, y) = read_file(&path).and_then(|b| io::read_regression(&b)).map_err(at(&path))?;
                let n = cut(y.len());
                Loaded::Regression {
                    x: x.select_rows(&(0..n).collect::<Vec<_>>()),
                    y: y[..n].to_vec(),
                }
            }
            DataKind::Classification => match &src.labels_path {
                Some(labels) => {
                    let x = io::read_idx(&path).and_then(|d| d.images(src.limit)).map_err(at(&path))?;
                    let lpath = base.join(labels);
                    let labels = io::read_idx(&lpath).and_then(|d| d.labels(src.limit)).map_err(at(&lpath))?;
                    if labels.len() != x.rows() {
                        return Err(gps_core::Error::Idx(format!(
                            "{} images but {} labels",
                            x.rows(),
                            labels.len()
                        ))
                        .into());
                    }
                    Loaded::Classification { x, labels }
                }
                None => {
                    let (x, labels) = read_file(&path).and_then(|b| io::read_classification(&b)).map_err(at(&path))?;
                    let n = cut(labels.len());
                    Loaded::Classification {
                        x: x.select_rows(&(0..n).collect::<Vec<_>>()),
                        labels: labels[..n].to_vec(),
                    }
                }
            },
            DataKind::Points => {
                let mut pts = read_file(&path).and_then(|b| io::read_points(&b)).map_err(at(&path))?;
                pts.truncate(cut(pts.len()));
                Loaded::Points(pts)
            }
        })
    }

    pub fn load(cfg: &ExperimentConfig, base: &Path) -> CliResult<Self> {
        match (&cfg.scenario, &cfg.data) {
            (Some(s), None) => Self::from_scenario(s),
            (None, Some(d)) => Self::from_source(d, base),
            _ => Err(gps_core::Error::InvalidConfig(cfg.violations()).into()),
        }
    }

    /// Training set for `model`; point patterns are binned on `domain`.
    pub fn dataset(&self, model: &ObservationModel, domain: Option<&Domain2D>) -> CliResult<Dataset> {
        let ds = match (self, model) {
            (Loaded::Regression { x, y }, ObservationModel::GaussianLinear { p }) => {
                if x.cols() != *p {
                    return Err(gps_core::Error::InvalidConfig(vec![format!(
                        "model expects {p} regressors, data has {}",
                        x.cols()
                    )])
                    .into());
                }
                Dataset::new(y.clone(), Some(x.clone()), None)?
            }
            (Loaded::Classification { x, labels }, ObservationModel::Categorical { .. }) => {
                Dataset::new(labels.iter().map(|&l| l as f64).collect(), None, Some(x.clone()))?
            }
            (Loaded::Points(pts), ObservationModel::PoissonCount { .. }) => {
                let domain = domain.ok_or_else(|| Failure::usage("point data needs a point_process domain"))?;
                pointproc::discretize(pts, domain)?.to_dataset()
            }
            _ => {
                return Err(gps_core::Error::InvalidConfig(vec![format!(
                    "model {} does not match the data kind",
                    model.name()
                )])
                .into())
            }
        };
        model.validate_responses(&ds.y)?;
        Ok(ds)
    }
}

/// Reads conditioning rows. Classifier inputs use `x_1..x_d` columns, with an
/// optional leading `label` column that is ignored; intensity inputs use
/// `x,y` coordinates, which are mapped to the generator's normalized frame.
pub fn read_conditioning(
    path: &Path,
    model: &ObservationModel,
    cond_dim: usize,
    domain: Option<&Domain2D>,
    limit: Option<usize>,
) -> CliResult<DenseArray> {
    let table = io::read_table(path).map_err(at(path))?;
    let n = limit.map_or(table.rows(), |k| k.min(table.rows()));
    let rows: Vec<usize> = (0..n).collect();
    match model {
        ObservationModel::PoissonCount { .. } => {
            let domain = domain.ok_or_else(|| Failure::usage("checkpoint has no spatial domain"))?;
            let (xs, ys) = (table.column("x").map_err(at(path))?, table.column("y").map_err(at(path))?);
            let data = rows
                .iter()
                .flat_map(|&r| {
                    let s = [xs[r], ys[r]];
                    domain.normalize(s)
                })
                .collect();
            Ok(DenseArray::matrix(n, 2, data)?)
        }
        _ => {
            let skip = usize::from(table.header.first().is_some_and(|h| h == "label"));
            let expected: Vec<String> = (1..=cond_dim).map(|j| format!("x_{j}")).collect();
            if table.header[skip..] != expected[..] {
                return Err(at(path)(gps_core::Error::Csv(format!(
                    "header mismatch: expected {}, found {}",
                    expected.join(","),
                    table.header.join(",")
                ))));
            }
            let data = rows
                .iter()
                .flat_map(|&r| table.values.row(r)[skip..].to_vec())
                .collect();
            Ok(DenseArray::matrix(n, cond_dim, data)?)
        }
    }
}
