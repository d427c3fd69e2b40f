//! Summaries of sampled parameter draws: intervals, classification
//! uncertainty thresholds and the Uncertain/Certain decision.

use serde::{Deserialize, Serialize};

use crate::diffcore::DenseArray;
use crate::error::{Error, Result};
use crate::obsmodels::{self, ObservationModel};

/// Lower-tail probability used for the per-class threshold.
pub const UQC_LEVEL: f64 = 0.05;
/// An input is Uncertain when no class threshold exceeds this value.
pub const UQC_CUTOFF: f64 = 0.5;
/// Default number of generator draws used for summaries.
pub const DEFAULT_DRAWS: usize = 1000;

/// `N` constrained parameter draws at one conditioning point.
#[derive(Clone, Debug, PartialEq)]
pub struct UQSampleSet {
    samples: DenseArray,
    model: ObservationModel,
    point: Option<Vec<f64>>,
}

impl UQSampleSet {
    pub fn new(samples: DenseArray, model: ObservationModel, point: Option<Vec<f64>>) -> Result<Self> {
        if samples.ndim() != 2 || samples.rows() == 0 || samples.cols() != model.constrained_dim() {
            return Err(Error::Contract(format!(
                "sample set of shape {:?} does not fit a {} model",
                samples.shape(),
                model.name()
            )));
        }
        let valid = match model {
            ObservationModel::GaussianLinear { p } => {
                (0..samples.rows()).all(|r| samples.get(r, p) >= 0.0)
            }
            ObservationModel::Categorical { .. } => samples.data().iter().all(|&v| (0.0..=1.0).contains(&v)),
            ObservationModel::PoissonCount { .. } => samples.data().iter().all(|&v| v >= 0.0),
        };
        if !valid || !samples.all_finite() {
            return Err(Error::Domain {
                op: "sample set",
                detail: "draws outside the constrained parameter domain".into(),
            });
        }
        Ok(Self { samples, model, point })
    }

    pub fn samples(&self) -> &DenseArray {
        &self.samples
    }

    pub fn model(&self) -> &ObservationModel {
        &self.model
    }

    pub fn point(&self) -> Option<&[f64]> {
        self.point.as_deref()
    }

    pub fn len(&self) -> usize {
        self.samples.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn column(&self, coord: usize) -> Result<Vec<f64>> {
        if coord >= self.samples.cols() {
            return Err(Error::Contract(format!(
                "coordinate {coord} out of range for {} columns",
                self.samples.cols()
            )));
        }
        Ok(self.samples.column(coord))
    }

    pub fn column_means(&self) -> Vec<f64> {
        column_means(&self.samples)
    }
}

fn column_means(m: &DenseArray) -> Vec<f64> {
    let n = m.rows() as f64;
    (0..m.cols()).map(|c| m.column(c).iter().sum::<f64>() / n).collect()
}

/// 1-based rank `ceil(q * n)` clamped to `[1, n]`; products within 1e-9 of
/// an integer are treated as that integer.
pub fn order_statistic_rank(q: f64, n: usize) -> usize {
    let x = q * n as f64;
    let r = x.round();
    let k = if (x - r).abs() < 1e-9 { r } else { x.ceil() };
    (k as usize).clamp(1, n.max(1))
}

/// Empirical `q`-quantile as the `ceil(q * n)`-th smallest value.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, q)
}

pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    sorted[order_statistic_rank(q, sorted.len()) - 1]
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::Contract(format!("interval level {level} must lie in (0, 1)")))
    }
}

fn central_interval(values: &[f64], level: f64) -> (f64, f64) {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    (quantile_sorted(&sorted, tail), quantile_sorted(&sorted, 1.0 - tail))
}

/// Central interval for one parameter coordinate.
pub fn marginal_interval(set: &UQSampleSet, coord: usize, level: f64) -> Result<(f64, f64)> {
    check_level(level)?;
    Ok(central_interval(&set.column(coord)?, level))
}

/// Draws one response per parameter draw and returns their central interval.
///
/// `x` is the design row for Gaussian-linear models and ignored otherwise.
pub fn predictive_draws<R: rand::Rng + ?Sized>(
    set: &UQSampleSet,
    x: Option<&[f64]>,
    rng: &mut R,
) -> Result<Vec<f64>> {
    (0..set.len())
        .map(|r| {
            obsmodels::sample_predictive(set.model(), set.samples().row(r), x, rng).map(|s| s.value.as_f64())
        })
        .collect()
}

pub fn predictive_interval<R: rand::Rng + ?Sized>(
    set: &UQSampleSet,
    x: Option<&[f64]>,
    level: f64,
    rng: &mut R,
) -> Result<(f64, f64)> {
    check_level(level)?;
    Ok(central_interval(&predictive_draws(set, x, rng)?, level))
}

/// Per-class thresholds and the Uncertain decision for one input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UQCReport {
    pub thresholds: Vec<f64>,
    pub uncertain: bool,
    pub mean_probs: Vec<f64>,
}

impl UQCReport {
    /// Class with the highest mean probability; ties go to the lowest index.
    pub fn predicted_class(&self) -> usize {
        argmax_first(&self.mean_probs)
    }
}

fn argmax_first(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn check_probability_rows(draws: &DenseArray) -> Result<()> {
    if draws.ndim() != 2 || draws.rows() == 0 || draws.cols() == 0 {
        return Err(Error::Contract(format!(
            "probability draws must be a non-empty matrix, got {:?}",
            draws.shape()
        )));
    }
    for r in 0..draws.rows() {
        let row = draws.row(r);
        let total: f64 = row.iter().sum();
        if (total - 1.0).abs() > 1e-9 || row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::Domain {
                op: "uqc",
                detail: format!("row {r} is not a probability vector (sums to {total})"),
            });
        }
    }
    Ok(())
}

/// Per-column `ceil(0.05 N)`-th smallest value.
pub fn class_thresholds(draws: &DenseArray) -> Vec<f64> {
    (0..draws.cols())
        .map(|c| quantile(&draws.column(c), UQC_LEVEL))
        .collect()
}

/// Thresholds, Uncertain flag and mean probabilities for `[N, H]` draws.
pub fn uqc(draws: &DenseArray) -> Result<UQCReport> {
    check_probability_rows(draws)?;
    let thresholds = class_thresholds(draws);
    let uncertain = thresholds.iter().all(|&t| t <= UQC_CUTOFF);
    Ok(UQCReport {
        thresholds,
        uncertain,
        mean_probs: column_means(draws),
    })
}

/// UQC reports for every row of `points`, each from `draws` generator
/// samples. All points share one noise seed.
pub fn uqc_at_points(
    params: &crate::generator::GeneratorParams,
    spec: &crate::generator::GeneratorSpec,
    model: &ObservationModel,
    points: &DenseArray,
    draws: usize,
    seed: u64,
) -> Result<Vec<UQCReport>> {
    if !matches!(model, ObservationModel::Categorical { .. }) {
        return Err(Error::UnsupportedModel {
            op: "uqc_at_points",
            model: model.name(),
        });
    }
    (0..points.rows())
        .map(|r| {
            let set = crate::generator::sample_theta(params, spec, model, Some(points.row(r)), draws, seed, None)?;
            uqc(set.samples())
        })
        .collect()
}

/// Class with the highest mean probability (lowest index on ties).
pub fn classify(draws: &DenseArray) -> Result<usize> {
    check_probability_rows(draws)?;
    Ok(argmax_first(&column_means(draws)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand_distr::StandardNormal;
    use rand::Rng as _;

    fn set_from_column(values: Vec<f64>) -> UQSampleSet {
        let n = values.len();
        UQSampleSet::new(
            DenseArray::matrix(n, 1, values).unwrap(),
            ObservationModel::PoissonCount { k_max: 64 },
            None,
        )
        .unwrap()
    }

    #[test]
    fn interval_by_order_statistic() {
        let set = set_from_column((1..=100).map(f64::from).collect());
        assert_eq!(marginal_interval(&set, 0, 0.90).unwrap(), (5.0, 95.0));
        assert!(marginal_interval(&set, 1, 0.9).is_err());
        assert!(marginal_interval(&set, 0, 1.0).is_err());
    }

    #[test]
    fn degenerate_interval() {
        let set = set_from_column(vec![3.5; 40]);
        assert_eq!(marginal_interval(&set, 0, 0.95).unwrap(), (3.5, 3.5));
    }

    #[test]
    fn normal_interval() {
        let mut r = rng::rng_for(2, 0, 0);
        let v: Vec<f64> = (0..10_000).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
        let samples = DenseArray::matrix(10_000, 2, v.iter().flat_map(|&b| [b, 1.0]).collect()).unwrap();
        let set = UQSampleSet::new(samples, ObservationModel::GaussianLinear { p: 1 }, None).unwrap();
        let (lo, hi) = marginal_interval(&set, 0, 0.95).unwrap();
        assert!((lo + 1.96).abs() < 0.06 && (hi - 1.96).abs() < 0.06, "({lo}, {hi})");
    }

    #[test]
    fn predictive_interval_cases() {
        let model = ObservationModel::GaussianLinear { p: 1 };
        let point = UQSampleSet::new(DenseArray::matrix(50, 2, [2.0, 0.0].repeat(50)).unwrap(), model.clone(), None).unwrap();
        let mut r = rng::rng_for(1, 0, 0);
        assert_eq!(predictive_interval(&point, Some(&[1.5]), 0.95, &mut r).unwrap(), (3.0, 3.0));

        let unit = UQSampleSet::new(DenseArray::matrix(10_000, 2, [0.0, 1.0].repeat(10_000)).unwrap(), model, None).unwrap();
        let a = predictive_interval(&unit, Some(&[7.0]), 0.95, &mut rng::rng_for(5, 0, 0)).unwrap();
        let b = predictive_interval(&unit, Some(&[7.0]), 0.95, &mut rng::rng_for(5, 0, 0)).unwrap();
        assert_eq!(a, b);
        assert!((a.0 + 1.96).abs() < 0.06 && (a.1 - 1.96).abs() < 0.06, "{a:?}");
    }

    #[test]
    fn uqc_threshold_examples() {
        let col: Vec<f64> = (1..=100).map(|i| 0.01 * i as f64).collect();
        let draws = DenseArray::matrix(100, 2, col.iter().flat_map(|&p| [p, 1.0 - p]).collect()).unwrap();
        let rep = uqc(&draws).unwrap();
        assert!((rep.thresholds[0] - 0.05).abs() < 1e-15);

        let draws = DenseArray::matrix(20, 2, [0.9, 0.1].repeat(20)).unwrap();
        let rep = uqc(&draws).unwrap();
        assert_eq!(rep.thresholds[0], 0.9);
        assert!(!rep.uncertain);

        let alternating: Vec<f64> = (0..100).flat_map(|i| if i % 2 == 0 { [0.99, 0.01] } else { [0.01, 0.99] }).collect();
        let rep = uqc(&DenseArray::matrix(100, 2, alternating).unwrap()).unwrap();
        assert_eq!(rep.thresholds, vec![0.01, 0.01]);
        assert!(rep.uncertain);
    }

    #[test]
    fn uqc_rejects_unnormalized_rows() {
        let draws = DenseArray::matrix(2, 2, vec![0.5, 0.6, 0.5, 0.5]).unwrap();
        assert!(matches!(uqc(&draws), Err(Error::Domain { .. })));
    }

    #[test]
    fn classify_cases() {
        let d = DenseArray::matrix(1, 3, vec![0.2, 0.5, 0.3]).unwrap();
        assert_eq!(classify(&d).unwrap(), 1);
        let tie = DenseArray::matrix(1, 2, vec![0.5, 0.5]).unwrap();
        assert_eq!(classify(&tie).unwrap(), 0);
        let onehot = DenseArray::matrix(4, 3, [0.0, 0.0, 1.0].repeat(4)).unwrap();
        assert_eq!(classify(&onehot).unwrap(), 2);
    }

    #[test]
    fn rank_convention() {
        assert_eq!(order_statistic_rank(0.05, 100), 5);
        assert_eq!(order_statistic_rank(0.95, 100), 95);
        assert_eq!(order_statistic_rank(0.05, 1000), 50);
        assert_eq!(order_statistic_rank(0.05, 10), 1);
        assert_eq!(order_statistic_rank(0.0, 10), 1);
        assert_eq!(order_statistic_rank(0.051, 100), 6);
    }
}
