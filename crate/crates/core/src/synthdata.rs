//! Reproducible synthetic datasets.
//!
//! Every generator is a pure function of its [`ScenarioConfig`], which is
//! returned alongside the data so it can be written next to it.

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::Rng as _;
use rand_distr::{Bernoulli, Cauchy, Distribution, Normal, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::diffcore::DenseArray;
use crate::error::{Error, Result};
use crate::pointproc::{Domain2D, IntensityField};
use crate::rng::{self, streams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScenarioConfig {
    Scissors {
        n: usize,
        seed: u64,
        #[serde(default = "scissors_noise")]
        noise_sd: f64,
        /// Forces every mixture indicator (test hook).
        #[serde(default)]
        force_gamma: Option<bool>,
    },
    OutlierRegression {
        n: usize,
        p: usize,
        contamination: f64,
        cauchy_scale: f64,
        #[serde(default = "unit")]
        noise_sd: f64,
        #[serde(default = "half")]
        correlation: f64,
        #[serde(default)]
        beta_true: Option<Vec<f64>>,
        seed: u64,
    },
    TwoBump {
        /// Multiplies the reference intensity.
        #[serde(default = "unit")]
        scale: f64,
        /// Rescales the reference intensity to this expected total count;
        /// replaces `scale`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expected_count: Option<f64>,
        seed: u64,
        #[serde(default = "default_grid")]
        grid: usize,
    },
    ClassBlobs {
        n_per_class: usize,
        classes: usize,
        sep: f64,
        seed: u64,
        /// Class left out of the generated data.
        #[serde(default)]
        withheld: Option<usize>,
    },
}

fn scissors_noise() -> f64 {
    0.2
}
fn unit() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn default_grid() -> usize {
    20
}

impl ScenarioConfig {
    pub fn scissors(n: usize, seed: u64) -> Self {
        ScenarioConfig::Scissors {
            n,
            seed,
            noise_sd: scissors_noise(),
            force_gamma: None,
        }
    }

    pub fn outliers(n: usize, p: usize, contamination: f64, seed: u64) -> Self {
        ScenarioConfig::OutlierRegression {
            n,
            p,
            contamination,
            cauchy_scale: 3.0,
            noise_sd: 1.0,
            correlation: 0.5,
            beta_true: None,
            seed,
        }
    }

    /// Lists every out-of-range field.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        match self {
            ScenarioConfig::Scissors { n, noise_sd, .. } => {
                if *n == 0 {
                    v.push("scenario.n must be positive".into());
                }
                if !(*noise_sd > 0.0) {
                    v.push("scenario.noise_sd must be positive".into());
                }
            }
            ScenarioConfig::OutlierRegression {
                n,
                p,
                contamination,
                cauchy_scale,
                noise_sd,
                correlation,
                beta_true,
                ..
            } => {
                if *n == 0 {
                    v.push("scenario.n must be positive".into());
                }
                if *p == 0 {
                    v.push("scenario.p must be positive".into());
                }
                if !(0.0..=1.0).contains(contamination) {
                    v.push("scenario.contamination must lie in [0, 1]".into());
                }
                if !(*cauchy_scale > 0.0) {
                    v.push("scenario.cauchy_scale must be positive".into());
                }
                if !(*noise_sd > 0.0) {
                    v.push("scenario.noise_sd must be positive".into());
                }
                if !(0.0..1.0).contains(correlation) {
                    v.push("scenario.correlation must lie in [0, 1)".into());
                }
                if beta_true.as_ref().is_some_and(|b| b.len() != *p) {
                    v.push("scenario.beta_true must have p entries".into());
                }
            }
            ScenarioConfig::TwoBump {
                scale,
                expected_count,
                grid,
                ..
            } => {
                if !(*scale > 0.0) {
                    v.push("scenario.scale must be positive".into());
                }
                if let Some(c) = expected_count {
                    if !(*c > 0.0 && c.is_finite()) {
                        v.push("scenario.expected_count must be positive".into());
                    }
                    if *scale != 1.0 {
                        v.push("give scenario.scale or scenario.expected_count, not both".into());
                    }
                }
                if *grid == 0 {
                    v.push("scenario.grid must be positive".into());
                }
            }
            ScenarioConfig::ClassBlobs {
                n_per_class,
                classes,
                sep,
                withheld,
                ..
            } => {
                if *n_per_class == 0 {
                    v.push("scenario.n_per_class must be positive".into());
                }
                if *classes < 2 {
                    v.push("scenario.classes must be at least 2".into());
                }
                if !(*sep >= 0.0) {
                    v.push("scenario.sep must be nonnegative".into());
                }
                if withheld.is_some_and(|w| w >= *classes) {
                    v.push("scenario.withheld must name an existing class".into());
                }
            }
        }
        v
    }
}

/// Regression data `y = X beta + noise`.
#[derive(Clone, Debug)]
pub struct RegressionData {
    pub x: DenseArray,
    pub y: Vec<f64>,
    pub config: ScenarioConfig,
}

/// Scissors data: `y = +x + e` or `y = -x + e` with equal probability.
#[derive(Clone, Debug)]
pub struct ScissorsData {
    pub data: RegressionData,
    /// True where the slope is +1.
    pub gamma: Vec<bool>,
}

pub fn scissors(n: usize, seed: u64) -> Result<ScissorsData> {
    scissors_with(&ScenarioConfig::scissors(n, seed))
}

pub fn scissors_with(cfg: &ScenarioConfig) -> Result<ScissorsData> {
    let ScenarioConfig::Scissors {
        n,
        seed,
        noise_sd,
        force_gamma,
    } = *cfg
    else {
        return Err(Error::Contract("not a scissors scenario".into()));
    };
    reject(cfg.violations())?;
    let mut r = rng::rng_for(seed, streams::DATA, 0);
    let coin = Bernoulli::new(0.5).expect("valid probability");
    let noise = Normal::new(0.0, noise_sd).map_err(|e| Error::Contract(e.to_string()))?;
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut gamma = Vec::with_capacity(n);
    for _ in 0..n {
        let xi: f64 = r.sample(StandardNormal);
        let g = coin.sample(&mut r);
        let g = force_gamma.unwrap_or(g);
        let eps = noise.sample(&mut r);
        let slope = if g { 1.0 } else { -1.0 };
        x.push(xi);
        y.push(slope * xi + eps);
        gamma.push(g);
    }
    Ok(ScissorsData {
        data: RegressionData {
            x: DenseArray::matrix(n, 1, x)?,
            y,
            config: cfg.clone(),
        },
        gamma,
    })
}

/// `p` evenly spaced coefficients on `[-2, 2]`.
pub fn default_beta(p: usize) -> Vec<f64> {
    if p == 1 {
        return vec![0.0];
    }
    (0..p).map(|j| -2.0 + 4.0 * j as f64 / (p - 1) as f64).collect()
}

#[derive(Clone, Debug)]
pub struct OutlierData {
    pub data: RegressionData,
    pub outlier_mask: Vec<bool>,
    pub beta_true: Vec<f64>,
}

/// Equicorrelated Gaussian rows with `floor(contamination * n)` responses
/// hit by additive Cauchy noise.
pub fn outlier_regression(cfg: &ScenarioConfig) -> Result<OutlierData> {
    let ScenarioConfig::OutlierRegression {
        n,
        p,
        contamination,
        cauchy_scale,
        noise_sd,
        correlation,
        ref beta_true,
        seed,
    } = *cfg
    else {
        return Err(Error::Contract("not an outlier-regression scenario".into()));
    };
    reject(cfg.violations())?;
    let beta = beta_true.clone().unwrap_or_else(|| default_beta(p));
    let mut r = rng::rng_for(seed, streams::DATA, 0);
    let x = equicorrelated(n, p, correlation, &mut r)?;
    let noise = Normal::new(0.0, noise_sd).map_err(|e| Error::Contract(e.to_string()))?;
    let mut y: Vec<f64> = (0..n)
        .map(|i| {
            let mean: f64 = x.row(i).iter().zip(&beta).map(|(a, b)| a * b).sum();
            mean + noise.sample(&mut r)
        })
        .collect();
    let count = (contamination * n as f64 + 1e-9).floor() as usize;
    let mut mask = vec![false; n];
    let cauchy = Cauchy::new(0.0, cauchy_scale).map_err(|e| Error::Contract(e.to_string()))?;
    let mut chosen = index::sample(&mut r, n, count).into_vec();
    chosen.sort_unstable();
    for i in chosen {
        mask[i] = true;
        y[i] += cauchy.sample(&mut r);
    }
    Ok(OutlierData {
        data: RegressionData {
            x,
            y,
            config: cfg.clone(),
        },
        outlier_mask: mask,
        beta_true: beta,
    })
}

/// Rows from `N(0, S)` with unit variances and constant off-diagonal
/// correlation, via the Cholesky factor of `S`.
pub fn equicorrelated(n: usize, p: usize, correlation: f64, r: &mut rng::Rng) -> Result<DenseArray> {
    let sigma = DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { correlation });
    let chol = sigma
        .cholesky()
        .ok_or_else(|| Error::Contract(format!("correlation {correlation} is not positive definite")))?;
    let l = chol.l();
    let mut data = Vec::with_capacity(n * p);
    for _ in 0..n {
        let z = DVector::from_iterator(p, (0..p).map(|_| r.sample::<f64, _>(StandardNormal)));
        data.extend((&l * z).iter());
    }
    DenseArray::matrix(n, p, data)
}

/// Two Gaussian bumps on a constant floor over the unit square:
///
/// `60 exp(-|s - (0.3, 0.3)|^2 / 0.02) + 100 exp(-|s - (0.7, 0.7)|^2 / 0.01) + 5`,
/// multiplied by `scale`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoBump {
    pub scale: f64,
}

pub fn two_bump_intensity() -> TwoBump {
    TwoBump { scale: 1.0 }
}

impl TwoBump {
    pub fn scaled(self, factor: f64) -> Self {
        Self {
            scale: self.scale * factor,
        }
    }

    pub fn domain(grid: usize) -> Domain2D {
        Domain2D::unit_square(grid, grid)
    }

    /// Expected number of points on the unit square (midpoint rule on a
    /// 1000 x 1000 grid).
    pub fn expected_count(&self) -> f64 {
        crate::pointproc::IntensityMap::from_field(self, &Domain2D::unit_square(1000, 1000)).integral()
    }

    /// Upper bound of the intensity over the plane.
    pub fn sup(&self) -> f64 {
        self.scale * (60.0 + 100.0 + 5.0)
    }
}

impl IntensityField for TwoBump {
    fn intensity(&self, s: [f64; 2]) -> f64 {
        let d1 = (s[0] - 0.3).powi(2) + (s[1] - 0.3).powi(2);
        let d2 = (s[0] - 0.7).powi(2) + (s[1] - 0.7).powi(2);
        self.scale * (60.0 * (-d1 / 0.02).exp() + 100.0 * (-d2 / 0.01).exp() + 5.0)
    }
}

/// One realization of the two-bump process on the unit square.
#[derive(Clone, Debug)]
pub struct PointPattern {
    pub points: Vec<[f64; 2]>,
    pub truth: TwoBump,
    pub config: ScenarioConfig,
}

pub fn two_bump_points(cfg: &ScenarioConfig) -> Result<PointPattern> {
    let ScenarioConfig::TwoBump {
        scale,
        expected_count,
        seed,
        ..
    } = *cfg
    else {
        return Err(Error::Contract("not a two-bump scenario".into()));
    };
    reject(cfg.violations())?;
    let base = two_bump_intensity();
    let truth = match expected_count {
        Some(c) => base.scaled(c / base.expected_count()),
        None => base.scaled(scale),
    };
    let mut r = rng::rng_for(seed, streams::DATA, 2);
    let points = crate::pointproc::thin_sample(&truth, &Domain2D::unit_square(1, 1), truth.sup(), &mut r)?;
    Ok(PointPattern {
        points,
        truth,
        config: cfg.clone(),
    })
}

/// Labelled 2-D Gaussian blobs; class `h` is centred at angle `2 pi h / H`
/// on a circle of radius `sep`, with unit isotropic spread.
#[derive(Clone, Debug)]
pub struct ClassData {
    pub x: DenseArray,
    pub labels: Vec<usize>,
    pub config: ScenarioConfig,
}

pub fn class_blobs(n_per_class: usize, classes: usize, sep: f64, seed: u64) -> Result<ClassData> {
    class_blobs_with(&ScenarioConfig::ClassBlobs {
        n_per_class,
        classes,
        sep,
        seed,
        withheld: None,
    })
}

pub fn class_blobs_with(cfg: &ScenarioConfig) -> Result<ClassData> {
    let ScenarioConfig::ClassBlobs {
        n_per_class,
        classes,
        sep,
        seed,
        withheld,
    } = *cfg
    else {
        return Err(Error::Contract("not a class-blob scenario".into()));
    };
    reject(cfg.violations())?;
    let mut r = rng::rng_for(seed, streams::DATA, 0);
    let mut x = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n_per_class * classes {
        let h = i % classes;
        let angle = std::f64::consts::TAU * h as f64 / classes as f64;
        let (cx, cy) = (sep * angle.cos(), sep * angle.sin());
        let px = cx + r.sample::<f64, _>(StandardNormal);
        let py = cy + r.sample::<f64, _>(StandardNormal);
        if Some(h) == withheld {
            continue;
        }
        x.extend([px, py]);
        labels.push(h);
    }
    let n = labels.len();
    Ok(ClassData {
        x: DenseArray::matrix(n, 2, x)?,
        labels,
        config: cfg.clone(),
    })
}

/// Axis-aligned bounding box `(x_lo, x_hi, y_lo, y_hi)` of 2-D points.
pub fn bounding_box(x: &DenseArray) -> (f64, f64, f64, f64) {
    let mut b = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for r in 0..x.rows() {
        b.0 = b.0.min(x.get(r, 0));
        b.1 = b.1.max(x.get(r, 0));
        b.2 = b.2.min(x.get(r, 1));
        b.3 = b.3.max(x.get(r, 1));
    }
    b
}

/// Points uniform on a box, the off-manifold analogue of random-noise inputs.
pub fn noise_inputs(n: usize, bbox: (f64, f64, f64, f64), seed: u64) -> Result<DenseArray> {
    let (x_lo, x_hi, y_lo, y_hi) = bbox;
    if !(x_hi > x_lo && y_hi > y_lo) {
        return Err(Error::Contract("noise box must have positive extent".into()));
    }
    let mut r = rng::rng_for(seed, streams::DATA, 1);
    let ux = Uniform::new(x_lo, x_hi);
    let uy = Uniform::new(y_lo, y_hi);
    let data = (0..n).flat_map(|_| [r.sample(ux), r.sample(uy)]).collect::<Vec<_>>();
    DenseArray::matrix(n, 2, data)
}

fn reject(violations: Vec<String>) -> Result<()> {
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(violations))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scissors_slopes_split_by_sign() {
        let d = scissors(2000, 1).unwrap();
        let (mut pos, mut neg, mut total) = (0, 0, 0);
        for i in 0..2000 {
            let x = d.data.x.get(i, 0);
            if x.abs() > 1.0 {
                total += 1;
                let ratio = d.data.y[i] / x;
                if (ratio - 1.0).abs() < 0.5 {
                    pos += 1;
                } else if (ratio + 1.0).abs() < 0.5 {
                    neg += 1;
                }
            }
        }
        assert!(pos as f64 >= 0.3 * total as f64 && neg as f64 >= 0.3 * total as f64);
        assert!((pos + neg) as f64 >= 0.99 * total as f64);
    }

    #[test]
    fn scissors_forced_gamma_is_ordinary_regression() {
        let cfg = ScenarioConfig::Scissors {
            n: 500,
            seed: 3,
            noise_sd: 0.2,
            force_gamma: Some(true),
        };
        let d = scissors_with(&cfg).unwrap();
        assert!(d.gamma.iter().all(|&g| g));
        let resid: Vec<f64> = (0..500).map(|i| d.data.y[i] - d.data.x.get(i, 0)).collect();
        let sd = (resid.iter().map(|r| r * r).sum::<f64>() / 500.0).sqrt();
        assert!((sd - 0.2).abs() < 0.03, "{sd}");
    }

    #[test]
    fn scissors_deterministic() {
        let a = scissors(100, 5).unwrap();
        let b = scissors(100, 5).unwrap();
        assert_eq!(a.data.y, b.data.y);
        assert_eq!(a.data.x, b.data.x);
    }

    #[test]
    fn outlier_counts() {
        let d = outlier_regression(&ScenarioConfig::outliers(200, 20, 0.05, 1)).unwrap();
        assert_eq!(d.outlier_mask.iter().filter(|&&m| m).count(), 10);
        let clean = outlier_regression(&ScenarioConfig::outliers(200, 20, 0.0, 1)).unwrap();
        assert!(clean.outlier_mask.iter().all(|&m| !m));
        assert_eq!(clean.beta_true.len(), 20);
        assert_eq!(clean.beta_true[0], -2.0);
        assert_eq!(clean.beta_true[19], 2.0);
    }

    #[test]
    fn equicorrelation_close_to_half() {
        let mut r = rng::rng_for(1, 0, 0);
        let x = equicorrelated(10_000, 4, 0.5, &mut r).unwrap();
        for a in 0..4 {
            for b in (a + 1)..4 {
                let (ca, cb) = (x.column(a), x.column(b));
                let n = ca.len() as f64;
                let (ma, mb) = (ca.iter().sum::<f64>() / n, cb.iter().sum::<f64>() / n);
                let cov = ca.iter().zip(&cb).map(|(u, v)| (u - ma) * (v - mb)).sum::<f64>() / n;
                let va = ca.iter().map(|u| (u - ma).powi(2)).sum::<f64>() / n;
                let vb = cb.iter().map(|v| (v - mb).powi(2)).sum::<f64>() / n;
                let corr = cov / (va * vb).sqrt();
                assert!((corr - 0.5).abs() < 0.05, "{corr}");
            }
        }
    }

    #[test]
    fn two_bump_values() {
        let f = two_bump_intensity();
        let at = f.intensity([0.3, 0.3]);
        assert!((at - (65.0 + 100.0 * (-0.32f64 / 0.01).exp())).abs() < 1e-12);
        assert!((at - 65.0).abs() < 1e-6);
        for i in 0..=50 {
            for j in 0..=50 {
                assert!(f.intensity([i as f64 / 50.0, j as f64 / 50.0]) >= 5.0);
            }
        }
    }

    #[test]
    fn two_bump_pattern_matches_requested_count() {
        let cfg = ScenarioConfig::TwoBump {
            scale: 1.0,
            expected_count: Some(700.0),
            seed: 4,
            grid: 20,
        };
        let p = two_bump_points(&cfg).unwrap();
        assert!((p.truth.expected_count() - 700.0).abs() < 1e-6);
        // Poisson(700): sd about 26.5
        assert!((p.points.len() as f64 - 700.0).abs() < 4.0 * 700f64.sqrt());
        assert_eq!(two_bump_points(&cfg).unwrap().points, p.points);
        let both = ScenarioConfig::TwoBump {
            scale: 2.0,
            expected_count: Some(700.0),
            seed: 4,
            grid: 20,
        };
        assert!(two_bump_points(&both).is_err());
    }

    #[test]
    fn blobs_layout_and_withholding() {
        let d = class_blobs(10, 3, 6.0, 2).unwrap();
        assert_eq!(d.labels.len(), 30);
        assert_eq!(d.x.shape(), &[30, 2]);
        let w = class_blobs_with(&ScenarioConfig::ClassBlobs {
            n_per_class: 10,
            classes: 3,
            sep: 6.0,
            seed: 2,
            withheld: Some(1),
        })
        .unwrap();
        assert_eq!(w.labels.len(), 20);
        assert!(w.labels.iter().all(|&l| l != 1));
        assert_eq!(class_blobs(10, 3, 6.0, 2).unwrap().x, d.x);
    }

    #[test]
    fn invalid_configs_list_all_problems() {
        let cfg = ScenarioConfig::OutlierRegression {
            n: 0,
            p: 0,
            contamination: 1.5,
            cauchy_scale: -1.0,
            noise_sd: 1.0,
            correlation: 0.5,
            beta_true: None,
            seed: 0,
        };
        assert_eq!(cfg.violations().len(), 4);
    }
}
