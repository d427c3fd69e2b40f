//! Inhomogeneous Poisson processes on a rectangle: binning into cell counts,
//! fitting a generator-modulated intensity, intensity maps and simulation by
//! thinning.
//!
//! The generator's exponentiated output is the expected count of a cell, so
//! the intensity of cell `i` is `exp(G(s_i, z)) / cell_area`. Cell centres
//! are mapped to `[-1, 1]^2` before entering the generator.

use rand_distr::{Distribution, Poisson, Uniform};
use serde::{Deserialize, Serialize};

use crate::diffcore::DenseArray;
use crate::error::{Error, Result};
use crate::generator::{self, GeneratorParams, GeneratorSpec, NoiseBatch};
use crate::mmd::Dataset;
use crate::obsmodels::ObservationModel;
use crate::rng::{self, streams};
use crate::trainer::{self, FitResult, TrainConfig};

/// A spatial intensity `s -> lambda(s) >= 0`.
pub trait IntensityField {
    fn intensity(&self, s: [f64; 2]) -> f64;
}

impl<F: Fn([f64; 2]) -> f64> IntensityField for F {
    fn intensity(&self, s: [f64; 2]) -> f64 {
        self(s)
    }
}

/// Rectangle with a regular grid of `grid_x * grid_y` cells.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Domain2D {
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
    pub grid_x: usize,
    pub grid_y: usize,
}

impl Domain2D {
    pub fn new(x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64, grid_x: usize, grid_y: usize) -> Result<Self> {
        let d = Self {
            x_lo,
            x_hi,
            y_lo,
            y_hi,
            grid_x,
            grid_y,
        };
        let v = d.violations();
        if v.is_empty() {
            Ok(d)
        } else {
            Err(Error::InvalidConfig(v))
        }
    }

    pub fn unit_square(grid_x: usize, grid_y: usize) -> Self {
        Self {
            x_lo: 0.0,
            x_hi: 1.0,
            y_lo: 0.0,
            y_hi: 1.0,
            grid_x,
            grid_y,
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.x_hi > self.x_lo) || !(self.y_hi > self.y_lo) {
            v.push("domain extents must be positive".into());
        }
        if self.grid_x == 0 || self.grid_y == 0 {
            v.push("domain grid sizes must be at least 1".into());
        }
        v
    }

    pub fn area(&self) -> f64 {
        (self.x_hi - self.x_lo) * (self.y_hi - self.y_lo)
    }

    pub fn cells(&self) -> usize {
        self.grid_x * self.grid_y
    }

    pub fn cell_area(&self) -> f64 {
        self.area() / self.cells() as f64
    }

    pub fn cell_width(&self) -> f64 {
        (self.x_hi - self.x_lo) / self.grid_x as f64
    }

    pub fn cell_height(&self) -> f64 {
        (self.y_hi - self.y_lo) / self.grid_y as f64
    }

    pub fn contains(&self, s: [f64; 2]) -> bool {
        (self.x_lo..=self.x_hi).contains(&s[0]) && (self.y_lo..=self.y_hi).contains(&s[1])
    }

    /// Cell index (row-major over `y`, then `x`); points on a shared edge
    /// go to the lower-index cell.
    pub fn cell_of(&self, s: [f64; 2]) -> Result<usize> {
        if !self.contains(s) {
            return Err(Error::OutOfBounds { x: s[0], y: s[1] });
        }
        let axis = |v: f64, lo: f64, width: f64, cells: usize| -> usize {
            let t = ((v - lo) / width).ceil() as isize - 1;
            t.clamp(0, cells as isize - 1) as usize
        };
        let ix = axis(s[0], self.x_lo, self.cell_width(), self.grid_x);
        let iy = axis(s[1], self.y_lo, self.cell_height(), self.grid_y);
        Ok(iy * self.grid_x + ix)
    }

    pub fn x_centers(&self) -> Vec<f64> {
        (0..self.grid_x)
            .map(|i| self.x_lo + (i as f64 + 0.5) * self.cell_width())
            .collect()
    }

    pub fn y_centers(&self) -> Vec<f64> {
        (0..self.grid_y)
            .map(|j| self.y_lo + (j as f64 + 0.5) * self.cell_height())
            .collect()
    }

    pub fn centers(&self) -> Vec<[f64; 2]> {
        let xs = self.x_centers();
        self.y_centers()
            .into_iter()
            .flat_map(|y| xs.iter().map(move |&x| [x, y]))
            .collect()
    }

    /// Affine map of the rectangle onto `[-1, 1]^2`.
    pub fn normalize(&self, s: [f64; 2]) -> [f64; 2] {
        [
            2.0 * (s[0] - self.x_lo) / (self.x_hi - self.x_lo) - 1.0,
            2.0 * (s[1] - self.y_lo) / (self.y_hi - self.y_lo) - 1.0,
        ]
    }

    /// Normalized cell centres as a `[cells, 2]` generator covariate block.
    pub fn center_covariates(&self) -> DenseArray {
        let data = self.centers().into_iter().flat_map(|c| self.normalize(c)).collect();
        DenseArray::matrix(self.cells(), 2, data).expect("centre block")
    }
}

/// Per-cell event counts on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct CellCounts {
    pub domain: Domain2D,
    pub centers: Vec<[f64; 2]>,
    pub counts: Vec<u64>,
}

impl CellCounts {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Counts as responses with normalized centres as generator covariates.
    pub fn to_dataset(&self) -> Dataset {
        Dataset {
            y: self.counts.iter().map(|&c| c as f64).collect(),
            design: None,
            cond: Some(self.domain.center_covariates()),
        }
    }
}

/// Histograms points over the domain's grid.
pub fn discretize(points: &[[f64; 2]], domain: &Domain2D) -> Result<CellCounts> {
    let v = domain.violations();
    if !v.is_empty() {
        return Err(Error::InvalidConfig(v));
    }
    let mut counts = vec![0u64; domain.cells()];
    for &p in points {
        counts[domain.cell_of(p)?] += 1;
    }
    Ok(CellCounts {
        domain: *domain,
        centers: domain.centers(),
        counts,
    })
}

/// Trains a conditional Poisson-count generator on cell counts with the
/// closed-form objective.
pub fn fit_intensity(counts: &CellCounts, spec: &GeneratorSpec, cfg: &TrainConfig) -> Result<FitResult> {
    if spec.cond_dim != 2 {
        return Err(Error::Contract(format!(
            "intensity generator needs cond_dim 2 (cell centre), spec has {}",
            spec.cond_dim
        )));
    }
    let model = ObservationModel::PoissonCount {
        k_max: crate::obsmodels::DEFAULT_K_MAX,
    };
    trainer::fit(&counts.to_dataset(), spec, &model, cfg)
}

/// Piecewise-constant intensity over a domain's cells.
#[derive(Clone, Debug, PartialEq)]
pub struct IntensityMap {
    pub domain: Domain2D,
    /// Row-major over `y`, then `x`.
    pub values: Vec<f64>,
}

impl IntensityMap {
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Expected number of points over the whole domain.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.domain.cell_area()
    }

    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.domain.grid_x + ix]
    }

    /// Samples an analytic field at the cell centres.
    pub fn from_field<F: IntensityField + ?Sized>(field: &F, domain: &Domain2D) -> Self {
        Self {
            domain: *domain,
            values: domain.centers().into_iter().map(|c| field.intensity(c)).collect(),
        }
    }
}

impl IntensityField for IntensityMap {
    fn intensity(&self, s: [f64; 2]) -> f64 {
        match self.domain.cell_of(s) {
            Ok(i) => self.values[i],
            Err(_) => 0.0,
        }
    }
}

fn cell_rates(
    params: &GeneratorParams,
    spec: &GeneratorSpec,
    domain: &Domain2D,
    noise: &DenseArray,
    cell: usize,
    rows: usize,
) -> Result<Vec<f64>> {
    let c = domain.normalize(domain.centers()[cell]);
    let cond = DenseArray::matrix(rows, 2, c.repeat(rows))?;
    let raw = generator::evaluate(params, spec, noise, Some(&cond))?;
    let area = domain.cell_area();
    Ok(raw.data().iter().map(|g| g.exp() / area).collect())
}

/// Per cell, the average over `n` noise draws of `exp(G(s_i, z)) / cell_area`.
///
/// The same `n` noise draws are used for every cell.
pub fn mean_intensity_map(
    params: &GeneratorParams,
    spec: &GeneratorSpec,
    domain: &Domain2D,
    n: usize,
    seed: u64,
) -> Result<IntensityMap> {
    if n == 0 {
        return Err(Error::Contract("mean intensity needs at least one draw".into()));
    }
    let z = NoiseBatch::draw(rng::derive_seed(seed, streams::SAMPLE_THETA, 0), 0, n, spec.noise_dim);
    let values = (0..domain.cells())
        .map(|cell| {
            cell_rates(params, spec, domain, &z.values, cell, n).map(|r| r.iter().sum::<f64>() / n as f64)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(IntensityMap {
        domain: *domain,
        values,
    })
}

/// One draw from the fitted model: each cell gets its own noise vector.
pub fn sample_intensity_path(
    params: &GeneratorParams,
    spec: &GeneratorSpec,
    domain: &Domain2D,
    seed: u64,
) -> Result<IntensityMap> {
    let z = NoiseBatch::draw(rng::derive_seed(seed, streams::SAMPLE_THETA, 1), 0, domain.cells(), spec.noise_dim);
    let raw = generator::evaluate(params, spec, &z.values, Some(&domain.center_covariates()))?;
    let area = domain.cell_area();
    Ok(IntensityMap {
        domain: *domain,
        values: raw.data().iter().map(|g| g.exp() / area).collect(),
    })
}

/// Dominating rate for thinning: `factor` times the maximum over an
/// `resolution x resolution` evaluation grid.
pub fn dominating_rate<F: IntensityField + ?Sized>(field: &F, domain: &Domain2D, resolution: usize, factor: f64) -> f64 {
    let fine = Domain2D {
        grid_x: resolution,
        grid_y: resolution,
        ..*domain
    };
    let max = fine
        .centers()
        .into_iter()
        .map(|c| field.intensity(c))
        .fold(0.0, f64::max);
    factor * max
}

/// Simulates the process by thinning a homogeneous process of rate `bound`.
///
/// Any evaluated intensity above `bound` is an error.
pub fn thin_sample<F, R>(field: &F, domain: &Domain2D, bound: f64, rng: &mut R) -> Result<Vec<[f64; 2]>>
where
    F: IntensityField + ?Sized,
    R: rand::Rng + ?Sized,
{
    if !(bound >= 0.0) || !bound.is_finite() {
        return Err(Error::Contract(format!("dominating rate {bound} must be finite and nonnegative")));
    }
    let mean = bound * domain.area();
    let proposals = if mean > 0.0 {
        Poisson::new(mean)
            .map_err(|e| Error::Contract(e.to_string()))?
            .sample(rng) as usize
    } else {
        0
    };
    let ux = Uniform::new(domain.x_lo, domain.x_hi);
    let uy = Uniform::new(domain.y_lo, domain.y_hi);
    let mut points = Vec::new();
    for _ in 0..proposals {
        let s = [rng.sample(ux), rng.sample(uy)];
        let lambda = field.intensity(s);
        if lambda > bound || lambda < 0.0 || !lambda.is_finite() {
            return Err(Error::IntensityExceedsBound {
                value: lambda,
                bound,
                x: s[0],
                y: s[1],
            });
        }
        let u: f64 = rng.gen();
        if u * bound < lambda {
            points.push(s);
        }
    }
    Ok(points)
}

/// Simulates `paths` independent patterns with per-path derived seeds.
pub fn thin_replicates<F: IntensityField + ?Sized>(
    field: &F,
    domain: &Domain2D,
    bound: f64,
    paths: usize,
    seed: u64,
) -> Result<Vec<Vec<[f64; 2]>>> {
    (0..paths)
        .map(|k| thin_sample(field, domain, bound, &mut rng::rng_for(seed, streams::THINNING, k as u64)))
        .collect()
}

/// Pearson correlation of two equal-length sequences.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}
