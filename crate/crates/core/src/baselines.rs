//! Ordinary least squares and the exact flat-prior Bayesian linear model.
//!
//! Under the prior `p(beta, log sigma) ∝ 1` the posterior is
//! `sigma^2 ~ (n - p) s^2 / chi^2_{n-p}` and
//! `beta | sigma^2 ~ N(beta_hat, sigma^2 (X'X)^{-1})`.

use nalgebra::{DMatrix, DVector};
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::diffcore::DenseArray;
use crate::error::{Error, Result};
use crate::rng::{self, streams};

/// Largest accepted condition number of `X'X`.
pub const MAX_CONDITION: f64 = 1e12;

const SHARD: usize = 1024;

#[derive(Clone, Debug, PartialEq)]
pub struct OlsFit {
    pub beta: Vec<f64>,
    /// `RSS / (n - p)`.
    pub s2: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BayesLMPosterior {
    pub beta_hat: Vec<f64>,
    pub s2: f64,
    /// `(X'X)^{-1}`, `[p, p]`.
    pub unscaled_cov: DenseArray,
    pub dof: usize,
}

fn to_matrix(x: &DenseArray) -> DMatrix<f64> {
    DMatrix::from_row_slice(x.rows(), x.cols(), x.data())
}

struct Decomposition {
    beta: DVector<f64>,
    s2: f64,
    xtx_inv: DMatrix<f64>,
    dof: usize,
}

fn decompose(x: &DenseArray, y: &[f64]) -> Result<Decomposition> {
    if x.ndim() != 2 || x.rows() != y.len() {
        return Err(Error::ShapeMismatch {
            op: "ols_fit",
            left: x.shape().to_vec(),
            right: vec![y.len()],
        });
    }
    let (n, p) = (x.rows(), x.cols());
    if n <= p {
        return Err(Error::Contract(format!("need more observations ({n}) than coefficients ({p})")));
    }
    let xm = to_matrix(x);
    let yv = DVector::from_column_slice(y);
    let svd = xm.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { (smax / smin).powi(2) } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditioned { condition });
    }
    let beta = svd
        .solve(&yv, 0.0)
        .map_err(|e| Error::Contract(format!("least squares solve failed: {e}")))?;
    let resid = &yv - &xm * &beta;
    let dof = n - p;
    let s2 = resid.norm_squared() / dof as f64;
    let v_t = svd.v_t.expect("requested V");
    let inv_sq = svd.singular_values.map(|s| 1.0 / (s * s));
    let xtx_inv = v_t.transpose() * DMatrix::from_diagonal(&inv_sq) * &v_t;
    Ok(Decomposition { beta, s2, xtx_inv, dof })
}

/// Least squares through the singular value decomposition of `X`.
pub fn ols_fit(x: &DenseArray, y: &[f64]) -> Result<OlsFit> {
    let d = decompose(x, y)?;
    Ok(OlsFit {
        beta: d.beta.iter().copied().collect(),
        s2: d.s2,
    })
}

pub fn bayes_lm_posterior(x: &DenseArray, y: &[f64]) -> Result<BayesLMPosterior> {
    let d = decompose(x, y)?;
    let p = d.xtx_inv.nrows();
    let mut cov = DenseArray::zeros(&[p, p]);
    for i in 0..p {
        for j in 0..p {
            // symmetrize away rounding
            cov.set(i, j, 0.5 * (d.xtx_inv[(i, j)] + d.xtx_inv[(j, i)]));
        }
    }
    Ok(BayesLMPosterior {
        beta_hat: d.beta.iter().copied().collect(),
        s2: d.s2,
        unscaled_cov: cov,
        dof: d.dof,
    })
}

impl BayesLMPosterior {
    pub fn p(&self) -> usize {
        self.beta_hat.len()
    }

    /// Analytic marginal posterior variances `s^2 (X'X)^{-1}_jj nu / (nu - 2)`.
    pub fn marginal_variances(&self) -> Option<Vec<f64>> {
        if self.dof <= 2 {
            return None;
        }
        let nu = self.dof as f64;
        Some(
            (0..self.p())
                .map(|j| self.s2 * self.unscaled_cov.get(j, j) * nu / (nu - 2.0))
                .collect(),
        )
    }
}

/// `n` joint posterior draws of `beta` as an `[n, p]` array.
///
/// Draws are generated in fixed shards with per-shard seeds, so the output
/// depends only on `seed`.
pub fn bayes_lm_sample(post: &BayesLMPosterior, n: usize, seed: u64) -> Result<DenseArray> {
    let p = post.p();
    let cov = DMatrix::from_row_slice(p, p, post.unscaled_cov.data());
    let chol = cov
        .cholesky()
        .ok_or_else(|| Error::Contract("posterior covariance is not positive definite".into()))?;
    let l = chol.l();
    let chi = ChiSquared::new(post.dof as f64).map_err(|e| Error::Contract(e.to_string()))?;
    let mut out = Vec::with_capacity(n * p);
    for (shard, start) in (0..n).step_by(SHARD).enumerate() {
        let mut r = rng::rng_for(seed, streams::BASELINE, shard as u64);
        for _ in start..(start + SHARD).min(n) {
            let sigma2 = post.dof as f64 * post.s2 / chi.sample(&mut r);
            let z = DVector::from_iterator(p, (0..p).map(|_| StandardNormal.sample(&mut r)));
            let dev = &l * z * sigma2.sqrt();
            out.extend(post.beta_hat.iter().zip(dev.iter()).map(|(b, d)| b + d));
        }
    }
    DenseArray::matrix(n, p, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_fit_has_zero_residual() {
        let x = DenseArray::matrix(4, 2, vec![1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 2.0, -1.0]).unwrap();
        let y = [3.0, -1.0, 2.0, 7.0];
        let f = ols_fit(&x, &y).unwrap();
        assert!((f.beta[0] - 3.0).abs() < 1e-12 && (f.beta[1] + 1.0).abs() < 1e-12);
        assert!(f.s2 < 1e-24);
    }

    #[test]
    fn identity_design_returns_responses() {
        let mut data = vec![0.0; 12];
        for i in 0..3 {
            data[i * 3 + i] = 1.0;
        }
        let x = DenseArray::matrix(4, 3, data).unwrap();
        let f = ols_fit(&x, &[0.5, -2.0, 4.0, 1.0]).unwrap();
        for (b, y) in f.beta.iter().zip([0.5, -2.0, 4.0]) {
            assert!((b - y).abs() < 1e-12);
        }
    }

    #[test]
    fn collinear_design_rejected() {
        let x = DenseArray::matrix(3, 2, vec![1.0, 2.0, 2.0, 4.0, 3.0, 6.0]).unwrap();
        assert!(matches!(ols_fit(&x, &[1.0, 2.0, 3.0]), Err(Error::IllConditioned { .. })));
    }

    #[test]
    fn too_few_observations_rejected() {
        let x = DenseArray::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(ols_fit(&x, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn degenerate_posterior_draws_equal_estimate() {
        let x = DenseArray::matrix(4, 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let post = bayes_lm_posterior(&x, &[2.0, 4.0, 6.0, 8.0]).unwrap();
        let d = bayes_lm_sample(&post, 100, 3).unwrap();
        assert!(d.data().iter().all(|b| (b - 2.0).abs() < 1e-9));
    }
}
