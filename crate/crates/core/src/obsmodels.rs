//! Observation models: parameter links, predictive sampling, and closed-form
//! kernel expectations for discrete likelihoods.

use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::diffcore::{DenseArray, NodeId, Tape};
use crate::error::{Error, Result};
use crate::mmd::KernelConfig;

/// Default Poisson support bound; raised automatically when the tail is heavier.
pub const DEFAULT_K_MAX: usize = 64;
/// Probability mass allowed outside the enumerated Poisson support.
pub const POISSON_TAIL: f64 = 1e-8;
const POISSON_HARD_LIMIT: usize = 20_000;

/// The likelihood family `f_theta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservationModel {
    /// `y = x^T beta + sigma * eps`; raw output `(beta, s)` with `sigma = exp(s)`.
    GaussianLinear { p: usize },
    /// Raw output are `classes` logits; probabilities by softmax.
    Categorical { classes: usize },
    /// Raw output `g` with rate `exp(g)`.
    PoissonCount {
        #[serde(default = "default_k_max")]
        k_max: usize,
    },
}

fn default_k_max() -> usize {
    DEFAULT_K_MAX
}

impl ObservationModel {
    pub fn name(&self) -> &'static str {
        match self {
            ObservationModel::GaussianLinear { .. } => "gaussian_linear",
            ObservationModel::Categorical { .. } => "categorical",
            ObservationModel::PoissonCount { .. } => "poisson_count",
        }
    }

    /// Width of the raw generator output this model consumes.
    pub fn param_dim(&self) -> usize {
        match *self {
            ObservationModel::GaussianLinear { p } => p + 1,
            ObservationModel::Categorical { classes } => classes,
            ObservationModel::PoissonCount { .. } => 1,
        }
    }

    /// Width of a constrained parameter row (same as [`param_dim`](Self::param_dim)).
    pub fn constrained_dim(&self) -> usize {
        self.param_dim()
    }

    pub fn is_discrete(&self) -> bool {
        !matches!(self, ObservationModel::GaussianLinear { .. })
    }

    /// Column names of a constrained parameter row.
    pub fn column_names(&self) -> Vec<String> {
        match *self {
            ObservationModel::GaussianLinear { p } => (1..=p)
                .map(|j| format!("beta_{j}"))
                .chain(std::iter::once("sigma".to_string()))
                .collect(),
            ObservationModel::Categorical { classes } => (0..classes).map(|h| format!("prob_{h}")).collect(),
            ObservationModel::PoissonCount { .. } => vec!["rate".to_string()],
        }
    }

    pub fn check_output_dim(&self, out_dim: usize) -> Result<()> {
        if out_dim != self.param_dim() {
            return Err(Error::Contract(format!(
                "{} model needs generator out_dim {}, spec has {}",
                self.name(),
                self.param_dim(),
                out_dim
            )));
        }
        Ok(())
    }

    /// Checks that observed responses lie in the model's support.
    pub fn validate_responses(&self, y: &[f64]) -> Result<()> {
        let bad = |v: f64| match *self {
            ObservationModel::GaussianLinear { .. } => !v.is_finite(),
            ObservationModel::Categorical { classes } => {
                v.fract() != 0.0 || v < 0.0 || v >= classes as f64
            }
            ObservationModel::PoissonCount { .. } => v.fract() != 0.0 || v < 0.0 || !v.is_finite(),
        };
        match y.iter().position(|&v| bad(v)) {
            Some(i) => Err(Error::Domain {
                op: "responses",
                detail: format!("response {} at index {i} outside the {} support", y[i], self.name()),
            }),
            None => Ok(()),
        }
    }

    /// Applies the link functions to raw output rows, without a tape.
    pub fn constrain(&self, raw: &DenseArray, scale: Option<ResponseScale>) -> Result<DenseArray> {
        self.check_output_dim(raw.cols())?;
        let mut out = raw.clone();
        let cols = raw.cols();
        match *self {
            ObservationModel::GaussianLinear { p } => {
                let s = scale.map_or(1.0, |s| s.scale);
                for row in out.data_mut().chunks_mut(cols) {
                    row[..p].iter_mut().for_each(|b| *b *= s);
                    row[p] = row[p].exp() * s;
                }
            }
            ObservationModel::Categorical { .. } => {
                for row in out.data_mut().chunks_mut(cols) {
                    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let mut total = 0.0;
                    for v in row.iter_mut() {
                        *v = (*v - max).exp();
                        total += *v;
                    }
                    row.iter_mut().for_each(|v| *v /= total);
                }
            }
            ObservationModel::PoissonCount { .. } => {
                out.data_mut().iter_mut().for_each(|v| *v = v.exp());
            }
        }
        Ok(out)
    }
}

/// Multiplicative rescaling of a real response.
///
/// Gaussian-linear models are fitted on `y / scale`; coefficients and noise
/// scale map back by multiplying with `scale`. Responses are not centred
/// because the linear model has no intercept.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponseScale {
    pub scale: f64,
}

impl ResponseScale {
    /// Sample standard deviation of `y` (1 when degenerate).
    pub fn from_responses(y: &[f64]) -> Self {
        let n = y.len() as f64;
        if y.len() < 2 {
            return Self { scale: 1.0 };
        }
        let mean = y.iter().sum::<f64>() / n;
        let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        let sd = var.sqrt();
        Self {
            scale: if sd.is_finite() && sd > 0.0 { sd } else { 1.0 },
        }
    }

    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|v| v / self.scale).collect()
    }
}

/// Constrained parameters as tape nodes.
#[derive(Clone, Copy, Debug)]
pub enum ConstrainedNodes {
    /// `beta: [batch, p]`, `sigma: [batch, 1]`.
    Gaussian { beta: NodeId, sigma: NodeId },
    /// `probs: [batch, classes]`.
    Categorical { probs: NodeId },
    /// `rate: [batch, 1]`; `log_rate` is the raw output.
    Poisson { rate: NodeId, log_rate: NodeId },
}

/// Differentiable link functions on a raw `[batch, param_dim]` node.
pub fn transform_output(tape: &mut Tape, model: &ObservationModel, raw: NodeId) -> Result<ConstrainedNodes> {
    model.check_output_dim(tape.value(raw).cols())?;
    match *model {
        ObservationModel::GaussianLinear { p } => {
            let mut pick_beta = DenseArray::zeros(&[p + 1, p]);
            for j in 0..p {
                pick_beta.set(j, j, 1.0);
            }
            let mut pick_s = DenseArray::zeros(&[p + 1, 1]);
            pick_s.set(p, 0, 1.0);
            let pick_beta = tape.constant(pick_beta);
            let pick_s = tape.constant(pick_s);
            let beta = tape.matmul(raw, pick_beta)?;
            let s = tape.matmul(raw, pick_s)?;
            let sigma = tape.exp(s)?;
            Ok(ConstrainedNodes::Gaussian { beta, sigma })
        }
        ObservationModel::Categorical { .. } => Ok(ConstrainedNodes::Categorical {
            probs: tape.softmax(raw)?,
        }),
        ObservationModel::PoissonCount { .. } => Ok(ConstrainedNodes::Poisson {
            rate: tape.exp(raw)?,
            log_rate: raw,
        }),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PredictiveValue {
    Real(f64),
    Class(usize),
    Count(u64),
}

impl PredictiveValue {
    pub fn as_f64(&self) -> f64 {
        match *self {
            PredictiveValue::Real(v) => v,
            PredictiveValue::Class(c) => c as f64,
            PredictiveValue::Count(k) => k as f64,
        }
    }
}

/// One draw from `f_theta`.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictiveSample {
    pub value: PredictiveValue,
    pub theta: Vec<f64>,
    /// Standard-normal innovation behind a Gaussian draw.
    pub innovation: Option<f64>,
}

/// Draws a response from constrained parameters `theta` (and design row `x`
/// for the Gaussian-linear model).
pub fn sample_predictive<R: rand::Rng + ?Sized>(
    model: &ObservationModel,
    theta: &[f64],
    x: Option<&[f64]>,
    rng: &mut R,
) -> Result<PredictiveSample> {
    model.check_output_dim(theta.len())?;
    let (value, innovation) = match *model {
        ObservationModel::GaussianLinear { p } => {
            let x = x.ok_or_else(|| Error::Contract("gaussian predictive draw needs a design row".into()))?;
            if x.len() != p {
                return Err(Error::ShapeMismatch {
                    op: "sample_predictive",
                    left: vec![x.len()],
                    right: vec![p],
                });
            }
            let eps: f64 = rng.sample(StandardNormal);
            let mean: f64 = x.iter().zip(&theta[..p]).map(|(a, b)| a * b).sum();
            (PredictiveValue::Real(mean + theta[p] * eps), Some(eps))
        }
        ObservationModel::Categorical { .. } => {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut class = theta.len() - 1;
            for (h, &p) in theta.iter().enumerate() {
                acc += p;
                if u < acc {
                    class = h;
                    break;
                }
            }
            (PredictiveValue::Class(class), None)
        }
        ObservationModel::PoissonCount { .. } => {
            let rate = theta[0];
            let k = if rate > 0.0 {
                Poisson::new(rate)
                    .map_err(|e| Error::Domain {
                        op: "sample_predictive",
                        detail: e.to_string(),
                    })?
                    .sample(rng) as u64
            } else {
                0
            };
            (PredictiveValue::Count(k), None)
        }
    };
    Ok(PredictiveSample {
        value,
        theta: theta.to_vec(),
        innovation,
    })
}

/// Per-row kernel expectations, each `[batch, 1]`:
/// `cross = E k(y, Y~)` and `self_term = E k(Y~, Y~')` with `Y~, Y~'`
/// independent draws from the same `theta`.
#[derive(Clone, Copy, Debug)]
pub struct DiscreteKernelTerms {
    pub cross: NodeId,
    pub self_term: NodeId,
    /// `[B, S]` probabilities over the enumerated support.
    pub probs: NodeId,
    /// `probs * Gram`, so `rowsum(probs_gram_a * probs_b)` is the expected
    /// kernel between draws under rows `a` and `b`.
    pub probs_gram: NodeId,
    /// Number of support points enumerated.
    pub support: usize,
}

/// Smallest `K >= floor` with `P(Poisson(rate) > K) < POISSON_TAIL`.
pub fn poisson_support_bound(rate: f64, floor: usize) -> Result<usize> {
    if !(rate >= 0.0) || !rate.is_finite() {
        return Err(Error::Domain {
            op: "poisson_support_bound",
            detail: format!("rate {rate}"),
        });
    }
    if rate == 0.0 {
        return Ok(floor);
    }
    let log_rate = rate.ln();
    let mut log_fact = 0.0;
    let mut cdf = 0.0;
    for k in 0..=POISSON_HARD_LIMIT {
        if k > 0 {
            log_fact += (k as f64).ln();
        }
        cdf += (k as f64 * log_rate - rate - log_fact).exp();
        if k >= floor && 1.0 - cdf < POISSON_TAIL {
            return Ok(k);
        }
    }
    Err(Error::Domain {
        op: "poisson_support_bound",
        detail: format!("rate {rate} needs more than {POISSON_HARD_LIMIT} support points"),
    })
}

/// Closed-form kernel expectations for discrete models, differentiable in
/// the raw generator output `raw: [batch, param_dim]`.
///
/// Class labels are embedded one-hot; counts are compared as reals.
pub fn expected_kernel_discrete(
    tape: &mut Tape,
    model: &ObservationModel,
    raw: NodeId,
    observed: &[f64],
    kernel: &KernelConfig,
) -> Result<DiscreteKernelTerms> {
    let batch = tape.value(raw).rows();
    if observed.len() != batch {
        return Err(Error::ShapeMismatch {
            op: "expected_kernel_discrete",
            left: vec![batch],
            right: vec![observed.len()],
        });
    }
    model.validate_responses(observed)?;
    let bw = kernel.bandwidth;

    let (probs, gram, cross_rows, support) = match *model {
        ObservationModel::GaussianLinear { .. } => {
            return Err(Error::UnsupportedModel {
                op: "expected_kernel_discrete",
                model: "gaussian_linear",
            })
        }
        ObservationModel::Categorical { classes } => {
            let probs = tape.softmax(raw)?;
            let off = (-2.0 / bw).exp();
            let mut gram = DenseArray::filled(&[classes, classes], off);
            for h in 0..classes {
                gram.set(h, h, 1.0);
            }
            let mut rows = DenseArray::filled(&[batch, classes], off);
            for (b, &y) in observed.iter().enumerate() {
                rows.set(b, y as usize, 1.0);
            }
            (probs, gram, rows, classes)
        }
        ObservationModel::PoissonCount { k_max } => {
            let max_rate = tape
                .value(raw)
                .data()
                .iter()
                .map(|g| g.exp())
                .fold(0.0, f64::max);
            let k = poisson_support_bound(max_rate, k_max)?;
            let s = k + 1;
            let ks: Vec<f64> = (0..s).map(|v| v as f64).collect();
            let mut log_fact = vec![0.0; s];
            for v in 1..s {
                log_fact[v] = log_fact[v - 1] + (v as f64).ln();
            }

            let krow = tape.constant(DenseArray::matrix(1, s, ks.clone())?);
            let ones_row = tape.constant(DenseArray::filled(&[1, s], 1.0));
            let lf = tape.constant(DenseArray::matrix(batch, s, log_fact.repeat(batch))?);
            let k_log_rate = tape.matmul(raw, krow)?;
            let rate = tape.exp(raw)?;
            let rate_b = tape.matmul(rate, ones_row)?;
            let a = tape.sub(k_log_rate, rate_b)?;
            let log_pmf = tape.sub(a, lf)?;
            let probs = tape.exp(log_pmf)?;

            let mut gram = DenseArray::zeros(&[s, s]);
            for h in 0..s {
                for l in 0..s {
                    let d = ks[h] - ks[l];
                    gram.set(h, l, (-d * d / bw).exp());
                }
            }
            let mut rows = DenseArray::zeros(&[batch, s]);
            for (b, &y) in observed.iter().enumerate() {
                for (h, &kv) in ks.iter().enumerate() {
                    let d = y - kv;
                    rows.set(b, h, (-d * d / bw).exp());
                }
            }
            (probs, gram, rows, s)
        }
    };

    let ones_col = tape.constant(DenseArray::filled(&[support, 1], 1.0));
    let rows = tape.constant(cross_rows);
    let weighted = tape.mul(probs, rows)?;
    let cross = tape.matmul(weighted, ones_col)?;

    let gram = tape.constant(gram);
    let pg = tape.matmul(probs, gram)?;
    let quad = tape.mul(pg, probs)?;
    let self_term = tape.matmul(quad, ones_col)?;
    Ok(DiscreteKernelTerms {
        cross,
        self_term,
        probs,
        probs_gram: pg,
        support,
    })
}
