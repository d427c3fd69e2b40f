//! Gaussian kernel and the MMD training objective.
//!
//! For each observation `i` the objective compares `y_i` with predictive
//! draws generated from that observation's own parameter draws:
//!
//! ```text
//! -(2/n) sum_i E k(y_i, Y~_i) + (1/n) sum_i E k(Y~_i, Y~_i')
//! ```
//!
//! The constant `(1/n) sum_i k(y_i, y_i) = 1` is dropped, so the objective
//! plus one is a nonnegative squared discrepancy.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::diffcore::{DenseArray, NodeId, Tape};
use crate::error::{Error, Result};
use crate::generator::{GeneratorNodes, NoiseBatch};
use crate::obsmodels::{self, ConstrainedNodes, ObservationModel, PredictiveValue};
use crate::rng::{self, streams};

/// `k(a, b) = exp(-|a - b|^2 / bandwidth)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub bandwidth: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self { bandwidth: 1.0 }
    }
}

/// How the self-similarity term `E k(Y~, Y~')` pairs predictive draws.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelfPairing {
    /// Draws under distinct noise replicates, so `Y~` and `Y~'` are
    /// independent draws from the predictive mixture over parameters.
    #[default]
    AcrossReplicates,
    /// Distinct draws sharing one parameter draw.
    WithinReplicate,
}

/// Monte-Carlo sizes: `replicates` noise draws per observation and
/// `draws` predictive samples per parameter draw.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MCConfig {
    pub replicates: usize,
    pub draws: usize,
    pub pairing: SelfPairing,
}

impl Default for MCConfig {
    fn default() -> Self {
        Self {
            replicates: 10,
            draws: 5,
            pairing: SelfPairing::default(),
        }
    }
}

impl MCConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.draws == 0 {
            v.push("train.mc.draws must be positive".into());
        }
        match self.pairing {
            SelfPairing::AcrossReplicates if self.replicates < 2 => {
                v.push("train.mc.replicates must be at least 2 for across_replicates pairing".into())
            }
            SelfPairing::WithinReplicate if self.draws < 2 => {
                v.push("train.mc.draws must be at least 2 for within_replicate pairing".into())
            }
            _ if self.replicates == 0 => v.push("train.mc.replicates must be positive".into()),
            _ => {}
        }
        v
    }

    fn check(&self) -> Result<()> {
        match self.violations().first() {
            None => Ok(()),
            Some(v) => Err(Error::Contract(v.clone())),
        }
    }
}

pub fn kernel(x: &[f64], y: &[f64], cfg: &KernelConfig) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch {
            op: "kernel",
            left: vec![x.len()],
            right: vec![y.len()],
        });
    }
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((-d2 / cfg.bandwidth).exp())
}

/// Observations fed to the objective.
///
/// `design` holds Gaussian-linear regressors (not seen by the generator);
/// `cond` holds generator covariates.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub y: Vec<f64>,
    pub design: Option<DenseArray>,
    pub cond: Option<DenseArray>,
}

impl Dataset {
    pub fn new(y: Vec<f64>, design: Option<DenseArray>, cond: Option<DenseArray>) -> Result<Self> {
        let n = y.len();
        for (name, m) in [("design", &design), ("cond", &cond)] {
            if let Some(m) = m {
                if m.ndim() != 2 || m.rows() != n {
                    return Err(Error::ShapeMismatch {
                        op: if name == "design" { "dataset design" } else { "dataset cond" },
                        left: m.shape().to_vec(),
                        right: vec![n],
                    });
                }
            }
        }
        Ok(Self { y, design, cond })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            y: idx.iter().map(|&i| self.y[i]).collect(),
            design: self.design.as_ref().map(|m| m.select_rows(idx)),
            cond: self.cond.as_ref().map(|m| m.select_rows(idx)),
        }
    }

    /// Checks the data against the model and generator input widths.
    pub fn check(&self, model: &ObservationModel, cond_dim: usize) -> Result<()> {
        if self.is_empty() {
            return Err(Error::Contract("dataset is empty".into()));
        }
        model.validate_responses(&self.y)?;
        if let ObservationModel::GaussianLinear { p } = *model {
            match &self.design {
                Some(d) if d.cols() == p => {}
                Some(d) => {
                    return Err(Error::ShapeMismatch {
                        op: "dataset design",
                        left: d.shape().to_vec(),
                        right: vec![self.len(), p],
                    })
                }
                None => return Err(Error::Contract("gaussian-linear data needs a design matrix".into())),
            }
        }
        match (&self.cond, cond_dim) {
            (None, 0) => Ok(()),
            (Some(c), d) if c.cols() == d && d > 0 => Ok(()),
            (c, d) => Err(Error::Contract(format!(
                "generator expects {d} covariates, data has {}",
                c.as_ref().map_or(0, DenseArray::cols)
            ))),
        }
    }

    /// Rows repeated `times` over, block after block.
    fn tile(m: &DenseArray, times: usize) -> DenseArray {
        let idx: Vec<usize> = (0..times).flat_map(|_| 0..m.rows()).collect();
        m.select_rows(&idx)
    }
}

/// Objective node with its leave-one-replicate-out estimates.
#[derive(Clone, Debug)]
pub struct Objective {
    pub value: NodeId,
    pub jackknife: Vec<f64>,
}

impl Objective {
    pub fn value(&self, tape: &Tape) -> f64 {
        tape.value(self.value).data()[0]
    }

    /// Jackknife standard error over noise replicates; NaN when fewer than
    /// two leave-one-out estimates exist.
    pub fn standard_error(&self) -> f64 {
        let m = self.jackknife.len() as f64;
        if m < 2.0 || self.jackknife.iter().any(|v| !v.is_finite()) {
            return f64::NAN;
        }
        let mean = self.jackknife.iter().sum::<f64>() / m;
        let ss: f64 = self.jackknife.iter().map(|v| (v - mean).powi(2)).sum();
        ((m - 1.0) / m * ss).sqrt()
    }
}

/// Per-replicate summaries: `cross[r]` is the mean over observations of the
/// cross term, `pair[r][s]` the mean self term between replicates `r` and `s`
/// (the diagonal holds within-replicate values).
struct Summaries {
    cross: Vec<f64>,
    pair: Vec<Vec<f64>>,
}

impl Summaries {
    fn new(m: usize) -> Self {
        Self {
            cross: vec![0.0; m],
            pair: vec![vec![0.0; m]; m],
        }
    }

    fn estimate(&self, pairing: SelfPairing, skip: Option<usize>) -> f64 {
        let keep: Vec<usize> = (0..self.cross.len()).filter(|&r| Some(r) != skip).collect();
        let cross = keep.iter().map(|&r| self.cross[r]).sum::<f64>() / keep.len() as f64;
        let selfsim = match pairing {
            SelfPairing::WithinReplicate => keep.iter().map(|&r| self.pair[r][r]).sum::<f64>() / keep.len() as f64,
            SelfPairing::AcrossReplicates => {
                let mut total = 0.0;
                let mut count = 0usize;
                for (a, &r) in keep.iter().enumerate() {
                    for &s in &keep[a + 1..] {
                        total += self.pair[r][s];
                        count += 1;
                    }
                }
                total / count as f64
            }
        };
        -2.0 * cross + selfsim
    }

    fn jackknife(&self, pairing: SelfPairing) -> Vec<f64> {
        (0..self.cross.len())
            .map(|r| self.estimate(pairing, Some(r)))
            .collect()
    }
}

/// Unordered replicate pairs `r < s`.
fn replicate_pairs(m: usize) -> Vec<(usize, usize)> {
    (0..m).flat_map(|r| (r + 1..m).map(move |s| (r, s))).collect()
}

/// Splits a replicate-major `[n * m, c]` node into `m` blocks of `n` rows.
fn replicate_blocks(tape: &mut Tape, node: NodeId, n: usize, m: usize) -> Result<Vec<NodeId>> {
    (0..m)
        .map(|r| {
            let mut sel = DenseArray::zeros(&[n, n * m]);
            for i in 0..n {
                sel.set(i, r * n + i, 1.0);
            }
            let sel = tape.constant(sel);
            tape.matmul(sel, node)
        })
        .collect()
}

fn row_block_sums(values: &DenseArray, n: usize, m: usize) -> Vec<f64> {
    let width = values.len() / (n * m);
    values
        .data()
        .chunks(n * width)
        .map(|c| c.iter().sum::<f64>())
        .collect()
}

fn generate_raw(
    tape: &mut Tape,
    data: &Dataset,
    gen: &GeneratorNodes,
    replicates: usize,
    seed: u64,
) -> Result<NodeId> {
    let rows = data.len() * replicates;
    let z = NoiseBatch::draw(seed, 0, rows, gen.spec().noise_dim);
    let cond = data.cond.as_ref().map(|c| Dataset::tile(c, replicates));
    gen.forward(tape, &z.values, cond.as_ref())
}

/// Monte-Carlo estimate of the objective with `mc.replicates` noise draws per
/// observation and `mc.draws` predictive samples per parameter draw.
///
/// Gaussian draws are reparameterized, so gradients flow to the generator;
/// for discrete models the estimate is a constant (use [`exact_objective`]
/// to train those).
///
/// Parameter noise comes from `seed` exactly as in [`exact_objective`], so
/// both estimators evaluated with one seed share their parameter draws.
pub fn mc_objective(
    tape: &mut Tape,
    data: &Dataset,
    gen: &GeneratorNodes,
    model: &ObservationModel,
    kernel: &KernelConfig,
    mc: MCConfig,
    seed: u64,
) -> Result<Objective> {
    mc.check()?;
    data.check(model, gen.spec().cond_dim)?;
    model.check_output_dim(gen.spec().out_dim)?;
    let raw = generate_raw(tape, data, gen, mc.replicates, seed)?;
    let mut rng = rng::rng_for(seed, streams::PREDICTIVE, 0);
    match *model {
        ObservationModel::GaussianLinear { p } => gaussian_mc(tape, data, raw, model, p, kernel, mc, &mut rng),
        _ => discrete_mc(tape, data, raw, model, kernel, mc, &mut rng),
    }
}

/// `exp(-d^2 / bandwidth)` elementwise, returned with its total.
fn kernel_of_difference(tape: &mut Tape, diff: NodeId, kernel: &KernelConfig) -> Result<(NodeId, NodeId)> {
    let sq = tape.mul(diff, diff)?;
    let scaled = tape.scale(sq, -1.0 / kernel.bandwidth)?;
    let k = tape.exp(scaled)?;
    let total = tape.sum(k)?;
    Ok((k, total))
}

#[allow(clippy::too_many_arguments)]
fn gaussian_mc(
    tape: &mut Tape,
    data: &Dataset,
    raw: NodeId,
    model: &ObservationModel,
    p: usize,
    kernel: &KernelConfig,
    mc: MCConfig,
    rng: &mut rng::Rng,
) -> Result<Objective> {
    let (n, m, j) = (data.len(), mc.replicates, mc.draws);
    let rows = n * m;
    let ConstrainedNodes::Gaussian { beta, sigma } = obsmodels::transform_output(tape, model, raw)? else {
        unreachable!("gaussian model yields gaussian parameters")
    };
    let design = data.design.as_ref().expect("checked by Dataset::check");
    let x = tape.constant(Dataset::tile(design, m));
    let ones_p = tape.constant(DenseArray::filled(&[p, 1], 1.0));
    let ones_j = tape.constant(DenseArray::filled(&[1, j], 1.0));
    let xb = tape.mul(x, beta)?;
    let mean = tape.matmul(xb, ones_p)?;
    let mean_j = tape.matmul(mean, ones_j)?;
    let sigma_j = tape.matmul(sigma, ones_j)?;
    let eps: Vec<f64> = (0..rows * j).map(|_| rng.sample(StandardNormal)).collect();
    let eps = tape.constant(DenseArray::matrix(rows, j, eps)?);
    let spread = tape.mul(sigma_j, eps)?;
    let draws = tape.add(mean_j, spread)?;

    let y_rep: Vec<f64> = (0..m)
        .flat_map(|_| data.y.iter().flat_map(|&y| std::iter::repeat(y).take(j)))
        .collect();
    let y_rep = tape.constant(DenseArray::matrix(rows, j, y_rep)?);
    let diff = tape.sub(draws, y_rep)?;
    let (k_cross, s_cross) = kernel_of_difference(tape, diff, kernel)?;
    let t_cross = tape.scale(s_cross, -2.0 / (rows * j) as f64)?;

    let mut summaries = Summaries::new(m);
    for (r, c) in row_block_sums(tape.value(k_cross), n, m).into_iter().enumerate() {
        summaries.cross[r] = c / (n * j) as f64;
    }

    let t_self = match mc.pairing {
        SelfPairing::WithinReplicate => {
            let pairs = j * (j - 1);
            let mut pair_matrix = DenseArray::zeros(&[j, pairs]);
            let mut col = 0;
            for a in 0..j {
                for b in (0..j).filter(|&b| b != a) {
                    pair_matrix.set(a, col, 1.0);
                    pair_matrix.set(b, col, -1.0);
                    col += 1;
                }
            }
            let pair_matrix = tape.constant(pair_matrix);
            let pd = tape.matmul(draws, pair_matrix)?;
            let (k_self, s_self) = kernel_of_difference(tape, pd, kernel)?;
            for (r, s) in row_block_sums(tape.value(k_self), n, m).into_iter().enumerate() {
                summaries.pair[r][r] = s / (n * pairs) as f64;
            }
            tape.scale(s_self, 1.0 / (rows * pairs) as f64)?
        }
        SelfPairing::AcrossReplicates => {
            // Columns enumerate (a, b) draw pairs: left picks a, right picks b.
            let mut left = DenseArray::zeros(&[j, j * j]);
            let mut right = DenseArray::zeros(&[j, j * j]);
            for a in 0..j {
                for b in 0..j {
                    left.set(a, a * j + b, 1.0);
                    right.set(b, a * j + b, 1.0);
                }
            }
            let left = tape.constant(left);
            let right = tape.constant(right);
            let blocks = replicate_blocks(tape, draws, n, m)?;
            let lefts = blocks.iter().map(|&b| tape.matmul(b, left)).collect::<Result<Vec<_>>>()?;
            let rights = blocks.iter().map(|&b| tape.matmul(b, right)).collect::<Result<Vec<_>>>()?;
            let pairs = replicate_pairs(m);
            let mut acc: Option<NodeId> = None;
            for &(r, s) in &pairs {
                let d = tape.sub(lefts[r], rights[s])?;
                let (_, total) = kernel_of_difference(tape, d, kernel)?;
                let v = tape.value(total).data()[0] / (n * j * j) as f64;
                summaries.pair[r][s] = v;
                summaries.pair[s][r] = v;
                acc = Some(match acc {
                    None => total,
                    Some(a) => tape.add(a, total)?,
                });
            }
            let acc = acc.expect("at least one replicate pair");
            tape.scale(acc, 1.0 / (n * j * j * pairs.len()) as f64)?
        }
    };
    let value = tape.add(t_cross, t_self)?;
    Ok(Objective {
        value,
        jackknife: summaries.jackknife(mc.pairing),
    })
}

fn discrete_mc(
    tape: &mut Tape,
    data: &Dataset,
    raw: NodeId,
    model: &ObservationModel,
    kernel: &KernelConfig,
    mc: MCConfig,
    rng: &mut rng::Rng,
) -> Result<Objective> {
    let (n, m, j) = (data.len(), mc.replicates, mc.draws);
    let theta = model.constrain(tape.value(raw), None)?;
    let k = |a: &PredictiveValue, b: &PredictiveValue| -> f64 {
        match (a, b) {
            (PredictiveValue::Class(x), PredictiveValue::Class(y)) => {
                if x == y {
                    1.0
                } else {
                    (-2.0 / kernel.bandwidth).exp()
                }
            }
            _ => {
                let d = a.as_f64() - b.as_f64();
                (-d * d / kernel.bandwidth).exp()
            }
        }
    };
    let observed = |y: f64| match model {
        ObservationModel::Categorical { .. } => PredictiveValue::Class(y as usize),
        _ => PredictiveValue::Count(y as u64),
    };
    // draws[r][i] holds the j predictive draws under theta_i^(r).
    let mut draws: Vec<Vec<Vec<PredictiveValue>>> = Vec::with_capacity(m);
    for r in 0..m {
        let mut block = Vec::with_capacity(n);
        for i in 0..n {
            let row = theta.row(r * n + i);
            block.push(
                (0..j)
                    .map(|_| obsmodels::sample_predictive(model, row, None, rng).map(|s| s.value))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        draws.push(block);
    }

    let mut summaries = Summaries::new(m);
    for (r, block) in draws.iter().enumerate() {
        let mut cross = 0.0;
        for (i, d) in block.iter().enumerate() {
            let y = observed(data.y[i]);
            cross += d.iter().map(|v| k(&y, v)).sum::<f64>() / j as f64;
        }
        summaries.cross[r] = cross / n as f64;
    }
    // Draws collapse to (value, multiplicity) lists; pair sums over draws
    // become weighted sums over distinct values.
    let hist: Vec<Vec<Vec<(PredictiveValue, f64)>>> = draws
        .iter()
        .map(|block| block.iter().map(|d| histogram(d)).collect())
        .collect();
    let pair_sum = |a: &[(PredictiveValue, f64)], b: &[(PredictiveValue, f64)]| -> f64 {
        a.iter()
            .map(|(u, cu)| cu * b.iter().map(|(v, cv)| cv * k(u, v)).sum::<f64>())
            .sum()
    };
    match mc.pairing {
        SelfPairing::WithinReplicate => {
            let pairs = (j * (j - 1)) as f64;
            for (r, block) in hist.iter().enumerate() {
                // k(v, v) = 1, so the a == b terms contribute exactly j
                let total: f64 = block.iter().map(|h| pair_sum(h, h) - j as f64).sum();
                summaries.pair[r][r] = total / (n as f64 * pairs);
            }
        }
        SelfPairing::AcrossReplicates => {
            for (r, s) in replicate_pairs(m) {
                let total: f64 = (0..n).map(|i| pair_sum(&hist[r][i], &hist[s][i])).sum();
                let v = total / (n * j * j) as f64;
                summaries.pair[r][s] = v;
                summaries.pair[s][r] = v;
            }
        }
    }
    let value = tape.scalar(summaries.estimate(mc.pairing, None));
    Ok(Objective {
        value,
        jackknife: summaries.jackknife(mc.pairing),
    })
}

fn histogram(values: &[PredictiveValue]) -> Vec<(PredictiveValue, f64)> {
    let mut keys: Vec<u64> = values
        .iter()
        .map(|v| match *v {
            PredictiveValue::Class(c) => c as u64,
            PredictiveValue::Count(c) => c,
            PredictiveValue::Real(x) => x.to_bits(),
        })
        .collect();
    keys.sort_unstable();
    let mut out: Vec<(u64, f64)> = Vec::new();
    for key in keys {
        match out.last_mut() {
            Some((k, c)) if *k == key => *c += 1.0,
            _ => out.push((key, 1.0)),
        }
    }
    let wrap = |key: u64| match values[0] {
        PredictiveValue::Class(_) => PredictiveValue::Class(key as usize),
        PredictiveValue::Count(_) => PredictiveValue::Count(key),
        PredictiveValue::Real(_) => PredictiveValue::Real(f64::from_bits(key)),
    };
    out.into_iter().map(|(key, c)| (wrap(key), c)).collect()
}

/// Objective for discrete models with the predictive expectations computed
/// in closed form; only the parameter noise is sampled (`mc.replicates` draws
/// per observation, `mc.draws` unused).
pub fn exact_objective(
    tape: &mut Tape,
    data: &Dataset,
    gen: &GeneratorNodes,
    model: &ObservationModel,
    kernel: &KernelConfig,
    mc: MCConfig,
    seed: u64,
) -> Result<Objective> {
    if !model.is_discrete() {
        return Err(Error::UnsupportedModel {
            op: "exact_objective",
            model: model.name(),
        });
    }
    let mc = MCConfig { draws: mc.draws.max(2), ..mc };
    mc.check()?;
    data.check(model, gen.spec().cond_dim)?;
    model.check_output_dim(gen.spec().out_dim)?;
    let (n, m) = (data.len(), mc.replicates);
    let rows = n * m;
    let raw = generate_raw(tape, data, gen, m, seed)?;
    let observed: Vec<f64> = (0..m).flat_map(|_| data.y.iter().copied()).collect();
    let terms = obsmodels::expected_kernel_discrete(tape, model, raw, &observed, kernel)?;
    let s_cross = tape.sum(terms.cross)?;
    let t_cross = tape.scale(s_cross, -2.0 / rows as f64)?;

    let mut summaries = Summaries::new(m);
    for (r, c) in row_block_sums(tape.value(terms.cross), n, m).into_iter().enumerate() {
        summaries.cross[r] = c / n as f64;
    }
    let t_self = match mc.pairing {
        SelfPairing::WithinReplicate => {
            for (r, s) in row_block_sums(tape.value(terms.self_term), n, m).into_iter().enumerate() {
                summaries.pair[r][r] = s / n as f64;
            }
            let s_self = tape.sum(terms.self_term)?;
            tape.scale(s_self, 1.0 / rows as f64)?
        }
        SelfPairing::AcrossReplicates => {
            let pg = replicate_blocks(tape, terms.probs_gram, n, m)?;
            let pr = replicate_blocks(tape, terms.probs, n, m)?;
            let pairs = replicate_pairs(m);
            let mut acc: Option<NodeId> = None;
            for &(r, s) in &pairs {
                let quad = tape.mul(pg[r], pr[s])?;
                let total = tape.sum(quad)?;
                let v = tape.value(total).data()[0] / n as f64;
                summaries.pair[r][s] = v;
                summaries.pair[s][r] = v;
                acc = Some(match acc {
                    None => total,
                    Some(a) => tape.add(a, total)?,
                });
            }
            let acc = acc.expect("at least one replicate pair");
            tape.scale(acc, 1.0 / (n * pairs.len()) as f64)?
        }
    };
    let value = tape.add(t_cross, t_self)?;
    Ok(Objective {
        value,
        jackknife: summaries.jackknife(mc.pairing),
    })
}
