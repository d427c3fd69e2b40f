//! The generator network: noise (optionally preceded by covariates) in,
//! raw per-observation parameters out.

use rand::Rng as _;
use rand_distr::{StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::diffcore::{DenseArray, NodeId, ParamSet, Tape};
use crate::error::{Error, Result};
use crate::obsmodels::{ObservationModel, ResponseScale};
use crate::rng::{self, streams};
use crate::uq::UQSampleSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub noise_dim: usize,
    #[serde(default)]
    pub cond_dim: usize,
    pub hidden_sizes: Vec<usize>,
    pub out_dim: usize,
    pub activation: Activation,
}

impl GeneratorSpec {
    /// Default unconditional regression generator: q = 8, two tanh layers of 32.
    pub fn regression(out_dim: usize) -> Self {
        Self {
            noise_dim: 8,
            cond_dim: 0,
            hidden_sizes: vec![32, 32],
            out_dim,
            activation: Activation::Tanh,
        }
    }

    /// Noise dimension follows `q = ceil(ratio * input_dim)`, at least 1.
    pub fn classifier(input_dim: usize, ratio: f64, hidden_sizes: Vec<usize>, classes: usize) -> Self {
        let noise_dim = ((ratio * input_dim as f64).ceil() as usize).max(1);
        Self {
            noise_dim,
            cond_dim: input_dim,
            hidden_sizes,
            out_dim: classes,
            activation: Activation::Tanh,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.cond_dim + self.noise_dim
    }

    /// `(fan_in, fan_out)` of every layer, input to output.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_sizes.len() + 1);
        let mut fan_in = self.input_dim();
        for &h in self.hidden_sizes.iter().chain(std::iter::once(&self.out_dim)) {
            dims.push((fan_in, h));
            fan_in = h;
        }
        dims
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims().iter().map(|(i, o)| i * o + o).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.noise_dim == 0 {
            problems.push("generator.noise_dim must be at least 1".to_string());
        }
        if self.out_dim == 0 {
            problems.push("generator.out_dim must be at least 1".to_string());
        }
        if self.hidden_sizes.iter().any(|&h| h == 0) {
            problems.push("generator.hidden_sizes entries must be positive".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems))
        }
    }
}

pub(crate) fn weight_name(layer: usize) -> String {
    format!("layer{layer:02}.weight")
}

pub(crate) fn bias_name(layer: usize) -> String {
    format!("layer{layer:02}.bias")
}

/// Generator weights: `layerNN.weight` is `[fan_in, fan_out]`,
/// `layerNN.bias` is `[1, fan_out]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorParams {
    pub params: ParamSet,
}

impl GeneratorParams {
    /// Glorot-uniform weights and zero biases, deterministic in `seed`.
    pub fn init(spec: &GeneratorSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = rng::rng_for(seed, streams::INIT, 0);
        let mut params = ParamSet::new();
        for (layer, (fan_in, fan_out)) in spec.layer_dims().into_iter().enumerate() {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit);
            let w: Vec<f64> = (0..fan_in * fan_out).map(|_| rng.sample(dist)).collect();
            params.insert(weight_name(layer), DenseArray::matrix(fan_in, fan_out, w)?);
            params.insert(bias_name(layer), DenseArray::zeros(&[1, fan_out]));
        }
        Ok(Self { params })
    }

    /// Checks that every layer has the shape `spec` implies.
    pub fn check_layout(&self, spec: &GeneratorSpec) -> Result<()> {
        let dims = spec.layer_dims();
        if self.params.len() != 2 * dims.len() {
            return Err(Error::Contract(format!(
                "generator has {} arrays, spec implies {}",
                self.params.len(),
                2 * dims.len()
            )));
        }
        for (layer, (fan_in, fan_out)) in dims.into_iter().enumerate() {
            let w = self.params.get(&weight_name(layer));
            let b = self.params.get(&bias_name(layer));
            let ok = w.is_some_and(|w| w.shape() == [fan_in, fan_out])
                && b.is_some_and(|b| b.shape() == [1, fan_out]);
            if !ok {
                return Err(Error::Contract(format!("layer {layer} does not match the spec")));
            }
        }
        Ok(())
    }

    /// Puts the weights on `tape` as trainable leaves.
    pub fn register(&self, tape: &mut Tape, spec: &GeneratorSpec) -> Result<GeneratorNodes> {
        self.check_layout(spec)?;
        let layers = (0..spec.layer_dims().len())
            .map(|l| {
                let w = tape.param(weight_name(l), self.params.get(&weight_name(l)).unwrap().clone());
                let b = tape.param(bias_name(l), self.params.get(&bias_name(l)).unwrap().clone());
                (w, b)
            })
            .collect();
        Ok(GeneratorNodes {
            spec: spec.clone(),
            layers,
        })
    }
}

/// Generator weights as recorded on a particular tape.
#[derive(Clone, Debug)]
pub struct GeneratorNodes {
    spec: GeneratorSpec,
    layers: Vec<(NodeId, NodeId)>,
}

impl GeneratorNodes {
    /// Binds leaves already on a tape (as returned by [`Tape::params`]) to
    /// the layers of `spec`.
    pub fn from_leaves(leaves: &[(String, NodeId)], spec: &GeneratorSpec) -> Result<Self> {
        let find = |name: String| {
            leaves
                .iter()
                .find(|(n, _)| *n == name)
                .map(|(_, id)| *id)
                .ok_or_else(|| Error::Contract(format!("no leaf named {name}")))
        };
        let layers = (0..spec.layer_dims().len())
            .map(|l| Ok((find(weight_name(l))?, find(bias_name(l))?)))
            .collect::<Result<_>>()?;
        Ok(Self {
            spec: spec.clone(),
            layers,
        })
    }

    pub fn spec(&self) -> &GeneratorSpec {
        &self.spec
    }

    /// Raw output `[batch, out_dim]` for noise `z` and optional covariates,
    /// fed to the first layer as `[cond, z]`.
    pub fn forward(&self, tape: &mut Tape, z: &DenseArray, cond: Option<&DenseArray>) -> Result<NodeId> {
        let input = assemble_input(&self.spec, z, cond)?;
        let batch = input.rows();
        let mut h = tape.constant(input);
        let ones = tape.constant(DenseArray::filled(&[batch, 1], 1.0));
        let last = self.layers.len() - 1;
        for (l, &(w, b)) in self.layers.iter().enumerate() {
            let lin = tape.matmul(h, w)?;
            let bias = tape.matmul(ones, b)?;
            let pre = tape.add(lin, bias)?;
            h = if l == last {
                pre
            } else {
                match self.spec.activation {
                    Activation::Tanh => tape.tanh(pre)?,
                    Activation::Relu => tape.relu(pre)?,
                }
            };
        }
        Ok(h)
    }
}

fn assemble_input(spec: &GeneratorSpec, z: &DenseArray, cond: Option<&DenseArray>) -> Result<DenseArray> {
    if z.ndim() != 2 || z.cols() != spec.noise_dim {
        return Err(Error::ShapeMismatch {
            op: "generator noise",
            left: z.shape().to_vec(),
            right: vec![z.rows(), spec.noise_dim],
        });
    }
    match (spec.cond_dim, cond) {
        (0, None) => Ok(z.clone()),
        (0, Some(c)) => Err(Error::Contract(format!(
            "unconditional generator received covariates of shape {:?}",
            c.shape()
        ))),
        (_, None) => Err(Error::Contract(format!(
            "generator expects {} covariates per row, none supplied",
            spec.cond_dim
        ))),
        (d, Some(c)) => {
            if c.ndim() != 2 || c.cols() != d || c.rows() != z.rows() {
                return Err(Error::ShapeMismatch {
                    op: "generator covariates",
                    left: c.shape().to_vec(),
                    right: vec![z.rows(), d],
                });
            }
            c.hstack(z)
        }
    }
}

/// Raw generator output without gradient bookkeeping.
pub fn evaluate(
    params: &GeneratorParams,
    spec: &GeneratorSpec,
    z: &DenseArray,
    cond: Option<&DenseArray>,
) -> Result<DenseArray> {
    let mut tape = Tape::new();
    let nodes = params.register(&mut tape, spec)?;
    let out = nodes.forward(&mut tape, z, cond)?;
    Ok(tape.value(out).clone())
}

/// A block of standard-normal noise, reproducible from `(seed, batch_index)`.
#[derive(Clone, Debug)]
pub struct NoiseBatch {
    pub values: DenseArray,
    pub seed: u64,
    pub batch_index: u64,
}

impl NoiseBatch {
    pub fn draw(seed: u64, batch_index: u64, rows: usize, noise_dim: usize) -> Self {
        let mut rng = rng::rng_for(seed, streams::NOISE, batch_index);
        let data: Vec<f64> = (0..rows * noise_dim).map(|_| rng.sample(StandardNormal)).collect();
        Self {
            values: DenseArray::matrix(rows, noise_dim, data).expect("noise shape"),
            seed,
            batch_index,
        }
    }
}

/// Number of worker threads: `GPS_THREADS` if set, else available cores.
pub fn worker_threads() -> usize {
    std::env::var("GPS_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

const SHARD: usize = 1024;

/// Draws `n` parameter vectors `theta = link(G(z))` at one conditioning point.
///
/// Noise is generated in fixed shards of 1024 rows with per-shard seeds, so
/// the result does not depend on how many threads evaluate it. When a
/// response scale is given, Gaussian-linear draws are mapped back to the
/// original response units.
pub fn sample_theta(
    params: &GeneratorParams,
    spec: &GeneratorSpec,
    model: &ObservationModel,
    cond: Option<&[f64]>,
    n: usize,
    seed: u64,
    scale: Option<ResponseScale>,
) -> Result<UQSampleSet> {
    if n == 0 {
        return Err(Error::Contract("sample_theta needs at least one draw".into()));
    }
    model.check_output_dim(spec.out_dim)?;
    params.check_layout(spec)?;
    let shards: Vec<(usize, usize)> = (0..n)
        .step_by(SHARD)
        .map(|start| (start, SHARD.min(n - start)))
        .collect();
    let base = rng::derive_seed(seed, streams::SAMPLE_THETA, 0);

    let run = |&(start, rows): &(usize, usize)| -> Result<DenseArray> {
        let z = NoiseBatch::draw(base, (start / SHARD) as u64, rows, spec.noise_dim);
        let cond_block = cond
            .map(|c| DenseArray::matrix(rows, c.len(), c.repeat(rows)))
            .transpose()?;
        let raw = evaluate(params, spec, &z.values, cond_block.as_ref())?;
        model.constrain(&raw, scale)
    };

    let threads = worker_threads().min(shards.len()).max(1);
    let blocks: Vec<Result<DenseArray>> = if threads == 1 {
        shards.iter().map(run).collect()
    } else {
        let mut out: Vec<Option<Result<DenseArray>>> = (0..shards.len()).map(|_| None).collect();
        std::thread::scope(|scope| {
            let chunk = shards.len().div_ceil(threads);
            let handles: Vec<_> = shards
                .chunks(chunk)
                .map(|group| scope.spawn(move || group.iter().map(run).collect::<Vec<_>>()))
                .collect();
            let mut idx = 0;
            for h in handles {
                for r in h.join().expect("sampling thread panicked") {
                    out[idx] = Some(r);
                    idx += 1;
                }
            }
        });
        out.into_iter().map(|r| r.expect("every shard evaluated")).collect()
    };

    let dim = model.constrained_dim();
    let mut data = Vec::with_capacity(n * dim);
    for block in blocks {
        data.extend_from_slice(block?.data());
    }
    UQSampleSet::new(
        DenseArray::matrix(n, dim, data)?,
        model.clone(),
        cond.map(<[f64]>::to_vec),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(q: usize, cond: usize, hidden: Vec<usize>, out: usize) -> GeneratorSpec {
        GeneratorSpec {
            noise_dim: q,
            cond_dim: cond,
            hidden_sizes: hidden,
            out_dim: out,
            activation: Activation::Tanh,
        }
    }

    #[test]
    fn param_count_matches_layer_arithmetic() {
        let s = spec(2, 0, vec![8], 1);
        assert_eq!(s.param_count(), 2 * 8 + 8 + 8 + 1);
        let p = GeneratorParams::init(&s, 3).unwrap();
        assert_eq!(p.params.num_values(), 33);
    }

    #[test]
    fn init_is_deterministic_with_zero_biases_and_glorot_bounds() {
        let s = spec(3, 2, vec![16, 4], 2);
        let a = GeneratorParams::init(&s, 11).unwrap();
        let b = GeneratorParams::init(&s, 11).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, GeneratorParams::init(&s, 12).unwrap());
        for (l, (fi, fo)) in s.layer_dims().into_iter().enumerate() {
            let limit = (6.0 / (fi + fo) as f64).sqrt();
            assert!(a.params.get(&weight_name(l)).unwrap().data().iter().all(|w| w.abs() <= limit));
            assert!(a.params.get(&bias_name(l)).unwrap().data().iter().all(|&b| b == 0.0));
        }
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let s = spec(2, 0, vec![4], 3);
        let mut p = GeneratorParams::init(&s, 0).unwrap();
        p.params.scale(0.0);
        let z = NoiseBatch::draw(5, 0, 6, 2);
        let out = evaluate(&p, &s, &z.values, None).unwrap();
        assert_eq!(out.shape(), &[6, 3]);
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rows_are_evaluated_independently() {
        let s = spec(2, 1, vec![5], 2);
        let p = GeneratorParams::init(&s, 1).unwrap();
        let z1 = DenseArray::matrix(1, 2, vec![0.3, -0.7]).unwrap();
        let c1 = DenseArray::matrix(1, 1, vec![1.5]).unwrap();
        let z3 = DenseArray::matrix(3, 2, [0.3, -0.7].repeat(3)).unwrap();
        let c3 = DenseArray::matrix(3, 1, vec![1.5; 3]).unwrap();
        let one = evaluate(&p, &s, &z1, Some(&c1)).unwrap();
        let three = evaluate(&p, &s, &z3, Some(&c3)).unwrap();
        for r in 0..3 {
            assert_eq!(three.row(r), one.row(0));
        }
    }

    #[test]
    fn covariate_contract_enforced() {
        let s = spec(2, 0, vec![3], 1);
        let p = GeneratorParams::init(&s, 1).unwrap();
        let z = NoiseBatch::draw(1, 0, 2, 2);
        let c = DenseArray::zeros(&[2, 1]);
        assert!(evaluate(&p, &s, &z.values, Some(&c)).is_err());
        let s2 = spec(2, 1, vec![3], 1);
        let p2 = GeneratorParams::init(&s2, 1).unwrap();
        assert!(evaluate(&p2, &s2, &z.values, None).is_err());
        let wrong_noise = DenseArray::zeros(&[2, 3]);
        assert!(evaluate(&p, &s, &wrong_noise, None).is_err());
    }

    #[test]
    fn noise_is_reproducible_per_batch_index() {
        let a = NoiseBatch::draw(9, 4, 3, 2);
        let b = NoiseBatch::draw(9, 4, 3, 2);
        let c = NoiseBatch::draw(9, 5, 3, 2);
        assert_eq!(a.values, b.values);
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn classifier_noise_dim_follows_ratio() {
        assert_eq!(GeneratorSpec::classifier(784, 0.5, vec![64], 10).noise_dim, 392);
        assert_eq!(GeneratorSpec::classifier(784, 0.25, vec![64], 10).noise_dim, 196);
        assert_eq!(GeneratorSpec::classifier(2, 0.25, vec![8], 3).noise_dim, 1);
    }
}
