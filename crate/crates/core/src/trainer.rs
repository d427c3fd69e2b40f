//! Minibatch stochastic optimization of the MMD objective.

use std::time::Instant;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::diffcore::{NodeId, ParamSet, Tape};
use crate::error::{Error, Result};
use crate::generator::{GeneratorParams, GeneratorSpec};
use crate::mmd::{self, Dataset, KernelConfig, MCConfig};
use crate::obsmodels::{ObservationModel, ResponseScale};
use crate::rng::{self, streams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// `lr0 / sqrt(t)`.
    SqrtDecay,
    Constant,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OptimizerKind {
    Sgd,
    Adam {
        #[serde(default = "beta1")]
        beta1: f64,
        #[serde(default = "beta2")]
        beta2: f64,
        #[serde(default = "adam_eps")]
        eps: f64,
    },
}

fn beta1() -> f64 {
    0.9
}
fn beta2() -> f64 {
    0.999
}
fn adam_eps() -> f64 {
    1e-8
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: beta1(),
            beta2: beta2(),
            eps: adam_eps(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Minibatch size.
    pub batch_size: usize,
    pub mc: MCConfig,
    pub epochs: usize,
    pub lr0: f64,
    pub schedule: Schedule,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    pub kernel: KernelConfig,
    pub log_every: usize,
    /// Gradients with a larger Euclidean norm are rescaled to this norm.
    pub clip_norm: f64,
    /// Zero wall-clock entries in the trace so repeated runs match bit for bit.
    pub deterministic: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 100,
            mc: MCConfig::default(),
            epochs: 50,
            lr0: 0.01,
            schedule: Schedule::SqrtDecay,
            optimizer: OptimizerKind::Sgd,
            seed: 0,
            kernel: KernelConfig::default(),
            log_every: 50,
            clip_norm: 100.0,
            deterministic: false,
        }
    }
}

impl TrainConfig {
    /// Lists every violated constraint.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.batch_size == 0 {
            v.push("train.batch_size must be positive".into());
        }
        v.extend(self.mc.violations());
        if self.epochs == 0 {
            v.push("train.epochs must be at least 1".into());
        }
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            v.push("train.lr0 must be positive".into());
        }
        if !(self.kernel.bandwidth > 0.0 && self.kernel.bandwidth.is_finite()) {
            v.push("train.kernel.bandwidth must be positive".into());
        }
        if !(self.clip_norm > 0.0) {
            v.push("train.clip_norm must be positive".into());
        }
        if self.log_every == 0 {
            v.push("train.log_every must be positive".into());
        }
        if let OptimizerKind::Adam { beta1, beta2, eps } = self.optimizer {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || !(eps > 0.0) {
                v.push("train.optimizer adam coefficients out of range".into());
            }
        }
        v
    }

    pub fn steps_for(&self, n: usize) -> usize {
        self.epochs * n.div_ceil(self.batch_size.max(1))
    }
}

/// Learning rate at step `t` (1-based).
pub fn lr_at(cfg: &TrainConfig, t: usize) -> Result<f64> {
    match cfg.schedule {
        Schedule::SqrtDecay if t == 0 => Err(Error::Contract("the decaying schedule starts at t = 1".into())),
        Schedule::SqrtDecay => Ok(cfg.lr0 / (t as f64).sqrt()),
        Schedule::Constant => Ok(cfg.lr0),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub step: usize,
    pub objective: f64,
    pub grad_norm: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainTrace {
    /// Logged steps, strictly increasing.
    pub entries: Vec<TraceEntry>,
    /// Objective estimate at every step.
    pub objectives: Vec<f64>,
}

impl TrainTrace {
    /// Trailing moving average of the per-step objective.
    pub fn smoothed(&self, window: usize) -> Vec<f64> {
        let w = window.max(1);
        let mut out = Vec::with_capacity(self.objectives.len());
        let mut acc = 0.0;
        for (i, &v) in self.objectives.iter().enumerate() {
            acc += v;
            if i >= w {
                acc -= self.objectives[i - w];
            }
            out.push(acc / (i + 1).min(w) as f64);
        }
        out
    }
}

/// Gradient-based update rule with its running state.
#[derive(Clone, Debug)]
pub struct Optimizer {
    kind: OptimizerKind,
    first: Option<ParamSet>,
    second: Option<ParamSet>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind) -> Self {
        Self {
            kind,
            first: None,
            second: None,
        }
    }

    /// Applies one update with learning rate `lr` at step `t` (1-based).
    pub fn step(&mut self, params: &mut ParamSet, grads: &ParamSet, lr: f64, t: usize) -> Result<()> {
        match self.kind {
            OptimizerKind::Sgd => params.axpy(-lr, grads),
            OptimizerKind::Adam { beta1, beta2, eps } => {
                let m = self.first.get_or_insert_with(|| grads.zeros_like());
                let v = self.second.get_or_insert_with(|| grads.zeros_like());
                if !m.same_layout(grads) || !params.same_layout(grads) {
                    return Err(Error::Contract("gradient layout changed between steps".into()));
                }
                let c1 = 1.0 - beta1.powi(t as i32);
                let c2 = 1.0 - beta2.powi(t as i32);
                let iter = params
                    .iter_mut()
                    .zip(grads.iter())
                    .zip(m.iter_mut().zip(v.iter_mut()));
                for (((_, p), (_, g)), ((_, mm), (_, vv))) in iter {
                    let (p, g) = (p.data_mut(), g.data());
                    let (mm, vv) = (mm.data_mut(), vv.data_mut());
                    for k in 0..p.len() {
                        mm[k] = beta1 * mm[k] + (1.0 - beta1) * g[k];
                        vv[k] = beta2 * vv[k] + (1.0 - beta2) * g[k] * g[k];
                        p[k] -= lr * (mm[k] / c1) / ((vv[k] / c2).sqrt() + eps);
                    }
                }
                Ok(())
            }
        }
    }
}

/// Runs `steps` optimizer steps on the loss built by `objective`.
///
/// `objective(tape, params, t)` records the step-`t` loss (registering the
/// parameters itself) and returns its node.
pub fn optimize<F>(init: ParamSet, cfg: &TrainConfig, steps: usize, mut objective: F) -> Result<(ParamSet, TrainTrace)>
where
    F: FnMut(&mut Tape, &ParamSet, usize) -> Result<NodeId>,
{
    let started = Instant::now();
    let mut params = init;
    let mut optimizer = Optimizer::new(cfg.optimizer);
    let mut trace = TrainTrace::default();
    for t in 1..=steps {
        let lr = lr_at(cfg, t)?;
        let mut tape = Tape::new();
        let loss = objective(&mut tape, &params, t)?;
        let value = tape.value(loss).data()[0];
        let mut grads = tape.backward(loss)?;
        let norm = grads.norm();
        if !value.is_finite() {
            return Err(Error::NonFinite {
                step: t,
                what: "objective",
                lr,
                grad_norm: norm,
            });
        }
        if !norm.is_finite() {
            return Err(Error::NonFinite {
                step: t,
                what: "gradient",
                lr,
                grad_norm: norm,
            });
        }
        if norm > cfg.clip_norm {
            grads.scale(cfg.clip_norm / norm);
        }
        optimizer.step(&mut params, &grads, lr, t)?;
        trace.objectives.push(value);
        if t == 1 || t % cfg.log_every == 0 || t == steps {
            trace.entries.push(TraceEntry {
                step: t,
                objective: value,
                grad_norm: norm,
                seconds: if cfg.deterministic {
                    0.0
                } else {
                    started.elapsed().as_secs_f64()
                },
            });
        }
    }
    Ok((params, trace))
}

/// Trained generator plus what is needed to interpret its output.
#[derive(Clone, Debug)]
pub struct FitResult {
    pub params: GeneratorParams,
    pub trace: TrainTrace,
    /// Set for Gaussian-linear models, which are trained on rescaled responses.
    pub response_scale: Option<ResponseScale>,
}

/// Trains a freshly initialized generator on `data`.
///
/// Each step draws `batch_size` distinct indices uniformly, builds the
/// objective (closed form for discrete models, Monte Carlo otherwise) and
/// takes one optimizer step; training stops after
/// `epochs * ceil(n / batch_size)` steps.
pub fn fit(data: &Dataset, spec: &GeneratorSpec, model: &ObservationModel, cfg: &TrainConfig) -> Result<FitResult> {
    let init = GeneratorParams::init(spec, rng::derive_seed(cfg.seed, streams::INIT, 0))?;
    fit_from(init, data, spec, model, cfg)
}

/// As [`fit`], starting from given weights.
pub fn fit_from(
    init: GeneratorParams,
    data: &Dataset,
    spec: &GeneratorSpec,
    model: &ObservationModel,
    cfg: &TrainConfig,
) -> Result<FitResult> {
    spec.validate()?;
    model.check_output_dim(spec.out_dim)?;
    data.check(model, spec.cond_dim)?;
    init.check_layout(spec)?;
    let mut problems: Vec<String> = cfg.violations().into_iter().filter(|v| !v.contains("epochs")).collect();
    if cfg.batch_size > data.len() {
        problems.push(format!(
            "train.batch_size {} exceeds the {} observations",
            cfg.batch_size,
            data.len()
        ));
    }
    if !problems.is_empty() {
        return Err(Error::InvalidConfig(problems));
    }

    let (data, response_scale) = match model {
        ObservationModel::GaussianLinear { .. } => {
            let scale = ResponseScale::from_responses(&data.y);
            let mut scaled = data.clone();
            scaled.y = scale.apply(&data.y);
            (scaled, Some(scale))
        }
        _ => (data.clone(), None),
    };

    let n = data.len();
    let steps = cfg.steps_for(n);
    let (params, trace) = optimize(init.params, cfg, steps, |tape, params, t| {
        let mut sub_rng = rng::rng_for(cfg.seed, streams::SUBSAMPLE, t as u64);
        let idx = index::sample(&mut sub_rng, n, cfg.batch_size).into_vec();
        let batch = data.select(&idx);
        let gen = GeneratorParams { params: params.clone() }.register(tape, spec)?;
        let step_seed = rng::derive_seed(cfg.seed, streams::NOISE, t as u64);
        let objective = if model.is_discrete() {
            mmd::exact_objective(tape, &batch, &gen, model, &cfg.kernel, cfg.mc, step_seed)?
        } else {
            mmd::mc_objective(tape, &batch, &gen, model, &cfg.kernel, cfg.mc, step_seed)?
        };
        Ok(objective.value)
    })?;
    Ok(FitResult {
        params: GeneratorParams { params },
        trace,
        response_scale,
    })
}
