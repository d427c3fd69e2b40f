use super::{DenseArray, ParamSet};
use crate::error::{Error, Result};

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Primitive operations the tape knows how to differentiate.
///
/// Elementwise binary ops accept equal shapes, or one operand holding a
/// single value which is broadcast against the other.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Op {
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Exp(NodeId),
    Log(NodeId),
    Tanh(NodeId),
    Relu(NodeId),
    /// Softmax over the last axis.
    Softmax(NodeId),
    Sum(NodeId),
    Mean(NodeId),
    /// Squared Euclidean distance along the last axis: `[n, d] x [n, d] -> [n, 1]`.
    SquaredDistance(NodeId, NodeId),
    Negate(NodeId),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::MatMul(..) => "matmul",
            Op::Add(..) => "add",
            Op::Sub(..) => "subtract",
            Op::Mul(..) => "multiply",
            Op::Scale(..) => "scale",
            Op::Exp(_) => "exp",
            Op::Log(_) => "log",
            Op::Tanh(_) => "tanh",
            Op::Relu(_) => "relu",
            Op::Softmax(_) => "softmax",
            Op::Sum(_) => "sum",
            Op::Mean(_) => "mean",
            Op::SquaredDistance(..) => "squared_distance",
            Op::Negate(_) => "negate",
        }
    }

    fn inputs(&self) -> [Option<NodeId>; 2] {
        match *self {
            Op::MatMul(a, b)
            | Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b)
            | Op::SquaredDistance(a, b) => [Some(a), Some(b)],
            Op::Scale(a, _)
            | Op::Exp(a)
            | Op::Log(a)
            | Op::Tanh(a)
            | Op::Relu(a)
            | Op::Softmax(a)
            | Op::Sum(a)
            | Op::Mean(a)
            | Op::Negate(a) => [Some(a), None],
        }
    }
}

#[derive(Clone, Debug)]
enum Kind {
    Param(String),
    Constant,
    Op(Op),
}

#[derive(Clone, Debug)]
struct Node {
    kind: Kind,
    value: DenseArray,
}

/// Linear record of a forward computation, replayed in reverse by
/// [`Tape::backward`].
#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records a trainable leaf; `backward` reports its gradient under `name`.
    pub fn param(&mut self, name: impl Into<String>, value: DenseArray) -> NodeId {
        self.push(Kind::Param(name.into()), value)
    }

    /// Records a leaf that receives no gradient (data, frozen noise).
    pub fn constant(&mut self, value: DenseArray) -> NodeId {
        self.push(Kind::Constant, value)
    }

    pub fn scalar(&mut self, value: f64) -> NodeId {
        self.constant(DenseArray::scalar(value))
    }

    /// Registers every entry of `params` as a trainable leaf.
    pub fn params(&mut self, params: &ParamSet) -> Vec<(String, NodeId)> {
        params
            .iter()
            .map(|(name, value)| (name.clone(), self.param(name.clone(), value.clone())))
            .collect()
    }

    pub fn value(&self, id: NodeId) -> &DenseArray {
        &self.nodes[id.0].value
    }

    fn push(&mut self, kind: Kind, value: DenseArray) -> NodeId {
        self.nodes.push(Node { kind, value });
        NodeId(self.nodes.len() - 1)
    }

    /// Evaluates `op` on already-recorded inputs and appends the result.
    pub fn record(&mut self, op: Op) -> Result<NodeId> {
        for input in op.inputs().into_iter().flatten() {
            if input.0 >= self.nodes.len() {
                return Err(Error::Contract(format!(
                    "{} refers to unknown node {}",
                    op.name(),
                    input.0
                )));
            }
        }
        let value = self.forward(&op)?;
        Ok(self.push(Kind::Op(op), value))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.record(Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.record(Op::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.record(Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.record(Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> Result<NodeId> {
        self.record(Op::Scale(a, factor))
    }

    pub fn exp(&mut self, a: NodeId) -> Result<NodeId> {
        self.record(Op::Exp(a))
    }

    pub fn log(&mut self, a: NodeId) -> Result<NodeId> {
        self.record(Op::Log(a))
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId> {
        self.record(Op::Tanh(a))
    }

    pub fn relu(&mut self, a: NodeId) -> Result<NodeId> {
        self.record(Op::Relu(a))
    }

    pub fn softmax(&mut self, a: NodeId) -> Result<NodeId> {
        self.record(Op::Softmax(a))
    }

    pub fn sum(&mut self, a: NodeId) -> Result<NodeId> {
        self.record(Op::Sum(a))
    }

    pub fn mean(&mut self, a: NodeId) -> Result<NodeId> {
        self.record(Op::Mean(a))
    }

    pub fn squared_distance(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.record(Op::SquaredDistance(a, b))
    }

    pub fn negate(&mut self, a: NodeId) -> Result<NodeId> {
        self.record(Op::Negate(a))
    }

    fn forward(&self, op: &Op) -> Result<DenseArray> {
        let v = |id: NodeId| &self.nodes[id.0].value;
        let out = match *op {
            Op::MatMul(a, b) => v(a).matmul(v(b))?,
            Op::Add(a, b) => broadcast_binary("add", v(a), v(b), |x, y| x + y)?,
            Op::Sub(a, b) => broadcast_binary("subtract", v(a), v(b), |x, y| x - y)?,
            Op::Mul(a, b) => broadcast_binary("multiply", v(a), v(b), |x, y| x * y)?,
            Op::Scale(a, c) => v(a).map(|x| c * x),
            Op::Exp(a) => v(a).map(f64::exp),
            Op::Log(a) => {
                if let Some(bad) = v(a).data().iter().find(|&&x| !(x > 0.0)) {
                    return Err(Error::Domain {
                        op: "log",
                        detail: format!("argument {bad} is not positive"),
                    });
                }
                v(a).map(f64::ln)
            }
            Op::Tanh(a) => v(a).map(f64::tanh),
            Op::Relu(a) => v(a).map(|x| x.max(0.0)),
            Op::Softmax(a) => softmax_rows(v(a)),
            Op::Sum(a) => DenseArray::scalar(v(a).sum()),
            Op::Mean(a) => {
                let x = v(a);
                if x.is_empty() {
                    return Err(Error::Domain {
                        op: "mean",
                        detail: "empty array".into(),
                    });
                }
                DenseArray::scalar(x.sum() / x.len() as f64)
            }
            Op::SquaredDistance(a, b) => {
                let (x, y) = (v(a), v(b));
                if x.shape() != y.shape() {
                    return Err(Error::ShapeMismatch {
                        op: "squared_distance",
                        left: x.shape().to_vec(),
                        right: y.shape().to_vec(),
                    });
                }
                let cols = x.cols().max(1);
                let data: Vec<f64> = x
                    .data()
                    .chunks(cols)
                    .zip(y.data().chunks(cols))
                    .map(|(p, q)| p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum())
                    .collect();
                let rows = data.len();
                DenseArray::new(vec![rows, 1], data)?
            }
            Op::Negate(a) => v(a).map(|x| -x),
        };
        Ok(out)
    }

    /// Reverse pass from a scalar `loss`; returns gradients for every
    /// trainable leaf (zeros for leaves the loss does not depend on).
    pub fn backward(&self, loss: NodeId) -> Result<ParamSet> {
        let grads = self.backward_nodes(loss)?;
        let mut out = ParamSet::new();
        for (idx, node) in self.nodes.iter().enumerate() {
            if let Kind::Param(name) = &node.kind {
                let g = grads[idx]
                    .clone()
                    .unwrap_or_else(|| DenseArray::zeros(node.value.shape()));
                match out.get_mut(name) {
                    Some(existing) => {
                        for (e, x) in existing.data_mut().iter_mut().zip(g.data()) {
                            *e += x;
                        }
                    }
                    None => out.insert(name.clone(), g),
                }
            }
        }
        Ok(out)
    }

    /// Gradient of `loss` with respect to an arbitrary recorded node.
    pub fn gradient_of(&self, loss: NodeId, wrt: NodeId) -> Result<DenseArray> {
        let mut grads = self.backward_nodes(loss)?;
        Ok(grads[wrt.0]
            .take()
            .unwrap_or_else(|| DenseArray::zeros(self.nodes[wrt.0].value.shape())))
    }

    fn backward_nodes(&self, loss: NodeId) -> Result<Vec<Option<DenseArray>>> {
        let loss_value = &self.nodes[loss.0].value;
        let scalar_shape = loss_value.shape().is_empty() || loss_value.shape() == [1];
        if !scalar_shape {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                loss_value.shape()
            )));
        }
        let mut grads: Vec<Option<DenseArray>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(DenseArray::filled(loss_value.shape(), 1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            if let Kind::Op(op) = node.kind {
                for (input, contribution) in self.vjp(&op, &node.value, &g) {
                    accumulate(&mut grads[input.0], contribution);
                }
            }
            grads[idx] = Some(g);
        }
        Ok(grads)
    }

    fn vjp(&self, op: &Op, out: &DenseArray, g: &DenseArray) -> Vec<(NodeId, DenseArray)> {
        let v = |id: NodeId| &self.nodes[id.0].value;
        match *op {
            Op::MatMul(a, b) => {
                let (x, y) = (v(a), v(b));
                let (m, k, n) = (x.shape()[0], x.shape()[1], y.shape()[1]);
                let yt = y.transpose();
                let xt = x.transpose();
                let ga = DenseArray::matmul_raw(g.data(), yt.data(), m, n, k);
                let gb = DenseArray::matmul_raw(xt.data(), g.data(), k, m, n);
                vec![
                    (a, DenseArray::new(vec![m, k], ga).expect("matmul grad shape")),
                    (b, DenseArray::new(vec![k, n], gb).expect("matmul grad shape")),
                ]
            }
            Op::Add(a, b) => vec![
                (a, reduce_to(g.clone(), v(a))),
                (b, reduce_to(g.clone(), v(b))),
            ],
            Op::Sub(a, b) => vec![
                (a, reduce_to(g.clone(), v(a))),
                (b, reduce_to(g.map(|x| -x), v(b))),
            ],
            Op::Mul(a, b) => {
                let (x, y) = (v(a), v(b));
                let ga = broadcast_binary("multiply", g, y, |p, q| p * q).expect("recorded shape");
                let gb = broadcast_binary("multiply", g, x, |p, q| p * q).expect("recorded shape");
                vec![(a, reduce_to(ga, x)), (b, reduce_to(gb, y))]
            }
            Op::Scale(a, c) => vec![(a, g.map(|x| c * x))],
            Op::Exp(a) => vec![(a, zip_map(g, out, |gi, oi| gi * oi))],
            Op::Log(a) => vec![(a, zip_map(g, v(a), |gi, xi| gi / xi))],
            Op::Tanh(a) => vec![(a, zip_map(g, out, |gi, oi| gi * (1.0 - oi * oi)))],
            Op::Relu(a) => vec![(a, zip_map(g, v(a), |gi, xi| if xi > 0.0 { gi } else { 0.0 }))],
            Op::Softmax(a) => {
                let cols = out.cols().max(1);
                let mut data = Vec::with_capacity(out.len());
                for (s, gr) in out.data().chunks(cols).zip(g.data().chunks(cols)) {
                    let dot: f64 = s.iter().zip(gr).map(|(p, q)| p * q).sum();
                    data.extend(s.iter().zip(gr).map(|(si, gi)| si * (gi - dot)));
                }
                vec![(a, DenseArray::new(out.shape().to_vec(), data).expect("softmax grad"))]
            }
            Op::Sum(a) => vec![(a, DenseArray::filled(v(a).shape(), g.data()[0]))],
            Op::Mean(a) => {
                let x = v(a);
                vec![(a, DenseArray::filled(x.shape(), g.data()[0] / x.len() as f64))]
            }
            Op::SquaredDistance(a, b) => {
                let (x, y) = (v(a), v(b));
                let cols = x.cols().max(1);
                let mut ga = Vec::with_capacity(x.len());
                for (row, (p, q)) in x.data().chunks(cols).zip(y.data().chunks(cols)).enumerate() {
                    let gr = g.data()[row];
                    ga.extend(p.iter().zip(q).map(|(pi, qi)| 2.0 * gr * (pi - qi)));
                }
                let ga = DenseArray::new(x.shape().to_vec(), ga).expect("distance grad");
                let gb = ga.map(|t| -t);
                vec![(a, ga), (b, gb)]
            }
            Op::Negate(a) => vec![(a, g.map(|x| -x))],
        }
    }
}

fn accumulate(slot: &mut Option<DenseArray>, contribution: DenseArray) {
    match slot {
        Some(existing) => {
            for (e, c) in existing.data_mut().iter_mut().zip(contribution.data()) {
                *e += c;
            }
        }
        None => *slot = Some(contribution),
    }
}

fn zip_map(a: &DenseArray, b: &DenseArray, f: impl Fn(f64, f64) -> f64) -> DenseArray {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    DenseArray::new(a.shape().to_vec(), data).expect("zip_map shapes agree")
}

/// Sums a gradient down to a broadcast operand's shape.
fn reduce_to(g: DenseArray, target: &DenseArray) -> DenseArray {
    if g.shape() == target.shape() {
        g
    } else {
        DenseArray::filled(target.shape(), g.sum())
    }
}

fn broadcast_binary(
    op: &'static str,
    a: &DenseArray,
    b: &DenseArray,
    f: impl Fn(f64, f64) -> f64,
) -> Result<DenseArray> {
    if a.shape() == b.shape() {
        Ok(zip_map(a, b, f))
    } else if b.is_scalar() {
        let s = b.data()[0];
        Ok(a.map(|x| f(x, s)))
    } else if a.is_scalar() {
        let s = a.data()[0];
        Ok(b.map(|y| f(s, y)))
    } else {
        Err(Error::ShapeMismatch {
            op,
            left: a.shape().to_vec(),
            right: b.shape().to_vec(),
        })
    }
}

fn softmax_rows(x: &DenseArray) -> DenseArray {
    let cols = x.cols().max(1);
    let mut data = Vec::with_capacity(x.len());
    for row in x.data().chunks(cols) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let start = data.len();
        let mut total = 0.0;
        for &v in row {
            let e = (v - max).exp();
            total += e;
            data.push(e);
        }
        data[start..].iter_mut().for_each(|e| *e /= total);
    }
    DenseArray::new(x.shape().to_vec(), data).expect("softmax shape")
}
