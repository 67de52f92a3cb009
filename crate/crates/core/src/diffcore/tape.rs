use std::sync::Arc;

use rand::Rng;

use super::kernels::gemm;
use super::{DiffError, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Operation that produced a recorded value.
#[derive(Clone, Debug)]
pub enum OpKind {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddRow(Var, Var),
    MulCol(Var, Var),
    Relu(Var),
    LeakyRelu(Var, f64),
    Tanh(Var),
    Exp(Var),
    Gather(Var, Arc<Vec<usize>>),
    ConcatRows(Vec<Var>),
    SegmentSum(Var, Arc<Vec<usize>>),
    SegmentMean(Var, Arc<Vec<usize>>, Arc<Vec<f64>>),
    SegmentSoftmax(Var, Arc<Vec<usize>>, usize),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        normalized: Vec<f64>,
        inv_std: Vec<f64>,
    },
    Dropout(Var, Vec<f64>),
    SumAll(Var),
    MeanAll(Var),
}

impl OpKind {
    pub fn inputs(&self) -> Vec<Var> {
        use OpKind::*;
        match self {
            Leaf => vec![],
            MatMul(a, b) | Add(a, b) | Sub(a, b) | Mul(a, b) | AddRow(a, b) | MulCol(a, b) => {
                vec![*a, *b]
            }
            Scale(a, _) | Relu(a) | LeakyRelu(a, _) | Tanh(a) | Exp(a) | Gather(a, _) => vec![*a],
            SegmentSum(a, _) | SegmentMean(a, _, _) | SegmentSoftmax(a, _, _) => vec![*a],
            Dropout(a, _) | SumAll(a) | MeanAll(a) => vec![*a],
            ConcatRows(parts) => parts.clone(),
            LayerNorm { x, gain, bias, .. } => vec![*x, *gain, *bias],
        }
    }
}

struct Node {
    op: OpKind,
    value: Tensor,
    requires_grad: bool,
}

/// Append-only record of a computation, differentiated in reverse.
///
/// Nodes are pushed in evaluation order, so the tape index order is a
/// topological order of the recorded graph.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient of `v`, zero-filled when `v` did not influence the loss.
    pub fn wrt(&self, v: Var) -> Tensor {
        self.get(v)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(&self.shapes[v.0]))
    }
}

fn broadcast_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<Vec<usize>, DiffError> {
    if a.same_shape(b) || b.numel() == 1 {
        Ok(a.shape().to_vec())
    } else if a.numel() == 1 {
        Ok(b.shape().to_vec())
    } else {
        Err(DiffError::shape(op, a.shape(), b.shape()))
    }
}

fn binary(a: &Tensor, b: &Tensor, shape: Vec<usize>, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let n: usize = shape.iter().product();
    let (ad, bd) = (a.data(), b.data());
    let data = (0..n)
        .map(|i| {
            let x = if ad.len() == 1 { ad[0] } else { ad[i] };
            let y = if bd.len() == 1 { bd[0] } else { bd[i] };
            f(x, y)
        })
        .collect();
    Tensor::from_parts(shape, data)
}

fn unary(a: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor::from_parts(a.shape().to_vec(), a.data().iter().map(|&x| f(x)).collect())
}

/// Reduce a broadcast gradient back onto an operand of `numel` entries.
fn reduce_to(grad: Vec<f64>, numel: usize) -> Vec<f64> {
    if grad.len() == numel {
        grad
    } else {
        vec![grad.iter().sum()]
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn op(&self, v: Var) -> &OpKind {
        &self.nodes[v.0].op
    }

    fn push(&mut self, op: OpKind, value: Tensor) -> Var {
        let requires_grad = op
            .inputs()
            .iter()
            .any(|i| self.nodes[i.0].requires_grad);
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Trainable leaf: gradients flow into it.
    pub fn param(&mut self, t: Tensor) -> Var {
        self.nodes.push(Node {
            op: OpKind::Leaf,
            value: t,
            requires_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    /// Constant leaf: no gradient is computed for it.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.nodes.push(Node {
            op: OpKind::Leaf,
            value: t,
            requires_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    fn matrix_dims(&self, v: Var) -> (usize, usize) {
        let t = self.value(v);
        (t.rows(), t.cols())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        let (m, k) = self.matrix_dims(a);
        let (k2, n) = self.matrix_dims(b);
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape().len() != 2 || tb.shape().len() != 2 || k != k2 {
            return Err(DiffError::shape("matmul", ta.shape(), tb.shape()));
        }
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, ta.data(), false, tb.data(), false, 0.0, &mut out);
        Ok(self.push(OpKind::MatMul(a, b), Tensor::from_parts(vec![m, n], out)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        let (ta, tb) = (self.value(a), self.value(b));
        let shape = broadcast_shape("add", ta, tb)?;
        let out = binary(ta, tb, shape, |x, y| x + y);
        Ok(self.push(OpKind::Add(a, b), out))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        let (ta, tb) = (self.value(a), self.value(b));
        let shape = broadcast_shape("sub", ta, tb)?;
        let out = binary(ta, tb, shape, |x, y| x - y);
        Ok(self.push(OpKind::Sub(a, b), out))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        let (ta, tb) = (self.value(a), self.value(b));
        let shape = broadcast_shape("mul", ta, tb)?;
        let out = binary(ta, tb, shape, |x, y| x * y);
        Ok(self.push(OpKind::Mul(a, b), out))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let out = unary(self.value(a), |x| x * factor);
        self.push(OpKind::Scale(a, factor), out)
    }

    /// `x[n, d] + bias[d]`, the bias repeated on every row.
    pub fn add_row(&mut self, x: Var, bias: Var) -> Result<Var, DiffError> {
        let (tx, tb) = (self.value(x), self.value(bias));
        let d = tx.cols();
        if tb.numel() != d {
            return Err(DiffError::shape("add_row", tx.shape(), tb.shape()));
        }
        let b = tb.data();
        let data = tx
            .data()
            .chunks(d.max(1))
            .flat_map(|row| row.iter().zip(b).map(|(v, c)| v + c))
            .collect();
        let out = Tensor::from_parts(tx.shape().to_vec(), data);
        Ok(self.push(OpKind::AddRow(x, bias), out))
    }

    /// `x[n, d] * w[n]`, each row scaled by its own weight.
    pub fn mul_col(&mut self, x: Var, w: Var) -> Result<Var, DiffError> {
        let (tx, tw) = (self.value(x), self.value(w));
        let (n, d) = (tx.rows(), tx.cols());
        if tw.numel() != n {
            return Err(DiffError::shape("mul_col", tx.shape(), tw.shape()));
        }
        let mut data = tx.data().to_vec();
        for (i, row) in data.chunks_mut(d.max(1)).enumerate() {
            let s = tw.data()[i];
            row.iter_mut().for_each(|v| *v *= s);
        }
        let out = Tensor::from_parts(tx.shape().to_vec(), data);
        Ok(self.push(OpKind::MulCol(x, w), out))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = unary(self.value(a), |x| if x > 0.0 { x } else { 0.0 });
        self.push(OpKind::Relu(a), out)
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let out = unary(self.value(a), |x| if x > 0.0 { x } else { slope * x });
        self.push(OpKind::LeakyRelu(a, slope), out)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = unary(self.value(a), f64::tanh);
        self.push(OpKind::Tanh(a), out)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let out = unary(self.value(a), f64::exp);
        self.push(OpKind::Exp(a), out)
    }

    /// Row gather: `out[i] = x[index[i]]`.
    pub fn gather(&mut self, x: Var, index: Arc<Vec<usize>>) -> Result<Var, DiffError> {
        let tx = self.value(x);
        let (n, d) = (tx.rows(), tx.cols());
        let mut data = Vec::with_capacity(index.len() * d);
        for &i in index.iter() {
            if i >= n {
                return Err(DiffError::IndexOutOfRange { index: i, len: n });
            }
            data.extend_from_slice(tx.row(i));
        }
        let out = Tensor::from_parts(vec![index.len(), d], data);
        Ok(self.push(OpKind::Gather(x, index), out))
    }

    /// Stack matrices with equal row width on top of each other.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, DiffError> {
        let first = parts
            .first()
            .ok_or_else(|| DiffError::InvalidShape("concat of zero tensors".into()))?;
        let d = self.value(*first).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let t = self.value(p);
            if t.cols() != d || t.shape().len() != 2 {
                return Err(DiffError::shape("concat_rows", self.value(*first).shape(), t.shape()));
            }
            rows += t.rows();
            data.extend_from_slice(t.data());
        }
        let out = Tensor::from_parts(vec![rows, d], data);
        Ok(self.push(OpKind::ConcatRows(parts.to_vec()), out))
    }

    /// `out[s] = sum of rows e with target[e] == s`; empty segments are zero.
    pub fn segment_sum(
        &mut self,
        values: Var,
        target: Arc<Vec<usize>>,
        num_segments: usize,
    ) -> Result<Var, DiffError> {
        let tv = self.value(values);
        let d = tv.cols();
        if target.len() != tv.rows() {
            return Err(DiffError::shape("segment_sum", tv.shape(), &[target.len()]));
        }
        let mut out = vec![0.0; num_segments * d];
        for (e, &s) in target.iter().enumerate() {
            if s >= num_segments {
                return Err(DiffError::IndexOutOfRange {
                    index: s,
                    len: num_segments,
                });
            }
            let dst = &mut out[s * d..(s + 1) * d];
            for (o, v) in dst.iter_mut().zip(tv.row(e)) {
                *o += v;
            }
        }
        let out = Tensor::from_parts(vec![num_segments, d], out);
        Ok(self.push(OpKind::SegmentSum(values, target), out))
    }

    /// Per-segment mean of rows. Every segment must own at least one row.
    pub fn segment_mean(
        &mut self,
        values: Var,
        segment: Arc<Vec<usize>>,
        num_segments: usize,
    ) -> Result<Var, DiffError> {
        let tv = self.value(values);
        let d = tv.cols();
        if segment.len() != tv.rows() {
            return Err(DiffError::shape("segment_mean", tv.shape(), &[segment.len()]));
        }
        let mut counts = vec![0.0; num_segments];
        let mut out = vec![0.0; num_segments * d];
        for (e, &s) in segment.iter().enumerate() {
            if s >= num_segments {
                return Err(DiffError::IndexOutOfRange {
                    index: s,
                    len: num_segments,
                });
            }
            counts[s] += 1.0;
            for (o, v) in out[s * d..(s + 1) * d].iter_mut().zip(tv.row(e)) {
                *o += v;
            }
        }
        if let Some(empty) = counts.iter().position(|&c| c == 0.0) {
            return Err(DiffError::EmptySegment(empty));
        }
        for (s, row) in out.chunks_mut(d.max(1)).enumerate() {
            row.iter_mut().for_each(|v| *v /= counts[s]);
        }
        let out = Tensor::from_parts(vec![num_segments, d], out);
        Ok(self.push(OpKind::SegmentMean(values, segment, Arc::new(counts)), out))
    }

    /// Softmax of a column of scores within each target segment.
    pub fn segment_softmax(
        &mut self,
        scores: Var,
        segment: Arc<Vec<usize>>,
        num_segments: usize,
    ) -> Result<Var, DiffError> {
        let ts = self.value(scores);
        if ts.cols() != 1 || segment.len() != ts.rows() {
            return Err(DiffError::shape("segment_softmax", ts.shape(), &[segment.len(), 1]));
        }
        let mut max = vec![f64::NEG_INFINITY; num_segments];
        for (e, &s) in segment.iter().enumerate() {
            if s >= num_segments {
                return Err(DiffError::IndexOutOfRange {
                    index: s,
                    len: num_segments,
                });
            }
            max[s] = max[s].max(ts.data()[e]);
        }
        let ex: Vec<f64> = segment
            .iter()
            .enumerate()
            .map(|(e, &s)| (ts.data()[e] - max[s]).exp())
            .collect();
        let mut denom = vec![0.0; num_segments];
        for (e, &s) in segment.iter().enumerate() {
            denom[s] += ex[e];
        }
        let data = segment
            .iter()
            .enumerate()
            .map(|(e, &s)| ex[e] / denom[s])
            .collect();
        let out = Tensor::from_parts(ts.shape().to_vec(), data);
        Ok(self.push(OpKind::SegmentSoftmax(scores, segment, num_segments), out))
    }

    /// Row-wise layer normalization with biased variance.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Result<Var, DiffError> {
        let (tx, tg, tb) = (self.value(x), self.value(gain), self.value(bias));
        let d = tx.cols();
        if d == 0 || tg.numel() != d || tb.numel() != d {
            return Err(DiffError::shape("layer_norm", tx.shape(), tg.shape()));
        }
        let n = tx.rows();
        let mut normalized = Vec::with_capacity(n * d);
        let mut inv_std = Vec::with_capacity(n);
        let mut out = Vec::with_capacity(n * d);
        for row in tx.data().chunks(d) {
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let is = 1.0 / (var + eps).sqrt();
            inv_std.push(is);
            for (j, v) in row.iter().enumerate() {
                let xh = (v - mean) * is;
                normalized.push(xh);
                out.push(xh * tg.data()[j] + tb.data()[j]);
            }
        }
        let out = Tensor::from_parts(tx.shape().to_vec(), out);
        Ok(self.push(
            OpKind::LayerNorm {
                x,
                gain,
                bias,
                normalized,
                inv_std,
            },
            out,
        ))
    }

    /// Inverted dropout. Identity when `training` is false or `rate` is 0.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: Var, rate: f64, rng: &mut R, training: bool) -> Var {
        if !training || rate <= 0.0 {
            return x;
        }
        let keep = 1.0 - rate;
        let scale = 1.0 / keep;
        let mask: Vec<f64> = (0..self.value(x).numel())
            .map(|_| if rng.random::<f64>() < keep { scale } else { 0.0 })
            .collect();
        let out = binary(
            self.value(x),
            &Tensor::from_parts(self.value(x).shape().to_vec(), mask.clone()),
            self.value(x).shape().to_vec(),
            |a, m| a * m,
        );
        self.push(OpKind::Dropout(x, mask), out)
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        self.push(OpKind::SumAll(a), Tensor::scalar(s))
    }

    pub fn mean_all(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let s = t.data().iter().sum::<f64>() / t.numel().max(1) as f64;
        self.push(OpKind::MeanAll(a), Tensor::scalar(s))
    }

    /// Reverse-mode sweep from a scalar loss.
    pub fn backward(&self, loss: Var) -> Result<Gradients, DiffError> {
        let lv = self.value(loss);
        if lv.numel() != 1 {
            return Err(DiffError::NonScalarLoss(lv.shape().to_vec()));
        }
        let count = loss.0 + 1;
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; count];
        grads[loss.0] = Some(vec![1.0]);
        let mut finished: Vec<Option<Tensor>> = vec![None; self.nodes.len()];

        for idx in (0..count).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            for (input, ig) in self.vjp(node, &g) {
                if !self.nodes[input.0].requires_grad {
                    continue;
                }
                match &mut grads[input.0] {
                    Some(acc) => acc.iter_mut().zip(&ig).for_each(|(a, b)| *a += b),
                    slot @ None => *slot = Some(ig),
                }
            }
            if matches!(node.op, OpKind::Leaf) {
                finished[idx] = Some(Tensor::from_parts(node.value.shape().to_vec(), g));
            }
        }
        Ok(Gradients {
            grads: finished,
            shapes: self.nodes.iter().map(|n| n.value.shape().to_vec()).collect(),
        })
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Vector-Jacobian products of one node with respect to its inputs.
    fn vjp(&self, node: &Node, g: &[f64]) -> Vec<(Var, Vec<f64>)> {
        use OpKind::*;
        let out = &node.value;
        match &node.op {
            Leaf => vec![],
            MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
                let mut res = Vec::with_capacity(2);
                if self.wants(*a) {
                    let mut da = vec![0.0; m * k];
                    gemm(m, n, k, g, false, tb.data(), true, 0.0, &mut da);
                    res.push((*a, da));
                }
                if self.wants(*b) {
                    let mut db = vec![0.0; k * n];
                    gemm(k, m, n, ta.data(), true, g, false, 0.0, &mut db);
                    res.push((*b, db));
                }
                res
            }
            Add(a, b) => vec![
                (*a, reduce_to(g.to_vec(), self.value(*a).numel())),
                (*b, reduce_to(g.to_vec(), self.value(*b).numel())),
            ],
            Sub(a, b) => vec![
                (*a, reduce_to(g.to_vec(), self.value(*a).numel())),
                (*b, reduce_to(g.iter().map(|v| -v).collect(), self.value(*b).numel())),
            ],
            Mul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let pick = |t: &Tensor, i: usize| if t.numel() == 1 { t.data()[0] } else { t.data()[i] };
                let da = g.iter().enumerate().map(|(i, v)| v * pick(tb, i)).collect();
                let db = g.iter().enumerate().map(|(i, v)| v * pick(ta, i)).collect();
                vec![(*a, reduce_to(da, ta.numel())), (*b, reduce_to(db, tb.numel()))]
            }
            Scale(a, f) => vec![(*a, g.iter().map(|v| v * f).collect())],
            AddRow(x, bias) => {
                let d = out.cols().max(1);
                let mut db = vec![0.0; d];
                for row in g.chunks(d) {
                    db.iter_mut().zip(row).for_each(|(a, b)| *a += b);
                }
                vec![(*x, g.to_vec()), (*bias, db)]
            }
            MulCol(x, w) => {
                let (tx, tw) = (self.value(*x), self.value(*w));
                let d = tx.cols().max(1);
                let mut dx = g.to_vec();
                let mut dw = vec![0.0; tw.numel()];
                for (i, (grow, xrow)) in g.chunks(d).zip(tx.data().chunks(d)).enumerate() {
                    let s = tw.data()[i];
                    dx[i * d..(i + 1) * d].iter_mut().for_each(|v| *v *= s);
                    dw[i] = grow.iter().zip(xrow).map(|(a, b)| a * b).sum();
                }
                vec![(*x, dx), (*w, dw)]
            }
            Relu(a) => {
                let x = self.value(*a).data();
                vec![(*a, g.iter().zip(x).map(|(v, &xi)| if xi > 0.0 { *v } else { 0.0 }).collect())]
            }
            LeakyRelu(a, slope) => {
                let x = self.value(*a).data();
                vec![(
                    *a,
                    g.iter()
                        .zip(x)
                        .map(|(v, &xi)| if xi > 0.0 { *v } else { slope * v })
                        .collect(),
                )]
            }
            Tanh(a) => vec![(*a, g.iter().zip(out.data()).map(|(v, y)| v * (1.0 - y * y)).collect())],
            Exp(a) => vec![(*a, g.iter().zip(out.data()).map(|(v, y)| v * y).collect())],
            Gather(x, index) => {
                let tx = self.value(*x);
                let d = tx.cols().max(1);
                let mut dx = vec![0.0; tx.numel()];
                for (e, &i) in index.iter().enumerate() {
                    for (a, b) in dx[i * d..(i + 1) * d].iter_mut().zip(&g[e * d..(e + 1) * d]) {
                        *a += b;
                    }
                }
                vec![(*x, dx)]
            }
            ConcatRows(parts) => {
                let mut offset = 0;
                parts
                    .iter()
                    .map(|p| {
                        let n = self.value(*p).numel();
                        let slice = g[offset..offset + n].to_vec();
                        offset += n;
                        (*p, slice)
                    })
                    .collect()
            }
            SegmentSum(x, target) => {
                let d = out.cols().max(1);
                let mut dx = Vec::with_capacity(target.len() * d);
                for &s in target.iter() {
                    dx.extend_from_slice(&g[s * d..(s + 1) * d]);
                }
                vec![(*x, dx)]
            }
            SegmentMean(x, segment, counts) => {
                let d = out.cols().max(1);
                let mut dx = Vec::with_capacity(segment.len() * d);
                for &s in segment.iter() {
                    dx.extend(g[s * d..(s + 1) * d].iter().map(|v| v / counts[s]));
                }
                vec![(*x, dx)]
            }
            SegmentSoftmax(x, segment, num_segments) => {
                let y = out.data();
                let mut dot = vec![0.0; *num_segments];
                for (e, &s) in segment.iter().enumerate() {
                    dot[s] += g[e] * y[e];
                }
                let dx = segment
                    .iter()
                    .enumerate()
                    .map(|(e, &s)| y[e] * (g[e] - dot[s]))
                    .collect();
                vec![(*x, dx)]
            }
            LayerNorm {
                x,
                gain,
                bias,
                normalized,
                inv_std,
            } => {
                let tg = self.value(*gain).data();
                let d = tg.len();
                let mut dgain = vec![0.0; d];
                let mut dbias = vec![0.0; d];
                let mut dx = vec![0.0; g.len()];
                let mut dxhat = vec![0.0; d];
                for (r, (grow, xh)) in g.chunks(d).zip(normalized.chunks(d)).enumerate() {
                    let mut sum_dxhat = 0.0;
                    let mut sum_dxhat_xhat = 0.0;
                    for j in 0..d {
                        dgain[j] += grow[j] * xh[j];
                        dbias[j] += grow[j];
                        dxhat[j] = grow[j] * tg[j];
                        sum_dxhat += dxhat[j];
                        sum_dxhat_xhat += dxhat[j] * xh[j];
                    }
                    let scale = inv_std[r] / d as f64;
                    for j in 0..d {
                        dx[r * d + j] =
                            scale * (d as f64 * dxhat[j] - sum_dxhat - xh[j] * sum_dxhat_xhat);
                    }
                }
                vec![(*x, dx), (*gain, dgain), (*bias, dbias)]
            }
            Dropout(x, mask) => vec![(*x, g.iter().zip(mask).map(|(a, m)| a * m).collect())],
            SumAll(a) => vec![(*a, vec![g[0]; self.value(*a).numel()])],
            MeanAll(a) => {
                let n = self.value(*a).numel();
                vec![(*a, vec![g[0] / n.max(1) as f64; n])]
            }
        }
    }
}
