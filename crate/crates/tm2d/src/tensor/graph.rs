//! Tape-based computation graph.
//!
//! Operations append nodes, so input indices always precede their consumers
//! and the reverse sweep in [`Graph::backward`] is a plain reverse iteration.
//! A graph and its tensors belong to one worker; values can be copied out
//! and sent elsewhere freely.

use super::ops::{self, PadMode};
use super::Tensor;
use crate::error::{Error, Result};

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

#[derive(Debug, Clone)]
enum Op {
    Input,
    Add { a: usize, b: usize },
    AddBias { a: usize, bias: usize },
    Sub { a: usize, b: usize },
    Mul { a: usize, b: usize },
    Scale { a: usize, factor: f64 },
    Relu { a: usize },
    Abs { a: usize },
    Matmul { a: usize, b: usize },
    MatmulNT { a: usize, b: usize },
    Conv1d { x: usize, kernel: usize, stride: usize, pad: (usize, usize) },
    Upsample { x: usize, factor: usize },
    Embedding { table: usize, ids: Vec<usize> },
    LayerNorm { x: usize, gain: usize, bias: usize, eps: f64 },
    MaskedSoftmax { x: usize },
    SoftmaxXent { logits: usize, targets: Vec<usize> },
    MeanAll { a: usize },
    SumAll { a: usize },
    SqSum { a: usize },
    SliceCols { x: usize, start: usize, len: usize },
    ConcatCols { xs: Vec<usize> },
    StraightThrough { x: usize },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    grad: Option<Tensor>,
    requires_grad: bool,
    op: Op,
}

/// Ordered record of primitive operations with their values and gradients.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Insert a leaf value. `requires_grad` marks it as a differentiation target.
    pub fn input(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push(value, requires_grad, Op::Input)
    }

    /// Insert a constant leaf (no gradient).
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.input(value, false)
    }

    /// Forward value of a node.
    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Gradient of a node, populated by [`Graph::backward`].
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.nodes[v.0].grad.as_ref()
    }

    /// Whether the node depends on any differentiable input.
    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor, requires_grad: bool, op: Op) -> Var {
        self.nodes.push(Node {
            value,
            grad: None,
            requires_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn requires(&self, ids: &[usize]) -> bool {
        ids.iter().any(|&i| self.nodes[i].requires_grad)
    }

    fn val(&self, id: usize) -> &Tensor {
        &self.nodes[id].value
    }

    // ---- elementwise and shape ops ----

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let value = self.val(a.0).add_scaled(self.val(b.0), 1.0);
        let req = self.requires(&[a.0, b.0]);
        Ok(self.push(value, req, Op::Add { a: a.0, b: b.0 }))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let value = self.val(a.0).add_scaled(self.val(b.0), -1.0);
        let req = self.requires(&[a.0, b.0]);
        Ok(self.push(value, req, Op::Sub { a: a.0, b: b.0 }))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let (av, bv) = (self.val(a.0), self.val(b.0));
        let data = av
            .data()
            .iter()
            .zip(bv.data())
            .map(|(&x, &y)| x * y)
            .collect();
        let value = Tensor::new(av.shape().to_vec(), data)?;
        let req = self.requires(&[a.0, b.0]);
        Ok(self.push(value, req, Op::Mul { a: a.0, b: b.0 }))
    }

    /// Add a width-c bias row vector to every row of a [r, c] tensor.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (av, bv) = (self.val(a.0), self.val(bias.0));
        if av.rank() != 2 || bv.rank() != 1 || av.cols() != bv.dim(0) {
            return Err(Error::dimension(format!(
                "add_bias expects [r,c] and [c], got {:?} and {:?}",
                av.shape(),
                bv.shape()
            )));
        }
        let c = av.cols();
        let data = av
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| x + bv.data()[i % c])
            .collect();
        let value = Tensor::new(av.shape().to_vec(), data)?;
        let req = self.requires(&[a.0, bias.0]);
        Ok(self.push(value, req, Op::AddBias { a: a.0, bias: bias.0 }))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let value = self.val(a.0).map(|v| v * factor);
        let req = self.requires(&[a.0]);
        self.push(value, req, Op::Scale { a: a.0, factor })
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.val(a.0).map(|v| v.max(0.0));
        let req = self.requires(&[a.0]);
        self.push(value, req, Op::Relu { a: a.0 })
    }

    pub fn abs(&mut self, a: Var) -> Var {
        let value = self.val(a.0).map(f64::abs);
        let req = self.requires(&[a.0]);
        self.push(value, req, Op::Abs { a: a.0 })
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let xv = self.val(x.0);
        if xv.rank() != 2 || start + len > xv.cols() {
            return Err(Error::dimension(format!(
                "slice_cols [{start}, {start}+{len}) out of {:?}",
                xv.shape()
            )));
        }
        let (r, c) = (xv.rows(), xv.cols());
        let mut data = Vec::with_capacity(r * len);
        for i in 0..r {
            data.extend_from_slice(&xv.data()[i * c + start..i * c + start + len]);
        }
        let value = Tensor::new(vec![r, len], data)?;
        let req = self.requires(&[x.0]);
        Ok(self.push(value, req, Op::SliceCols { x: x.0, start, len }))
    }

    pub fn concat_cols(&mut self, xs: &[Var]) -> Result<Var> {
        if xs.is_empty() {
            return Err(Error::Contract("concat_cols of zero tensors".into()));
        }
        let r = self.val(xs[0].0).rows();
        if xs.iter().any(|v| self.val(v.0).rank() != 2 || self.val(v.0).rows() != r) {
            return Err(Error::dimension("concat_cols row counts differ"));
        }
        let total: usize = xs.iter().map(|v| self.val(v.0).cols()).sum();
        let mut data = Vec::with_capacity(r * total);
        for i in 0..r {
            for v in xs {
                data.extend_from_slice(self.val(v.0).row(i));
            }
        }
        let value = Tensor::new(vec![r, total], data)?;
        let ids: Vec<usize> = xs.iter().map(|v| v.0).collect();
        let req = self.requires(&ids);
        Ok(self.push(value, req, Op::ConcatCols { xs: ids }))
    }

    // ---- linear algebra ----

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.val(a.0), self.val(b.0));
        if av.rank() != 2 || bv.rank() != 2 || av.cols() != bv.rows() {
            return Err(Error::dimension(format!(
                "matmul inner dimensions disagree: {:?} x {:?}",
                av.shape(),
                bv.shape()
            )));
        }
        let value = ops::mm(av, bv);
        let req = self.requires(&[a.0, b.0]);
        Ok(self.push(value, req, Op::Matmul { a: a.0, b: b.0 }))
    }

    /// a · bᵀ without materializing the transpose.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.val(a.0), self.val(b.0));
        if av.rank() != 2 || bv.rank() != 2 || av.cols() != bv.cols() {
            return Err(Error::dimension(format!(
                "matmul_nt widths disagree: {:?} x {:?}ᵀ",
                av.shape(),
                bv.shape()
            )));
        }
        let value = ops::mm_nt(av, bv);
        let req = self.requires(&[a.0, b.0]);
        Ok(self.push(value, req, Op::MatmulNT { a: a.0, b: b.0 }))
    }

    pub fn conv1d(&mut self, x: Var, kernel: Var, stride: usize, pad: PadMode) -> Result<Var> {
        let (xv, kv) = (self.val(x.0), self.val(kernel.0));
        if xv.rank() != 2 || kv.rank() != 3 || xv.cols() != kv.dim(1) {
            return Err(Error::dimension(format!(
                "conv1d expects x [T,c_in] and kernel [w,c_in,c_out], got {:?} and {:?}",
                xv.shape(),
                kv.shape()
            )));
        }
        if stride == 0 {
            return Err(Error::config("conv1d stride must be >= 1"));
        }
        let w = kv.dim(0);
        let pad = pad.amounts(w, stride);
        let t = xv.rows();
        if ops::conv1d_out_len(t, w, stride, pad).is_none() {
            return Err(Error::TooShort(format!(
                "conv1d input length {t} shorter than kernel width {w}"
            )));
        }
        let value = ops::conv1d_forward(xv, kv, stride, pad);
        let req = self.requires(&[x.0, kernel.0]);
        Ok(self.push(value, req, Op::Conv1d { x: x.0, kernel: kernel.0, stride, pad }))
    }

    pub fn upsample(&mut self, x: Var, factor: usize) -> Result<Var> {
        let xv = self.val(x.0);
        if xv.rank() != 2 || factor == 0 {
            return Err(Error::dimension(format!(
                "upsample expects rank-2 input and factor >= 1, got {:?} x{factor}",
                xv.shape()
            )));
        }
        let value = ops::upsample_forward(xv, factor);
        let req = self.requires(&[x.0]);
        Ok(self.push(value, req, Op::Upsample { x: x.0, factor }))
    }

    /// Gather rows of `table` by id. Gradients accumulate into the gathered rows.
    pub fn embedding(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let tv = self.val(table.0);
        if tv.rank() != 2 {
            return Err(Error::dimension("embedding table must be rank 2"));
        }
        let (v, d) = (tv.rows(), tv.cols());
        if let Some(&bad) = ids.iter().find(|&&i| i >= v) {
            return Err(Error::Index(format!("embedding id {bad} >= table size {v}")));
        }
        let mut data = Vec::with_capacity(ids.len() * d);
        for &i in ids {
            data.extend_from_slice(tv.row(i));
        }
        let value = Tensor::new(vec![ids.len(), d], data)?;
        let req = self.requires(&[table.0]);
        Ok(self.push(value, req, Op::Embedding { table: table.0, ids: ids.to_vec() }))
    }

    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Result<Var> {
        let (xv, gv, bv) = (self.val(x.0), self.val(gain.0), self.val(bias.0));
        if xv.rank() != 2 || gv.shape() != [xv.cols()] || bv.shape() != [xv.cols()] {
            return Err(Error::dimension(format!(
                "layer_norm expects x [r,c], gain [c], bias [c]; got {:?}, {:?}, {:?}",
                xv.shape(),
                gv.shape(),
                bv.shape()
            )));
        }
        let value = ops::layer_norm_forward(xv, gv, bv, eps);
        let req = self.requires(&[x.0, gain.0, bias.0]);
        Ok(self.push(value, req, Op::LayerNorm { x: x.0, gain: gain.0, bias: bias.0, eps }))
    }

    /// Row softmax with an optional visibility mask (true = visible).
    /// Fully masked rows produce zeros.
    pub fn masked_softmax(&mut self, x: Var, mask: Option<&[bool]>) -> Result<Var> {
        let xv = self.val(x.0);
        if xv.rank() != 2 {
            return Err(Error::dimension("masked_softmax input must be rank 2"));
        }
        if let Some(m) = mask {
            if m.len() != xv.numel() {
                return Err(Error::dimension(format!(
                    "mask length {} != logits size {}",
                    m.len(),
                    xv.numel()
                )));
            }
        }
        let value = ops::masked_softmax_forward(xv, mask);
        let req = self.requires(&[x.0]);
        Ok(self.push(value, req, Op::MaskedSoftmax { x: x.0 }))
    }

    /// Mean over rows of −log softmax(logits)\[target\]; scalar output.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var> {
        let lv = self.val(logits.0);
        if lv.rank() != 2 || lv.rows() != targets.len() {
            return Err(Error::dimension(format!(
                "softmax_cross_entropy expects logits [m,C] with m == targets ({}), got {:?}",
                targets.len(),
                lv.shape()
            )));
        }
        let classes = lv.cols();
        if let Some(&bad) = targets.iter().find(|&&t| t >= classes) {
            return Err(Error::Index(format!(
                "target {bad} out of range for {classes} classes"
            )));
        }
        let value = Tensor::scalar(ops::softmax_xent_forward(lv, targets));
        let req = self.requires(&[logits.0]);
        Ok(self.push(value, req, Op::SoftmaxXent { logits: logits.0, targets: targets.to_vec() }))
    }

    pub fn mean_all(&mut self, a: Var) -> Var {
        let av = self.val(a.0);
        let value = Tensor::scalar(av.data().iter().sum::<f64>() / av.numel() as f64);
        let req = self.requires(&[a.0]);
        self.push(value, req, Op::MeanAll { a: a.0 })
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let value = Tensor::scalar(self.val(a.0).data().iter().sum());
        let req = self.requires(&[a.0]);
        self.push(value, req, Op::SumAll { a: a.0 })
    }

    /// Sum of squared elements (squared L2 norm).
    pub fn sq_sum(&mut self, a: Var) -> Var {
        let value = Tensor::scalar(self.val(a.0).data().iter().map(|&v| v * v).sum());
        let req = self.requires(&[a.0]);
        self.push(value, req, Op::SqSum { a: a.0 })
    }

    /// Forward takes the `target` value; backward passes gradients through to
    /// `x` unchanged, treating the substitution as identity.
    pub fn straight_through(&mut self, x: Var, target: Tensor) -> Result<Var> {
        if self.val(x.0).shape() != target.shape() {
            return Err(Error::dimension(format!(
                "straight_through shapes differ: {:?} vs {:?}",
                self.val(x.0).shape(),
                target.shape()
            )));
        }
        let req = self.requires(&[x.0]);
        Ok(self.push(target, req, Op::StraightThrough { x: x.0 }))
    }

    /// Mean absolute difference — the reconstruction loss.
    pub fn l1_loss(&mut self, a: Var, b: Var) -> Result<Var> {
        let d = self.sub(a, b)?;
        let d = self.abs(d);
        Ok(self.mean_all(d))
    }

    fn same_shape(&self, what: &str, a: Var, b: Var) -> Result<()> {
        let (av, bv) = (self.val(a.0), self.val(b.0));
        if av.shape() != bv.shape() {
            return Err(Error::dimension(format!(
                "{what} shapes differ: {:?} vs {:?}",
                av.shape(),
                bv.shape()
            )));
        }
        Ok(())
    }

    // ---- backward ----

    /// Reverse sweep from a scalar loss. Fills gradients of every node the
    /// loss depends on; forward values are left untouched.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let lv = &self.nodes[loss.0].value;
        if lv.numel() != 1 {
            return Err(Error::Contract(format!(
                "backward requires a scalar loss, got shape {:?}",
                lv.shape()
            )));
        }
        lv.assert_finite("loss")?;
        if !self.nodes[loss.0].requires_grad {
            return Err(Error::Contract(
                "loss does not depend on any differentiable input".into(),
            ));
        }
        for node in &mut self.nodes {
            node.grad = None;
        }
        self.nodes[loss.0].grad = Some(Tensor::scalar(1.0));

        for id in (0..=loss.0).rev() {
            if self.nodes[id].grad.is_none() || !self.nodes[id].requires_grad {
                continue;
            }
            // Inputs of a node always precede it on the tape.
            let (head, tail) = self.nodes.split_at_mut(id);
            let node = &tail[0];
            let gout = node.grad.as_ref().expect("checked above");
            match &node.op {
                Op::Input => {}
                Op::Add { a, b } => {
                    accumulate(head, *a, gout);
                    accumulate(head, *b, gout);
                }
                Op::Sub { a, b } => {
                    accumulate(head, *a, gout);
                    accumulate_scaled(head, *b, gout, -1.0);
                }
                Op::Mul { a, b } => {
                    let da = head[*b].value.mul_elem(gout);
                    accumulate(head, *a, &da);
                    let db = head[*a].value.mul_elem(gout);
                    accumulate(head, *b, &db);
                }
                Op::AddBias { a, bias } => {
                    accumulate(head, *a, gout);
                    let c = head[*bias].value.dim(0);
                    let mut db = vec![0.0; c];
                    for (i, &g) in gout.data().iter().enumerate() {
                        db[i % c] += g;
                    }
                    let db = Tensor::new(vec![c], db).expect("bias grad shape");
                    accumulate(head, *bias, &db);
                }
                Op::Scale { a, factor } => {
                    accumulate_scaled(head, *a, gout, *factor);
                }
                Op::Relu { a } => {
                    let mask = &head[*a].value;
                    let data = mask
                        .data()
                        .iter()
                        .zip(gout.data())
                        .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
                        .collect();
                    let da = Tensor::new(mask.shape().to_vec(), data).expect("relu grad");
                    accumulate(head, *a, &da);
                }
                Op::Abs { a } => {
                    let src = &head[*a].value;
                    let data = src
                        .data()
                        .iter()
                        .zip(gout.data())
                        .map(|(&x, &g)| {
                            if x > 0.0 {
                                g
                            } else if x < 0.0 {
                                -g
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    let da = Tensor::new(src.shape().to_vec(), data).expect("abs grad");
                    accumulate(head, *a, &da);
                }
                Op::Matmul { a, b } => {
                    let da = ops::mm_nt(gout, &head[*b].value);
                    accumulate(head, *a, &da);
                    let db = ops::mm_tn(&head[*a].value, gout);
                    accumulate(head, *b, &db);
                }
                Op::MatmulNT { a, b } => {
                    let da = ops::mm(gout, &head[*b].value);
                    accumulate(head, *a, &da);
                    let db = ops::mm_tn(gout, &head[*a].value);
                    accumulate(head, *b, &db);
                }
                Op::Conv1d { x, kernel, stride, pad } => {
                    let (dx, dk) =
                        ops::conv1d_backward(&head[*x].value, &head[*kernel].value, *stride, *pad, gout);
                    accumulate(head, *x, &dx);
                    accumulate(head, *kernel, &dk);
                }
                Op::Upsample { x, factor } => {
                    let dx = ops::upsample_backward(gout, *factor);
                    accumulate(head, *x, &dx);
                }
                Op::Embedding { table, ids } => {
                    let d = head[*table].value.cols();
                    let rows = head[*table].value.rows();
                    let mut dt = Tensor::zeros(&[rows, d]);
                    for (n, &i) in ids.iter().enumerate() {
                        let src = &gout.data()[n * d..(n + 1) * d];
                        let dst = dt.row_mut(i);
                        for (dv, &sv) in dst.iter_mut().zip(src) {
                            *dv += sv;
                        }
                    }
                    accumulate(head, *table, &dt);
                }
                Op::LayerNorm { x, gain, bias, eps } => {
                    let (dx, dgain, dbias) =
                        ops::layer_norm_backward(&head[*x].value, &head[*gain].value, *eps, gout);
                    accumulate(head, *x, &dx);
                    accumulate(head, *gain, &dgain);
                    accumulate(head, *bias, &dbias);
                }
                Op::MaskedSoftmax { x } => {
                    let dx = ops::masked_softmax_backward(&node.value, gout);
                    accumulate(head, *x, &dx);
                }
                Op::SoftmaxXent { logits, targets } => {
                    let dl = ops::softmax_xent_backward(&head[*logits].value, targets, gout.item());
                    accumulate(head, *logits, &dl);
                }
                Op::MeanAll { a } => {
                    let n = head[*a].value.numel() as f64;
                    let da = Tensor::full(head[*a].value.shape(), gout.item() / n);
                    accumulate(head, *a, &da);
                }
                Op::SumAll { a } => {
                    let da = Tensor::full(head[*a].value.shape(), gout.item());
                    accumulate(head, *a, &da);
                }
                Op::SqSum { a } => {
                    let g = gout.item();
                    let da = head[*a].value.map(|v| 2.0 * v * g);
                    accumulate(head, *a, &da);
                }
                Op::SliceCols { x, start, len } => {
                    let (r, c) = (head[*x].value.rows(), head[*x].value.cols());
                    let mut dx = Tensor::zeros(&[r, c]);
                    for i in 0..r {
                        let src = &gout.data()[i * len..(i + 1) * len];
                        let dst = &mut dx.row_mut(i)[*start..*start + *len];
                        dst.copy_from_slice(src);
                    }
                    accumulate(head, *x, &dx);
                }
                Op::ConcatCols { xs } => {
                    let r = gout.rows();
                    let mut offset = 0;
                    for &xi in xs {
                        let w = head[xi].value.cols();
                        let mut dx = Tensor::zeros(&[r, w]);
                        for i in 0..r {
                            let src = &gout.row(i)[offset..offset + w];
                            dx.row_mut(i).copy_from_slice(src);
                        }
                        accumulate(head, xi, &dx);
                        offset += w;
                    }
                }
                Op::StraightThrough { x } => {
                    accumulate(head, *x, gout);
                }
            }
        }
        Ok(())
    }
}

impl Tensor {
    fn mul_elem(&self, other: &Tensor) -> Tensor {
        debug_assert_eq!(self.shape(), other.shape());
        let data = self
            .data()
            .iter()
            .zip(other.data())
            .map(|(&a, &b)| a * b)
            .collect();
        Tensor::new(self.shape().to_vec(), data).expect("mul_elem shape")
    }
}

fn accumulate(nodes: &mut [Node], id: usize, delta: &Tensor) {
    accumulate_scaled(nodes, id, delta, 1.0)
}

fn accumulate_scaled(nodes: &mut [Node], id: usize, delta: &Tensor, s: f64) {
    let node = &mut nodes[id];
    if !node.requires_grad {
        return;
    }
    match &mut node.grad {
        Some(g) => {
            for (gv, &dv) in g.data_mut().iter_mut().zip(delta.data()) {
                *gv += s * dv;
            }
        }
        None => {
            node.grad = Some(if s == 1.0 { delta.clone() } else { delta.map(|v| s * v) });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_values_and_grads() {
        // A=[[1,2]], B=[[3],[4]] -> [[11]]
        let mut g = Graph::new();
        let a = g.input(Tensor::from_rows(&[vec![1.0, 2.0]]), true);
        let b = g.input(Tensor::new(vec![2, 1], vec![3.0, 4.0]).unwrap(), true);
        let c = g.matmul(a, b).unwrap();
        assert_eq!(g.value(c).data(), &[11.0]);

        let loss = g.sum_all(c);
        g.backward(loss).unwrap();
        // d(sum(AB))/dA = row of column sums of B
        assert_eq!(g.grad(a).unwrap().data(), &[3.0, 4.0]);
        assert_eq!(g.grad(b).unwrap().data(), &[1.0, 2.0]);
    }

    #[test]
    fn matmul_shape_mismatch_reports_both_shapes() {
        let mut g = Graph::new();
        let a = g.input(Tensor::zeros(&[2, 3]), false);
        let b = g.input(Tensor::zeros(&[2, 2]), false);
        let err = g.matmul(a, b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2, 3]") && msg.contains("[2, 2]"), "{msg}");
    }

    #[test]
    fn backward_does_not_touch_forward_values() {
        let mut g = Graph::new();
        let x = g.input(Tensor::new(vec![3], vec![1.0, -2.0, 3.0]).unwrap(), true);
        let y = g.relu(x);
        let before = g.value(y).clone();
        let loss = g.sq_sum(y);
        g.backward(loss).unwrap();
        assert_eq!(g.value(y), &before);
    }

    #[test]
    fn backward_rejects_non_scalar_loss() {
        let mut g = Graph::new();
        let x = g.input(Tensor::zeros(&[2, 2]), true);
        let y = g.relu(x);
        assert!(matches!(g.backward(y), Err(Error::Contract(_))));
    }

    #[test]
    fn straight_through_passes_gradient_unchanged() {
        let mut g = Graph::new();
        let x = g.input(Tensor::new(vec![2], vec![0.3, -0.7]).unwrap(), true);
        let q = Tensor::new(vec![2], vec![1.0, -1.0]).unwrap();
        let st = g.straight_through(x, q.clone()).unwrap();
        assert_eq!(g.value(st), &q);
        let loss = g.sq_sum(st);
        g.backward(loss).unwrap();
        // d(sum q_i^2)/dq = 2q, passed through to x as-is
        assert_eq!(g.grad(x).unwrap().data(), &[2.0, -2.0]);
    }

    #[test]
    fn xent_gradient_is_softmax_minus_onehot() {
        let mut g = Graph::new();
        let logits = g.input(Tensor::from_rows(&[vec![0.0, 0.0]]), true);
        let loss = g.softmax_cross_entropy(logits, &[0]).unwrap();
        g.backward(loss).unwrap();
        let grad = g.grad(logits).unwrap();
        assert!((grad.data()[0] - (-0.5)).abs() < 1e-12);
        assert!((grad.data()[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn embedding_rejects_out_of_range_ids() {
        let mut g = Graph::new();
        let table = g.input(Tensor::zeros(&[4, 2]), true);
        assert!(matches!(g.embedding(table, &[4]), Err(Error::Index(_))));
    }

    #[test]
    fn conv_too_short_input() {
        let mut g = Graph::new();
        let x = g.input(Tensor::zeros(&[2, 1]), false);
        let k = g.input(Tensor::zeros(&[3, 1, 1]), false);
        assert!(matches!(g.conv1d(x, k, 1, PadMode::Valid), Err(Error::TooShort(_))));
    }

    #[test]
    fn slice_concat_roundtrip() {
        let mut g = Graph::new();
        let x = g.input(Tensor::from_rows(&[vec![1.0, 2.0, 3.0, 4.0]]), true);
        let a = g.slice_cols(x, 0, 2).unwrap();
        let b = g.slice_cols(x, 2, 2).unwrap();
        let y = g.concat_cols(&[a, b]).unwrap();
        assert_eq!(g.value(y), g.value(x));
        let loss = g.sq_sum(y);
        g.backward(loss).unwrap();
        assert_eq!(g.grad(x).unwrap().data(), &[2.0, 4.0, 6.0, 8.0]);
    }
}
