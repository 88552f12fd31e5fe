//! Append-only computation tape. Every primitive records its operands and
//! output as it executes; because construction is append-only, walking the
//! node list in reverse index order visits each node after all of its
//! consumers, which is exactly the order reverse-mode propagation needs.

use crate::error::{Error, Result};

use super::kernels;
use super::{numel, Scalar};

/// Probabilities are floored at this value before the log in cross-entropy,
/// so a confident wrong prediction cannot produce -log 0.
pub const PROB_FLOOR: f64 = 1e-12;

/// Handle to a tensor recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

enum Op<E: Scalar> {
    Leaf,
    MatMul { lhs: NodeId, rhs: NodeId },
    Add { lhs: NodeId, rhs: NodeId },
    AddRowBias { input: NodeId, bias: NodeId },
    Relu { input: NodeId },
    MeanPool { input: NodeId },
    TemporalConv { input: NodeId, kernel: NodeId },
    SpatialMix { adjacency: NodeId, input: NodeId },
    ChannelMap { input: NodeId, weight: NodeId },
    Softmax { input: NodeId },
    CrossEntropy { probs: NodeId, labels: Vec<u32> },
    SumAll { input: NodeId },
    Scale { input: NodeId, factor: E },
}

struct Node<E: Scalar> {
    shape: Vec<usize>,
    values: Vec<E>,
    requires_grad: bool,
    op: Op<E>,
}

pub struct Tape<E: Scalar> {
    grad_enabled: bool,
    nodes: Vec<Node<E>>,
    grads: Vec<Option<Vec<E>>>,
}

impl<E: Scalar> Tape<E> {
    /// A fresh tape. With `grad_enabled = false` the primitives still
    /// execute (for evaluation passes) but nothing can be differentiated.
    pub fn new(grad_enabled: bool) -> Self {
        Tape {
            grad_enabled,
            nodes: Vec::new(),
            grads: Vec::new(),
        }
    }

    pub fn grad_enabled(&self) -> bool {
        self.grad_enabled
    }

    fn push(&mut self, shape: Vec<usize>, values: Vec<E>, requires_grad: bool, op: Op<E>) -> NodeId {
        debug_assert_eq!(values.len(), numel(&shape));
        self.nodes.push(Node {
            shape,
            values,
            requires_grad: requires_grad && self.grad_enabled,
            op,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// Record an input tensor. `requires_grad` marks it as a destination
    /// for backward propagation (model parameters, typically).
    pub fn leaf(&mut self, shape: &[usize], values: Vec<E>, requires_grad: bool) -> Result<NodeId> {
        if values.len() != numel(shape) {
            return Err(Error::Dimension {
                op: "leaf",
                left: shape.to_vec(),
                right: vec![values.len()],
            });
        }
        Ok(self.push(shape.to_vec(), values, requires_grad, Op::Leaf))
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        &self.nodes[id.0].shape
    }

    pub fn values(&self, id: NodeId) -> &[E] {
        &self.nodes[id.0].values
    }

    /// Value of a scalar (single-element) node.
    pub fn scalar(&self, id: NodeId) -> Result<E> {
        let node = &self.nodes[id.0];
        if node.values.len() != 1 {
            return Err(Error::Usage(format!(
                "scalar() on tensor of shape {:?}",
                node.shape
            )));
        }
        Ok(node.values[0])
    }

    /// Gradient of the last `backward` target w.r.t. this node, if the node
    /// participates in differentiation.
    pub fn grad(&self, id: NodeId) -> Option<&[E]> {
        self.grads.get(id.0).and_then(|g| g.as_deref())
    }

    fn requires(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|id| self.nodes[id.0].requires_grad)
    }

    // ---- primitives ----

    /// 2-D matrix product: [m,k] · [k,n] -> [m,n].
    pub fn matmul(&mut self, lhs: NodeId, rhs: NodeId) -> Result<NodeId> {
        let (ls, rs) = (self.shape(lhs).to_vec(), self.shape(rhs).to_vec());
        if ls.len() != 2 || rs.len() != 2 || ls[1] != rs[0] {
            return Err(Error::Dimension {
                op: "matmul",
                left: ls,
                right: rs,
            });
        }
        let (m, k, n) = (ls[0], ls[1], rs[1]);
        let mut out = vec![E::zero(); m * n];
        kernels::mm_nn(self.values(lhs), self.values(rhs), &mut out, m, k, n);
        let rg = self.requires(&[lhs, rhs]);
        Ok(self.push(vec![m, n], out, rg, Op::MatMul { lhs, rhs }))
    }

    /// Elementwise sum of two same-shape tensors.
    pub fn add(&mut self, lhs: NodeId, rhs: NodeId) -> Result<NodeId> {
        if self.shape(lhs) != self.shape(rhs) {
            return Err(Error::Dimension {
                op: "add",
                left: self.shape(lhs).to_vec(),
                right: self.shape(rhs).to_vec(),
            });
        }
        let out: Vec<E> = self
            .values(lhs)
            .iter()
            .zip(self.values(rhs))
            .map(|(&a, &b)| a + b)
            .collect();
        let shape = self.shape(lhs).to_vec();
        let rg = self.requires(&[lhs, rhs]);
        Ok(self.push(shape, out, rg, Op::Add { lhs, rhs }))
    }

    /// Add a bias vector along the last axis.
    pub fn add_row_bias(&mut self, input: NodeId, bias: NodeId) -> Result<NodeId> {
        let xs = self.shape(input).to_vec();
        let bs = self.shape(bias).to_vec();
        let c = *xs.last().unwrap_or(&0);
        if xs.is_empty() || bs != vec![c] {
            return Err(Error::Dimension {
                op: "add_row_bias",
                left: xs,
                right: bs,
            });
        }
        let bias_vals = self.values(bias).to_vec();
        let out: Vec<E> = self
            .values(input)
            .chunks(c)
            .flat_map(|row| row.iter().zip(&bias_vals).map(|(&x, &b)| x + b))
            .collect();
        let rg = self.requires(&[input, bias]);
        Ok(self.push(xs, out, rg, Op::AddRowBias { input, bias }))
    }

    /// Elementwise max(x, 0).
    pub fn relu(&mut self, input: NodeId) -> Result<NodeId> {
        let out: Vec<E> = self
            .values(input)
            .iter()
            .map(|&x| if x > E::zero() { x } else { E::zero() })
            .collect();
        let shape = self.shape(input).to_vec();
        let rg = self.requires(&[input]);
        Ok(self.push(shape, out, rg, Op::Relu { input }))
    }

    /// Mean over all middle axes: [b, m..., c] -> [b, c]. Rank must be at
    /// least 3.
    pub fn mean_pool(&mut self, input: NodeId) -> Result<NodeId> {
        let xs = self.shape(input).to_vec();
        if xs.len() < 3 {
            return Err(Error::Dimension {
                op: "mean_pool",
                left: xs,
                right: vec![],
            });
        }
        let b = xs[0];
        let c = *xs.last().unwrap();
        let m = numel(&xs) / (b * c);
        let inv = E::from_f64(1.0 / m as f64);
        let mut out = vec![E::zero(); b * c];
        for (bi, x_b) in self.values(input).chunks(m * c).enumerate() {
            let out_b = &mut out[bi * c..(bi + 1) * c];
            for row in x_b.chunks(c) {
                for (o, &x) in out_b.iter_mut().zip(row) {
                    *o += x;
                }
            }
            for o in out_b.iter_mut() {
                *o *= inv;
            }
        }
        let rg = self.requires(&[input]);
        Ok(self.push(vec![b, c], out, rg, Op::MeanPool { input }))
    }

    /// Temporal convolution across frames, zero-padded to length T.
    /// Input [b,t,v,cin], kernel [kt,cin,cout] with odd kt <= t.
    pub fn conv1d_temporal(&mut self, input: NodeId, kernel: NodeId) -> Result<NodeId> {
        let xs = self.shape(input).to_vec();
        let ks = self.shape(kernel).to_vec();
        let ok = xs.len() == 4 && ks.len() == 3 && ks[1] == xs[3] && ks[0] % 2 == 1 && ks[0] <= xs[1];
        if !ok {
            return Err(Error::Dimension {
                op: "conv1d_temporal",
                left: xs,
                right: ks,
            });
        }
        let (b, t, v, cin) = (xs[0], xs[1], xs[2], xs[3]);
        let (kt, cout) = (ks[0], ks[2]);
        let mut out = vec![E::zero(); b * t * v * cout];
        kernels::temporal_conv(
            self.values(input),
            self.values(kernel),
            &mut out,
            b,
            t,
            v,
            cin,
            cout,
            kt,
        );
        let rg = self.requires(&[input, kernel]);
        Ok(self.push(vec![b, t, v, cout], out, rg, Op::TemporalConv { input, kernel }))
    }

    /// Per-frame graph mixing: out[b,t] = adjacency · x[b,t] for
    /// adjacency [v,v] and x [b,t,v,c].
    pub fn spatial_mix(&mut self, adjacency: NodeId, input: NodeId) -> Result<NodeId> {
        let asp = self.shape(adjacency).to_vec();
        let xs = self.shape(input).to_vec();
        let ok = asp.len() == 2 && asp[0] == asp[1] && xs.len() == 4 && xs[2] == asp[0];
        if !ok {
            return Err(Error::Dimension {
                op: "spatial_mix",
                left: asp,
                right: xs,
            });
        }
        let (b, t, v, c) = (xs[0], xs[1], xs[2], xs[3]);
        let mut out = vec![E::zero(); b * t * v * c];
        {
            let adj = self.values(adjacency);
            let x = self.values(input);
            for (out_bt, x_bt) in out.chunks_mut(v * c).zip(x.chunks(v * c)) {
                kernels::mm_nn(adj, x_bt, out_bt, v, v, c);
            }
            let _ = (b, t);
        }
        let rg = self.requires(&[adjacency, input]);
        Ok(self.push(xs, out, rg, Op::SpatialMix { adjacency, input }))
    }

    /// Last-axis linear map: [..., cin] · [cin, cout] -> [..., cout].
    pub fn channel_map(&mut self, input: NodeId, weight: NodeId) -> Result<NodeId> {
        let xs = self.shape(input).to_vec();
        let ws = self.shape(weight).to_vec();
        if xs.is_empty() || ws.len() != 2 || *xs.last().unwrap() != ws[0] {
            return Err(Error::Dimension {
                op: "channel_map",
                left: xs,
                right: ws,
            });
        }
        let cin = ws[0];
        let cout = ws[1];
        let rows = numel(&xs) / cin;
        let mut out = vec![E::zero(); rows * cout];
        kernels::mm_nn(self.values(input), self.values(weight), &mut out, rows, cin, cout);
        let mut out_shape = xs;
        *out_shape.last_mut().unwrap() = cout;
        let rg = self.requires(&[input, weight]);
        Ok(self.push(out_shape, out, rg, Op::ChannelMap { input, weight }))
    }

    /// Max-shifted softmax along the last axis.
    pub fn softmax(&mut self, input: NodeId) -> Result<NodeId> {
        let xs = self.shape(input).to_vec();
        if xs.is_empty() {
            return Err(Error::Dimension {
                op: "softmax",
                left: xs,
                right: vec![],
            });
        }
        if self.values(input).iter().any(|x| x.is_nan()) {
            return Err(Error::Numeric("softmax input contains NaN".into()));
        }
        let k = *xs.last().unwrap();
        let mut out = Vec::with_capacity(self.values(input).len());
        for row in self.values(input).chunks(k) {
            out.extend(softmax_values(row));
        }
        let rg = self.requires(&[input]);
        Ok(self.push(xs, out, rg, Op::Softmax { input }))
    }

    /// Mean cross-entropy of probability rows against 1-based class labels.
    /// `probs` is [k] with one label or [r,k] with r labels; the result is a
    /// scalar. Probabilities are floored at [`PROB_FLOOR`] before the log.
    pub fn cross_entropy(&mut self, probs: NodeId, labels: &[u32]) -> Result<NodeId> {
        let ps = self.shape(probs).to_vec();
        let (rows, k) = match ps.len() {
            1 => (1, ps[0]),
            2 => (ps[0], ps[1]),
            _ => {
                return Err(Error::Dimension {
                    op: "cross_entropy",
                    left: ps,
                    right: vec![labels.len()],
                })
            }
        };
        if labels.len() != rows {
            return Err(Error::Dimension {
                op: "cross_entropy",
                left: ps,
                right: vec![labels.len()],
            });
        }
        for &label in labels {
            if label < 1 || label as usize > k {
                return Err(Error::Range(format!(
                    "class label {label} outside [1, {k}]"
                )));
            }
        }
        let floor = E::from_f64(PROB_FLOOR);
        let mut total = E::zero();
        for (row, &label) in self.values(probs).chunks(k).zip(labels) {
            let p = row[label as usize - 1];
            let p = if p > floor { p } else { floor };
            total += -p.ln();
        }
        let loss = total * E::from_f64(1.0 / rows as f64);
        let rg = self.requires(&[probs]);
        Ok(self.push(
            vec![],
            vec![loss],
            rg,
            Op::CrossEntropy {
                probs,
                labels: labels.to_vec(),
            },
        ))
    }

    /// Sum of all elements, as a scalar node.
    pub fn sum_all(&mut self, input: NodeId) -> Result<NodeId> {
        let mut acc = E::zero();
        for &x in self.values(input) {
            acc += x;
        }
        let rg = self.requires(&[input]);
        Ok(self.push(vec![], vec![acc], rg, Op::SumAll { input }))
    }

    /// Multiply by a constant.
    pub fn scale(&mut self, input: NodeId, factor: E) -> Result<NodeId> {
        let out: Vec<E> = self.values(input).iter().map(|&x| x * factor).collect();
        let shape = self.shape(input).to_vec();
        let rg = self.requires(&[input]);
        Ok(self.push(shape, out, rg, Op::Scale { input, factor }))
    }

    // ---- backward ----

    /// Populate gradients of `loss` w.r.t. every grad-requiring node.
    /// Nodes that do not influence the loss end up with zero gradients.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        if !self.grad_enabled {
            return Err(Error::Usage(
                "backward on a tape created without gradients".into(),
            ));
        }
        let loss_node = &self.nodes[loss.0];
        if loss_node.values.len() != 1 {
            return Err(Error::Usage(format!(
                "backward target must be a scalar, got shape {:?}",
                loss_node.shape
            )));
        }
        self.grads = self
            .nodes
            .iter()
            .map(|n| {
                if n.requires_grad {
                    Some(vec![E::zero(); n.values.len()])
                } else {
                    None
                }
            })
            .collect();
        if let Some(g) = self.grads[loss.0].as_mut() {
            g[0] = E::one();
        }
        for i in (0..self.nodes.len()).rev() {
            if self.grads[i].is_none() {
                continue;
            }
            self.step_backward(i);
        }
        Ok(())
    }

    fn step_backward(&mut self, i: usize) {
        // All operand indices precede i (append-only tape), so the operand
        // gradients live strictly left of the output gradient.
        let (left, right) = self.grads.split_at_mut(i);
        let grad_out: &[E] = match right[0].as_deref() {
            Some(g) => g,
            None => return,
        };
        let node = &self.nodes[i];
        let nodes = &self.nodes;
        let acc = |store: &mut [Option<Vec<E>>], id: NodeId, f: &mut dyn FnMut(&mut [E])| {
            if let Some(g) = store[id.0].as_deref_mut() {
                f(g);
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul { lhs, rhs } => {
                let (m, k) = (nodes[lhs.0].shape[0], nodes[lhs.0].shape[1]);
                let n = nodes[rhs.0].shape[1];
                acc(left, *lhs, &mut |g| {
                    kernels::mm_nt(grad_out, &nodes[rhs.0].values, g, m, k, n);
                });
                acc(left, *rhs, &mut |g| {
                    kernels::mm_tn(&nodes[lhs.0].values, grad_out, g, m, k, n);
                });
            }
            Op::Add { lhs, rhs } => {
                for id in [*lhs, *rhs] {
                    acc(left, id, &mut |g| {
                        for (gi, &go) in g.iter_mut().zip(grad_out) {
                            *gi += go;
                        }
                    });
                }
            }
            Op::AddRowBias { input, bias } => {
                let c = *nodes[bias.0].shape.first().unwrap();
                acc(left, *input, &mut |g| {
                    for (gi, &go) in g.iter_mut().zip(grad_out) {
                        *gi += go;
                    }
                });
                acc(left, *bias, &mut |g| {
                    for row in grad_out.chunks(c) {
                        for (gi, &go) in g.iter_mut().zip(row) {
                            *gi += go;
                        }
                    }
                });
            }
            Op::Relu { input } => {
                let x = &nodes[input.0].values;
                acc(left, *input, &mut |g| {
                    for ((gi, &go), &xv) in g.iter_mut().zip(grad_out).zip(x) {
                        if xv > E::zero() {
                            *gi += go;
                        }
                    }
                });
            }
            Op::MeanPool { input } => {
                let xs = &nodes[input.0].shape;
                let b = xs[0];
                let c = *xs.last().unwrap();
                let m = numel(xs) / (b * c);
                let inv = E::from_f64(1.0 / m as f64);
                acc(left, *input, &mut |g| {
                    for (bi, g_b) in g.chunks_mut(m * c).enumerate() {
                        let go_b = &grad_out[bi * c..(bi + 1) * c];
                        for row in g_b.chunks_mut(c) {
                            for (gi, &go) in row.iter_mut().zip(go_b) {
                                *gi += go * inv;
                            }
                        }
                    }
                });
            }
            Op::TemporalConv { input, kernel } => {
                let xs = &nodes[input.0].shape;
                let ks = &nodes[kernel.0].shape;
                let (b, t, v, cin) = (xs[0], xs[1], xs[2], xs[3]);
                let (kt, cout) = (ks[0], ks[2]);
                acc(left, *input, &mut |g| {
                    kernels::temporal_conv_grad_input(
                        grad_out,
                        &nodes[kernel.0].values,
                        g,
                        b,
                        t,
                        v,
                        cin,
                        cout,
                        kt,
                    );
                });
                acc(left, *kernel, &mut |g| {
                    kernels::temporal_conv_grad_kernel(
                        &nodes[input.0].values,
                        grad_out,
                        g,
                        b,
                        t,
                        v,
                        cin,
                        cout,
                        kt,
                    );
                });
            }
            Op::SpatialMix { adjacency, input } => {
                let xs = &nodes[input.0].shape;
                let (v, c) = (xs[2], xs[3]);
                acc(left, *input, &mut |g| {
                    let adj = &nodes[adjacency.0].values;
                    for (g_bt, go_bt) in g.chunks_mut(v * c).zip(grad_out.chunks(v * c)) {
                        kernels::mm_tn(adj, go_bt, g_bt, v, v, c);
                    }
                });
                acc(left, *adjacency, &mut |g| {
                    let x = &nodes[input.0].values;
                    for (x_bt, go_bt) in x.chunks(v * c).zip(grad_out.chunks(v * c)) {
                        kernels::mm_nt(go_bt, x_bt, g, v, v, c);
                    }
                });
            }
            Op::ChannelMap { input, weight } => {
                let ws = &nodes[weight.0].shape;
                let (cin, cout) = (ws[0], ws[1]);
                let rows = numel(&nodes[input.0].shape) / cin;
                acc(left, *input, &mut |g| {
                    kernels::mm_nt(grad_out, &nodes[weight.0].values, g, rows, cin, cout);
                });
                acc(left, *weight, &mut |g| {
                    kernels::mm_tn(&nodes[input.0].values, grad_out, g, rows, cin, cout);
                });
            }
            Op::Softmax { input } => {
                let k = *node.shape.last().unwrap();
                let y = &node.values;
                acc(left, *input, &mut |g| {
                    for ((g_row, go_row), y_row) in
                        g.chunks_mut(k).zip(grad_out.chunks(k)).zip(y.chunks(k))
                    {
                        let mut dot = E::zero();
                        for (&go, &yv) in go_row.iter().zip(y_row) {
                            dot += go * yv;
                        }
                        for ((gi, &go), &yv) in g_row.iter_mut().zip(go_row).zip(y_row) {
                            *gi += yv * (go - dot);
                        }
                    }
                });
            }
            Op::CrossEntropy { probs, labels } => {
                let ps = &nodes[probs.0].shape;
                let k = *ps.last().unwrap();
                let rows = labels.len();
                let go = grad_out[0];
                let floor = E::from_f64(PROB_FLOOR);
                let inv_rows = E::from_f64(1.0 / rows as f64);
                let p_vals = &nodes[probs.0].values;
                acc(left, *probs, &mut |g| {
                    for (r, &label) in labels.iter().enumerate() {
                        let idx = r * k + label as usize - 1;
                        let p = p_vals[idx];
                        if p > floor {
                            g[idx] += -(go * inv_rows) / p;
                        }
                    }
                });
            }
            Op::SumAll { input } => {
                let go = grad_out[0];
                acc(left, *input, &mut |g| {
                    for gi in g.iter_mut() {
                        *gi += go;
                    }
                });
            }
            Op::Scale { input, factor } => {
                let f = *factor;
                acc(left, *input, &mut |g| {
                    for (gi, &go) in g.iter_mut().zip(grad_out) {
                        *gi += go * f;
                    }
                });
            }
        }
    }
}

/// Max-shifted softmax of one row of logits.
pub fn softmax_values<E: Scalar>(logits: &[E]) -> Vec<E> {
    let mut max = E::neg_infinity();
    for &x in logits {
        if x > max {
            max = x;
        }
    }
    let mut out: Vec<E> = logits.iter().map(|&x| (x - max).exp()).collect();
    let mut sum = E::zero();
    for &e in &out {
        sum += e;
    }
    let inv = E::one() / sum;
    for e in out.iter_mut() {
        *e *= inv;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf64(tape: &mut Tape<f64>, shape: &[usize], values: &[f64], rg: bool) -> NodeId {
        tape.leaf(shape, values.to_vec(), rg).unwrap()
    }

    #[test]
    fn matmul_identity() {
        let mut tape = Tape::<f64>::new(false);
        let eye = leaf64(&mut tape, &[3, 3], &[1., 0., 0., 0., 1., 0., 0., 0., 1.], false);
        let x = leaf64(&mut tape, &[3, 2], &[1., 2., 3., 4., 5., 6.], false);
        let y = tape.matmul(eye, x).unwrap();
        assert_eq!(tape.values(y), &[1., 2., 3., 4., 5., 6.]);
    }

    #[test]
    fn matmul_shape_mismatch_reports_both_shapes() {
        let mut tape = Tape::<f64>::new(false);
        let a = leaf64(&mut tape, &[2, 3], &[0.; 6], false);
        let b = leaf64(&mut tape, &[2, 2], &[0.; 4], false);
        let err = tape.matmul(a, b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2, 3]") && msg.contains("[2, 2]"), "{msg}");
    }

    #[test]
    fn relu_definition() {
        let mut tape = Tape::<f64>::new(false);
        let x = leaf64(&mut tape, &[3], &[-1., 0., 2.], false);
        let y = tape.relu(x).unwrap();
        assert_eq!(tape.values(y), &[0., 0., 2.]);
    }

    #[test]
    fn mean_pool_of_constant_is_constant() {
        let mut tape = Tape::<f64>::new(false);
        let x = leaf64(&mut tape, &[2, 3, 4, 2], &[0.75; 48], false);
        let y = tape.mean_pool(x).unwrap();
        assert_eq!(tape.shape(y), &[2, 2]);
        for &v in tape.values(y) {
            assert!((v - 0.75).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_uniform_and_stability() {
        let mut tape = Tape::<f64>::new(false);
        let z = leaf64(&mut tape, &[5], &[0.; 5], false);
        let p = tape.softmax(z).unwrap();
        for &v in tape.values(p) {
            assert!((v - 0.2).abs() < 1e-12);
        }

        let big = leaf64(&mut tape, &[2], &[1e4, 0.], false);
        let p = tape.softmax(big).unwrap();
        let vals = tape.values(p);
        assert!(vals[0] > 1.0 - 1e-12 && vals[0].is_finite());
        assert!(vals[1] >= 0.0 && vals[1] < 1e-12);

        let nan = leaf64(&mut tape, &[2], &[f64::NAN, 0.], false);
        assert!(matches!(tape.softmax(nan), Err(Error::Numeric(_))));
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut tape = Tape::<f64>::new(false);
        let z = leaf64(&mut tape, &[3, 4], &[3., -2., 0.5, 9., 1., 1., 1., 1., -40., 40., 0., 2.], false);
        let p = tape.softmax(z).unwrap();
        for row in tape.values(p).chunks(4) {
            let s: f64 = row.iter().sum();
            assert!((s - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn cross_entropy_values() {
        let mut tape = Tape::<f64>::new(false);
        let uniform = leaf64(&mut tape, &[5], &[0.2; 5], false);
        let loss = tape.cross_entropy(uniform, &[3]).unwrap();
        assert!((tape.scalar(loss).unwrap() - 5f64.ln()).abs() < 1e-12);

        let perfect = leaf64(&mut tape, &[3], &[0., 1., 0.], false);
        let loss = tape.cross_entropy(perfect, &[2]).unwrap();
        assert_eq!(tape.scalar(loss).unwrap(), 0.0);

        let p = leaf64(&mut tape, &[3], &[0.5, 0.25, 0.25], false);
        let loss = tape.cross_entropy(p, &[2]).unwrap();
        assert!((tape.scalar(loss).unwrap() - 4f64.ln()).abs() < 1e-12);

        let p = leaf64(&mut tape, &[3], &[0.5, 0.25, 0.25], false);
        assert!(matches!(tape.cross_entropy(p, &[4]), Err(Error::Range(_))));
        let p = leaf64(&mut tape, &[3], &[0.5, 0.25, 0.25], false);
        assert!(matches!(tape.cross_entropy(p, &[0]), Err(Error::Range(_))));
    }

    #[test]
    fn cross_entropy_nonnegative_and_floored() {
        let mut tape = Tape::<f64>::new(false);
        let p = leaf64(&mut tape, &[2], &[1.0, 0.0], false);
        let loss = tape.cross_entropy(p, &[2]).unwrap();
        let v = tape.scalar(loss).unwrap();
        assert!(v.is_finite());
        assert!((v - (-PROB_FLOOR.ln())).abs() < 1e-9);
    }

    #[test]
    fn backward_of_sum_is_ones() {
        let mut tape = Tape::<f64>::new(true);
        let w = leaf64(&mut tape, &[2, 3], &[1., -2., 3., 0.5, 0., -1.], true);
        let loss = tape.sum_all(w).unwrap();
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(w).unwrap(), &[1.; 6]);
    }

    #[test]
    fn backward_of_constant_path_is_zero() {
        let mut tape = Tape::<f64>::new(true);
        let w = leaf64(&mut tape, &[4], &[1., 2., 3., 4.], true);
        let zeroed = tape.scale(w, 0.0).unwrap();
        let base = tape.sum_all(zeroed).unwrap();
        let c = leaf64(&mut tape, &[], &[7.5], false);
        let loss = tape.add(base, c).unwrap();
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(w).unwrap(), &[0.; 4]);
        assert!((tape.scalar(loss).unwrap() - 7.5).abs() < 1e-15);
    }

    #[test]
    fn backward_requires_scalar_and_gradients() {
        let mut tape = Tape::<f64>::new(true);
        let w = leaf64(&mut tape, &[2], &[1., 2.], true);
        assert!(matches!(tape.backward(w), Err(Error::Usage(_))));

        let mut frozen = Tape::<f64>::new(false);
        let w = leaf64(&mut frozen, &[1], &[1.], true);
        let loss = frozen.sum_all(w).unwrap();
        assert!(matches!(frozen.backward(loss), Err(Error::Usage(_))));
    }

    #[test]
    fn unreachable_leaves_get_zero_grads() {
        let mut tape = Tape::<f64>::new(true);
        let used = leaf64(&mut tape, &[2], &[1., 2.], true);
        let unused = leaf64(&mut tape, &[3], &[1., 1., 1.], true);
        let loss = tape.sum_all(used).unwrap();
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(used).unwrap(), &[1., 1.]);
        assert_eq!(tape.grad(unused).unwrap(), &[0., 0., 0.]);
    }

    #[test]
    fn operands_always_precede_outputs() {
        let mut tape = Tape::<f64>::new(true);
        let a = leaf64(&mut tape, &[2, 2], &[1., 2., 3., 4.], true);
        let b = leaf64(&mut tape, &[2, 2], &[0.5, 0., 0., 0.5], true);
        let c = tape.matmul(a, b).unwrap();
        let d = tape.relu(c).unwrap();
        let e = tape.sum_all(d).unwrap();
        for (i, node) in tape.nodes.iter().enumerate() {
            let check = |id: &NodeId| assert!(id.0 < i);
            match &node.op {
                Op::Leaf => {}
                Op::MatMul { lhs, rhs } | Op::Add { lhs, rhs } => {
                    check(lhs);
                    check(rhs);
                }
                Op::Relu { input } | Op::SumAll { input } => check(input),
                _ => unreachable!("ops used in this test"),
            }
        }
        assert_eq!(e.0, tape.nodes.len() - 1);
    }

    // Central finite differences over every component of every leaf.
    fn fd_check(
        shapes: &[&[usize]],
        seeds: &[&[f64]],
        build: impl Fn(&mut Tape<f64>, &[NodeId]) -> NodeId,
    ) {
        let eval = |inputs: &[Vec<f64>]| -> f64 {
            let mut tape = Tape::<f64>::new(true);
            let ids: Vec<NodeId> = shapes
                .iter()
                .zip(inputs)
                .map(|(s, v)| tape.leaf(s, v.clone(), true).unwrap())
                .collect();
            let loss = build(&mut tape, &ids);
            tape.scalar(loss).unwrap()
        };

        let base: Vec<Vec<f64>> = seeds.iter().map(|s| s.to_vec()).collect();
        let mut tape = Tape::<f64>::new(true);
        let ids: Vec<NodeId> = shapes
            .iter()
            .zip(&base)
            .map(|(s, v)| tape.leaf(s, v.clone(), true).unwrap())
            .collect();
        let loss = build(&mut tape, &ids);
        tape.backward(loss).unwrap();

        let h = 1e-5;
        for (which, id) in ids.iter().enumerate() {
            let analytic = tape.grad(*id).unwrap().to_vec();
            for i in 0..base[which].len() {
                let mut plus = base.clone();
                plus[which][i] += h;
                let mut minus = base.clone();
                minus[which][i] -= h;
                let numeric = (eval(&plus) - eval(&minus)) / (2.0 * h);
                let a = analytic[i];
                let denom = a.abs().max(numeric.abs()).max(1e-4);
                let rel = (a - numeric).abs() / denom;
                assert!(
                    rel <= 1e-4,
                    "leaf {which} comp {i}: analytic {a} vs numeric {numeric} (rel {rel})"
                );
            }
        }
    }

    fn pseudo(n: usize, scale: f64, salt: u64) -> Vec<f64> {
        // Deterministic off-zero values, good enough to seed FD checks.
        (0..n)
            .map(|i| {
                let h = (i as u64 + 1).wrapping_mul(0x9e3779b97f4a7c15 ^ salt);
                let u = (h >> 11) as f64 / (1u64 << 53) as f64;
                (u - 0.5) * 2.0 * scale + if u > 0.5 { 0.05 } else { -0.05 }
            })
            .collect()
    }

    #[test]
    fn grad_check_matmul_add_relu() {
        let a = pseudo(6, 0.8, 1);
        let b = pseudo(12, 0.8, 2);
        let c = pseudo(8, 0.8, 3);
        fd_check(
            &[&[2, 3], &[3, 4], &[2, 4], &[2, 4]],
            &[&a, &b, &c, &pseudo(8, 0.8, 4)],
            |tape, ids| {
                let mm = tape.matmul(ids[0], ids[1]).unwrap();
                let sum = tape.add(mm, ids[2]).unwrap();
                let act = tape.relu(sum).unwrap();
                let mixed = tape.add(act, ids[3]).unwrap();
                tape.sum_all(mixed).unwrap()
            },
        );
    }

    #[test]
    fn grad_check_bias_pool_scale() {
        let x = pseudo(24, 1.0, 5);
        let bias = pseudo(2, 0.5, 6);
        fd_check(&[&[2, 2, 3, 2], &[2]], &[&x, &bias], |tape, ids| {
            let biased = tape.add_row_bias(ids[0], ids[1]).unwrap();
            let act = tape.relu(biased).unwrap();
            let pooled = tape.mean_pool(act).unwrap();
            let scaled = tape.scale(pooled, 1.75).unwrap();
            tape.sum_all(scaled).unwrap()
        });
    }

    #[test]
    fn grad_check_temporal_conv() {
        let x = pseudo(2 * 5 * 3 * 2, 0.9, 7);
        let k = pseudo(3 * 2 * 4, 0.7, 8);
        fd_check(&[&[2, 5, 3, 2], &[3, 2, 4]], &[&x, &k], |tape, ids| {
            let y = tape.conv1d_temporal(ids[0], ids[1]).unwrap();
            let act = tape.relu(y).unwrap();
            tape.sum_all(act).unwrap()
        });
    }

    #[test]
    fn grad_check_spatial_mix_channel_map() {
        let adj = pseudo(9, 0.5, 9);
        let x = pseudo(2 * 4 * 3 * 2, 0.9, 10);
        let w = pseudo(2 * 3, 0.8, 11);
        fd_check(
            &[&[3, 3], &[2, 4, 3, 2], &[2, 3]],
            &[&adj, &x, &w],
            |tape, ids| {
                let mixed = tape.spatial_mix(ids[0], ids[1]).unwrap();
                let mapped = tape.channel_map(mixed, ids[2]).unwrap();
                let act = tape.relu(mapped).unwrap();
                tape.sum_all(act).unwrap()
            },
        );
    }

    #[test]
    fn grad_check_softmax_cross_entropy() {
        let logits = pseudo(2 * 5, 1.5, 12);
        fd_check(&[&[2, 5]], &[&logits], |tape, ids| {
            let probs = tape.softmax(ids[0]).unwrap();
            tape.cross_entropy(probs, &[2, 5]).unwrap()
        });
    }

    #[test]
    fn deterministic_forward() {
        let run = || {
            let mut tape = Tape::<f32>::new(true);
            let x = tape.leaf(&[2, 3], vec![0.1, -0.4, 2.5, 3.0, -0.7, 0.9], true).unwrap();
            let w = tape.leaf(&[3, 2], vec![0.3, -1.0, 0.25, 0.5, -0.75, 1.5], true).unwrap();
            let mm = tape.matmul(x, w).unwrap();
            let probs = tape.softmax(mm).unwrap();
            let loss = tape.cross_entropy(probs, &[1, 2]).unwrap();
            tape.backward(loss).unwrap();
            (
                tape.scalar(loss).unwrap().to_bits(),
                tape.grad(w).unwrap().iter().map(|g| g.to_bits()).collect::<Vec<_>>(),
            )
        };
        assert_eq!(run(), run());
    }
}
