//! Recording tape for reverse-mode differentiation.
//!
//! Every operation appends one node holding the result value, the parent
//! variable ids, and the op tag the backward pass dispatches on. Gradients
//! flow only into nodes created with `needs_grad`.

use rand::Rng;

use super::Tensor;

pub type VarId = usize;

#[derive(Debug)]
enum Op {
    Leaf,
    Add,
    Sub,
    Mul,
    Scale(f64),
    /// Elementwise product with a constant tensor (dropout masks, share masks).
    MulMask(Tensor),
    MatVec,
    GatherRows(Vec<usize>),
    GatherElems(Vec<usize>),
    Concat,
    Slice {
        start: usize,
        len: usize,
    },
    StackRows,
    Sigmoid,
    Tanh,
    Htanh,
    Exp,
    Ln,
    LogSoftmax {
        support: Option<Vec<usize>>,
    },
    Conv2 {
        h: usize,
    },
    /// Dot product with a constant weight tensor, yielding a scalar.
    WeightedSum(Tensor),
    SumVec,
    SumScalars,
}

struct Node {
    op: Op,
    parents: Vec<VarId>,
    needs_grad: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    values: Vec<Tensor>,
}

/// Gradients indexed by the `VarId` they belong to.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, id: VarId) -> Option<&Tensor> {
        self.grads.get(id).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, id: VarId) -> Option<Tensor> {
        self.grads.get_mut(id).and_then(|g| g.take())
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: VarId) -> &Tensor {
        &self.values[id]
    }

    fn push(&mut self, op: Op, parents: Vec<VarId>, value: Tensor) -> VarId {
        let needs_grad = match op {
            Op::Leaf => false,
            _ => parents.iter().any(|&p| self.nodes[p].needs_grad),
        };
        self.nodes.push(Node {
            op,
            parents,
            needs_grad,
        });
        self.values.push(value);
        self.nodes.len() - 1
    }

    /// A differentiable input (parameters).
    pub fn leaf(&mut self, value: Tensor) -> VarId {
        let id = self.push(Op::Leaf, vec![], value);
        self.nodes[id].needs_grad = true;
        id
    }

    /// A non-differentiable input.
    pub fn constant(&mut self, value: Tensor) -> VarId {
        self.push(Op::Leaf, vec![], value)
    }

    pub fn add(&mut self, a: VarId, b: VarId) -> VarId {
        self.values[a].assert_same_shape(&self.values[b], "add");
        let value = Tensor::from_vec(
            self.values[a].shape(),
            self.values[a]
                .data()
                .iter()
                .zip(self.values[b].data())
                .map(|(x, y)| x + y)
                .collect(),
        );
        self.push(Op::Add, vec![a, b], value)
    }

    pub fn sub(&mut self, a: VarId, b: VarId) -> VarId {
        self.values[a].assert_same_shape(&self.values[b], "sub");
        let value = Tensor::from_vec(
            self.values[a].shape(),
            self.values[a]
                .data()
                .iter()
                .zip(self.values[b].data())
                .map(|(x, y)| x - y)
                .collect(),
        );
        self.push(Op::Sub, vec![a, b], value)
    }

    pub fn mul(&mut self, a: VarId, b: VarId) -> VarId {
        self.values[a].assert_same_shape(&self.values[b], "mul");
        let value = Tensor::from_vec(
            self.values[a].shape(),
            self.values[a]
                .data()
                .iter()
                .zip(self.values[b].data())
                .map(|(x, y)| x * y)
                .collect(),
        );
        self.push(Op::Mul, vec![a, b], value)
    }

    pub fn scale(&mut self, a: VarId, c: f64) -> VarId {
        let value = Tensor::from_vec(
            self.values[a].shape(),
            self.values[a].data().iter().map(|x| x * c).collect(),
        );
        self.push(Op::Scale(c), vec![a], value)
    }

    pub fn mul_mask(&mut self, a: VarId, mask: Tensor) -> VarId {
        self.values[a].assert_same_shape(&mask, "mul_mask");
        let value = Tensor::from_vec(
            self.values[a].shape(),
            self.values[a]
                .data()
                .iter()
                .zip(mask.data())
                .map(|(x, m)| x * m)
                .collect(),
        );
        self.push(Op::MulMask(mask), vec![a], value)
    }

    /// `W[m x n] . x[n] -> [m]`.
    pub fn matvec(&mut self, w: VarId, x: VarId) -> VarId {
        let (m, n) = (self.values[w].rows(), self.values[w].cols());
        assert_eq!(
            self.values[x].shape(),
            &[n],
            "matvec: W is {m}x{n}, x has shape {:?}",
            self.values[x].shape()
        );
        let wd = self.values[w].data();
        let xd = self.values[x].data();
        let mut out = vec![0.0; m];
        for i in 0..m {
            let row = &wd[i * n..(i + 1) * n];
            let mut acc = 0.0;
            for j in 0..n {
                acc += row[j] * xd[j];
            }
            out[i] = acc;
        }
        self.push(Op::MatVec, vec![w, x], Tensor::vector(out))
    }

    /// `y = W.x + b` with gradient accumulation into all three inputs.
    pub fn linear(&mut self, w: VarId, x: VarId, b: VarId) -> VarId {
        let y = self.matvec(w, x);
        self.add(y, b)
    }

    /// Select rows of a matrix; repeated indices are allowed.
    pub fn gather_rows(&mut self, m: VarId, indices: &[usize]) -> VarId {
        let (rows, cols) = (self.values[m].rows(), self.values[m].cols());
        let mut out = Vec::with_capacity(indices.len() * cols);
        for &idx in indices {
            assert!(idx < rows, "gather_rows: index {idx} out of {rows}");
            out.extend_from_slice(self.values[m].row(idx));
        }
        self.push(
            Op::GatherRows(indices.to_vec()),
            vec![m],
            Tensor::matrix(indices.len(), cols, out),
        )
    }

    /// One row of a matrix as a rank-1 vector (an embedding lookup).
    pub fn row(&mut self, m: VarId, idx: usize) -> VarId {
        let rows = self.values[m].rows();
        assert!(idx < rows, "row: index {idx} out of {rows}");
        let data = self.values[m].row(idx).to_vec();
        self.push(Op::GatherRows(vec![idx]), vec![m], Tensor::vector(data))
    }

    /// Select elements of a vector; repeated indices are allowed.
    pub fn gather(&mut self, v: VarId, indices: &[usize]) -> VarId {
        let n = self.values[v].len();
        let data = indices
            .iter()
            .map(|&idx| {
                assert!(idx < n, "gather: index {idx} out of {n}");
                self.values[v].data()[idx]
            })
            .collect();
        self.push(Op::GatherElems(indices.to_vec()), vec![v], Tensor::vector(data))
    }

    pub fn concat(&mut self, parts: &[VarId]) -> VarId {
        assert!(!parts.is_empty(), "concat of zero vectors");
        let mut data = Vec::new();
        for &p in parts {
            data.extend_from_slice(self.values[p].data());
        }
        self.push(Op::Concat, parts.to_vec(), Tensor::vector(data))
    }

    pub fn slice(&mut self, v: VarId, start: usize, len: usize) -> VarId {
        let n = self.values[v].len();
        assert!(start + len <= n, "slice [{start}, {start}+{len}) out of {n}");
        let data = self.values[v].data()[start..start + len].to_vec();
        self.push(Op::Slice { start, len }, vec![v], Tensor::vector(data))
    }

    /// Stack k vectors of identical length into a `[k x d]` matrix.
    pub fn stack_rows(&mut self, rows: &[VarId]) -> VarId {
        assert!(!rows.is_empty(), "stack_rows of zero vectors");
        let d = self.values[rows[0]].len();
        let mut data = Vec::with_capacity(rows.len() * d);
        for &r in rows {
            assert_eq!(self.values[r].len(), d, "stack_rows: ragged row lengths");
            data.extend_from_slice(self.values[r].data());
        }
        self.push(Op::StackRows, rows.to_vec(), Tensor::matrix(rows.len(), d, data))
    }

    pub fn sigmoid(&mut self, a: VarId) -> VarId {
        let value = Tensor::from_vec(
            self.values[a].shape(),
            self.values[a]
                .data()
                .iter()
                .map(|x| 1.0 / (1.0 + (-x).exp()))
                .collect(),
        );
        self.push(Op::Sigmoid, vec![a], value)
    }

    pub fn tanh(&mut self, a: VarId) -> VarId {
        let value = Tensor::from_vec(
            self.values[a].shape(),
            self.values[a].data().iter().map(|x| x.tanh()).collect(),
        );
        self.push(Op::Tanh, vec![a], value)
    }

    /// Hard tanh: clamp to `[-1, 1]`; subgradient 0 at and beyond the
    /// boundaries.
    pub fn htanh(&mut self, a: VarId) -> VarId {
        let value = Tensor::from_vec(
            self.values[a].shape(),
            self.values[a]
                .data()
                .iter()
                .map(|x| x.clamp(-1.0, 1.0))
                .collect(),
        );
        self.push(Op::Htanh, vec![a], value)
    }

    pub fn exp(&mut self, a: VarId) -> VarId {
        let value = Tensor::from_vec(
            self.values[a].shape(),
            self.values[a].data().iter().map(|x| x.exp()).collect(),
        );
        self.push(Op::Exp, vec![a], value)
    }

    pub fn ln(&mut self, a: VarId) -> VarId {
        let value = Tensor::from_vec(
            self.values[a].shape(),
            self.values[a].data().iter().map(|x| x.ln()).collect(),
        );
        self.push(Op::Ln, vec![a], value)
    }

    /// Log-probabilities over `support` (all indices when `None`); entries off
    /// the support are set to negative infinity.
    pub fn log_softmax(&mut self, a: VarId, support: Option<&[usize]>) -> VarId {
        let n = self.values[a].len();
        if let Some(s) = support {
            assert!(!s.is_empty(), "log_softmax: empty support");
            assert!(s.iter().all(|&i| i < n), "log_softmax: support out of range");
        }
        let xd = self.values[a].data();
        let value = match support {
            None => Tensor::vector(log_softmax_dense(xd)),
            Some(s) => {
                let mut out = vec![f64::NEG_INFINITY; n];
                let restricted: Vec<f64> = s.iter().map(|&i| xd[i]).collect();
                let ls = log_softmax_dense(&restricted);
                for (k, &i) in s.iter().enumerate() {
                    out[i] = ls[k];
                }
                Tensor::vector(out)
            }
        };
        self.push(
            Op::LogSoftmax {
                support: support.map(|s| s.to_vec()),
            },
            vec![a],
            value,
        )
    }

    /// Single-channel valid convolution of a `(2h+1) x (2h+1)` filter slid
    /// along the embedding axis of a `(2h+1) x d` window, full height.
    pub fn conv_combine(&mut self, ctx: VarId, filter: VarId, h: usize) -> VarId {
        let rows = 2 * h + 1;
        assert_eq!(self.values[ctx].rows(), rows, "conv_combine: window height");
        assert_eq!(
            self.values[filter].shape(),
            &[rows, rows],
            "conv_combine: filter shape"
        );
        let d = self.values[ctx].cols();
        assert!(d > 2 * h, "conv_combine: embedding dim {d} <= 2h = {}", 2 * h);
        let out_len = d - 2 * h;
        let mut out = vec![0.0; out_len];
        for k in 0..out_len {
            let mut acc = 0.0;
            for r in 0..rows {
                let crow = self.values[ctx].row(r);
                let frow = self.values[filter].row(r);
                for c in 0..rows {
                    acc += crow[k + c] * frow[c];
                }
            }
            out[k] = acc;
        }
        self.push(Op::Conv2 { h }, vec![ctx, filter], Tensor::vector(out))
    }

    /// Inverted dropout: zero with probability `rate`, scale survivors by
    /// `1/(1-rate)`. Identity in evaluation mode or at rate 0.
    pub fn dropout<R: Rng>(&mut self, a: VarId, rate: f64, training: bool, rng: &mut R) -> VarId {
        assert!((0.0..1.0).contains(&rate), "dropout rate {rate} outside [0, 1)");
        if !training || rate == 0.0 {
            return a;
        }
        let keep = 1.0 - rate;
        let mask = Tensor::from_vec(
            self.values[a].shape(),
            (0..self.values[a].len())
                .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { 1.0 / keep })
                .collect(),
        );
        self.mul_mask(a, mask)
    }

    /// `sum(w . x)` with constant weights; zero-weight entries are skipped so
    /// that masked `-inf` values never poison the sum.
    pub fn weighted_sum(&mut self, a: VarId, weights: &Tensor) -> VarId {
        self.values[a].assert_same_shape(weights, "weighted_sum");
        let mut acc = 0.0;
        for (x, w) in self.values[a].data().iter().zip(weights.data()) {
            if *w != 0.0 {
                acc += x * w;
            }
        }
        self.push(Op::WeightedSum(weights.clone()), vec![a], Tensor::scalar(acc))
    }

    pub fn sum_vec(&mut self, a: VarId) -> VarId {
        let acc = self.values[a].data().iter().sum();
        self.push(Op::SumVec, vec![a], Tensor::scalar(acc))
    }

    pub fn sum_scalars(&mut self, parts: &[VarId]) -> VarId {
        assert!(!parts.is_empty(), "sum_scalars of zero terms");
        let acc = parts.iter().map(|&p| self.values[p].item()).sum();
        self.push(Op::SumScalars, parts.to_vec(), Tensor::scalar(acc))
    }

    /// Reverse pass from a scalar root; returns gradients for every variable
    /// on a path from a differentiable leaf to the root.
    pub fn backward(&self, root: VarId) -> Gradients {
        assert_eq!(self.values[root].len(), 1, "backward root must be scalar");
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[root] = Some(Tensor::from_vec(self.values[root].shape(), vec![1.0]));

        for id in (0..self.nodes.len()).rev() {
            if grads[id].is_none() || !self.nodes[id].needs_grad {
                continue;
            }
            let g = grads[id].take().unwrap();
            self.backprop_node(id, &g, &mut grads);
            grads[id] = Some(g);
        }
        Gradients { grads }
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], id: VarId, delta: Tensor) {
        if !self.nodes[id].needs_grad {
            return;
        }
        match &mut grads[id] {
            Some(g) => {
                for (a, b) in g.data_mut().iter_mut().zip(delta.data()) {
                    *a += b;
                }
            }
            slot => *slot = Some(delta),
        }
    }

    fn backprop_node(&self, id: VarId, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let node = &self.nodes[id];
        let p = &node.parents;
        match &node.op {
            Op::Leaf => {}
            Op::Add => {
                self.accumulate(grads, p[0], g.clone());
                self.accumulate(grads, p[1], g.clone());
            }
            Op::Sub => {
                self.accumulate(grads, p[0], g.clone());
                let neg = Tensor::from_vec(g.shape(), g.data().iter().map(|x| -x).collect());
                self.accumulate(grads, p[1], neg);
            }
            Op::Mul => {
                let a = &self.values[p[0]];
                let b = &self.values[p[1]];
                let da = Tensor::from_vec(
                    g.shape(),
                    g.data().iter().zip(b.data()).map(|(x, y)| x * y).collect(),
                );
                let db = Tensor::from_vec(
                    g.shape(),
                    g.data().iter().zip(a.data()).map(|(x, y)| x * y).collect(),
                );
                self.accumulate(grads, p[0], da);
                self.accumulate(grads, p[1], db);
            }
            Op::Scale(c) => {
                let da = Tensor::from_vec(g.shape(), g.data().iter().map(|x| x * c).collect());
                self.accumulate(grads, p[0], da);
            }
            Op::MulMask(mask) => {
                let da = Tensor::from_vec(
                    g.shape(),
                    g.data().iter().zip(mask.data()).map(|(x, m)| x * m).collect(),
                );
                self.accumulate(grads, p[0], da);
            }
            Op::MatVec => {
                let w = &self.values[p[0]];
                let x = &self.values[p[1]];
                let (m, n) = (w.rows(), w.cols());
                let mut dw = vec![0.0; m * n];
                let mut dx = vec![0.0; n];
                for i in 0..m {
                    let gi = g.data()[i];
                    if gi == 0.0 {
                        continue;
                    }
                    let wrow = w.row(i);
                    let drow = &mut dw[i * n..(i + 1) * n];
                    for j in 0..n {
                        drow[j] += gi * x.data()[j];
                        dx[j] += gi * wrow[j];
                    }
                }
                self.accumulate(grads, p[0], Tensor::matrix(m, n, dw));
                self.accumulate(grads, p[1], Tensor::vector(dx));
            }
            Op::GatherRows(indices) => {
                let src = &self.values[p[0]];
                let cols = src.cols();
                let mut dm = Tensor::zeros(src.shape());
                for (k, &idx) in indices.iter().enumerate() {
                    let grow = &g.data()[k * cols..(k + 1) * cols];
                    let drow = &mut dm.data_mut()[idx * cols..(idx + 1) * cols];
                    for (d, gg) in drow.iter_mut().zip(grow) {
                        *d += gg;
                    }
                }
                self.accumulate(grads, p[0], dm);
            }
            Op::GatherElems(indices) => {
                let mut dv = Tensor::zeros(self.values[p[0]].shape());
                for (k, &idx) in indices.iter().enumerate() {
                    dv.data_mut()[idx] += g.data()[k];
                }
                self.accumulate(grads, p[0], dv);
            }
            Op::Concat => {
                let mut offset = 0;
                for &pid in p {
                    let len = self.values[pid].len();
                    let dp = Tensor::vector(g.data()[offset..offset + len].to_vec());
                    self.accumulate(grads, pid, dp);
                    offset += len;
                }
            }
            Op::Slice { start, len } => {
                let mut dv = Tensor::zeros(self.values[p[0]].shape());
                dv.data_mut()[*start..*start + *len].copy_from_slice(g.data());
                self.accumulate(grads, p[0], dv);
            }
            Op::StackRows => {
                let d = self.values[p[0]].len();
                for (k, &pid) in p.iter().enumerate() {
                    let dp = Tensor::vector(g.data()[k * d..(k + 1) * d].to_vec());
                    self.accumulate(grads, pid, dp);
                }
            }
            Op::Sigmoid => {
                let y = &self.values[id];
                let da = Tensor::from_vec(
                    g.shape(),
                    g.data()
                        .iter()
                        .zip(y.data())
                        .map(|(gg, yy)| gg * yy * (1.0 - yy))
                        .collect(),
                );
                self.accumulate(grads, p[0], da);
            }
            Op::Tanh => {
                let y = &self.values[id];
                let da = Tensor::from_vec(
                    g.shape(),
                    g.data()
                        .iter()
                        .zip(y.data())
                        .map(|(gg, yy)| gg * (1.0 - yy * yy))
                        .collect(),
                );
                self.accumulate(grads, p[0], da);
            }
            Op::Htanh => {
                let x = &self.values[p[0]];
                let da = Tensor::from_vec(
                    g.shape(),
                    g.data()
                        .iter()
                        .zip(x.data())
                        .map(|(gg, xx)| if xx.abs() < 1.0 { *gg } else { 0.0 })
                        .collect(),
                );
                self.accumulate(grads, p[0], da);
            }
            Op::Exp => {
                let y = &self.values[id];
                let da = Tensor::from_vec(
                    g.shape(),
                    g.data().iter().zip(y.data()).map(|(gg, yy)| gg * yy).collect(),
                );
                self.accumulate(grads, p[0], da);
            }
            Op::Ln => {
                let x = &self.values[p[0]];
                let da = Tensor::from_vec(
                    g.shape(),
                    g.data().iter().zip(x.data()).map(|(gg, xx)| gg / xx).collect(),
                );
                self.accumulate(grads, p[0], da);
            }
            Op::LogSoftmax { support } => {
                let y = &self.values[id];
                let n = y.len();
                let da = match support {
                    None => {
                        let gsum: f64 = g.data().iter().sum();
                        Tensor::vector(
                            (0..n)
                                .map(|i| g.data()[i] - y.data()[i].exp() * gsum)
                                .collect(),
                        )
                    }
                    Some(s) => {
                        let gsum: f64 = s.iter().map(|&i| g.data()[i]).sum();
                        let mut out = vec![0.0; n];
                        for &i in s {
                            out[i] = g.data()[i] - y.data()[i].exp() * gsum;
                        }
                        Tensor::vector(out)
                    }
                };
                self.accumulate(grads, p[0], da);
            }
            Op::Conv2 { h } => {
                let ctx = &self.values[p[0]];
                let filter = &self.values[p[1]];
                let rows = 2 * h + 1;
                let d = ctx.cols();
                let out_len = d - 2 * h;
                let mut dctx = vec![0.0; rows * d];
                let mut dfilter = vec![0.0; rows * rows];
                for k in 0..out_len {
                    let gk = g.data()[k];
                    if gk == 0.0 {
                        continue;
                    }
                    for r in 0..rows {
                        for c in 0..rows {
                            dctx[r * d + k + c] += gk * filter.row(r)[c];
                            dfilter[r * rows + c] += gk * ctx.row(r)[k + c];
                        }
                    }
                }
                self.accumulate(grads, p[0], Tensor::matrix(rows, d, dctx));
                self.accumulate(grads, p[1], Tensor::matrix(rows, rows, dfilter));
            }
            Op::WeightedSum(w) => {
                let gg = g.item();
                let da = Tensor::from_vec(w.shape(), w.data().iter().map(|ww| gg * ww).collect());
                self.accumulate(grads, p[0], da);
            }
            Op::SumVec => {
                let gg = g.item();
                let n = self.values[p[0]].len();
                self.accumulate(
                    grads,
                    p[0],
                    Tensor::from_vec(self.values[p[0]].shape(), vec![gg; n]),
                );
            }
            Op::SumScalars => {
                for &pid in p {
                    self.accumulate(grads, pid, g.clone());
                }
            }
        }
    }
}

/// Numerically stable log-softmax of a dense slice.
fn log_softmax_dense(x: &[f64]) -> Vec<f64> {
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + x.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    x.iter().map(|v| v - lse).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn linear_identity_passthrough() {
        let mut tape = Tape::new();
        let w = tape.leaf(Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]));
        let x = tape.leaf(Tensor::vector(vec![0.3, -0.7]));
        let b = tape.leaf(Tensor::vector(vec![0.0, 0.0]));
        let y = tape.linear(w, x, b);
        assert_eq!(tape.value(y).data(), &[0.3, -0.7]);
    }

    #[test]
    fn linear_small_example() {
        let mut tape = Tape::new();
        let w = tape.leaf(Tensor::matrix(2, 2, vec![1.0, 1.0, 0.0, 1.0]));
        let x = tape.leaf(Tensor::vector(vec![1.0, 2.0]));
        let b = tape.leaf(Tensor::vector(vec![0.0, 0.0]));
        let y = tape.linear(w, x, b);
        assert_eq!(tape.value(y).data(), &[3.0, 2.0]);
    }

    #[test]
    fn htanh_cases() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::vector(vec![0.5, 2.0, -3.0]));
        let y = tape.htanh(x);
        assert_eq!(tape.value(y).data(), &[0.5, 1.0, -1.0]);
        let s = tape.sum_vec(y);
        let grads = tape.backward(s);
        // Gradient is 1 strictly inside [-1, 1] and 0 at the clamped entries.
        assert_eq!(grads.get(x).unwrap().data(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn log_softmax_symmetric_and_masked() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::vector(vec![0.0, 0.0]));
        let y = tape.log_softmax(x, None);
        assert!((tape.value(y).data()[0] - 0.5f64.ln()).abs() < 1e-15);
        assert!((tape.value(y).data()[1] - 0.5f64.ln()).abs() < 1e-15);

        let z = tape.leaf(Tensor::vector(vec![1.0, 1.0, 1.0]));
        let m = tape.log_softmax(z, Some(&[0, 1]));
        let v = tape.value(m).data();
        assert!((v[0] - 0.5f64.ln()).abs() < 1e-15);
        assert!((v[1] - 0.5f64.ln()).abs() < 1e-15);
        assert_eq!(v[2], f64::NEG_INFINITY);
    }

    #[test]
    fn log_softmax_normalizes_over_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::uniform(&[10], 3.0, &mut rng));
        let y = tape.log_softmax(x, Some(&[1, 3, 4, 8]));
        let total: f64 = [1usize, 3, 4, 8]
            .iter()
            .map(|&i| tape.value(y).data()[i].exp())
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn conv_combine_examples() {
        // All-zero filter annihilates the window.
        let mut tape = Tape::new();
        let ctx = tape.leaf(Tensor::matrix(3, 5, vec![1.0; 15]));
        let f0 = tape.leaf(Tensor::zeros(&[3, 3]));
        let y = tape.conv_combine(ctx, f0, 1);
        assert_eq!(tape.value(y).data(), &[0.0, 0.0, 0.0]);

        // 3x3 ones over 3x4 ones: each output position sums 9 entries.
        let ctx2 = tape.leaf(Tensor::matrix(3, 4, vec![1.0; 12]));
        let f1 = tape.leaf(Tensor::matrix(3, 3, vec![1.0; 9]));
        let y2 = tape.conv_combine(ctx2, f1, 1);
        assert_eq!(tape.value(y2).data(), &[9.0, 9.0]);
    }

    #[test]
    fn dropout_modes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::vector(vec![1.0, 2.0, 3.0]));
        let id0 = tape.dropout(x, 0.0, true, &mut rng);
        assert_eq!(id0, x);
        let id1 = tape.dropout(x, 0.7, false, &mut rng);
        assert_eq!(id1, x);
    }

    #[test]
    fn dropout_survivor_fraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 10_000;
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::vector(vec![1.0; n]));
        let y = tape.dropout(x, 0.5, true, &mut rng);
        let survivors = tape.value(y).data().iter().filter(|v| **v != 0.0).count();
        let frac = survivors as f64 / n as f64;
        assert!((frac - 0.5).abs() < 0.02, "survivor fraction {frac}");
        // Survivors are scaled by 1/(1-rate).
        assert!(tape
            .value(y)
            .data()
            .iter()
            .all(|&v| v == 0.0 || (v - 2.0).abs() < 1e-12));
    }

    #[test]
    fn gradient_of_sum_distributes() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::vector(vec![1.0, 2.0]));
        let y = tape.leaf(Tensor::vector(vec![-1.0, 0.5]));
        let a = tape.mul(x, y);
        let s1 = tape.sum_vec(a);
        let s2 = tape.sum_vec(x);
        let total = tape.sum_scalars(&[s1, s2]);
        let grads = tape.backward(total);
        // d/dx (x*y + x) = y + 1
        assert_eq!(grads.get(x).unwrap().data(), &[0.0, 1.5]);
        assert_eq!(grads.get(y).unwrap().data(), &[1.0, 2.0]);
    }
}
