//! Define-by-run reverse-mode automatic differentiation.
//!
//! A [`Tape`] records every operation applied during one forward pass. Values
//! are referred to by [`Var`] handles, which are indices into the tape, so
//! parents always precede children and the graph is acyclic by construction.
//! [`Tape::backward`] sweeps the nodes in reverse and accumulates gradients by
//! addition, which handles fan-out.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::math;
use crate::tensor::{gemm_nn, gemm_nt, gemm_tn, numel, split_axis, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryKind {
    Add,
    Sub,
    Mul,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Binary {
        kind: BinaryKind,
        lhs: Var,
        rhs: Var,
        /// For every lhs element, the rhs element it pairs with. `None` when
        /// the shapes are identical.
        rhs_index: Option<Vec<usize>>,
    },
    Scale {
        input: Var,
        factor: f64,
    },
    MatMul {
        lhs: Var,
        rhs: Var,
        m: usize,
        k: usize,
        n: usize,
    },
    Transpose {
        input: Var,
        rows: usize,
        cols: usize,
    },
    Softmax {
        input: Var,
        axis: usize,
    },
    LayerNorm {
        input: Var,
        gamma: Var,
        beta: Var,
        normalized: Vec<f64>,
        inv_std: Vec<f64>,
    },
    Gelu {
        input: Var,
    },
    Dropout {
        input: Var,
        mask: Vec<f64>,
    },
    Concat {
        inputs: Vec<Var>,
        axis: usize,
    },
    Narrow {
        input: Var,
        axis: usize,
        start: usize,
    },
    Reshape {
        input: Var,
    },
    Sum {
        input: Var,
    },
    Mean {
        input: Var,
    },
    CrossEntropy {
        probs: Var,
        label: usize,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Floor applied to the labelled probability before taking its logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Default)]
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

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn any_grad(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// Records an input value. Only leaves created with `requires_grad` ever
    /// receive a gradient.
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    /// Elementwise binary op. `b` may broadcast to `a`: its shape is aligned
    /// against the trailing axes of `a` and each of its axes must either match
    /// or be 1.
    pub fn elementwise(&mut self, kind: BinaryKind, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        let rhs_index = broadcast_index(sa, sb).ok_or_else(|| Error::ShapeMismatch {
            op: match kind {
                BinaryKind::Add => "add",
                BinaryKind::Sub => "sub",
                BinaryKind::Mul => "mul",
            },
            lhs: sa.to_vec(),
            rhs: sb.to_vec(),
        })?;
        let av = self.value(a).data();
        let bv = self.value(b).data();
        let f = |x: f64, y: f64| match kind {
            BinaryKind::Add => x + y,
            BinaryKind::Sub => x - y,
            BinaryKind::Mul => x * y,
        };
        let out: Vec<f64> = match &rhs_index {
            None => av.iter().zip(bv).map(|(&x, &y)| f(x, y)).collect(),
            Some(idx) => av.iter().zip(idx).map(|(&x, &j)| f(x, bv[j])).collect(),
        };
        let value = Tensor::new(sa.to_vec(), out)?;
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(
            value,
            Op::Binary {
                kind,
                lhs: a,
                rhs: b,
                rhs_index,
            },
            rg,
        ))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(BinaryKind::Add, a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(BinaryKind::Sub, a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(BinaryKind::Mul, a, b)
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let t = self.value(x);
        let value = Tensor::new(
            t.shape().to_vec(),
            t.data().iter().map(|v| v * factor).collect(),
        )
        .expect("shape preserved");
        let rg = self.requires_grad(x);
        self.push(value, Op::Scale { input: x, factor }, rg)
    }

    /// Matrix product. A rank-3 `a` is a batch of matrices sharing `b`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        let mismatch = || Error::ShapeMismatch {
            op: "matmul",
            lhs: sa.clone(),
            rhs: sb.clone(),
        };
        if !(2..=3).contains(&sa.len()) || sb.len() != 2 {
            return Err(mismatch());
        }
        let k = sa[sa.len() - 1];
        if k != sb[0] {
            return Err(mismatch());
        }
        let n = sb[1];
        let m = numel(&sa) / k;
        let mut out = vec![0.0; m * n];
        gemm_nn(self.value(a).data(), self.value(b).data(), &mut out, m, k, n);
        let mut shape = sa.clone();
        *shape.last_mut().unwrap() = n;
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(
            Tensor::new(shape, out)?,
            Op::MatMul {
                lhs: a,
                rhs: b,
                m,
                k,
                n,
            },
            rg,
        ))
    }

    /// Transpose of a rank-2 tensor.
    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let s = self.shape(x);
        if s.len() != 2 {
            return Err(Error::InvalidAxis {
                op: "transpose",
                axis: 1,
                rank: s.len(),
            });
        }
        let (rows, cols) = (s[0], s[1]);
        let src = self.value(x).data();
        let mut out = vec![0.0; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                out[c * rows + r] = src[r * cols + c];
            }
        }
        let rg = self.requires_grad(x);
        Ok(self.push(
            Tensor::new(vec![cols, rows], out)?,
            Op::Transpose {
                input: x,
                rows,
                cols,
            },
            rg,
        ))
    }

    /// Softmax along `axis`, computed with max subtraction.
    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() {
            return Err(Error::InvalidAxis {
                op: "softmax",
                axis,
                rank: shape.len(),
            });
        }
        let out = softmax_values(self.value(x).data(), &shape, axis);
        let rg = self.requires_grad(x);
        Ok(self.push(Tensor::new(shape, out)?, Op::Softmax { input: x, axis }, rg))
    }

    /// Normalizes each last-axis row with its population variance, then
    /// applies `gamma`/`beta`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let d = *shape.last().unwrap();
        for p in [gamma, beta] {
            if self.shape(p) != [d] {
                return Err(Error::ShapeMismatch {
                    op: "layer_norm",
                    lhs: shape,
                    rhs: self.shape(p).to_vec(),
                });
            }
        }
        let xs = self.value(x).data();
        let g = self.value(gamma).data();
        let b = self.value(beta).data();
        let rows = xs.len() / d;
        let mut normalized = vec![0.0; xs.len()];
        let mut inv_std = vec![0.0; rows];
        let mut out = vec![0.0; xs.len()];
        for r in 0..rows {
            let row = &xs[r * d..(r + 1) * d];
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let inv = 1.0 / math::sqrt(var + eps);
            inv_std[r] = inv;
            for j in 0..d {
                let xh = (row[j] - mean) * inv;
                normalized[r * d + j] = xh;
                out[r * d + j] = xh * g[j] + b[j];
            }
        }
        let rg = self.any_grad(&[x, gamma, beta]);
        Ok(self.push(
            Tensor::new(shape, out)?,
            Op::LayerNorm {
                input: x,
                gamma,
                beta,
                normalized,
                inv_std,
            },
            rg,
        ))
    }

    /// `x·Φ(x)` with the exact erf-based normal CDF.
    pub fn gelu(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let out = t.data().iter().map(|&v| v * math::normal_cdf(v)).collect();
        let value = Tensor::new(t.shape().to_vec(), out).expect("shape preserved");
        let rg = self.requires_grad(x);
        self.push(value, Op::Gelu { input: x }, rg)
    }

    /// Inverted dropout. Outside training, or at rate 0, returns `x` itself.
    pub fn dropout<R: Rng + ?Sized>(
        &mut self,
        x: Var,
        rate: f64,
        training: bool,
        rng: &mut R,
    ) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidRate(rate));
        }
        if !training || rate == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 / (1.0 - rate);
        let t = self.value(x);
        let mask: Vec<f64> = (0..t.len())
            .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
            .collect();
        let out = t.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
        let value = Tensor::new(t.shape().to_vec(), out)?;
        let rg = self.requires_grad(x);
        Ok(self.push(value, Op::Dropout { input: x, mask }, rg))
    }

    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let first = *inputs.first().ok_or(Error::Empty("concat inputs"))?;
        let base = self.shape(first).to_vec();
        if axis >= base.len() {
            return Err(Error::InvalidAxis {
                op: "concat",
                axis,
                rank: base.len(),
            });
        }
        let mut total = 0;
        for &v in inputs {
            let s = self.shape(v);
            let compatible = s.len() == base.len()
                && s.iter()
                    .zip(&base)
                    .enumerate()
                    .all(|(i, (a, b))| i == axis || a == b);
            if !compatible {
                return Err(Error::ShapeMismatch {
                    op: "concat",
                    lhs: base,
                    rhs: s.to_vec(),
                });
            }
            total += s[axis];
        }
        let (outer, _, inner) = split_axis(&base, axis);
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &v in inputs {
                let t = self.value(v);
                let chunk = t.shape()[axis] * inner;
                out.extend_from_slice(&t.data()[o * chunk..(o + 1) * chunk]);
            }
        }
        let mut shape = base;
        shape[axis] = total;
        let rg = self.any_grad(inputs);
        Ok(self.push(
            Tensor::new(shape, out)?,
            Op::Concat {
                inputs: inputs.to_vec(),
                axis,
            },
            rg,
        ))
    }

    /// The sub-range `start..start + len` of `axis`.
    pub fn narrow(&mut self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() {
            return Err(Error::InvalidAxis {
                op: "narrow",
                axis,
                rank: shape.len(),
            });
        }
        if len == 0 || start + len > shape[axis] {
            return Err(crate::error::invalid("narrow range outside axis"));
        }
        let (outer, n, inner) = split_axis(&shape, axis);
        let src = self.value(x).data();
        let mut out = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * n + start) * inner;
            out.extend_from_slice(&src[base..base + len * inner]);
        }
        let mut new_shape = shape;
        new_shape[axis] = len;
        let rg = self.requires_grad(x);
        Ok(self.push(
            Tensor::new(new_shape, out)?,
            Op::Narrow {
                input: x,
                axis,
                start,
            },
            rg,
        ))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(x).clone().reshape(shape)?;
        let rg = self.requires_grad(x);
        Ok(self.push(value, Op::Reshape { input: x }, rg))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        let rg = self.requires_grad(x);
        self.push(Tensor::scalar(s), Op::Sum { input: x }, rg)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let m = t.data().iter().sum::<f64>() / t.len() as f64;
        let rg = self.requires_grad(x);
        self.push(Tensor::scalar(m), Op::Mean { input: x }, rg)
    }

    /// `-ln(max(p[label], 1e-12))` for a probability vector.
    pub fn cross_entropy(&mut self, probs: Var, label: usize) -> Result<Var> {
        let t = self.value(probs);
        if label >= t.len() {
            return Err(crate::error::invalid("label outside probability vector"));
        }
        let loss = -math::ln(t.data()[label].max(PROB_FLOOR));
        let rg = self.requires_grad(probs);
        Ok(self.push(Tensor::scalar(loss), Op::CrossEntropy { probs, label }, rg))
    }

    /// Reverse sweep from a scalar root.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        let root_value = self.value(root);
        if root_value.len() != 1 {
            return Err(Error::NonScalarRoot(root_value.shape().to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = (0..=root.0).map(|_| None).collect();
        if self.nodes[root.0].requires_grad {
            grads[root.0] = Some(vec![1.0]);
        }
        for id in (0..=root.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            self.propagate(node, &g, &mut grads);
            grads[id] = Some(g);
        }
        let grads = grads
            .into_iter()
            .enumerate()
            .map(|(id, g)| {
                g.map(|g| {
                    Tensor::new(self.nodes[id].value.shape().to_vec(), g)
                        .expect("gradient matches value shape")
                })
            })
            .collect();
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Vec<f64>>], v: Var, f: impl FnOnce(&mut [f64])) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        let slot = grads[v.0].get_or_insert_with(|| vec![0.0; self.nodes[v.0].value.len()]);
        f(slot);
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        match &node.op {
            Op::Leaf => {}
            Op::Binary {
                kind,
                lhs,
                rhs,
                rhs_index,
            } => {
                let (a, b) = (self.value(*lhs).data(), self.value(*rhs).data());
                let bi = |i: usize| rhs_index.as_ref().map_or(i, |idx| idx[i]);
                match kind {
                    BinaryKind::Add | BinaryKind::Sub => {
                        self.accumulate(grads, *lhs, |ga| {
                            ga.iter_mut().zip(g).for_each(|(x, y)| *x += y)
                        });
                        let sign = if *kind == BinaryKind::Add { 1.0 } else { -1.0 };
                        self.accumulate(grads, *rhs, |gb| {
                            for (i, &gi) in g.iter().enumerate() {
                                gb[bi(i)] += sign * gi;
                            }
                        });
                    }
                    BinaryKind::Mul => {
                        self.accumulate(grads, *lhs, |ga| {
                            for (i, &gi) in g.iter().enumerate() {
                                ga[i] += gi * b[bi(i)];
                            }
                        });
                        self.accumulate(grads, *rhs, |gb| {
                            for (i, &gi) in g.iter().enumerate() {
                                gb[bi(i)] += gi * a[i];
                            }
                        });
                    }
                }
            }
            Op::Scale { input, factor } => self.accumulate(grads, *input, |gx| {
                gx.iter_mut().zip(g).for_each(|(x, y)| *x += factor * y)
            }),
            Op::MatMul { lhs, rhs, m, k, n } => {
                let (a, b) = (self.value(*lhs).data(), self.value(*rhs).data());
                // dA = dC·Bᵀ, dB = Aᵀ·dC
                self.accumulate(grads, *lhs, |ga| gemm_nt(g, b, ga, *m, *n, *k));
                self.accumulate(grads, *rhs, |gb| gemm_tn(a, g, gb, *m, *k, *n));
            }
            Op::Transpose { input, rows, cols } => self.accumulate(grads, *input, |gx| {
                for r in 0..*rows {
                    for c in 0..*cols {
                        gx[r * cols + c] += g[c * rows + r];
                    }
                }
            }),
            Op::Softmax { input, axis } => {
                let y = node.value.data();
                let (outer, n, inner) = split_axis(node.value.shape(), *axis);
                self.accumulate(grads, *input, |gx| {
                    for o in 0..outer {
                        for i in 0..inner {
                            let at = |j: usize| (o * n + j) * inner + i;
                            let dot: f64 = (0..n).map(|j| g[at(j)] * y[at(j)]).sum();
                            for j in 0..n {
                                gx[at(j)] += y[at(j)] * (g[at(j)] - dot);
                            }
                        }
                    }
                });
            }
            Op::LayerNorm {
                input,
                gamma,
                beta,
                normalized,
                inv_std,
            } => {
                let gam = self.value(*gamma).data();
                let d = gam.len();
                let rows = g.len() / d;
                self.accumulate(grads, *input, |gx| {
                    for r in 0..rows {
                        let gr = &g[r * d..(r + 1) * d];
                        let xh = &normalized[r * d..(r + 1) * d];
                        let mut sum_dxh = 0.0;
                        let mut sum_dxh_xh = 0.0;
                        for j in 0..d {
                            let dxh = gr[j] * gam[j];
                            sum_dxh += dxh;
                            sum_dxh_xh += dxh * xh[j];
                        }
                        let scale = inv_std[r] / d as f64;
                        for j in 0..d {
                            let dxh = gr[j] * gam[j];
                            gx[r * d + j] +=
                                scale * (d as f64 * dxh - sum_dxh - xh[j] * sum_dxh_xh);
                        }
                    }
                });
                self.accumulate(grads, *gamma, |gg| {
                    for (i, (&gi, &xh)) in g.iter().zip(normalized).enumerate() {
                        gg[i % d] += gi * xh;
                    }
                });
                self.accumulate(grads, *beta, |gb| {
                    for (i, &gi) in g.iter().enumerate() {
                        gb[i % d] += gi;
                    }
                });
            }
            Op::Gelu { input } => {
                let x = self.value(*input).data();
                self.accumulate(grads, *input, |gx| {
                    for i in 0..gx.len() {
                        let v = x[i];
                        gx[i] += g[i] * (math::normal_cdf(v) + v * math::normal_pdf(v));
                    }
                });
            }
            Op::Dropout { input, mask } => self.accumulate(grads, *input, |gx| {
                for i in 0..gx.len() {
                    gx[i] += g[i] * mask[i];
                }
            }),
            Op::Concat { inputs, axis } => {
                let (outer, total, inner) = split_axis(node.value.shape(), *axis);
                let mut offset = 0;
                for &v in inputs {
                    let len = self.shape(v)[*axis];
                    self.accumulate(grads, v, |gx| {
                        for o in 0..outer {
                            let src = (o * total + offset) * inner;
                            let dst = o * len * inner;
                            for i in 0..len * inner {
                                gx[dst + i] += g[src + i];
                            }
                        }
                    });
                    offset += len;
                }
            }
            Op::Narrow { input, axis, start } => {
                let (outer, n, inner) = split_axis(self.shape(*input), *axis);
                let len = node.value.shape()[*axis];
                self.accumulate(grads, *input, |gx| {
                    for o in 0..outer {
                        let dst = (o * n + start) * inner;
                        let src = o * len * inner;
                        for i in 0..len * inner {
                            gx[dst + i] += g[src + i];
                        }
                    }
                });
            }
            Op::Reshape { input } => self.accumulate(grads, *input, |gx| {
                gx.iter_mut().zip(g).for_each(|(x, y)| *x += y)
            }),
            Op::Sum { input } => self.accumulate(grads, *input, |gx| {
                gx.iter_mut().for_each(|x| *x += g[0])
            }),
            Op::Mean { input } => self.accumulate(grads, *input, |gx| {
                let n = gx.len() as f64;
                gx.iter_mut().for_each(|x| *x += g[0] / n)
            }),
            Op::CrossEntropy { probs, label } => {
                let p = self.value(*probs).data()[*label];
                self.accumulate(grads, *probs, |gx| {
                    if p > PROB_FLOOR {
                        gx[*label] -= g[0] / p;
                    }
                });
            }
        }
    }
}

/// Gradients produced by [`Tape::backward`], keyed by node.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient of `v`, or zeros shaped like it when `v` does not influence
    /// the root.
    pub fn get_or_zeros(&self, tape: &Tape, v: Var) -> Tensor {
        self.get(v)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(tape.shape(v)))
    }

    pub fn contains(&self, v: Var) -> bool {
        self.get(v).is_some()
    }
}

/// Index map from every element of `a` to its broadcast partner in `b`.
/// `Some(None)` means the shapes are equal.
fn broadcast_index(a: &[usize], b: &[usize]) -> Option<Option<Vec<usize>>> {
    if a == b {
        return Some(None);
    }
    if b.len() > a.len() {
        return None;
    }
    let offset = a.len() - b.len();
    let mut strides = vec![0usize; a.len()];
    let mut stride = 1;
    for (i, &bd) in b.iter().enumerate().rev() {
        let ad = a[offset + i];
        if bd == ad {
            strides[offset + i] = stride;
        } else if bd != 1 {
            return None;
        }
        stride *= bd;
    }
    let total = numel(a);
    let mut map = Vec::with_capacity(total);
    let mut idx = vec![0usize; a.len()];
    let mut cur = 0usize;
    for _ in 0..total {
        map.push(cur);
        for ax in (0..a.len()).rev() {
            idx[ax] += 1;
            cur += strides[ax];
            if idx[ax] < a[ax] {
                break;
            }
            cur -= strides[ax] * a[ax];
            idx[ax] = 0;
        }
    }
    Some(Some(map))
}

fn softmax_values(x: &[f64], shape: &[usize], axis: usize) -> Vec<f64> {
    let (outer, n, inner) = split_axis(shape, axis);
    let mut out = vec![0.0; x.len()];
    for o in 0..outer {
        for i in 0..inner {
            let at = |j: usize| (o * n + j) * inner + i;
            let max = (0..n).map(|j| x[at(j)]).fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for j in 0..n {
                let e = math::exp(x[at(j)] - max);
                out[at(j)] = e;
                total += e;
            }
            for j in 0..n {
                out[at(j)] /= total;
            }
        }
    }
    out
}

pub const GRAD_CHECK_FLOOR: f64 = 1e-4;

/// Maximum relative error between reverse-mode and central-difference
/// gradients of `f` at `theta`.
///
/// `f` receives a fresh tape and the parameter vector as a rank-1 leaf and
/// must return a scalar. Per coordinate the error is
/// `|a - b| / max(GRAD_CHECK_FLOOR, |a| + |b|)`; the floor keeps the
/// roundoff of a central difference on an exactly-zero gradient (such as a
/// key bias under softmax) from reading as a large relative error.
pub fn grad_check<F>(theta: &[f64], eps: f64, f: F) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    if theta.is_empty() {
        return Err(Error::Empty("grad_check parameters"));
    }
    let mut tape = Tape::new();
    let x = tape.param(Tensor::vector(theta));
    let root = f(&mut tape, x)?;
    let analytic = tape.backward(root)?.get_or_zeros(&tape, x);

    let eval = |point: &[f64]| -> Result<f64> {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::vector(point));
        let root = f(&mut tape, x)?;
        let v = tape.value(root);
        if v.len() != 1 {
            return Err(Error::NonScalarRoot(v.shape().to_vec()));
        }
        Ok(v.data()[0])
    };

    let mut point = theta.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..theta.len() {
        point[i] = theta[i] + eps;
        let plus = eval(&point)?;
        point[i] = theta[i] - eps;
        let minus = eval(&point)?;
        point[i] = theta[i];
        let numeric = (plus - minus) / (2.0 * eps);
        let a = analytic.data()[i];
        let err = math::abs(a - numeric) / (math::abs(a) + math::abs(numeric)).max(GRAD_CHECK_FLOOR);
        worst = worst.max(err);
    }
    Ok(worst)
}
