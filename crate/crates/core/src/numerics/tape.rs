//! Tensor-level reverse-mode differentiation.
//!
//! A [`Tape`] records every operation of a forward pass as a node holding its
//! value. Nodes only reference earlier nodes; [`Tape::backward`] walks them
//! once in reverse creation order.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use super::ops::{self, BinaryOp, Broadcast, UnaryOp, NORM_FLOOR};
use super::params::{Gradients, ParamId, ParamStore};
use super::tensor::{gemm, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Param(ParamId),
    MatMul(Var, Var),
    Transpose(Var),
    Binary(BinaryOp, Var, Var, Broadcast),
    Unary(UnaryOp, Var),
    Scale(Var, f64),
    AddConst(Var),
    Softmax(Var),
    Cosine { a: Var, b: Var, na: f64, nb: f64 },
    MeanRows(Var),
    GroupSum(Var, usize),
    L2Normalize(Var, Vec<f64>),
    Concat(Vec<Var>),
    Sum(Var),
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
    /// Depends on at least one parameter.
    tracked: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: BTreeMap<ParamId, Var>,
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

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        let t = |v: &Var| self.nodes[v.0].tracked;
        let tracked = match &op {
            Op::Constant => false,
            Op::Param(_) => true,
            Op::MatMul(a, b) | Op::Binary(_, a, b, _) | Op::Cosine { a, b, .. } => t(a) || t(b),
            Op::Transpose(a)
            | Op::Unary(_, a)
            | Op::Scale(a, _)
            | Op::AddConst(a)
            | Op::Softmax(a)
            | Op::MeanRows(a)
            | Op::GroupSum(a, _)
            | Op::L2Normalize(a, _)
            | Op::Sum(a) => t(a),
            Op::Concat(parts) => parts.iter().any(t),
        };
        self.nodes.push(Node { value, op, tracked });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Constant)
    }

    /// Leaf for a learnable parameter. Repeated calls return the same node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let v = self.push(store.get(id).clone(), Op::Param(id));
        self.params.insert(id, v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = ops::matmul(self.value(a), self.value(b))?;
        Ok(self.push(value, Op::MatMul(a, b)))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = ops::transpose(self.value(a));
        self.push(value, Op::Transpose(a))
    }

    fn binary(&mut self, op: BinaryOp, a: Var, b: Var) -> Result<Var> {
        let mode = ops::broadcast_mode("elementwise", self.value(a), self.value(b))?;
        let value = ops::binary(op, self.value(a), self.value(b))?;
        Ok(self.push(value, Op::Binary(op, a, b, mode)))
    }

    /// Sum; `b` may be a per-row vector added to every column.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryOp::Add, a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryOp::Sub, a, b)
    }

    /// Elementwise product; `b` may be a per-row vector applied to every column.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryOp::Mul, a, b)
    }

    fn unary(&mut self, op: UnaryOp, a: Var) -> Var {
        let value = self.value(a).map(|x| ops::unary_value(op, x));
        self.push(value, Op::Unary(op, a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(UnaryOp::Tanh, a)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(UnaryOp::Relu, a)
    }

    pub fn signed_sqrt(&mut self, a: Var) -> Var {
        self.unary(UnaryOp::SignedSqrt, a)
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let value = self.value(a).map(|x| x * factor);
        self.push(value, Op::Scale(a, factor))
    }

    pub fn add_const(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a).map(|x| x + c);
        self.push(value, Op::AddConst(a))
    }

    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let value = ops::softmax(self.value(a))?;
        Ok(self.push(value, Op::Softmax(a)))
    }

    pub fn cosine(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.len() != y.len() {
            return Err(Error::dims("cosine_similarity", x.shape(), y.shape()));
        }
        let (na, nb) = (x.norm(), y.norm());
        if na == 0.0 || nb == 0.0 {
            return Err(Error::domain(
                "cosine_similarity",
                "zero vector has no direction",
            ));
        }
        let cos = ops::dot(x.data(), y.data()) / (na * nb);
        Ok(self.push(Tensor::scalar(cos), Op::Cosine { a, b, na, nb }))
    }

    pub fn mean_rows(&mut self, a: Var) -> Result<Var> {
        let value = ops::mean_rows(self.value(a))?;
        Ok(self.push(value, Op::MeanRows(a)))
    }

    pub fn group_sum(&mut self, a: Var, group: usize) -> Result<Var> {
        let value = ops::group_sum(self.value(a), group)?;
        Ok(self.push(value, Op::GroupSum(a, group)))
    }

    /// Unit-normalizes a vector, or each column of a matrix.
    pub fn l2_normalize(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let (rows, cols) = (x.rows(), x.cols());
        let norms: Vec<f64> = (0..cols)
            .map(|c| {
                libm::sqrt(
                    (0..rows)
                        .map(|r| x.data()[r * cols + c])
                        .map(|v| v * v)
                        .sum(),
                )
            })
            .collect();
        let value = ops::l2_normalize(x);
        self.push(value, Op::L2Normalize(a, norms))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let tensors: Vec<&Tensor> = parts.iter().map(|&p| self.value(p)).collect();
        let value = ops::concat(&tensors)?;
        Ok(self.push(value, Op::Concat(parts.to_vec())))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let total = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(total), Op::Sum(a))
    }

    /// `max(0, x)` on a scalar.
    pub fn hinge(&mut self, a: Var) -> Var {
        self.relu(a)
    }

    /// Reverse pass from a single-element output.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        if self.value(output).len() != 1 {
            return Err(Error::domain("backward", "output must be a single value"));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; output.0 + 1];
        grads[output.0] = Some(Tensor::zeros_like(self.value(output)).map(|_| 1.0));
        let mut out = Gradients::new();

        for idx in (0..=output.0).rev() {
            let node = &self.nodes[idx];
            if !node.tracked {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => out.accumulate(*id, g),
                Op::MatMul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let (m, k) = ops::lhs_dims(av);
                    let (_, n) = ops::rhs_dims(bv);
                    if self.nodes[a.0].tracked {
                        let mut da = vec![0.0; m * k];
                        gemm(g.data(), false, bv.data(), true, m, n, k, &mut da);
                        self.accumulate(&mut grads, *a, da);
                    }
                    if self.nodes[b.0].tracked {
                        let mut db = vec![0.0; k * n];
                        gemm(av.data(), true, g.data(), false, k, m, n, &mut db);
                        self.accumulate(&mut grads, *b, db);
                    }
                }
                Op::Transpose(a) => {
                    let gt = ops::transpose(&g);
                    self.accumulate(&mut grads, *a, gt.into_data());
                }
                Op::Binary(op, a, b, mode) => {
                    let cols = g.cols();
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let rhs = |i: usize| match mode {
                        Broadcast::None => i,
                        Broadcast::Columns => i / cols,
                    };
                    let mut da = vec![0.0; av.len()];
                    let mut db = vec![0.0; bv.len()];
                    for (i, gi) in g.data().iter().enumerate() {
                        let j = rhs(i);
                        match op {
                            BinaryOp::Add => {
                                da[i] += gi;
                                db[j] += gi;
                            }
                            BinaryOp::Sub => {
                                da[i] += gi;
                                db[j] -= gi;
                            }
                            BinaryOp::Mul => {
                                da[i] += gi * bv.data()[j];
                                db[j] += gi * av.data()[i];
                            }
                        }
                    }
                    self.accumulate(&mut grads, *a, da);
                    self.accumulate(&mut grads, *b, db);
                }
                Op::Unary(op, a) => {
                    let x = self.value(*a).data();
                    let y = node.value.data();
                    let da = g
                        .data()
                        .iter()
                        .enumerate()
                        .map(|(i, gi)| {
                            gi * match op {
                                UnaryOp::Tanh => 1.0 - y[i] * y[i],
                                UnaryOp::Relu => {
                                    if x[i] > 0.0 {
                                        1.0
                                    } else {
                                        0.0
                                    }
                                }
                                UnaryOp::SignedSqrt => {
                                    let mag = if y[i] < 0.0 { -y[i] } else { y[i] };
                                    if mag > 0.0 {
                                        0.5 / mag
                                    } else {
                                        0.0
                                    }
                                }
                            }
                        })
                        .collect();
                    self.accumulate(&mut grads, *a, da);
                }
                Op::Scale(a, f) => {
                    let da = g.data().iter().map(|v| v * f).collect();
                    self.accumulate(&mut grads, *a, da);
                }
                Op::AddConst(a) => self.accumulate(&mut grads, *a, g.into_data()),
                Op::Softmax(a) => {
                    let y = node.value.data();
                    let gy = ops::dot(g.data(), y);
                    let da = y
                        .iter()
                        .zip(g.data())
                        .map(|(yi, gi)| yi * (gi - gy))
                        .collect();
                    self.accumulate(&mut grads, *a, da);
                }
                Op::Cosine { a, b, na, nb } => {
                    let g0 = g.data()[0];
                    let cos = node.value.data()[0];
                    let (x, y) = (self.value(*a).data(), self.value(*b).data());
                    let inv = 1.0 / (na * nb);
                    let da = x
                        .iter()
                        .zip(y)
                        .map(|(xi, yi)| g0 * (yi * inv - cos * xi / (na * na)))
                        .collect();
                    let db = x
                        .iter()
                        .zip(y)
                        .map(|(xi, yi)| g0 * (xi * inv - cos * yi / (nb * nb)))
                        .collect();
                    self.accumulate(&mut grads, *a, da);
                    self.accumulate(&mut grads, *b, db);
                }
                Op::MeanRows(a) => {
                    let av = self.value(*a);
                    let (n, d) = (av.rows(), av.cols());
                    let inv = 1.0 / n as f64;
                    let mut da = vec![0.0; n * d];
                    for i in 0..n {
                        for j in 0..d {
                            da[i * d + j] = g.data()[j] * inv;
                        }
                    }
                    self.accumulate(&mut grads, *a, da);
                }
                Op::GroupSum(a, group) => {
                    let av = self.value(*a);
                    let cols = av.cols();
                    let mut da = vec![0.0; av.len()];
                    for r in 0..av.rows() {
                        for c in 0..cols {
                            da[r * cols + c] = g.data()[(r / group) * cols + c];
                        }
                    }
                    self.accumulate(&mut grads, *a, da);
                }
                Op::L2Normalize(a, norms) => {
                    let y = &node.value;
                    let (rows, cols) = (y.rows(), y.cols());
                    let mut da = vec![0.0; y.len()];
                    for (c, &n) in norms.iter().enumerate() {
                        if n < NORM_FLOOR {
                            continue;
                        }
                        let yg: f64 = (0..rows)
                            .map(|r| y.data()[r * cols + c] * g.data()[r * cols + c])
                            .sum();
                        for r in 0..rows {
                            let i = r * cols + c;
                            da[i] = (g.data()[i] - y.data()[i] * yg) / n;
                        }
                    }
                    self.accumulate(&mut grads, *a, da);
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let len = self.value(*p).len();
                        self.accumulate(&mut grads, *p, g.data()[offset..offset + len].to_vec());
                        offset += len;
                    }
                }
                Op::Sum(a) => {
                    let g0 = g.data()[0];
                    let da = vec![g0; self.value(*a).len()];
                    self.accumulate(&mut grads, *a, da);
                }
            }
        }
        Ok(out)
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], v: Var, data: Vec<f64>) {
        if !self.nodes[v.0].tracked {
            return;
        }
        match &mut grads[v.0] {
            Some(existing) => {
                for (e, d) in existing.data_mut().iter_mut().zip(&data) {
                    *e += d;
                }
            }
            slot @ None => {
                let shape = self.value(v).shape();
                *slot = Some(Tensor::new(shape.to_vec(), data).expect("gradient shape"));
            }
        }
    }
}
