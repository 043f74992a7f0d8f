//! Pure tensor operations. The tape records these same kernels and adds the
//! matching backward rules.

use alloc::vec;
use alloc::vec::Vec;

use super::tensor::{gemm, Tensor};
use crate::error::{Error, Result};

/// Norms below this are treated as zero by [`l2_normalize`].
pub const NORM_FLOOR: f64 = 1e-12;

/// Matrix dimensions `(rows, inner)` of a product's left operand.
pub(crate) fn lhs_dims(a: &Tensor) -> (usize, usize) {
    if a.rank() == 1 {
        (1, a.len())
    } else {
        (a.shape()[0], a.shape()[1])
    }
}

/// Matrix dimensions `(inner, cols)` of a product's right operand.
pub(crate) fn rhs_dims(b: &Tensor) -> (usize, usize) {
    if b.rank() == 1 {
        (b.len(), 1)
    } else {
        (b.shape()[0], b.shape()[1])
    }
}

pub(crate) fn product_shape(a: &Tensor, b: &Tensor) -> Vec<usize> {
    match (a.rank(), b.rank()) {
        (1, 1) => vec![1],
        (1, _) => vec![b.shape()[1]],
        (_, 1) => vec![a.shape()[0]],
        _ => vec![a.shape()[0], b.shape()[1]],
    }
}

/// Matrix product. A rank-1 left operand is a row vector and a rank-1 right
/// operand is a column vector; the result drops the unit axis.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, k) = lhs_dims(a);
    let (k2, n) = rhs_dims(b);
    if k != k2 {
        return Err(Error::dims("matmul", a.shape(), b.shape()));
    }
    let mut out = vec![0.0; m * n];
    gemm(a.data(), false, b.data(), false, m, k, n, &mut out);
    Tensor::new(product_shape(a, b), out)
}

pub fn transpose(a: &Tensor) -> Tensor {
    if a.rank() == 1 {
        return Tensor::matrix(1, a.len(), a.data().to_vec()).expect("non-empty");
    }
    let (r, c) = (a.rows(), a.cols());
    let src = a.data();
    let mut out = vec![0.0; r * c];
    for i in 0..r {
        for j in 0..c {
            out[j * r + i] = src[i * c + j];
        }
    }
    Tensor::matrix(c, r, out).expect("non-empty")
}

/// Numerically stable softmax over a slice.
pub fn softmax_slice(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::domain("softmax", "empty input"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("softmax", "non-finite input"));
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = values.iter().map(|v| libm::exp(v - max)).collect();
    let total: f64 = out.iter().sum();
    for v in &mut out {
        *v /= total;
    }
    Ok(out)
}

pub fn softmax(v: &Tensor) -> Result<Tensor> {
    if v.rank() != 1 {
        return Err(Error::domain("softmax", "expects a vector"));
    }
    Ok(Tensor::vector(softmax_slice(v.data())?))
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Cosine similarity of two equal-length, non-zero vectors.
pub fn cosine_similarity(x: &Tensor, y: &Tensor) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::dims("cosine_similarity", x.shape(), y.shape()));
    }
    let nx = x.norm();
    let ny = y.norm();
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::domain(
            "cosine_similarity",
            "zero vector has no direction",
        ));
    }
    Ok((dot(x.data(), y.data()) / (nx * ny)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Tanh,
    Relu,
    /// `sign(x)·sqrt(|x|)`
    SignedSqrt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementwiseOp {
    Unary(UnaryOp),
    Binary(BinaryOp),
}

pub(crate) fn unary_value(op: UnaryOp, x: f64) -> f64 {
    match op {
        UnaryOp::Tanh => libm::tanh(x),
        UnaryOp::Relu => {
            if x > 0.0 || x.is_nan() {
                x
            } else {
                0.0
            }
        }
        UnaryOp::SignedSqrt => {
            if x >= 0.0 {
                libm::sqrt(x)
            } else {
                -libm::sqrt(-x)
            }
        }
    }
}

pub(crate) fn binary_value(op: BinaryOp, a: f64, b: f64) -> f64 {
    match op {
        BinaryOp::Add => a + b,
        BinaryOp::Sub => a - b,
        BinaryOp::Mul => a * b,
    }
}

/// How the right operand of a binary op lines up with the left one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Broadcast {
    None,
    /// A vector with one entry per row, applied to every column.
    Columns,
}

pub(crate) fn broadcast_mode(op: &'static str, a: &Tensor, b: &Tensor) -> Result<Broadcast> {
    if a.shape() == b.shape() {
        Ok(Broadcast::None)
    } else if a.rank() == 2 && b.rank() == 1 && b.len() == a.rows() {
        Ok(Broadcast::Columns)
    } else {
        Err(Error::dims(op, a.shape(), b.shape()))
    }
}

pub(crate) fn binary(op: BinaryOp, a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let mode = broadcast_mode("elementwise", a, b)?;
    let cols = a.cols();
    let mut out = a.clone();
    for (idx, v) in out.data_mut().iter_mut().enumerate() {
        let rhs = match mode {
            Broadcast::None => b.data()[idx],
            Broadcast::Columns => b.data()[idx / cols],
        };
        *v = binary_value(op, *v, rhs);
    }
    Ok(out)
}

/// Pointwise operation. Binary operations take equal shapes, or a matrix
/// and a vector with one entry per row; the vector is then applied to every
/// column (`out[i][j] = a[i][j] ∘ v[i]`).
pub fn elementwise(op: ElementwiseOp, a: &Tensor, b: Option<&Tensor>) -> Result<Tensor> {
    match (op, b) {
        (ElementwiseOp::Unary(u), None) => Ok(a.map(|x| unary_value(u, x))),
        (ElementwiseOp::Binary(bin), Some(b)) => binary(bin, a, b),
        (ElementwiseOp::Unary(_), Some(_)) => {
            Err(Error::domain("elementwise", "unary op given two operands"))
        }
        (ElementwiseOp::Binary(_), None) => {
            Err(Error::domain("elementwise", "binary op needs two operands"))
        }
    }
}

/// Arithmetic mean of the rows of a matrix.
pub fn mean_rows(rows: &Tensor) -> Result<Tensor> {
    if rows.rank() != 2 {
        return Err(Error::domain("mean_rows", "expects a matrix"));
    }
    let (n, d) = (rows.rows(), rows.cols());
    let mut out = vec![0.0; d];
    for i in 0..n {
        for (o, v) in out.iter_mut().zip(rows.row(i)) {
            *o += v;
        }
    }
    let inv = 1.0 / n as f64;
    for o in &mut out {
        *o *= inv;
    }
    Ok(Tensor::vector(out))
}

/// Sums consecutive groups of `group` rows (entries, for a vector).
pub fn group_sum(a: &Tensor, group: usize) -> Result<Tensor> {
    if group == 0 || !a.rows().is_multiple_of(group) {
        return Err(Error::domain(
            "group_sum",
            alloc::format!("{} rows not divisible into groups of {group}", a.rows()),
        ));
    }
    let out_rows = a.rows() / group;
    let cols = a.cols();
    let mut out = vec![0.0; out_rows * cols];
    for r in 0..a.rows() {
        let dst = (r / group) * cols;
        for c in 0..cols {
            out[dst + c] += a.data()[r * cols + c];
        }
    }
    let shape = if a.rank() == 1 {
        vec![out_rows]
    } else {
        vec![out_rows, cols]
    };
    Tensor::new(shape, out)
}

/// Scales a vector, or each column of a matrix, to unit L2 norm. Columns
/// whose norm is below [`NORM_FLOOR`] become zero.
pub fn l2_normalize(a: &Tensor) -> Tensor {
    let (rows, cols) = (a.rows(), a.cols());
    let mut out = a.clone();
    for c in 0..cols {
        let norm = libm::sqrt(
            (0..rows)
                .map(|r| {
                    let v = a.data()[r * cols + c];
                    v * v
                })
                .sum(),
        );
        for r in 0..rows {
            let v = &mut out.data_mut()[r * cols + c];
            *v = if norm < NORM_FLOOR { 0.0 } else { *v / norm };
        }
    }
    out
}

pub fn concat(parts: &[&Tensor]) -> Result<Tensor> {
    if parts.is_empty() {
        return Err(Error::domain("concat", "nothing to concatenate"));
    }
    let mut out = Vec::new();
    for p in parts {
        if p.rank() != 1 {
            return Err(Error::domain("concat", "expects vectors"));
        }
        out.extend_from_slice(p.data());
    }
    Ok(Tensor::vector(out))
}
