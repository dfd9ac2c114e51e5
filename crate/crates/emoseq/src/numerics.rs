//! Dense 64-bit float matrices, activations, losses, and a finite-difference
//! gradient checker.
//!
//! All operations are pure functions of their inputs and hold no shared state.
//! Reductions use a fixed lane-split summation order, so results are
//! deterministic run to run while still vectorizing.

use crate::{Error, Result};

/// Additive floor inside `cross_entropy` so a saturated prediction never
/// produces `-ln 0`.
pub const EPS_LOG: f64 = 1e-12;

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dims must be positive");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dims must be positive");
        assert_eq!(data.len(), rows * cols, "data length must be rows*cols");
        Self { rows, cols, data }
    }

    /// Build from nested row literals (test convenience).
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows[0].len();
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self::from_vec(r, c, data)
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn same_shape(&self, other: &Matrix) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    pub fn fill(&mut self, v: f64) {
        self.data.fill(v);
    }

    pub fn scale(&mut self, s: f64) {
        for x in &mut self.data {
            *x *= s;
        }
    }

    /// `self += other`, shapes must match.
    pub fn add_assign(&mut self, other: &Matrix) {
        assert!(self.same_shape(other), "add_assign shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    fn shape_err(&self, other: &Matrix, op: &'static str) -> Error {
        Error::ShapeMismatch {
            op,
            a_rows: self.rows,
            a_cols: self.cols,
            b_rows: other.rows,
            b_cols: other.cols,
        }
    }

    /// Standard matrix product `self * b`.
    pub fn matmul(&self, b: &Matrix) -> Result<Matrix> {
        if self.cols != b.rows {
            return Err(self.shape_err(b, "matmul"));
        }
        let mut out = Matrix::zeros(self.rows, b.cols);
        // i-k-j order: the inner j loop is a pure axpy over contiguous rows.
        for i in 0..self.rows {
            let out_row = &mut out.data[i * b.cols..(i + 1) * b.cols];
            for k in 0..self.cols {
                let aik = self.data[i * self.cols + k];
                if aik == 0.0 {
                    continue;
                }
                let b_row = &b.data[k * b.cols..(k + 1) * b.cols];
                for (o, &bv) in out_row.iter_mut().zip(b_row) {
                    *o += aik * bv;
                }
            }
        }
        Ok(out)
    }

    /// `self * b^T` without materializing the transpose.
    pub fn matmul_nt(&self, b: &Matrix) -> Result<Matrix> {
        if self.cols != b.cols {
            return Err(self.shape_err(b, "matmul_nt"));
        }
        let mut out = Matrix::zeros(self.rows, b.rows);
        for i in 0..self.rows {
            let a_row = self.row(i);
            for j in 0..b.rows {
                out.data[i * b.rows + j] = dot(a_row, b.row(j));
            }
        }
        Ok(out)
    }

    /// `self^T * b` without materializing the transpose.
    pub fn matmul_tn(&self, b: &Matrix) -> Result<Matrix> {
        if self.rows != b.rows {
            return Err(self.shape_err(b, "matmul_tn"));
        }
        let mut out = Matrix::zeros(self.cols, b.cols);
        for k in 0..self.rows {
            let a_row = self.row(k);
            let b_row = b.row(k);
            for (i, &aki) in a_row.iter().enumerate() {
                if aki == 0.0 {
                    continue;
                }
                let out_row = &mut out.data[i * b.cols..(i + 1) * b.cols];
                for (o, &bv) in out_row.iter_mut().zip(b_row) {
                    *o += aki * bv;
                }
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }
}

/// Dot product with eight independent accumulator lanes combined in a fixed
/// order. Deterministic and SIMD-friendly.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut lanes = [0.0f64; 8];
    let chunks = a.len() / 8;
    for c in 0..chunks {
        let ac = &a[c * 8..c * 8 + 8];
        let bc = &b[c * 8..c * 8 + 8];
        for l in 0..8 {
            lanes[l] += ac[l] * bc[l];
        }
    }
    let mut tail = 0.0;
    for i in chunks * 8..a.len() {
        tail += a[i] * b[i];
    }
    let head = ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3]))
        + ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7]));
    head + tail
}

/// `y += s * x` over slices of equal length.
#[inline]
pub fn axpy(y: &mut [f64], s: f64, x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

/// Numerically stable logistic function, branching on sign so the
/// exponential argument is never positive.
#[inline]
pub fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Elementwise logistic sigmoid.
pub fn sigmoid(x: &Matrix) -> Matrix {
    x.map(sigmoid_scalar)
}

/// Elementwise hyperbolic tangent.
pub fn tanh_op(x: &Matrix) -> Matrix {
    x.map(f64::tanh)
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(x: &Matrix) -> Matrix {
    let mut out = x.clone();
    for i in 0..out.rows() {
        softmax_slice(out.row_mut(i));
    }
    out
}

/// In-place softmax over one slice.
pub fn softmax_slice(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Negative log likelihood of `label` under a single-row probability matrix:
/// `-ln(probs[label] + EPS_LOG)`.
pub fn cross_entropy(probs: &Matrix, label: usize) -> Result<f64> {
    if label >= probs.cols() {
        return Err(Error::IndexOutOfRange {
            what: "class label",
            index: label,
            size: probs.cols(),
        });
    }
    Ok(-(probs.get(0, label) + EPS_LOG).ln())
}

/// A named value matrix paired with a gradient of identical shape.
#[derive(Debug, Clone)]
pub struct Parameter {
    pub name: String,
    pub value: Matrix,
    pub grad: Matrix,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: Matrix) -> Self {
        let grad = Matrix::zeros(value.rows(), value.cols());
        Self {
            name: name.into(),
            value,
            grad,
        }
    }
}

/// Compare analytic gradients stored in each `Parameter::grad` against central
/// finite differences of `loss_fn`, returning the worst relative error
/// `|analytic - numeric| / max(1e-8, |analytic| + |numeric|)`.
///
/// `loss_fn` must be a deterministic function of the parameter values.
pub fn gradient_check<F>(mut loss_fn: F, params: &mut [Parameter], step: f64) -> Result<f64>
where
    F: FnMut(&[Parameter]) -> Result<f64>,
{
    if !(1e-6..=1e-4).contains(&step) {
        return Err(Error::Config(format!(
            "gradient_check step {step} outside [1e-6, 1e-4]"
        )));
    }
    let mut worst = 0.0f64;
    for p in 0..params.len() {
        for i in 0..params[p].value.data.len() {
            let original = params[p].value.data[i];
            params[p].value.data[i] = original + step;
            let f_plus = loss_fn(params)?;
            params[p].value.data[i] = original - step;
            let f_minus = loss_fn(params)?;
            params[p].value.data[i] = original;
            if !f_plus.is_finite() || !f_minus.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite loss while probing parameter '{}'",
                    params[p].name
                )));
            }
            let numeric = (f_plus - f_minus) / (2.0 * step);
            let analytic = params[p].grad.data[i];
            let denom = (analytic.abs() + numeric.abs()).max(1e-8);
            let rel = (analytic - numeric).abs() / denom;
            if rel > worst {
                worst = rel;
            }
        }
    }
    Ok(worst)
}
