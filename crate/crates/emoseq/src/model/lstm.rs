//! Single-layer LSTM over the valid prefix of a sequence, with
//! backpropagation through time.
//!
//! Gate equations per step t (h_0 = c_0 = 0):
//!
//! ```text
//! i_t = sigmoid(W_i x_t + U_i h_{t-1} + b_i)
//! f_t = sigmoid(W_f x_t + U_f h_{t-1} + b_f)
//! o_t = sigmoid(W_o x_t + U_o h_{t-1} + b_o)
//! c~_t = tanh   (W_c x_t + U_c h_{t-1} + b_c)
//! c_t = f_t * c_{t-1} + i_t * c~_t
//! h_t = o_t * tanh(c_t)
//! ```

use super::LstmParams;
use crate::numerics::{axpy, dot, sigmoid_scalar, Matrix};

/// Per-step activations retained for the backward pass.
#[derive(Debug, Clone)]
pub struct StepCache {
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub o: Vec<f64>,
    pub ctilde: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct LstmCache {
    pub steps: Vec<StepCache>,
}

/// Hidden states for every position: rows < `valid_len` hold h_t, the rest
/// stay zero.
pub fn lstm_forward(x: &Matrix, valid_len: usize, params: &LstmParams) -> Matrix {
    forward_cached(x, valid_len, params).0
}

pub fn forward_cached(x: &Matrix, valid_len: usize, params: &LstmParams) -> (Matrix, LstmCache) {
    debug_assert!(valid_len <= x.rows());
    let h = params.b_i.cols();
    let mut hs = Matrix::zeros(x.rows(), h);
    let mut cache = LstmCache {
        steps: Vec::with_capacity(valid_len),
    };
    let mut h_prev = vec![0.0; h];
    let mut c_prev = vec![0.0; h];
    for t in 0..valid_len {
        let xt = x.row(t);
        let mut st = StepCache {
            i: vec![0.0; h],
            f: vec![0.0; h],
            o: vec![0.0; h],
            ctilde: vec![0.0; h],
            c: vec![0.0; h],
            tanh_c: vec![0.0; h],
        };
        for j in 0..h {
            let a_i = dot(params.w_i.row(j), xt) + dot(params.u_i.row(j), &h_prev)
                + params.b_i.get(0, j);
            let a_f = dot(params.w_f.row(j), xt) + dot(params.u_f.row(j), &h_prev)
                + params.b_f.get(0, j);
            let a_o = dot(params.w_o.row(j), xt) + dot(params.u_o.row(j), &h_prev)
                + params.b_o.get(0, j);
            let a_c = dot(params.w_c.row(j), xt) + dot(params.u_c.row(j), &h_prev)
                + params.b_c.get(0, j);
            st.i[j] = sigmoid_scalar(a_i);
            st.f[j] = sigmoid_scalar(a_f);
            st.o[j] = sigmoid_scalar(a_o);
            st.ctilde[j] = a_c.tanh();
            st.c[j] = st.f[j] * c_prev[j] + st.i[j] * st.ctilde[j];
            st.tanh_c[j] = st.c[j].tanh();
            hs.set(t, j, st.o[j] * st.tanh_c[j]);
        }
        h_prev.copy_from_slice(hs.row(t));
        c_prev.copy_from_slice(&st.c);
        cache.steps.push(st);
    }
    (hs, cache)
}

/// BPTT. `dhs` is dL/dHs; parameter gradients accumulate into `grads` and
/// input gradients into `dx` (both added, not overwritten).
#[allow(clippy::too_many_arguments)]
pub fn backward(
    x: &Matrix,
    valid_len: usize,
    params: &LstmParams,
    cache: &LstmCache,
    hs: &Matrix,
    dhs: &Matrix,
    grads: &mut LstmParams,
    dx: &mut Matrix,
) {
    let h = params.b_i.cols();
    let zeros = vec![0.0; h];
    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    let mut dh = vec![0.0; h];
    let mut da_i = vec![0.0; h];
    let mut da_f = vec![0.0; h];
    let mut da_o = vec![0.0; h];
    let mut da_c = vec![0.0; h];
    for t in (0..valid_len).rev() {
        let st = &cache.steps[t];
        let c_prev: &[f64] = if t == 0 { &zeros } else { &cache.steps[t - 1].c };
        let h_prev: &[f64] = if t == 0 { &zeros } else { hs.row(t - 1) };
        for j in 0..h {
            dh[j] = dhs.get(t, j) + dh_next[j];
            let d_o = dh[j] * st.tanh_c[j];
            da_o[j] = d_o * st.o[j] * (1.0 - st.o[j]);
            let dc = dh[j] * st.o[j] * (1.0 - st.tanh_c[j] * st.tanh_c[j]) + dc_next[j];
            da_f[j] = dc * c_prev[j] * st.f[j] * (1.0 - st.f[j]);
            da_i[j] = dc * st.ctilde[j] * st.i[j] * (1.0 - st.i[j]);
            da_c[j] = dc * st.i[j] * (1.0 - st.ctilde[j] * st.ctilde[j]);
            dc_next[j] = dc * st.f[j];
        }
        let xt = x.row(t);
        for j in 0..h {
            axpy(grads.w_i.row_mut(j), da_i[j], xt);
            axpy(grads.u_i.row_mut(j), da_i[j], h_prev);
            axpy(grads.w_f.row_mut(j), da_f[j], xt);
            axpy(grads.u_f.row_mut(j), da_f[j], h_prev);
            axpy(grads.w_o.row_mut(j), da_o[j], xt);
            axpy(grads.u_o.row_mut(j), da_o[j], h_prev);
            axpy(grads.w_c.row_mut(j), da_c[j], xt);
            axpy(grads.u_c.row_mut(j), da_c[j], h_prev);
        }
        {
            let bi = grads.b_i.row_mut(0);
            for j in 0..h {
                bi[j] += da_i[j];
            }
            let bf = grads.b_f.row_mut(0);
            for j in 0..h {
                bf[j] += da_f[j];
            }
            let bo = grads.b_o.row_mut(0);
            for j in 0..h {
                bo[j] += da_o[j];
            }
            let bc = grads.b_c.row_mut(0);
            for j in 0..h {
                bc[j] += da_c[j];
            }
        }
        dh_next.fill(0.0);
        for j in 0..h {
            axpy(&mut dh_next, da_i[j], params.u_i.row(j));
            axpy(&mut dh_next, da_f[j], params.u_f.row(j));
            axpy(&mut dh_next, da_o[j], params.u_o.row(j));
            axpy(&mut dh_next, da_c[j], params.u_c.row(j));
        }
        let dxt = dx.row_mut(t);
        for j in 0..h {
            axpy(dxt, da_i[j], params.w_i.row(j));
            axpy(dxt, da_f[j], params.w_f.row(j));
            axpy(dxt, da_o[j], params.w_o.row(j));
            axpy(dxt, da_c[j], params.w_c.row(j));
        }
    }
}
