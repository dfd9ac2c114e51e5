//! Multi-head scaled dot-product self-attention over the valid prefix.
//!
//! Per head: Q = Hs W_q^T, K = Hs W_k^T, V = Hs W_v^T, scores = Q K^T / sqrt(d_k),
//! row softmax, output = weights * V. Heads are concatenated and projected by
//! W_o^T. Computation runs on the valid n-row slice, which is exactly
//! equivalent to masking padded positions to -inf before the softmax (their
//! weights are identically zero) and keeps results independent of padding.

use super::AttentionParams;
use crate::numerics::{softmax_rows, Matrix};

#[derive(Debug, Clone)]
pub struct HeadCache {
    pub q: Matrix,
    pub k: Matrix,
    pub v: Matrix,
    /// Post-softmax attention weights, n x n.
    pub w: Matrix,
}

#[derive(Debug, Clone)]
pub struct AttnCache {
    pub heads: Vec<HeadCache>,
    /// Concatenated head outputs, n x h.
    pub o_concat: Matrix,
    /// The valid input slice, n x h.
    pub hs_valid: Matrix,
    pub valid_len: usize,
}

impl AttnCache {
    /// Attention weight of query position `qi` on key position `ki`;
    /// exactly 0 whenever either lies beyond the valid prefix.
    pub fn weight(&self, head: usize, qi: usize, ki: usize) -> f64 {
        if qi < self.valid_len && ki < self.valid_len {
            self.heads[head].w.get(qi, ki)
        } else {
            0.0
        }
    }
}

fn first_rows(m: &Matrix, n: usize) -> Matrix {
    let mut out = Matrix::zeros(n, m.cols());
    for t in 0..n {
        out.row_mut(t).copy_from_slice(m.row(t));
    }
    out
}

/// Context matrix with the same row layout as `hs`; rows beyond `valid_len`
/// are zero. `valid_len = 0` yields all zeros.
pub fn multi_head_attention(hs: &Matrix, valid_len: usize, params: &AttentionParams) -> Matrix {
    forward_cached(hs, valid_len, params).0
}

pub fn forward_cached(
    hs: &Matrix,
    valid_len: usize,
    params: &AttentionParams,
) -> (Matrix, Option<AttnCache>) {
    let h = hs.cols();
    let mut cx = Matrix::zeros(hs.rows(), h);
    if valid_len == 0 {
        return (cx, None);
    }
    let n = valid_len;
    let dk = params.heads[0].w_q.rows();
    let scale = 1.0 / (dk as f64).sqrt();
    let hs_valid = first_rows(hs, n);
    let mut o_concat = Matrix::zeros(n, h);
    let mut heads = Vec::with_capacity(params.heads.len());
    for (j, head) in params.heads.iter().enumerate() {
        let q = hs_valid.matmul_nt(&head.w_q).expect("attention shapes");
        let k = hs_valid.matmul_nt(&head.w_k).expect("attention shapes");
        let v = hs_valid.matmul_nt(&head.w_v).expect("attention shapes");
        let mut scores = q.matmul_nt(&k).expect("attention shapes");
        scores.scale(scale);
        let w = softmax_rows(&scores);
        let out = w.matmul(&v).expect("attention shapes");
        for t in 0..n {
            o_concat.row_mut(t)[j * dk..(j + 1) * dk].copy_from_slice(out.row(t));
        }
        heads.push(HeadCache { q, k, v, w });
    }
    let cx_valid = o_concat.matmul_nt(&params.w_o).expect("attention shapes");
    for t in 0..n {
        cx.row_mut(t).copy_from_slice(cx_valid.row(t));
    }
    (
        cx,
        Some(AttnCache {
            heads,
            o_concat,
            hs_valid,
            valid_len,
        }),
    )
}

/// Backward through the attention block. `dcx` is dL/dCx over the full row
/// layout; parameter gradients accumulate into `grads` and input gradients
/// into `dhs` (both added).
pub fn backward(
    cache: &AttnCache,
    params: &AttentionParams,
    dcx: &Matrix,
    grads: &mut AttentionParams,
    dhs: &mut Matrix,
) {
    let n = cache.valid_len;
    let dk = params.heads[0].w_q.rows();
    let scale = 1.0 / (dk as f64).sqrt();
    let dcx_valid = first_rows(dcx, n);

    // Cx = O W_o^T  =>  dW_o = dCx^T O, dO = dCx W_o.
    grads
        .w_o
        .add_assign(&dcx_valid.matmul_tn(&cache.o_concat).expect("attention shapes"));
    let d_o = dcx_valid.matmul(&params.w_o).expect("attention shapes");

    let mut dhs_valid = Matrix::zeros(n, cache.hs_valid.cols());
    for (j, head) in params.heads.iter().enumerate() {
        let hc = &cache.heads[j];
        let mut doj = Matrix::zeros(n, dk);
        for t in 0..n {
            doj.row_mut(t).copy_from_slice(&d_o.row(t)[j * dk..(j + 1) * dk]);
        }
        // out = W V  =>  dW = dOj V^T, dV = W^T dOj.
        let dwt = doj.matmul_nt(&hc.v).expect("attention shapes");
        let dv = hc.w.matmul_tn(&doj).expect("attention shapes");
        // Softmax row backward: dS = W ⊙ (dW − rowdot(dW, W)).
        let mut ds = Matrix::zeros(n, n);
        for r in 0..n {
            let wr = hc.w.row(r);
            let dwr = dwt.row(r);
            let s: f64 = wr.iter().zip(dwr).map(|(a, b)| a * b).sum();
            let dsr = ds.row_mut(r);
            for c in 0..n {
                dsr[c] = wr[c] * (dwr[c] - s);
            }
        }
        // scores = Q K^T * scale  =>  dQ = dS K * scale, dK = dS^T Q * scale.
        let mut dq = ds.matmul(&hc.k).expect("attention shapes");
        dq.scale(scale);
        let mut dkm = ds.matmul_tn(&hc.q).expect("attention shapes");
        dkm.scale(scale);
        // Q = Hs W_q^T  =>  dW_q = dQ^T Hs, dHs += dQ W_q; same for K, V.
        let g = &mut grads.heads[j];
        g.w_q
            .add_assign(&dq.matmul_tn(&cache.hs_valid).expect("attention shapes"));
        g.w_k
            .add_assign(&dkm.matmul_tn(&cache.hs_valid).expect("attention shapes"));
        g.w_v
            .add_assign(&dv.matmul_tn(&cache.hs_valid).expect("attention shapes"));
        dhs_valid.add_assign(&dq.matmul(&head.w_q).expect("attention shapes"));
        dhs_valid.add_assign(&dkm.matmul(&head.w_k).expect("attention shapes"));
        dhs_valid.add_assign(&dv.matmul(&head.w_v).expect("attention shapes"));
    }
    for t in 0..n {
        let dst = dhs.row_mut(t);
        for (d, s) in dst.iter_mut().zip(dhs_valid.row(t)) {
            *d += *s;
        }
    }
}
