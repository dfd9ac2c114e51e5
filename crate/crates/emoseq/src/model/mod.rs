//! The classifier architecture and its exact analytic gradients.
//!
//! Forward pipeline (L = padded length, n = valid_len):
//!
//! ```text
//! ids -> embed -> TF-IDF gate: X'[t] = X[t] * sigmoid(w_g s_t + b_g)
//!     -> LSTM -> Hs -> multi-head attention -> Cx
//!     -> fuse: F = sigmoid(alpha) Cx + (1 - sigmoid(alpha)) Hs
//!     -> masked mean over rows < n -> logits -> softmax
//! ```
//!
//! `enable_tfidf_gate = false` makes the gate the identity;
//! `enable_attention = false` short-circuits F = Hs. Disabled components
//! still exist in `ModelParams` (so seeded init is identical across ablation
//! variants) but receive exactly zero gradient.

pub mod attention;
pub mod lstm;

pub use attention::{multi_head_attention, AttnCache};
pub use lstm::{lstm_forward, LstmCache};

use crate::numerics::{
    axpy, dot, sigmoid_scalar, softmax_rows, Matrix, Parameter, EPS_LOG,
};
use crate::rng::SplitMix64;
use crate::textpipe::EncodedExample;
use crate::{Error, Result};

/// Architecture dimensions and component switches.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub num_heads: usize,
    pub num_classes: usize,
    pub max_len: usize,
    pub enable_attention: bool,
    pub enable_tfidf_gate: bool,
    pub seed: u64,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.vocab_size < 2 {
            return Err(Error::Config(format!(
                "vocab_size must be at least 2 (got {})",
                self.vocab_size
            )));
        }
        if self.embed_dim < 1 || self.hidden_dim < 1 || self.num_heads < 1 || self.max_len < 1 {
            return Err(Error::Config(
                "embed_dim, hidden_dim, num_heads, and max_len must all be at least 1".into(),
            ));
        }
        if self.hidden_dim % self.num_heads != 0 {
            return Err(Error::Config(format!(
                "hidden_dim {} is not divisible by num_heads {}",
                self.hidden_dim, self.num_heads
            )));
        }
        if self.num_classes < 2 {
            return Err(Error::Config(format!(
                "num_classes must be at least 2 (got {})",
                self.num_classes
            )));
        }
        Ok(())
    }

    /// Per-head dimension d_k.
    pub fn head_dim(&self) -> usize {
        self.hidden_dim / self.num_heads
    }
}

/// Gate weights for input (i), forget (f), output (o), and candidate (c).
/// W_* are h x d, U_* are h x h, biases are stored as 1 x h rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub w_i: Matrix,
    pub u_i: Matrix,
    pub b_i: Matrix,
    pub w_f: Matrix,
    pub u_f: Matrix,
    pub b_f: Matrix,
    pub w_o: Matrix,
    pub u_o: Matrix,
    pub b_o: Matrix,
    pub w_c: Matrix,
    pub u_c: Matrix,
    pub b_c: Matrix,
}

/// One attention head's projections, each d_k x h.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionHead {
    pub w_q: Matrix,
    pub w_k: Matrix,
    pub w_v: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub heads: Vec<AttentionHead>,
    /// Output projection, h x h.
    pub w_o: Matrix,
}

/// The three trainable scalars (stored as 1 x 1 matrices): TF-IDF gate
/// weight w_g and bias b_g, and the fusion blend logit alpha.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionParams {
    pub gate_weight: Matrix,
    pub gate_bias: Matrix,
    pub blend_logit: Matrix,
}

/// Every trainable tensor in the model. Also reused as the shape-matched
/// container for gradients and Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub embedding: Matrix,
    pub lstm: LstmParams,
    pub attn: AttentionParams,
    pub fusion: FusionParams,
    pub classifier_w: Matrix,
    pub classifier_b: Matrix,
}

impl ModelParams {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let d = cfg.embed_dim;
        let h = cfg.hidden_dim;
        let dk = cfg.head_dim();
        let c = cfg.num_classes;
        let gate = |_g: char| {
            (
                Matrix::zeros(h, d),
                Matrix::zeros(h, h),
                Matrix::zeros(1, h),
            )
        };
        let (w_i, u_i, b_i) = gate('i');
        let (w_f, u_f, b_f) = gate('f');
        let (w_o, u_o, b_o) = gate('o');
        let (w_c, u_c, b_c) = gate('c');
        ModelParams {
            embedding: Matrix::zeros(cfg.vocab_size, d),
            lstm: LstmParams {
                w_i,
                u_i,
                b_i,
                w_f,
                u_f,
                b_f,
                w_o,
                u_o,
                b_o,
                w_c,
                u_c,
                b_c,
            },
            attn: AttentionParams {
                heads: (0..cfg.num_heads)
                    .map(|_| AttentionHead {
                        w_q: Matrix::zeros(dk, h),
                        w_k: Matrix::zeros(dk, h),
                        w_v: Matrix::zeros(dk, h),
                    })
                    .collect(),
                w_o: Matrix::zeros(h, h),
            },
            fusion: FusionParams {
                gate_weight: Matrix::zeros(1, 1),
                gate_bias: Matrix::zeros(1, 1),
                blend_logit: Matrix::zeros(1, 1),
            },
            classifier_w: Matrix::zeros(c, h),
            classifier_b: Matrix::zeros(1, c),
        }
    }

    /// Every tensor with its canonical name, in canonical order. This order
    /// is the contract for the optimizer, serialization, and gradient checks.
    pub fn entries(&self) -> Vec<(String, &Matrix)> {
        let mut out: Vec<(String, &Matrix)> = vec![
            ("embedding".into(), &self.embedding),
            ("lstm.w_i".into(), &self.lstm.w_i),
            ("lstm.u_i".into(), &self.lstm.u_i),
            ("lstm.b_i".into(), &self.lstm.b_i),
            ("lstm.w_f".into(), &self.lstm.w_f),
            ("lstm.u_f".into(), &self.lstm.u_f),
            ("lstm.b_f".into(), &self.lstm.b_f),
            ("lstm.w_o".into(), &self.lstm.w_o),
            ("lstm.u_o".into(), &self.lstm.u_o),
            ("lstm.b_o".into(), &self.lstm.b_o),
            ("lstm.w_c".into(), &self.lstm.w_c),
            ("lstm.u_c".into(), &self.lstm.u_c),
            ("lstm.b_c".into(), &self.lstm.b_c),
        ];
        for (j, head) in self.attn.heads.iter().enumerate() {
            out.push((format!("attn.head{j}.w_q"), &head.w_q));
            out.push((format!("attn.head{j}.w_k"), &head.w_k));
            out.push((format!("attn.head{j}.w_v"), &head.w_v));
        }
        out.push(("attn.w_o".into(), &self.attn.w_o));
        out.push(("fusion.gate_weight".into(), &self.fusion.gate_weight));
        out.push(("fusion.gate_bias".into(), &self.fusion.gate_bias));
        out.push(("fusion.blend_logit".into(), &self.fusion.blend_logit));
        out.push(("classifier.weight".into(), &self.classifier_w));
        out.push(("classifier.bias".into(), &self.classifier_b));
        out
    }

    /// Mutable variant of [`entries`](Self::entries); identical order.
    pub fn entries_mut(&mut self) -> Vec<(String, &mut Matrix)> {
        let mut out: Vec<(String, &mut Matrix)> = vec![
            ("embedding".into(), &mut self.embedding),
            ("lstm.w_i".into(), &mut self.lstm.w_i),
            ("lstm.u_i".into(), &mut self.lstm.u_i),
            ("lstm.b_i".into(), &mut self.lstm.b_i),
            ("lstm.w_f".into(), &mut self.lstm.w_f),
            ("lstm.u_f".into(), &mut self.lstm.u_f),
            ("lstm.b_f".into(), &mut self.lstm.b_f),
            ("lstm.w_o".into(), &mut self.lstm.w_o),
            ("lstm.u_o".into(), &mut self.lstm.u_o),
            ("lstm.b_o".into(), &mut self.lstm.b_o),
            ("lstm.w_c".into(), &mut self.lstm.w_c),
            ("lstm.u_c".into(), &mut self.lstm.u_c),
            ("lstm.b_c".into(), &mut self.lstm.b_c),
        ];
        for (j, head) in self.attn.heads.iter_mut().enumerate() {
            out.push((format!("attn.head{j}.w_q"), &mut head.w_q));
            out.push((format!("attn.head{j}.w_k"), &mut head.w_k));
            out.push((format!("attn.head{j}.w_v"), &mut head.w_v));
        }
        out.push(("attn.w_o".into(), &mut self.attn.w_o));
        out.push(("fusion.gate_weight".into(), &mut self.fusion.gate_weight));
        out.push(("fusion.gate_bias".into(), &mut self.fusion.gate_bias));
        out.push(("fusion.blend_logit".into(), &mut self.fusion.blend_logit));
        out.push(("classifier.weight".into(), &mut self.classifier_w));
        out.push(("classifier.bias".into(), &mut self.classifier_b));
        out
    }

    pub fn param_count(&self) -> usize {
        self.entries()
            .iter()
            .map(|(_, m)| m.rows() * m.cols())
            .sum()
    }

    /// Pair every tensor with its gradient for the finite-difference checker.
    pub fn to_parameters(&self, grads: &ModelParams) -> Vec<Parameter> {
        self.entries()
            .into_iter()
            .zip(grads.entries())
            .map(|((name, value), (_, grad))| Parameter {
                name,
                value: value.clone(),
                grad: grad.clone(),
            })
            .collect()
    }

    /// Copy values back from a `to_parameters`-ordered slice.
    pub fn assign_from(&mut self, params: &[Parameter]) {
        let entries = self.entries_mut();
        assert_eq!(entries.len(), params.len(), "parameter set mismatch");
        for ((name, m), p) in entries.into_iter().zip(params) {
            debug_assert_eq!(name, p.name);
            m.data_mut().copy_from_slice(p.value.data());
        }
    }

    /// Set every tensor to zero (reused gradient accumulators).
    pub fn zero_all(&mut self) {
        for (_, m) in self.entries_mut() {
            m.fill(0.0);
        }
    }
}

fn fill_xavier(m: &mut Matrix, rng: &mut SplitMix64) {
    let limit = (6.0 / (m.rows() + m.cols()) as f64).sqrt();
    for v in m.data_mut() {
        *v = rng.uniform(-limit, limit);
    }
}

/// Seeded Xavier-uniform initialization: every weight matrix is drawn
/// elementwise from uniform(-sqrt(6/(rows+cols)), +sqrt(6/(rows+cols))).
///
/// Draw order is fixed: embedding; LSTM gates i, f, o, c (W then U);
/// attention heads in index order (w_q, w_k, w_v); attention output
/// projection; classifier weight. Biases are constants (forget bias 1, the
/// rest 0), the gate starts as w_g = 1, b_g = 0, and the blend logit at 0.
pub fn init_params(cfg: &ModelConfig, seed: u64) -> ModelParams {
    cfg.validate().expect("init_params requires a valid ModelConfig");
    let mut rng = SplitMix64::new(seed);
    let mut p = ModelParams::zeros(cfg);
    fill_xavier(&mut p.embedding, &mut rng);
    fill_xavier(&mut p.lstm.w_i, &mut rng);
    fill_xavier(&mut p.lstm.u_i, &mut rng);
    fill_xavier(&mut p.lstm.w_f, &mut rng);
    fill_xavier(&mut p.lstm.u_f, &mut rng);
    fill_xavier(&mut p.lstm.w_o, &mut rng);
    fill_xavier(&mut p.lstm.u_o, &mut rng);
    fill_xavier(&mut p.lstm.w_c, &mut rng);
    fill_xavier(&mut p.lstm.u_c, &mut rng);
    for head in &mut p.attn.heads {
        fill_xavier(&mut head.w_q, &mut rng);
        fill_xavier(&mut head.w_k, &mut rng);
        fill_xavier(&mut head.w_v, &mut rng);
    }
    fill_xavier(&mut p.attn.w_o, &mut rng);
    fill_xavier(&mut p.classifier_w, &mut rng);
    p.lstm.b_f.fill(1.0);
    p.fusion.gate_weight.set(0, 0, 1.0);
    p
}

/// Embedding lookup: row t of the result is table row `token_ids[t]`.
/// PAD rows are row 0 of the table; downstream stages mask them.
pub fn embed(example: &EncodedExample, table: &Matrix) -> Result<Matrix> {
    let mut x = Matrix::zeros(example.token_ids.len(), table.cols());
    for (t, &id) in example.token_ids.iter().enumerate() {
        if id >= table.rows() {
            return Err(Error::IndexOutOfRange {
                what: "embedding row",
                index: id,
                size: table.rows(),
            });
        }
        x.row_mut(t).copy_from_slice(table.row(id));
    }
    Ok(x)
}

/// Per-position scalar gates sigmoid(w_g s_t + b_g); all 1 when disabled.
fn gate_values(s: &[f64], fusion: &FusionParams, enabled: bool) -> Vec<f64> {
    if !enabled {
        return vec![1.0; s.len()];
    }
    let w_g = fusion.gate_weight.get(0, 0);
    let b_g = fusion.gate_bias.get(0, 0);
    s.iter().map(|&st| sigmoid_scalar(w_g * st + b_g)).collect()
}

fn scale_rows(x: &Matrix, gates: &[f64]) -> Matrix {
    let mut out = x.clone();
    for (t, &g) in gates.iter().enumerate() {
        for v in out.row_mut(t) {
            *v *= g;
        }
    }
    out
}

/// X'[t] = X[t] * sigmoid(w_g s[t] + b_g); identity when `enabled` is false.
pub fn tfidf_gate(x: &Matrix, s: &[f64], fusion: &FusionParams, enabled: bool) -> Matrix {
    scale_rows(x, &gate_values(s, fusion, enabled))
}

/// F = sigmoid(alpha) Cx + (1 - sigmoid(alpha)) Hs; F = Hs when attention
/// is disabled.
pub fn fuse(hs: &Matrix, cx: &Matrix, fusion: &FusionParams, attention_enabled: bool) -> Matrix {
    if !attention_enabled {
        return hs.clone();
    }
    assert!(hs.same_shape(cx), "fuse requires equal shapes");
    let beta = sigmoid_scalar(fusion.blend_logit.get(0, 0));
    let mut out = Matrix::zeros(hs.rows(), hs.cols());
    for ((o, &c), &s) in out.data_mut().iter_mut().zip(cx.data()).zip(hs.data()) {
        *o = beta * c + (1.0 - beta) * s;
    }
    out
}

fn masked_mean(f: &Matrix, valid_len: usize) -> Matrix {
    let mut v = Matrix::zeros(1, f.cols());
    if valid_len == 0 {
        return v;
    }
    let inv = 1.0 / valid_len as f64;
    let row = v.row_mut(0);
    for t in 0..valid_len {
        axpy(row, inv, f.row(t));
    }
    v
}

fn classify(v: &Matrix, w_c: &Matrix, b_c: &Matrix) -> (Matrix, Matrix) {
    let c = w_c.rows();
    let mut logits = Matrix::zeros(1, c);
    for k in 0..c {
        logits.set(0, k, dot(w_c.row(k), v.row(0)) + b_c.get(0, k));
    }
    let probs = softmax_rows(&logits);
    (logits, probs)
}

/// Mean of rows < `valid_len` (zero vector when empty), then a linear
/// classifier and softmax.
pub fn pool_and_classify(
    f: &Matrix,
    valid_len: usize,
    w_c: &Matrix,
    b_c: &Matrix,
) -> (Matrix, Matrix) {
    let v = masked_mean(f, valid_len);
    classify(&v, w_c, b_c)
}

/// Every intermediate needed by [`backward_into`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub x: Matrix,
    pub gates: Vec<f64>,
    pub xg: Matrix,
    pub hs: Matrix,
    pub lstm: LstmCache,
    pub cx: Option<Matrix>,
    pub attn: Option<AttnCache>,
    pub pooled: Matrix,
    pub logits: Matrix,
    pub probs: Matrix,
}

/// Full forward pass. The returned cache holds `probs` plus everything the
/// backward pass reads.
pub fn forward(
    example: &EncodedExample,
    params: &ModelParams,
    cfg: &ModelConfig,
) -> Result<ForwardCache> {
    debug_assert!(example.valid_len <= example.token_ids.len());
    debug_assert_eq!(example.token_ids.len(), example.tfidf_weights.len());
    let n = example.valid_len;
    let x = embed(example, &params.embedding)?;
    let gates = gate_values(&example.tfidf_weights, &params.fusion, cfg.enable_tfidf_gate);
    let xg = scale_rows(&x, &gates);
    let (hs, lstm_cache) = lstm::forward_cached(&xg, n, &params.lstm);
    let (cx, attn_cache) = if cfg.enable_attention {
        let (cx, cache) = attention::forward_cached(&hs, n, &params.attn);
        (Some(cx), cache)
    } else {
        (None, None)
    };
    let pooled = match &cx {
        Some(cx) => {
            let fused = fuse(&hs, cx, &params.fusion, true);
            masked_mean(&fused, n)
        }
        None => masked_mean(&hs, n),
    };
    let (logits, probs) = classify(&pooled, &params.classifier_w, &params.classifier_b);
    Ok(ForwardCache {
        x,
        gates,
        xg,
        hs,
        lstm: lstm_cache,
        cx,
        attn: attn_cache,
        pooled,
        logits,
        probs,
    })
}

/// Exact gradient of `cross_entropy(probs, label)` with respect to every
/// parameter, accumulated (added) into `grads`.
///
/// Disabled components receive exactly zero gradient. PAD positions
/// contribute nothing to any parameter.
pub fn backward_into(
    example: &EncodedExample,
    label: usize,
    params: &ModelParams,
    cfg: &ModelConfig,
    cache: &ForwardCache,
    grads: &mut ModelParams,
) -> Result<()> {
    let c_count = cfg.num_classes;
    if label >= c_count {
        return Err(Error::IndexOutOfRange {
            what: "class label",
            index: label,
            size: c_count,
        });
    }
    let h = cfg.hidden_dim;
    let l = example.token_ids.len();
    let n = example.valid_len;

    // d(-ln(p_y + eps))/dlogits = r * (p - onehot), r = p_y / (p_y + eps).
    let p_y = cache.probs.get(0, label);
    let r = p_y / (p_y + EPS_LOG);
    let mut dlogits = vec![0.0; c_count];
    for k in 0..c_count {
        let delta = if k == label { 1.0 } else { 0.0 };
        dlogits[k] = r * (cache.probs.get(0, k) - delta);
    }

    for k in 0..c_count {
        axpy(grads.classifier_w.row_mut(k), dlogits[k], cache.pooled.row(0));
    }
    {
        let bc = grads.classifier_b.row_mut(0);
        for k in 0..c_count {
            bc[k] += dlogits[k];
        }
    }
    if n == 0 {
        return Ok(());
    }
    let mut dv = vec![0.0; h];
    for k in 0..c_count {
        axpy(&mut dv, dlogits[k], params.classifier_w.row(k));
    }
    // Mean pooling spreads dv/n onto every valid row of F.
    let inv_n = 1.0 / n as f64;
    let dfrow: Vec<f64> = dv.iter().map(|v| v * inv_n).collect();

    let mut dhs = Matrix::zeros(l, h);
    if cfg.enable_attention {
        let cx = cache.cx.as_ref().expect("attention cache present");
        let beta = sigmoid_scalar(params.fusion.blend_logit.get(0, 0));
        let mut dcx = Matrix::zeros(l, h);
        let mut dbeta = 0.0;
        for t in 0..n {
            let cxr = cx.row(t);
            let hsr = cache.hs.row(t);
            let dcxr = dcx.row_mut(t);
            for j in 0..h {
                dcxr[j] = beta * dfrow[j];
                dbeta += dfrow[j] * (cxr[j] - hsr[j]);
            }
        }
        for t in 0..n {
            let dhsr = dhs.row_mut(t);
            for j in 0..h {
                dhsr[j] = (1.0 - beta) * dfrow[j];
            }
        }
        grads.fusion.blend_logit.row_mut(0)[0] += dbeta * beta * (1.0 - beta);
        if let Some(ac) = &cache.attn {
            attention::backward(ac, &params.attn, &dcx, &mut grads.attn, &mut dhs);
        }
    } else {
        for t in 0..n {
            dhs.row_mut(t).copy_from_slice(&dfrow);
        }
    }

    let mut dxg = Matrix::zeros(l, cfg.embed_dim);
    lstm::backward(
        &cache.xg,
        n,
        &params.lstm,
        &cache.lstm,
        &cache.hs,
        &dhs,
        &mut grads.lstm,
        &mut dxg,
    );

    for t in 0..n {
        let g = cache.gates[t];
        if cfg.enable_tfidf_gate {
            // dL/dg_t = dX'[t] . X[t]; then through sigmoid to w_g, b_g.
            let dgate = dot(dxg.row(t), cache.x.row(t));
            let dz = dgate * g * (1.0 - g);
            grads.fusion.gate_weight.row_mut(0)[0] += dz * example.tfidf_weights[t];
            grads.fusion.gate_bias.row_mut(0)[0] += dz;
        }
        axpy(grads.embedding.row_mut(example.token_ids[t]), g, dxg.row(t));
    }
    Ok(())
}
