//! Classification metrics: confusion matrix, one-vs-rest per-class scores
//! (SE, SP, FM, J, AUC), classification accuracy, and report rendering.
//!
//! Zero-denominator policy: a per-class metric whose denominator is zero is
//! reported as 0 and the metric name is added to that class's degenerate
//! flags. Macro averages skip flagged classes; a macro metric with no
//! contributing classes is itself 0 and flagged.

use crate::model::{forward, ModelConfig, ModelParams};
use crate::numerics::Matrix;
use crate::textpipe::EncodedExample;
use crate::{Error, Result};

/// Index of the largest value; ties resolve to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    debug_assert!(!row.is_empty());
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Row-wise argmax over an n x C score matrix.
pub fn predict_labels(scores: &Matrix) -> Vec<usize> {
    (0..scores.rows()).map(|i| argmax(scores.row(i))).collect()
}

/// Square count table: `counts[truth][pred]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub classes: usize,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// One-vs-rest counts (TP, FN, FP, TN) for `class`.
    pub fn ovr_counts(&self, class: usize) -> (u64, u64, u64, u64) {
        let tp = self.counts[class][class];
        let fn_: u64 = (0..self.classes)
            .filter(|&j| j != class)
            .map(|j| self.counts[class][j])
            .sum();
        let fp: u64 = (0..self.classes)
            .filter(|&j| j != class)
            .map(|j| self.counts[j][class])
            .sum();
        let tn = self.total() - tp - fn_ - fp;
        (tp, fn_, fp, tn)
    }

    /// Plain C x C CSV (rows = true class, columns = predicted class).
    pub fn to_csv_string(&self) -> String {
        let mut s = String::new();
        for row in &self.counts {
            let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }
}

pub fn confusion(preds: &[usize], truths: &[usize], classes: usize) -> Result<ConfusionMatrix> {
    if preds.len() != truths.len() {
        return Err(Error::Config(format!(
            "prediction/truth length mismatch: {} vs {}",
            preds.len(),
            truths.len()
        )));
    }
    let mut counts = vec![vec![0u64; classes]; classes];
    for (&p, &t) in preds.iter().zip(truths) {
        if t >= classes {
            return Err(Error::IndexOutOfRange { what: "true label", index: t, size: classes });
        }
        if p >= classes {
            return Err(Error::IndexOutOfRange { what: "predicted label", index: p, size: classes });
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { classes, counts })
}

/// Fraction of correct predictions: trace / total.
pub fn accuracy(cm: &ConfusionMatrix) -> f64 {
    let total = cm.total();
    if total == 0 {
        return 0.0;
    }
    let trace: u64 = (0..cm.classes).map(|c| cm.counts[c][c]).sum();
    trace as f64 / total as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassMetrics {
    pub class: usize,
    pub se: f64,
    pub sp: f64,
    pub fm: f64,
    pub j: f64,
    /// None when the class has no positives or no negatives in the truth.
    pub auc: Option<f64>,
    pub degenerate: Vec<&'static str>,
}

/// One-vs-rest metrics for `class`: SE = TP/(TP+FN), SP = TN/(TN+FP),
/// FM = 2TP/(2TP+FP+FN), J = SE+SP-1. J is flagged (and zeroed) whenever
/// SE or SP is.
pub fn per_class_metrics(cm: &ConfusionMatrix, class: usize) -> ClassMetrics {
    let (tp, fn_, fp, tn) = cm.ovr_counts(class);
    let mut flags = Vec::new();
    let ratio = |num: u64, den: u64, name: &'static str, flags: &mut Vec<&'static str>| {
        if den == 0 {
            flags.push(name);
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let se = ratio(tp, tp + fn_, "SE", &mut flags);
    let sp = ratio(tn, tn + fp, "SP", &mut flags);
    let fm = ratio(2 * tp, 2 * tp + fp + fn_, "FM", &mut flags);
    let j = if flags.contains(&"SE") || flags.contains(&"SP") {
        flags.push("J");
        0.0
    } else {
        se + sp - 1.0
    };
    ClassMetrics { class, se, sp, fm, j, auc: None, degenerate: flags }
}

/// One-vs-rest AUC for `class` from column `class` of the score matrix,
/// via the rank statistic (ties get average rank, i.e. 0.5 credit).
/// None when the truth has no positives or no negatives.
pub fn auc_ovr(scores: &Matrix, truths: &[usize], class: usize) -> Option<f64> {
    let n = truths.len();
    let p = truths.iter().filter(|&&t| t == class).count();
    let neg = n - p;
    if p == 0 || neg == 0 {
        return None;
    }
    let col: Vec<f64> = (0..n).map(|i| scores.get(i, class)).collect();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_unstable_by(|&a, &b| col[a].total_cmp(&col[b]));
    let mut rank = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && col[idx[j + 1]] == col[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            rank[k] = avg;
        }
        i = j + 1;
    }
    let sum_pos: f64 = (0..n).filter(|&i| truths[i] == class).map(|i| rank[i]).sum();
    Some((sum_pos - (p * (p + 1)) as f64 / 2.0) / (p as f64 * neg as f64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MacroMetrics {
    pub se: f64,
    pub sp: f64,
    pub fm: f64,
    pub j: f64,
    pub auc: f64,
    /// Metrics with no contributing (non-degenerate) classes.
    pub degenerate: Vec<&'static str>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub per_class: Vec<ClassMetrics>,
    pub macro_avg: MacroMetrics,
}

/// Full report from an n x C score matrix and true labels.
pub fn evaluate(scores: &Matrix, truths: &[usize], classes: usize) -> Result<EvalReport> {
    if classes < 2 {
        return Err(Error::Config("evaluation needs at least 2 classes".into()));
    }
    if scores.rows() != truths.len() || scores.cols() != classes {
        return Err(Error::Config(format!(
            "score matrix is {}x{}, expected {}x{classes}",
            scores.rows(),
            scores.cols(),
            truths.len()
        )));
    }
    if truths.is_empty() {
        return Err(Error::Config("evaluation set is empty".into()));
    }
    let preds = predict_labels(scores);
    let cm = confusion(&preds, truths, classes)?;
    let mut per_class = Vec::with_capacity(classes);
    for c in 0..classes {
        let mut m = per_class_metrics(&cm, c);
        m.auc = auc_ovr(scores, truths, c);
        if m.auc.is_none() {
            m.degenerate.push("AUC");
        }
        per_class.push(m);
    }
    fn macro_mean(vals: Vec<f64>, name: &'static str, flags: &mut Vec<&'static str>) -> f64 {
        if vals.is_empty() {
            flags.push(name);
            0.0
        } else {
            vals.iter().sum::<f64>() / vals.len() as f64
        }
    }
    let keep = |name: &'static str, get: fn(&ClassMetrics) -> f64| -> Vec<f64> {
        per_class
            .iter()
            .filter(|m| !m.degenerate.contains(&name))
            .map(get)
            .collect()
    };
    let aucs: Vec<f64> = per_class.iter().filter_map(|m| m.auc).collect();
    let mut flags = Vec::new();
    let macro_avg = MacroMetrics {
        se: macro_mean(keep("SE", |m| m.se), "SE", &mut flags),
        sp: macro_mean(keep("SP", |m| m.sp), "SP", &mut flags),
        fm: macro_mean(keep("FM", |m| m.fm), "FM", &mut flags),
        j: macro_mean(keep("J", |m| m.j), "J", &mut flags),
        auc: macro_mean(aucs, "AUC", &mut flags),
        degenerate: flags,
    };
    Ok(EvalReport { accuracy: accuracy(&cm), confusion: cm, per_class, macro_avg })
}

/// Run the model over a dataset; returns the n x C probability matrix and
/// the true labels.
pub fn score_dataset(
    params: &ModelParams,
    cfg: &ModelConfig,
    data: &[EncodedExample],
) -> Result<(Matrix, Vec<usize>)> {
    let mut scores = Matrix::zeros(data.len(), cfg.num_classes);
    let mut truths = Vec::with_capacity(data.len());
    for (i, ex) in data.iter().enumerate() {
        let cache = forward(ex, params, cfg)?;
        scores.row_mut(i).copy_from_slice(cache.probs.row(0));
        truths.push(ex.label);
    }
    Ok((scores, truths))
}

impl EvalReport {
    fn class_display(&self, c: usize, names: Option<&[String]>) -> String {
        match names {
            Some(ns) if c < ns.len() => ns[c].clone(),
            _ => c.to_string(),
        }
    }

    /// Pretty JSON: {"global":{"CA"},"per_class":[{class,SE,SP,FM,J,AUC,
    /// degenerate_flags}],"macro":{...}}. Degenerate AUC serializes as 0
    /// alongside its flag.
    pub fn to_json_string(&self, class_names: Option<&[String]>) -> String {
        let per_class: Vec<serde_json::Value> = self
            .per_class
            .iter()
            .map(|m| {
                let mut entry = serde_json::json!({
                    "class": m.class,
                    "SE": m.se,
                    "SP": m.sp,
                    "FM": m.fm,
                    "J": m.j,
                    "AUC": m.auc.unwrap_or(0.0),
                    "degenerate_flags": m.degenerate,
                });
                if class_names.is_some() {
                    entry["name"] =
                        serde_json::Value::String(self.class_display(m.class, class_names));
                }
                entry
            })
            .collect();
        let doc = serde_json::json!({
            "global": { "CA": self.accuracy },
            "per_class": per_class,
            "macro": {
                "SE": self.macro_avg.se,
                "SP": self.macro_avg.sp,
                "FM": self.macro_avg.fm,
                "J": self.macro_avg.j,
                "AUC": self.macro_avg.auc,
                "degenerate_flags": self.macro_avg.degenerate,
            },
        });
        serde_json::to_string_pretty(&doc).expect("report serialization")
    }

    /// Long-form CSV (metric,class,value) with one row per metric and
    /// class, for bar-chart tooling.
    pub fn to_metrics_csv(&self, class_names: Option<&[String]>) -> String {
        let mut s = String::from("metric,class,value\n");
        let cols: [(&str, fn(&ClassMetrics) -> f64); 5] = [
            ("SE", |m| m.se),
            ("SP", |m| m.sp),
            ("FM", |m| m.fm),
            ("J", |m| m.j),
            ("AUC", |m| m.auc.unwrap_or(0.0)),
        ];
        for (name, pick) in cols {
            for m in &self.per_class {
                s.push_str(&format!(
                    "{},{},{}\n",
                    name,
                    self.class_display(m.class, class_names),
                    pick(m)
                ));
            }
        }
        s
    }
}
