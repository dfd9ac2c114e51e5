//! Text preparation: tokenization, vocabulary construction, TF-IDF
//! fitting/weighting, dataset CSV ingestion, encoding, and the seeded
//! train/test split.
//!
//! IDF uses the smoothed form `ln((1+N)/(1+df)) + 1`, fitted on the training
//! split only. TF is normalized by document length and always computed from
//! the untruncated token sequence.

use std::collections::HashMap;
use std::path::Path;

use crate::rng::SplitMix64;
use crate::{Error, Result};

/// Reserved padding id.
pub const PAD: usize = 0;
/// Reserved out-of-vocabulary id.
pub const UNK: usize = 1;

const PAD_TOKEN: &str = "<pad>";
const UNK_TOKEN: &str = "<unk>";

/// One raw dataset row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub text: String,
    pub label: usize,
}

/// Token/id bijection with PAD=0 and UNK=1 reserved.
///
/// The reserved display strings contain non-alphanumeric characters, so
/// `tokenize` can never produce them as corpus tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    token_to_id: HashMap<String, usize>,
    id_to_token: Vec<String>,
}

impl Vocabulary {
    /// Build from corpus tokens already ranked into id order (id 2 first).
    pub fn from_ranked_tokens<I>(ranked: I) -> Result<Self>
    where
        I: IntoIterator<Item = String>,
    {
        let mut id_to_token = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        id_to_token.extend(ranked);
        let mut token_to_id = HashMap::with_capacity(id_to_token.len());
        for (id, tok) in id_to_token.iter().enumerate() {
            if token_to_id.insert(tok.clone(), id).is_some() {
                return Err(Error::Config(format!("duplicate vocabulary token '{tok}'")));
            }
        }
        Ok(Self {
            token_to_id,
            id_to_token,
        })
    }

    /// Total id count, reserved ids included.
    pub fn size(&self) -> usize {
        self.id_to_token.len()
    }

    /// Map a token to its id, or UNK when absent.
    pub fn id(&self, token: &str) -> usize {
        self.token_to_id.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.id_to_token.get(id).map(String::as_str)
    }

    /// Corpus tokens in id order, reserved entries excluded.
    pub fn corpus_tokens(&self) -> &[String] {
        &self.id_to_token[2..]
    }
}

/// Per-token document frequencies and smoothed IDF values.
///
/// `idf[PAD]` and `idf[UNK]` are stored as 0 so their TF-IDF weight is zero
/// by construction; real tokens follow `ln((1+N)/(1+df)) + 1 > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TfidfModel {
    corpus_size: usize,
    doc_freq: Vec<usize>,
    idf: Vec<f64>,
}

impl TfidfModel {
    /// Rebuild from the persisted integers; IDF is recomputed with the same
    /// formula, so round-trips are bit-exact.
    pub fn from_doc_freq(corpus_size: usize, doc_freq: Vec<usize>) -> Self {
        let n = corpus_size as f64;
        let idf = doc_freq
            .iter()
            .enumerate()
            .map(|(id, &df)| {
                if id == PAD || id == UNK {
                    0.0
                } else {
                    ((1.0 + n) / (1.0 + df as f64)).ln() + 1.0
                }
            })
            .collect();
        Self {
            corpus_size,
            doc_freq,
            idf,
        }
    }

    pub fn corpus_size(&self) -> usize {
        self.corpus_size
    }

    pub fn doc_freq(&self) -> &[usize] {
        &self.doc_freq
    }

    pub fn idf(&self, id: usize) -> f64 {
        self.idf[id]
    }
}

/// One model-ready example: fixed-length id row plus aligned TF-IDF weights.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedExample {
    pub token_ids: Vec<usize>,
    pub tfidf_weights: Vec<f64>,
    pub valid_len: usize,
    pub label: usize,
}

impl EncodedExample {
    /// True when tokenization produced nothing; the model pools such
    /// examples to the zero vector and the classifier bias decides.
    pub fn is_degenerate(&self) -> bool {
        self.valid_len == 0
    }
}

/// Lowercase, split on any non-alphanumeric character, drop empty pieces.
/// No stemming, no stopword removal.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

/// Rank corpus tokens by (frequency desc, token asc), keep those with
/// frequency ≥ `min_freq`, truncate to `max_size` total ids.
pub fn build_vocab(corpus: &[Document], max_size: usize, min_freq: usize) -> Result<Vocabulary> {
    if corpus.is_empty() {
        return Err(Error::Config("cannot build vocabulary from an empty corpus".into()));
    }
    if max_size < 2 {
        return Err(Error::Config(format!(
            "vocab max_size must be at least 2 (got {max_size})"
        )));
    }
    let mut freq: HashMap<String, usize> = HashMap::new();
    for doc in corpus {
        for tok in tokenize(&doc.text) {
            *freq.entry(tok).or_insert(0) += 1;
        }
    }
    let mut ranked: Vec<(String, usize)> = freq
        .into_iter()
        .filter(|&(_, f)| f >= min_freq)
        .collect();
    ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(max_size - 2);
    Vocabulary::from_ranked_tokens(ranked.into_iter().map(|(t, _)| t))
}

/// Count per-token document frequencies over `corpus` and derive IDF.
/// Call with the TRAINING split only.
pub fn fit_idf(corpus: &[Document], vocab: &Vocabulary) -> Result<TfidfModel> {
    if corpus.is_empty() {
        return Err(Error::Config("cannot fit IDF on an empty corpus".into()));
    }
    let mut doc_freq = vec![0usize; vocab.size()];
    let mut seen = vec![false; vocab.size()];
    for doc in corpus {
        seen.fill(false);
        for tok in tokenize(&doc.text) {
            let id = vocab.id(&tok);
            if id != UNK && !seen[id] {
                seen[id] = true;
                doc_freq[id] += 1;
            }
        }
    }
    Ok(TfidfModel::from_doc_freq(corpus.len(), doc_freq))
}

/// TF-IDF weight of `token` within one document: `count/len × idf[token]`.
/// Reserved ids carry idf 0, so their weight is always 0.
pub fn tfidf_weight(token: usize, doc_tokens: &[usize], model: &TfidfModel) -> f64 {
    if doc_tokens.is_empty() {
        return 0.0;
    }
    let count = doc_tokens.iter().filter(|&&t| t == token).count();
    let tf = count as f64 / doc_tokens.len() as f64;
    tf * model.idf(token)
}

/// Tokenize, map to ids, truncate to the first `max_len` tokens, pad with
/// PAD. TF for each kept position is computed from the untruncated sequence.
pub fn encode(
    doc: &Document,
    vocab: &Vocabulary,
    tfidf: &TfidfModel,
    max_len: usize,
) -> EncodedExample {
    assert!(max_len >= 1, "max_len must be at least 1");
    let all_ids: Vec<usize> = tokenize(&doc.text).iter().map(|t| vocab.id(t)).collect();
    let valid_len = all_ids.len().min(max_len);
    let mut token_ids = vec![PAD; max_len];
    let mut tfidf_weights = vec![0.0; max_len];
    for t in 0..valid_len {
        token_ids[t] = all_ids[t];
        tfidf_weights[t] = tfidf_weight(all_ids[t], &all_ids, tfidf);
    }
    EncodedExample {
        token_ids,
        tfidf_weights,
        valid_len,
        label: doc.label,
    }
}

/// Seeded Fisher–Yates shuffle, then split at ⌊n×train_fraction⌋.
pub fn split_shuffle(
    dataset: &[Document],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<Document>, Vec<Document>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train_fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    if dataset.len() < 2 {
        return Err(Error::Config(format!(
            "dataset must contain at least 2 documents to split (got {})",
            dataset.len()
        )));
    }
    let mut shuffled = dataset.to_vec();
    let mut rng = SplitMix64::new(seed);
    rng.shuffle(&mut shuffled);
    let n_train = (dataset.len() as f64 * train_fraction).floor() as usize;
    let test = shuffled.split_off(n_train);
    Ok((shuffled, test))
}

/// Read a `text,label` CSV (RFC 4180 quoting). Labels must be integers in
/// `[0, num_classes)`. Errors carry the 1-based line number of the record.
pub fn load_csv(path: &Path, num_classes: usize) -> Result<Vec<Document>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)
        .map_err(|e| {
            csv_error_to_data(&e, &format!("cannot open dataset '{}'", path.display()))
        })?;

    let headers = reader
        .headers()
        .map_err(|e| csv_error_to_data(&e, "cannot read header"))?;
    if headers.len() != 2 || &headers[0] != "text" || &headers[1] != "label" {
        return Err(Error::Data {
            line: 1,
            msg: format!(
                "expected header 'text,label', found '{}'",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }

    let mut docs = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error_to_data(&e, "malformed row"))?;
        let line = record.position().map_or(0, |p| p.line());
        let text = record.get(0).unwrap_or("").to_string();
        let label_field = record.get(1).unwrap_or("");
        let label: usize = label_field.parse().map_err(|_| Error::Data {
            line,
            msg: format!("label '{label_field}' is not a non-negative integer"),
        })?;
        if label >= num_classes {
            return Err(Error::Data {
                line,
                msg: format!("label {label} out of range for {num_classes} classes"),
            });
        }
        docs.push(Document { text, label });
    }
    Ok(docs)
}

fn csv_error_to_data(e: &csv::Error, what: &str) -> Error {
    if let Some(io) = io_kind(e) {
        return Error::Io(std::io::Error::new(io, format!("{what}: {e}")));
    }
    let line = e.position().map_or(0, |p| p.line());
    Error::Data {
        line,
        msg: format!("{what}: {e}"),
    }
}

fn io_kind(e: &csv::Error) -> Option<std::io::ErrorKind> {
    match e.kind() {
        csv::ErrorKind::Io(io) => Some(io.kind()),
        _ => None,
    }
}
