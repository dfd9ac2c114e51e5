//! Lossless model persistence: a versioned, line-oriented text format that
//! stores the run config, the fitted vocabulary and document frequencies,
//! and every parameter matrix with shortest-round-trip decimal floats.
//!
//! Layout (in order, one logical block per line group):
//!   emoseq-artifact v1
//!   config <byte_len>           raw TOML snapshot, then one newline
//!   vocab <n>                   n corpus tokens, one per line, id order
//!   tfidf <corpus_size> <len>   one line of <len> document frequencies
//!   matrix <name> <rows> <cols> rows lines of cols floats (canonical order)
//!   end
//!
//! IDF values are not stored: they are recomputed from the integers with
//! the fitting formula, which reproduces them bit-exactly.

use std::fmt::Write as _;
use std::path::Path;

use crate::config::RunConfig;
use crate::model::{ModelConfig, ModelParams};
use crate::textpipe::{TfidfModel, Vocabulary};
use crate::{Error, Result};

pub const MAGIC: &str = "emoseq-artifact";
pub const FORMAT_VERSION: u32 = 1;

/// Everything a trained model needs to make predictions.
#[derive(Debug, Clone)]
pub struct ModelArtifact {
    pub config: RunConfig,
    pub vocab: Vocabulary,
    pub tfidf: TfidfModel,
    pub params: ModelParams,
}

impl ModelArtifact {
    /// Inference-time model config: dimensions from the stored config,
    /// vocabulary size from the stored vocabulary.
    pub fn model_config(&self) -> ModelConfig {
        self.config.to_model_config(self.vocab.size(), self.config.seed)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{MAGIC} v{FORMAT_VERSION}").unwrap();
        let cfg = self.config.to_toml_string();
        writeln!(s, "config {}", cfg.len()).unwrap();
        s.push_str(&cfg);
        s.push('\n');
        let toks = self.vocab.corpus_tokens();
        writeln!(s, "vocab {}", toks.len()).unwrap();
        for t in toks {
            writeln!(s, "{t}").unwrap();
        }
        let df = self.tfidf.doc_freq();
        writeln!(s, "tfidf {} {}", self.tfidf.corpus_size(), df.len()).unwrap();
        let cells: Vec<String> = df.iter().map(usize::to_string).collect();
        writeln!(s, "{}", cells.join(" ")).unwrap();
        for (name, m) in self.params.entries() {
            writeln!(s, "matrix {} {} {}", name, m.rows(), m.cols()).unwrap();
            for i in 0..m.rows() {
                let row: Vec<String> = m.row(i).iter().map(f64::to_string).collect();
                writeln!(s, "{}", row.join(" ")).unwrap();
            }
        }
        writeln!(s, "end").unwrap();
        s
    }

    pub fn from_text(text: &str) -> Result<ModelArtifact> {
        let mut cur = Cursor { text, pos: 0 };
        let (off, first) = cur.line()?;
        let expected = format!("{MAGIC} v{FORMAT_VERSION}");
        if first != expected {
            if let Some(v) = first.strip_prefix(&format!("{MAGIC} v")) {
                return Err(Error::Incompatible(format!(
                    "artifact format v{v} is not readable by this build (expects v{FORMAT_VERSION})"
                )));
            }
            return Err(parse_err(off, "not an emoseq model artifact"));
        }

        let (off, header) = cur.line()?;
        let len: usize = field(header.strip_prefix("config "), off, "config header")?;
        let (cfg_off, cfg_text) = cur.block(len)?;
        let config = RunConfig::from_toml_str(cfg_text)
            .map_err(|e| parse_err(cfg_off, &format!("embedded config: {e}")))?;

        let (off, header) = cur.line()?;
        let n_tokens: usize = field(header.strip_prefix("vocab "), off, "vocab header")?;
        let mut tokens = Vec::with_capacity(n_tokens);
        for _ in 0..n_tokens {
            let (_, tok) = cur.line()?;
            tokens.push(tok.to_string());
        }
        let vocab = Vocabulary::from_ranked_tokens(tokens)
            .map_err(|e| parse_err(off, &format!("vocabulary: {e}")))?;

        let (off, header) = cur.line()?;
        let rest = header
            .strip_prefix("tfidf ")
            .ok_or_else(|| parse_err(off, "expected tfidf header"))?;
        let mut it = rest.split_whitespace();
        let corpus_size: usize = parse_tok(it.next(), off, "tfidf corpus size")?;
        let df_len: usize = parse_tok(it.next(), off, "tfidf length")?;
        if df_len != vocab.size() {
            return Err(parse_err(
                off,
                &format!("tfidf length {df_len} does not match vocabulary size {}", vocab.size()),
            ));
        }
        let (df_off, df_line) = cur.line()?;
        let mut doc_freq = Vec::with_capacity(df_len);
        for tok in df_line.split_whitespace() {
            doc_freq.push(parse_tok(Some(tok), df_off, "document frequency")?);
        }
        if doc_freq.len() != df_len {
            return Err(parse_err(
                df_off,
                &format!("expected {df_len} document frequencies, found {}", doc_freq.len()),
            ));
        }
        let tfidf = TfidfModel::from_doc_freq(corpus_size, doc_freq);

        let model_cfg = config.to_model_config(vocab.size(), config.seed);
        model_cfg
            .validate()
            .map_err(|e| parse_err(cfg_off, &format!("embedded config: {e}")))?;
        let mut params = ModelParams::zeros(&model_cfg);
        for (name, m) in params.entries_mut() {
            let (off, header) = cur.line()?;
            let expect = format!("matrix {} {} {}", name, m.rows(), m.cols());
            if header != expect {
                return Err(parse_err(off, &format!("expected '{expect}', found '{header}'")));
            }
            for i in 0..m.rows() {
                let (row_off, line) = cur.line()?;
                let row = m.row_mut(i);
                let mut count = 0;
                for tok in line.split_whitespace() {
                    if count == row.len() {
                        count += 1;
                        break;
                    }
                    row[count] = tok.parse::<f64>().map_err(|_| {
                        parse_err(row_off, &format!("bad float '{tok}' in matrix {name} row {i}"))
                    })?;
                    count += 1;
                }
                if count != row.len() {
                    return Err(parse_err(
                        row_off,
                        &format!("matrix {name} row {i} expects {} values", row.len()),
                    ));
                }
            }
        }

        let (off, last) = cur.line()?;
        if last != "end" {
            return Err(parse_err(off, "expected end marker"));
        }
        if !cur.text[cur.pos..].trim().is_empty() {
            return Err(parse_err(cur.pos, "trailing data after end marker"));
        }
        Ok(ModelArtifact { config, vocab, tfidf, params })
    }
}

pub fn save_model(path: &Path, artifact: &ModelArtifact) -> Result<()> {
    std::fs::write(path, artifact.to_text()).map_err(|e| io_with_path(e, path, "write"))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ModelArtifact> {
    let text =
        std::fs::read_to_string(path).map_err(|e| io_with_path(e, path, "read"))?;
    ModelArtifact::from_text(&text)
}

fn io_with_path(e: std::io::Error, path: &Path, verb: &str) -> Error {
    Error::Io(std::io::Error::new(
        e.kind(),
        format!("cannot {verb} model artifact '{}': {e}", path.display()),
    ))
}

fn parse_err(offset: usize, msg: &str) -> Error {
    Error::Parse { offset, msg: msg.to_string() }
}

fn field<T: std::str::FromStr>(tok: Option<&str>, offset: usize, what: &str) -> Result<T> {
    parse_tok(tok, offset, what)
}

fn parse_tok<T: std::str::FromStr>(tok: Option<&str>, offset: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| parse_err(offset, &format!("missing {what}")))?;
    tok.trim()
        .parse::<T>()
        .map_err(|_| parse_err(offset, &format!("unreadable {what}: '{tok}'")))
}

/// Byte-offset-tracking reader over the artifact text.
struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    /// Next line without its newline, plus the byte offset it starts at.
    fn line(&mut self) -> Result<(usize, &'a str)> {
        if self.pos >= self.text.len() {
            return Err(parse_err(self.pos, "unexpected end of file"));
        }
        let start = self.pos;
        let rest = &self.text[start..];
        let (line, advance) = match rest.find('\n') {
            Some(i) => (&rest[..i], i + 1),
            None => (rest, rest.len()),
        };
        self.pos += advance;
        Ok((start, line))
    }

    /// Exactly `n` raw bytes followed by a newline separator.
    fn block(&mut self, n: usize) -> Result<(usize, &'a str)> {
        let start = self.pos;
        if start + n > self.text.len() || !self.text.is_char_boundary(start + n) {
            return Err(parse_err(start, "config block extends past end of file"));
        }
        self.pos += n;
        if !self.text[self.pos..].starts_with('\n') {
            return Err(parse_err(self.pos, "missing newline after config block"));
        }
        self.pos += 1;
        Ok((start, &self.text[start..start + n]))
    }
}
