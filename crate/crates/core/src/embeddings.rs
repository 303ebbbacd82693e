//! Embedding tables: pretrained word vectors loaded from the text format,
//! randomly initialized character tables, and position-distance tables.
//!
//! Word vectors use the plain text format: an optional `V D` header line,
//! then one token and D space-separated floats per line. Lookup lowercases
//! the query and falls back to the UNK row, so it is total. On load, an UNK
//! row equal to the mean of all loaded rows is appended unless the file
//! already carries a row for the reserved token `<unk>` (the form written by
//! [`save_word_embeddings`], which makes save→load an identity).

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{Rng, Tensor};

/// Reserved token naming the UNK row in saved embedding files.
pub const UNK_TOKEN: &str = "<unk>";

/// Padding pseudo-character for character-level convolutions; its embedding
/// row is fixed at zero.
pub const PAD_TOKEN: &str = "<pad>";

#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dim: usize,
    /// Row index per token (lowercased when `fold_case`), insertion-ordered
    /// via `tokens`.
    index: HashMap<String, usize>,
    tokens: Vec<String>,
    matrix: Tensor,
    unk_row: usize,
    trainable: bool,
    /// Word tables fold case at load and lookup; character tables keep case
    /// distinctions.
    fold_case: bool,
}

impl EmbeddingTable {
    /// Build a table from explicit rows; appends an UNK row equal to the
    /// mean of the given rows unless `tokens` already contains `<unk>`.
    pub fn from_rows(tokens: Vec<String>, rows: Vec<Vec<f64>>, trainable: bool) -> Result<EmbeddingTable> {
        EmbeddingTable::from_rows_with(tokens, rows, trainable, true)
    }

    pub fn from_rows_with(
        tokens: Vec<String>,
        rows: Vec<Vec<f64>>,
        trainable: bool,
        fold_case: bool,
    ) -> Result<EmbeddingTable> {
        if tokens.is_empty() || tokens.len() != rows.len() {
            return Err(Error::InvalidArgument {
                op: "EmbeddingTable::from_rows",
                msg: format!("{} tokens vs {} rows", tokens.len(), rows.len()),
            });
        }
        let dim = rows[0].len();
        if dim == 0 || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidArgument {
                op: "EmbeddingTable::from_rows",
                msg: "inconsistent row dimensionality".into(),
            });
        }
        let mut index = HashMap::new();
        let mut stored_tokens = Vec::with_capacity(tokens.len() + 1);
        let mut data: Vec<f64> = Vec::with_capacity((tokens.len() + 1) * dim);
        let mut unk_row = None;
        for (token, row) in tokens.into_iter().zip(rows.iter()) {
            let token = if fold_case { token.to_lowercase() } else { token };
            if index.contains_key(&token) {
                log::warn!("duplicate embedding token {token:?}; keeping first");
                continue;
            }
            if token == UNK_TOKEN {
                unk_row = Some(stored_tokens.len());
            }
            index.insert(token.clone(), stored_tokens.len());
            stored_tokens.push(token);
            data.extend_from_slice(row);
        }
        let unk_row = match unk_row {
            Some(i) => i,
            None => {
                let v = stored_tokens.len();
                let mut mean = vec![0.0; dim];
                for row in data.chunks(dim) {
                    for (m, &x) in mean.iter_mut().zip(row) {
                        *m += x;
                    }
                }
                for m in &mut mean {
                    *m /= v as f64;
                }
                index.insert(UNK_TOKEN.to_string(), v);
                stored_tokens.push(UNK_TOKEN.to_string());
                data.extend_from_slice(&mean);
                v
            }
        };
        let v = stored_tokens.len();
        let matrix = if trainable {
            Tensor::param(&[v, dim], data)?
        } else {
            Tensor::from_vec(&[v, dim], data)?
        };
        Ok(EmbeddingTable {
            dim,
            index,
            tokens: stored_tokens,
            matrix,
            unk_row,
            trainable,
            fold_case,
        })
    }

    /// New table with entries uniform in [-scale, +scale]; always trainable.
    /// A trailing UNK row (also random) is appended.
    pub fn new_random(vocab: &[String], dim: usize, rng: &mut Rng, scale: f64) -> Result<EmbeddingTable> {
        EmbeddingTable::new_random_with(vocab, dim, rng, scale, true)
    }

    /// Case-sensitive random table over the character inventory.
    pub fn new_random_chars(dim: usize, rng: &mut Rng, scale: f64) -> Result<EmbeddingTable> {
        EmbeddingTable::new_random_with(&char_vocab(), dim, rng, scale, false)
    }

    fn new_random_with(
        vocab: &[String],
        dim: usize,
        rng: &mut Rng,
        scale: f64,
        fold_case: bool,
    ) -> Result<EmbeddingTable> {
        if dim == 0 {
            return Err(Error::InvalidArgument {
                op: "EmbeddingTable::new_random",
                msg: "dim must be positive".into(),
            });
        }
        let mut tokens: Vec<String> = vocab.to_vec();
        if !tokens.iter().any(|t| t == UNK_TOKEN) {
            tokens.push(UNK_TOKEN.to_string());
        }
        let rows: Vec<Vec<f64>> = tokens
            .iter()
            .map(|_| (0..dim).map(|_| rng.uniform_in(-scale, scale)).collect())
            .collect();
        EmbeddingTable::from_rows_with(tokens, rows, true, fold_case)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Rows including UNK.
    pub fn vocab_size(&self) -> usize {
        self.tokens.len()
    }

    pub fn unk_row(&self) -> usize {
        self.unk_row
    }

    pub fn trainable(&self) -> bool {
        self.trainable
    }

    pub fn fold_case(&self) -> bool {
        self.fold_case
    }

    pub fn matrix(&self) -> &Tensor {
        &self.matrix
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Row index of a token: lowercased lookup (for case-folded tables),
    /// UNK on miss. Total.
    pub fn lookup(&self, token: &str) -> usize {
        let key: std::borrow::Cow<'_, str> = if self.fold_case {
            token.to_lowercase().into()
        } else {
            token.into()
        };
        match self.index.get(key.as_ref()) {
            Some(&i) => i,
            None => self.unk_row,
        }
    }

    /// Copy of one row's values.
    pub fn row_values(&self, row: usize) -> Vec<f64> {
        let data = self.matrix.data_ref();
        data[row * self.dim..(row + 1) * self.dim].to_vec()
    }

    /// Gather embedding rows for the given tokens as an [L × dim] tensor on
    /// the gradient tape (if trainable).
    pub fn embed_tokens(&self, tokens: &[&str]) -> Result<Tensor> {
        let rows: Vec<usize> = tokens.iter().map(|t| self.lookup(t)).collect();
        self.matrix.gather_rows(&rows)
    }

    /// Gather rows by index.
    pub fn embed_rows(&self, rows: &[usize]) -> Result<Tensor> {
        self.matrix.gather_rows(rows)
    }

    /// Independent copy with its own parameter storage.
    pub fn duplicate(&self) -> Result<EmbeddingTable> {
        let rows: Vec<Vec<f64>> = self
            .matrix
            .to_vec()
            .chunks(self.dim)
            .map(|c| c.to_vec())
            .collect();
        EmbeddingTable::from_rows_with(self.tokens.clone(), rows, self.trainable, self.fold_case)
    }
}

/// Sorted, deduplicated, lowercased vocabulary from an iterator of tokens.
pub fn token_vocab<'a>(tokens: impl Iterator<Item = &'a str>) -> Vec<String> {
    let set: std::collections::BTreeSet<String> = tokens.map(|t| t.to_lowercase()).collect();
    set.into_iter().collect()
}

/// Character inventory for character-level features: the 95 printable ASCII
/// characters plus a padding pseudo-character. (UNK is appended by the table
/// itself.)
pub fn char_vocab() -> Vec<String> {
    let mut v: Vec<String> = (0x20u8..0x7f).map(|b| (b as char).to_string()).collect();
    v.push(PAD_TOKEN.to_string());
    v
}

/// Row indices of a word's characters in a table built over [`char_vocab`];
/// characters outside printable ASCII map to UNK.
pub fn char_indices(table: &EmbeddingTable, word: &str) -> Vec<usize> {
    word.chars()
        .map(|c| {
            if (' '..='~').contains(&c) {
                table.lookup(&c.to_string())
            } else {
                table.unk_row()
            }
        })
        .collect()
}

/// Parse the word-vector text format. `source` names the input in errors.
pub fn parse_word_embeddings(text: &str, source: &str, trainable: bool) -> Result<EmbeddingTable> {
    let mut lines = text.lines().enumerate().peekable();
    let mut declared: Option<(usize, usize)> = None;
    if let Some((_, first)) = lines.peek() {
        let fields: Vec<&str> = first.split(' ').collect();
        if fields.len() == 2 {
            if let (Ok(v), Ok(d)) = (fields[0].parse::<usize>(), fields[1].parse::<usize>()) {
                declared = Some((v, d));
                lines.next();
            }
        }
    }
    let mut tokens = Vec::new();
    let mut rows = Vec::new();
    let mut dim: Option<usize> = None;
    for (i, line) in lines {
        let line_no = i + 1;
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(' ');
        let token = fields.next().unwrap_or("");
        if token.is_empty() {
            return Err(Error::parse(source, line_no, "missing token"));
        }
        let values: Vec<f64> = fields
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::parse(source, line_no, format!("bad float {f:?}")))
            })
            .collect::<Result<_>>()?;
        let expect = dim.or(declared.map(|(_, d)| d)).unwrap_or(values.len());
        if values.len() != expect || values.is_empty() {
            return Err(Error::parse(
                source,
                line_no,
                format!("expected {expect} values, got {}", values.len()),
            ));
        }
        dim.get_or_insert(values.len());
        tokens.push(token.to_string());
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(Error::parse(source, 1, "empty embedding file"));
    }
    if let Some((v, _)) = declared {
        if v != rows.len() {
            log::warn!("{source}: header declares {v} rows, found {}", rows.len());
        }
    }
    EmbeddingTable::from_rows(tokens, rows, trainable)
}

pub fn load_word_embeddings(path: impl AsRef<Path>, trainable: bool) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_word_embeddings(&text, &path.display().to_string(), trainable)
}

/// Write a table in the same text format, `V D` header included. Values are
/// printed with Rust's shortest round-trip float formatting, so reloading
/// reproduces the matrix exactly.
pub fn save_word_embeddings(path: impl AsRef<Path>, table: &EmbeddingTable) -> Result<()> {
    let mut s = format!("{} {}\n", table.vocab_size(), table.dim());
    let data = table.matrix.data_ref();
    for (r, token) in table.tokens.iter().enumerate() {
        s.push_str(token);
        for v in &data[r * table.dim..(r + 1) * table.dim] {
            s.push(' ');
            s.push_str(&v.to_string());
        }
        s.push('\n');
    }
    fs::write(path, s)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loads_header_file_and_appends_mean_unk() {
        let table = parse_word_embeddings("2 3\na 1 0 0\nb 0 1 0\n", "t", false).unwrap();
        assert_eq!(table.vocab_size(), 3);
        assert_eq!(table.dim(), 3);
        assert_eq!(table.row_values(table.unk_row()), vec![0.5, 0.5, 0.0]);
    }

    #[test]
    fn short_row_is_parse_error_with_line() {
        let err = parse_word_embeddings("2 3\na 1 0 0\nb 0 1\n", "vecs.txt", false).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("vecs.txt:3"), "{msg}");
    }

    #[test]
    fn headerless_file_accepted() {
        let table = parse_word_embeddings("a 1 2\nb 3 4\n", "t", false).unwrap();
        assert_eq!(table.dim(), 2);
        assert_eq!(table.vocab_size(), 3);
    }

    #[test]
    fn empty_file_rejected() {
        assert!(parse_word_embeddings("", "t", false).is_err());
        assert!(parse_word_embeddings("\n\n", "t", false).is_err());
    }

    #[test]
    fn duplicate_token_keeps_first() {
        let table = parse_word_embeddings("a 1 2\nA 3 4\nb 5 6\n", "t", false).unwrap();
        assert_eq!(table.vocab_size(), 3); // a, b, unk
        assert_eq!(table.row_values(table.lookup("a")), vec![1.0, 2.0]);
    }

    #[test]
    fn lookup_is_case_folded_and_total() {
        let table = parse_word_embeddings("turmeric 1 0\nother 0 1\n", "t", false).unwrap();
        assert_eq!(table.lookup("Turmeric"), table.lookup("turmeric"));
        assert_eq!(table.lookup("qzxv"), table.unk_row());
        assert_eq!(table.lookup(""), table.unk_row());
    }

    #[test]
    fn save_load_round_trip_is_identical() {
        let mut rng = Rng::seed_from(3);
        let vocab: Vec<String> = ["garlic", "nausea", "takes"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let table = EmbeddingTable::new_random(&vocab, 7, &mut rng, 0.5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vecs.txt");
        save_word_embeddings(&path, &table).unwrap();
        let back = load_word_embeddings(&path, true).unwrap();
        assert_eq!(back.vocab_size(), table.vocab_size());
        assert_eq!(back.unk_row(), table.unk_row());
        assert_eq!(back.matrix().to_vec(), table.matrix().to_vec());
    }

    #[test]
    fn char_table_shape_over_printable_ascii() {
        let mut rng = Rng::seed_from(1);
        let table = EmbeddingTable::new_random_chars(25, &mut rng, 0.5).unwrap();
        assert_eq!(table.vocab_size(), 97); // 95 printable + pad + unk
        assert_eq!(table.dim(), 25);
        // Character case is preserved.
        assert_ne!(table.lookup("A"), table.lookup("a"));
    }

    #[test]
    fn same_seed_same_random_table() {
        let vocab = char_vocab();
        let a = EmbeddingTable::new_random(&vocab, 8, &mut Rng::seed_from(5), 0.5).unwrap();
        let b = EmbeddingTable::new_random(&vocab, 8, &mut Rng::seed_from(5), 0.5).unwrap();
        assert_eq!(a.matrix().to_vec(), b.matrix().to_vec());
    }

    #[test]
    fn random_table_mean_near_zero() {
        let vocab: Vec<String> = (0..2000).map(|i| format!("w{i}")).collect();
        let table =
            EmbeddingTable::new_random(&vocab, 50, &mut Rng::seed_from(8), 0.5).unwrap();
        let values = table.matrix().to_vec();
        let mean: f64 = values.iter().sum::<f64>() / values.len() as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn zero_dim_rejected() {
        assert!(EmbeddingTable::new_random(&char_vocab(), 0, &mut Rng::seed_from(1), 0.5).is_err());
    }

    #[test]
    fn frozen_table_gets_no_gradient() {
        let table = parse_word_embeddings("a 1 2\nb 3 4\n", "t", false).unwrap();
        let loss = table.embed_tokens(&["a", "b"]).unwrap().sum_all();
        loss.backward().unwrap();
        assert!(table.matrix().grad().is_none());

        let trainable = parse_word_embeddings("a 1 2\nb 3 4\n", "t", true).unwrap();
        let loss = trainable.embed_tokens(&["a", "qzxv"]).unwrap().sum_all();
        loss.backward().unwrap();
        let grad = trainable.matrix().grad().unwrap();
        assert!(grad.iter().any(|&g| g != 0.0));
        // Row "b" was not used: zero gradient.
        let b = trainable.lookup("b");
        assert!(grad[b * 2..b * 2 + 2].iter().all(|&g| g == 0.0));
    }
}
