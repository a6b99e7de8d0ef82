//! Token vector tables and precomputed contextual embeddings.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use log::warn;
use serde::Deserialize;

use crate::corpus::{AduKey, Corpus};
use crate::error::{Error, Result};

/// Dimension of the contextual token embeddings consumed by the pooled pipeline.
pub const CONTEXTUAL_EMBEDDING_DIM: usize = 768;

/// GloVe-style word vectors. Unknown tokens resolve to a zero vector.
#[derive(Debug, Clone, PartialEq)]
pub struct WordVectorTable {
    dim: usize,
    index: HashMap<String, usize>,
    data: Vec<f64>,
    zero: Vec<f64>,
}

impl WordVectorTable {
    pub fn new(dim: usize) -> WordVectorTable {
        WordVectorTable {
            dim,
            index: HashMap::new(),
            data: Vec::new(),
            zero: vec![0.0; dim],
        }
    }

    /// Inserts a vector; returns false (and keeps the old one) on duplicates.
    pub fn insert(&mut self, token: &str, vector: &[f64]) -> Result<bool> {
        if vector.len() != self.dim {
            return Err(Error::dim(format!("vector for {token:?}"), self.dim, vector.len()));
        }
        if self.index.contains_key(token) {
            return Ok(false);
        }
        self.index.insert(token.to_string(), self.index.len());
        self.data.extend_from_slice(vector);
        Ok(true)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.index
            .get(token)
            .map(|&i| &self.data[i * self.dim..(i + 1) * self.dim])
    }

    /// Never fails: out-of-vocabulary tokens map to the zero vector.
    pub fn lookup(&self, token: &str) -> &[f64] {
        self.get(token).unwrap_or(&self.zero)
    }

    /// Row-major matrix of token vectors plus the number of OOV tokens.
    pub fn lookup_all<'a>(&self, tokens: impl IntoIterator<Item = &'a str>) -> (Vec<f64>, usize) {
        let mut out = Vec::new();
        let mut oov = 0;
        for t in tokens {
            match self.get(t) {
                Some(v) => out.extend_from_slice(v),
                None => {
                    oov += 1;
                    out.extend_from_slice(&self.zero);
                }
            }
        }
        (out, oov)
    }

    /// Tokens in insertion order.
    pub fn tokens(&self) -> Vec<&str> {
        let mut v: Vec<(&str, usize)> = self.index.iter().map(|(k, &i)| (k.as_str(), i)).collect();
        v.sort_by_key(|&(_, i)| i);
        v.into_iter().map(|(k, _)| k).collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for tok in self.tokens() {
            out.push_str(tok);
            for x in self.get(tok).unwrap() {
                write!(out, " {x}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

pub fn load_word_vectors(path: &Path) -> Result<WordVectorTable> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_word_vectors(BufReader::new(file))
}

pub fn read_word_vectors(reader: impl BufRead) -> Result<WordVectorTable> {
    let mut table: Option<WordVectorTable> = None;
    let mut buf = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::parse(lineno, e.to_string()))?;
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else { continue };
        buf.clear();
        for f in fields {
            let x: f64 = f
                .parse()
                .map_err(|_| Error::parse(lineno, format!("non-numeric field {f:?}")))?;
            buf.push(x);
        }
        if buf.is_empty() {
            return Err(Error::parse(lineno, format!("token {token:?} has no vector")));
        }
        let t = table.get_or_insert_with(|| WordVectorTable::new(buf.len()));
        if buf.len() != t.dim {
            return Err(Error::parse(
                lineno,
                format!("dimension {} differs from {} on earlier lines", buf.len(), t.dim),
            ));
        }
        if !t.insert(token, &buf)? {
            warn!("line {lineno}: duplicate token {token:?}, keeping first occurrence");
        }
    }
    table.ok_or_else(|| Error::Data("word vector file is empty".into()))
}

/// Elementwise mean of equally sized vectors.
pub fn average_pool(vectors: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = vectors
        .first()
        .ok_or_else(|| Error::Data("average_pool of an empty list".into()))?;
    let mut out = vec![0.0; first.len()];
    for v in vectors {
        if v.len() != out.len() {
            return Err(Error::dim("average_pool input", out.len(), v.len()));
        }
        for (o, x) in out.iter_mut().zip(v) {
            *o += x;
        }
    }
    let n = vectors.len() as f64;
    out.iter_mut().for_each(|o| *o /= n);
    Ok(out)
}

/// Per-ADU contextual token vectors produced outside this crate.
#[derive(Debug, Clone)]
pub struct PrecomputedAduEmbeddings {
    dim: usize,
    vectors: HashMap<AduKey, Vec<Vec<f64>>>,
}

#[derive(Deserialize)]
struct EmbeddingRecord {
    discussion_id: String,
    global_index: usize,
    vectors: Vec<Vec<f64>>,
}

impl PrecomputedAduEmbeddings {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn token_vectors(&self, key: &AduKey) -> Option<&[Vec<f64>]> {
        self.vectors.get(key).map(Vec::as_slice)
    }

    pub fn pooled(&self, key: &AduKey) -> Result<Vec<f64>> {
        let v = self
            .vectors
            .get(key)
            .ok_or_else(|| Error::Coverage(format!("no embedding for {key}")))?;
        average_pool(v)
    }

    pub fn to_jsonl(&self) -> String {
        let mut keys: Vec<&AduKey> = self.vectors.keys().collect();
        keys.sort();
        let mut out = String::new();
        for k in keys {
            let rec = serde_json::json!({
                "discussion_id": k.discussion_id,
                "global_index": k.global_index,
                "vectors": self.vectors[k],
            });
            out.push_str(&rec.to_string());
            out.push('\n');
        }
        out
    }

    pub fn from_map(dim: usize, vectors: HashMap<AduKey, Vec<Vec<f64>>>) -> Result<Self> {
        for (k, vs) in &vectors {
            if vs.is_empty() {
                return Err(Error::Data(format!("{k} has no token vectors")));
            }
            if let Some(v) = vs.iter().find(|v| v.len() != dim) {
                return Err(Error::dim(format!("embedding for {k}"), dim, v.len()));
            }
        }
        Ok(PrecomputedAduEmbeddings { dim, vectors })
    }
}

/// Loads the JSONL embedding file and checks it covers exactly the corpus ADUs.
/// `expected_dim` pins the dimension; otherwise the first vector decides it.
pub fn load_precomputed(
    path: &Path,
    corpus: &Corpus,
    expected_dim: Option<usize>,
) -> Result<PrecomputedAduEmbeddings> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_precomputed(BufReader::new(file), corpus, expected_dim)
}

pub fn read_precomputed(
    reader: impl BufRead,
    corpus: &Corpus,
    expected_dim: Option<usize>,
) -> Result<PrecomputedAduEmbeddings> {
    let mut dim = expected_dim;
    let mut vectors = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::parse(lineno, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: EmbeddingRecord =
            serde_json::from_str(&line).map_err(|e| Error::parse(lineno, e.to_string()))?;
        let key = AduKey {
            discussion_id: rec.discussion_id,
            global_index: rec.global_index,
        };
        if corpus.adu(&key).is_none() {
            return Err(Error::parse(lineno, format!("dangling key {key} matches no corpus ADU")));
        }
        if rec.vectors.is_empty() {
            return Err(Error::parse(lineno, format!("{key} has no token vectors")));
        }
        let d = *dim.get_or_insert(rec.vectors[0].len());
        if let Some(v) = rec.vectors.iter().find(|v| v.len() != d) {
            return Err(Error::parse(
                lineno,
                format!("dimension mismatch for {key}: expected {d}, got {}", v.len()),
            ));
        }
        if vectors.insert(key.clone(), rec.vectors).is_some() {
            return Err(Error::parse(lineno, format!("duplicate record for {key}")));
        }
    }
    let missing: BTreeSet<AduKey> = corpus
        .adus()
        .map(|a| a.key())
        .filter(|k| !vectors.contains_key(k))
        .collect();
    if !missing.is_empty() {
        let list: Vec<String> = missing.iter().map(ToString::to_string).collect();
        return Err(Error::Coverage(format!("missing embeddings for {}", list.join(", "))));
    }
    let dim = dim.ok_or_else(|| Error::Data("embedding file is empty".into()))?;
    Ok(PrecomputedAduEmbeddings { dim, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_vector_file() {
        let t = read_word_vectors("a 1 2 3\nb 4 5 6\n".as_bytes()).unwrap();
        assert_eq!(t.dim(), 3);
        assert_eq!(t.len(), 2);
        assert_eq!(t.get("b").unwrap(), [4.0, 5.0, 6.0]);
        assert_eq!(t.lookup("zzz"), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn vector_file_errors() {
        let e = read_word_vectors("a 1 2 3\nb 4 5 6 7\n".as_bytes()).unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
        let e = read_word_vectors("a 1 x 3\n".as_bytes()).unwrap_err();
        assert!(e.to_string().contains("non-numeric"));
        assert!(read_word_vectors("".as_bytes()).is_err());
    }

    #[test]
    fn duplicate_token_keeps_first() {
        let t = read_word_vectors("a 1 2\na 3 4\n".as_bytes()).unwrap();
        assert_eq!(t.get("a").unwrap(), [1.0, 2.0]);
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn pooling() {
        let v = vec![1.5, -2.0];
        assert_eq!(average_pool(&[v.clone()]).unwrap(), v);
        assert_eq!(average_pool(&[vec![1.0, 3.0], vec![3.0, 5.0]]).unwrap(), [2.0, 4.0]);
        assert_eq!(average_pool(&[v.clone(), v.clone(), v.clone()]).unwrap(), v);
        assert!(average_pool(&[]).is_err());
        assert!(average_pool(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn lookup_counts_oov() {
        let t = read_word_vectors("a 1\nb 2\n".as_bytes()).unwrap();
        let (m, oov) = t.lookup_all(["a", "q", "b", "r"]);
        assert_eq!(m, [1.0, 0.0, 2.0, 0.0]);
        assert_eq!(oov, 2);
    }
}
