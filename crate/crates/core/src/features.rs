//! Handcrafted per-ADU features: a 100-dim averaged word vector followed by
//! 14 lexical scalars (counts, lexicon hits, familiarity and IDF extremes).

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use crate::corpus::{Adu, Corpus};
use crate::embeddings::WordVectorTable;
use crate::error::{Error, Result};

/// Dimension of the averaged word-vector block.
pub const WORD_VECTOR_DIM: usize = 100;
/// Number of scalar slots following the word-vector block.
pub const N_SCALARS: usize = 14;
/// Total length of a handcrafted vector.
pub const HANDCRAFTED_DIM: usize = WORD_VECTOR_DIM + N_SCALARS;

/// Names of the scalar slots, in vector order.
pub const SCALAR_NAMES: [&str; N_SCALARS] = [
    "n_connectives",
    "n_words",
    "n_numbers",
    "n_symbols",
    "n_capitals",
    "stopword_ratio",
    "n_subjective",
    "n_polar",
    "avg_familiarity",
    "avg_chars_per_word",
    "idf_min",
    "idf_max",
    "oov_ratio",
    "familiarity_coverage",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub lower: String,
}

impl Token {
    fn new(surface: &str) -> Token {
        Token {
            surface: surface.to_string(),
            lower: surface.to_lowercase(),
        }
    }

    /// True when the token has at least one letter or digit.
    pub fn is_word(&self) -> bool {
        self.surface.chars().any(char::is_alphanumeric)
    }

    pub fn is_number(&self) -> bool {
        is_decimal_number(&self.surface)
    }
}

fn is_decimal_number(s: &str) -> bool {
    let body = s.strip_prefix(['+', '-']).unwrap_or(s);
    let mut groups = 0;
    for (i, part) in body.split(['.', ',']).enumerate() {
        if part.is_empty() || !part.chars().all(|c| c.is_ascii_digit()) {
            return false;
        }
        groups = i + 1;
    }
    groups > 0
}

/// Splits on whitespace, then peels leading and trailing punctuation off each
/// chunk as single-character tokens. Internal punctuation (apostrophes,
/// hyphens, decimal points) stays attached.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let chars: Vec<(usize, char)> = chunk.char_indices().collect();
        let first = chars.iter().position(|(_, c)| c.is_alphanumeric());
        let Some(first) = first else {
            out.extend(chars.iter().map(|(_, c)| Token::new(&c.to_string())));
            continue;
        };
        let last = chars.iter().rposition(|(_, c)| c.is_alphanumeric()).unwrap();
        out.extend(chars[..first].iter().map(|(_, c)| Token::new(&c.to_string())));
        let start = chars[first].0;
        let end = chars[last].0 + chars[last].1.len_utf8();
        out.push(Token::new(&chunk[start..end]));
        out.extend(chars[last + 1..].iter().map(|(_, c)| Token::new(&c.to_string())));
    }
    out
}

/// Word lists used by the lexical scalars.
#[derive(Debug, Clone, Default)]
pub struct LexiconBundle {
    pub connectives: HashSet<String>,
    pub stopwords: HashSet<String>,
    pub subjective: HashSet<String>,
    pub polar: HashSet<String>,
    pub familiarity: HashMap<String, f64>,
}

fn word_list(path: &Path) -> Result<HashSet<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_word_list(&text))
}

pub fn parse_word_list(text: &str) -> HashSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

pub fn parse_familiarity(text: &str) -> Result<HashMap<String, f64>> {
    let mut out = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (tok, score) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(i + 1, "expected token<TAB>score"))?;
        let score: f64 = score
            .trim()
            .parse()
            .map_err(|_| Error::parse(i + 1, format!("non-numeric familiarity score {score:?}")))?;
        if !(score.is_finite() && score >= 0.0) {
            return Err(Error::parse(i + 1, "familiarity score must be finite and non-negative"));
        }
        out.insert(tok.trim().to_lowercase(), score);
    }
    Ok(out)
}

impl LexiconBundle {
    /// Loads `connectives.txt`, `stopwords.txt`, `subjective.txt`, `polar.txt`
    /// and `familiarity.tsv` from a directory.
    pub fn load_dir(dir: &Path) -> Result<LexiconBundle> {
        let fam_path = dir.join("familiarity.tsv");
        let fam = fs::read_to_string(&fam_path).map_err(|e| Error::io(&fam_path, e))?;
        Ok(LexiconBundle {
            connectives: word_list(&dir.join("connectives.txt"))?,
            stopwords: word_list(&dir.join("stopwords.txt"))?,
            subjective: word_list(&dir.join("subjective.txt"))?,
            polar: word_list(&dir.join("polar.txt"))?,
            familiarity: parse_familiarity(&fam)?,
        })
    }
}

/// Document frequencies with the ADU as the document unit.
#[derive(Debug, Clone, PartialEq)]
pub struct IdfTable {
    doc_count: usize,
    df: HashMap<String, usize>,
}

impl IdfTable {
    /// Builds the table from an explicit set of ADUs. Cross-validation passes
    /// only training-fold ADUs here.
    pub fn from_adus<'a>(adus: impl IntoIterator<Item = &'a Adu>) -> IdfTable {
        let mut doc_count = 0;
        let mut df: HashMap<String, usize> = HashMap::new();
        for adu in adus {
            doc_count += 1;
            let uniq: HashSet<String> = tokenize(&adu.text).into_iter().map(|t| t.lower).collect();
            for t in uniq {
                *df.entry(t).or_insert(0) += 1;
            }
        }
        IdfTable { doc_count, df }
    }

    pub fn from_parts(doc_count: usize, df: HashMap<String, usize>) -> Result<IdfTable> {
        if doc_count == 0 {
            return Err(Error::Data("IDF table needs at least one document".into()));
        }
        if let Some((t, &n)) = df.iter().find(|(_, &n)| n == 0 || n > doc_count) {
            return Err(Error::Data(format!("document frequency {n} of {t:?} outside (0, {doc_count}]")));
        }
        Ok(IdfTable { doc_count, df })
    }

    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    pub fn df(&self) -> &HashMap<String, usize> {
        &self.df
    }

    /// `ln(N / df)`; unseen tokens get the df = 1 ceiling `ln(N)`.
    pub fn idf(&self, lower: &str) -> f64 {
        let n = self.doc_count.max(1) as f64;
        let df = self.df.get(lower).copied().unwrap_or(1) as f64;
        (n / df).ln()
    }
}

pub fn compute_idf(corpus: &Corpus) -> Result<IdfTable> {
    if corpus.adu_count() == 0 {
        return Err(Error::Data("cannot compute IDF over an empty corpus".into()));
    }
    Ok(IdfTable::from_adus(corpus.adus()))
}

/// 114 values: averaged word vector then the scalars named in [`SCALAR_NAMES`].
#[derive(Debug, Clone, PartialEq)]
pub struct HandcraftedVector(pub Vec<f64>);

impl HandcraftedVector {
    pub fn word_vector(&self) -> &[f64] {
        &self.0[..WORD_VECTOR_DIM]
    }

    pub fn scalars(&self) -> &[f64] {
        &self.0[WORD_VECTOR_DIM..]
    }

    pub fn scalar(&self, name: &str) -> f64 {
        let i = SCALAR_NAMES
            .iter()
            .position(|n| *n == name)
            .unwrap_or_else(|| panic!("unknown scalar {name}"));
        self.0[WORD_VECTOR_DIM + i]
    }
}

pub fn handcrafted(
    adu: &Adu,
    lexicons: &LexiconBundle,
    idf: &IdfTable,
    word_vectors: &WordVectorTable,
) -> Result<HandcraftedVector> {
    handcrafted_text(&adu.text, lexicons, idf, word_vectors)
        .map_err(|e| match e {
            Error::Data(m) => Error::Data(format!("{}: {m}", adu.key())),
            other => other,
        })
}

pub fn handcrafted_text(
    text: &str,
    lexicons: &LexiconBundle,
    idf: &IdfTable,
    word_vectors: &WordVectorTable,
) -> Result<HandcraftedVector> {
    if word_vectors.dim() != WORD_VECTOR_DIM {
        return Err(Error::dim("word vectors for handcrafted features", WORD_VECTOR_DIM, word_vectors.dim()));
    }
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return Err(Error::Data("text has no tokens".into()));
    }
    let n_tok = tokens.len() as f64;

    let mut avg = vec![0.0; WORD_VECTOR_DIM];
    let mut in_vocab = 0usize;
    for t in &tokens {
        if let Some(v) = word_vectors.get(&t.lower) {
            in_vocab += 1;
            for (a, x) in avg.iter_mut().zip(v) {
                *a += x;
            }
        }
    }
    if in_vocab > 0 {
        avg.iter_mut().for_each(|a| *a /= in_vocab as f64);
    }

    let count = |set: &HashSet<String>| tokens.iter().filter(|t| set.contains(&t.lower)).count() as f64;
    let words: Vec<&Token> = tokens.iter().filter(|t| t.is_word()).collect();
    let n_words = words.len() as f64;
    let n_numbers = tokens.iter().filter(|t| t.is_number()).count() as f64;
    let n_symbols = tokens.iter().filter(|t| !t.is_word()).count() as f64;
    let n_capitals = text.chars().filter(|c| c.is_uppercase()).count() as f64;

    let fam: Vec<f64> = tokens
        .iter()
        .filter_map(|t| lexicons.familiarity.get(&t.lower).copied())
        .collect();
    let avg_familiarity = if fam.is_empty() {
        0.0
    } else {
        fam.iter().sum::<f64>() / fam.len() as f64
    };
    let avg_chars = if words.is_empty() {
        0.0
    } else {
        words.iter().map(|t| t.surface.chars().count()).sum::<usize>() as f64 / n_words
    };
    let idfs = tokens.iter().map(|t| idf.idf(&t.lower));
    let idf_min = idfs.clone().fold(f64::INFINITY, f64::min);
    let idf_max = idfs.fold(f64::NEG_INFINITY, f64::max);

    let scalars = [
        count(&lexicons.connectives),
        n_words,
        n_numbers,
        n_symbols,
        n_capitals,
        count(&lexicons.stopwords) / n_tok,
        count(&lexicons.subjective),
        count(&lexicons.polar),
        avg_familiarity,
        avg_chars,
        idf_min,
        idf_max,
        (tokens.len() - in_vocab) as f64 / n_tok,
        fam.len() as f64 / n_tok,
    ];
    avg.extend_from_slice(&scalars);
    Ok(HandcraftedVector(avg))
}
