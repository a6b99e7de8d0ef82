//! Discussion transcripts: parsing, validation and cross-validation folds.
//!
//! A corpus is a list of discussions, each an ordered sequence of ADUs
//! (argumentative discourse units). ADU positions are assigned from file order.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Claim,
    Evidence,
    Warrant,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Claim, Label::Evidence, Label::Warrant];

    pub fn index(self) -> usize {
        match self {
            Label::Claim => 0,
            Label::Evidence => 1,
            Label::Warrant => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Label> {
        Label::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Claim => "claim",
            Label::Evidence => "evidence",
            Label::Warrant => "warrant",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "claim" => Ok(Label::Claim),
            "evidence" => Ok(Label::Evidence),
            "warrant" => Ok(Label::Warrant),
            _ => Err(format!("unknown label {s:?} (expected claim, evidence or warrant)")),
        }
    }
}

/// Identifies one ADU across the corpus.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AduKey {
    pub discussion_id: String,
    pub global_index: usize,
}

impl fmt::Display for AduKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.discussion_id, self.global_index)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adu {
    pub discussion_id: String,
    pub global_index: usize,
    pub speaker_id: String,
    pub text: String,
    pub label: Option<Label>,
}

impl Adu {
    pub fn key(&self) -> AduKey {
        AduKey {
            discussion_id: self.discussion_id.clone(),
            global_index: self.global_index,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discussion {
    pub id: String,
    pub adus: Vec<Adu>,
}

impl Discussion {
    pub fn speakers(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for adu in &self.adus {
            if seen.insert(adu.speaker_id.as_str()) {
                out.push(adu.speaker_id.as_str());
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub claim: usize,
    pub evidence: usize,
    pub warrant: usize,
}

impl LabelCounts {
    pub fn get(&self, label: Label) -> usize {
        match label {
            Label::Claim => self.claim,
            Label::Evidence => self.evidence,
            Label::Warrant => self.warrant,
        }
    }

    fn bump(&mut self, label: Label) {
        match label {
            Label::Claim => self.claim += 1,
            Label::Evidence => self.evidence += 1,
            Label::Warrant => self.warrant += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.claim + self.evidence + self.warrant
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    discussions: Vec<Discussion>,
    label_histogram: LabelCounts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Csv,
    Jsonl,
}

impl CorpusFormat {
    /// Picks the format from the file extension; anything but `.jsonl`/`.json` is CSV.
    pub fn from_path(path: &Path) -> CorpusFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => CorpusFormat::Jsonl,
            _ => CorpusFormat::Csv,
        }
    }
}

impl Corpus {
    /// Builds a corpus, checking id uniqueness and index contiguity.
    pub fn new(discussions: Vec<Discussion>) -> Result<Corpus> {
        let mut ids = HashSet::new();
        let mut hist = LabelCounts::default();
        for d in &discussions {
            if !ids.insert(d.id.as_str()) {
                return Err(Error::Data(format!("duplicate discussion id {:?}", d.id)));
            }
            for (i, adu) in d.adus.iter().enumerate() {
                if adu.global_index != i || adu.discussion_id != d.id {
                    return Err(Error::Data(format!(
                        "ADU {} of discussion {:?} has inconsistent key ({}, {})",
                        i, d.id, adu.discussion_id, adu.global_index
                    )));
                }
                if adu.text.trim().is_empty() {
                    return Err(Error::Data(format!("empty text at {}", adu.key())));
                }
                if let Some(l) = adu.label {
                    hist.bump(l);
                }
            }
        }
        Ok(Corpus {
            discussions,
            label_histogram: hist,
        })
    }

    pub fn discussions(&self) -> &[Discussion] {
        &self.discussions
    }

    pub fn label_histogram(&self) -> LabelCounts {
        self.label_histogram
    }

    pub fn discussion(&self, id: &str) -> Option<&Discussion> {
        self.discussions.iter().find(|d| d.id == id)
    }

    pub fn adu(&self, key: &AduKey) -> Option<&Adu> {
        self.discussion(&key.discussion_id)
            .and_then(|d| d.adus.get(key.global_index))
    }

    pub fn adu_count(&self) -> usize {
        self.discussions.iter().map(|d| d.adus.len()).sum()
    }

    pub fn adus(&self) -> impl Iterator<Item = &Adu> {
        self.discussions.iter().flat_map(|d| d.adus.iter())
    }

    /// Sub-corpus holding only the named discussions, in corpus order.
    pub fn subset(&self, ids: &HashSet<&str>) -> Corpus {
        let ds: Vec<Discussion> = self
            .discussions
            .iter()
            .filter(|d| ids.contains(d.id.as_str()))
            .cloned()
            .collect();
        Corpus::new(ds).expect("subset of a valid corpus is valid")
    }

    pub fn to_csv_string(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["discussion_id", "speaker_id", "text", "label"])
            .expect("in-memory write");
        for adu in self.adus() {
            w.write_record([
                adu.discussion_id.as_str(),
                adu.speaker_id.as_str(),
                adu.text.as_str(),
                adu.label.map(|l| l.as_str()).unwrap_or(""),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8 input")
    }

    pub fn to_jsonl_string(&self) -> String {
        let mut out = String::new();
        for adu in self.adus() {
            let v = serde_json::json!({
                "discussion_id": adu.discussion_id,
                "speaker_id": adu.speaker_id,
                "text": adu.text,
                "label": adu.label.map(|l| l.as_str()),
            });
            out.push_str(&v.to_string());
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path, format: CorpusFormat) -> Result<()> {
        let body = match format {
            CorpusFormat::Csv => self.to_csv_string(),
            CorpusFormat::Jsonl => self.to_jsonl_string(),
        };
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(body.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Accumulates rows in file order and assigns positions.
#[derive(Default)]
struct CorpusBuilder {
    order: Vec<String>,
    by_id: HashMap<String, Vec<Adu>>,
}

struct RawRow {
    discussion_id: String,
    speaker_id: String,
    text: String,
    label: Option<String>,
    global_index: Option<String>,
}

impl CorpusBuilder {
    fn push(&mut self, line: usize, row: RawRow) -> Result<()> {
        if row.discussion_id.trim().is_empty() {
            return Err(Error::parse(line, "empty discussion_id"));
        }
        if row.text.trim().is_empty() {
            return Err(Error::parse(line, "empty text field"));
        }
        let label = match row.label.as_deref().map(str::trim) {
            None | Some("") => None,
            Some(s) => Some(s.parse::<Label>().map_err(|m| Error::parse(line, m))?),
        };
        let adus = self
            .by_id
            .entry(row.discussion_id.clone())
            .or_insert_with(|| {
                self.order.push(row.discussion_id.clone());
                Vec::new()
            });
        let assigned = adus.len();
        if let Some(raw) = row.global_index.as_deref().map(str::trim).filter(|s| !s.is_empty()) {
            let given: usize = raw
                .parse()
                .map_err(|_| Error::parse(line, format!("non-integer global_index {raw:?}")))?;
            if given < assigned {
                return Err(Error::parse(
                    line,
                    format!(
                        "duplicate (discussion_id, global_index) = ({}, {given})",
                        row.discussion_id
                    ),
                ));
            }
            if given != assigned {
                return Err(Error::parse(
                    line,
                    format!("global_index {given} out of sequence (expected {assigned})"),
                ));
            }
        }
        adus.push(Adu {
            discussion_id: row.discussion_id,
            global_index: assigned,
            speaker_id: row.speaker_id.trim().to_string(),
            text: row.text,
            label,
        });
        Ok(())
    }

    fn finish(mut self) -> Result<Corpus> {
        let discussions = self
            .order
            .iter()
            .map(|id| Discussion {
                id: id.clone(),
                adus: self.by_id.remove(id).unwrap_or_default(),
            })
            .collect();
        Corpus::new(discussions)
    }
}

pub fn parse_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    match format {
        CorpusFormat::Csv => parse_csv_bytes(&bytes),
        CorpusFormat::Jsonl => parse_jsonl_bytes(&bytes),
    }
}

fn utf8_field(line: usize, field: &[u8], name: &str) -> Result<String> {
    std::str::from_utf8(field)
        .map(str::to_string)
        .map_err(|_| Error::parse(line, format!("non-UTF-8 bytes in column {name}")))
}

pub fn parse_csv_bytes(bytes: &[u8]) -> Result<Corpus> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(bytes);
    let headers = reader
        .byte_headers()
        .map_err(|e| Error::parse(1, e.to_string()))?
        .clone();
    let header_names: Vec<String> = headers
        .iter()
        .map(|h| utf8_field(1, h, "header").map(|s| s.trim().to_string()))
        .collect::<Result<_>>()?;
    let col = |name: &str| header_names.iter().position(|h| h == name);
    let mut required = [0usize; 4];
    for (slot, name) in ["discussion_id", "speaker_id", "text", "label"].iter().enumerate() {
        required[slot] =
            col(name).ok_or_else(|| Error::parse(1, format!("missing column {name}")))?;
    }
    let index_col = col("global_index");

    let mut builder = CorpusBuilder::default();
    let mut record = csv::ByteRecord::new();
    loop {
        match reader.read_byte_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
                return Err(Error::parse(line, e.to_string()));
            }
        }
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let get = |i: usize, name: &str| utf8_field(line, &record[i], name);
        builder.push(
            line,
            RawRow {
                discussion_id: get(required[0], "discussion_id")?,
                speaker_id: get(required[1], "speaker_id")?,
                text: get(required[2], "text")?,
                label: Some(get(required[3], "label")?),
                global_index: index_col.map(|i| get(i, "global_index")).transpose()?,
            },
        )?;
    }
    builder.finish()
}

fn json_string(line: usize, obj: &serde_json::Map<String, serde_json::Value>, key: &str) -> Result<Option<String>> {
    match obj.get(key) {
        None => Err(Error::parse(line, format!("missing key {key}"))),
        Some(serde_json::Value::Null) => Ok(None),
        Some(serde_json::Value::String(s)) => Ok(Some(s.clone())),
        Some(serde_json::Value::Number(n)) => Ok(Some(n.to_string())),
        Some(other) => Err(Error::parse(line, format!("key {key} has unsupported value {other}"))),
    }
}

pub fn parse_jsonl_bytes(bytes: &[u8]) -> Result<Corpus> {
    let mut builder = CorpusBuilder::default();
    for (i, raw) in bytes.split(|b| *b == b'\n').enumerate() {
        let line = i + 1;
        let text = std::str::from_utf8(raw).map_err(|_| Error::parse(line, "non-UTF-8 bytes"))?;
        if text.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::parse(line, e.to_string()))?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::parse(line, "expected a JSON object"))?;
        let required = |key: &str| -> Result<String> {
            json_string(line, obj, key)?.ok_or_else(|| Error::parse(line, format!("null value for {key}")))
        };
        builder.push(
            line,
            RawRow {
                discussion_id: required("discussion_id")?,
                speaker_id: required("speaker_id")?,
                text: required("text")?,
                label: json_string(line, obj, "label")?,
                global_index: match obj.get("global_index") {
                    None | Some(serde_json::Value::Null) => None,
                    Some(v) => Some(v.as_str().map(str::to_string).unwrap_or_else(|| v.to_string())),
                },
            },
        )?;
    }
    builder.finish()
}

#[derive(Debug, Clone, Serialize)]
pub struct DiscussionSummary {
    pub id: String,
    pub n_adus: usize,
    pub n_speakers: usize,
    pub adus_per_speaker: BTreeMap<String, usize>,
    pub single_speaker: bool,
}

/// Summary statistics emitted by `validate`. Proportions are percentages
/// rounded to one decimal place.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub n_discussions: usize,
    pub n_adus: usize,
    pub n_labeled: usize,
    pub n_speakers: usize,
    pub label_counts: LabelCounts,
    pub label_proportions: BTreeMap<String, f64>,
    pub single_speaker_discussions: Vec<String>,
    pub discussions: Vec<DiscussionSummary>,
}

fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

pub fn validate_corpus(corpus: &Corpus) -> ValidationReport {
    let hist = corpus.label_histogram();
    let labeled = hist.total();
    let label_proportions = Label::ALL
        .iter()
        .map(|&l| {
            let p = if labeled == 0 {
                0.0
            } else {
                100.0 * hist.get(l) as f64 / labeled as f64
            };
            (l.as_str().to_string(), round1(p))
        })
        .collect();
    let mut all_speakers = HashSet::new();
    let mut discussions = Vec::new();
    for d in corpus.discussions() {
        let mut per = BTreeMap::new();
        for adu in &d.adus {
            *per.entry(adu.speaker_id.clone()).or_insert(0) += 1;
            all_speakers.insert((d.id.as_str(), adu.speaker_id.as_str()));
        }
        discussions.push(DiscussionSummary {
            id: d.id.clone(),
            n_adus: d.adus.len(),
            n_speakers: per.len(),
            single_speaker: per.len() == 1,
            adus_per_speaker: per,
        });
    }
    ValidationReport {
        n_discussions: corpus.discussions().len(),
        n_adus: corpus.adu_count(),
        n_labeled: labeled,
        n_speakers: all_speakers.len(),
        label_counts: hist,
        label_proportions,
        single_speaker_discussions: discussions
            .iter()
            .filter(|d| d.single_speaker)
            .map(|d| d.id.clone())
            .collect(),
        discussions,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FoldUnit {
    #[default]
    Discussion,
    Adu,
}

/// Assignment of corpus units to `k` folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub k: usize,
    pub unit: FoldUnit,
    /// Discussion id to fold. For ADU-level plans this is empty.
    pub assignments: BTreeMap<String, usize>,
    adu_assignments: BTreeMap<AduKey, usize>,
}

impl FoldPlan {
    pub fn fold_of(&self, adu: &Adu) -> usize {
        match self.unit {
            FoldUnit::Discussion => self.assignments[&adu.discussion_id],
            FoldUnit::Adu => self.adu_assignments[&adu.key()],
        }
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        let values: Box<dyn Iterator<Item = &usize>> = match self.unit {
            FoldUnit::Discussion => Box::new(self.assignments.values()),
            FoldUnit::Adu => Box::new(self.adu_assignments.values()),
        };
        for &f in values {
            sizes[f] += 1;
        }
        sizes
    }
}

fn shuffled_round_robin<T: Clone>(items: &[T], k: usize, seed: u64) -> Vec<(T, usize)> {
    let mut order: Vec<usize> = (0..items.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    order
        .into_iter()
        .enumerate()
        .map(|(pos, i)| (items[i].clone(), pos % k))
        .collect()
}

/// Discussion-level folds: all ADUs of a discussion share a fold, and fold
/// sizes differ by at most one discussion.
pub fn make_folds(corpus: &Corpus, k: usize, seed: u64) -> Result<FoldPlan> {
    let ids: Vec<String> = corpus.discussions().iter().map(|d| d.id.clone()).collect();
    if k == 0 || k > ids.len() {
        return Err(Error::Config(format!(
            "k = {k} folds requested but corpus has {} discussions",
            ids.len()
        )));
    }
    Ok(FoldPlan {
        k,
        unit: FoldUnit::Discussion,
        assignments: shuffled_round_robin(&ids, k, seed).into_iter().collect(),
        adu_assignments: BTreeMap::new(),
    })
}

/// ADU-level folds. Leaks context between train and test; kept for comparison runs.
pub fn make_adu_folds(corpus: &Corpus, k: usize, seed: u64) -> Result<FoldPlan> {
    let keys: Vec<AduKey> = corpus.adus().map(Adu::key).collect();
    if k == 0 || k > keys.len() {
        return Err(Error::Config(format!(
            "k = {k} folds requested but corpus has {} ADUs",
            keys.len()
        )));
    }
    Ok(FoldPlan {
        k,
        unit: FoldUnit::Adu,
        assignments: BTreeMap::new(),
        adu_assignments: shuffled_round_robin(&keys, k, seed).into_iter().collect(),
    })
}
