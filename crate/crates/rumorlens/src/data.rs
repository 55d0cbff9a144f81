//! Corpus loading, synthetic corpus generation, and model persistence.
//!
//! The interchange format is UTF-8 JSON Lines: one object per line with
//! string fields `id`, `text`, `label` and `event`. Labels accept both
//! British and American spellings plus numeric aliases: `rumour`, `rumor`
//! and `1` map to the positive class, `non-rumour`, `non-rumor` and `0` to
//! the negative one.
//!
//! Trained models persist as a single JSON document with a mandatory
//! `schema_version`, the full model config, the vocabulary (index-ordered
//! token list) and every parameter block as a flat array with its shape.
//! Doubles survive the round trip bit-exactly.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::{Conv1dLayer, DenseSigmoid, EmbeddingLayer, LstmLayer, LSTM_BLOCK_NAMES};
use crate::model::{Model, ModelConfig, Variant};
use crate::rng::SeededRng;
use crate::tensor::Matrix2D;
use crate::text::{encode_and_pad, tokenize, EncodedExample, Vocabulary};

/// One validated input record as it appears on the wire.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawRecord {
    pub id: String,
    pub text: String,
    pub label: String,
    pub event: String,
}

/// A fully preprocessed corpus.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub examples: Vec<EncodedExample>,
    pub vocab: Vocabulary,
    pub max_len: usize,
    /// `class_counts[label]`.
    pub class_counts: [usize; 2],
    pub event_counts: BTreeMap<String, usize>,
}

/// Preprocessing knobs for [`load_jsonl`].
#[derive(Debug, Clone, Copy)]
pub struct LoadOptions {
    pub max_len: usize,
    pub min_count: usize,
    pub max_vocab: usize,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions { max_len: 30, min_count: 1, max_vocab: 20_000 }
    }
}

/// A rejected input line and why.
#[derive(Debug, Clone)]
pub struct MalformedLine {
    pub line: usize,
    pub reason: String,
}

/// A loaded dataset plus the per-line error report for anything skipped.
#[derive(Debug)]
pub struct LoadedCorpus {
    pub dataset: Dataset,
    pub malformed: Vec<MalformedLine>,
}

/// Maps a label string to a binary class, accepting spelling and numeric
/// aliases.
pub fn parse_label(label: &str) -> Option<u8> {
    match label.trim().to_lowercase().as_str() {
        "rumour" | "rumor" | "1" => Some(1),
        "non-rumour" | "non-rumor" | "0" => Some(0),
        _ => None,
    }
}

#[derive(Deserialize)]
struct WireRecord {
    id: Option<String>,
    text: Option<String>,
    label: Option<String>,
    event: Option<String>,
}

/// Loads a JSONL corpus in two passes: build the vocabulary over every
/// usable text, then encode and pad each record in file order. Malformed
/// lines are collected into the error report; if they exceed 10% of the
/// file (or nothing is usable at all) the whole corpus is rejected.
pub fn load_jsonl(path: &Path, opts: &LoadOptions) -> Result<LoadedCorpus> {
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut malformed = Vec::new();
    let mut usable: Vec<(Vec<String>, u8, String)> = Vec::new();
    let mut total_lines = 0usize;

    for (line_no, line) in content.lines().enumerate() {
        let line_no = line_no + 1;
        if line.trim().is_empty() {
            continue;
        }
        total_lines += 1;
        let record: WireRecord = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) => {
                malformed.push(MalformedLine { line: line_no, reason: format!("bad JSON: {e}") });
                continue;
            }
        };
        let (Some(_id), Some(text), Some(label), Some(event)) =
            (record.id, record.text, record.label, record.event)
        else {
            malformed.push(MalformedLine {
                line: line_no,
                reason: "missing one of the required fields id, text, label, event".into(),
            });
            continue;
        };
        if text.trim().is_empty() {
            malformed.push(MalformedLine { line: line_no, reason: "empty text".into() });
            continue;
        }
        let Some(label) = parse_label(&label) else {
            malformed.push(MalformedLine {
                line: line_no,
                reason: format!("unknown label value {label:?}"),
            });
            continue;
        };
        usable.push((tokenize(&text), label, event));
    }

    if total_lines == 0 || usable.is_empty() {
        return Err(Error::CorpusRejected {
            reason: "zero usable records".into(),
            bad_lines: malformed.iter().map(|m| m.line).collect(),
        });
    }
    if malformed.len() * 10 > total_lines {
        return Err(Error::CorpusRejected {
            reason: format!(
                "{} of {} lines are malformed (more than 10%)",
                malformed.len(),
                total_lines
            ),
            bad_lines: malformed.iter().map(|m| m.line).collect(),
        });
    }

    let token_docs: Vec<Vec<String>> = usable.iter().map(|(t, _, _)| t.clone()).collect();
    let vocab = Vocabulary::build(&token_docs, opts.min_count, opts.max_vocab);

    let mut class_counts = [0usize; 2];
    let mut event_counts = BTreeMap::new();
    let examples = usable
        .into_iter()
        .map(|(tokens, label, event)| {
            class_counts[label as usize] += 1;
            *event_counts.entry(event.clone()).or_insert(0) += 1;
            EncodedExample { indices: encode_and_pad(&tokens, &vocab, opts.max_len), label, event }
        })
        .collect();

    Ok(LoadedCorpus {
        dataset: Dataset {
            examples,
            vocab,
            max_len: opts.max_len,
            class_counts,
            event_counts,
        },
        malformed,
    })
}

/// Lenient record for prediction input: `label` and `event` optional.
#[derive(Debug, Clone)]
pub struct PredictRecord {
    pub id: String,
    pub text: String,
    pub label: Option<u8>,
}

/// Reads records for prediction. Unlike [`load_jsonl`] the label may be
/// absent; any structurally broken line is a hard error naming the line.
pub fn read_predict_records(path: &Path) -> Result<Vec<PredictRecord>> {
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (line_no, line) in content.lines().enumerate() {
        let line_no = line_no + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: WireRecord = serde_json::from_str(line).map_err(|e| Error::CorpusRejected {
            reason: format!("bad JSON: {e}"),
            bad_lines: vec![line_no],
        })?;
        let text = record.text.unwrap_or_default();
        if text.trim().is_empty() {
            return Err(Error::CorpusRejected {
                reason: "empty text".into(),
                bad_lines: vec![line_no],
            });
        }
        let label = match record.label {
            None => None,
            Some(raw) => Some(parse_label(&raw).ok_or_else(|| Error::CorpusRejected {
                reason: format!("unknown label value {raw:?}"),
                bad_lines: vec![line_no],
            })?),
        };
        records.push(PredictRecord {
            id: record.id.unwrap_or_else(|| format!("line-{line_no}")),
            text,
            label,
        });
    }
    if records.is_empty() {
        return Err(Error::CorpusRejected { reason: "zero usable records".into(), bad_lines: vec![] });
    }
    Ok(records)
}

const RUMOR_LEXICON: [&str; 16] = [
    "allegedly", "anonymous", "conspiracy", "coverup", "exposed", "fabricated", "hoax", "leak",
    "panic", "scandal", "shocking", "sources", "unconfirmed", "unverified", "viral", "whisper",
];

const NONRUMOR_LEXICON: [&str; 16] = [
    "agency", "announced", "briefing", "confirmed", "document", "official", "police", "press",
    "published", "record", "report", "reuters", "spokesman", "statement", "update", "verified",
];

/// Generates a balanced synthetic corpus, writes it to `path` as JSONL and
/// loads it back through the normal pipeline.
///
/// Class 1 draws each token from the rumor lexicon with probability
/// `signal_strength` and from the non-rumor lexicon otherwise; class 0 is
/// symmetric. At `signal_strength = 1.0` the class vocabularies are
/// disjoint; at `0.5` the two token distributions coincide and no
/// classifier can beat chance. Sequence lengths are uniform in
/// `[5, max_len]` and the class balance is exactly
/// `floor(n/2)` rumor / `ceil(n/2)` non-rumor.
pub fn synthesize_corpus(
    path: &Path,
    n: usize,
    signal_strength: f64,
    max_len: usize,
    seed: u64,
) -> Result<Dataset> {
    assert!(n >= 20, "need at least 20 examples");
    assert!(
        (0.5..=1.0).contains(&signal_strength),
        "signal_strength must be in [0.5, 1.0]"
    );
    assert!(max_len >= 5, "max_len must be at least 5");

    let mut rng = SeededRng::new(seed);
    let mut lines = String::new();
    for i in 0..n {
        let label = (i % 2) as u8; // even count of each, label 1 gets floor(n/2)
        let len = 5 + rng.next_below(max_len - 5 + 1);
        let mut words = Vec::with_capacity(len);
        for _ in 0..len {
            let own = rng.chance(signal_strength);
            let lexicon = match (label, own) {
                (1, true) | (0, false) => &RUMOR_LEXICON,
                _ => &NONRUMOR_LEXICON,
            };
            words.push(lexicon[rng.next_below(lexicon.len())]);
        }
        let record = RawRecord {
            id: format!("syn-{i:05}"),
            text: words.join(" "),
            label: if label == 1 { "rumour".into() } else { "non-rumour".into() },
            event: format!("event-{}", i % 5),
        };
        lines.push_str(&serde_json::to_string(&record).expect("record serializes"));
        lines.push('\n');
    }
    write_atomic(path, lines.as_bytes())?;

    let opts = LoadOptions { max_len, ..LoadOptions::default() };
    let loaded = load_jsonl(path, &opts)?;
    debug_assert!(loaded.malformed.is_empty());
    Ok(loaded.dataset)
}

/// Writes through a sibling temp file and renames into place.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let mut file = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    file.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    file.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
    Ok(())
}

const MODEL_SCHEMA_VERSION: u64 = 1;

#[derive(Serialize, Deserialize)]
struct MatrixPayload {
    shape: [usize; 2],
    data: Vec<f64>,
}

impl From<&Matrix2D> for MatrixPayload {
    fn from(m: &Matrix2D) -> Self {
        MatrixPayload { shape: [m.rows(), m.cols()], data: m.data().to_vec() }
    }
}

impl MatrixPayload {
    fn into_matrix(self, name: &str) -> Result<Matrix2D> {
        Matrix2D::from_vec(self.shape[0], self.shape[1], self.data)
            .map_err(|_| Error::CorruptModel(format!("parameter {name} has inconsistent shape")))
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    schema_version: u64,
    config: ModelConfig,
    vocab: Vec<String>,
    parameters: BTreeMap<String, MatrixPayload>,
}

/// Serializes the model (and its vocabulary) to a single JSON document,
/// written atomically.
pub fn save_model(model: &Model, vocab: &Vocabulary, path: &Path) -> Result<()> {
    let mut parameters = BTreeMap::new();
    parameters.insert("embedding".to_string(), MatrixPayload::from(model.embedding().table()));
    if let Some(conv) = model.conv() {
        for (i, filter) in conv.filters.iter().enumerate() {
            parameters.insert(format!("conv_filter_{i}"), MatrixPayload::from(filter));
        }
        parameters.insert("conv_bias".to_string(), MatrixPayload::from(&conv.bias));
    }
    for (name, block) in LSTM_BLOCK_NAMES.iter().zip(model.lstm().params()) {
        parameters.insert(format!("lstm_{name}"), MatrixPayload::from(block));
    }
    parameters.insert("head_w".to_string(), MatrixPayload::from(&model.head().w));
    parameters.insert(
        "head_b".to_string(),
        MatrixPayload { shape: [1, 1], data: vec![model.head().b] },
    );

    let file = ModelFile {
        schema_version: MODEL_SCHEMA_VERSION,
        config: model.config().clone(),
        vocab: vocab.index_list().to_vec(),
        parameters,
    };
    let json = serde_json::to_string(&file).expect("model file serializes");
    write_atomic(path, json.as_bytes())
}

/// Reads a model document back. Parameter values are restored bit-exactly,
/// so forward outputs match the saved model exactly.
pub fn load_model(path: &Path) -> Result<(Model, Vocabulary)> {
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&content)
        .map_err(|e| Error::CorruptModel(format!("not valid JSON: {e}")))?;
    let version = value
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::CorruptModel("missing schema_version".into()))?;
    if version != MODEL_SCHEMA_VERSION {
        return Err(Error::UnsupportedVersion { found: version, supported: MODEL_SCHEMA_VERSION });
    }
    let file: ModelFile = serde_json::from_value(value)
        .map_err(|e| Error::CorruptModel(format!("schema mismatch: {e}")))?;

    let vocab = Vocabulary::from_index_list(file.vocab)
        .ok_or_else(|| Error::CorruptModel("invalid vocabulary listing".into()))?;

    let mut parameters = file.parameters;
    let mut take = |name: &str| -> Result<Matrix2D> {
        parameters
            .remove(name)
            .ok_or_else(|| Error::CorruptModel(format!("missing parameter {name}")))?
            .into_matrix(name)
    };

    let config = file.config;
    let embedding = EmbeddingLayer::from_table(take("embedding")?);
    let conv = match config.variant {
        Variant::LstmCnn => {
            let filters: Vec<Matrix2D> = (0..config.n_filters)
                .map(|i| take(&format!("conv_filter_{i}")))
                .collect::<Result<_>>()?;
            Some(Conv1dLayer {
                filters,
                bias: take("conv_bias")?,
                activation: config.conv_activation,
            })
        }
        _ => None,
    };
    let lstm_blocks: Vec<Matrix2D> = LSTM_BLOCK_NAMES
        .iter()
        .map(|name| take(&format!("lstm_{name}")))
        .collect::<Result<_>>()?;
    let [w_i, w_f, w_o, w_g, u_i, u_f, u_o, u_g, b_i, b_f, b_o, b_g]: [Matrix2D; 12] =
        lstm_blocks.try_into().expect("twelve blocks collected");
    let lstm = LstmLayer { w_i, w_f, w_o, w_g, u_i, u_f, u_o, u_g, b_i, b_f, b_o, b_g };
    let head_w = take("head_w")?;
    let head_b = take("head_b")?;
    if head_b.shape() != (1, 1) {
        return Err(Error::CorruptModel("head_b must be a 1x1 matrix".into()));
    }
    let head = DenseSigmoid { w: head_w, b: head_b.get(0, 0) };

    let model = Model::from_parts(config, embedding, conv, lstm, head)?;
    if vocab.size() != model.config().vocab_size {
        return Err(Error::CorruptModel(format!(
            "vocabulary has {} entries but config expects {}",
            vocab.size(),
            model.config().vocab_size
        )));
    }
    Ok((model, vocab))
}
