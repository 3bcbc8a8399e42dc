//! Corpus, vocabulary, lexicon and word-vector files.

use std::fs;
use std::path::Path;

use icred_core::corpus::{ContextInstance, Vocabulary};
use icred_core::model::Model;

use crate::error::{IcredError, Result};

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| IcredError::io(path, e))
}

/// Writes `contents`, creating parent directories as needed.
pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    write_bytes(path, contents.as_bytes())
}

pub fn write_bytes(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| IcredError::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| IcredError::io(path, e))
}

/// One JSON object per line, fields in declaration order.
pub fn to_jsonl(instances: &[ContextInstance]) -> String {
    let mut out = String::new();
    for inst in instances {
        out.push_str(&serde_json::to_string(inst).expect("instances always serialize"));
        out.push('\n');
    }
    out
}

/// Parses JSON lines; blank lines are skipped. `path` is only used in errors.
pub fn parse_jsonl(text: &str, path: &Path) -> Result<Vec<ContextInstance>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let inst = serde_json::from_str(line).map_err(|source| IcredError::Json {
            path: path.to_path_buf(),
            line: i + 1,
            source,
        })?;
        out.push(inst);
    }
    Ok(out)
}

pub fn read_jsonl(path: &Path) -> Result<Vec<ContextInstance>> {
    parse_jsonl(&read_text(path)?, path)
}

pub fn write_jsonl(path: &Path, instances: &[ContextInstance]) -> Result<()> {
    write_text(path, &to_jsonl(instances))
}

/// Vocabulary file: one non-reserved word per line in index order.
pub fn write_vocab(path: &Path, vocab: &Vocabulary) -> Result<()> {
    let mut out = String::new();
    for w in vocab.words() {
        out.push_str(w);
        out.push('\n');
    }
    write_text(path, &out)
}

pub fn read_vocab(path: &Path) -> Result<Vocabulary> {
    let text = read_text(path)?;
    Vocabulary::from_words(text.lines()).map_err(|e| IcredError::format(path, e.to_string()))
}

/// Copies vectors from a `word v1 v2 ...` text file into the embedding rows
/// of words the vocabulary knows. Returns how many rows were set.
pub fn load_word_vectors(path: &Path, vocab: &Vocabulary, model: &mut Model) -> Result<usize> {
    let text = read_text(path)?;
    let dim = model.config.word_dim;
    let id = model.ids().embedding;
    let mut loaded = 0;
    for (i, line) in text.lines().enumerate() {
        let mut parts = line.split_whitespace();
        let Some(word) = parts.next() else { continue };
        let values: Vec<f64> = parts
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e| IcredError::format(path, format!("line {}: {e}", i + 1)))?;
        if values.len() != dim {
            return Err(IcredError::format(
                path,
                format!(
                    "line {}: `{word}` has {} values, word_dim is {dim}",
                    i + 1,
                    values.len()
                ),
            ));
        }
        if let Some(row) = vocab.get(word) {
            model.params.get_mut(id).data_mut()[row * dim..(row + 1) * dim].copy_from_slice(&values);
            loaded += 1;
        }
    }
    Ok(loaded)
}
