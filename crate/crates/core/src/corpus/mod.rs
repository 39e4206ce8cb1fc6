//! Parallel-corpus ingestion, vocabulary construction, batching, and gold
//! alignment loading.

mod batch;
mod gold;
mod vocab;

pub use batch::{batch_vocab, make_batches, Batch};
pub use gold::{load_gold, write_gold, GoldAlignment, GoldMap};
pub use vocab::{CharVocab, Vocabulary, CHAR_BOS, CHAR_NULL, CHAR_UNK, NULL_ID, UNK_ID};

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{AlignError, Result};

/// Default maximum characters kept per word before truncation.
pub const DEFAULT_CHAR_CAP: usize = 30;

/// One tokenized sentence pair before vocabulary encoding.
#[derive(Debug, Clone)]
pub struct RawPair {
    pub src: Vec<String>,
    pub tgt: Vec<String>,
    /// 0-based line index in the unfiltered input files, kept so gold files
    /// indexed against the original corpus stay aligned.
    pub line_index: usize,
}

/// A vocabulary-encoded sentence pair. `src_ids[j]` corresponds to the paper
/// convention `f_{j+1}`, `tgt_ids[i]` to `e_{i+1}`.
#[derive(Debug, Clone)]
pub struct SentencePair {
    pub src_ids: Vec<u32>,
    pub tgt_ids: Vec<u32>,
    pub src_surf: Vec<String>,
    pub tgt_surf: Vec<String>,
    pub src_chars: Vec<Vec<u32>>,
    pub tgt_chars: Vec<Vec<u32>>,
    pub line_index: usize,
}

impl SentencePair {
    pub fn source_len(&self) -> usize {
        self.src_ids.len()
    }

    pub fn target_len(&self) -> usize {
        self.tgt_ids.len()
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let file = File::open(path).map_err(|e| AlignError::io(path, e))?;
    let mut lines = Vec::new();
    for line in BufReader::new(file).lines() {
        lines.push(line.map_err(|e| AlignError::io(path, e))?);
    }
    Ok(lines)
}

fn tokenize(line: &str) -> Vec<String> {
    line.split_whitespace().map(str::to_string).collect()
}

/// Load a parallel corpus, dropping pairs where either side is empty (with a
/// warning) or has `max_len` or more tokens. Line indices are preserved.
pub fn load_parallel(src_path: &Path, tgt_path: &Path, max_len: usize) -> Result<Vec<RawPair>> {
    let src = read_lines(src_path)?;
    let tgt = read_lines(tgt_path)?;
    if src.len() != tgt.len() {
        return Err(AlignError::Data(format!(
            "line count mismatch: {} has {} lines, {} has {}",
            src_path.display(),
            src.len(),
            tgt_path.display(),
            tgt.len()
        )));
    }
    let mut pairs = Vec::new();
    for (idx, (s, t)) in src.iter().zip(&tgt).enumerate() {
        let s_toks = tokenize(s);
        let t_toks = tokenize(t);
        if s_toks.is_empty() || t_toks.is_empty() {
            log::warn!("dropping pair at line {}: empty side", idx + 1);
            continue;
        }
        if s_toks.len() >= max_len || t_toks.len() >= max_len {
            continue;
        }
        pairs.push(RawPair {
            src: s_toks,
            tgt: t_toks,
            line_index: idx,
        });
    }
    Ok(pairs)
}

/// Load a test corpus without length filtering. Pairs with an empty side are
/// kept as empty token lists so line correspondence with gold files survives.
pub fn load_parallel_unfiltered(src_path: &Path, tgt_path: &Path) -> Result<Vec<RawPair>> {
    let src = read_lines(src_path)?;
    let tgt = read_lines(tgt_path)?;
    if src.len() != tgt.len() {
        return Err(AlignError::Data(format!(
            "line count mismatch: {} has {} lines, {} has {}",
            src_path.display(),
            src.len(),
            tgt_path.display(),
            tgt.len()
        )));
    }
    Ok(src
        .iter()
        .zip(&tgt)
        .enumerate()
        .map(|(idx, (s, t))| RawPair {
            src: tokenize(s),
            tgt: tokenize(t),
            line_index: idx,
        })
        .collect())
}

/// Apply the length/emptiness filter to already-loaded pairs.
pub fn filter_pairs(pairs: &[RawPair], max_len: usize) -> Vec<RawPair> {
    pairs
        .iter()
        .filter(|p| {
            !p.src.is_empty() && !p.tgt.is_empty() && p.src.len() < max_len && p.tgt.len() < max_len
        })
        .cloned()
        .collect()
}

/// Encode raw pairs against fixed vocabularies.
pub fn encode_pairs(
    pairs: &[RawPair],
    src_vocab: &Vocabulary,
    tgt_vocab: &Vocabulary,
    src_chars: &CharVocab,
    tgt_chars: &CharVocab,
    char_cap: usize,
) -> Vec<SentencePair> {
    pairs
        .iter()
        .map(|p| SentencePair {
            src_ids: p.src.iter().map(|w| src_vocab.encode(w)).collect(),
            tgt_ids: p.tgt.iter().map(|w| tgt_vocab.encode(w)).collect(),
            src_chars: p.src.iter().map(|w| src_chars.encode_word(w, char_cap)).collect(),
            tgt_chars: p.tgt.iter().map(|w| tgt_chars.encode_word(w, char_cap)).collect(),
            src_surf: p.src.clone(),
            tgt_surf: p.tgt.clone(),
            line_index: p.line_index,
        })
        .collect()
}
