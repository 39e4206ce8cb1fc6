//! Batching and batch-restricted source vocabularies.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{AlignError, Result};

use super::vocab::{Vocabulary, UNK_ID};
use super::SentencePair;

/// Indices of the corpus sentences forming one batch, plus the distinct
/// source ids occurring in them.
#[derive(Debug, Clone)]
pub struct Batch {
    pub indices: Vec<usize>,
    pub distinct_src: BTreeSet<u32>,
}

impl Batch {
    fn new(pairs: &[SentencePair], indices: Vec<usize>) -> Self {
        let mut distinct_src = BTreeSet::new();
        for &idx in &indices {
            distinct_src.extend(pairs[idx].src_ids.iter().copied());
        }
        Batch {
            indices,
            distinct_src,
        }
    }
}

/// Split the corpus into contiguous batches of `size` (last one may be
/// smaller). With `shuffle_seed` the sentence order is permuted
/// deterministically first.
pub fn make_batches(pairs: &[SentencePair], size: usize, shuffle_seed: Option<u64>) -> Vec<Batch> {
    assert!(size >= 1, "batch size must be >= 1");
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    if let Some(seed) = shuffle_seed {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);
    }
    order
        .chunks(size)
        .map(|chunk| Batch::new(pairs, chunk.to_vec()))
        .collect()
}

/// The batch-restricted source vocabulary: every source id of the batch plus
/// UNK, padded to `size` with the globally most frequent remaining ids.
/// Returned sorted ascending.
pub fn batch_vocab(batch: &Batch, full_vocab: &Vocabulary, size: usize) -> Result<Vec<u32>> {
    let mut support: BTreeSet<u32> = batch.distinct_src.clone();
    support.insert(UNK_ID);
    if support.len() > size {
        return Err(AlignError::Config(format!(
            "batch vocabulary size {size} is smaller than the {} distinct ids of the batch",
            support.len()
        )));
    }
    for id in full_vocab.ids_by_frequency() {
        if support.len() >= size {
            break;
        }
        support.insert(id);
    }
    Ok(support.into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::vocab::CharVocab;
    use crate::corpus::{encode_pairs, RawPair};

    fn pair_of(words: &[&str]) -> RawPair {
        RawPair {
            src: words.iter().map(|w| w.to_string()).collect(),
            tgt: vec!["t".to_string()],
            line_index: 0,
        }
    }

    fn corpus(sentences: &[&[&str]]) -> (Vec<SentencePair>, Vocabulary) {
        let raw: Vec<RawPair> = sentences.iter().map(|s| pair_of(s)).collect();
        let src_sents: Vec<Vec<String>> = raw.iter().map(|p| p.src.clone()).collect();
        let vocab = Vocabulary::build(src_sents.iter().map(|s| s.as_slice()), 1000);
        let tgt_sents: Vec<Vec<String>> = raw.iter().map(|p| p.tgt.clone()).collect();
        let tvocab = Vocabulary::build(tgt_sents.iter().map(|s| s.as_slice()), 1000);
        let chars = CharVocab::build(src_sents.iter().map(|s| s.as_slice()));
        let pairs = encode_pairs(&raw, &vocab, &tvocab, &chars, &chars, 30);
        (pairs, vocab)
    }

    #[test]
    fn batch_sizes_cover_remainder() {
        let sentences: Vec<Vec<&str>> = (0..250).map(|_| vec!["a"]).collect();
        let refs: Vec<&[&str]> = sentences.iter().map(|s| s.as_slice()).collect();
        let (pairs, _) = corpus(&refs);
        let batches = make_batches(&pairs, 100, None);
        let sizes: Vec<usize> = batches.iter().map(|b| b.indices.len()).collect();
        assert_eq!(sizes, vec![100, 100, 50]);
    }

    #[test]
    fn single_pair_single_batch() {
        let (pairs, _) = corpus(&[&["a"]]);
        let batches = make_batches(&pairs, 100, None);
        assert_eq!(batches.len(), 1);
        assert_eq!(batches[0].indices.len(), 1);
    }

    #[test]
    fn shuffle_is_deterministic_per_seed() {
        let sentences: Vec<Vec<&str>> = (0..57).map(|_| vec!["a"]).collect();
        let refs: Vec<&[&str]> = sentences.iter().map(|s| s.as_slice()).collect();
        let (pairs, _) = corpus(&refs);
        let a = make_batches(&pairs, 10, Some(42));
        let b = make_batches(&pairs, 10, Some(42));
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.indices, y.indices);
        }
    }

    #[test]
    fn batch_vocab_pads_with_frequent_ids_and_keeps_unk() {
        // Frequencies: a(id 2) 4x, b(id 3) 3x, c 2x, d 1x, e 1x.
        let (pairs, vocab) = corpus(&[
            &["a", "a", "b", "c"],
            &["a", "b", "c"],
            &["a", "b"],
            &["d"],
            &["e"],
        ]);
        // Batch containing only the rare words d(5) and e(6).
        let batch = Batch::new(&pairs, vec![3, 4]);
        let ids = batch_vocab(&batch, &vocab, 5).unwrap();
        let d = vocab.encode("d");
        let e = vocab.encode("e");
        let a = vocab.encode("a");
        let b = vocab.encode("b");
        assert_eq!(ids, vec![UNK_ID, a, b, d, e]);
    }

    #[test]
    fn batch_vocab_equal_to_full_vocab_when_size_covers_it() {
        let (pairs, vocab) = corpus(&[&["a", "b"], &["c"]]);
        let batch = Batch::new(&pairs, vec![0]);
        let ids = batch_vocab(&batch, &vocab, vocab.size()).unwrap();
        // Everything except NULL (reserved, never a source token) plus UNK.
        assert!(ids.contains(&UNK_ID));
        for w in ["a", "b", "c"] {
            assert!(ids.contains(&vocab.encode(w)));
        }
    }

    #[test]
    fn batch_vocab_too_small_is_config_error() {
        let (pairs, vocab) = corpus(&[&["a", "b", "c"]]);
        let batch = Batch::new(&pairs, vec![0]);
        assert!(batch_vocab(&batch, &vocab, 2).is_err());
    }

    #[test]
    fn batch_vocab_superset_of_batch_ids() {
        let (pairs, vocab) = corpus(&[&["a", "b"], &["c", "d"], &["e"]]);
        for batch in make_batches(&pairs, 2, Some(7)) {
            let ids = batch_vocab(&batch, &vocab, vocab.size()).unwrap();
            for id in &batch.distinct_src {
                assert!(ids.contains(id));
            }
        }
    }
}
