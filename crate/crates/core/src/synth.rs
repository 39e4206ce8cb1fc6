//! Synthetic bitext generators with known gold alignments, used by the test
//! suite and for smoke experiments without external corpora.

use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{GoldAlignment, GoldMap, RawPair};
use crate::error::Result;

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub src_lines: Vec<String>,
    pub tgt_lines: Vec<String>,
    pub gold: GoldMap,
}

impl SynthCorpus {
    pub fn raw_pairs(&self) -> Vec<RawPair> {
        self.src_lines
            .iter()
            .zip(&self.tgt_lines)
            .enumerate()
            .map(|(idx, (s, t))| RawPair {
                src: s.split_whitespace().map(str::to_string).collect(),
                tgt: t.split_whitespace().map(str::to_string).collect(),
                line_index: idx,
            })
            .collect()
    }

    pub fn write(&self, src_path: &Path, tgt_path: &Path, gold_path: &Path) -> Result<()> {
        use crate::error::AlignError;
        let join = |lines: &[String]| {
            let mut s = lines.join("\n");
            s.push('\n');
            s
        };
        std::fs::write(src_path, join(&self.src_lines))
            .map_err(|e| AlignError::io(src_path, e))?;
        std::fs::write(tgt_path, join(&self.tgt_lines))
            .map_err(|e| AlignError::io(tgt_path, e))?;
        crate::corpus::write_gold(&self.gold, gold_path)
    }

    pub fn len(&self) -> usize {
        self.src_lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.src_lines.is_empty()
    }
}

/// One-to-one dictionary corpus: every sentence draws distinct types, each
/// source word has exactly one translation, so the gold alignment is
/// unambiguous. `monotone` keeps the target in source order (the HMM test
/// regime); otherwise the target is permuted per sentence.
pub fn dictionary_corpus(
    n_pairs: usize,
    n_types: usize,
    min_len: usize,
    max_len: usize,
    monotone: bool,
    seed: u64,
) -> SynthCorpus {
    assert!(min_len >= 1 && max_len <= n_types && min_len <= max_len);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut src_lines = Vec::with_capacity(n_pairs);
    let mut tgt_lines = Vec::with_capacity(n_pairs);
    let mut gold = GoldMap::new();
    let mut type_pool: Vec<usize> = (0..n_types).collect();
    for snt in 1..=n_pairs {
        let len = rng.gen_range(min_len..=max_len);
        type_pool.shuffle(&mut rng);
        let chosen = &type_pool[..len];
        let src_tokens: Vec<String> = chosen.iter().map(|k| format!("s{k}")).collect();
        let mut order: Vec<usize> = (0..len).collect();
        if !monotone {
            order.shuffle(&mut rng);
        }
        let tgt_tokens: Vec<String> = order.iter().map(|&p| format!("t{}", chosen[p])).collect();
        let mut alignment = GoldAlignment::default();
        for (i, &p) in order.iter().enumerate() {
            // Source position p+1 sits at target position i+1.
            alignment.add_sure(p as u32 + 1, i as u32 + 1);
        }
        gold.insert(snt, alignment);
        src_lines.push(src_tokens.join(" "));
        tgt_lines.push(tgt_tokens.join(" "));
    }
    SynthCorpus {
        src_lines,
        tgt_lines,
        gold,
    }
}

/// Knobs for the Zipfian bitext generator.
#[derive(Debug, Clone)]
pub struct ZipfConfig {
    pub n_pairs: usize,
    pub n_src_types: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Probability that a token uses its secondary translation.
    pub ambiguity: f64,
    /// Probability that a source token stays untranslated (gold null).
    pub drop_prob: f64,
    /// Probability of inserting a spurious target function word after a
    /// position (unaligned on the source side).
    pub insert_prob: f64,
    /// Probability of swapping adjacent target words (local reordering).
    pub swap_prob: f64,
    pub seed: u64,
}

impl Default for ZipfConfig {
    fn default() -> Self {
        ZipfConfig {
            n_pairs: 10_000,
            n_src_types: 1_000,
            min_len: 4,
            max_len: 10,
            ambiguity: 0.15,
            drop_prob: 0.05,
            insert_prob: 0.08,
            swap_prob: 0.1,
            seed: 7,
        }
    }
}

/// Zipf-distributed bitext with a noisy one-to-two lexicon, dropped source
/// words, inserted function words and local reordering. Frequencies follow
/// `1/rank`, so the tail is rare the way real vocabularies are.
pub fn zipf_bitext(cfg: &ZipfConfig) -> SynthCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let weights: Vec<f64> = (1..=cfg.n_src_types).map(|r| 1.0 / r as f64).collect();
    let zipf = WeightedIndex::new(&weights).expect("valid weights");
    let function_words = ["fwa", "fwb", "fwc", "fwd"];

    let mut src_lines = Vec::with_capacity(cfg.n_pairs);
    let mut tgt_lines = Vec::with_capacity(cfg.n_pairs);
    let mut gold = GoldMap::new();
    for snt in 1..=cfg.n_pairs {
        let len = rng.gen_range(cfg.min_len..=cfg.max_len);
        let src_types: Vec<usize> = (0..len).map(|_| zipf.sample(&mut rng)).collect();
        let src_tokens: Vec<String> = src_types.iter().map(|k| format!("w{k}")).collect();

        // Target tokens tagged with the source position they translate.
        let mut tgt: Vec<(String, Option<u32>)> = Vec::new();
        for (j, &k) in src_types.iter().enumerate() {
            if rng.gen::<f64>() < cfg.drop_prob {
                continue;
            }
            let token = if rng.gen::<f64>() < cfg.ambiguity {
                format!("v{k}x")
            } else {
                format!("v{k}")
            };
            tgt.push((token, Some(j as u32 + 1)));
            if rng.gen::<f64>() < cfg.insert_prob {
                let fw = function_words[rng.gen_range(0..function_words.len())];
                tgt.push((fw.to_string(), None));
            }
        }
        if tgt.is_empty() {
            // Keep at least one aligned token so the pair is usable.
            let k = src_types[0];
            tgt.push((format!("v{k}"), Some(1)));
        }
        for i in 0..tgt.len().saturating_sub(1) {
            if rng.gen::<f64>() < cfg.swap_prob {
                tgt.swap(i, i + 1);
            }
        }

        let mut alignment = GoldAlignment::default();
        for (i, (_, link)) in tgt.iter().enumerate() {
            if let Some(j) = link {
                alignment.add_sure(*j, i as u32 + 1);
            }
        }
        gold.insert(snt, alignment);
        src_lines.push(src_tokens.join(" "));
        tgt_lines.push(tgt.into_iter().map(|(t, _)| t).collect::<Vec<_>>().join(" "));
    }
    SynthCorpus {
        src_lines,
        tgt_lines,
        gold,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dictionary_gold_is_within_bounds_and_unambiguous() {
        let corpus = dictionary_corpus(50, 20, 3, 8, false, 11);
        assert_eq!(corpus.len(), 50);
        for (snt, gold) in &corpus.gold {
            let src_len = corpus.src_lines[snt - 1].split_whitespace().count();
            let tgt_len = corpus.tgt_lines[snt - 1].split_whitespace().count();
            assert_eq!(gold.sure.len(), src_len);
            for &(j, i) in &gold.sure {
                assert!(j as usize <= src_len && i as usize <= tgt_len);
            }
        }
    }

    #[test]
    fn monotone_dictionary_gold_is_identity() {
        let corpus = dictionary_corpus(10, 15, 2, 6, true, 3);
        for gold in corpus.gold.values() {
            for &(j, i) in &gold.sure {
                assert_eq!(j, i);
            }
        }
    }

    #[test]
    fn generators_are_deterministic_per_seed() {
        let a = dictionary_corpus(20, 10, 2, 6, false, 42);
        let b = dictionary_corpus(20, 10, 2, 6, false, 42);
        assert_eq!(a.src_lines, b.src_lines);
        assert_eq!(a.tgt_lines, b.tgt_lines);
        let za = zipf_bitext(&ZipfConfig {
            n_pairs: 30,
            ..ZipfConfig::default()
        });
        let zb = zipf_bitext(&ZipfConfig {
            n_pairs: 30,
            ..ZipfConfig::default()
        });
        assert_eq!(za.tgt_lines, zb.tgt_lines);
    }

    #[test]
    fn zipf_gold_links_are_consistent() {
        let corpus = zipf_bitext(&ZipfConfig {
            n_pairs: 100,
            n_src_types: 50,
            ..ZipfConfig::default()
        });
        for (snt, gold) in &corpus.gold {
            let src_len = corpus.src_lines[snt - 1].split_whitespace().count();
            let tgt_len = corpus.tgt_lines[snt - 1].split_whitespace().count();
            for &(j, i) in &gold.sure {
                assert!(j as usize <= src_len && i as usize <= tgt_len);
            }
        }
    }

    #[test]
    fn round_trip_through_files() {
        let corpus = dictionary_corpus(5, 10, 2, 4, true, 9);
        let dir = tempfile::tempdir().unwrap();
        let (s, t, g) = (
            dir.path().join("s.txt"),
            dir.path().join("t.txt"),
            dir.path().join("g.txt"),
        );
        corpus.write(&s, &t, &g).unwrap();
        let raw = crate::corpus::load_parallel_unfiltered(&s, &t).unwrap();
        assert_eq!(raw.len(), 5);
        let gold = crate::corpus::load_gold(&g).unwrap();
        assert_eq!(gold, corpus.gold);
    }
}
