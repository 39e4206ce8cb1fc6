//! AER scoring and the error-analysis suite: accuracy and recall breakdowns,
//! jump confusion matrices, and garbage-collector frequency tables.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::corpus::{GoldAlignment, GoldMap, Vocabulary};
use crate::decoder::LinkSet;
use crate::error::{AlignError, Result};
use crate::jump::{bucket_count, bucket_index};

/// Corpus-level AER summary. Counts are summed over sentences before the
/// final division.
#[derive(Debug, Clone, PartialEq)]
pub struct AerReport {
    pub aer: f64,
    /// `|A ∩ P| / |A|`
    pub precision: f64,
    /// `|A ∩ S| / |S|`
    pub recall: f64,
    pub predicted: u64,
    pub sure: u64,
    pub hits_sure: u64,
    pub hits_possible: u64,
}

impl AerReport {
    /// `metric<TAB>value` block.
    pub fn to_text_block(&self) -> String {
        let mut out = String::new();
        writeln!(out, "aer\t{:.4}", self.aer).unwrap();
        writeln!(out, "precision\t{:.4}", self.precision).unwrap();
        writeln!(out, "recall\t{:.4}", self.recall).unwrap();
        writeln!(out, "predicted_links\t{}", self.predicted).unwrap();
        writeln!(out, "sure_links\t{}", self.sure).unwrap();
        writeln!(out, "hits_sure\t{}", self.hits_sure).unwrap();
        writeln!(out, "hits_possible\t{}", self.hits_possible).unwrap();
        out
    }
}

fn gold_for(gold: &GoldMap, sentence: usize) -> GoldAlignment {
    gold.get(&sentence).cloned().unwrap_or_default()
}

/// `AER = 1 - (|A ∩ S| + |A ∩ P|) / (|A| + |S|)`, aggregated over the corpus.
/// An empty comparison (no predictions, no sure links) scores 0 with a
/// warning.
pub fn aer(pred: &[LinkSet], gold: &GoldMap) -> AerReport {
    let sentences = pred.len().max(gold.keys().next_back().copied().unwrap_or(0));
    let (mut a, mut s, mut a_s, mut a_p) = (0u64, 0u64, 0u64, 0u64);
    for snt in 1..=sentences {
        let links = pred.get(snt - 1).cloned().unwrap_or_default();
        let g = gold_for(gold, snt);
        a += links.len() as u64;
        s += g.sure.len() as u64;
        a_s += links.iter().filter(|l| g.sure.contains(l)).count() as u64;
        a_p += links.iter().filter(|l| g.possible.contains(l)).count() as u64;
    }
    let aer = if a + s == 0 {
        log::warn!("AER of empty prediction and reference defined as 0");
        0.0
    } else {
        1.0 - (a_s + a_p) as f64 / (a + s) as f64
    };
    AerReport {
        aer,
        precision: if a > 0 { a_p as f64 / a as f64 } else { 0.0 },
        recall: if s > 0 { a_s as f64 / s as f64 } else { 0.0 },
        predicted: a,
        sure: s,
        hits_sure: a_s,
        hits_possible: a_p,
    }
}

/// Classification of the per-source-word decisions of an asymmetric decode.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AccuracyCounts {
    pub null_correct: u64,
    pub null_incorrect: u64,
    pub link_correct: u64,
    pub link_incorrect: u64,
}

impl AccuracyCounts {
    pub fn total(&self) -> u64 {
        self.null_correct + self.null_incorrect + self.link_correct + self.link_incorrect
    }
}

/// One decision per source token: a predicted null is correct when the gold
/// sure tier leaves the word unaligned; a predicted link is correct when it
/// belongs to the possible tier. If a symmetrized input carries several links
/// for one source word, the smallest target position is taken as the
/// decision.
pub fn accuracy_breakdown(pred: &[LinkSet], gold: &GoldMap, src_lens: &[usize]) -> AccuracyCounts {
    let mut counts = AccuracyCounts::default();
    for (idx, &j_len) in src_lens.iter().enumerate() {
        let links = pred.get(idx).cloned().unwrap_or_default();
        let g = gold_for(gold, idx + 1);
        for j in 1..=j_len as u32 {
            let decision = links.iter().find(|&&(sj, _)| sj == j).copied();
            match decision {
                None => {
                    if g.sure_covers_src(j) {
                        counts.null_incorrect += 1;
                    } else {
                        counts.null_correct += 1;
                    }
                }
                Some(link) => {
                    if g.possible.contains(&link) {
                        counts.link_correct += 1;
                    } else {
                        counts.link_incorrect += 1;
                    }
                }
            }
        }
    }
    counts
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RecallCounts {
    /// Target words the gold leaves unaligned that the prediction covers.
    pub null_violations: u64,
    /// Gold sure links absent from the prediction.
    pub missed_links: u64,
}

/// Recall errors grouped by a target-word key: for every target position the
/// gold possible tier leaves unaligned but the prediction covers, one null
/// violation; for every sure link missing from the prediction, one miss. Both
/// are attributed to the group of the target word involved.
pub fn recall_breakdown<F>(
    pred: &[LinkSet],
    gold: &GoldMap,
    tgt_lens: &[usize],
    group_of: F,
) -> BTreeMap<String, RecallCounts>
where
    F: Fn(usize, usize) -> String,
{
    let mut out: BTreeMap<String, RecallCounts> = BTreeMap::new();
    for (idx, &i_len) in tgt_lens.iter().enumerate() {
        let links = pred.get(idx).cloned().unwrap_or_default();
        let g = gold_for(gold, idx + 1);
        for i in 1..=i_len as u32 {
            if !g.possible_covers_tgt(i) && links.iter().any(|&(_, si)| si == i) {
                out.entry(group_of(idx, i as usize))
                    .or_default()
                    .null_violations += 1;
            }
        }
        for &(j, i) in &g.sure {
            if !links.contains(&(j, i)) {
                out.entry(group_of(idx, i as usize)).or_default().missed_links += 1;
            }
        }
    }
    out
}

/// Group target words by vocabulary membership (`known` / `unknown`).
pub fn recall_by_vocab(
    pred: &[LinkSet],
    gold: &GoldMap,
    tgt_sents: &[Vec<String>],
    vocab: &Vocabulary,
) -> BTreeMap<String, RecallCounts> {
    let lens: Vec<usize> = tgt_sents.iter().map(|s| s.len()).collect();
    recall_breakdown(pred, gold, &lens, |idx, i| {
        if vocab.contains(&tgt_sents[idx][i - 1]) {
            "known".into()
        } else {
            "unknown".into()
        }
    })
}

const CONTENT_TAGS: [&str; 4] = ["NOUN", "VERB", "ADJ", "ADV"];

/// Group target words by UPOS tag class: `content` covers noun, verb,
/// adjective and adverb; everything else is `function`.
pub fn recall_by_pos(
    pred: &[LinkSet],
    gold: &GoldMap,
    pos_tags: &[Vec<String>],
) -> BTreeMap<String, RecallCounts> {
    let lens: Vec<usize> = pos_tags.iter().map(|s| s.len()).collect();
    recall_breakdown(pred, gold, &lens, |idx, i| {
        if CONTENT_TAGS.contains(&pos_tags[idx][i - 1].as_str()) {
            "content".into()
        } else {
            "function".into()
        }
    })
}

/// `(2K+3) x (2K+3)` jump confusion counts; rows are reference jumps, columns
/// predicted jumps.
pub type ConfusionMatrix = Vec<Vec<u64>>;

fn lower_median(sorted: &[u32]) -> Option<u32> {
    if sorted.is_empty() {
        None
    } else {
        Some(sorted[(sorted.len() - 1) / 2])
    }
}

/// Jump confusion against the gold alignment. The reference jump at source
/// position `j` is the lower median of the gold target locations of `f_j`
/// minus the one of `f_{j-1}` (the median handles one-to-many links); a cell
/// is counted only when the previous source word's target location is
/// predicted exactly right and both positions carry a prediction and a gold
/// location.
pub fn jump_confusion(
    pred: &[LinkSet],
    gold: &GoldMap,
    src_lens: &[usize],
    k: usize,
) -> ConfusionMatrix {
    let n = bucket_count(k);
    let mut matrix = vec![vec![0u64; n]; n];
    for (idx, &j_len) in src_lens.iter().enumerate() {
        let links = pred.get(idx).cloned().unwrap_or_default();
        let g = gold_for(gold, idx + 1);
        let pred_of = |j: u32| links.iter().find(|&&(sj, _)| sj == j).map(|&(_, i)| i);
        let med_of = |j: u32| lower_median(&g.possible_targets_of(j));
        for j in 2..=j_len as u32 {
            let (Some(prev_med), Some(cur_med)) = (med_of(j - 1), med_of(j)) else {
                continue;
            };
            let (Some(prev_pred), Some(cur_pred)) = (pred_of(j - 1), pred_of(j)) else {
                continue;
            };
            if prev_pred != prev_med {
                continue;
            }
            let ref_jump = cur_med as i64 - prev_med as i64;
            let pred_jump = cur_pred as i64 - prev_pred as i64;
            matrix[bucket_index(k, ref_jump)][bucket_index(k, pred_jump)] += 1;
        }
    }
    matrix
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceGroup {
    /// Most frequent words covering 90% of the training tokens.
    Top90,
    /// Remaining seen words (the next 10% of mass).
    Mid10,
    /// Never seen in training.
    Unseen,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetGroup {
    /// Least frequent seen words covering 1% of the training tokens.
    Rare1,
    /// Never seen in training.
    Unseen,
}

/// Frequency groups computed from raw (uncapped) training token counts.
#[derive(Debug, Clone)]
pub struct FrequencyBuckets {
    src_top: HashSet<String>,
    src_seen: HashSet<String>,
    tgt_rare: HashSet<String>,
    tgt_seen: HashSet<String>,
}

impl FrequencyBuckets {
    pub fn build(src_freqs: &BTreeMap<String, u64>, tgt_freqs: &BTreeMap<String, u64>) -> Self {
        let total_src: u64 = src_freqs.values().sum();
        let mut by_count: Vec<(&String, u64)> =
            src_freqs.iter().map(|(w, &c)| (w, c)).collect();
        // Descending frequency, ties by word for determinism.
        by_count.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let mut src_top = HashSet::new();
        let mut cum = 0u64;
        for (word, count) in &by_count {
            if cum as f64 >= 0.9 * total_src as f64 {
                break;
            }
            src_top.insert((*word).clone());
            cum += count;
        }

        let total_tgt: u64 = tgt_freqs.values().sum();
        let mut by_count: Vec<(&String, u64)> =
            tgt_freqs.iter().map(|(w, &c)| (w, c)).collect();
        // Ascending frequency: the rare tail accounts for 1% of the mass.
        by_count.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(b.0)));
        let mut tgt_rare = HashSet::new();
        let mut cum = 0u64;
        for (word, count) in &by_count {
            if (cum + count) as f64 > 0.01 * total_tgt as f64 {
                break;
            }
            tgt_rare.insert((*word).clone());
            cum += count;
        }

        FrequencyBuckets {
            src_top,
            src_seen: src_freqs.keys().cloned().collect(),
            tgt_rare,
            tgt_seen: tgt_freqs.keys().cloned().collect(),
        }
    }

    pub fn source_group(&self, word: &str) -> SourceGroup {
        if self.src_top.contains(word) {
            SourceGroup::Top90
        } else if self.src_seen.contains(word) {
            SourceGroup::Mid10
        } else {
            SourceGroup::Unseen
        }
    }

    /// `None` for seen words outside the rare tail.
    pub fn target_group(&self, word: &str) -> Option<TargetGroup> {
        if !self.tgt_seen.contains(word) {
            Some(TargetGroup::Unseen)
        } else if self.tgt_rare.contains(word) {
            Some(TargetGroup::Rare1)
        } else {
            None
        }
    }
}

/// Incorrect non-null predicted links whose target word is rare or unseen,
/// broken down by source frequency group: rows are source 90% / 10% / unseen,
/// columns target 1% / unseen.
pub fn garbage_table(
    pred: &[LinkSet],
    gold: &GoldMap,
    buckets: &FrequencyBuckets,
    src_sents: &[Vec<String>],
    tgt_sents: &[Vec<String>],
) -> [[u64; 2]; 3] {
    let mut table = [[0u64; 2]; 3];
    for (idx, links) in pred.iter().enumerate() {
        let (Some(src), Some(tgt)) = (src_sents.get(idx), tgt_sents.get(idx)) else {
            continue;
        };
        let g = gold_for(gold, idx + 1);
        for &(j, i) in links {
            if g.possible.contains(&(j, i)) {
                continue;
            }
            let (Some(sw), Some(tw)) = (src.get(j as usize - 1), tgt.get(i as usize - 1)) else {
                continue;
            };
            let Some(tgt_group) = buckets.target_group(tw) else {
                continue;
            };
            let row = match buckets.source_group(sw) {
                SourceGroup::Top90 => 0,
                SourceGroup::Mid10 => 1,
                SourceGroup::Unseen => 2,
            };
            let col = match tgt_group {
                TargetGroup::Rare1 => 0,
                TargetGroup::Unseen => 1,
            };
            table[row][col] += 1;
        }
    }
    table
}

/// Tab-separated matrix with a labeled header row and column, ready for
/// external plotting.
pub fn emit_heatmap(matrix: &[Vec<u64>], labels: &[String], path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("\t{}\n", labels.join("\t")));
    for (row, label) in matrix.iter().zip(labels) {
        let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
        out.push_str(&format!("{label}\t{}\n", cells.join("\t")));
    }
    if matrix.is_empty() {
        // Header-only file for an empty matrix.
    }
    fs::write(path, out).map_err(|e| AlignError::io(path, e))
}

/// Check gold indices against the sentence lengths of the scored corpus.
pub fn validate_gold(gold: &GoldMap, src_lens: &[usize], tgt_lens: &[usize]) -> Result<()> {
    for (&snt, g) in gold {
        if snt > src_lens.len() {
            return Err(AlignError::Data(format!(
                "gold sentence id {snt} exceeds corpus size {}",
                src_lens.len()
            )));
        }
        for &(j, i) in &g.possible {
            if j as usize > src_lens[snt - 1] || i as usize > tgt_lens[snt - 1] {
                return Err(AlignError::Data(format!(
                    "gold link ({j}, {i}) out of bounds for sentence {snt}"
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn links(pairs: &[(u32, u32)]) -> LinkSet {
        pairs.iter().copied().collect()
    }

    fn gold_of(sure: &[(u32, u32)], possible_only: &[(u32, u32)]) -> GoldAlignment {
        let mut g = GoldAlignment::default();
        for &(j, i) in sure {
            g.add_sure(j, i);
        }
        for &(j, i) in possible_only {
            g.add_possible(j, i);
        }
        g
    }

    #[test]
    fn aer_trivial_fixtures() {
        let mut gold = GoldMap::new();
        gold.insert(1, gold_of(&[(1, 1)], &[]));
        let report = aer(&[links(&[(1, 1)])], &gold);
        assert_eq!(report.aer, 0.0);

        let mut gold = GoldMap::new();
        gold.insert(1, gold_of(&[(2, 2)], &[]));
        let report = aer(&[links(&[(1, 1)])], &gold);
        assert_eq!(report.aer, 1.0);
    }

    #[test]
    fn aer_mixed_sure_possible_fixture() {
        // A = {(1,1),(2,1)}, S = {(1,1)}, P = {(1,1),(2,1)}:
        // 1 - (1 + 2) / (2 + 1) = 0.
        let mut gold = GoldMap::new();
        gold.insert(1, gold_of(&[(1, 1)], &[(2, 1)]));
        let report = aer(&[links(&[(1, 1), (2, 1)])], &gold);
        assert_eq!(report.aer, 0.0);
        assert_eq!(report.hits_sure, 1);
        assert_eq!(report.hits_possible, 2);
    }

    #[test]
    fn aer_equals_one_minus_f1_when_tiers_coincide() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let mut a = LinkSet::new();
            let mut s = LinkSet::new();
            for _ in 0..rng.gen_range(1..12) {
                a.insert((rng.gen_range(1..=6), rng.gen_range(1..=6)));
            }
            for _ in 0..rng.gen_range(1..12) {
                s.insert((rng.gen_range(1..=6), rng.gen_range(1..=6)));
            }
            let mut gold = GoldMap::new();
            let mut g = GoldAlignment::default();
            for &(j, i) in &s {
                g.add_sure(j, i);
            }
            gold.insert(1, g);
            let report = aer(&[a.clone()], &gold);
            let inter = a.intersection(&s).count() as f64;
            let p = inter / a.len() as f64;
            let r = inter / s.len() as f64;
            let f1 = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
            assert!(
                (report.aer - (1.0 - f1)).abs() < 1e-12,
                "aer {} vs 1-F1 {}",
                report.aer,
                1.0 - f1
            );
        }
    }

    #[test]
    fn accuracy_counts_sum_to_source_tokens() {
        let mut gold = GoldMap::new();
        gold.insert(1, gold_of(&[(1, 1), (3, 2)], &[(2, 2)]));
        let pred = vec![links(&[(1, 1), (2, 3)])];
        let counts = accuracy_breakdown(&pred, &gold, &[4]);
        assert_eq!(counts.total(), 4);
        // j=1 correct link, j=2 incorrect link (not in P), j=3 incorrect null
        // (sure link exists), j=4 correct null.
        assert_eq!(
            counts,
            AccuracyCounts {
                null_correct: 1,
                null_incorrect: 1,
                link_correct: 1,
                link_incorrect: 1,
            }
        );
    }

    #[test]
    fn perfect_decode_lands_in_correct_cells() {
        let mut gold = GoldMap::new();
        gold.insert(1, gold_of(&[(1, 2), (2, 1)], &[]));
        let pred = vec![links(&[(1, 2), (2, 1)])];
        let counts = accuracy_breakdown(&pred, &gold, &[3]);
        assert_eq!(counts.link_correct, 2);
        assert_eq!(counts.null_correct, 1);
        assert_eq!(counts.null_incorrect + counts.link_incorrect, 0);
    }

    #[test]
    fn all_null_decode_on_fully_aligned_gold() {
        let mut gold = GoldMap::new();
        gold.insert(1, gold_of(&[(1, 1), (2, 2)], &[]));
        let counts = accuracy_breakdown(&[LinkSet::new()], &gold, &[2]);
        assert_eq!(counts.null_incorrect, 2);
        assert_eq!(counts.total(), 2);
    }

    #[test]
    fn recall_breakdown_unknown_word_miss() {
        // Target word 2 is "unknown"; its sure link is missed.
        let mut gold = GoldMap::new();
        gold.insert(1, gold_of(&[(1, 1), (2, 2)], &[]));
        let pred = vec![links(&[(1, 1)])];
        let groups = recall_breakdown(&pred, &gold, &[2], |_, i| {
            if i == 2 {
                "unknown".into()
            } else {
                "known".into()
            }
        });
        assert_eq!(groups["unknown"].missed_links, 1);
        assert!(groups.get("known").map(|c| c.missed_links).unwrap_or(0) == 0);
    }

    #[test]
    fn recall_breakdown_null_violation() {
        // Target position 2 unaligned in gold but covered by the prediction.
        let mut gold = GoldMap::new();
        gold.insert(1, gold_of(&[(1, 1)], &[]));
        let pred = vec![links(&[(1, 1), (2, 2)])];
        let groups = recall_breakdown(&pred, &gold, &[2], |_, _| "function".into());
        assert_eq!(groups["function"].null_violations, 1);
    }

    #[test]
    fn jump_confusion_monotone_decode_hits_plus_one_diagonal() {
        let mut gold = GoldMap::new();
        gold.insert(1, gold_of(&[(1, 1), (2, 2), (3, 3)], &[]));
        let pred = vec![links(&[(1, 1), (2, 2), (3, 3)])];
        let m = jump_confusion(&pred, &gold, &[3], 5);
        let idx = bucket_index(5, 1);
        assert_eq!(m[idx][idx], 2);
        let total: u64 = m.iter().flatten().sum();
        assert_eq!(total, 2);
    }

    #[test]
    fn jump_confusion_uses_lower_median_for_many_to_one() {
        // f_2 linked to targets {2, 4}: median location 3 does not exist as a
        // link, the lower median 2 is used.
        let mut gold = GoldMap::new();
        gold.insert(1, gold_of(&[(1, 1), (2, 2), (2, 4)], &[]));
        let pred = vec![links(&[(1, 1), (2, 4)])];
        let m = jump_confusion(&pred, &gold, &[2], 5);
        // Reference jump 2 - 1 = +1, predicted jump 4 - 1 = +3.
        assert_eq!(m[bucket_index(5, 1)][bucket_index(5, 3)], 1);
    }

    #[test]
    fn jump_confusion_gates_on_previous_position() {
        let mut gold = GoldMap::new();
        gold.insert(1, gold_of(&[(1, 1), (2, 2)], &[]));
        // Previous position predicted wrong: nothing is counted.
        let pred = vec![links(&[(1, 2), (2, 2)])];
        let m = jump_confusion(&pred, &gold, &[2], 5);
        let total: u64 = m.iter().flatten().sum();
        assert_eq!(total, 0);
    }

    fn counts_map(words: &[(&str, u64)]) -> BTreeMap<String, u64> {
        words.iter().map(|(w, c)| (w.to_string(), *c)).collect()
    }

    #[test]
    fn frequency_buckets_partition_by_mass() {
        // Source: "the" covers 90 of 100 tokens; "rare" the rest.
        let src = counts_map(&[("the", 90), ("rare", 10)]);
        // Target: 1% of 1000 tokens = 10; "tail" (6) fits, "mid" does not.
        let tgt = counts_map(&[("common", 900), ("mid", 94), ("tail", 6)]);
        let buckets = FrequencyBuckets::build(&src, &tgt);
        assert_eq!(buckets.source_group("the"), SourceGroup::Top90);
        assert_eq!(buckets.source_group("rare"), SourceGroup::Mid10);
        assert_eq!(buckets.source_group("never"), SourceGroup::Unseen);
        assert_eq!(buckets.target_group("tail"), Some(TargetGroup::Rare1));
        assert_eq!(buckets.target_group("common"), None);
        assert_eq!(buckets.target_group("new"), Some(TargetGroup::Unseen));
    }

    #[test]
    fn garbage_table_counts_single_crafted_misalignment() {
        let src = counts_map(&[("the", 90), ("rare", 10)]);
        let tgt = counts_map(&[("common", 900), ("mid", 94), ("tail", 6)]);
        let buckets = FrequencyBuckets::build(&src, &tgt);
        let src_sents = vec![vec!["the".to_string(), "rare".to_string()]];
        let tgt_sents = vec![vec!["common".to_string(), "tail".to_string()]];
        let mut gold = GoldMap::new();
        gold.insert(1, gold_of(&[(1, 1)], &[]));
        // Frequent source "the" misaligned to the rare target "tail".
        let pred = vec![links(&[(1, 2)])];
        let table = garbage_table(&pred, &gold, &buckets, &src_sents, &tgt_sents);
        assert_eq!(table[0][0], 1);
        let total: u64 = table.iter().flatten().sum();
        assert_eq!(total, 1);
    }

    #[test]
    fn garbage_table_empty_without_rare_targets() {
        let src = counts_map(&[("a", 10)]);
        let tgt = counts_map(&[("x", 10)]);
        let buckets = FrequencyBuckets::build(&src, &tgt);
        let src_sents = vec![vec!["a".to_string()]];
        let tgt_sents = vec![vec!["x".to_string()]];
        let pred = vec![links(&[(1, 1)])];
        let table = garbage_table(&pred, &GoldMap::new(), &buckets, &src_sents, &tgt_sents);
        assert_eq!(table.iter().flatten().sum::<u64>(), 0);
    }

    #[test]
    fn heatmap_of_identity_matrix_is_three_by_three_grid() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.tsv");
        let labels = vec!["a".to_string(), "b".to_string()];
        emit_heatmap(&[vec![1, 0], vec![0, 1]], &labels, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text, "\ta\tb\na\t1\t0\nb\t0\t1\n");
    }
}
