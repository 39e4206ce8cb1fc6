//! Jump-parameterized transition structure with per-position null states.
//!
//! Jumps are bucketed into `2K+3` cells: `Δ < -K`, each `Δ` in `[-K, +K]`,
//! and `Δ > +K`. Every target position `i` owns a null copy `i'` that
//! remembers the position, so jumps out of null states are measured from the
//! last real position (Och-Ney constraints: a null copy is reachable only
//! from states at its own position). The probability of entering a null state
//! is the single scalar `p0`.
//!
//! State indexing for a target length `I`: states `0..I` are the real
//! positions `1..=I`, states `I..2I` are their null copies.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{AlignError, Result};

pub const P0_CLAMP: (f64, f64) = (1e-4, 1.0 - 1e-4);

/// Number of jump buckets for a maximum jump `k`.
pub fn bucket_count(k: usize) -> usize {
    2 * k + 3
}

/// Bucket index of a signed jump: `0` holds `Δ < -K`, `2K+2` holds `Δ > K`,
/// and `Δ + K + 1` the rest.
pub fn bucket_index(k: usize, delta: i64) -> usize {
    let k = k as i64;
    if delta < -k {
        0
    } else if delta > k {
        (2 * k + 2) as usize
    } else {
        (delta + k + 1) as usize
    }
}

/// Human-readable bucket labels, `<-K`, `-K`, ..., `+K`, `>+K`.
pub fn bucket_labels(k: usize) -> Vec<String> {
    let mut labels = Vec::with_capacity(bucket_count(k));
    labels.push(format!("<-{k}"));
    for d in -(k as i64)..=k as i64 {
        if d > 0 {
            labels.push(format!("+{d}"));
        } else {
            labels.push(format!("{d}"));
        }
    }
    labels.push(format!(">+{k}"));
    labels
}

/// Multinomial over jump buckets plus the null-transition probability.
#[derive(Debug, Clone)]
pub struct JumpTable {
    pub k: usize,
    pub buckets: Vec<f64>,
    pub p0: f64,
}

impl JumpTable {
    pub fn uniform(k: usize, p0: f64) -> Self {
        assert!(k >= 1, "max jump K must be >= 1");
        assert!(p0 > 0.0 && p0 < 1.0, "p0 must lie strictly inside (0, 1)");
        let n = bucket_count(k);
        JumpTable {
            k,
            buckets: vec![1.0 / n as f64; n],
            p0,
        }
    }

    pub fn dump(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        writeln!(out, "k\t{}", self.k).unwrap();
        writeln!(out, "p0\t{}", self.p0).unwrap();
        for (label, b) in bucket_labels(self.k).iter().zip(&self.buckets) {
            writeln!(out, "{label}\t{b}").unwrap();
        }
        fs::write(path, out).map_err(|e| AlignError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| AlignError::io(path, e))?;
        let mut k = None;
        let mut p0 = None;
        let mut buckets = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let mut parts = line.split('\t');
            let (key, value) = match (parts.next(), parts.next()) {
                (Some(k), Some(v)) => (k, v),
                _ => return Err(AlignError::parse(path, lineno + 1, "expected key\\tvalue")),
            };
            match key {
                "k" => k = Some(value.parse::<usize>().map_err(|_| {
                    AlignError::parse(path, lineno + 1, "bad k")
                })?),
                "p0" => p0 = Some(value.parse::<f64>().map_err(|_| {
                    AlignError::parse(path, lineno + 1, "bad p0")
                })?),
                _ => buckets.push(value.parse::<f64>().map_err(|_| {
                    AlignError::parse(path, lineno + 1, "bad bucket probability")
                })?),
            }
        }
        let k = k.ok_or_else(|| AlignError::Data(format!("{}: missing k", path.display())))?;
        let p0 = p0.ok_or_else(|| AlignError::Data(format!("{}: missing p0", path.display())))?;
        if buckets.len() != bucket_count(k) {
            return Err(AlignError::Data(format!(
                "{}: expected {} buckets, found {}",
                path.display(),
                bucket_count(k),
                buckets.len()
            )));
        }
        Ok(JumpTable { k, buckets, p0 })
    }
}

/// The 2I-state HMM space for a target sentence of length `I`.
#[derive(Debug, Clone, Copy)]
pub struct StateSpace {
    pub target_len: usize,
}

impl StateSpace {
    pub fn new(target_len: usize) -> Self {
        assert!(target_len >= 1, "state space needs I >= 1");
        StateSpace { target_len }
    }

    pub fn num_states(&self) -> usize {
        2 * self.target_len
    }

    pub fn is_null(&self, state: usize) -> bool {
        state >= self.target_len
    }

    /// The remembered 1-based target position of a state.
    pub fn position(&self, state: usize) -> usize {
        if self.is_null(state) {
            state - self.target_len + 1
        } else {
            state + 1
        }
    }

    pub fn null_state_of(&self, position: usize) -> usize {
        self.target_len + position - 1
    }

    pub fn real_state_of(&self, position: usize) -> usize {
        position - 1
    }

    /// Index of the translation log-prob row for a state: real states use
    /// their own position's row, null copies share the NULL row at index `I`.
    pub fn translation_row(&self, state: usize) -> usize {
        if self.is_null(state) {
            self.target_len
        } else {
            state
        }
    }
}

/// Unnormalized jump mass toward each real target position from `from_pos`
/// (`0` means the virtual initial position). Offsets beyond `±K` share the
/// overflow buckets uniformly.
pub fn raw_jump_row(target_len: usize, k: usize, buckets: &[f64], from_pos: usize) -> Vec<f64> {
    assert_eq!(buckets.len(), bucket_count(k), "bucket vector length");
    let i_len = target_len as i64;
    let p = from_pos as i64;
    let ki = k as i64;
    let lo_valid = if from_pos == 0 { 0 } else { (p - 1 - ki).max(0) };
    let hi_valid = (i_len - p - ki).max(0);
    let mut row = Vec::with_capacity(target_len);
    for t in 1..=i_len {
        let delta = t - p;
        let mass = if from_pos == 0 && delta < 1 {
            0.0
        } else if delta < -ki {
            buckets[0] / lo_valid as f64
        } else if delta > ki {
            buckets[bucket_count(k) - 1] / hi_valid as f64
        } else {
            buckets[bucket_index(k, delta)]
        };
        row.push(mass);
    }
    row
}

/// One transition row over the `2I` states from a state remembered at
/// `from_pos`: mass `p0` to the position's null copy and `1 - p0` spread over
/// real targets after overflow redistribution and renormalization.
pub fn transition_row(
    target_len: usize,
    k: usize,
    buckets: &[f64],
    p0: f64,
    from_pos: usize,
) -> Vec<f64> {
    let space = StateSpace::new(target_len);
    let raw = raw_jump_row(target_len, k, buckets, from_pos);
    let z: f64 = raw.iter().sum();
    let mut row = vec![0.0; space.num_states()];
    if z > 0.0 {
        for (t, mass) in raw.iter().enumerate() {
            row[t] = (1.0 - p0) * mass / z;
        }
    } else {
        // Degenerate bucket vector: spread the real mass uniformly.
        for t in 0..target_len {
            row[t] = (1.0 - p0) / target_len as f64;
        }
    }
    row[space.null_state_of(from_pos.max(1))] = p0;
    row
}

/// Full `2I x 2I` transition matrix for a count-based jump table. A null
/// copy's outgoing row equals its real state's row (jumps are measured from
/// the remembered position).
pub fn transition_matrix(target_len: usize, table: &JumpTable) -> Vec<Vec<f64>> {
    transition_matrix_with(target_len, table.k, table.p0, |_pos| table.buckets.clone())
}

/// Transition matrix with per-position bucket distributions (neural jump
/// models supply a different multinomial per remembered position).
pub fn transition_matrix_with<F>(
    target_len: usize,
    k: usize,
    p0: f64,
    bucket_fn: F,
) -> Vec<Vec<f64>>
where
    F: Fn(usize) -> Vec<f64>,
{
    let space = StateSpace::new(target_len);
    let mut rows = Vec::with_capacity(space.num_states());
    for pos in 1..=target_len {
        rows.push(transition_row(target_len, k, &bucket_fn(pos), p0, pos));
    }
    for pos in 1..=target_len {
        rows.push(rows[space.real_state_of(pos)].clone());
    }
    rows
}

/// Initial distribution treated as a jump from virtual position 0; the null
/// share `p0` goes to the null copy of position 1.
pub fn initial_distribution(target_len: usize, table: &JumpTable) -> Vec<f64> {
    initial_distribution_with(target_len, table.k, table.p0, &table.buckets)
}

pub fn initial_distribution_with(
    target_len: usize,
    k: usize,
    p0: f64,
    buckets: &[f64],
) -> Vec<f64> {
    transition_row(target_len, k, buckets, p0, 0)
}

/// Transition structure of one sentence: the initial vector plus either a
/// shared matrix or one matrix per step.
#[derive(Debug, Clone)]
pub struct SentenceTransitions {
    pub initial: Vec<f64>,
    pub matrices: TransitionMatrices,
}

#[derive(Debug, Clone)]
pub enum TransitionMatrices {
    Constant(Vec<Vec<f64>>),
    PerStep(Vec<Vec<Vec<f64>>>),
}

impl SentenceTransitions {
    pub fn from_table(target_len: usize, table: &JumpTable) -> Self {
        SentenceTransitions {
            initial: initial_distribution(target_len, table),
            matrices: TransitionMatrices::Constant(transition_matrix(target_len, table)),
        }
    }

    pub fn view(&self) -> crate::inference::Transitions<'_> {
        match &self.matrices {
            TransitionMatrices::Constant(m) => crate::inference::Transitions::Constant(m),
            TransitionMatrices::PerStep(ms) => crate::inference::Transitions::PerStep(ms),
        }
    }
}

/// Expected-count accumulator for the jump M-step. `row_classes` tracks the
/// expected number of real-target transitions out of each `(I, from_pos)` row
/// shape, which is what the exact bucket auxiliary needs.
#[derive(Debug, Clone)]
pub struct JumpCounts {
    pub k: usize,
    pub buckets: Vec<f64>,
    pub null: f64,
    pub real: f64,
    pub row_classes: BTreeMap<(u32, u32), f64>,
}

impl JumpCounts {
    pub fn new(k: usize) -> Self {
        JumpCounts {
            k,
            buckets: vec![0.0; bucket_count(k)],
            null: 0.0,
            real: 0.0,
            row_classes: BTreeMap::new(),
        }
    }

    /// Record an expected transition from `from_pos` (0 = initial) to real
    /// target `to_pos` with posterior weight `w`.
    pub fn add_real(&mut self, target_len: usize, from_pos: usize, to_pos: usize, w: f64) {
        let delta = to_pos as i64 - from_pos as i64;
        self.buckets[bucket_index(self.k, delta)] += w;
        self.real += w;
        *self
            .row_classes
            .entry((target_len as u32, from_pos as u32))
            .or_insert(0.0) += w;
    }

    pub fn add_null(&mut self, w: f64) {
        self.null += w;
    }

    pub fn merge(&mut self, other: &JumpCounts) {
        assert_eq!(self.k, other.k);
        for (a, b) in self.buckets.iter_mut().zip(&other.buckets) {
            *a += b;
        }
        self.null += other.null;
        self.real += other.real;
        for (key, w) in &other.row_classes {
            *self.row_classes.entry(*key).or_insert(0.0) += w;
        }
    }

    pub fn total(&self) -> f64 {
        self.null + self.real
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0.0
    }
}

/// Fold one sentence's posteriors into jump expected counts: the initial
/// choice counts as a jump from virtual position 0, transitions into null
/// copies feed the `p0` estimate.
pub fn collect_jump_counts(
    space: &StateSpace,
    post: &crate::inference::Posteriors,
    counts: &mut JumpCounts,
) {
    let i_len = space.target_len;
    for (s, &g) in post.gamma[0].iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        if space.is_null(s) {
            counts.add_null(g);
        } else {
            counts.add_real(i_len, 0, space.position(s), g);
        }
    }
    for mat in post.xi.as_deref().unwrap_or(&[]) {
        for (s, row) in mat.iter().enumerate() {
            let from_pos = space.position(s);
            for (s2, &x) in row.iter().enumerate() {
                if x == 0.0 {
                    continue;
                }
                if space.is_null(s2) {
                    counts.add_null(x);
                } else {
                    counts.add_real(i_len, from_pos, space.position(s2), x);
                }
            }
        }
    }
}

/// Plain count-normalizing M-step: buckets from normalized expected counts,
/// `p0` from the null share clamped to `[1e-4, 1 - 1e-4]`. All-zero counts
/// fall back to a uniform table with a warning.
pub fn jump_m_step(counts: &JumpCounts) -> JumpTable {
    let total_buckets: f64 = counts.buckets.iter().sum();
    let buckets = if total_buckets > 0.0 {
        counts.buckets.iter().map(|c| c / total_buckets).collect()
    } else {
        log::warn!("jump M-step saw all-zero counts; falling back to uniform buckets");
        vec![1.0 / bucket_count(counts.k) as f64; bucket_count(counts.k)]
    };
    let p0 = if counts.total() > 0.0 {
        (counts.null / counts.total()).clamp(P0_CLAMP.0, P0_CLAMP.1)
    } else {
        P0_CLAMP.0
    };
    JumpTable {
        k: counts.k,
        buckets,
        p0,
    }
}

/// Which buckets contribute mass to the row class `(I, from_pos)`; used both
/// by the exact bucket auxiliary and to rebuild row normalizers on the tape.
pub fn bucket_mask(target_len: usize, k: usize, from_pos: usize) -> Vec<bool> {
    let n = bucket_count(k);
    let mut mask = vec![false; n];
    let i_len = target_len as i64;
    let p = from_pos as i64;
    let ki = k as i64;
    for delta in -ki..=ki {
        let t = p + delta;
        if t >= 1 && t <= i_len && !(from_pos == 0 && delta < 1) {
            mask[bucket_index(k, delta)] = true;
        }
    }
    if from_pos > 0 && p - 1 - ki >= 1 {
        mask[0] = true;
    }
    if i_len - p - ki >= 1 {
        mask[n - 1] = true;
    }
    mask
}

/// Exact bucket-term auxiliary `sum_k C_k ln b_k - sum_rows N_r ln Z_r(b)`
/// (constants independent of `b` omitted).
fn bucket_auxiliary(counts: &JumpCounts, buckets: &[f64]) -> f64 {
    let mut q = 0.0;
    for (c, b) in counts.buckets.iter().zip(buckets) {
        if *c > 0.0 {
            if *b <= 0.0 {
                return f64::NEG_INFINITY;
            }
            q += c * b.ln();
        }
    }
    for ((i_len, from_pos), n) in &counts.row_classes {
        if *n <= 0.0 {
            continue;
        }
        let mask = bucket_mask(*i_len as usize, counts.k, *from_pos as usize);
        let z: f64 = buckets
            .iter()
            .zip(&mask)
            .filter(|(_, m)| **m)
            .map(|(b, _)| b)
            .sum();
        if z <= 0.0 {
            return f64::NEG_INFINITY;
        }
        q -= n * z.ln();
    }
    q
}

/// One minorize-maximize update of the bucket distribution; never decreases
/// [`bucket_auxiliary`].
fn mm_bucket_update(counts: &JumpCounts, old: &[f64]) -> Vec<f64> {
    let n = bucket_count(counts.k);
    // Linearize the -ln Z terms around the current buckets.
    let mut w = vec![0.0; n];
    for ((i_len, from_pos), count) in &counts.row_classes {
        if *count <= 0.0 {
            continue;
        }
        let mask = bucket_mask(*i_len as usize, counts.k, *from_pos as usize);
        let z: f64 = old
            .iter()
            .zip(&mask)
            .filter(|(_, m)| **m)
            .map(|(b, _)| b)
            .sum();
        if z <= 0.0 {
            continue;
        }
        for (wk, m) in w.iter_mut().zip(&mask) {
            if *m {
                *wk += count / z;
            }
        }
    }
    // Maximize sum C_k ln b_k - sum w_k b_k on the simplex: b_k = C_k/(l + w_k)
    // with l chosen so the result normalizes.
    let positive: Vec<usize> = (0..n).filter(|&kk| counts.buckets[kk] > 0.0).collect();
    if positive.is_empty() {
        return old.to_vec();
    }
    let w_min = positive.iter().map(|&kk| w[kk]).fold(f64::INFINITY, f64::min);
    let total_c: f64 = counts.buckets.iter().sum();
    let mut lo = -w_min + 1e-300;
    let mut hi = -w_min + total_c + 1.0;
    let g = |l: f64| -> f64 {
        positive
            .iter()
            .map(|&kk| counts.buckets[kk] / (l + w[kk]))
            .sum()
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let l = 0.5 * (lo + hi);
    let mut out = vec![0.0; n];
    let mut total = 0.0;
    for &kk in &positive {
        out[kk] = counts.buckets[kk] / (l + w[kk]);
        total += out[kk];
    }
    for v in &mut out {
        *v /= total;
    }
    out
}

/// M-step guaranteed not to decrease the EM auxiliary: take the
/// count-normalized candidate when it already improves on the old buckets,
/// otherwise refine the old buckets with MM iterations.
pub fn jump_m_step_monotone(counts: &JumpCounts, old: &JumpTable) -> JumpTable {
    let mut candidate = jump_m_step(counts);
    if counts.is_empty() || counts.row_classes.is_empty() {
        return candidate;
    }
    let q_old = bucket_auxiliary(counts, &old.buckets);
    let q_candidate = bucket_auxiliary(counts, &candidate.buckets);
    if q_candidate >= q_old {
        return candidate;
    }
    let mut best = old.buckets.clone();
    let mut q_best = q_old;
    for _ in 0..100 {
        let next = mm_bucket_update(counts, &best);
        let q_next = bucket_auxiliary(counts, &next);
        if q_next <= q_best + 1e-15 {
            break;
        }
        best = next;
        q_best = q_next;
    }
    candidate.buckets = best;
    candidate
}
