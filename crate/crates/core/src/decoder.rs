//! Asymmetric decoding, grow-diag-final symmetrization, and the Pharaoh
//! alignment file format.
//!
//! Links are `(j, i)` pairs of 1-based source/target positions in memory and
//! 0-based `j-i` tokens on disk.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{AlignError, Result};
use crate::inference::Transitions;
use crate::jump::StateSpace;

pub type LinkSet = BTreeSet<(u32, u32)>;

/// Position-wise argmax over the doubled state space (IBM-1 decoding). Null
/// states drop their link; ties break toward the smallest real index, real
/// before null, which the state ordering (reals first) gives for free.
pub fn argmax_decode(emissions: &[Vec<f64>], target_len: usize) -> LinkSet {
    let space = StateSpace::new(target_len);
    let mut links = LinkSet::new();
    for (j, row) in emissions.iter().enumerate() {
        let mut best = 0usize;
        for (s, &p) in row.iter().enumerate() {
            if p > row[best] {
                best = s;
            }
        }
        if !space.is_null(best) {
            links.insert((j as u32 + 1, space.position(best) as u32));
        }
    }
    links
}

/// Max-product decode of the HMM in log space with deterministic
/// lower-state-index tie-breaking. Null states on the best path yield no link.
pub fn viterbi(
    emissions: &[Vec<f64>],
    transitions: &Transitions,
    initial: &[f64],
    target_len: usize,
) -> Result<LinkSet> {
    let j_len = emissions.len();
    let s_len = initial.len();
    let mut delta = vec![vec![f64::NEG_INFINITY; s_len]; j_len];
    let mut back = vec![vec![0usize; s_len]; j_len];
    for s in 0..s_len {
        delta[0][s] = initial[s].ln() + emissions[0][s].ln();
    }
    for j in 1..j_len {
        let trans = transitions.at(j - 1);
        for s2 in 0..s_len {
            let e = emissions[j][s2].ln();
            if e == f64::NEG_INFINITY {
                continue;
            }
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0usize;
            for s in 0..s_len {
                let cand = delta[j - 1][s] + trans[s][s2].ln();
                if cand > best {
                    best = cand;
                    arg = s;
                }
            }
            delta[j][s2] = best + e;
            back[j][s2] = arg;
        }
    }
    let mut best = f64::NEG_INFINITY;
    let mut state = 0usize;
    for s in 0..s_len {
        if delta[j_len - 1][s] > best {
            best = delta[j_len - 1][s];
            state = s;
        }
    }
    if best == f64::NEG_INFINITY {
        return Err(AlignError::Data("no finite-probability path".into()));
    }
    let mut path = vec![0usize; j_len];
    path[j_len - 1] = state;
    for j in (1..j_len).rev() {
        path[j - 1] = back[j][path[j]];
    }
    let space = StateSpace::new(target_len);
    Ok(path
        .iter()
        .enumerate()
        .filter(|(_, &s)| !space.is_null(s))
        .map(|(j, &s)| (j as u32 + 1, space.position(s) as u32))
        .collect())
}

fn covered(links: &LinkSet) -> (BTreeSet<u32>, BTreeSet<u32>) {
    let src = links.iter().map(|&(j, _)| j).collect();
    let tgt = links.iter().map(|&(_, i)| i).collect();
    (src, tgt)
}

/// Grow-diag-final symmetrization of two directional alignments over the same
/// sentence (the reverse direction already re-oriented to `(j, i)`): start
/// from the intersection, grow with 8-neighborhood union links while either
/// endpoint is uncovered, then add union links whose both endpoints are still
/// uncovered (forward links first, then reverse).
pub fn grow_diag_final(forward: &LinkSet, reverse: &LinkSet) -> LinkSet {
    let union: LinkSet = forward.union(reverse).copied().collect();
    let mut aligned: LinkSet = forward.intersection(reverse).copied().collect();
    let (mut src_cov, mut tgt_cov) = covered(&aligned);

    const NEIGHBORS: [(i64, i64); 8] = [
        (-1, -1),
        (-1, 0),
        (-1, 1),
        (0, -1),
        (0, 1),
        (1, -1),
        (1, 0),
        (1, 1),
    ];

    loop {
        let mut added = Vec::new();
        for &(j, i) in &aligned {
            for (dj, di) in NEIGHBORS {
                let nj = j as i64 + dj;
                let ni = i as i64 + di;
                if nj < 1 || ni < 1 {
                    continue;
                }
                let cand = (nj as u32, ni as u32);
                if union.contains(&cand)
                    && !aligned.contains(&cand)
                    && (!src_cov.contains(&cand.0) || !tgt_cov.contains(&cand.1))
                {
                    added.push(cand);
                }
            }
        }
        if added.is_empty() {
            break;
        }
        for cand in added {
            // Coverage may have changed within this sweep; re-check.
            if !aligned.contains(&cand)
                && (!src_cov.contains(&cand.0) || !tgt_cov.contains(&cand.1))
            {
                aligned.insert(cand);
                src_cov.insert(cand.0);
                tgt_cov.insert(cand.1);
            }
        }
    }

    for set in [forward, reverse] {
        for &(j, i) in set.iter() {
            if !src_cov.contains(&j) && !tgt_cov.contains(&i) {
                aligned.insert((j, i));
                src_cov.insert(j);
                tgt_cov.insert(i);
            }
        }
    }
    aligned
}

/// Write one line of space-separated `j-i` tokens per sentence, 0-based.
pub fn write_pharaoh(alignments: &[LinkSet], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| AlignError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for links in alignments {
        let line = links
            .iter()
            .map(|&(j, i)| format!("{}-{}", j - 1, i - 1))
            .collect::<Vec<_>>()
            .join(" ");
        writeln!(w, "{line}").map_err(|e| AlignError::io(path, e))?;
    }
    Ok(())
}

/// Read Pharaoh alignments back into 1-based link sets.
pub fn read_pharaoh(path: &Path) -> Result<Vec<LinkSet>> {
    let file = File::open(path).map_err(|e| AlignError::io(path, e))?;
    let mut alignments = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| AlignError::io(path, e))?;
        let mut links = LinkSet::new();
        for token in line.split_whitespace() {
            let (j, i) = token.split_once('-').ok_or_else(|| {
                AlignError::parse(path, lineno + 1, format!("bad link token {token:?}"))
            })?;
            let j: u32 = j.parse().map_err(|_| {
                AlignError::parse(path, lineno + 1, format!("bad source index in {token:?}"))
            })?;
            let i: u32 = i.parse().map_err(|_| {
                AlignError::parse(path, lineno + 1, format!("bad target index in {token:?}"))
            })?;
            links.insert((j + 1, i + 1));
        }
        alignments.push(links);
    }
    Ok(alignments)
}
