//! State posteriors: IBM-1 position-wise Bayes and the scaled
//! forward-backward recursion over the 2I-state jump HMM.

use crate::error::{AlignError, Result};

/// Per-sentence posteriors. `gamma[j][s]` is the probability that source
/// position `j` (0-based here) aligns to state `s`; `xi[j][s][s2]` the
/// probability of the consecutive state pair at times `j -> j+1`.
#[derive(Debug, Clone)]
pub struct Posteriors {
    pub gamma: Vec<Vec<f64>>,
    pub xi: Option<Vec<Vec<Vec<f64>>>>,
    pub loglik: f64,
}

/// Transition matrices for a sentence: one shared matrix, or one per step
/// when the jump model conditions on the previous source word.
pub enum Transitions<'a> {
    Constant(&'a [Vec<f64>]),
    PerStep(&'a [Vec<Vec<f64>>]),
}

impl<'a> Transitions<'a> {
    /// Matrix governing the transition from time `j` to `j+1` (0-based step).
    pub fn at(&self, step: usize) -> &[Vec<f64>] {
        match self {
            Transitions::Constant(m) => m,
            Transitions::PerStep(ms) => &ms[step],
        }
    }
}

/// IBM-1 posteriors: a uniform `1/(2I)` prior over all states, so
/// `gamma_j(s)` is proportional to the emission probability alone.
pub fn ibm1_posteriors(emissions: &[Vec<f64>]) -> Result<Posteriors> {
    let mut gamma = Vec::with_capacity(emissions.len());
    let mut loglik = 0.0;
    for (j, row) in emissions.iter().enumerate() {
        let z: f64 = row.iter().sum();
        if z <= 0.0 {
            return Err(AlignError::Data(format!(
                "zero translation mass at source position {}",
                j + 1
            )));
        }
        gamma.push(row.iter().map(|p| p / z).collect());
        loglik += (z / row.len() as f64).ln();
    }
    Ok(Posteriors {
        gamma,
        xi: None,
        loglik,
    })
}

/// Scaled forward-backward. `emissions[j][s]` are probabilities (not logs);
/// rows of `transitions` and `initial` must be normalized. Returns state and
/// transition posteriors plus the sentence log-likelihood.
pub fn forward_backward(
    emissions: &[Vec<f64>],
    transitions: &Transitions,
    initial: &[f64],
) -> Result<Posteriors> {
    let j_len = emissions.len();
    assert!(j_len >= 1, "forward_backward on empty sentence");
    let s_len = initial.len();

    let mut alpha = vec![vec![0.0; s_len]; j_len];
    let mut scale = vec![0.0; j_len];

    for s in 0..s_len {
        alpha[0][s] = initial[s] * emissions[0][s];
    }
    scale[0] = alpha[0].iter().sum();
    if scale[0] <= 0.0 {
        return Err(AlignError::Data("zero-probability sentence".into()));
    }
    for v in alpha[0].iter_mut() {
        *v /= scale[0];
    }

    for j in 1..j_len {
        let trans = transitions.at(j - 1);
        let (prev, rest) = alpha.split_at_mut(j);
        let cur = &mut rest[0];
        for (s2, out) in cur.iter_mut().enumerate() {
            let mut acc = 0.0;
            for s in 0..s_len {
                acc += prev[j - 1][s] * trans[s][s2];
            }
            *out = acc * emissions[j][s2];
        }
        scale[j] = cur.iter().sum();
        if scale[j] <= 0.0 {
            return Err(AlignError::Data("zero-probability sentence".into()));
        }
        for v in cur.iter_mut() {
            *v /= scale[j];
        }
    }

    let mut beta = vec![vec![1.0; s_len]; j_len];
    for j in (0..j_len - 1).rev() {
        let trans = transitions.at(j);
        let (cur, rest) = beta.split_at_mut(j + 1);
        let next = &rest[0];
        for (s, out) in cur[j].iter_mut().enumerate() {
            let mut acc = 0.0;
            for s2 in 0..s_len {
                acc += trans[s][s2] * emissions[j + 1][s2] * next[s2];
            }
            *out = acc / scale[j + 1];
        }
    }

    let mut gamma = vec![vec![0.0; s_len]; j_len];
    for j in 0..j_len {
        let mut z = 0.0;
        for s in 0..s_len {
            gamma[j][s] = alpha[j][s] * beta[j][s];
            z += gamma[j][s];
        }
        for v in gamma[j].iter_mut() {
            *v /= z;
        }
    }

    let mut xi = Vec::with_capacity(j_len.saturating_sub(1));
    for j in 0..j_len - 1 {
        let trans = transitions.at(j);
        let mut mat = vec![vec![0.0; s_len]; s_len];
        let mut z = 0.0;
        for s in 0..s_len {
            if alpha[j][s] == 0.0 {
                continue;
            }
            for s2 in 0..s_len {
                let v = alpha[j][s] * trans[s][s2] * emissions[j + 1][s2] * beta[j + 1][s2];
                mat[s][s2] = v;
                z += v;
            }
        }
        if z <= 0.0 {
            return Err(AlignError::Data("zero-probability transition slice".into()));
        }
        for row in &mut mat {
            for v in row.iter_mut() {
                *v /= z;
            }
        }
        xi.push(mat);
    }

    Ok(Posteriors {
        gamma,
        xi: Some(xi),
        loglik: scale.iter().map(|c| c.ln()).sum(),
    })
}
