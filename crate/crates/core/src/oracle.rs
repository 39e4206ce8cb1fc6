//! Exhaustive reference implementations used to verify the dynamic programs.
//!
//! Everything here enumerates the full state-sequence space and is therefore
//! only usable on tiny instances. The functions deliberately share no code
//! with [`crate::inference`] or [`crate::decoder`]; they exist so tests can
//! check the fast paths against an independent route.

/// Total probability of the observations summed over all state paths.
/// `step_transitions[j]` governs the move from time `j` to `j+1`.
pub fn enumerate_likelihood(
    emissions: &[Vec<f64>],
    step_transitions: &[Vec<Vec<f64>>],
    initial: &[f64],
) -> f64 {
    let j_len = emissions.len();
    let s_len = initial.len();
    let mut total = 0.0;
    let mut path = vec![0usize; j_len];
    loop {
        let mut p = initial[path[0]] * emissions[0][path[0]];
        for j in 1..j_len {
            p *= step_transitions[j - 1][path[j - 1]][path[j]] * emissions[j][path[j]];
        }
        total += p;
        // Advance the odometer.
        let mut pos = j_len;
        loop {
            if pos == 0 {
                return total;
            }
            pos -= 1;
            path[pos] += 1;
            if path[pos] < s_len {
                break;
            }
            path[pos] = 0;
        }
    }
}

/// Highest-probability state path by enumeration, first-best in lexicographic
/// path order on exact ties.
pub fn enumerate_best_path(
    emissions: &[Vec<f64>],
    step_transitions: &[Vec<Vec<f64>>],
    initial: &[f64],
) -> (Vec<usize>, f64) {
    let j_len = emissions.len();
    let s_len = initial.len();
    let mut best_path = vec![0usize; j_len];
    let mut best_score = f64::NEG_INFINITY;
    let mut path = vec![0usize; j_len];
    loop {
        let mut p = (initial[path[0]] * emissions[0][path[0]]).ln();
        for j in 1..j_len {
            p += (step_transitions[j - 1][path[j - 1]][path[j]] * emissions[j][path[j]]).ln();
        }
        if p > best_score {
            best_score = p;
            best_path.copy_from_slice(&path);
        }
        let mut pos = j_len;
        loop {
            if pos == 0 {
                return (best_path, best_score);
            }
            pos -= 1;
            path[pos] += 1;
            if path[pos] < s_len {
                break;
            }
            path[pos] = 0;
        }
    }
}
