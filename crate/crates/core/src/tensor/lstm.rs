//! LSTM cells and the bidirectional encoder used for character and
//! sentence-level word representations.

use super::{Tape, VarId};

/// Staged parameter vars for one LSTM direction. Gate layout inside the
/// stacked `4u` dimension is `[input, forget, candidate, output]`.
#[derive(Debug, Clone, Copy)]
pub struct LstmVars {
    /// `[4u x d]` input weights.
    pub wx: VarId,
    /// `[4u x u]` recurrent weights.
    pub wh: VarId,
    /// `[4u]` bias.
    pub b: VarId,
}

fn lstm_step(tape: &mut Tape, p: LstmVars, x: VarId, h: VarId, c: VarId, u: usize) -> (VarId, VarId) {
    let zx = tape.matvec(p.wx, x);
    let zh = tape.matvec(p.wh, h);
    let zs = tape.add(zx, zh);
    let z = tape.add(zs, p.b);
    let i_pre = tape.slice(z, 0, u);
    let f_pre = tape.slice(z, u, u);
    let g_pre = tape.slice(z, 2 * u, u);
    let o_pre = tape.slice(z, 3 * u, u);
    let i = tape.sigmoid(i_pre);
    let f = tape.sigmoid(f_pre);
    let g = tape.tanh(g_pre);
    let o = tape.sigmoid(o_pre);
    let fc = tape.mul(f, c);
    let ig = tape.mul(i, g);
    let c_next = tape.add(fc, ig);
    let c_tanh = tape.tanh(c_next);
    let h_next = tape.mul(o, c_tanh);
    (h_next, c_next)
}

/// Run one LSTM direction over `inputs` (reversed when `reverse`) and return
/// the final hidden state of width `u`. State starts at zero.
pub fn lstm_final_state(
    tape: &mut Tape,
    p: LstmVars,
    inputs: &[VarId],
    u: usize,
    reverse: bool,
) -> VarId {
    assert!(!inputs.is_empty(), "lstm over empty sequence");
    let mut h = tape.constant(super::Tensor::zeros(&[u]));
    let mut c = tape.constant(super::Tensor::zeros(&[u]));
    let iter: Box<dyn Iterator<Item = &VarId>> = if reverse {
        Box::new(inputs.iter().rev())
    } else {
        Box::new(inputs.iter())
    };
    for &x in iter {
        let (h2, c2) = lstm_step(tape, p, x, h, c, u);
        h = h2;
        c = c2;
    }
    h
}

/// Bidirectional encoding: concatenation of the final forward state and the
/// final backward state, `[-> h, <- h]`, width `2u`.
pub fn bilstm_encode(
    tape: &mut Tape,
    fwd: LstmVars,
    bwd: LstmVars,
    inputs: &[VarId],
    u: usize,
) -> VarId {
    assert!(!inputs.is_empty(), "bilstm_encode over empty sequence");
    let hf = lstm_final_state(tape, fwd, inputs, u, false);
    let hb = lstm_final_state(tape, bwd, inputs, u, true);
    tape.concat(&[hf, hb])
}

/// Run one LSTM direction and return the hidden state at every position (in
/// original sequence order, also for the reverse direction).
pub fn lstm_all_states(
    tape: &mut Tape,
    p: LstmVars,
    inputs: &[VarId],
    u: usize,
    reverse: bool,
) -> Vec<VarId> {
    assert!(!inputs.is_empty(), "lstm over empty sequence");
    let mut h = tape.constant(super::Tensor::zeros(&[u]));
    let mut c = tape.constant(super::Tensor::zeros(&[u]));
    let order: Vec<usize> = if reverse {
        (0..inputs.len()).rev().collect()
    } else {
        (0..inputs.len()).collect()
    };
    let mut states = vec![h; inputs.len()];
    for t in order {
        let (h2, c2) = lstm_step(tape, p, inputs[t], h, c, u);
        h = h2;
        c = c2;
        states[t] = h;
    }
    states
}

/// Per-position concatenation of forward and backward states, width `2u`.
pub fn bilstm_all_states(
    tape: &mut Tape,
    fwd: LstmVars,
    bwd: LstmVars,
    inputs: &[VarId],
    u: usize,
) -> Vec<VarId> {
    let hf = lstm_all_states(tape, fwd, inputs, u, false);
    let hb = lstm_all_states(tape, bwd, inputs, u, true);
    hf.into_iter()
        .zip(hb)
        .map(|(f, b)| tape.concat(&[f, b]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{ParameterStore, Tensor};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn stage_lstm(store: &ParameterStore, tape: &mut Tape, prefix: &str) -> (LstmVars, LstmVars) {
        let mut var = |name: &str| tape.leaf(store.get(name).clone());
        let fwd = LstmVars {
            wx: var(&format!("{prefix}.fwd.wx")),
            wh: var(&format!("{prefix}.fwd.wh")),
            b: var(&format!("{prefix}.fwd.b")),
        };
        let bwd = LstmVars {
            wx: var(&format!("{prefix}.bwd.wx")),
            wh: var(&format!("{prefix}.bwd.wh")),
            b: var(&format!("{prefix}.bwd.b")),
        };
        (fwd, bwd)
    }

    fn init_lstm(store: &mut ParameterStore, prefix: &str, d: usize, u: usize, scale: f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for dir in ["fwd", "bwd"] {
            store.init_uniform(format!("{prefix}.{dir}.wx"), &[4 * u, d], scale, &mut rng);
            store.init_uniform(format!("{prefix}.{dir}.wh"), &[4 * u, u], scale, &mut rng);
            store.init_uniform(format!("{prefix}.{dir}.b"), &[4 * u], scale, &mut rng);
        }
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let (d, u) = (3, 4);
        let mut store = ParameterStore::new();
        init_lstm(&mut store, "lstm", d, u, 0.0);
        let mut tape = Tape::new();
        let (fwd, bwd) = stage_lstm(&store, &mut tape, "lstm");
        let xs: Vec<VarId> = (0..3)
            .map(|i| tape.constant(Tensor::vector(vec![i as f64, 1.0, -1.0])))
            .collect();
        let enc = bilstm_encode(&mut tape, fwd, bwd, &xs, u);
        assert!(tape.value(enc).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn length_one_sequence_uses_same_step_for_both_directions() {
        let (d, u) = (2, 3);
        let mut store = ParameterStore::new();
        init_lstm(&mut store, "lstm", d, u, 0.2);
        // Make both directions share weights so the two halves must agree.
        let wx = store.get("lstm.fwd.wx").clone();
        let wh = store.get("lstm.fwd.wh").clone();
        let b = store.get("lstm.fwd.b").clone();
        store.insert("lstm.bwd.wx", wx);
        store.insert("lstm.bwd.wh", wh);
        store.insert("lstm.bwd.b", b);
        let mut tape = Tape::new();
        let (fwd, bwd) = stage_lstm(&store, &mut tape, "lstm");
        let x = tape.constant(Tensor::vector(vec![0.5, -0.3]));
        let enc = bilstm_encode(&mut tape, fwd, bwd, &[x], u);
        let v = tape.value(enc).data();
        assert_eq!(&v[..u], &v[u..]);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (d, u) = (3, 4);
        let mut store = ParameterStore::new();
        init_lstm(&mut store, "lstm", d, u, 0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let xs: Vec<Tensor> = (0..3).map(|_| Tensor::uniform(&[d], 0.5, &mut rng)).collect();
        let weights = Tensor::vector((0..2 * u).map(|i| 0.1 * (i as f64 + 1.0)).collect());

        let err = crate::tensor::grad_check_tape(
            move |tape, vars| {
                let fwd = LstmVars {
                    wx: vars["lstm.fwd.wx"],
                    wh: vars["lstm.fwd.wh"],
                    b: vars["lstm.fwd.b"],
                };
                let bwd = LstmVars {
                    wx: vars["lstm.bwd.wx"],
                    wh: vars["lstm.bwd.wh"],
                    b: vars["lstm.bwd.b"],
                };
                let inputs: Vec<VarId> = xs.iter().map(|x| tape.constant(x.clone())).collect();
                let enc = bilstm_encode(tape, fwd, bwd, &inputs, u);
                tape.weighted_sum(enc, &weights)
            },
            &mut store,
            1e-5,
        );
        assert!(err < 1e-5, "bilstm grad-check error {err}");
    }
}
