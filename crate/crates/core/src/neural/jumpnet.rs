//! Neural jump models: an MLP over contextual word encodings produces the
//! 2K+3 bucket multinomial per state. Words are character-encoded, then a
//! sentence-level bidirectional encoder adds context; a boundary token
//! prepended to the sentence stands in for the virtual initial position 0.
//!
//! Only the bucket distribution is neural; overflow redistribution, the null
//! machinery and the count-estimated scalar `p0` are shared with the
//! count-based path.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::SentencePair;
use crate::jump::bucket_count;
use crate::tensor::{bilstm_all_states, bilstm_encode, ParameterStore, Tape, VarId};

use super::translation::{init_lstm, stage_lstm, INIT_SCALE};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JumpVariant {
    /// Jump conditioned on the previously aligned target word.
    Tgt,
    /// Jump conditioned on the previous target word and the previous source
    /// word.
    Both,
}

impl JumpVariant {
    pub fn name(&self) -> &'static str {
        match self {
            JumpVariant::Tgt => "nnjumptgt",
            JumpVariant::Both => "nnjumpboth",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "nnjumptgt" => JumpVariant::Tgt,
            "nnjumpboth" => JumpVariant::Both,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpDims {
    pub char_embed: usize,
    /// Per-direction units of the character-level word encoder.
    pub word_units: usize,
    /// Per-direction units of the sentence-level context encoder.
    pub sent_units: usize,
    pub mlp_hidden: usize,
    pub k: usize,
}

impl Default for JumpDims {
    fn default() -> Self {
        JumpDims {
            char_embed: 64,
            word_units: 32,
            sent_units: 32,
            mlp_hidden: 80,
            k: 5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NeuralJump {
    pub variant: JumpVariant,
    pub dims: JumpDims,
    pub params: ParameterStore,
}

impl NeuralJump {
    pub fn new(
        variant: JumpVariant,
        dims: JumpDims,
        src_chars: usize,
        tgt_chars: usize,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParameterStore::new();
        params.init_uniform(
            "jmp.char.emb.tgt",
            &[tgt_chars, dims.char_embed],
            INIT_SCALE,
            &mut rng,
        );
        init_lstm(&mut params, "jmp.word.tgt", dims.char_embed, dims.word_units, &mut rng);
        init_lstm(&mut params, "jmp.sent.tgt", 2 * dims.word_units, dims.sent_units, &mut rng);
        let mut mlp_in = 2 * dims.sent_units;
        if variant == JumpVariant::Both {
            params.init_uniform(
                "jmp.char.emb.src",
                &[src_chars, dims.char_embed],
                INIT_SCALE,
                &mut rng,
            );
            init_lstm(&mut params, "jmp.word.src", dims.char_embed, dims.word_units, &mut rng);
            init_lstm(&mut params, "jmp.sent.src", 2 * dims.word_units, dims.sent_units, &mut rng);
            mlp_in += 2 * dims.sent_units;
        }
        params.init_uniform("jmp.mlp.w1", &[dims.mlp_hidden, mlp_in], INIT_SCALE, &mut rng);
        params.init_uniform("jmp.mlp.b1", &[dims.mlp_hidden], INIT_SCALE, &mut rng);
        params.init_uniform(
            "jmp.mlp.w2",
            &[bucket_count(dims.k), dims.mlp_hidden],
            INIT_SCALE,
            &mut rng,
        );
        params.init_uniform("jmp.mlp.b2", &[bucket_count(dims.k)], INIT_SCALE, &mut rng);
        NeuralJump {
            variant,
            dims,
            params,
        }
    }
}

fn encode_side(
    tape: &mut Tape,
    vars: &BTreeMap<String, VarId>,
    dims: &JumpDims,
    side: &str,
    char_seqs: &[Vec<u32>],
) -> Vec<VarId> {
    let emb = vars[&format!("jmp.char.emb.{side}")];
    let (wf, wb) = stage_lstm(vars, &format!("jmp.word.{side}"));
    let words: Vec<VarId> = char_seqs
        .iter()
        .map(|chars| {
            let chars: &[u32] = if chars.is_empty() {
                &[crate::corpus::CHAR_UNK]
            } else {
                chars
            };
            let cs: Vec<VarId> = chars.iter().map(|&c| tape.row(emb, c as usize)).collect();
            bilstm_encode(tape, wf, wb, &cs, dims.word_units)
        })
        .collect();
    let (sf, sb) = stage_lstm(vars, &format!("jmp.sent.{side}"));
    bilstm_all_states(tape, sf, sb, &words, dims.sent_units)
}

/// Contextual encodings `h_0..h_I` of the target positions; index 0 is the
/// prepended boundary token standing for the virtual initial position.
pub fn encode_target_positions(
    tape: &mut Tape,
    vars: &BTreeMap<String, VarId>,
    dims: &JumpDims,
    pair: &SentencePair,
) -> Vec<VarId> {
    let mut seqs = Vec::with_capacity(pair.target_len() + 1);
    seqs.push(vec![crate::corpus::CHAR_BOS]);
    seqs.extend(pair.tgt_chars.iter().cloned());
    encode_side(tape, vars, dims, "tgt", &seqs)
}

/// Contextual encodings `h'_0..h'_J` of the source positions (Both variant);
/// index 0 is the boundary token standing for the position before `f_1`.
pub fn encode_source_positions(
    tape: &mut Tape,
    vars: &BTreeMap<String, VarId>,
    dims: &JumpDims,
    pair: &SentencePair,
) -> Vec<VarId> {
    let mut seqs = Vec::with_capacity(pair.source_len() + 1);
    seqs.push(vec![crate::corpus::CHAR_BOS]);
    seqs.extend(pair.src_chars.iter().cloned());
    encode_side(tape, vars, dims, "src", &seqs)
}

/// Bucket log-probabilities (length 2K+3) for one conditioning input: the
/// target-position encoding, plus the previous source word encoding for the
/// Both variant.
pub fn jump_bucket_logprobs(
    tape: &mut Tape,
    vars: &BTreeMap<String, VarId>,
    variant: JumpVariant,
    h_pos: VarId,
    h_src: Option<VarId>,
) -> VarId {
    let input = match variant {
        JumpVariant::Tgt => h_pos,
        JumpVariant::Both => {
            let h_src = h_src.expect("Both variant needs the previous source encoding");
            tape.concat(&[h_pos, h_src])
        }
    };
    let pre = tape.linear(vars["jmp.mlp.w1"], input, vars["jmp.mlp.b1"]);
    let act = tape.htanh(pre);
    let logits = tape.linear(vars["jmp.mlp.w2"], act, vars["jmp.mlp.b2"]);
    tape.log_softmax(logits, None)
}

/// All bucket log-prob vars a sentence needs: per remembered position for
/// Tgt, per (position, previous source time) for Both.
pub struct SentenceJumpVars {
    pub variant: JumpVariant,
    pub target_len: usize,
    pub source_len: usize,
    vars: Vec<VarId>,
}

impl SentenceJumpVars {
    /// Bucket log-probs conditioning the transition into time `j` (1-based)
    /// out of remembered position `from_pos` (0 = initial).
    pub fn at(&self, from_pos: usize, time_j: usize) -> VarId {
        match self.variant {
            JumpVariant::Tgt => self.vars[from_pos],
            JumpVariant::Both => self.vars[from_pos * self.source_len + (time_j - 1)],
        }
    }
}

/// Forward pass of the jump network over one sentence.
pub fn sentence_jump_vars(
    tape: &mut Tape,
    vars: &BTreeMap<String, VarId>,
    model: &NeuralJump,
    pair: &SentencePair,
) -> SentenceJumpVars {
    let h_tgt = encode_target_positions(tape, vars, &model.dims, pair);
    let mut out = Vec::new();
    match model.variant {
        JumpVariant::Tgt => {
            for &h in &h_tgt {
                out.push(jump_bucket_logprobs(tape, vars, JumpVariant::Tgt, h, None));
            }
        }
        JumpVariant::Both => {
            let h_src = encode_source_positions(tape, vars, &model.dims, pair);
            for &h in &h_tgt {
                for j in 1..=pair.source_len() {
                    out.push(jump_bucket_logprobs(
                        tape,
                        vars,
                        JumpVariant::Both,
                        h,
                        Some(h_src[j - 1]),
                    ));
                }
            }
        }
    }
    SentenceJumpVars {
        variant: model.variant,
        target_len: pair.target_len(),
        source_len: pair.source_len(),
        vars: out,
    }
}

/// Assemble the sentence transition structure from the frozen bucket values
/// of a jump-network forward pass; `p0` stays count-estimated.
pub fn sentence_transitions(
    tape: &Tape,
    sj: &SentenceJumpVars,
    k: usize,
    p0: f64,
) -> crate::jump::SentenceTransitions {
    use crate::jump::{initial_distribution_with, transition_matrix_with, TransitionMatrices};
    let buckets_at = |pos: usize, time_j: usize| -> Vec<f64> {
        tape.value(sj.at(pos, time_j))
            .data()
            .iter()
            .map(|lp| lp.exp())
            .collect()
    };
    let initial = initial_distribution_with(sj.target_len, k, p0, &buckets_at(0, 1));
    let matrices = match sj.variant {
        JumpVariant::Tgt => TransitionMatrices::Constant(transition_matrix_with(
            sj.target_len,
            k,
            p0,
            |pos| buckets_at(pos, 1),
        )),
        JumpVariant::Both => TransitionMatrices::PerStep(
            (2..=sj.source_len)
                .map(|j| transition_matrix_with(sj.target_len, k, p0, |pos| buckets_at(pos, j)))
                .collect(),
        ),
    };
    crate::jump::SentenceTransitions { initial, matrices }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{encode_pairs, CharVocab, RawPair, Vocabulary};
    use crate::tensor::Tensor;

    fn tiny_pair() -> (SentencePair, CharVocab, CharVocab) {
        let raw = vec![RawPair {
            src: vec!["ab".into(), "ba".into()],
            tgt: vec!["xy".into(), "yx".into(), "zz".into()],
            line_index: 0,
        }];
        let src_sents: Vec<Vec<String>> = raw.iter().map(|p| p.src.clone()).collect();
        let tgt_sents: Vec<Vec<String>> = raw.iter().map(|p| p.tgt.clone()).collect();
        let sv = Vocabulary::build(src_sents.iter().map(|s| s.as_slice()), 100);
        let tv = Vocabulary::build(tgt_sents.iter().map(|s| s.as_slice()), 100);
        let sc = CharVocab::build(src_sents.iter().map(|s| s.as_slice()));
        let tc = CharVocab::build(tgt_sents.iter().map(|s| s.as_slice()));
        let pair = encode_pairs(&raw, &sv, &tv, &sc, &tc, 30).remove(0);
        (pair, sc, tc)
    }

    fn small_dims() -> JumpDims {
        JumpDims {
            char_embed: 4,
            word_units: 3,
            sent_units: 3,
            mlp_hidden: 6,
            k: 2,
        }
    }

    #[test]
    fn zero_mlp_weights_give_uniform_buckets() {
        let (pair, sc, tc) = tiny_pair();
        let mut model = NeuralJump::new(JumpVariant::Tgt, small_dims(), sc.size(), tc.size(), 3);
        let n = bucket_count(model.dims.k);
        let h = model.dims.mlp_hidden;
        model.params.insert("jmp.mlp.w2", Tensor::zeros(&[n, h]));
        model.params.insert("jmp.mlp.b2", Tensor::zeros(&[n]));
        let mut tape = Tape::new();
        let vars = model.params.stage(&mut tape);
        let sj = sentence_jump_vars(&mut tape, &vars, &model, &pair);
        let row = tape.value(sj.at(1, 1));
        for v in row.data() {
            assert!((v - (-(n as f64).ln())).abs() < 1e-12);
        }
    }

    #[test]
    fn buckets_normalize_and_vary_by_position() {
        let (pair, sc, tc) = tiny_pair();
        for variant in [JumpVariant::Tgt, JumpVariant::Both] {
            let model = NeuralJump::new(variant, small_dims(), sc.size(), tc.size(), 5);
            let mut tape = Tape::new();
            let vars = model.params.stage(&mut tape);
            let sj = sentence_jump_vars(&mut tape, &vars, &model, &pair);
            let a = tape.value(sj.at(1, 2)).data().to_vec();
            let b = tape.value(sj.at(2, 2)).data().to_vec();
            let sum: f64 = a.iter().map(|v| v.exp()).sum();
            assert!((sum - 1.0).abs() < 1e-12, "{}: sum {sum}", variant.name());
            let diff: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum();
            assert!(diff > 1e-9, "{}: positions indistinguishable", variant.name());
        }
    }

    #[test]
    fn both_variant_depends_on_source_time() {
        let (pair, sc, tc) = tiny_pair();
        let model = NeuralJump::new(JumpVariant::Both, small_dims(), sc.size(), tc.size(), 7);
        let mut tape = Tape::new();
        let vars = model.params.stage(&mut tape);
        let sj = sentence_jump_vars(&mut tape, &vars, &model, &pair);
        let a = tape.value(sj.at(1, 1)).data().to_vec();
        let b = tape.value(sj.at(1, 2)).data().to_vec();
        let diff: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum();
        assert!(diff > 1e-9, "source conditioning has no effect");
    }
}
