//! The neural translation variants: for every target-side state (real
//! positions plus NULL), a distribution over source words.
//!
//! All variants share the same trunk: a state representation, one
//! hidden-width htanh feed-forward layer, dropout, an output projection and a
//! softmax over the scoring support. They differ in how the state
//! representation is built and, for the character-based source variant, in
//! how output vectors are obtained.

use std::collections::{BTreeMap, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{CharVocab, SentencePair, Vocabulary, NULL_ID, UNK_ID};
use crate::error::{AlignError, Result};
use crate::tensor::{bilstm_encode, LstmVars, ParameterStore, Tape, VarId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransVariant {
    /// Word embedding only.
    Nn,
    /// Concatenated context window.
    CtxCc,
    /// Convolution over the context window.
    CtxCnn,
    /// Character-based target representations.
    CharTgt,
    /// Concatenated character and word representations.
    CharWord,
    /// Character-based representations on both sides; the output layer scores
    /// arbitrary source strings at test time.
    CharBoth,
}

impl TransVariant {
    pub fn name(&self) -> &'static str {
        match self {
            TransVariant::Nn => "nn",
            TransVariant::CtxCc => "ctxcc",
            TransVariant::CtxCnn => "ctxcnn",
            TransVariant::CharTgt => "nnchartgt",
            TransVariant::CharWord => "nncharword",
            TransVariant::CharBoth => "nncharboth",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "nn" => TransVariant::Nn,
            "ctxcc" => TransVariant::CtxCc,
            "ctxcnn" => TransVariant::CtxCnn,
            "nnchartgt" => TransVariant::CharTgt,
            "nncharword" => TransVariant::CharWord,
            "nncharboth" => TransVariant::CharBoth,
            _ => return None,
        })
    }

    pub fn uses_target_chars(&self) -> bool {
        matches!(
            self,
            TransVariant::CharTgt | TransVariant::CharWord | TransVariant::CharBoth
        )
    }
}

/// Layer widths shared by the translation variants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetDims {
    pub embed: usize,
    pub hidden: usize,
    /// Context half-width `h` for the Ctx variants.
    pub window_half: usize,
    pub char_embed: usize,
    /// Per-direction units of the target character encoder (word
    /// representation width is twice this).
    pub char_hidden: usize,
    pub dropout: f64,
}

impl Default for NetDims {
    fn default() -> Self {
        NetDims {
            embed: 64,
            hidden: 64,
            window_half: 1,
            char_embed: 64,
            char_hidden: 64,
            dropout: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct VocabSizes {
    pub src_words: usize,
    pub tgt_words: usize,
    pub src_chars: usize,
    pub tgt_chars: usize,
}

/// One of the five neural translation architectures with its parameters.
#[derive(Debug, Clone)]
pub struct NeuralTranslation {
    pub variant: TransVariant,
    pub dims: NetDims,
    pub params: ParameterStore,
}

pub(crate) const INIT_SCALE: f64 = 0.1;

pub(crate) fn init_lstm(
    params: &mut ParameterStore,
    prefix: &str,
    d: usize,
    u: usize,
    rng: &mut ChaCha8Rng,
) {
    for dir in ["fwd", "bwd"] {
        params.init_uniform(format!("{prefix}.{dir}.wx"), &[4 * u, d], INIT_SCALE, rng);
        params.init_uniform(format!("{prefix}.{dir}.wh"), &[4 * u, u], INIT_SCALE, rng);
        params.init_uniform(format!("{prefix}.{dir}.b"), &[4 * u], INIT_SCALE, rng);
    }
}

pub(crate) fn stage_lstm(vars: &BTreeMap<String, VarId>, prefix: &str) -> (LstmVars, LstmVars) {
    let fwd = LstmVars {
        wx: vars[&format!("{prefix}.fwd.wx")],
        wh: vars[&format!("{prefix}.fwd.wh")],
        b: vars[&format!("{prefix}.fwd.b")],
    };
    let bwd = LstmVars {
        wx: vars[&format!("{prefix}.bwd.wx")],
        wh: vars[&format!("{prefix}.bwd.wh")],
        b: vars[&format!("{prefix}.bwd.b")],
    };
    (fwd, bwd)
}

impl NeuralTranslation {
    /// Width of the state representation feeding the hidden layer.
    pub fn rep_width(&self) -> usize {
        let d = &self.dims;
        match self.variant {
            TransVariant::Nn => d.embed,
            TransVariant::CtxCc => (2 * d.window_half + 1) * d.embed,
            TransVariant::CtxCnn => d.embed - 2 * d.window_half,
            TransVariant::CharTgt | TransVariant::CharBoth => 2 * d.char_hidden,
            TransVariant::CharWord => 2 * d.char_hidden + d.embed,
        }
    }

    /// Per-direction units of the source character encoder whose outputs act
    /// as output-layer weight rows (CharBoth only); the two directions add up
    /// to the hidden width.
    pub fn src_encoder_units(&self) -> usize {
        assert!(
            self.dims.hidden % 2 == 0,
            "CharBoth needs an even hidden width"
        );
        self.dims.hidden / 2
    }

    pub fn new(variant: TransVariant, dims: NetDims, sizes: VocabSizes, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut model = NeuralTranslation {
            variant,
            dims,
            params: ParameterStore::new(),
        };
        let params = &mut model.params;

        if matches!(
            variant,
            TransVariant::Nn | TransVariant::CtxCc | TransVariant::CtxCnn | TransVariant::CharWord
        ) {
            params.init_uniform("emb.tgt", &[sizes.tgt_words, dims.embed], INIT_SCALE, &mut rng);
        }
        if matches!(variant, TransVariant::CtxCc | TransVariant::CtxCnn) {
            params.init_uniform("emb.pad", &[dims.embed], INIT_SCALE, &mut rng);
        }
        if variant == TransVariant::CtxCnn {
            let w = 2 * dims.window_half + 1;
            params.init_uniform("conv.filter", &[w, w], INIT_SCALE, &mut rng);
        }
        if variant.uses_target_chars() {
            params.init_uniform(
                "char.emb.tgt",
                &[sizes.tgt_chars, dims.char_embed],
                INIT_SCALE,
                &mut rng,
            );
            init_lstm(params, "char.lstm.tgt", dims.char_embed, dims.char_hidden, &mut rng);
        }
        let in_dim = model.rep_width();
        let params = &mut model.params;
        params.init_uniform("ff.w", &[dims.hidden, in_dim], INIT_SCALE, &mut rng);
        params.init_uniform("ff.b", &[dims.hidden], INIT_SCALE, &mut rng);
        if variant == TransVariant::CharBoth {
            let u = model.src_encoder_units();
            let params = &mut model.params;
            params.init_uniform(
                "char.emb.src",
                &[sizes.src_chars, dims.char_embed],
                INIT_SCALE,
                &mut rng,
            );
            init_lstm(params, "char.lstm.src", dims.char_embed, u, &mut rng);
        } else {
            params.init_uniform("out.w", &[sizes.src_words, dims.hidden], INIT_SCALE, &mut rng);
            params.init_uniform("out.b", &[sizes.src_words], INIT_SCALE, &mut rng);
        }
        model
    }
}

/// Scoring support: the set of source words a softmax normalizes over. For
/// CharBoth decoding it can carry extra out-of-vocabulary surface forms that
/// are scored through their characters.
#[derive(Debug, Clone)]
pub struct Support {
    pub ids: Vec<u32>,
    pub extras: Vec<String>,
    ids_usize: Vec<usize>,
    id_pos: HashMap<u32, usize>,
    extra_pos: HashMap<String, usize>,
}

impl Support {
    pub fn from_ids(ids: Vec<u32>) -> Self {
        Support::with_extras(ids, Vec::new())
    }

    pub fn with_extras(ids: Vec<u32>, extras: Vec<String>) -> Self {
        assert!(!ids.is_empty() || !extras.is_empty(), "empty scoring support");
        let ids_usize = ids.iter().map(|&i| i as usize).collect();
        let id_pos = ids.iter().enumerate().map(|(p, &i)| (i, p)).collect();
        let extra_pos = extras
            .iter()
            .enumerate()
            .map(|(p, s)| (s.clone(), ids.len() + p))
            .collect();
        Support {
            ids,
            extras,
            ids_usize,
            id_pos,
            extra_pos,
        }
    }

    /// The full-vocabulary support used at test time: UNK plus every real
    /// word id (NULL is target-side only and never scored).
    pub fn full(src_vocab: &Vocabulary) -> Self {
        let mut ids = vec![UNK_ID];
        ids.extend(src_vocab.ids_by_frequency());
        ids.sort_unstable();
        Support::from_ids(ids)
    }

    pub fn len(&self) -> usize {
        self.ids.len() + self.extras.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Index of a source token, preferring an extra surface entry (CharBoth
    /// open vocabulary) over the word id.
    pub fn index_of(&self, id: u32, surface: &str) -> Option<usize> {
        if let Some(&p) = self.extra_pos.get(surface) {
            return Some(p);
        }
        self.id_pos.get(&id).copied()
    }

    pub fn index_of_id(&self, id: u32) -> Option<usize> {
        self.id_pos.get(&id).copied()
    }
}

/// Whether scoring runs with dropout (training) or as the identity (eval).
pub enum ScoreMode<'r> {
    Eval,
    Train(&'r mut ChaCha8Rng),
}

/// Everything a sentence forward pass needs besides the sentence itself.
pub struct TransContext<'a> {
    pub model: &'a NeuralTranslation,
    pub vars: &'a BTreeMap<String, VarId>,
    pub src_vocab: &'a Vocabulary,
    pub src_chars: &'a CharVocab,
    pub char_cap: usize,
}

/// Character encodings of every support entry, stacked into the output weight
/// matrix for CharBoth scoring. Built once per tape and shared by all
/// sentences scored on it.
pub fn encode_source_support(tape: &mut Tape, ctx: &TransContext, support: &Support) -> VarId {
    let model = ctx.model;
    assert_eq!(model.variant, TransVariant::CharBoth);
    let u = model.src_encoder_units();
    let emb = ctx.vars["char.emb.src"];
    let (fwd, bwd) = stage_lstm(ctx.vars, "char.lstm.src");
    let mut rows = Vec::with_capacity(support.len());
    let encode = |tape: &mut Tape, chars: Vec<u32>| -> VarId {
        let chars = if chars.is_empty() {
            vec![crate::corpus::CHAR_UNK]
        } else {
            chars
        };
        let inputs: Vec<VarId> = chars.iter().map(|&c| tape.row(emb, c as usize)).collect();
        bilstm_encode(tape, fwd, bwd, &inputs, u)
    };
    for &id in &support.ids {
        let chars = ctx
            .src_chars
            .encode_word(ctx.src_vocab.decode(id), ctx.char_cap);
        rows.push(encode(tape, chars));
    }
    for surface in &support.extras {
        let chars = ctx.src_chars.encode_word(surface, ctx.char_cap);
        rows.push(encode(tape, chars));
    }
    tape.stack_rows(&rows)
}

/// A target-side state: a real position (1-based) or the NULL state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateWord {
    Real(usize),
    Null,
}

struct SentenceInputs {
    /// Word embedding per position (variants that use them).
    pos_emb: Vec<VarId>,
    null_emb: Option<VarId>,
    pad_emb: Option<VarId>,
    /// Character encoding per position (char variants).
    pos_char: Vec<VarId>,
    null_char: Option<VarId>,
}

fn build_inputs(tape: &mut Tape, ctx: &TransContext, pair: &SentencePair) -> SentenceInputs {
    let model = ctx.model;
    let uses_words = matches!(
        model.variant,
        TransVariant::Nn | TransVariant::CtxCc | TransVariant::CtxCnn | TransVariant::CharWord
    );
    let mut inputs = SentenceInputs {
        pos_emb: Vec::new(),
        null_emb: None,
        pad_emb: None,
        pos_char: Vec::new(),
        null_char: None,
    };
    if uses_words {
        let emb = ctx.vars["emb.tgt"];
        inputs.pos_emb = pair
            .tgt_ids
            .iter()
            .map(|&e| tape.row(emb, e as usize))
            .collect();
        inputs.null_emb = Some(tape.row(emb, NULL_ID as usize));
    }
    if matches!(model.variant, TransVariant::CtxCc | TransVariant::CtxCnn) {
        inputs.pad_emb = Some(ctx.vars["emb.pad"]);
    }
    if model.variant.uses_target_chars() {
        let emb = ctx.vars["char.emb.tgt"];
        let (fwd, bwd) = stage_lstm(ctx.vars, "char.lstm.tgt");
        let u = model.dims.char_hidden;
        let encode = |tape: &mut Tape, chars: &[u32]| -> VarId {
            let cs: Vec<VarId> = chars.iter().map(|&c| tape.row(emb, c as usize)).collect();
            bilstm_encode(tape, fwd, bwd, &cs, u)
        };
        inputs.pos_char = pair
            .tgt_chars
            .iter()
            .map(|chars| {
                if chars.is_empty() {
                    encode(tape, &[crate::corpus::CHAR_UNK])
                } else {
                    encode(tape, chars)
                }
            })
            .collect();
        inputs.null_char = Some(encode(tape, &[crate::corpus::CHAR_NULL]));
    }
    inputs
}

fn window_rows(inputs: &SentenceInputs, target_len: usize, state: StateWord, h: usize) -> Vec<VarId> {
    let mut rows = Vec::with_capacity(2 * h + 1);
    match state {
        StateWord::Null => {
            // The context of the null word is made of null tokens.
            for _ in 0..2 * h + 1 {
                rows.push(inputs.null_emb.expect("null embedding"));
            }
        }
        StateWord::Real(pos) => {
            let pad = inputs.pad_emb.expect("pad embedding");
            for off in -(h as i64)..=h as i64 {
                let p = pos as i64 + off;
                if p < 1 || p > target_len as i64 {
                    rows.push(pad);
                } else {
                    rows.push(inputs.pos_emb[p as usize - 1]);
                }
            }
        }
    }
    rows
}

fn state_rep(
    tape: &mut Tape,
    ctx: &TransContext,
    inputs: &SentenceInputs,
    pair: &SentencePair,
    state: StateWord,
) -> VarId {
    let model = ctx.model;
    let h = model.dims.window_half;
    match model.variant {
        TransVariant::Nn => match state {
            StateWord::Real(pos) => inputs.pos_emb[pos - 1],
            StateWord::Null => inputs.null_emb.unwrap(),
        },
        TransVariant::CtxCc => {
            let rows = window_rows(inputs, pair.target_len(), state, h);
            tape.concat(&rows)
        }
        TransVariant::CtxCnn => {
            let rows = window_rows(inputs, pair.target_len(), state, h);
            let window = tape.stack_rows(&rows);
            tape.conv_combine(window, ctx.vars["conv.filter"], h)
        }
        TransVariant::CharTgt | TransVariant::CharBoth => match state {
            StateWord::Real(pos) => inputs.pos_char[pos - 1],
            StateWord::Null => inputs.null_char.unwrap(),
        },
        TransVariant::CharWord => {
            let (c, w) = match state {
                StateWord::Real(pos) => (inputs.pos_char[pos - 1], inputs.pos_emb[pos - 1]),
                StateWord::Null => (inputs.null_char.unwrap(), inputs.null_emb.unwrap()),
            };
            tape.concat(&[c, w])
        }
    }
}

fn hidden_of(
    tape: &mut Tape,
    ctx: &TransContext,
    inputs: &SentenceInputs,
    pair: &SentencePair,
    state: StateWord,
    mode: &mut ScoreMode,
) -> VarId {
    let rep = state_rep(tape, ctx, inputs, pair, state);
    let pre = tape.linear(ctx.vars["ff.w"], rep, ctx.vars["ff.b"]);
    let act = tape.htanh(pre);
    match mode {
        ScoreMode::Eval => act,
        ScoreMode::Train(rng) => tape.dropout(act, ctx.model.dims.dropout, true, *rng),
    }
}

/// Representation of one target state after the shared feed-forward trunk
/// (pre-output). Exposed for tests probing single states.
pub fn target_state_rep(
    tape: &mut Tape,
    ctx: &TransContext,
    pair: &SentencePair,
    state: StateWord,
    mode: &mut ScoreMode,
) -> VarId {
    let inputs = build_inputs(tape, ctx, pair);
    hidden_of(tape, ctx, &inputs, pair, state, mode)
}

/// Log-probability rows over `support` for every state of a sentence: rows
/// `0..I` are the real positions `1..=I`, row `I` is the NULL state.
///
/// For CharBoth pass the stacked source encodings from
/// [`encode_source_support`] as `out_matrix`.
pub fn translation_logprob_rows(
    tape: &mut Tape,
    ctx: &TransContext,
    pair: &SentencePair,
    support: &Support,
    out_matrix: Option<VarId>,
    mode: &mut ScoreMode,
) -> Vec<VarId> {
    assert!(!support.is_empty(), "empty scoring support");
    let inputs = build_inputs(tape, ctx, pair);
    let mut rows = Vec::with_capacity(pair.target_len() + 1);
    let states = (1..=pair.target_len())
        .map(StateWord::Real)
        .chain(std::iter::once(StateWord::Null));
    for state in states {
        let hidden = hidden_of(tape, ctx, &inputs, pair, state, mode);
        let scores = match ctx.model.variant {
            TransVariant::CharBoth => {
                let m = out_matrix.expect("CharBoth scoring needs encoded support");
                tape.matvec(m, hidden)
            }
            _ => {
                let w = tape.gather_rows(ctx.vars["out.w"], &support.ids_usize);
                let b = tape.gather(ctx.vars["out.b"], &support.ids_usize);
                let s = tape.matvec(w, hidden);
                tape.add(s, b)
            }
        };
        rows.push(tape.log_softmax(scores, None));
    }
    rows
}

/// Log-probability of the source string `f_surface` given the target string
/// `e_surface` under a CharBoth model, normalized over the full vocabulary
/// plus `f_surface` itself. Both strings may be out of vocabulary.
pub fn open_pair_score(
    model: &NeuralTranslation,
    src_vocab: &Vocabulary,
    src_chars: &CharVocab,
    tgt_chars: &CharVocab,
    char_cap: usize,
    e_surface: &str,
    f_surface: &str,
) -> Result<f64> {
    if model.variant != TransVariant::CharBoth {
        return Err(AlignError::Model(
            "open pair scoring requires the nncharboth variant".into(),
        ));
    }
    if e_surface.is_empty() || f_surface.is_empty() {
        return Err(AlignError::Data("open pair scoring of an empty string".into()));
    }
    let mut tape = Tape::new();
    let vars = model.params.stage(&mut tape);
    let ctx = TransContext {
        model,
        vars: &vars,
        src_vocab,
        src_chars,
        char_cap,
    };
    let mut support = Support::full(src_vocab);
    if !src_vocab.contains(f_surface) {
        support = Support::with_extras(support.ids, vec![f_surface.to_string()]);
    }
    let out = encode_source_support(&mut tape, &ctx, &support);

    // Score the single target state directly through the trunk.
    let emb = vars["char.emb.tgt"];
    let (fwd, bwd) = stage_lstm(&vars, "char.lstm.tgt");
    let chars = tgt_chars.encode_word(e_surface, char_cap);
    let cs: Vec<VarId> = chars.iter().map(|&c| tape.row(emb, c as usize)).collect();
    let rep = bilstm_encode(&mut tape, fwd, bwd, &cs, model.dims.char_hidden);
    let pre = tape.linear(vars["ff.w"], rep, vars["ff.b"]);
    let act = tape.htanh(pre);
    let scores = tape.matvec(out, act);
    let row = tape.log_softmax(scores, None);

    let f_id = src_vocab.encode(f_surface);
    let idx = support
        .index_of(f_id, f_surface)
        .expect("f_surface present in support by construction");
    Ok(tape.value(row).data()[idx])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{encode_pairs, RawPair};

    pub(crate) fn tiny_corpus(
        sentences: &[(&str, &str)],
    ) -> (Vec<SentencePair>, Vocabulary, Vocabulary, CharVocab, CharVocab) {
        let raw: Vec<RawPair> = sentences
            .iter()
            .enumerate()
            .map(|(idx, (s, t))| RawPair {
                src: s.split_whitespace().map(str::to_string).collect(),
                tgt: t.split_whitespace().map(str::to_string).collect(),
                line_index: idx,
            })
            .collect();
        let src_sents: Vec<Vec<String>> = raw.iter().map(|p| p.src.clone()).collect();
        let tgt_sents: Vec<Vec<String>> = raw.iter().map(|p| p.tgt.clone()).collect();
        let src_vocab = Vocabulary::build(src_sents.iter().map(|s| s.as_slice()), 100_000);
        let tgt_vocab = Vocabulary::build(tgt_sents.iter().map(|s| s.as_slice()), 100_000);
        let src_chars = CharVocab::build(src_sents.iter().map(|s| s.as_slice()));
        let tgt_chars = CharVocab::build(tgt_sents.iter().map(|s| s.as_slice()));
        let pairs = encode_pairs(&raw, &src_vocab, &tgt_vocab, &src_chars, &tgt_chars, 30);
        (pairs, src_vocab, tgt_vocab, src_chars, tgt_chars)
    }

    pub(crate) fn sizes(
        src_vocab: &Vocabulary,
        tgt_vocab: &Vocabulary,
        src_chars: &CharVocab,
        tgt_chars: &CharVocab,
    ) -> VocabSizes {
        VocabSizes {
            src_words: src_vocab.size(),
            tgt_words: tgt_vocab.size(),
            src_chars: src_chars.size(),
            tgt_chars: tgt_chars.size(),
        }
    }

    pub(crate) fn small_dims() -> NetDims {
        NetDims {
            embed: 6,
            hidden: 8,
            window_half: 1,
            char_embed: 5,
            char_hidden: 4,
            dropout: 0.1,
        }
    }

    fn rows_for(
        model: &NeuralTranslation,
        pair: &SentencePair,
        src_vocab: &Vocabulary,
        src_chars: &CharVocab,
        support: &Support,
    ) -> Vec<Vec<f64>> {
        let mut tape = Tape::new();
        let vars = model.params.stage(&mut tape);
        let ctx = TransContext {
            model,
            vars: &vars,
            src_vocab,
            src_chars,
            char_cap: 30,
        };
        let out = (model.variant == TransVariant::CharBoth)
            .then(|| encode_source_support(&mut tape, &ctx, support));
        let rows =
            translation_logprob_rows(&mut tape, &ctx, pair, support, out, &mut ScoreMode::Eval);
        rows.iter().map(|&r| tape.value(r).data().to_vec()).collect()
    }

    #[test]
    fn zero_output_weights_give_uniform_rows() {
        let (pairs, sv, tv, sc, tc) = tiny_corpus(&[("a b c", "x y")]);
        let mut model =
            NeuralTranslation::new(TransVariant::Nn, small_dims(), sizes(&sv, &tv, &sc, &tc), 7);
        let out_shape = model.params.get("out.w").shape().to_vec();
        model
            .params
            .insert("out.w", crate::tensor::Tensor::zeros(&out_shape));
        model
            .params
            .insert("out.b", crate::tensor::Tensor::zeros(&[out_shape[0]]));
        let support = Support::full(&sv);
        let rows = rows_for(&model, &pairs[0], &sv, &sc, &support);
        let expect = -(support.len() as f64).ln();
        for row in rows {
            for v in row {
                assert!((v - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn every_variant_normalizes_over_support() {
        let (pairs, sv, tv, sc, tc) = tiny_corpus(&[("a b c d", "x y z"), ("b a", "w x")]);
        for variant in [
            TransVariant::Nn,
            TransVariant::CtxCc,
            TransVariant::CtxCnn,
            TransVariant::CharTgt,
            TransVariant::CharWord,
            TransVariant::CharBoth,
        ] {
            let model =
                NeuralTranslation::new(variant, small_dims(), sizes(&sv, &tv, &sc, &tc), 11);
            let support = Support::full(&sv);
            for pair in &pairs {
                let rows = rows_for(&model, pair, &sv, &sc, &support);
                assert_eq!(rows.len(), pair.target_len() + 1);
                for row in rows {
                    let total: f64 = row.iter().map(|v| v.exp()).sum();
                    assert!(
                        (total - 1.0).abs() < 1e-12,
                        "{}: row sums to {total}",
                        variant.name()
                    );
                }
            }
        }
    }

    #[test]
    fn ctxcc_edge_state_differs_from_interior() {
        // With h = 1 the left slot of position 1 holds the boundary
        // embedding, so its representation must differ from an interior
        // occurrence of the same word.
        let (pairs, sv, tv, sc, tc) = tiny_corpus(&[("a a a", "x x x")]);
        let model = NeuralTranslation::new(
            TransVariant::CtxCc,
            small_dims(),
            sizes(&sv, &tv, &sc, &tc),
            13,
        );
        let support = Support::full(&sv);
        let rows = rows_for(&model, &pairs[0], &sv, &sc, &support);
        let diff: f64 = rows[0]
            .iter()
            .zip(&rows[1])
            .map(|(a, b)| (a - b).abs())
            .sum();
        assert!(diff > 1e-9, "edge and interior states coincide");
    }

    #[test]
    fn char_variant_distinguishes_unk_surfaces() {
        // Two distinct target surfaces that both encode to the UNK word id:
        // character-level states must still differ.
        let (_, sv, tv, sc, tc) = tiny_corpus(&[("a", "xyz")]);
        let raw = vec![RawPair {
            src: vec!["a".into()],
            tgt: vec!["zzz".into(), "zyx".into()],
            line_index: 0,
        }];
        let pair = encode_pairs(&raw, &sv, &tv, &sc, &tc, 30).remove(0);
        assert_eq!(pair.tgt_ids[0], pair.tgt_ids[1], "both should be UNK");
        let model = NeuralTranslation::new(
            TransVariant::CharTgt,
            small_dims(),
            sizes(&sv, &tv, &sc, &tc),
            17,
        );
        let support = Support::full(&sv);
        let rows = rows_for(&model, &pair, &sv, &sc, &support);
        let diff: f64 = rows[0]
            .iter()
            .zip(&rows[1])
            .map(|(a, b)| (a - b).abs())
            .sum();
        assert!(diff > 1e-9, "char variant collapsed distinct surfaces");
    }

    #[test]
    fn word_variants_ignore_surface_forms() {
        let (_, sv, tv, sc, tc) = tiny_corpus(&[("a", "xyz")]);
        let raw = vec![RawPair {
            src: vec!["a".into()],
            tgt: vec!["zzz".into(), "zyx".into()],
            line_index: 0,
        }];
        let pair = encode_pairs(&raw, &sv, &tv, &sc, &tc, 30).remove(0);
        let model =
            NeuralTranslation::new(TransVariant::Nn, small_dims(), sizes(&sv, &tv, &sc, &tc), 19);
        let support = Support::full(&sv);
        let rows = rows_for(&model, &pair, &sv, &sc, &support);
        for (a, b) in rows[0].iter().zip(&rows[1]) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn charboth_scores_unseen_words_and_matches_logprob_rows() {
        let (pairs, sv, tv, sc, tc) = tiny_corpus(&[("ab ba", "xy yx")]);
        let model = NeuralTranslation::new(
            TransVariant::CharBoth,
            small_dims(),
            sizes(&sv, &tv, &sc, &tc),
            23,
        );
        let support = Support::full(&sv);
        let rows = rows_for(&model, &pairs[0], &sv, &sc, &support);
        let f = &pairs[0].src_surf[0];
        let e = &pairs[0].tgt_surf[0];
        let open = open_pair_score(&model, &sv, &sc, &tc, 30, e, f).unwrap();
        let idx = support.index_of(sv.encode(f), f).unwrap();
        assert!(
            (open - rows[0][idx]).abs() < 1e-9,
            "open {open} vs row {}",
            rows[0][idx]
        );

        // Unseen source words get finite scores.
        let s1 = open_pair_score(&model, &sv, &sc, &tc, 30, e, "qqq").unwrap();
        let s2 = open_pair_score(&model, &sv, &sc, &tc, 30, e, "qq").unwrap();
        assert!(s1.is_finite() && s2.is_finite());
        let z = s1.exp() + s2.exp();
        assert!((s1.exp() / z + s2.exp() / z - 1.0).abs() < 1e-12);

        assert!(open_pair_score(&model, &sv, &sc, &tc, 30, "", "x").is_err());
    }

    #[test]
    fn charboth_invariant_to_vocabulary_permutation() {
        // Scores are character-based, so they depend on the support as a set
        // of surfaces, not on id order.
        let (pairs, sv, tv, sc, tc) = tiny_corpus(&[("ab ba cc", "xy yx zz")]);
        let model = NeuralTranslation::new(
            TransVariant::CharBoth,
            small_dims(),
            sizes(&sv, &tv, &sc, &tc),
            29,
        );
        let mut ids: Vec<u32> = Support::full(&sv).ids;
        let support_a = Support::from_ids(ids.clone());
        ids.reverse();
        let support_b = Support::from_ids(ids);
        let rows_a = rows_for(&model, &pairs[0], &sv, &sc, &support_a);
        let rows_b = rows_for(&model, &pairs[0], &sv, &sc, &support_b);
        let f = &pairs[0].src_surf[1];
        let fa = support_a.index_of(sv.encode(f), f).unwrap();
        let fb = support_b.index_of(sv.encode(f), f).unwrap();
        assert!((rows_a[0][fa] - rows_b[0][fb]).abs() < 1e-12);
    }
}
