//! EM training with gradient M-steps: per batch, posteriors are computed
//! with frozen parameters, one Adam step improves the EM auxiliary, and jump
//! counts are folded into the table every refresh period. Discrete models run
//! exact full-corpus EM instead.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::checkpoint::{Family, JumpComp, Model, TranslationComp};
use crate::corpus::{
    batch_vocab, encode_pairs, filter_pairs, make_batches, CharVocab, GoldMap, RawPair,
    SentencePair, Vocabulary,
};
use crate::discrete::{hmm_em_step, ibm1_em_step, TranslationTable};
use crate::error::{AlignError, Result};
use crate::eval::aer;
use crate::inference::{forward_backward, ibm1_posteriors, Posteriors};
use crate::jump::{
    bucket_index, bucket_mask, collect_jump_counts, jump_m_step, jump_m_step_monotone,
    JumpCounts, JumpTable, SentenceTransitions, StateSpace,
};
use crate::neural::{
    encode_source_support, sentence_jump_vars, sentence_transitions, translation_logprob_rows,
    JumpDims, JumpVariant, NetDims, NeuralJump, NeuralTranslation, ScoreMode, SentenceJumpVars,
    Support, TransContext, TransVariant, VocabSizes,
};
use crate::tensor::{Tape, Tensor, VarId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TranslationChoice {
    Discrete,
    Neural(TransVariant),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JumpChoice {
    Count,
    Neural(JumpVariant),
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub family: Family,
    pub translation: TranslationChoice,
    pub jump: JumpChoice,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Batches between jump-table refreshes; 0 means once per epoch.
    pub jump_refresh: usize,
    pub seed: u64,
    pub max_len: usize,
    pub vocab_cap: usize,
    pub batch_vocab: usize,
    pub char_cap: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub window_half: usize,
    pub char_embed_dim: usize,
    pub char_hidden: usize,
    pub jump_word_units: usize,
    pub jump_sent_units: usize,
    pub mlp_hidden: usize,
    pub k_max: usize,
    pub p0_init: f64,
    pub dropout: f64,
    pub shuffle: bool,
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            family: Family::Ibm1,
            translation: TranslationChoice::Neural(TransVariant::Nn),
            jump: JumpChoice::Count,
            epochs: 10,
            batch_size: 100,
            learning_rate: 0.001,
            jump_refresh: 0,
            seed: 1,
            max_len: 50,
            vocab_cap: 50_000,
            batch_vocab: 5_000,
            char_cap: 30,
            embed_dim: 64,
            hidden_dim: 64,
            window_half: 1,
            char_embed_dim: 64,
            char_hidden: 64,
            jump_word_units: 32,
            jump_sent_units: 32,
            mlp_hidden: 80,
            k_max: 5,
            p0_init: 0.2,
            dropout: 0.1,
            shuffle: false,
            threads: 1,
        }
    }
}

impl TrainConfig {
    /// Parse the flat `key = value` format; `#` starts a comment, unknown
    /// keys are fatal.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        for (lineno, raw_line) in text.lines().enumerate() {
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                AlignError::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |what: &str| AlignError::Config(format!("line {}: bad {what}", lineno + 1));
            match key {
                "model" => {
                    cfg.family = Family::parse(value).ok_or_else(|| bad("model"))?;
                }
                "translation" => {
                    cfg.translation = if value == "discrete" {
                        TranslationChoice::Discrete
                    } else {
                        TranslationChoice::Neural(
                            TransVariant::parse(value).ok_or_else(|| bad("translation"))?,
                        )
                    };
                }
                "jump" => {
                    cfg.jump = if value == "count" {
                        JumpChoice::Count
                    } else {
                        JumpChoice::Neural(JumpVariant::parse(value).ok_or_else(|| bad("jump"))?)
                    };
                }
                "epochs" => cfg.epochs = value.parse().map_err(|_| bad("epochs"))?,
                "batch_size" => cfg.batch_size = value.parse().map_err(|_| bad("batch_size"))?,
                "learning_rate" => {
                    cfg.learning_rate = value.parse().map_err(|_| bad("learning_rate"))?
                }
                "jump_refresh" => {
                    cfg.jump_refresh = value.parse().map_err(|_| bad("jump_refresh"))?
                }
                "seed" => cfg.seed = value.parse().map_err(|_| bad("seed"))?,
                "max_len" => cfg.max_len = value.parse().map_err(|_| bad("max_len"))?,
                "vocab_cap" => cfg.vocab_cap = value.parse().map_err(|_| bad("vocab_cap"))?,
                "batch_vocab" => cfg.batch_vocab = value.parse().map_err(|_| bad("batch_vocab"))?,
                "char_cap" => cfg.char_cap = value.parse().map_err(|_| bad("char_cap"))?,
                "embed_dim" => cfg.embed_dim = value.parse().map_err(|_| bad("embed_dim"))?,
                "hidden_dim" => cfg.hidden_dim = value.parse().map_err(|_| bad("hidden_dim"))?,
                "window_half" => cfg.window_half = value.parse().map_err(|_| bad("window_half"))?,
                "char_embed_dim" => {
                    cfg.char_embed_dim = value.parse().map_err(|_| bad("char_embed_dim"))?
                }
                "char_hidden" => cfg.char_hidden = value.parse().map_err(|_| bad("char_hidden"))?,
                "jump_word_units" => {
                    cfg.jump_word_units = value.parse().map_err(|_| bad("jump_word_units"))?
                }
                "jump_sent_units" => {
                    cfg.jump_sent_units = value.parse().map_err(|_| bad("jump_sent_units"))?
                }
                "mlp_hidden" => cfg.mlp_hidden = value.parse().map_err(|_| bad("mlp_hidden"))?,
                "k_max" => cfg.k_max = value.parse().map_err(|_| bad("k_max"))?,
                "p0_init" => cfg.p0_init = value.parse().map_err(|_| bad("p0_init"))?,
                "dropout" => cfg.dropout = value.parse().map_err(|_| bad("dropout"))?,
                "shuffle" => {
                    cfg.shuffle = match value {
                        "true" => true,
                        "false" => false,
                        _ => return Err(bad("shuffle")),
                    }
                }
                "threads" => cfg.threads = value.parse().map_err(|_| bad("threads"))?,
                other => {
                    return Err(AlignError::Config(format!(
                        "line {}: unknown key {other:?}",
                        lineno + 1
                    )))
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| AlignError::io(path, e))?;
        TrainConfig::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let err = |msg: &str| Err(AlignError::Config(msg.into()));
        if self.epochs < 1 {
            return err("epochs must be >= 1");
        }
        if self.batch_size < 1 {
            return err("batch_size must be >= 1");
        }
        if self.k_max < 1 {
            return err("k_max must be >= 1");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return err("dropout must lie in [0, 1)");
        }
        if !(0.0..1.0).contains(&self.p0_init) || self.p0_init == 0.0 {
            return err("p0_init must lie strictly inside (0, 1)");
        }
        if self.threads < 1 {
            return err("threads must be >= 1");
        }
        if self.family == Family::Ibm1 && self.jump != JumpChoice::Count {
            return err("IBM-1 has no transition structure; jump must be `count`");
        }
        if self.translation == TranslationChoice::Discrete && self.jump != JumpChoice::Count {
            return err("discrete translation pairs with the count-based jump model only");
        }
        if matches!(self.translation, TranslationChoice::Neural(TransVariant::CharBoth))
            && self.hidden_dim % 2 != 0
        {
            return err("nncharboth needs an even hidden_dim");
        }
        Ok(())
    }

    pub fn net_dims(&self) -> NetDims {
        NetDims {
            embed: self.embed_dim,
            hidden: self.hidden_dim,
            window_half: self.window_half,
            char_embed: self.char_embed_dim,
            char_hidden: self.char_hidden,
            dropout: self.dropout,
        }
    }

    pub fn jump_dims(&self) -> JumpDims {
        JumpDims {
            char_embed: self.char_embed_dim,
            word_units: self.jump_word_units,
            sent_units: self.jump_sent_units,
            mlp_hidden: self.mlp_hidden,
            k: self.k_max,
        }
    }
}

/// One line of the training log.
#[derive(Debug, Clone)]
pub struct EpochLog {
    pub epoch: usize,
    pub loglik: f64,
    pub dev_aer: Option<f64>,
    /// Sentences skipped because they had no probability mass under the
    /// batch-restricted support.
    pub skipped: usize,
}

impl EpochLog {
    pub fn to_line(&self) -> String {
        match self.dev_aer {
            Some(a) => format!("{}\t{:.6}\t{:.4}", self.epoch, self.loglik, a),
            None => format!("{}\t{:.6}", self.epoch, self.loglik),
        }
    }
}

fn batch_seed(seed: u64, epoch: usize, batch: usize) -> u64 {
    let mut x = seed
        ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (batch as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x ^= x >> 30;
    x = x.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// The per-sentence translation term of the EM auxiliary: posterior-weighted
/// log-probabilities, with null-copy mass folded onto the NULL row. Returns
/// one scalar var per state row that carries weight.
pub fn translation_auxiliary(
    tape: &mut Tape,
    rows: &[VarId],
    support_len: usize,
    gamma: &[Vec<f64>],
    src_support_idx: &[usize],
    space: &StateSpace,
) -> Vec<VarId> {
    let mut weights = vec![vec![0.0; support_len]; space.target_len + 1];
    for (j, row) in gamma.iter().enumerate() {
        let idx = src_support_idx[j];
        for (s, &g) in row.iter().enumerate() {
            if g != 0.0 {
                weights[space.translation_row(s)][idx] += g;
            }
        }
    }
    let mut parts = Vec::new();
    for (r, w) in weights.into_iter().enumerate() {
        if w.iter().any(|&x| x != 0.0) {
            for (i, &wi) in w.iter().enumerate() {
                if wi != 0.0 {
                    assert!(
                        tape.value(rows[r]).data()[i].is_finite(),
                        "auxiliary weights an impossible (-inf) translation term"
                    );
                }
            }
            parts.push(tape.weighted_sum(rows[r], &Tensor::vector(w)));
        }
    }
    parts
}

/// The per-sentence jump term of the EM auxiliary for neural jump models:
/// posterior-weighted bucket log-probabilities minus the on-tape row
/// normalizers, plus a constant carrying the `p0` and overflow-share terms.
pub fn jump_auxiliary(
    tape: &mut Tape,
    sj: &SentenceJumpVars,
    post: &Posteriors,
    space: &StateSpace,
    k: usize,
    p0: f64,
) -> (Vec<VarId>, f64) {
    let i_len = space.target_len;
    let ln_p0 = p0.ln();
    let ln_real = (1.0 - p0).ln();
    let n_buckets = crate::jump::bucket_count(k);
    let mut bucket_w: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    let mut real_n: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut constant = 0.0;

    let mut add_real = |from_pos: usize, time_j: usize, to_pos: usize, w: f64, constant: &mut f64| {
        let key = match sj.variant {
            JumpVariant::Tgt => (from_pos, 1),
            JumpVariant::Both => (from_pos, time_j),
        };
        let delta = to_pos as i64 - from_pos as i64;
        let ki = k as i64;
        if delta < -ki {
            let n_low = (from_pos as i64 - 1 - ki).max(0);
            *constant -= w * (n_low as f64).ln();
        } else if delta > ki {
            let base = if from_pos == 0 { i_len as i64 - ki } else { i_len as i64 - from_pos as i64 - ki };
            *constant -= w * (base.max(0) as f64).ln();
        }
        bucket_w
            .entry(key)
            .or_insert_with(|| vec![0.0; n_buckets])[bucket_index(k, delta)] += w;
        *real_n.entry(key).or_insert(0.0) += w;
        *constant += w * ln_real;
    };

    for (s, &g) in post.gamma[0].iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        if space.is_null(s) {
            constant += g * ln_p0;
        } else {
            add_real(0, 1, space.position(s), g, &mut constant);
        }
    }
    for (t, mat) in post.xi.as_deref().unwrap_or(&[]).iter().enumerate() {
        for (s, row) in mat.iter().enumerate() {
            let from_pos = space.position(s);
            for (s2, &x) in row.iter().enumerate() {
                if x == 0.0 {
                    continue;
                }
                if space.is_null(s2) {
                    constant += x * ln_p0;
                } else {
                    add_real(from_pos, t + 2, space.position(s2), x, &mut constant);
                }
            }
        }
    }

    let mut parts = Vec::new();
    for (key, w) in bucket_w {
        let logb = sj.at(key.0, key.1);
        parts.push(tape.weighted_sum(logb, &Tensor::vector(w)));
        let n = real_n[&key];
        if n > 0.0 {
            let mask: Vec<f64> = bucket_mask(i_len, k, key.0)
                .into_iter()
                .map(|m| if m { 1.0 } else { 0.0 })
                .collect();
            let bexp = tape.exp(logb);
            let z = tape.weighted_sum(bexp, &Tensor::vector(mask));
            let lnz = tape.ln(z);
            parts.push(tape.scale(lnz, -n));
        }
    }
    (parts, constant)
}

struct NeuralParts {
    translation: NeuralTranslation,
    jump_table: Option<JumpTable>,
    neural_jump: Option<NeuralJump>,
}

/// Outcome of one batch: the summed sentence log-likelihoods (on the batch
/// support), skipped-sentence count, and expected jump counts.
struct BatchOutcome {
    loglik: f64,
    skipped: usize,
}

fn neural_batch_step(
    parts: &mut NeuralParts,
    src_vocab: &Vocabulary,
    src_chars: &CharVocab,
    char_cap: usize,
    family: Family,
    pairs: &[SentencePair],
    batch_indices: &[usize],
    support: &Support,
    lr: f64,
    rng: &mut ChaCha8Rng,
    pending: &mut JumpCounts,
) -> Result<BatchOutcome> {
    let mut tape = Tape::new();
    let tvars = parts.translation.params.stage(&mut tape);
    let jvars = parts
        .neural_jump
        .as_ref()
        .map(|nj| nj.params.stage(&mut tape));

    let ctx = TransContext {
        model: &parts.translation,
        vars: &tvars,
        src_vocab,
        src_chars,
        char_cap,
    };
    let out_matrix = (parts.translation.variant == TransVariant::CharBoth)
        .then(|| encode_source_support(&mut tape, &ctx, support));

    let mut q_parts: Vec<VarId> = Vec::new();
    let mut loglik = 0.0;
    let mut skipped = 0usize;

    for &idx in batch_indices {
        let pair = &pairs[idx];
        let space = StateSpace::new(pair.target_len());
        let rows = translation_logprob_rows(
            &mut tape,
            &ctx,
            pair,
            support,
            out_matrix,
            &mut ScoreMode::Train(rng),
        );
        let sup_idx: Vec<usize> = pair
            .src_ids
            .iter()
            .zip(&pair.src_surf)
            .map(|(&f, surf)| {
                support
                    .index_of(f, surf)
                    .expect("batch vocabulary contains every batch source id")
            })
            .collect();
        let emissions: Vec<Vec<f64>> = (0..pair.source_len())
            .map(|j| {
                (0..space.num_states())
                    .map(|s| tape.value(rows[space.translation_row(s)]).data()[sup_idx[j]].exp())
                    .collect()
            })
            .collect();

        let (post, sj) = match family {
            Family::Ibm1 => match ibm1_posteriors(&emissions) {
                Ok(p) => (p, None),
                Err(_) => {
                    skipped += 1;
                    continue;
                }
            },
            Family::Hmm => {
                let table = parts.jump_table.as_ref().expect("HMM jump table");
                let (trans, sj) = match &parts.neural_jump {
                    None => (SentenceTransitions::from_table(pair.target_len(), table), None),
                    Some(nj) => {
                        let jvars = jvars.as_ref().unwrap();
                        let sj = sentence_jump_vars(&mut tape, jvars, nj, pair);
                        let trans = sentence_transitions(&tape, &sj, nj.dims.k, table.p0);
                        (trans, Some(sj))
                    }
                };
                match forward_backward(&emissions, &trans.view(), &trans.initial) {
                    Ok(p) => (p, sj),
                    Err(_) => {
                        skipped += 1;
                        continue;
                    }
                }
            }
        };
        loglik += post.loglik;

        q_parts.extend(translation_auxiliary(
            &mut tape,
            &rows,
            support.len(),
            &post.gamma,
            &sup_idx,
            &space,
        ));
        if let Some(sj) = &sj {
            let table = parts.jump_table.as_ref().unwrap();
            let k = parts.neural_jump.as_ref().unwrap().dims.k;
            let (jq, _constant) = jump_auxiliary(&mut tape, sj, &post, &space, k, table.p0);
            q_parts.extend(jq);
        }
        if family == Family::Hmm {
            collect_jump_counts(&space, &post, pending);
        }
    }

    if !q_parts.is_empty() {
        let q = tape.sum_scalars(&q_parts);
        let loss = tape.scale(q, -1.0);
        let mut grads = tape.backward(loss);
        let tg = parts.translation.params.collect_grads(&tvars, &mut grads);
        parts.translation.params.adam_step(&tg, lr);
        if let (Some(nj), Some(jvars)) = (parts.neural_jump.as_mut(), jvars.as_ref()) {
            let jg = nj.params.collect_grads(jvars, &mut grads);
            nj.params.adam_step(&jg, lr);
        }
    }

    Ok(BatchOutcome { loglik, skipped })
}

/// Train a model. `dev` supplies an unfiltered development corpus and its
/// gold alignments for per-epoch AER; `init` provides translation parameters
/// (the IBM-1 to HMM handover). Vocabularies come from `init` when present so
/// parameter shapes stay compatible, otherwise they are built from the
/// training corpus.
pub fn train(
    config: &TrainConfig,
    train_raw: &[RawPair],
    dev: Option<(&[RawPair], &GoldMap)>,
    init: Option<&Model>,
    mut progress: impl FnMut(&EpochLog),
) -> Result<(Model, Vec<EpochLog>)> {
    config.validate()?;
    let filtered = filter_pairs(train_raw, config.max_len);
    if filtered.is_empty() {
        return Err(AlignError::Data("no training pairs after filtering".into()));
    }

    let (src_vocab, tgt_vocab, src_chars, tgt_chars) = match init {
        Some(m) => (
            m.src_vocab.clone(),
            m.tgt_vocab.clone(),
            m.src_chars.clone(),
            m.tgt_chars.clone(),
        ),
        None => {
            let src_sents: Vec<&[String]> = filtered.iter().map(|p| p.src.as_slice()).collect();
            let tgt_sents: Vec<&[String]> = filtered.iter().map(|p| p.tgt.as_slice()).collect();
            (
                Vocabulary::build(src_sents.iter().copied(), config.vocab_cap),
                Vocabulary::build(tgt_sents.iter().copied(), config.vocab_cap),
                CharVocab::build(src_sents.iter().copied()),
                CharVocab::build(tgt_sents.iter().copied()),
            )
        }
    };
    let pairs = encode_pairs(
        &filtered, &src_vocab, &tgt_vocab, &src_chars, &tgt_chars, config.char_cap,
    );
    let dev_data = dev.map(|(raw, gold)| {
        (
            encode_pairs(raw, &src_vocab, &tgt_vocab, &src_chars, &tgt_chars, config.char_cap),
            gold,
        )
    });

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| AlignError::Config(format!("thread pool: {e}")))?;

    // Seed translation parameters, possibly from the init checkpoint.
    let translation = match config.translation {
        TranslationChoice::Discrete => match init.map(|m| &m.translation) {
            Some(TranslationComp::Discrete(t)) => TranslationComp::Discrete(t.clone()),
            Some(TranslationComp::Neural(_)) => {
                return Err(AlignError::Model(
                    "init checkpoint is neural but the config asks for a discrete table".into(),
                ))
            }
            None => TranslationComp::Discrete(TranslationTable::init_uniform_cooc(&pairs)),
        },
        TranslationChoice::Neural(variant) => match init.map(|m| &m.translation) {
            Some(TranslationComp::Neural(nt)) => {
                if nt.variant != variant {
                    return Err(AlignError::Model(format!(
                        "init checkpoint variant {} does not match configured {}",
                        nt.variant.name(),
                        variant.name()
                    )));
                }
                let mut nt = nt.clone();
                nt.params.reset_optimizer();
                TranslationComp::Neural(nt)
            }
            Some(TranslationComp::Discrete(_)) => {
                return Err(AlignError::Model(
                    "init checkpoint is discrete but the config asks for a neural variant".into(),
                ))
            }
            None => TranslationComp::Neural(NeuralTranslation::new(
                variant,
                config.net_dims(),
                VocabSizes {
                    src_words: src_vocab.size(),
                    tgt_words: tgt_vocab.size(),
                    src_chars: src_chars.size(),
                    tgt_chars: tgt_chars.size(),
                },
                config.seed,
            )),
        },
    };
    let jump = (config.family == Family::Hmm).then(|| JumpComp {
        table: JumpTable::uniform(config.k_max, config.p0_init),
        neural: match config.jump {
            JumpChoice::Count => None,
            JumpChoice::Neural(variant) => Some(NeuralJump::new(
                variant,
                config.jump_dims(),
                src_chars.size(),
                tgt_chars.size(),
                config.seed.wrapping_add(1),
            )),
        },
    });

    let mut model = Model {
        family: config.family,
        translation,
        jump,
        src_vocab,
        tgt_vocab,
        src_chars,
        tgt_chars,
        char_cap: config.char_cap,
    };

    let mut logs = Vec::with_capacity(config.epochs);
    match model.translation {
        TranslationComp::Discrete(_) => train_discrete(
            config,
            &pool,
            &pairs,
            &mut model,
            dev_data.as_ref(),
            &mut logs,
            &mut progress,
        )?,
        TranslationComp::Neural(_) => {
            train_neural(config, &pairs, &mut model, dev_data.as_ref(), &mut logs, &mut progress)?
        }
    }
    Ok((model, logs))
}

fn dev_aer(model: &Model, dev: Option<&(Vec<SentencePair>, &GoldMap)>) -> Result<Option<f64>> {
    match dev {
        None => Ok(None),
        Some((pairs, gold)) => {
            let links = model.align_corpus(pairs)?;
            Ok(Some(aer(&links, gold).aer))
        }
    }
}

fn train_discrete(
    config: &TrainConfig,
    pool: &rayon::ThreadPool,
    pairs: &[SentencePair],
    model: &mut Model,
    dev: Option<&(Vec<SentencePair>, &GoldMap)>,
    logs: &mut Vec<EpochLog>,
    progress: &mut impl FnMut(&EpochLog),
) -> Result<()> {
    for epoch in 1..=config.epochs {
        let loglik = match model.family {
            Family::Ibm1 => {
                let TranslationComp::Discrete(table) = &model.translation else {
                    unreachable!()
                };
                let (next, ll) = pool.install(|| ibm1_em_step(pairs, table));
                model.translation = TranslationComp::Discrete(next);
                ll
            }
            Family::Hmm => {
                let TranslationComp::Discrete(table) = &model.translation else {
                    unreachable!()
                };
                let jump = model.jump.as_ref().expect("HMM jump component");
                let (next, counts, ll) = pool.install(|| hmm_em_step(pairs, table, &jump.table))?;
                let new_table = jump_m_step_monotone(&counts, &jump.table);
                model.translation = TranslationComp::Discrete(next);
                model.jump.as_mut().unwrap().table = new_table;
                ll
            }
        };
        let log = EpochLog {
            epoch,
            loglik,
            dev_aer: dev_aer(model, dev)?,
            skipped: 0,
        };
        progress(&log);
        logs.push(log);
    }
    Ok(())
}

fn train_neural(
    config: &TrainConfig,
    pairs: &[SentencePair],
    model: &mut Model,
    dev: Option<&(Vec<SentencePair>, &GoldMap)>,
    logs: &mut Vec<EpochLog>,
    progress: &mut impl FnMut(&EpochLog),
) -> Result<()> {
    let TranslationComp::Neural(translation) = model.translation.clone() else {
        unreachable!()
    };
    let mut parts = NeuralParts {
        translation,
        jump_table: model.jump.as_ref().map(|j| j.table.clone()),
        neural_jump: model.jump.as_ref().and_then(|j| j.neural.clone()),
    };
    let mut pending = JumpCounts::new(config.k_max);
    let mut since_refresh = 0usize;

    for epoch in 1..=config.epochs {
        let shuffle_seed = config
            .shuffle
            .then(|| batch_seed(config.seed, epoch, usize::MAX));
        let batches = make_batches(pairs, config.batch_size, shuffle_seed);
        let refresh = if config.jump_refresh == 0 {
            batches.len()
        } else {
            config.jump_refresh
        };
        let mut epoch_ll = 0.0;
        let mut skipped = 0usize;
        for (bi, batch) in batches.iter().enumerate() {
            let ids = batch_vocab(batch, &model.src_vocab, config.batch_vocab.max(1))?;
            let support = Support::from_ids(ids);
            let mut rng = ChaCha8Rng::seed_from_u64(batch_seed(config.seed, epoch, bi));
            let outcome = neural_batch_step(
                &mut parts,
                &model.src_vocab,
                &model.src_chars,
                model.char_cap,
                model.family,
                pairs,
                &batch.indices,
                &support,
                config.learning_rate,
                &mut rng,
                &mut pending,
            )?;
            epoch_ll += outcome.loglik;
            skipped += outcome.skipped;
            since_refresh += 1;
            if model.family == Family::Hmm && since_refresh >= refresh {
                refresh_jump_table(&mut parts, &mut pending, config.k_max);
                since_refresh = 0;
            }
        }

        // Publish the updated components so dev decoding sees them.
        model.translation = TranslationComp::Neural(parts.translation.clone());
        if let Some(jc) = model.jump.as_mut() {
            jc.table = parts.jump_table.clone().unwrap();
            jc.neural = parts.neural_jump.clone();
        }
        let log = EpochLog {
            epoch,
            loglik: epoch_ll,
            dev_aer: dev_aer(model, dev)?,
            skipped,
        };
        progress(&log);
        logs.push(log);
    }
    if model.family == Family::Hmm && !pending.is_empty() {
        refresh_jump_table(&mut parts, &mut pending, config.k_max);
        model.jump.as_mut().unwrap().table = parts.jump_table.clone().unwrap();
    }
    Ok(())
}

/// Fold accumulated expected counts into the jump table. With a neural jump
/// model only the count-estimated `p0` is refreshed; the bucket multinomial
/// lives in the network.
fn refresh_jump_table(parts: &mut NeuralParts, pending: &mut JumpCounts, k: usize) {
    if pending.is_empty() {
        return;
    }
    let m = jump_m_step(pending);
    let table = parts.jump_table.as_mut().expect("HMM jump table");
    if parts.neural_jump.is_some() {
        table.p0 = m.p0;
    } else {
        *table = m;
    }
    *pending = JumpCounts::new(k);
}
