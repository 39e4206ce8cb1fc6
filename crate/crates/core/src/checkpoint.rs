//! The trained model bundle: vocabularies, translation component, jump
//! component, and directory-based checkpoints with a binary tensor file plus
//! a plain-text manifest. Reload is bit-exact.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read as _, Write as _};
use std::path::Path;

use crate::corpus::{CharVocab, SentencePair, Vocabulary, UNK_ID};
use crate::decoder::{argmax_decode, viterbi, LinkSet};
use crate::discrete::{table_emissions, TranslationTable};
use crate::error::{AlignError, Result};
use crate::jump::{JumpTable, SentenceTransitions, StateSpace};
use crate::neural::{
    encode_source_support, sentence_jump_vars, sentence_transitions, translation_logprob_rows,
    JumpDims, JumpVariant, NetDims, NeuralJump, NeuralTranslation, ScoreMode, Support,
    TransContext, TransVariant,
};
use crate::tensor::{ParameterStore, Tape, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Ibm1,
    Hmm,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Ibm1 => "ibm1",
            Family::Hmm => "hmm",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ibm1" => Some(Family::Ibm1),
            "hmm" => Some(Family::Hmm),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub enum TranslationComp {
    Discrete(TranslationTable),
    Neural(NeuralTranslation),
}

#[derive(Debug, Clone)]
pub struct JumpComp {
    pub table: JumpTable,
    pub neural: Option<NeuralJump>,
}

/// A complete alignment model, self-contained for decoding.
#[derive(Debug, Clone)]
pub struct Model {
    pub family: Family,
    pub translation: TranslationComp,
    /// Present exactly for HMM models.
    pub jump: Option<JumpComp>,
    pub src_vocab: Vocabulary,
    pub tgt_vocab: Vocabulary,
    pub src_chars: CharVocab,
    pub tgt_chars: CharVocab,
    pub char_cap: usize,
}

impl Model {
    /// Emission probabilities `[J][2I]` for one sentence at full-vocabulary
    /// support.
    fn emissions(&self, pair: &SentencePair) -> Vec<Vec<f64>> {
        match &self.translation {
            TranslationComp::Discrete(table) => table_emissions(pair, table),
            TranslationComp::Neural(model) => {
                let mut tape = Tape::new();
                let vars = model.params.stage(&mut tape);
                let ctx = TransContext {
                    model,
                    vars: &vars,
                    src_vocab: &self.src_vocab,
                    src_chars: &self.src_chars,
                    char_cap: self.char_cap,
                };
                let support = self.decode_support(pair);
                let out = (model.variant == TransVariant::CharBoth)
                    .then(|| encode_source_support(&mut tape, &ctx, &support));
                let rows = translation_logprob_rows(
                    &mut tape,
                    &ctx,
                    pair,
                    &support,
                    out,
                    &mut ScoreMode::Eval,
                );
                let space = StateSpace::new(pair.target_len());
                let values: Vec<&Tensor> = rows.iter().map(|&r| tape.value(r)).collect();
                pair.src_ids
                    .iter()
                    .enumerate()
                    .map(|(j, &f)| {
                        let idx = support
                            .index_of(f, &pair.src_surf[j])
                            .expect("token present in decode support");
                        (0..space.num_states())
                            .map(|s| values[space.translation_row(s)].data()[idx].exp())
                            .collect()
                    })
                    .collect()
            }
        }
    }

    /// Full-vocabulary support; CharBoth models additionally score the
    /// sentence's out-of-vocabulary source surfaces through their characters.
    fn decode_support(&self, pair: &SentencePair) -> Support {
        let base = Support::full(&self.src_vocab);
        if let TranslationComp::Neural(m) = &self.translation {
            if m.variant == TransVariant::CharBoth {
                let mut extras: Vec<String> = Vec::new();
                for (j, &id) in pair.src_ids.iter().enumerate() {
                    if id == UNK_ID && !extras.contains(&pair.src_surf[j]) {
                        extras.push(pair.src_surf[j].clone());
                    }
                }
                if !extras.is_empty() {
                    return Support::with_extras(base.ids, extras);
                }
            }
        }
        base
    }

    fn transitions(&self, pair: &SentencePair) -> Result<SentenceTransitions> {
        let jump = self
            .jump
            .as_ref()
            .ok_or_else(|| AlignError::Model("HMM decoding without a jump component".into()))?;
        match &jump.neural {
            None => Ok(SentenceTransitions::from_table(pair.target_len(), &jump.table)),
            Some(nj) => {
                let mut tape = Tape::new();
                let vars = nj.params.stage(&mut tape);
                let sj = sentence_jump_vars(&mut tape, &vars, nj, pair);
                Ok(sentence_transitions(&tape, &sj, nj.dims.k, jump.table.p0))
            }
        }
    }

    /// Asymmetric decode of one sentence; empty sides yield an empty set.
    pub fn align_pair(&self, pair: &SentencePair) -> Result<LinkSet> {
        if pair.source_len() == 0 || pair.target_len() == 0 {
            return Ok(LinkSet::new());
        }
        let emissions = self.emissions(pair);
        match self.family {
            Family::Ibm1 => Ok(argmax_decode(&emissions, pair.target_len())),
            Family::Hmm => {
                let trans = self.transitions(pair)?;
                viterbi(&emissions, &trans.view(), &trans.initial, pair.target_len())
            }
        }
    }

    pub fn align_corpus(&self, pairs: &[SentencePair]) -> Result<Vec<LinkSet>> {
        pairs.iter().map(|p| self.align_pair(p)).collect()
    }

    /// Encode raw test pairs with the model vocabularies (no filtering).
    pub fn encode_test(&self, raw: &[crate::corpus::RawPair]) -> Vec<SentencePair> {
        crate::corpus::encode_pairs(
            raw,
            &self.src_vocab,
            &self.tgt_vocab,
            &self.src_chars,
            &self.tgt_chars,
            self.char_cap,
        )
    }
}

const MANIFEST: &str = "manifest.txt";
const PARAMS_BIN: &str = "params.bin";

fn write_tensors(out: &mut Vec<u8>, manifest: &mut String, prefix: &str, store: &ParameterStore) {
    use std::fmt::Write as _;
    for (name, tensor) in store.iter() {
        let offset = out.len();
        for v in tensor.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let shape: Vec<String> = tensor.shape().iter().map(|d| d.to_string()).collect();
        writeln!(
            manifest,
            "tensor\t{prefix}:{name}\t{}\t{offset}\t{}",
            shape.join(","),
            tensor.len()
        )
        .unwrap();
    }
}

impl Model {
    /// Write the checkpoint directory: `params.bin` (named tensors, row-major
    /// little-endian f64), `manifest.txt`, vocabulary dumps and, where
    /// applicable, the jump table and translation table.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| AlignError::io(dir, e))?;
        let mut manifest = String::new();
        use std::fmt::Write as _;
        writeln!(manifest, "format\t1").unwrap();
        writeln!(manifest, "family\t{}", self.family.name()).unwrap();
        writeln!(manifest, "char_cap\t{}", self.char_cap).unwrap();

        let mut blob = Vec::new();
        match &self.translation {
            TranslationComp::Discrete(table) => {
                writeln!(manifest, "translation\tdiscrete").unwrap();
                table.dump(&dir.join("table.txt"))?;
            }
            TranslationComp::Neural(m) => {
                writeln!(manifest, "translation\t{}", m.variant.name()).unwrap();
                let d = &m.dims;
                writeln!(manifest, "embed_dim\t{}", d.embed).unwrap();
                writeln!(manifest, "hidden_dim\t{}", d.hidden).unwrap();
                writeln!(manifest, "window_half\t{}", d.window_half).unwrap();
                writeln!(manifest, "char_embed_dim\t{}", d.char_embed).unwrap();
                writeln!(manifest, "char_hidden\t{}", d.char_hidden).unwrap();
                writeln!(manifest, "dropout\t{}", d.dropout).unwrap();
                write_tensors(&mut blob, &mut manifest, "trans", &m.params);
            }
        }
        match &self.jump {
            None => writeln!(manifest, "jump\tnone").unwrap(),
            Some(jc) => {
                match &jc.neural {
                    None => writeln!(manifest, "jump\tcount").unwrap(),
                    Some(nj) => {
                        writeln!(manifest, "jump\t{}", nj.variant.name()).unwrap();
                        let d = &nj.dims;
                        writeln!(manifest, "jump_char_embed\t{}", d.char_embed).unwrap();
                        writeln!(manifest, "jump_word_units\t{}", d.word_units).unwrap();
                        writeln!(manifest, "jump_sent_units\t{}", d.sent_units).unwrap();
                        writeln!(manifest, "jump_mlp_hidden\t{}", d.mlp_hidden).unwrap();
                        write_tensors(&mut blob, &mut manifest, "jump", &nj.params);
                    }
                }
                jc.table.dump(&dir.join("jump.txt"))?;
            }
        }

        let bin_path = dir.join(PARAMS_BIN);
        let mut f = fs::File::create(&bin_path).map_err(|e| AlignError::io(&bin_path, e))?;
        f.write_all(&blob).map_err(|e| AlignError::io(&bin_path, e))?;

        self.src_vocab.dump(&dir.join("vocab.src.txt"))?;
        self.tgt_vocab.dump(&dir.join("vocab.tgt.txt"))?;
        self.src_chars.dump(&dir.join("chars.src.txt"))?;
        self.tgt_chars.dump(&dir.join("chars.tgt.txt"))?;

        let man_path = dir.join(MANIFEST);
        fs::write(&man_path, manifest).map_err(|e| AlignError::io(&man_path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let man_path = dir.join(MANIFEST);
        let manifest = fs::read_to_string(&man_path).map_err(|e| AlignError::io(&man_path, e))?;
        let mut scalars: BTreeMap<String, String> = BTreeMap::new();
        let mut tensors: Vec<(String, Vec<usize>, usize, usize)> = Vec::new();
        for (lineno, line) in manifest.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split('\t').collect();
            if parts[0] == "tensor" {
                if parts.len() != 5 {
                    return Err(AlignError::parse(&man_path, lineno + 1, "bad tensor line"));
                }
                let shape: Vec<usize> = if parts[2].is_empty() {
                    Vec::new()
                } else {
                    parts[2]
                        .split(',')
                        .map(|d| d.parse())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| AlignError::parse(&man_path, lineno + 1, "bad shape"))?
                };
                let offset: usize = parts[3]
                    .parse()
                    .map_err(|_| AlignError::parse(&man_path, lineno + 1, "bad offset"))?;
                let count: usize = parts[4]
                    .parse()
                    .map_err(|_| AlignError::parse(&man_path, lineno + 1, "bad count"))?;
                tensors.push((parts[1].to_string(), shape, offset, count));
            } else if parts.len() == 2 {
                scalars.insert(parts[0].to_string(), parts[1].to_string());
            } else {
                return Err(AlignError::parse(&man_path, lineno + 1, "bad manifest line"));
            }
        }

        let get = |key: &str| -> Result<&String> {
            scalars
                .get(key)
                .ok_or_else(|| AlignError::Model(format!("manifest misses key {key:?}")))
        };
        let parse_usize = |key: &str| -> Result<usize> {
            get(key)?
                .parse()
                .map_err(|_| AlignError::Model(format!("bad value for {key:?}")))
        };

        let bin_path = dir.join(PARAMS_BIN);
        let mut blob = Vec::new();
        fs::File::open(&bin_path)
            .map_err(|e| AlignError::io(&bin_path, e))?
            .read_to_end(&mut blob)
            .map_err(|e| AlignError::io(&bin_path, e))?;
        let mut trans_params = ParameterStore::new();
        let mut jump_params = ParameterStore::new();
        for (qualified, shape, offset, count) in tensors {
            let end = offset + count * 8;
            if end > blob.len() {
                return Err(AlignError::Model(format!(
                    "tensor {qualified} extends past the parameter file"
                )));
            }
            let data: Vec<f64> = blob[offset..end]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            let tensor = Tensor::from_vec(&shape, data);
            match qualified.split_once(':') {
                Some(("trans", name)) => trans_params.insert(name, tensor),
                Some(("jump", name)) => jump_params.insert(name, tensor),
                _ => {
                    return Err(AlignError::Model(format!(
                        "unknown tensor namespace in {qualified:?}"
                    )))
                }
            }
        }

        let src_vocab = Vocabulary::load(&dir.join("vocab.src.txt"))?;
        let tgt_vocab = Vocabulary::load(&dir.join("vocab.tgt.txt"))?;
        let src_chars = CharVocab::load(&dir.join("chars.src.txt"))?;
        let tgt_chars = CharVocab::load(&dir.join("chars.tgt.txt"))?;

        let family = Family::parse(get("family")?)
            .ok_or_else(|| AlignError::Model("bad family in manifest".into()))?;
        let translation = match get("translation")?.as_str() {
            "discrete" => {
                TranslationComp::Discrete(TranslationTable::load(&dir.join("table.txt"))?)
            }
            name => {
                let variant = TransVariant::parse(name)
                    .ok_or_else(|| AlignError::Model(format!("unknown variant {name:?}")))?;
                let dims = NetDims {
                    embed: parse_usize("embed_dim")?,
                    hidden: parse_usize("hidden_dim")?,
                    window_half: parse_usize("window_half")?,
                    char_embed: parse_usize("char_embed_dim")?,
                    char_hidden: parse_usize("char_hidden")?,
                    dropout: get("dropout")?
                        .parse()
                        .map_err(|_| AlignError::Model("bad dropout".into()))?,
                };
                TranslationComp::Neural(NeuralTranslation {
                    variant,
                    dims,
                    params: trans_params,
                })
            }
        };
        let jump = match get("jump")?.as_str() {
            "none" => None,
            "count" => Some(JumpComp {
                table: JumpTable::load(&dir.join("jump.txt"))?,
                neural: None,
            }),
            name => {
                let variant = JumpVariant::parse(name)
                    .ok_or_else(|| AlignError::Model(format!("unknown jump variant {name:?}")))?;
                let table = JumpTable::load(&dir.join("jump.txt"))?;
                let dims = JumpDims {
                    char_embed: parse_usize("jump_char_embed")?,
                    word_units: parse_usize("jump_word_units")?,
                    sent_units: parse_usize("jump_sent_units")?,
                    mlp_hidden: parse_usize("jump_mlp_hidden")?,
                    k: table.k,
                };
                Some(JumpComp {
                    table,
                    neural: Some(NeuralJump {
                        variant,
                        dims,
                        params: jump_params,
                    }),
                })
            }
        };

        Ok(Model {
            family,
            translation,
            jump,
            src_vocab,
            tgt_vocab,
            src_chars,
            tgt_chars,
            char_cap: parse_usize("char_cap")?,
        })
    }
}
