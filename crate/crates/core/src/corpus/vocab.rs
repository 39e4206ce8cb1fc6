//! Word and character vocabularies with reserved UNK / NULL entries.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{AlignError, Result};

pub const UNK_ID: u32 = 0;
pub const NULL_ID: u32 = 1;

const UNK_FORM: &str = "<UNK>";
const NULL_FORM: &str = "<NULL>";

/// Frequency-capped word vocabulary. Ids are dense, assigned by descending
/// training frequency (ties broken by first occurrence), with UNK = 0 and
/// NULL = 1 reserved.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    word_to_id: HashMap<String, u32>,
    id_to_word: Vec<String>,
    counts: Vec<u64>,
}

impl Vocabulary {
    fn reserved() -> Self {
        Vocabulary {
            word_to_id: HashMap::new(),
            id_to_word: vec![UNK_FORM.to_string(), NULL_FORM.to_string()],
            counts: vec![0, 0],
        }
    }

    /// Build from an iterator over sentences, keeping the `cap` most frequent
    /// types plus the two reserved entries.
    pub fn build<'a, I>(sentences: I, cap: usize) -> Self
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        assert!(cap >= 1, "vocabulary cap must be >= 1");
        let mut stats: HashMap<&str, (u64, usize)> = HashMap::new();
        let mut order = 0usize;
        for sentence in sentences {
            for word in sentence {
                let entry = stats.entry(word.as_str()).or_insert_with(|| {
                    order += 1;
                    (0, order)
                });
                entry.0 += 1;
            }
        }
        let mut types: Vec<(&str, u64, usize)> =
            stats.into_iter().map(|(w, (c, o))| (w, c, o)).collect();
        // Most frequent first; ties resolved by first occurrence.
        types.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
        types.truncate(cap);

        let mut vocab = Vocabulary::reserved();
        for (word, count, _) in types {
            let id = vocab.id_to_word.len() as u32;
            vocab.word_to_id.insert(word.to_string(), id);
            vocab.id_to_word.push(word.to_string());
            vocab.counts.push(count);
        }
        vocab
    }

    pub fn size(&self) -> usize {
        self.id_to_word.len()
    }

    pub fn encode(&self, word: &str) -> u32 {
        self.word_to_id.get(word).copied().unwrap_or(UNK_ID)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.word_to_id.contains_key(word)
    }

    pub fn decode(&self, id: u32) -> &str {
        &self.id_to_word[id as usize]
    }

    /// Training frequency of an id (0 for reserved entries).
    pub fn count(&self, id: u32) -> u64 {
        self.counts[id as usize]
    }

    /// Ids of real words ordered by descending frequency. Because ids are
    /// assigned in frequency order this is simply `2..size`.
    pub fn ids_by_frequency(&self) -> impl Iterator<Item = u32> + '_ {
        2..self.size() as u32
    }

    /// Write `id<TAB>word<TAB>count` lines.
    pub fn dump(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| AlignError::io(path, e))?;
        let mut w = BufWriter::new(file);
        for (id, word) in self.id_to_word.iter().enumerate() {
            writeln!(w, "{id}\t{word}\t{}", self.counts[id]).map_err(|e| AlignError::io(path, e))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| AlignError::io(path, e))?;
        let mut vocab = Vocabulary {
            word_to_id: HashMap::new(),
            id_to_word: Vec::new(),
            counts: Vec::new(),
        };
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| AlignError::io(path, e))?;
            let mut parts = line.split('\t');
            let (id, word, count) = match (parts.next(), parts.next(), parts.next()) {
                (Some(id), Some(word), Some(count)) => (id, word, count),
                _ => {
                    return Err(AlignError::parse(path, lineno + 1, "expected id\\tword\\tcount"))
                }
            };
            let id: usize = id
                .parse()
                .map_err(|_| AlignError::parse(path, lineno + 1, "bad id"))?;
            let count: u64 = count
                .parse()
                .map_err(|_| AlignError::parse(path, lineno + 1, "bad count"))?;
            if id != vocab.id_to_word.len() {
                return Err(AlignError::parse(path, lineno + 1, "ids must be dense and sorted"));
            }
            if id >= 2 && !vocab.word_to_id.contains_key(word) {
                vocab.word_to_id.insert(word.to_string(), id as u32);
            }
            vocab.id_to_word.push(word.to_string());
            vocab.counts.push(count);
        }
        if vocab.id_to_word.len() < 2 {
            return Err(AlignError::Data(format!(
                "{}: vocabulary misses reserved entries",
                path.display()
            )));
        }
        Ok(vocab)
    }
}

pub const CHAR_UNK: u32 = 0;
/// Character stand-in for the NULL token.
pub const CHAR_NULL: u32 = 1;
/// Character stand-in for the boundary token used by sentence encoders.
pub const CHAR_BOS: u32 = 2;

const RESERVED_CHARS: [char; 3] = ['\u{E000}', '\u{E001}', '\u{E002}'];

/// Character inventory built from training data, with a dedicated UNK
/// character and private-use stand-ins for NULL and boundary symbols.
#[derive(Debug, Clone)]
pub struct CharVocab {
    char_to_id: HashMap<char, u32>,
    id_to_char: Vec<char>,
    counts: Vec<u64>,
}

impl CharVocab {
    fn reserved() -> Self {
        let mut v = CharVocab {
            char_to_id: HashMap::new(),
            id_to_char: Vec::new(),
            counts: Vec::new(),
        };
        for c in RESERVED_CHARS {
            v.id_to_char.push(c);
            v.counts.push(0);
        }
        v
    }

    pub fn build<'a, I>(sentences: I) -> Self
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        let mut vocab = CharVocab::reserved();
        for sentence in sentences {
            for word in sentence {
                for c in word.chars() {
                    match vocab.char_to_id.get(&c) {
                        Some(&id) => vocab.counts[id as usize] += 1,
                        None => {
                            let id = vocab.id_to_char.len() as u32;
                            vocab.char_to_id.insert(c, id);
                            vocab.id_to_char.push(c);
                            vocab.counts.push(1);
                        }
                    }
                }
            }
        }
        vocab
    }

    pub fn size(&self) -> usize {
        self.id_to_char.len()
    }

    pub fn encode(&self, c: char) -> u32 {
        self.char_to_id.get(&c).copied().unwrap_or(CHAR_UNK)
    }

    /// Encode a word's characters, truncating the tail beyond `cap`.
    pub fn encode_word(&self, word: &str, cap: usize) -> Vec<u32> {
        word.chars().take(cap).map(|c| self.encode(c)).collect()
    }

    pub fn dump(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| AlignError::io(path, e))?;
        let mut w = BufWriter::new(file);
        for (id, c) in self.id_to_char.iter().enumerate() {
            writeln!(w, "{id}\t{}\t{}", *c as u32, self.counts[id])
                .map_err(|e| AlignError::io(path, e))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| AlignError::io(path, e))?;
        let mut vocab = CharVocab {
            char_to_id: HashMap::new(),
            id_to_char: Vec::new(),
            counts: Vec::new(),
        };
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| AlignError::io(path, e))?;
            let mut parts = line.split('\t');
            let (id, code, count) = match (parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), Some(c)) => (a, b, c),
                _ => return Err(AlignError::parse(path, lineno + 1, "expected id\\tcodepoint\\tcount")),
            };
            let id: usize = id
                .parse()
                .map_err(|_| AlignError::parse(path, lineno + 1, "bad id"))?;
            let code: u32 = code
                .parse()
                .map_err(|_| AlignError::parse(path, lineno + 1, "bad codepoint"))?;
            let count: u64 = count
                .parse()
                .map_err(|_| AlignError::parse(path, lineno + 1, "bad count"))?;
            let c = char::from_u32(code)
                .ok_or_else(|| AlignError::parse(path, lineno + 1, "invalid codepoint"))?;
            if id != vocab.id_to_char.len() {
                return Err(AlignError::parse(path, lineno + 1, "ids must be dense and sorted"));
            }
            if id >= RESERVED_CHARS.len() {
                vocab.char_to_id.insert(c, id as u32);
            }
            vocab.id_to_char.push(c);
            vocab.counts.push(count);
        }
        if vocab.id_to_char.len() < RESERVED_CHARS.len() {
            return Err(AlignError::Data(format!(
                "{}: character vocabulary misses reserved entries",
                path.display()
            )));
        }
        Ok(vocab)
    }

    /// Character-id sequence representing the NULL token.
    pub fn null_word(&self) -> Vec<u32> {
        vec![CHAR_NULL]
    }

    /// Character-id sequence representing the boundary token.
    pub fn bos_word(&self) -> Vec<u32> {
        vec![CHAR_BOS]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sentences(words: &[&str]) -> Vec<Vec<String>> {
        vec![words.iter().map(|w| w.to_string()).collect()]
    }

    #[test]
    fn cap_keeps_most_frequent_and_unk_encodes_rest() {
        let data = sentences(&["a", "a", "a", "b", "b", "c"]);
        let vocab = Vocabulary::build(data.iter().map(|s| s.as_slice()), 2);
        assert_eq!(vocab.size(), 4);
        assert!(vocab.contains("a"));
        assert!(vocab.contains("b"));
        assert_eq!(vocab.encode("c"), UNK_ID);
        assert_eq!(vocab.count(vocab.encode("a")), 3);
    }

    #[test]
    fn cap_ties_break_by_first_occurrence() {
        let data = sentences(&["x", "y", "z"]);
        let vocab = Vocabulary::build(data.iter().map(|s| s.as_slice()), 2);
        assert!(vocab.contains("x"));
        assert!(vocab.contains("y"));
        assert_eq!(vocab.encode("z"), UNK_ID);
    }

    #[test]
    fn no_truncation_when_cap_exceeds_types() {
        let data = sentences(&["a", "b", "c"]);
        let vocab = Vocabulary::build(data.iter().map(|s| s.as_slice()), 50);
        assert_eq!(vocab.size(), 5);
        for w in ["a", "b", "c"] {
            assert_eq!(vocab.decode(vocab.encode(w)), w);
        }
    }

    #[test]
    fn empty_corpus_keeps_reserved_entries_only() {
        let data: Vec<Vec<String>> = Vec::new();
        let vocab = Vocabulary::build(data.iter().map(|s| s.as_slice()), 10);
        assert_eq!(vocab.size(), 2);
        assert_eq!(vocab.encode("anything"), UNK_ID);
    }

    #[test]
    fn encode_decode_round_trip_for_kept_words() {
        let data = sentences(&["alpha", "beta", "alpha"]);
        let vocab = Vocabulary::build(data.iter().map(|s| s.as_slice()), 10);
        for w in ["alpha", "beta"] {
            assert_eq!(vocab.decode(vocab.encode(w)), w);
        }
    }

    #[test]
    fn dump_and_load_round_trip() {
        let data = sentences(&["a", "b", "b"]);
        let vocab = Vocabulary::build(data.iter().map(|s| s.as_slice()), 10);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.txt");
        vocab.dump(&path).unwrap();
        let loaded = Vocabulary::load(&path).unwrap();
        assert_eq!(loaded.size(), vocab.size());
        assert_eq!(loaded.encode("b"), vocab.encode("b"));
        assert_eq!(loaded.count(loaded.encode("b")), 2);
    }

    #[test]
    fn char_vocab_truncates_at_cap() {
        let data = sentences(&["abcdef"]);
        let chars = CharVocab::build(data.iter().map(|s| s.as_slice()));
        let encoded = chars.encode_word("abcdef", 3);
        assert_eq!(encoded.len(), 3);
        let unknown = chars.encode_word("xyz", 30);
        assert!(unknown.iter().all(|&c| c == CHAR_UNK));
    }
}
