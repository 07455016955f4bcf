//! Byte-level byte-pair encoding.
//!
//! Training is the classic greedy loop: count adjacent token pairs across the
//! corpus (strings are never joined), merge the most frequent pair everywhere
//! it occurs, and repeat until the vocabulary reaches its target or no pair
//! occurs at least twice. Ties go to the pair whose byte expansions are
//! lexicographically smallest.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const BPE_FORMAT: &str = "tokenleak-bpe/1";
pub const BASE_VOCAB: usize = 256;

pub type TokenId = u32;

#[derive(Debug, Error)]
pub enum BpeError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("target vocabulary {0} is below the {BASE_VOCAB}-byte base vocabulary plus one merge")]
    VocabTooSmall(usize),
    #[error("token id {0} is outside the vocabulary")]
    UnknownToken(TokenId),
    #[error("cannot read vocabulary {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("vocabulary line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BpeVocab {
    merges: Vec<(TokenId, TokenId)>,
    expansions: Vec<Vec<u8>>,
    ranks: HashMap<(TokenId, TokenId), u32>,
    provenance: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VocabHeader {
    format: String,
    vocab_size: usize,
}

impl BpeVocab {
    fn base(provenance: String) -> Self {
        BpeVocab {
            merges: Vec::new(),
            expansions: (0..=255u8).map(|b| vec![b]).collect(),
            ranks: HashMap::new(),
            provenance,
        }
    }

    fn push_merge(&mut self, left: TokenId, right: TokenId) -> TokenId {
        let id = self.expansions.len() as TokenId;
        let mut bytes = self.expansions[left as usize].clone();
        bytes.extend_from_slice(&self.expansions[right as usize]);
        self.expansions.push(bytes);
        self.ranks.insert((left, right), self.merges.len() as u32);
        self.merges.push((left, right));
        id
    }

    pub fn vocab_size(&self) -> usize {
        BASE_VOCAB + self.merges.len()
    }

    /// Merge rules in rank order, as token id pairs.
    pub fn merges(&self) -> &[(TokenId, TokenId)] {
        &self.merges
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    /// Byte expansion of a token.
    pub fn token_bytes(&self, id: TokenId) -> Option<&[u8]> {
        self.expansions.get(id as usize).map(Vec::as_slice)
    }

    pub fn encode(&self, text: &[u8]) -> Vec<TokenId> {
        let mut tokens: Vec<TokenId> = text.iter().map(|&b| TokenId::from(b)).collect();
        loop {
            let best = tokens
                .windows(2)
                .filter_map(|w| self.ranks.get(&(w[0], w[1])).map(|&r| (r, w[0], w[1])))
                .min();
            let Some((rank, left, right)) = best else {
                break;
            };
            let merged = BASE_VOCAB as TokenId + rank;
            merge_pair(&mut tokens, (left, right), merged);
        }
        tokens
    }

    pub fn count_tokens(&self, text: &[u8]) -> usize {
        self.encode(text).len()
    }

    pub fn decode(&self, tokens: &[TokenId]) -> Result<Vec<u8>, BpeError> {
        let mut out = Vec::new();
        for &t in tokens {
            let bytes = self.token_bytes(t).ok_or(BpeError::UnknownToken(t))?;
            out.extend_from_slice(bytes);
        }
        Ok(out)
    }

    /// Header line plus one `hex(left) hex(right)` line per merge.
    pub fn to_file_string(&self) -> String {
        let header = VocabHeader {
            format: BPE_FORMAT.into(),
            vocab_size: self.vocab_size(),
        };
        let mut out = serde_json::to_string(&header).expect("header serialization");
        out.push('\n');
        for &(l, r) in &self.merges {
            let _ = writeln!(
                out,
                "{} {}",
                hex::encode(&self.expansions[l as usize]),
                hex::encode(&self.expansions[r as usize])
            );
        }
        out
    }

    /// Parses a vocabulary file. A byte string names the earliest token with
    /// that expansion.
    pub fn parse(text: &str, provenance: impl Into<String>) -> Result<BpeVocab, BpeError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(BpeError::Parse {
            line: 1,
            message: "missing header".into(),
        })?;
        let header: VocabHeader = serde_json::from_str(header).map_err(|e| BpeError::Parse {
            line: 1,
            message: e.to_string(),
        })?;
        if header.format != BPE_FORMAT {
            return Err(BpeError::Parse {
                line: 1,
                message: format!("unsupported format `{}`", header.format),
            });
        }
        let mut vocab = BpeVocab::base(provenance.into());
        let mut by_bytes: HashMap<Vec<u8>, TokenId> = vocab
            .expansions
            .iter()
            .enumerate()
            .map(|(i, b)| (b.clone(), i as TokenId))
            .collect();
        for (idx, line) in lines {
            let err = |message: String| BpeError::Parse {
                line: idx + 1,
                message,
            };
            let mut parts = line.split(' ');
            let (Some(l), Some(r), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(err("expected two space-separated hex strings".into()));
            };
            let lookup = |h: &str| -> Result<TokenId, BpeError> {
                let bytes = hex::decode(h).map_err(|e| err(e.to_string()))?;
                by_bytes
                    .get(&bytes)
                    .copied()
                    .ok_or_else(|| err(format!("`{h}` does not name an earlier token")))
            };
            let (left, right) = (lookup(l)?, lookup(r)?);
            let id = vocab.push_merge(left, right);
            by_bytes
                .entry(vocab.expansions[id as usize].clone())
                .or_insert(id);
        }
        if vocab.vocab_size() != header.vocab_size {
            return Err(BpeError::Parse {
                line: 1,
                message: format!(
                    "header declares vocab_size {} but file holds {}",
                    header.vocab_size,
                    vocab.vocab_size()
                ),
            });
        }
        Ok(vocab)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<BpeVocab, BpeError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| BpeError::Io {
            path: path.display().to_string(),
            source,
        })?;
        BpeVocab::parse(&text, format!("file:{}", path.display()))
    }
}

fn merge_pair(tokens: &mut Vec<TokenId>, pair: (TokenId, TokenId), merged: TokenId) {
    let mut out = Vec::with_capacity(tokens.len());
    let mut i = 0;
    while i < tokens.len() {
        if i + 1 < tokens.len() && (tokens[i], tokens[i + 1]) == pair {
            out.push(merged);
            i += 2;
        } else {
            out.push(tokens[i]);
            i += 1;
        }
    }
    *tokens = out;
}

fn add_pair_counts(counts: &mut HashMap<(TokenId, TokenId), i64>, seq: &[TokenId], weight: i64) {
    for w in seq.windows(2) {
        *counts.entry((w[0], w[1])).or_insert(0) += weight;
    }
}

pub fn train_bpe<S: AsRef<[u8]>>(corpus: &[S], target_vocab: usize) -> Result<BpeVocab, BpeError> {
    if target_vocab <= BASE_VOCAB {
        return Err(BpeError::VocabTooSmall(target_vocab));
    }
    let total_bytes: usize = corpus.iter().map(|s| s.as_ref().len()).sum();
    if total_bytes == 0 {
        return Err(BpeError::EmptyCorpus);
    }

    // Identical strings only need to be tracked once.
    let mut distinct: BTreeMap<&[u8], i64> = BTreeMap::new();
    for s in corpus {
        *distinct.entry(s.as_ref()).or_insert(0) += 1;
    }
    let mut seqs: Vec<(Vec<TokenId>, i64)> = distinct
        .into_iter()
        .map(|(s, w)| (s.iter().map(|&b| TokenId::from(b)).collect(), w))
        .collect();

    let mut counts = HashMap::new();
    for (seq, w) in &seqs {
        add_pair_counts(&mut counts, seq, *w);
    }

    let mut vocab = BpeVocab::base(format!(
        "trained: {} strings, {total_bytes} bytes, target {target_vocab}",
        corpus.len()
    ));
    while vocab.vocab_size() < target_vocab {
        let best = counts
            .iter()
            .filter(|(_, &c)| c >= 2)
            .max_by(|(pa, ca), (pb, cb)| {
                ca.cmp(cb).then_with(|| {
                    let key = |p: &(TokenId, TokenId)| {
                        (
                            vocab.expansions[p.0 as usize].clone(),
                            vocab.expansions[p.1 as usize].clone(),
                        )
                    };
                    // Reversed so that the smaller byte pair wins the max.
                    key(pb).cmp(&key(pa))
                })
            })
            .map(|(&p, _)| p);
        let Some(pair) = best else {
            break;
        };
        let merged = vocab.push_merge(pair.0, pair.1);
        for (seq, w) in &mut seqs {
            if !seq.windows(2).any(|win| (win[0], win[1]) == pair) {
                continue;
            }
            add_pair_counts(&mut counts, seq, -*w);
            merge_pair(seq, pair, merged);
            add_pair_counts(&mut counts, seq, *w);
        }
        counts.retain(|_, c| *c > 0);
    }
    Ok(vocab)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_pair_corpus() {
        let v = train_bpe(&["aaaa"], 257).unwrap();
        assert_eq!(v.merges(), &[(b'a' as u32, b'a' as u32)]);
        assert_eq!(v.vocab_size(), 257);
        assert_eq!(v.encode(b"aaaa").len(), 2);
    }

    #[test]
    fn most_frequent_pair_first() {
        // "abab" twice: (a,b) occurs 4 times, (b,a) twice.
        let v = train_bpe(&["abab", "abab"], 258).unwrap();
        assert_eq!(v.merges()[0], (b'a' as u32, b'b' as u32));
        // Then (ab,ab) occurs twice.
        assert_eq!(v.merges()[1], (256, 256));
        assert_eq!(v.encode(b"abab"), vec![257]);
    }

    #[test]
    fn lexicographic_tie_break() {
        // (x,y) and (a,b) both occur twice; (a,b) is smaller.
        let v = train_bpe(&["xy", "xy", "ab", "ab"], 257).unwrap();
        assert_eq!(v.merges(), &[(b'a' as u32, b'b' as u32)]);
    }

    #[test]
    fn stops_when_no_pair_repeats() {
        let v = train_bpe(&["abcdef"], 300).unwrap();
        assert_eq!(v.vocab_size(), 256);
    }

    #[test]
    fn precondition_errors() {
        assert!(matches!(train_bpe(&["aa"], 256), Err(BpeError::VocabTooSmall(256))));
        let empty: [&str; 0] = [];
        assert!(matches!(train_bpe(&empty, 300), Err(BpeError::EmptyCorpus)));
        assert!(matches!(train_bpe(&[""], 300), Err(BpeError::EmptyCorpus)));
    }

    #[test]
    fn empty_text() {
        let v = train_bpe(&["aaaa"], 257).unwrap();
        assert!(v.encode(b"").is_empty());
        assert_eq!(v.decode(&[]).unwrap(), b"");
    }

    #[test]
    fn decode_rejects_unknown_ids() {
        let v = train_bpe(&["aaaa"], 257).unwrap();
        assert!(matches!(v.decode(&[257]), Err(BpeError::UnknownToken(257))));
    }

    #[test]
    fn deterministic_training() {
        let corpus = ["the cat sat on the mat", "the rat ate the hat", "a cat, a hat"];
        let a = train_bpe(&corpus, 280).unwrap();
        let b = train_bpe(&corpus, 280).unwrap();
        assert_eq!(a.merges(), b.merges());
    }

    #[test]
    fn merges_only_reference_earlier_tokens() {
        let corpus = ["banana bandana cabana", "ananas and bananas"];
        let v = train_bpe(&corpus, 290).unwrap();
        for (rank, &(l, r)) in v.merges().iter().enumerate() {
            let id = (BASE_VOCAB + rank) as u32;
            assert!(l < id && r < id);
        }
    }

    #[test]
    fn file_round_trip() {
        let corpus = ["banana bandana cabana", "ananas and bananas"];
        let v = train_bpe(&corpus, 270).unwrap();
        let text = v.to_file_string();
        assert!(text.starts_with("{\"format\":\"tokenleak-bpe/1\",\"vocab_size\":"));
        let back = BpeVocab::parse(&text, "test").unwrap();
        assert_eq!(back.merges(), v.merges());
        assert_eq!(back.to_file_string(), text);
    }

    #[test]
    fn parse_rejects_forward_references() {
        let text = "{\"format\":\"tokenleak-bpe/1\",\"vocab_size\":257}\n6161 616161\n";
        assert!(BpeVocab::parse(text, "t").is_err());
        let text = "{\"format\":\"tokenleak-bpe/1\",\"vocab_size\":300}\n61 61\n";
        assert!(BpeVocab::parse(text, "t").is_err());
    }

    proptest! {
        #[test]
        fn round_trip(text in proptest::collection::vec(any::<u8>(), 0..=64)) {
            let v = train_bpe(&["hello world, hello tokens", "aaaa bbbb aaaa"], 290).unwrap();
            let toks = v.encode(&text);
            prop_assert_eq!(v.decode(&toks).unwrap(), text);
        }
    }
}
