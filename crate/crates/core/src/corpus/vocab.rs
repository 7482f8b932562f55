use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::util::sha256_hex;
use crate::{Error, Result};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

/// Bidirectional token/index map with corpus frequencies.
///
/// Index 0 is always padding and index 1 the unknown-word bucket. Real tokens
/// follow in descending corpus frequency, ties broken lexicographically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    index_to_token: Vec<String>,
    frequency: Vec<u64>,
    token_to_index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    tokens: Vec<String>,
    frequency: Vec<u64>,
}

impl TryFrom<VocabularyRepr> for Vocabulary {
    type Error = Error;
    fn try_from(r: VocabularyRepr) -> Result<Self> {
        Vocabulary::from_parts(r.tokens, r.frequency)
    }
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        VocabularyRepr {
            tokens: v.index_to_token,
            frequency: v.frequency,
        }
    }
}

impl Vocabulary {
    /// Counts tokens over `docs` and keeps those seen at least `min_count` times.
    pub fn build<I, D>(docs: I, min_count: u64) -> Result<Self>
    where
        I: IntoIterator<Item = D>,
        D: AsRef<[String]>,
    {
        if min_count < 1 {
            return Err(Error::InvalidArgument("min_count must be >= 1".into()));
        }
        let mut counts: HashMap<String, u64> = HashMap::new();
        for doc in docs {
            for tok in doc.as_ref() {
                *counts.entry(tok.clone()).or_insert(0) += 1;
            }
        }
        let mut kept: Vec<(String, u64)> = counts
            .into_iter()
            .filter(|(t, c)| *c >= min_count && t != PAD_TOKEN && t != UNK_TOKEN)
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut tokens = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        let mut frequency = vec![0, 0];
        for (t, c) in kept {
            tokens.push(t);
            frequency.push(c);
        }
        Self::from_parts(tokens, frequency)
    }

    /// Rebuilds a vocabulary from its serialized index order.
    pub fn from_parts(tokens: Vec<String>, frequency: Vec<u64>) -> Result<Self> {
        if tokens.len() < 2 || tokens[PAD] != PAD_TOKEN || tokens[UNK] != UNK_TOKEN {
            return Err(Error::Data(
                "vocabulary must start with the <pad> and <unk> entries".into(),
            ));
        }
        if frequency.len() != tokens.len() {
            return Err(Error::Data(format!(
                "vocabulary has {} tokens but {} frequencies",
                tokens.len(),
                frequency.len()
            )));
        }
        let mut token_to_index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if token_to_index.insert(t.clone(), i).is_some() {
                return Err(Error::Data(format!("duplicate vocabulary token {t:?}")));
            }
        }
        Ok(Vocabulary {
            index_to_token: tokens,
            frequency,
            token_to_index,
        })
    }

    pub fn len(&self) -> usize {
        self.index_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() <= 2
    }

    /// Index of `token`, or `None` when it is out of vocabulary.
    pub fn get(&self, token: &str) -> Option<usize> {
        self.token_to_index.get(token).copied()
    }

    /// Index of `token` with out-of-vocabulary tokens mapped to [`UNK`].
    pub fn index_or_unk(&self, token: &str) -> usize {
        match self.token_to_index.get(token) {
            Some(&i) if i > UNK => i,
            _ => UNK,
        }
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.index_to_token.get(index).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.index_to_token
    }

    pub fn frequency(&self, index: usize) -> u64 {
        self.frequency.get(index).copied().unwrap_or(0)
    }

    pub fn frequencies(&self) -> &[u64] {
        &self.frequency
    }

    /// SHA-256 over the tokens in index order; binds models and embeddings to a vocabulary.
    pub fn hash(&self) -> String {
        sha256_hex(self.index_to_token.join("\n").as_bytes())
    }
}
