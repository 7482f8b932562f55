use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Vocabulary, UNK};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "TF")]
    Tf,
    #[serde(rename = "TF_NORM")]
    TfNorm,
    #[serde(rename = "BINARY")]
    Binary,
    #[serde(rename = "TFIDF")]
    Tfidf,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Tf, Scheme::TfNorm, Scheme::Binary, Scheme::Tfidf];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Tf => "TF",
            Scheme::TfNorm => "TF_NORM",
            Scheme::Binary => "BINARY",
            Scheme::Tfidf => "TFIDF",
        }
    }

    /// TF-IDF keeps stopwords; the inverse document frequency down-weights them.
    pub fn removes_stopwords(self) -> bool {
        self != Scheme::Tfidf
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let up = s.to_ascii_uppercase().replace('-', "_");
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.name() == up)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown BOW scheme {s:?}")))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stopwords(HashSet<String>);

impl Stopwords {
    /// The bundled English list (318 words).
    pub fn english() -> Self {
        Self::parse(include_str!("stopwords_en.txt"))
    }

    pub fn empty() -> Self {
        Stopwords(HashSet::new())
    }

    /// One word per line; blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Self {
        Stopwords(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_lowercase)
                .collect(),
        )
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains(token)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sorted(&self) -> Vec<String> {
        let mut v: Vec<String> = self.0.iter().cloned().collect();
        v.sort();
        v
    }
}

impl<S: Into<String>> FromIterator<S> for Stopwords {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Stopwords(iter.into_iter().map(Into::into).collect())
    }
}

/// Sparse document vector. Only non-zero weights are stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BowVector {
    pub scheme: Scheme,
    entries: BTreeMap<usize, f64>,
}

impl BowVector {
    pub fn from_entries(scheme: Scheme, entries: impl IntoIterator<Item = (usize, f64)>) -> Self {
        BowVector {
            scheme,
            entries: entries.into_iter().filter(|&(_, w)| w != 0.0).collect(),
        }
    }

    pub fn get(&self, index: usize) -> f64 {
        self.entries.get(&index).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().map(|(&i, &w)| (i, w))
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn sum(&self) -> f64 {
        self.entries.values().sum()
    }

    pub fn scaled(&self, factor: f64) -> BowVector {
        BowVector::from_entries(self.scheme, self.iter().map(|(i, w)| (i, w * factor)))
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.iter().map(|(i, w)| w * dense[i]).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdfTable {
    pub idf: BTreeMap<usize, f64>,
    pub num_documents: usize,
}

impl IdfTable {
    pub fn get(&self, index: usize) -> Option<f64> {
        self.idf.get(&index).copied()
    }
}

/// Document frequencies over the in-vocabulary tokens of `docs`.
pub fn fit_idf<D: AsRef<[String]>>(docs: &[D], vocab: &Vocabulary) -> Result<IdfTable> {
    if docs.is_empty() {
        return Err(Error::InvalidArgument("cannot fit IDF on an empty corpus".into()));
    }
    let mut df: BTreeMap<usize, usize> = BTreeMap::new();
    for doc in docs {
        let seen: HashSet<usize> = doc
            .as_ref()
            .iter()
            .filter_map(|t| vocab.get(t))
            .filter(|&i| i > UNK)
            .collect();
        for i in seen {
            *df.entry(i).or_insert(0) += 1;
        }
    }
    let n = docs.len() as f64;
    Ok(IdfTable {
        idf: df.into_iter().map(|(i, c)| (i, (n / c as f64).ln())).collect(),
        num_documents: docs.len(),
    })
}

/// Out-of-vocabulary tokens are ignored under every scheme.
pub fn vectorize(
    tokens: &[String],
    vocab: &Vocabulary,
    scheme: Scheme,
    idf: Option<&IdfTable>,
    stopwords: &Stopwords,
) -> Result<BowVector> {
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    for tok in tokens {
        if scheme.removes_stopwords() && stopwords.contains(tok) {
            continue;
        }
        if let Some(i) = vocab.get(tok).filter(|&i| i > UNK) {
            *counts.entry(i).or_insert(0.0) += 1.0;
        }
    }
    let entries: Vec<(usize, f64)> = match scheme {
        Scheme::Tf => counts.into_iter().collect(),
        Scheme::TfNorm => {
            let total: f64 = counts.values().sum();
            counts.into_iter().map(|(i, c)| (i, c / total)).collect()
        }
        Scheme::Binary => counts.into_keys().map(|i| (i, 1.0)).collect(),
        Scheme::Tfidf => {
            let idf = idf.ok_or_else(|| {
                Error::InvalidArgument("the TFIDF scheme requires a fitted IDF table".into())
            })?;
            counts
                .into_iter()
                .filter_map(|(i, c)| idf.get(i).map(|w| (i, c * w)))
                .collect()
        }
    };
    Ok(BowVector::from_entries(scheme, entries))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn vocab_of(docs: &[Vec<String>]) -> Vocabulary {
        Vocabulary::build(docs, 1).unwrap()
    }

    #[test]
    fn tf_and_tf_norm() {
        let d = toks("a a b");
        let v = vocab_of(&[d.clone()]);
        let (a, b) = (v.get("a").unwrap(), v.get("b").unwrap());
        let tf = vectorize(&d, &v, Scheme::Tf, None, &Stopwords::empty()).unwrap();
        assert_eq!((tf.get(a), tf.get(b)), (2.0, 1.0));
        let n = vectorize(&d, &v, Scheme::TfNorm, None, &Stopwords::empty()).unwrap();
        assert!((n.get(a) - 2.0 / 3.0).abs() < 1e-15);
        assert!((n.get(b) - 1.0 / 3.0).abs() < 1e-15);
        let bin = vectorize(&d, &v, Scheme::Binary, None, &Stopwords::empty()).unwrap();
        assert_eq!((bin.get(a), bin.get(b)), (1.0, 1.0));
    }

    #[test]
    fn stopwords_removed_except_for_tfidf() {
        let d = toks("no acute bleed");
        let v = vocab_of(&[d.clone()]);
        let sw = Stopwords::english();
        assert!(sw.contains("no"));
        let tf = vectorize(&d, &v, Scheme::Tf, None, &sw).unwrap();
        assert_eq!(tf.get(v.get("no").unwrap()), 0.0);
        assert_eq!(tf.nnz(), 2);
        let idf = fit_idf(&[d.clone(), toks("acute")], &v).unwrap();
        let t = vectorize(&d, &v, Scheme::Tfidf, Some(&idf), &sw).unwrap();
        assert!(t.get(v.get("no").unwrap()) > 0.0);
    }

    #[test]
    fn tfidf_by_hand() {
        let docs = vec![toks("a b"), toks("a")];
        let v = vocab_of(&docs);
        let idf = fit_idf(&docs, &v).unwrap();
        let x = vectorize(&docs[0], &v, Scheme::Tfidf, Some(&idf), &Stopwords::empty()).unwrap();
        assert!((x.get(v.get("b").unwrap()) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(x.get(v.get("a").unwrap()), 0.0);
        assert_eq!(x.nnz(), 1, "zero weights are not stored");
        assert!(vectorize(&docs[0], &v, Scheme::Tfidf, None, &Stopwords::empty()).is_err());
    }

    #[test]
    fn idf_examples() {
        let docs = vec![toks("b a"), toks("a"), toks("a"), toks("a")];
        let mut v = vocab_of(&docs);
        let idf = fit_idf(&docs, &v).unwrap();
        assert_eq!(idf.get(v.get("a").unwrap()), Some(0.0));
        assert!((idf.get(v.get("b").unwrap()).unwrap() - 4f64.ln()).abs() < 1e-15);
        v = Vocabulary::build(vec![toks("a b z")], 1).unwrap();
        let idf = fit_idf(&docs, &v).unwrap();
        assert_eq!(idf.get(v.get("z").unwrap()), None);
        assert!(fit_idf::<Vec<String>>(&[], &v).is_err());
    }

    #[test]
    fn test_time_tokens_unseen_in_training_are_dropped() {
        let train = vec![toks("a b")];
        let v = vocab_of(&[toks("a b c")]);
        let idf = fit_idf(&train, &v).unwrap();
        let x = vectorize(&toks("c c"), &v, Scheme::Tfidf, Some(&idf), &Stopwords::empty()).unwrap();
        assert_eq!(x.nnz(), 0);
    }

    proptest! {
        #[test]
        fn tf_norm_sums_to_one(words in proptest::collection::vec(0usize..12, 1..40)) {
            let d: Vec<String> = words.iter().map(|w| format!("w{w}")).collect();
            let v = vocab_of(&[d.clone()]);
            let x = vectorize(&d, &v, Scheme::TfNorm, None, &Stopwords::empty()).unwrap();
            prop_assert!((x.sum() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn binary_is_indicator(words in proptest::collection::vec(0usize..12, 0..40)) {
            let d: Vec<String> = words.iter().map(|w| format!("w{w}")).collect();
            let v = vocab_of(&[d.clone(), toks("x")]);
            let x = vectorize(&d, &v, Scheme::Binary, None, &Stopwords::empty()).unwrap();
            prop_assert!(x.iter().all(|(_, w)| w == 1.0));
        }
    }
}
