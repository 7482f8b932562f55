use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    fit_idf, train_forest, train_linear, vectorize, BowVector, ForestConfig, IdfTable, LinearConfig, LinearModel,
    Loss, Prediction, RandomForestModel, Scheme, Stopwords,
};
use crate::corpus::{Document, TaskId, Vocabulary, NUM_CLASSES};
use crate::util::{read_json, write_json_pretty};
use crate::{Error, Result};

const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BowModelKind {
    #[serde(rename = "BOW-LR")]
    Lr,
    #[serde(rename = "BOW-SVM")]
    Svm,
    #[serde(rename = "BOW-RF")]
    Rf,
}

impl BowModelKind {
    pub fn name(self) -> &'static str {
        match self {
            BowModelKind::Lr => "BOW-LR",
            BowModelKind::Svm => "BOW-SVM",
            BowModelKind::Rf => "BOW-RF",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "params", rename_all = "lowercase")]
pub enum BowModel {
    Linear(LinearModel),
    Forest(RandomForestModel),
}

impl BowModel {
    pub fn predict(&self, x: &BowVector) -> Prediction {
        match self {
            BowModel::Linear(m) => m.predict(x),
            BowModel::Forest(m) => m.predict(x),
        }
    }
}

/// A fitted baseline together with everything needed to vectorize new text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BowClassifier {
    pub version: u32,
    pub kind: BowModelKind,
    pub task: TaskId,
    pub scheme: Scheme,
    pub vocab_hash: String,
    pub vocabulary: Vocabulary,
    pub idf: Option<IdfTable>,
    pub stopwords: Vec<String>,
    pub model: BowModel,
    #[serde(skip)]
    stopword_set: Stopwords,
}

impl BowClassifier {
    /// Builds the vocabulary and IDF table from `train` only, then fits the model.
    pub fn fit(
        train: &[Document],
        task: TaskId,
        kind: BowModelKind,
        scheme: Scheme,
        stopwords: &Stopwords,
        seed: u64,
    ) -> Result<Self> {
        let linear = LinearConfig {
            loss: if kind == BowModelKind::Svm { Loss::Hinge } else { Loss::Log },
            seed,
            ..Default::default()
        };
        let forest = ForestConfig { seed, ..Default::default() };
        Self::fit_with(train, task, kind, scheme, stopwords, &linear, &forest)
    }

    pub fn fit_with(
        train: &[Document],
        task: TaskId,
        kind: BowModelKind,
        scheme: Scheme,
        stopwords: &Stopwords,
        linear: &LinearConfig,
        forest: &ForestConfig,
    ) -> Result<Self> {
        let ys = train.iter().map(|d| d.require_label(task)).collect::<Result<Vec<_>>>()?;
        let tokens: Vec<&[String]> = train.iter().map(|d| d.tokens.as_slice()).collect();
        let vocabulary = Vocabulary::build(tokens.iter().copied(), 1)?;
        let idf = if scheme == Scheme::Tfidf {
            Some(fit_idf(&tokens, &vocabulary)?)
        } else {
            None
        };
        let xs = tokens
            .iter()
            .map(|t| vectorize(t, &vocabulary, scheme, idf.as_ref(), stopwords))
            .collect::<Result<Vec<_>>>()?;
        let v = vocabulary.len();
        let model = match kind {
            BowModelKind::Rf => BowModel::Forest(train_forest(&xs, &ys, v, NUM_CLASSES, forest)?),
            BowModelKind::Lr | BowModelKind::Svm => {
                let loss = if kind == BowModelKind::Svm { Loss::Hinge } else { Loss::Log };
                let cfg = LinearConfig { loss, ..linear.clone() };
                BowModel::Linear(train_linear(&xs, &ys, v, NUM_CLASSES, &cfg)?)
            }
        };
        Ok(BowClassifier {
            version: CHECKPOINT_VERSION,
            kind,
            task,
            scheme,
            vocab_hash: vocabulary.hash(),
            vocabulary,
            idf,
            stopwords: stopwords.sorted(),
            model,
            stopword_set: stopwords.clone(),
        })
    }

    pub fn vectorize(&self, tokens: &[String]) -> Result<BowVector> {
        vectorize(tokens, &self.vocabulary, self.scheme, self.idf.as_ref(), &self.stopword_set)
    }

    pub fn predict(&self, tokens: &[String]) -> Result<Prediction> {
        Ok(self.model.predict(&self.vectorize(tokens)?))
    }

    /// Fraction of `docs` whose label for this classifier's task is predicted.
    pub fn accuracy(&self, docs: &[Document]) -> Result<f64> {
        if docs.is_empty() {
            return Err(Error::InvalidArgument("cannot score an empty document set".into()));
        }
        let mut hits = 0;
        for d in docs {
            if self.predict(&d.tokens)?.label == d.require_label(self.task)? {
                hits += 1;
            }
        }
        Ok(hits as f64 / docs.len() as f64)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json_pretty(path.as_ref(), self)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut c: BowClassifier = read_json(path.as_ref())?;
        if c.version != CHECKPOINT_VERSION {
            return Err(Error::Data(format!("unsupported BOW checkpoint version {}", c.version)));
        }
        if c.vocabulary.hash() != c.vocab_hash {
            return Err(Error::Data("BOW checkpoint vocabulary does not match its hash".into()));
        }
        c.stopword_set = c.stopwords.iter().cloned().collect();
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic, stratified_split, SyntheticSpec};

    #[test]
    fn fit_predict_and_round_trip() {
        let corpus = generate_synthetic(&SyntheticSpec {
            num_documents: 200,
            ..Default::default()
        })
        .unwrap();
        let task = TaskId::new(2).unwrap();
        let split = stratified_split(&corpus.documents, task, (120, 40, 40), 0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        for (kind, scheme) in [
            (BowModelKind::Lr, Scheme::Binary),
            (BowModelKind::Svm, Scheme::Tfidf),
            (BowModelKind::Rf, Scheme::TfNorm),
        ] {
            let c = BowClassifier::fit(&split.train, task, kind, scheme, &Stopwords::english(), 1).unwrap();
            let acc = c.accuracy(&split.test).unwrap();
            assert!((0.0..=1.0).contains(&acc));
            let p = dir.path().join(format!("{}.json", kind.name()));
            c.save(&p).unwrap();
            let back = BowClassifier::load(&p).unwrap();
            assert_eq!(back.accuracy(&split.test).unwrap(), acc);
            assert_eq!(back.model, c.model);
        }
    }
}
