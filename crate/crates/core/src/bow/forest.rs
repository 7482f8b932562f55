use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{BowVector, Prediction};
use crate::util::{argmax, rng_for};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub num_trees: usize,
    /// `None` means `ceil(sqrt(num_features))`.
    pub max_features: Option<usize>,
    /// `None` means unlimited depth.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            num_trees: 100,
            max_features: None,
            max_depth: None,
            min_samples_split: 2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    Leaf {
        counts: Vec<u64>,
    },
    /// Samples with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    /// Node 0 is the root.
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn leaf_counts(&self, x: &BowVector) -> &[u64] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { counts } => return counts,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x.get(*feature) <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn predict(&self, x: &BowVector) -> usize {
        let counts: Vec<f64> = self.leaf_counts(x).iter().map(|&c| c as f64).collect();
        argmax(&counts)
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForestModel {
    pub trees: Vec<DecisionTree>,
    pub num_classes: usize,
    pub max_features: usize,
    pub seed: u64,
}

impl RandomForestModel {
    pub fn votes(&self, x: &BowVector) -> Vec<usize> {
        let mut votes = vec![0; self.num_classes];
        for t in &self.trees {
            votes[t.predict(x)] += 1;
        }
        votes
    }

    /// Scores are vote fractions; ties go to the lowest class.
    pub fn predict(&self, x: &BowVector) -> Prediction {
        let n = self.trees.len().max(1) as f64;
        let scores: Vec<f64> = self.votes(x).into_iter().map(|v| v as f64 / n).collect();
        Prediction {
            label: argmax(&scores),
            scores,
        }
    }
}

/// Trains each tree on a bootstrap sample drawn from `(seed, tree index)`.
pub fn train_forest(
    xs: &[BowVector],
    ys: &[usize],
    num_features: usize,
    num_classes: usize,
    config: &ForestConfig,
) -> Result<RandomForestModel> {
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(Error::InvalidArgument(format!(
            "forest needs a non-empty training set with one label per vector ({} vs {})",
            xs.len(),
            ys.len()
        )));
    }
    if num_features == 0 || config.num_trees == 0 {
        return Err(Error::InvalidArgument("forest needs >= 1 feature and >= 1 tree".into()));
    }
    if let Some(&bad) = ys.iter().find(|&&y| y >= num_classes) {
        return Err(Error::Data(format!("label {bad} out of range for {num_classes} classes")));
    }
    let max_features = config
        .max_features
        .unwrap_or_else(|| (num_features as f64).sqrt().ceil() as usize)
        .clamp(1, num_features);
    let dense = DenseData::new(xs, num_features)?;
    let trees = (0..config.num_trees)
        .map(|t| {
            let mut rng = rng_for(config.seed, t as u64);
            let sample: Vec<usize> = (0..xs.len()).map(|_| rng.gen_range(0..xs.len())).collect();
            TreeBuilder {
                data: &dense,
                ys,
                num_classes,
                max_features,
                max_depth: config.max_depth.unwrap_or(usize::MAX),
                min_samples_split: config.min_samples_split.max(2),
                nodes: Vec::new(),
                features: (0..num_features).collect(),
            }
            .build(sample, &mut rng)
        })
        .collect();
    Ok(RandomForestModel {
        trees,
        num_classes,
        max_features,
        seed: config.seed,
    })
}

/// Column-major copy of the training vectors for fast per-feature scans.
struct DenseData {
    columns: Vec<Vec<f64>>,
}

impl DenseData {
    fn new(xs: &[BowVector], num_features: usize) -> Result<Self> {
        let mut columns = vec![vec![0.0; xs.len()]; num_features];
        for (r, x) in xs.iter().enumerate() {
            for (i, v) in x.iter() {
                let col = columns
                    .get_mut(i)
                    .ok_or_else(|| Error::Shape(format!("feature index {i} exceeds {num_features} features")))?;
                col[r] = v;
            }
        }
        Ok(DenseData { columns })
    }
}

struct TreeBuilder<'a> {
    data: &'a DenseData,
    ys: &'a [usize],
    num_classes: usize,
    max_features: usize,
    max_depth: usize,
    min_samples_split: usize,
    nodes: Vec<Node>,
    features: Vec<usize>,
}

fn gini(counts: &[u64], total: u64) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>()
}

impl TreeBuilder<'_> {
    fn build(mut self, sample: Vec<usize>, rng: &mut impl Rng) -> DecisionTree {
        let mut stack = vec![(0usize, sample, 0usize)];
        self.nodes.push(Node::Leaf { counts: Vec::new() });
        while let Some((slot, rows, depth)) = stack.pop() {
            let mut counts = vec![0u64; self.num_classes];
            for &r in &rows {
                counts[self.ys[r]] += 1;
            }
            let impure = counts.iter().filter(|&&c| c > 0).count() > 1;
            let split = if impure && depth < self.max_depth && rows.len() >= self.min_samples_split {
                self.best_split(&rows, &counts, rng)
            } else {
                None
            };
            match split {
                None => self.nodes[slot] = Node::Leaf { counts },
                Some((feature, threshold)) => {
                    let col = &self.data.columns[feature];
                    let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| col[i] <= threshold);
                    let left = self.nodes.len();
                    self.nodes.push(Node::Leaf { counts: Vec::new() });
                    self.nodes.push(Node::Leaf { counts: Vec::new() });
                    self.nodes[slot] = Node::Split {
                        feature,
                        threshold,
                        left,
                        right: left + 1,
                    };
                    stack.push((left + 1, r, depth + 1));
                    stack.push((left, l, depth + 1));
                }
            }
        }
        DecisionTree { nodes: self.nodes }
    }

    /// Draws features without replacement. At least `max_features` are
    /// examined; drawing continues past that only while no sampled feature
    /// admits any split.
    fn best_split(&mut self, rows: &[usize], counts: &[u64], rng: &mut impl Rng) -> Option<(usize, f64)> {
        let n = rows.len() as u64;
        let parent = gini(counts, n);
        let mut best: Option<(f64, usize, f64)> = None;
        let mut pairs: Vec<(f64, usize)> = Vec::with_capacity(rows.len());
        let total = self.features.len();
        for drawn in 0..total {
            if drawn >= self.max_features && best.is_some() {
                break;
            }
            let pick = rng.gen_range(drawn..total);
            self.features.swap(drawn, pick);
            let f = self.features[drawn];
            let col = &self.data.columns[f];
            pairs.clear();
            pairs.extend(rows.iter().map(|&r| (col[r], self.ys[r])));
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            if pairs[0].0 == pairs[pairs.len() - 1].0 {
                continue;
            }
            let mut left = vec![0u64; self.num_classes];
            for k in 0..pairs.len() - 1 {
                left[pairs[k].1] += 1;
                if pairs[k].0 == pairs[k + 1].0 {
                    continue;
                }
                let nl = k as u64 + 1;
                let right: Vec<u64> = counts.iter().zip(&left).map(|(c, l)| c - l).collect();
                let child = (nl as f64 * gini(&left, nl) + (n - nl) as f64 * gini(&right, n - nl)) / n as f64;
                if best.map_or(true, |(b, _, _)| child < b) {
                    best = Some((child, f, 0.5 * (pairs[k].0 + pairs[k + 1].0)));
                }
            }
        }
        // Restore the canonical order so the draw sequence depends only on the RNG.
        self.features.sort_unstable();
        best.filter(|&(child, _, _)| child <= parent).map(|(_, f, t)| (f, t))
    }
}
