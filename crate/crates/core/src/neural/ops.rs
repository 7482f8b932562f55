use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::{Error, Result};

/// Nonlinearity applied after each convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Derivative with respect to the pre-activation; ReLU uses 0 at the kink.
    #[inline]
    pub fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Filter spanning `l` consecutive token rows of a document matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvFilter {
    pub weights: Matrix,
    pub bias: f64,
}

impl ConvFilter {
    pub fn new(weights: Matrix, bias: f64) -> Result<Self> {
        if weights.rows() == 0 {
            return Err(Error::InvalidArgument("filter length must be >= 1".into()));
        }
        Ok(ConvFilter { weights, bias })
    }

    pub fn length(&self) -> usize {
        self.weights.rows()
    }

    pub fn width(&self) -> usize {
        self.weights.cols()
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let j = i * 4;
        acc[0] += a[j] * b[j];
        acc[1] += a[j + 1] * b[j + 1];
        acc[2] += a[j + 2] * b[j + 2];
        acc[3] += a[j + 3] * b[j + 3];
    }
    let mut tail = 0.0;
    for j in chunks * 4..a.len() {
        tail += a[j] * b[j];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Slides `filter` down the rows of `s`: output `i` is
/// `act(<s[i..i+l], weights> + bias)`, length `n - l + 1`.
pub fn conv1d(s: &Matrix, filter: &ConvFilter, activation: Activation) -> Result<Vec<f64>> {
    let (n, d) = s.shape();
    let l = filter.length();
    if filter.width() != d {
        return Err(Error::Shape(format!(
            "filter width {} does not match embedding width {d}",
            filter.width()
        )));
    }
    if l > n {
        return Err(Error::InvalidArgument(format!(
            "filter length {l} exceeds document length {n}"
        )));
    }
    let w = filter.weights.as_slice();
    Ok((0..=n - l)
        .map(|i| activation.apply(dot(s.rows_slice(i, l), w) + filter.bias))
        .collect())
}

/// Maximum of `v` and the first index attaining it.
pub fn max_over_time(v: &[f64]) -> Result<(f64, usize)> {
    let (&first, rest) = v
        .split_first()
        .ok_or_else(|| Error::InvalidArgument("max over an empty vector".into()))?;
    let mut best = (first, 0);
    for (i, &x) in rest.iter().enumerate() {
        if x > best.0 {
            best = (x, i + 1);
        }
    }
    Ok(best)
}

/// Per-row maximum and the first column attaining it.
pub fn rowwise_max(m: &Matrix) -> Result<(Vec<f64>, Vec<usize>)> {
    if m.cols() == 0 {
        return Err(Error::Shape("row-wise max needs at least one column".into()));
    }
    let mut values = Vec::with_capacity(m.rows());
    let mut cols = Vec::with_capacity(m.rows());
    for r in 0..m.rows() {
        let (v, c) = max_over_time(m.row(r))?;
        values.push(v);
        cols.push(c);
    }
    Ok((values, cols))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxXent {
    pub loss: f64,
    pub probabilities: Vec<f64>,
    /// Gradient of the loss with respect to the logits: `p - onehot(gold)`.
    pub gradient: Vec<f64>,
}

/// Softmax cross-entropy with max-subtraction for stability.
pub fn softmax_xent(logits: &[f64], gold: usize) -> Result<SoftmaxXent> {
    if gold >= logits.len() {
        return Err(Error::InvalidArgument(format!(
            "gold class {gold} out of range for {} logits",
            logits.len()
        )));
    }
    if logits.iter().any(|x| !x.is_finite()) {
        return Err(Error::Data("logits must be finite".into()));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let probabilities: Vec<f64> = exps.iter().map(|e| e / sum).collect();
    let loss = sum.ln() - (logits[gold] - max);
    let mut gradient = probabilities.clone();
    gradient[gold] -= 1.0;
    Ok(SoftmaxXent {
        loss,
        probabilities,
        gradient,
    })
}

/// Inverted-dropout scale factors: 0 with probability `rate`, else `1/(1-rate)`.
pub fn dropout_mask(len: usize, rate: f64, rng: &mut impl Rng) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!("dropout rate {rate} not in [0, 1)")));
    }
    if rate == 0.0 {
        return Ok(vec![1.0; len]);
    }
    let keep = 1.0 / (1.0 - rate);
    Ok((0..len)
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect())
}

/// Inverted dropout; identity in eval mode.
pub fn dropout(v: &[f64], rate: f64, mode: Mode, rng: &mut impl Rng) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!("dropout rate {rate} not in [0, 1)")));
    }
    match mode {
        Mode::Eval => Ok(v.to_vec()),
        Mode::Train => {
            let mask = dropout_mask(v.len(), rate, rng)?;
            Ok(v.iter().zip(mask).map(|(x, m)| x * m).collect())
        }
    }
}

/// `p <- p - lr * g`.
pub fn sgd_step(params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::Shape(format!(
            "{} parameters but {} gradients",
            params.len(),
            grads.len()
        )));
    }
    for (p, g) in params.iter_mut().zip(grads) {
        *p -= lr * g;
    }
    Ok(())
}

/// Rescales all gradient groups so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(groups: &mut [&mut [f64]], max_norm: f64) -> f64 {
    let norm = groups
        .iter()
        .flat_map(|g| g.iter())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for g in groups.iter_mut() {
            for x in g.iter_mut() {
                *x *= scale;
            }
        }
    }
    norm
}

/// Logistic function with its input clamped to `[-40, 40]`.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    let x = x.clamp(-40.0, 40.0);
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::rng_for;
    use proptest::prelude::*;
    use rand::Rng;

    fn column(v: &[f64]) -> Matrix {
        Matrix::from_vec(v.len(), 1, v.to_vec()).unwrap()
    }

    fn filter(w: &[f64], bias: f64) -> ConvFilter {
        ConvFilter::new(column(w), bias).unwrap()
    }

    #[test]
    fn conv_identity_filter() {
        let s = column(&[1.0, 2.0, 3.0]);
        assert_eq!(conv1d(&s, &filter(&[1.0], 0.0), Activation::Identity).unwrap(), [1.0, 2.0, 3.0]);
    }

    #[test]
    fn conv_length_two() {
        let s = column(&[1.0, 2.0, 3.0]);
        assert_eq!(conv1d(&s, &filter(&[1.0, 1.0], 0.0), Activation::Identity).unwrap(), [3.0, 5.0]);
    }

    #[test]
    fn conv_full_length_and_errors() {
        let s = column(&[1.0, 2.0, 3.0]);
        assert_eq!(conv1d(&s, &filter(&[1.0, 1.0, 1.0], 0.5), Activation::Relu).unwrap(), [6.5]);
        assert!(conv1d(&s, &filter(&[1.0; 4], 0.0), Activation::Relu).is_err());
        let wide = ConvFilter::new(Matrix::zeros(1, 2), 0.0).unwrap();
        assert!(matches!(conv1d(&s, &wide, Activation::Relu), Err(Error::Shape(_))));
        assert!(ConvFilter::new(Matrix::zeros(0, 1), 0.0).is_err());
    }

    #[test]
    fn relu_clamps_negative_outputs() {
        let s = column(&[1.0, -2.0]);
        assert_eq!(conv1d(&s, &filter(&[1.0], 0.0), Activation::Relu).unwrap(), [1.0, 0.0]);
    }

    #[test]
    fn max_over_time_cases() {
        assert_eq!(max_over_time(&[1.0, -2.0, 3.0]).unwrap(), (3.0, 2));
        assert_eq!(max_over_time(&[5.0, 5.0]).unwrap(), (5.0, 0));
        assert_eq!(max_over_time(&[7.0; 4]).unwrap(), (7.0, 0));
        assert!(max_over_time(&[]).is_err());
    }

    #[test]
    fn rowwise_max_cases() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![4.0, 3.0]]).unwrap();
        assert_eq!(rowwise_max(&m).unwrap(), (vec![2.0, 4.0], vec![1, 0]));
        let single = column(&[3.0, -1.0]);
        assert_eq!(rowwise_max(&single).unwrap(), (vec![3.0, -1.0], vec![0, 0]));
        let neg = Matrix::from_rows(&[vec![-1.0, -2.0]]).unwrap();
        assert_eq!(rowwise_max(&neg).unwrap(), (vec![-1.0], vec![0]));
        assert!(rowwise_max(&Matrix::zeros(2, 0)).is_err());
    }

    #[test]
    fn softmax_uniform() {
        let out = softmax_xent(&[0.0, 0.0, 0.0], 0).unwrap();
        for p in &out.probabilities {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!((out.loss - 3f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn softmax_stable_for_large_logits() {
        let out = softmax_xent(&[1000.0, 0.0], 0).unwrap();
        assert!(out.loss.abs() < 1e-12 && out.loss.is_finite());
        assert!(out.probabilities.iter().all(|p| p.is_finite()));
    }

    #[test]
    fn softmax_gradient() {
        let g = softmax_xent(&[0.0, 0.0, 0.0], 1).unwrap().gradient;
        let want = [1.0 / 3.0, -2.0 / 3.0, 1.0 / 3.0];
        for (a, b) in g.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(softmax_xent(&[0.0, 0.0], 2).is_err());
    }

    #[test]
    fn dropout_identity_cases() {
        let mut rng = rng_for(1, 0);
        let v = vec![1.0, -2.0, 3.0];
        assert_eq!(dropout(&v, 0.0, Mode::Train, &mut rng).unwrap(), v);
        assert_eq!(dropout(&v, 0.7, Mode::Eval, &mut rng).unwrap(), v);
        assert!(dropout(&v, 1.0, Mode::Train, &mut rng).is_err());
    }

    #[test]
    fn dropout_statistics() {
        let mut rng = rng_for(2, 0);
        let n = 1_000_000;
        let out = dropout(&vec![1.0; n], 0.2, Mode::Train, &mut rng).unwrap();
        let survivors = out.iter().filter(|&&x| x != 0.0).count() as f64 / n as f64;
        assert!((survivors - 0.8).abs() < 0.01, "survivors {survivors}");
        let mean = out.iter().sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn sgd_cases() {
        let mut p = vec![1.0];
        sgd_step(&mut p, &[2.0], 0.5).unwrap();
        assert_eq!(p, [0.0]);
        let mut p = vec![3.0];
        sgd_step(&mut p, &[0.0], 0.5).unwrap();
        assert_eq!(p, [3.0]);
        let mut p = vec![1.0];
        sgd_step(&mut p, &[1.0], 0.1).unwrap();
        sgd_step(&mut p, &[1.0], 0.1).unwrap();
        assert!((p[0] - 0.8).abs() < 1e-15);
        assert!(matches!(sgd_step(&mut p, &[1.0, 2.0], 0.1), Err(Error::Shape(_))));
    }

    #[test]
    fn clipping() {
        let mut a = vec![3.0];
        let mut b = vec![4.0];
        let norm = clip_global_norm(&mut [&mut a, &mut b], 1.0);
        assert_eq!(norm, 5.0);
        assert!((a[0] - 0.6).abs() < 1e-15 && (b[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn sigmoid_saturates() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((1.0 - sigmoid(40.0)) < 1e-15);
        assert!(sigmoid(-1e6) > 0.0);
    }

    fn naive_conv(s: &Matrix, f: &ConvFilter, act: Activation) -> Vec<f64> {
        let (n, d) = s.shape();
        let l = f.length();
        let mut out = Vec::new();
        for i in 0..=n - l {
            let mut acc = 0.0;
            for k in 0..l {
                for j in 0..d {
                    acc += s.get(i + k, j) * f.weights.get(k, j);
                }
            }
            out.push(act.apply(acc + f.bias));
        }
        out
    }

    proptest! {
        #[test]
        fn conv_matches_triple_loop(
            n in 1usize..12, d in 1usize..7, l in 1usize..5, seed in 0u64..10_000,
        ) {
            prop_assume!(l <= n);
            let mut rng = rng_for(seed, 0);
            let s = Matrix::from_vec(n, d, (0..n * d).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
            let w = Matrix::from_vec(l, d, (0..l * d).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
            let f = ConvFilter::new(w, rng.gen_range(-0.5..0.5)).unwrap();
            for act in [Activation::Relu, Activation::Identity] {
                let got = conv1d(&s, &f, act).unwrap();
                let want = naive_conv(&s, &f, act);
                for (a, b) in got.iter().zip(&want) {
                    prop_assert!((a - b).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn softmax_is_a_distribution(logits in proptest::collection::vec(-15.0f64..15.0, 2..8)) {
            let out = softmax_xent(&logits, 0).unwrap();
            let sum: f64 = out.probabilities.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            prop_assert!(out.probabilities.iter().all(|&p| p > 0.0 && p < 1.0));
        }
    }
}
