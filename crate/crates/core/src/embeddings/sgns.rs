use crate::neural::{dot, sigmoid};

/// `ln σ(x)`, computed without overflow.
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgnsGradient {
    pub loss: f64,
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

/// Loss `-ln σ(u·v) - Σ ln σ(-u·v_neg)` and its gradient with respect to the
/// center vector `u`, the context vector `v`, and every negative vector.
pub fn sgns_gradient(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> SgnsGradient {
    let dim = center.len();
    assert_eq!(context.len(), dim, "context vector dimension");
    let pos = dot(center, context);
    let pos_coeff = sigmoid(pos) - 1.0;
    let mut loss = -log_sigmoid(pos);
    let mut d_center: Vec<f64> = context.iter().map(|v| pos_coeff * v).collect();
    let d_context: Vec<f64> = center.iter().map(|u| pos_coeff * u).collect();
    let mut d_negatives = Vec::with_capacity(negatives.len());
    for neg in negatives {
        assert_eq!(neg.len(), dim, "negative vector dimension");
        let score = dot(center, neg);
        loss -= log_sigmoid(-score);
        let coeff = sigmoid(score);
        for (g, v) in d_center.iter_mut().zip(neg.iter()) {
            *g += coeff * v;
        }
        d_negatives.push(center.iter().map(|u| coeff * u).collect());
    }
    SgnsGradient {
        loss,
        center: d_center,
        context: d_context,
        negatives: d_negatives,
    }
}
