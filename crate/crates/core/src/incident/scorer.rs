//! Three-feature logistic scorer for ticket–event pairs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const N_FEATURES: usize = 3;
pub const MAX_EPOCHS: usize = 10_000;
pub const REL_TOL: f64 = 1e-6;
const LEARNING_RATE: f64 = 0.5;

/// `[text cosine, temporal proximity, product affinity]`, each in [0, 1].
pub type Features = [f64; N_FEATURES];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScorerWeights {
    pub weights: [f64; N_FEATURES],
    pub bias: f64,
}

impl Default for ScorerWeights {
    /// Hand-set weights used when no labeled pairs are available.
    fn default() -> Self {
        ScorerWeights {
            weights: [6.0, 3.0, 3.0],
            bias: -4.0,
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl ScorerWeights {
    pub fn score(&self, f: &Features) -> f64 {
        sigmoid(self.bias + self.weights.iter().zip(f).map(|(w, x)| w * x).sum::<f64>())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: usize,
    pub loss: f64,
    pub converged: bool,
}

fn mean_log_loss(w: &ScorerWeights, data: &[(Features, bool)]) -> f64 {
    let eps = 1e-12;
    data.iter()
        .map(|(f, y)| {
            let p = w.score(f).clamp(eps, 1.0 - eps);
            if *y {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum::<f64>()
        / data.len() as f64
}

/// Full-batch gradient descent on the mean log loss from zero weights,
/// stopping when the relative loss change drops below `REL_TOL` or after
/// `MAX_EPOCHS` epochs.
pub fn train_scorer(data: &[(Features, bool)]) -> Result<(ScorerWeights, TrainReport)> {
    let positives = data.iter().filter(|(_, y)| *y).count();
    if positives == 0 || positives == data.len() {
        return Err(Error::SingleClass);
    }
    let n = data.len() as f64;
    let mut w = ScorerWeights {
        weights: [0.0; N_FEATURES],
        bias: 0.0,
    };
    let mut loss = mean_log_loss(&w, data);
    for epoch in 1..=MAX_EPOCHS {
        let mut grad = [0.0; N_FEATURES];
        let mut grad_b = 0.0;
        for (f, y) in data {
            let err = w.score(f) - if *y { 1.0 } else { 0.0 };
            for (g, x) in grad.iter_mut().zip(f) {
                *g += err * x;
            }
            grad_b += err;
        }
        for (wi, g) in w.weights.iter_mut().zip(grad) {
            *wi -= LEARNING_RATE * g / n;
        }
        w.bias -= LEARNING_RATE * grad_b / n;
        let next = mean_log_loss(&w, data);
        let rel = (loss - next).abs() / loss.max(1e-300);
        loss = next;
        if rel < REL_TOL {
            return Ok((
                w,
                TrainReport {
                    epochs: epoch,
                    loss,
                    converged: true,
                },
            ));
        }
    }
    Ok((
        w,
        TrainReport {
            epochs: MAX_EPOCHS,
            loss,
            converged: false,
        },
    ))
}

pub fn accuracy(w: &ScorerWeights, data: &[(Features, bool)], threshold: f64) -> f64 {
    let correct = data.iter().filter(|(f, y)| (w.score(f) >= threshold) == *y).count();
    correct as f64 / data.len() as f64
}
