//! Distance of a hypothesis list to the planted mean.

use ldme_core::HypothesisList;
use serde::Serialize;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    pub min_error: f64,
    pub argmin: usize,
}

pub fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn evaluate(hyps: &HypothesisList, true_mean: &[f64]) -> Result<Evaluation> {
    let mut best: Option<Evaluation> = None;
    for (i, h) in hyps.iter().enumerate() {
        if h.len() != true_mean.len() {
            return Err(HarnessError::spec(
                "hypotheses",
                format!(
                    "hypothesis {i} has {} coordinates, expected {}",
                    h.len(),
                    true_mean.len()
                ),
            ));
        }
        let err = l2_distance(h, true_mean);
        if best.is_none_or(|b| err < b.min_error) {
            best = Some(Evaluation {
                min_error: err,
                argmin: i,
            });
        }
    }
    best.ok_or_else(|| HarnessError::spec("hypotheses", "empty hypothesis list"))
}
