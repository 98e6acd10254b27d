//! Greedy reduction of a hypothesis list to a maximal pairwise-separated subset.

use crate::driver::HypothesisList;
use crate::error::{Error, Result};
use crate::multifilter::log_factor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReduceConfig {
    alpha: f64,
    sep_const: f64,
    sigma_scale: f64,
}

impl ReduceConfig {
    pub const DEFAULT_SEP_CONST: f64 = 8.0;

    /// `sigma_scale` converts the rescaled radius into input coordinates
    /// (the driver's `scale_c · sigma`).
    pub fn new(alpha: f64, sep_const: f64, sigma_scale: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::param("alpha", format!("{alpha} not in (0, 1)")));
        }
        if !(sep_const > 0.0 && sep_const.is_finite()) {
            return Err(Error::param(
                "sep_const",
                format!("{sep_const} must be positive"),
            ));
        }
        if !(sigma_scale > 0.0 && sigma_scale.is_finite()) {
            return Err(Error::param(
                "sigma_scale",
                format!("{sigma_scale} must be positive"),
            ));
        }
        Ok(Self {
            alpha,
            sep_const,
            sigma_scale,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn sep_const(&self) -> f64 {
        self.sep_const
    }

    pub fn sigma_scale(&self) -> f64 {
        self.sigma_scale
    }

    /// Separation radius `sep_const · lg(2/α) / √α · sigma_scale`.
    pub fn radius(&self) -> f64 {
        self.sep_const * log_factor(self.alpha) / self.alpha.sqrt() * self.sigma_scale
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Keeps a hypothesis iff it is farther than the radius from every
/// hypothesis kept so far, scanning in input order.
pub fn reduce_list(hyps: &HypothesisList, rc: &ReduceConfig) -> HypothesisList {
    let r = rc.radius();
    let mut kept: Vec<Vec<f64>> = Vec::new();
    for h in hyps.iter() {
        if kept.iter().all(|k| distance(k, h) > r) {
            kept.push(h.clone());
        }
    }
    HypothesisList(kept)
}
