//! Naive reference implementations used as test oracles.

#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn naive_mean(rows: &[Vec<f64>], w: &[f64]) -> Vec<f64> {
    let d = rows[0].len();
    let total: f64 = w.iter().sum();
    let mut m = vec![0.0; d];
    for (x, &wi) in rows.iter().zip(w) {
        for k in 0..d {
            m[k] += wi * x[k];
        }
    }
    m.iter().map(|s| s / total).collect()
}

pub fn naive_cov(rows: &[Vec<f64>], w: &[f64]) -> DMatrix<f64> {
    let d = rows[0].len();
    let total: f64 = w.iter().sum();
    let mu = naive_mean(rows, w);
    let mut c = DMatrix::zeros(d, d);
    for (x, &wi) in rows.iter().zip(w) {
        for r in 0..d {
            for s in 0..d {
                c[(r, s)] += wi * (x[r] - mu[r]) * (x[s] - mu[s]);
            }
        }
    }
    c / total
}

/// Largest eigenvalue and a unit eigenvector of a symmetric matrix.
pub fn top_eigen(c: &DMatrix<f64>) -> (f64, Vec<f64>) {
    let eig = SymmetricEigen::new(c.clone());
    let (idx, &val) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    (val, eig.eigenvectors.column(idx).iter().copied().collect())
}

pub fn rayleigh(c: &DMatrix<f64>, v: &[f64]) -> f64 {
    let v = nalgebra::DVector::from_column_slice(v);
    (v.transpose() * c * &v)[(0, 0)] / v.norm_squared()
}

pub fn naive_var(values: &[f64], w: &[f64]) -> f64 {
    let total: f64 = w.iter().sum();
    let mean = values.iter().zip(w).map(|(x, wi)| x * wi).sum::<f64>() / total;
    values
        .iter()
        .zip(w)
        .map(|(x, wi)| wi * (x - mean) * (x - mean))
        .sum::<f64>()
        / total
}

pub fn mass_where(values: &[f64], w: &[f64], pred: impl Fn(f64) -> bool) -> f64 {
    values
        .iter()
        .zip(w)
        .filter(|(&x, &wi)| wi > 0.0 && pred(x))
        .map(|(_, wi)| wi)
        .sum()
}

/// `(a, b)` by scanning every supported value.
pub fn naive_quantiles(values: &[f64], w: &[f64], alpha: f64) -> (f64, f64) {
    let total: f64 = w.iter().sum();
    let tail = alpha * total / 8.0;
    let support: Vec<f64> = values
        .iter()
        .zip(w)
        .filter(|(_, &wi)| wi > 0.0)
        .map(|(&x, _)| x)
        .collect();
    let a = support
        .iter()
        .copied()
        .filter(|&c| mass_where(values, w, |x| x < c) <= tail)
        .fold(f64::NEG_INFINITY, f64::max);
    let b = support
        .iter()
        .copied()
        .filter(|&c| mass_where(values, w, |x| x > c) <= tail)
        .fold(f64::INFINITY, f64::min);
    (a, b)
}

pub fn loss_bound(alpha: f64) -> f64 {
    48.0 * (2.0 / alpha).log2()
}

/// Both split conditions, evaluated from scratch for the boundaries.
pub fn split_ok(values: &[f64], w: &[f64], alpha: f64, lower: f64, upper: f64, slack: f64) -> bool {
    let total = mass_where(values, w, |_| true);
    let first = mass_where(values, w, |x| x >= lower);
    let second = mass_where(values, w, |x| x < upper);
    let r = (upper - lower) / 2.0;
    let loss = (1.0 - first / total).min(1.0 - second / total);
    r > 0.0
        && first * first + second * second <= total * total * (1.0 + slack)
        && loss * r * r >= loss_bound(alpha) * (1.0 - slack)
}

/// Exhaustive scan over every pair of boundary points. The first child's
/// boundary sits just above a supported value; the second child's boundary
/// sits on one.
pub fn exhaustive_split_exists(values: &[f64], w: &[f64], alpha: f64) -> bool {
    let mut support: Vec<f64> = values
        .iter()
        .zip(w)
        .filter(|(_, &wi)| wi > 0.0)
        .map(|(&x, _)| x)
        .collect();
    support.sort_by(f64::total_cmp);
    support.dedup();
    for (i, &lo_anchor) in support.iter().enumerate() {
        let lower = lo_anchor.next_up();
        for &upper in &support[i + 1..] {
            if split_ok(values, w, alpha, lower, upper, 0.0) {
                return true;
            }
        }
    }
    false
}

pub fn gaussian_rows<R: Rng>(rng: &mut R, n: usize, d: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            (0..d)
                .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect()
}

/// Rows with anisotropic scales and a few shifted clumps.
pub fn structured_rows<R: Rng>(rng: &mut R, n: usize, d: usize) -> Vec<Vec<f64>> {
    let scales: Vec<f64> = (0..d).map(|_| rng.random_range(0.1..5.0)).collect();
    let clumps = rng.random_range(1..4);
    let centers: Vec<Vec<f64>> = (0..clumps)
        .map(|_| (0..d).map(|_| rng.random_range(-20.0..20.0)).collect())
        .collect();
    (0..n)
        .map(|i| {
            let c = &centers[i % clumps];
            (0..d)
                .map(|k| c[k] + scales[k] * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect()
}

pub fn random_weights<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| match rng.random_range(0..10) {
            0 => 0.0,
            1 => 1.0,
            _ => rng.random_range(0.0..1.0),
        })
        .collect()
}
