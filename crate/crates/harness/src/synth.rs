//! Planted instances: a `⌈α·n⌉` inlier sample with covariance `σ²I` plus
//! adversarial outliers.
//!
//! Inliers occupy the first rows of the generated point set; the returned
//! mask marks them.

use std::path::PathBuf;

use ldme_core::PointSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::io::read_points;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InlierModel {
    GaussianIdentity,
    /// Multivariate Student-t scaled to covariance `σ²I`.
    HeavyTailStudentT {
        #[serde(default = "default_nu")]
        nu: f64,
    },
    /// Independent uniform coordinates on `[−√3σ, √3σ]`.
    BoundedUniform,
}

fn default_nu() -> f64 {
    3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Adversary {
    /// `k` copies of the inlier distribution. When `k + 1 ≤ d` the decoy
    /// centers and the true mean form a regular simplex with edge
    /// `separation`; otherwise decoys sit at distance `separation` from the
    /// true mean in random directions.
    DecoyClusters { k: usize, separation: f64 },
    /// Uniform in the ball of the given radius around the true mean.
    UniformNoise { radius: f64 },
    /// Inliers reflected through the origin, cycled as needed.
    Mirror,
    /// Outlier rows read verbatim from a point file.
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TrueMean {
    Vector(Vec<f64>),
    RandomSphere { random_sphere: f64 },
}

impl Default for TrueMean {
    fn default() -> Self {
        TrueMean::RandomSphere { random_sphere: 0.0 }
    }
}

fn default_sigma() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub n: usize,
    pub d: usize,
    pub alpha: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    pub inlier_model: InlierModel,
    pub adversary: Adversary,
    #[serde(default)]
    pub true_mean: TrueMean,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub points: PointSet,
    pub inlier_mask: Vec<bool>,
    pub true_mean: Vec<f64>,
}

impl InstanceSpec {
    pub fn inlier_count(&self) -> usize {
        ((self.alpha * self.n as f64) - 1e-9).ceil().max(1.0) as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(HarnessError::spec("n", "must be at least 1"));
        }
        if self.d == 0 {
            return Err(HarnessError::spec("d", "must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(HarnessError::spec(
                "alpha",
                format!("{} not in (0, 1/2)", self.alpha),
            ));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(HarnessError::spec(
                "sigma",
                format!("{} must be positive", self.sigma),
            ));
        }
        if let InlierModel::HeavyTailStudentT { nu } = self.inlier_model {
            if !(nu > 2.0 && nu.is_finite()) {
                return Err(HarnessError::spec(
                    "inlier_model.nu",
                    format!("{nu} must exceed 2 for finite covariance"),
                ));
            }
        }
        match &self.adversary {
            Adversary::DecoyClusters { k, separation } => {
                if *k == 0 {
                    return Err(HarnessError::spec("adversary.k", "must be at least 1"));
                }
                if !(*separation >= 0.0 && separation.is_finite()) {
                    return Err(HarnessError::spec(
                        "adversary.separation",
                        format!("{separation} must be non-negative"),
                    ));
                }
            }
            Adversary::UniformNoise { radius } => {
                if !(*radius >= 0.0 && radius.is_finite()) {
                    return Err(HarnessError::spec(
                        "adversary.radius",
                        format!("{radius} must be non-negative"),
                    ));
                }
            }
            Adversary::Mirror | Adversary::File { .. } => {}
        }
        match &self.true_mean {
            TrueMean::Vector(v) if v.len() != self.d => {
                return Err(HarnessError::spec(
                    "true_mean",
                    format!("has {} coordinates, expected {}", v.len(), self.d),
                ))
            }
            TrueMean::Vector(v) if v.iter().any(|x| !x.is_finite()) => {
                return Err(HarnessError::spec("true_mean", "non-finite coordinate"))
            }
            TrueMean::RandomSphere { random_sphere } if !(*random_sphere >= 0.0) => {
                return Err(HarnessError::spec(
                    "true_mean.random_sphere",
                    "radius must be non-negative",
                ))
            }
            _ => {}
        }
        Ok(())
    }
}

fn gaussian_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v = gaussian_vec(rng, d);
        let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nrm > 1e-12 {
            return v.into_iter().map(|x| x / nrm).collect();
        }
    }
}

/// `count` orthonormal vectors in `R^d` (`count ≤ d`), by Gram–Schmidt on
/// Gaussian draws.
fn random_orthonormal(rng: &mut ChaCha8Rng, d: usize, count: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(count);
    while basis.len() < count {
        let mut v = gaussian_vec(rng, d);
        for b in &basis {
            let proj: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= proj * y);
        }
        let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nrm > 1e-8 {
            basis.push(v.into_iter().map(|x| x / nrm).collect());
        }
    }
    basis
}

/// Zero-mean draw with covariance `σ²I` from the inlier model.
fn noise(model: &InlierModel, sigma: f64, d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match model {
        InlierModel::GaussianIdentity => gaussian_vec(rng, d)
            .into_iter()
            .map(|z| sigma * z)
            .collect(),
        InlierModel::HeavyTailStudentT { nu } => {
            let chi = ChiSquared::new(*nu).expect("nu validated");
            let g: f64 = chi.sample(rng);
            let scale = sigma * ((nu - 2.0) / nu).sqrt() / (g / nu).sqrt();
            gaussian_vec(rng, d)
                .into_iter()
                .map(|z| scale * z)
                .collect()
        }
        InlierModel::BoundedUniform => {
            let half = 3f64.sqrt() * sigma;
            (0..d).map(|_| rng.random_range(-half..=half)).collect()
        }
    }
}

fn shifted(center: &[f64], offset: Vec<f64>) -> Vec<f64> {
    center.iter().zip(offset).map(|(c, o)| c + o).collect()
}

pub fn decoy_centers(
    rng: &mut ChaCha8Rng,
    mean: &[f64],
    k: usize,
    separation: f64,
) -> Vec<Vec<f64>> {
    let d = mean.len();
    if k < d {
        let basis = random_orthonormal(rng, d, k + 1);
        let edge = separation / 2f64.sqrt();
        (1..=k)
            .map(|i| {
                mean.iter()
                    .enumerate()
                    .map(|(c, m)| m + edge * (basis[i][c] - basis[0][c]))
                    .collect()
            })
            .collect()
    } else {
        (0..k)
            .map(|_| {
                let u = random_unit(rng, d);
                mean.iter()
                    .zip(u)
                    .map(|(m, x)| m + separation * x)
                    .collect()
            })
            .collect()
    }
}

pub fn gen_instance(spec: &InstanceSpec) -> Result<Instance> {
    spec.validate()?;
    let InstanceSpec { n, d, sigma, .. } = *spec;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let true_mean = match &spec.true_mean {
        TrueMean::Vector(v) => v.clone(),
        TrueMean::RandomSphere { random_sphere } => random_unit(&mut rng, d)
            .into_iter()
            .map(|x| x * random_sphere)
            .collect(),
    };

    let inliers = spec.inlier_count().min(n);
    let outliers = n - inliers;
    let mut rows: Vec<Vec<f64>> = (0..inliers)
        .map(|_| shifted(&true_mean, noise(&spec.inlier_model, sigma, d, &mut rng)))
        .collect();

    match &spec.adversary {
        Adversary::DecoyClusters { k, separation } => {
            let centers = decoy_centers(&mut rng, &true_mean, *k, *separation);
            for j in 0..outliers {
                let offset = noise(&spec.inlier_model, sigma, d, &mut rng);
                rows.push(shifted(&centers[j % k], offset));
            }
        }
        Adversary::UniformNoise { radius } => {
            for _ in 0..outliers {
                let u = random_unit(&mut rng, d);
                let r = radius * rng.random::<f64>().powf(1.0 / d as f64);
                rows.push(shifted(&true_mean, u.into_iter().map(|x| r * x).collect()));
            }
        }
        Adversary::Mirror => {
            for j in 0..outliers {
                let src = &rows[j % inliers];
                let reflected = src.iter().map(|x| -x).collect();
                rows.push(reflected);
            }
        }
        Adversary::File { path } => {
            let file = read_points(path)?;
            if file.dim() != d {
                return Err(HarnessError::spec(
                    "adversary.path",
                    format!("file has dimension {}, expected {d}", file.dim()),
                ));
            }
            if file.len() != outliers {
                return Err(HarnessError::spec(
                    "adversary.path",
                    format!("file has {} rows, expected {outliers} outliers", file.len()),
                ));
            }
            rows.extend(file.to_rows());
        }
    }

    let points =
        PointSet::from_rows(&rows).map_err(|e| HarnessError::spec("instance", e.to_string()))?;
    let inlier_mask = (0..n).map(|i| i < inliers).collect();
    Ok(Instance {
        points,
        inlier_mask,
        true_mean,
    })
}
