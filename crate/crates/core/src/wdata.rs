//! Weighted point sets and the linear-algebra kernel used by the filter.
//!
//! A [`PointSet`] is immutable once built; all algorithm state lives in
//! [`WeightFn`] values that attach a weight in `[0, 1]` to every point.
//! Weighted covariance is applied implicitly (`O(n·d)` per product) and the
//! top eigenpair is approximated by seeded power iteration.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Tolerance on `‖v‖₂ = 1` for directions handed to the kernel.
pub const UNIT_TOLERANCE: f64 = 1e-9;

/// Relative threshold (against the squared max coordinate) under which the
/// top eigenvalue is treated as zero.
pub const DEGENERATE_THRESHOLD: f64 = 1e-12;

/// `n` points in `R^d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    data: Vec<f64>,
    n: usize,
    d: usize,
}

impl PointSet {
    pub fn from_flat(data: Vec<f64>, d: usize) -> Result<Self> {
        if d == 0 || data.is_empty() {
            return Err(Error::EmptyPointSet);
        }
        if !data.len().is_multiple_of(d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: data.len() % d,
            });
        }
        let n = data.len() / d;
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinitePoint { index: pos / d });
        }
        Ok(Self { data, n, d })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let d = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * d);
        for row in rows {
            let row = row.as_ref();
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_flat(data, d)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.d)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Multiplies every coordinate by `factor`.
    pub fn scaled(&self, factor: f64) -> PointSet {
        PointSet {
            data: self.data.iter().map(|x| x * factor).collect(),
            n: self.n,
            d: self.d,
        }
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }
}

/// Per-point weights in `[0, 1]` with a cached total.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightFn {
    weights: Vec<f64>,
    total: f64,
}

impl WeightFn {
    /// The all-ones weight function.
    pub fn uniform(n: usize) -> Self {
        Self {
            weights: vec![1.0; n],
            total: n as f64,
        }
    }

    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(0.0..=1.0).contains(*w))
        {
            return Err(Error::InvalidWeight { index, value });
        }
        Ok(Self::from_valid(weights))
    }

    /// Indicator weights of a boolean mask.
    pub fn from_mask(mask: &[bool]) -> Self {
        Self::from_valid(mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect())
    }

    pub(crate) fn from_valid(weights: Vec<f64>) -> Self {
        let total = weights.iter().sum();
        Self { weights, total }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn get(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn support_len(&self) -> usize {
        self.weights.iter().filter(|&&w| w > 0.0).count()
    }

    /// Weight carried by the points selected by `mask`.
    pub fn mass_on(&self, mask: &[bool]) -> f64 {
        self.weights
            .iter()
            .zip(mask)
            .filter(|(_, &m)| m)
            .map(|(w, _)| w)
            .sum()
    }

    /// `w · 1[keep(i)]`.
    pub fn restricted(&self, keep: impl Fn(usize) -> bool) -> WeightFn {
        Self::from_valid(
            self.weights
                .iter()
                .enumerate()
                .map(|(i, &w)| if keep(i) { w } else { 0.0 })
                .collect(),
        )
    }

    fn check_against(&self, ps: &PointSet) -> Result<()> {
        if self.weights.len() != ps.len() {
            return Err(Error::WeightLength {
                expected: ps.len(),
                actual: self.weights.len(),
            });
        }
        if self.total <= 0.0 {
            return Err(Error::ZeroTotalWeight);
        }
        Ok(())
    }
}

/// Approximate top eigenpair of a weighted covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    /// Rayleigh quotient of `direction`; never exceeds the true top eigenvalue.
    pub value: f64,
    pub direction: Vec<f64>,
    /// Set when the covariance is numerically zero; `direction` is arbitrary then.
    pub degenerate: bool,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn check_unit(v: &[f64], d: usize) -> Result<()> {
    if v.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: v.len(),
        });
    }
    let nrm = norm(v);
    if !((nrm - 1.0).abs() <= UNIT_TOLERANCE) {
        return Err(Error::NonUnitVector { norm: nrm });
    }
    Ok(())
}

pub fn project(ps: &PointSet, v: &[f64]) -> Result<Vec<f64>> {
    check_unit(v, ps.dim())?;
    Ok(ps.rows().map(|x| dot(x, v)).collect())
}

pub fn weighted_mean(ps: &PointSet, w: &WeightFn) -> Result<Vec<f64>> {
    w.check_against(ps)?;
    let mut acc = vec![0.0; ps.dim()];
    for (x, &wi) in ps.rows().zip(w.as_slice()) {
        if wi > 0.0 {
            for (a, xi) in acc.iter_mut().zip(x) {
                *a += wi * xi;
            }
        }
    }
    let total = w.total();
    acc.iter_mut().for_each(|a| *a /= total);
    Ok(acc)
}

/// Weighted mean and variance of scalar values, two-pass.
///
/// Returns `None` when the weights carry no mass.
pub fn weighted_moments(values: &[f64], weights: &[f64]) -> Option<(f64, f64)> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let mean = values.iter().zip(weights).map(|(x, w)| w * x).sum::<f64>() / total;
    let var = values
        .iter()
        .zip(weights)
        .map(|(x, w)| w * (x - mean) * (x - mean))
        .sum::<f64>()
        / total;
    Some((mean, var))
}

pub fn weighted_variance_along(ps: &PointSet, w: &WeightFn, v: &[f64]) -> Result<f64> {
    w.check_against(ps)?;
    let proj = project(ps, v)?;
    weighted_moments(&proj, w.as_slice())
        .map(|(_, var)| var)
        .ok_or(Error::ZeroTotalWeight)
}

/// `Σ_{T,w} · u` via two weighted passes, without forming the `d × d` matrix.
pub fn cov_matvec(ps: &PointSet, w: &WeightFn, u: &[f64]) -> Result<Vec<f64>> {
    if u.len() != ps.dim() {
        return Err(Error::DimensionMismatch {
            expected: ps.dim(),
            actual: u.len(),
        });
    }
    let mean = weighted_mean(ps, w)?;
    Ok(centered_matvec(ps, w, &mean, u))
}

fn centered_matvec(ps: &PointSet, w: &WeightFn, mean: &[f64], u: &[f64]) -> Vec<f64> {
    let d = ps.dim();
    let mut out = vec![0.0; d];
    let mut centered = vec![0.0; d];
    for (x, &wi) in ps.rows().zip(w.as_slice()) {
        if wi > 0.0 {
            for ((c, xi), m) in centered.iter_mut().zip(x).zip(mean) {
                *c = xi - m;
            }
            let s = wi * dot(&centered, u);
            for (o, c) in out.iter_mut().zip(&centered) {
                *o += s * c;
            }
        }
    }
    let total = w.total();
    out.iter_mut().for_each(|o| *o /= total);
    out
}

/// Dense weighted covariance, row-major `d × d`.
pub fn weighted_covariance(ps: &PointSet, w: &WeightFn) -> Result<Vec<f64>> {
    let mean = weighted_mean(ps, w)?;
    let d = ps.dim();
    let mut cov = vec![0.0; d * d];
    let mut centered = vec![0.0; d];
    for (x, &wi) in ps.rows().zip(w.as_slice()) {
        if wi > 0.0 {
            for ((c, xi), m) in centered.iter_mut().zip(x).zip(&mean) {
                *c = xi - m;
            }
            for r in 0..d {
                let s = wi * centered[r];
                let row = &mut cov[r * d..r * d + r + 1];
                for (entry, c) in row.iter_mut().zip(&centered) {
                    *entry += s * c;
                }
            }
        }
    }
    let total = w.total();
    for r in 0..d {
        for c in 0..=r {
            let v = cov[r * d + c] / total;
            cov[r * d + c] = v;
            cov[c * d + r] = v;
        }
    }
    Ok(cov)
}

/// Number of power-iteration steps, `⌈24·ln(d/δ)⌉`.
pub fn power_iterations(d: usize, delta: f64) -> usize {
    let steps = (24.0 * (d as f64 / delta).ln()).ceil();
    if steps.is_finite() && steps >= 1.0 {
        steps as usize
    } else {
        1
    }
}

/// How the covariance is applied during power iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CovarianceRoute {
    /// Dense when forming the matrix (`n·d²`) is cheaper than the implicit
    /// products (`iterations·n·d`), implicit otherwise.
    #[default]
    Auto,
    Implicit,
    Dense,
}

/// Approximate top eigenpair of `Cov_w[T]` with the default route.
pub fn approx_top_eigenpair<R: Rng + ?Sized>(
    ps: &PointSet,
    w: &WeightFn,
    delta: f64,
    rng: &mut R,
) -> Result<EigenPair> {
    approx_top_eigenpair_with(ps, w, delta, CovarianceRoute::Auto, rng)
}

/// Seeded convenience wrapper around [`approx_top_eigenpair`].
pub fn approx_top_eigenpair_seeded(
    ps: &PointSet,
    w: &WeightFn,
    delta: f64,
    seed: u64,
) -> Result<EigenPair> {
    approx_top_eigenpair(ps, w, delta, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn approx_top_eigenpair_with<R: Rng + ?Sized>(
    ps: &PointSet,
    w: &WeightFn,
    delta: f64,
    route: CovarianceRoute,
    rng: &mut R,
) -> Result<EigenPair> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param("delta", format!("{delta} not in (0, 1)")));
    }
    w.check_against(ps)?;
    let d = ps.dim();
    let iters = power_iterations(d, delta);

    let mut u: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let start_norm = norm(&u);
    u.iter_mut().for_each(|x| *x /= start_norm);

    let dense = match route {
        CovarianceRoute::Dense => true,
        CovarianceRoute::Implicit => false,
        CovarianceRoute::Auto => d <= iters,
    };

    let mean = weighted_mean(ps, w)?;
    let cov = if dense {
        Some(weighted_covariance(ps, w)?)
    } else {
        None
    };
    let apply = |u: &[f64]| -> Vec<f64> {
        match &cov {
            Some(m) => m.chunks_exact(d).map(|row| dot(row, u)).collect(),
            None => centered_matvec(ps, w, &mean, u),
        }
    };

    for _ in 0..iters {
        let next = apply(&u);
        let nrm = norm(&next);
        if !(nrm > 0.0 && nrm.is_finite()) {
            break;
        }
        u = next.into_iter().map(|x| x / nrm).collect();
    }
    let nrm = norm(&u);
    u.iter_mut().for_each(|x| *x /= nrm);

    let value = weighted_variance_along(ps, w, &u)?;
    let max_abs = ps
        .rows()
        .zip(w.as_slice())
        .filter(|(_, &wi)| wi > 0.0)
        .flat_map(|(x, _)| x.iter())
        .fold(0.0_f64, |m, x| m.max(x.abs()));
    let degenerate = value <= DEGENERATE_THRESHOLD * max_abs * max_abs;

    Ok(EigenPair {
        value,
        direction: u,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ps(rows: &[&[f64]]) -> PointSet {
        PointSet::from_rows(rows).unwrap()
    }

    #[test]
    fn project_axis_and_dot() {
        let p = ps(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert_eq!(project(&p, &[1.0, 0.0]).unwrap(), vec![1.0, 0.0]);
        let q = ps(&[&[3.0, 4.0]]);
        let out = project(&q, &[0.6, 0.8]).unwrap();
        assert!((out[0] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn project_rejects_bad_direction() {
        let p = ps(&[&[1.0, 0.0]]);
        assert!(matches!(
            project(&p, &[1.0, 1.0]),
            Err(Error::NonUnitVector { .. })
        ));
        assert!(matches!(
            project(&p, &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn point_set_validation() {
        assert!(matches!(
            PointSet::from_rows::<Vec<f64>>(&[]),
            Err(Error::EmptyPointSet)
        ));
        assert!(matches!(
            PointSet::from_rows(&[vec![1.0], vec![f64::NAN]]),
            Err(Error::NonFinitePoint { index: 1 })
        ));
        assert!(matches!(
            PointSet::from_rows(&[vec![1.0, 2.0], vec![1.0]]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn weights_validated_and_total_cached() {
        assert!(matches!(
            WeightFn::new(vec![0.5, 1.5]),
            Err(Error::InvalidWeight { index: 1, .. })
        ));
        assert!(WeightFn::new(vec![0.5, -0.0]).is_ok());
        let w = WeightFn::new(vec![0.25, 0.5, 1.0]).unwrap();
        assert_eq!(w.total(), 1.75);
        assert_eq!(w.support_len(), 3);
    }

    #[test]
    fn mean_examples() {
        let p = ps(&[&[0.0, 0.0], &[2.0, 2.0]]);
        assert_eq!(
            weighted_mean(&p, &WeightFn::uniform(2)).unwrap(),
            vec![1.0, 1.0]
        );
        let w = WeightFn::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(weighted_mean(&p, &w).unwrap(), vec![0.0, 0.0]);
        let zero = WeightFn::new(vec![0.0, 0.0]).unwrap();
        assert_eq!(weighted_mean(&p, &zero), Err(Error::ZeroTotalWeight));
    }

    #[test]
    fn variance_examples() {
        let p = ps(&[&[0.0], &[2.0]]);
        let var = weighted_variance_along(&p, &WeightFn::uniform(2), &[1.0]).unwrap();
        assert!((var - 1.0).abs() < 1e-15);
        let single = WeightFn::new(vec![0.0, 1.0]).unwrap();
        assert_eq!(weighted_variance_along(&p, &single, &[1.0]).unwrap(), 0.0);
    }

    #[test]
    fn cov_matvec_rank_one_and_zero() {
        let p = ps(&[&[1.0, 0.0], &[-1.0, 0.0]]);
        let out = cov_matvec(&p, &WeightFn::uniform(2), &[1.0, 0.0]).unwrap();
        assert_eq!(out, vec![1.0, 0.0]);
        let single = WeightFn::new(vec![1.0, 0.0]).unwrap();
        let out = cov_matvec(&p, &single, &[0.3, -2.0]).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn eigenpair_identical_points_is_degenerate() {
        let p = ps(&[&[3.0, -1.0], &[3.0, -1.0], &[3.0, -1.0]]);
        let e = approx_top_eigenpair_seeded(&p, &WeightFn::uniform(3), 0.01, 5).unwrap();
        assert!(e.degenerate);
        assert_eq!(e.value, 0.0);
        assert!((norm(&e.direction) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigenpair_rejects_bad_delta() {
        let p = ps(&[&[0.0], &[1.0]]);
        for delta in [0.0, 1.0, -0.5, f64::NAN] {
            assert!(approx_top_eigenpair_seeded(&p, &WeightFn::uniform(2), delta, 1).is_err());
        }
    }

    #[test]
    fn iteration_schedule() {
        assert_eq!(
            power_iterations(10, 0.01),
            (24.0_f64 * 1000.0_f64.ln()).ceil() as usize
        );
        assert!(power_iterations(1, 0.999) >= 1);
    }

    #[test]
    fn dense_and_implicit_routes_agree() {
        let p = ps(&[
            &[0.0, 1.0, 2.0],
            &[1.0, -1.0, 0.5],
            &[4.0, 0.0, 0.0],
            &[2.0, 2.0, 2.0],
        ]);
        let w = WeightFn::new(vec![1.0, 0.5, 0.25, 1.0]).unwrap();
        let mut r1 = ChaCha8Rng::seed_from_u64(9);
        let mut r2 = ChaCha8Rng::seed_from_u64(9);
        let a = approx_top_eigenpair_with(&p, &w, 1e-3, CovarianceRoute::Dense, &mut r1).unwrap();
        let b =
            approx_top_eigenpair_with(&p, &w, 1e-3, CovarianceRoute::Implicit, &mut r2).unwrap();
        assert!((a.value - b.value).abs() < 1e-10 * a.value.max(1.0));
    }
}
