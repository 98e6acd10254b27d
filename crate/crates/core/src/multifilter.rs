//! One multifilter step along a fixed direction.
//!
//! Given projections `v·x` and the current weights, the step either
//! certifies the weighted mean, softly downweights points outside a quantile
//! interval, or splits the weight function into two overlapping children.
//! Every threshold constant uses base-2 logarithms.

use std::fmt;

use crate::error::{Error, Result};
use crate::wdata::{project, weighted_moments, PointSet, WeightFn};

/// Relative slack on the square-sum split condition used for the single
/// retry after an exact search fails.
pub const SPLIT_RETRY_SLACK: f64 = 1e-9;

/// Constant in the minimum-loss split condition, `48·lg(2/α)/R²`.
pub const SPLIT_LOSS_CONSTANT: f64 = 48.0;

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= hi) {
            return Err(Error::param("interval", format!("[{lo}, {hi}] is empty")));
        }
        Ok(Self { lo, hi })
    }

    pub fn center(&self) -> f64 {
        (self.lo + self.hi) / 2.0
    }

    pub fn half_width(&self) -> f64 {
        (self.hi - self.lo) / 2.0
    }

    /// `[t − 2R, t + 2R]`.
    pub fn doubled(&self) -> Interval {
        let t = self.center();
        let r = self.half_width();
        Interval {
            lo: (t - 2.0 * r).min(self.lo),
            hi: (t + 2.0 * r).max(self.hi),
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// Squared distance from `x` to the interval.
    pub fn sq_distance(&self, x: f64) -> f64 {
        if x < self.lo {
            (self.lo - x) * (self.lo - x)
        } else if x > self.hi {
            (x - self.hi) * (x - self.hi)
        } else {
            0.0
        }
    }
}

/// Split boundaries. The first child keeps `v·x ≥ lower`, the second keeps
/// `v·x < upper`; `center ± half_width` reproduces the boundaries up to rounding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitParams {
    pub center: f64,
    pub half_width: f64,
    pub lower: f64,
    pub upper: f64,
}

impl SplitParams {
    fn from_bounds(lower: f64, upper: f64) -> Self {
        Self {
            center: (lower + upper) / 2.0,
            half_width: (upper - lower) / 2.0,
            lower,
            upper,
        }
    }

    pub fn in_first(&self, p: f64) -> bool {
        p >= self.lower
    }

    pub fn in_second(&self, p: f64) -> bool {
        p < self.upper
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OutcomeTag {
    Certified,
    Reweighted,
    Split,
}

impl OutcomeTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            OutcomeTag::Certified => "certified",
            OutcomeTag::Reweighted => "reweighted",
            OutcomeTag::Split => "split",
        }
    }
}

impl fmt::Display for OutcomeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MultifilterOutcome {
    Certified,
    Reweighted(WeightFn),
    Split {
        first: WeightFn,
        second: WeightFn,
        params: SplitParams,
    },
}

impl MultifilterOutcome {
    pub fn tag(&self) -> OutcomeTag {
        match self {
            MultifilterOutcome::Certified => OutcomeTag::Certified,
            MultifilterOutcome::Reweighted(_) => OutcomeTag::Reweighted,
            MultifilterOutcome::Split { .. } => OutcomeTag::Split,
        }
    }

    /// Child weight functions in order (empty when certified).
    pub fn children(&self) -> Vec<&WeightFn> {
        match self {
            MultifilterOutcome::Certified => vec![],
            MultifilterOutcome::Reweighted(w) => vec![w],
            MultifilterOutcome::Split { first, second, .. } => vec![first, second],
        }
    }

    pub fn into_children(self) -> Vec<WeightFn> {
        match self {
            MultifilterOutcome::Certified => vec![],
            MultifilterOutcome::Reweighted(w) => vec![w],
            MultifilterOutcome::Split { first, second, .. } => vec![first, second],
        }
    }
}

/// `lg(2/α)`, the log factor shared by all thresholds.
pub fn log_factor(alpha: f64) -> f64 {
    (2.0 / alpha).log2()
}

/// Variance bound `C·lg(2/α)²` for the truncated test; certification uses twice this.
pub fn variance_threshold(alpha: f64, big_c: f64) -> f64 {
    let lg = log_factor(alpha);
    big_c * lg * lg
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param("alpha", format!("{alpha} not in (0, 1)")));
    }
    Ok(())
}

fn check_lengths(projections: &[f64], w: &WeightFn) -> Result<()> {
    if projections.len() != w.len() {
        return Err(Error::WeightLength {
            expected: projections.len(),
            actual: w.len(),
        });
    }
    Ok(())
}

/// Distinct supported projection values in increasing order with prefix
/// weights: `below[i]` is the weight strictly below `values[i]`, and
/// `below[m]` is the total.
struct SortedSupport {
    values: Vec<f64>,
    below: Vec<f64>,
}

impl SortedSupport {
    fn new(projections: &[f64], w: &WeightFn) -> Self {
        let mut pairs: Vec<(f64, f64)> = projections
            .iter()
            .zip(w.as_slice())
            .filter(|(_, &wi)| wi > 0.0)
            .map(|(&p, &wi)| (p, wi))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut values: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut mass: Vec<f64> = Vec::with_capacity(pairs.len());
        for (p, wi) in pairs {
            if values.last() == Some(&p) {
                *mass.last_mut().unwrap() += wi;
            } else {
                values.push(p);
                mass.push(wi);
            }
        }
        let mut below = Vec::with_capacity(values.len() + 1);
        let mut acc = 0.0;
        below.push(acc);
        for m in mass {
            acc += m;
            below.push(acc);
        }
        Self { values, below }
    }

    fn len(&self) -> usize {
        self.values.len()
    }

    fn total(&self) -> f64 {
        self.below[self.values.len()]
    }
}

/// Quantile interval `[a, b]`: `a` is the largest value with at most
/// `α·w(T)/8` weight strictly below it, `b` symmetric from above.
pub fn quantile_interval(projections: &[f64], w: &WeightFn, alpha: f64) -> Result<Interval> {
    check_lengths(projections, w)?;
    check_alpha(alpha)?;
    if !(w.total() > 0.0) {
        return Err(Error::ZeroTotalWeight);
    }
    let support = SortedSupport::new(projections, w);
    let total = support.total();
    let tail = alpha * total / 8.0;
    let m = support.len();

    // below[i + 1] is the weight at or below values[i].
    let lo_idx = support.below[1..]
        .partition_point(|&s| s <= tail)
        .min(m - 1);
    // total − below[j] is the weight at or above values[j].
    let hi_idx = support.below[..m]
        .partition_point(|&s| total - s > tail)
        .saturating_sub(1);

    Ok(Interval {
        lo: support.values[lo_idx],
        hi: support.values[hi_idx.max(lo_idx)],
    })
}

/// Weighted variance of the projections that fall inside `window`.
pub fn truncated_variance(projections: &[f64], w: &WeightFn, window: Interval) -> Result<f64> {
    check_lengths(projections, w)?;
    let (vals, weights): (Vec<f64>, Vec<f64>) = projections
        .iter()
        .zip(w.as_slice())
        .filter(|(&p, &wi)| wi > 0.0 && window.contains(p))
        .map(|(&p, &wi)| (p, wi))
        .unzip();
    weighted_moments(&vals, &weights)
        .map(|(_, var)| var)
        .ok_or(Error::ZeroWindowWeight {
            lo: window.lo,
            hi: window.hi,
        })
}

/// `w_new(x) = (1 − f(x)/max f)·w(x)` with `f` the squared distance to
/// `interval`; the maximum ranges over supported points only.
pub fn soft_downweight(projections: &[f64], w: &WeightFn, interval: Interval) -> Result<WeightFn> {
    check_lengths(projections, w)?;
    let f: Vec<f64> = projections
        .iter()
        .map(|&p| interval.sq_distance(p))
        .collect();
    let max_f = f
        .iter()
        .zip(w.as_slice())
        .filter(|(_, &wi)| wi > 0.0)
        .fold(0.0_f64, |m, (&fx, _)| m.max(fx));
    if !(max_f > 0.0) || !max_f.is_finite() {
        return Err(Error::DegenerateDownweight);
    }
    let weights = f
        .iter()
        .zip(w.as_slice())
        .map(|(&fx, &wi)| ((1.0 - fx / max_f) * wi).clamp(0.0, wi))
        .collect();
    Ok(WeightFn::from_valid(weights))
}

/// Both split conditions for child masses `first`, `second` out of `total`:
/// `first² + second² ≤ total²·(1 + slack)` and
/// `min(1 − first/total, 1 − second/total)·R² ≥ 48·lg(2/α)`.
pub fn split_conditions_hold(
    total: f64,
    first: f64,
    second: f64,
    half_width: f64,
    alpha: f64,
    slack: f64,
) -> bool {
    let loss = ((total - first) / total).min((total - second) / total);
    half_width > 0.0
        && first * first + second * second <= total * total * (1.0 + slack)
        && loss * half_width * half_width >= SPLIT_LOSS_CONSTANT * log_factor(alpha)
}

/// Smallest index in `lo..hi` at which a monotone predicate becomes true,
/// or `hi` if it never does.
fn first_true(mut lo: usize, mut hi: usize, pred: impl Fn(usize) -> bool) -> usize {
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}

/// Searches for split boundaries satisfying both split conditions.
///
/// The first child drops every supported value `≤ values[i−1]` and the
/// second drops every value `≥ values[j]`, for `1 ≤ i ≤ j < m`. For each
/// guess of the side attaining the minimum loss and its boundary, the
/// extreme compatible counterpart is located by binary search.
pub fn find_split(projections: &[f64], w: &WeightFn, alpha: f64) -> Option<SplitParams> {
    find_split_with_slack(projections, w, alpha, 0.0)
}

pub fn find_split_with_slack(
    projections: &[f64],
    w: &WeightFn,
    alpha: f64,
    slack: f64,
) -> Option<SplitParams> {
    if projections.len() != w.len() || !(alpha > 0.0 && alpha < 1.0) {
        return None;
    }
    let support = SortedSupport::new(projections, w);
    let m = support.len();
    if m < 2 {
        return None;
    }
    let total = support.total();
    let k = SPLIT_LOSS_CONSTANT * log_factor(alpha);

    let lower_at = |i: usize| support.values[i - 1].next_up();
    let half_width = |i: usize, j: usize| (support.values[j] - lower_at(i)) / 2.0;
    // Fraction shed by the first child (below the lower boundary) and by the second.
    let loss_first = |i: usize| support.below[i] / total;
    let loss_second = |j: usize| (total - support.below[j]) / total;
    let feasible = |i: usize, j: usize| {
        let r = half_width(i, j);
        r > 0.0
            && {
                let first = total - support.below[i];
                let second = support.below[j];
                first * first + second * second <= total * total * (1.0 + slack)
            }
            && loss_first(i).min(loss_second(j)) * r * r >= k
    };
    let params = |i: usize, j: usize| SplitParams::from_bounds(lower_at(i), support.values[j]);

    // The first child is the heavier one: fix i, take the smallest j that
    // makes the loss bound hold.
    for i in 1..m {
        let gc = loss_first(i);
        let j = first_true(i, m, |j| {
            let r = half_width(i, j);
            gc * r * r >= k
        });
        if j < m && feasible(i, j) {
            return Some(params(i, j));
        }
    }
    // The second child is the heavier one: fix j, take the largest i.
    for j in 1..m {
        let g = loss_second(j);
        let past = first_true(1, j + 1, |i| {
            let r = half_width(i, j);
            g * r * r < k
        });
        if past > 1 && feasible(past - 1, j) {
            return Some(params(past - 1, j));
        }
    }
    None
}

/// One multifilter step along the unit direction `v`.
pub fn basic_multifilter(
    ps: &PointSet,
    w: &WeightFn,
    v: &[f64],
    alpha: f64,
    big_c: f64,
) -> Result<MultifilterOutcome> {
    check_alpha(alpha)?;
    if !(big_c > 0.0) {
        return Err(Error::param("big_c", format!("{big_c} must be positive")));
    }
    if w.len() != ps.len() {
        return Err(Error::WeightLength {
            expected: ps.len(),
            actual: w.len(),
        });
    }
    let projections = project(ps, v)?;
    let interval = quantile_interval(&projections, w, alpha)?;
    let truncated = truncated_variance(&projections, w, interval.doubled())?;
    let threshold = variance_threshold(alpha, big_c);

    if truncated <= threshold {
        let (_, variance) =
            weighted_moments(&projections, w.as_slice()).ok_or(Error::ZeroTotalWeight)?;
        if variance <= 2.0 * threshold {
            return Ok(MultifilterOutcome::Certified);
        }
        return soft_downweight(&projections, w, interval).map(MultifilterOutcome::Reweighted);
    }

    let params = find_split(&projections, w, alpha)
        .or_else(|| find_split_with_slack(&projections, w, alpha, SPLIT_RETRY_SLACK))
        .ok_or_else(|| Error::InfeasibleSplit {
            total_weight: w.total(),
            truncated_variance: truncated,
            candidates: SortedSupport::new(&projections, w).len(),
            lineage: Vec::new(),
        })?;
    let first = w.restricted(|i| params.in_first(projections[i]));
    let second = w.restricted(|i| params.in_second(projections[i]));
    Ok(MultifilterOutcome::Split {
        first,
        second,
        params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(n: usize) -> WeightFn {
        WeightFn::uniform(n)
    }

    #[test]
    fn interval_doubling() {
        let i = Interval::new(1.0, 3.0).unwrap();
        let d = i.doubled();
        assert_eq!((d.lo, d.hi), (0.0, 4.0));
        assert!(d.contains(1.0) && d.contains(3.0));
        assert!(Interval::new(2.0, 1.0).is_err());
    }

    #[test]
    fn quantile_examples() {
        let p: Vec<f64> = (0..10).map(f64::from).collect();
        let i = quantile_interval(&p, &unit(10), 0.8).unwrap();
        assert_eq!((i.lo, i.hi), (1.0, 8.0));

        let w = WeightFn::new(vec![0.0, 1.0, 0.0]).unwrap();
        let i = quantile_interval(&[-4.0, 2.5, 9.0], &w, 0.3).unwrap();
        assert_eq!((i.lo, i.hi), (2.5, 2.5));

        let w = WeightFn::new(vec![1.0, 0.001]).unwrap();
        let i = quantile_interval(&[0.0, 100.0], &w, 0.4).unwrap();
        assert_eq!((i.lo, i.hi), (0.0, 0.0));
    }

    #[test]
    fn quantile_rejects_zero_weight() {
        let w = WeightFn::new(vec![0.0, 0.0]).unwrap();
        assert_eq!(
            quantile_interval(&[1.0, 2.0], &w, 0.2),
            Err(Error::ZeroTotalWeight)
        );
    }

    #[test]
    fn truncated_variance_examples() {
        let w = unit(3);
        assert_eq!(
            truncated_variance(&[4.0, 4.0, 4.0], &w, Interval { lo: 0.0, hi: 9.0 }).unwrap(),
            0.0
        );
        let v = truncated_variance(&[0.0, 2.0, 100.0], &w, Interval { lo: -1.0, hi: 3.0 }).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        assert!(matches!(
            truncated_variance(&[0.0, 2.0, 100.0], &w, Interval { lo: 10.0, hi: 20.0 }),
            Err(Error::ZeroWindowWeight { .. })
        ));
    }

    #[test]
    fn downweight_examples() {
        let i = Interval { lo: 0.0, hi: 1.0 };
        let out = soft_downweight(&[0.0, 10.0], &unit(2), i).unwrap();
        assert_eq!(out.as_slice(), &[1.0, 0.0]);

        let i = Interval { lo: 0.0, hi: 2.0 };
        let out = soft_downweight(&[0.0, 3.0, 6.0], &unit(3), i).unwrap();
        assert_eq!(out.as_slice(), &[1.0, 15.0 / 16.0, 0.0]);

        let w = WeightFn::new(vec![1.0, 1.0, 0.0]).unwrap();
        let i = Interval { lo: -1.0, hi: 1.0 };
        let out = soft_downweight(&[-5.0, 0.0, 5.0], &w, i).unwrap();
        assert_eq!(out.as_slice(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn downweight_degenerate() {
        let i = Interval { lo: -1.0, hi: 1.0 };
        assert_eq!(
            soft_downweight(&[0.0, 0.5], &unit(2), i),
            Err(Error::DegenerateDownweight)
        );
        // Points outside the interval but without weight do not count.
        let w = WeightFn::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(
            soft_downweight(&[0.0, 50.0], &w, i),
            Err(Error::DegenerateDownweight)
        );
    }

    #[test]
    fn split_two_clusters() {
        let mut p = vec![0.0; 50];
        p.extend(vec![100.0; 50]);
        let w = unit(100);
        let s = find_split(&p, &w, 0.2).expect("feasible");
        let first: f64 = p.iter().filter(|&&x| s.in_first(x)).count() as f64;
        let second: f64 = p.iter().filter(|&&x| s.in_second(x)).count() as f64;
        assert!(first * first + second * second <= 100.0 * 100.0);
        let loss = (1.0 - first / 100.0).min(1.0 - second / 100.0);
        assert!(loss * s.half_width * s.half_width >= 48.0 * 10f64.log2());
    }

    #[test]
    fn split_single_value_is_none() {
        assert_eq!(find_split(&[3.0; 20], &unit(20), 0.2), None);
        assert_eq!(find_split(&[], &unit(0), 0.2), None);
    }

    #[test]
    fn multifilter_certifies_tight_cloud() {
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|i| vec![((i * 37) % 200) as f64 / 100.0 - 1.0])
            .collect();
        let ps = PointSet::from_rows(&rows).unwrap();
        let out = basic_multifilter(&ps, &unit(200), &[1.0], 0.2, 20.0).unwrap();
        assert_eq!(out, MultifilterOutcome::Certified);
    }

    #[test]
    fn multifilter_splits_clusters() {
        let mut rows = vec![vec![0.0]; 50];
        rows.extend(vec![vec![100.0]; 50]);
        let ps = PointSet::from_rows(&rows).unwrap();
        let out = basic_multifilter(&ps, &unit(100), &[1.0], 0.2, 20.0).unwrap();
        let MultifilterOutcome::Split { first, second, .. } = out else {
            panic!("expected split, got {out:?}");
        };
        assert_eq!(first.total(), 50.0);
        assert_eq!(second.total(), 50.0);
    }

    #[test]
    fn multifilter_reweights_far_points() {
        let mut rows = vec![vec![0.0]; 96];
        rows.extend([vec![1e4], vec![1e4 - 1.0], vec![1e4 - 2.0], vec![1e4 - 3.0]]);
        let ps = PointSet::from_rows(&rows).unwrap();
        let out = basic_multifilter(&ps, &unit(100), &[1.0], 0.8, 20.0).unwrap();
        let MultifilterOutcome::Reweighted(nw) = out else {
            panic!("expected reweight, got {out:?}");
        };
        assert!(nw.as_slice()[..96].iter().all(|&x| x == 1.0));
        assert_eq!(nw.get(96), 0.0);
        assert!(nw.as_slice()[97..].iter().all(|&x| x <= 1e-3));

        let mut rows = vec![vec![0.0]; 96];
        rows.extend(vec![vec![1e4]; 4]);
        let ps = PointSet::from_rows(&rows).unwrap();
        let out = basic_multifilter(&ps, &unit(100), &[1.0], 0.8, 20.0).unwrap();
        let MultifilterOutcome::Reweighted(nw) = out else {
            panic!("expected reweight, got {out:?}");
        };
        assert!(nw.as_slice()[96..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn multifilter_validates_inputs() {
        let ps = PointSet::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        assert!(basic_multifilter(&ps, &unit(2), &[1.0], 1.5, 20.0).is_err());
        assert!(basic_multifilter(&ps, &unit(2), &[1.0], 0.2, 0.0).is_err());
        assert!(basic_multifilter(&ps, &unit(3), &[1.0], 0.2, 20.0).is_err());
    }
}
