//! Worklist driver: rescale, run the main subroutine on every live branch,
//! prune light branches and collect certified means.

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::multifilter::{basic_multifilter, MultifilterOutcome, OutcomeTag};
use crate::wdata::{approx_top_eigenpair, weighted_mean, EigenPair, PointSet, WeightFn};

/// Algorithm constants. `alpha` is the guaranteed inlier fraction.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub alpha: f64,
    /// Known bound on the inlier covariance, `Σ ⪯ σ²I`.
    pub sigma: f64,
    /// Rescale constant; points are divided by `scale_c·sigma`.
    pub scale_c: f64,
    /// Multifilter variance constant.
    pub big_c: f64,
    pub seed: u64,
    /// Overall eigensolver failure budget; each call gets `power_delta / n`.
    pub power_delta: f64,
    pub trace: bool,
}

impl RunConfig {
    pub const DEFAULT_SCALE_C: f64 = 2.0;
    pub const DEFAULT_BIG_C: f64 = 20.0;
    pub const DEFAULT_POWER_DELTA: f64 = 0.01;

    pub fn new(alpha: f64) -> Self {
        Self {
            alpha,
            sigma: 1.0,
            scale_c: Self::DEFAULT_SCALE_C,
            big_c: Self::DEFAULT_BIG_C,
            seed: 0,
            power_delta: Self::DEFAULT_POWER_DELTA,
            trace: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(Error::param(
                "alpha",
                format!("{} not in (0, 1/2)", self.alpha),
            ));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::param(
                "sigma",
                format!("{} must be positive", self.sigma),
            ));
        }
        if !(self.scale_c >= 1.0 && self.scale_c.is_finite()) {
            return Err(Error::param(
                "scale_c",
                format!("{} must be >= 1", self.scale_c),
            ));
        }
        if !(self.big_c > 0.0 && self.big_c.is_finite()) {
            return Err(Error::param(
                "big_c",
                format!("{} must be positive", self.big_c),
            ));
        }
        if !(self.power_delta > 0.0 && self.power_delta < 1.0) {
            return Err(Error::param(
                "power_delta",
                format!("{} not in (0, 1)", self.power_delta),
            ));
        }
        Ok(())
    }

    /// `scale_c · sigma`.
    pub fn scale_factor(&self) -> f64 {
        self.scale_c * self.sigma
    }
}

/// Candidate means, in input coordinates once returned by the driver.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HypothesisList(pub Vec<Vec<f64>>);

impl HypothesisList {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Vec<f64>> {
        self.0.iter()
    }

    pub fn into_inner(self) -> Vec<Vec<f64>> {
        self.0
    }
}

impl From<Vec<Vec<f64>>> for HypothesisList {
    fn from(v: Vec<Vec<f64>>) -> Self {
        Self(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchState {
    pub id: usize,
    pub parent: Option<usize>,
    pub weights: WeightFn,
    pub depth: usize,
    pub lineage: Vec<OutcomeTag>,
}

impl BranchState {
    pub fn root(n: usize) -> Self {
        Self {
            id: 0,
            parent: None,
            weights: WeightFn::uniform(n),
            depth: 0,
            lineage: Vec::new(),
        }
    }
}

/// One row per (branch, child) pair: a certified branch emits a single row
/// with no child; a reweighted or split branch emits one row per child,
/// including pruned ones.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEvent {
    pub branch_id: usize,
    pub parent_id: Option<usize>,
    /// Id of the admitted child this row describes; `None` if certified or pruned.
    pub child_id: Option<usize>,
    pub depth: usize,
    pub tag: OutcomeTag,
    pub lambda_star: f64,
    pub wt_before: f64,
    pub wt_after: f64,
    pub ws_before: Option<f64>,
    pub ws_after: Option<f64>,
}

impl TraceEvent {
    pub fn pruned(&self) -> bool {
        self.tag != OutcomeTag::Certified && self.child_id.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SubroutineOutput {
    Hypothesis(Vec<f64>),
    Children(Vec<BranchState>),
}

/// Everything one main-subroutine call computed.
#[derive(Debug, Clone)]
pub struct SubroutineStep {
    pub eigen: EigenPair,
    pub outcome: MultifilterOutcome,
    /// Per child of `outcome`, whether it met the `α·n/2` weight floor.
    pub admitted: Vec<bool>,
    pub output: SubroutineOutput,
}

/// Borrowed view of a processed branch, handed to run observers.
pub struct StepView<'a> {
    pub points: &'a PointSet,
    pub branch: &'a BranchState,
    pub step: &'a SubroutineStep,
    /// Σ w(T)² over certified and live branches after this step.
    pub frontier_potential: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunStats {
    pub subroutine_calls: usize,
    pub branches: usize,
    pub certified: usize,
    pub reweighted: usize,
    pub splits: usize,
    pub pruned: usize,
    pub max_depth: usize,
    pub max_live: usize,
    pub max_frontier_potential: f64,
}

#[derive(Debug, Clone)]
pub struct DecodeRun {
    pub hypotheses: HypothesisList,
    pub trace: Vec<TraceEvent>,
    pub stats: RunStats,
}

pub fn preprocess_rescale(points: &PointSet, cfg: &RunConfig) -> Result<PointSet> {
    if !(cfg.sigma > 0.0 && cfg.sigma.is_finite()) {
        return Err(Error::param(
            "sigma",
            format!("{} must be positive", cfg.sigma),
        ));
    }
    if !(cfg.scale_c >= 1.0) {
        return Err(Error::param(
            "scale_c",
            format!("{} must be >= 1", cfg.scale_c),
        ));
    }
    Ok(points.scaled(1.0 / cfg.scale_factor()))
}

pub fn postprocess_unscale(hyps: &HypothesisList, cfg: &RunConfig) -> HypothesisList {
    let factor = cfg.scale_factor();
    HypothesisList(
        hyps.iter()
            .map(|h| h.iter().map(|x| x * factor).collect())
            .collect(),
    )
}

/// Weight floor `α·n/2` below which branches are dropped.
pub fn prune_threshold(alpha: f64, n: usize) -> f64 {
    alpha * n as f64 / 2.0
}

fn branch_rng(cfg: &RunConfig, branch_id: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(branch_id as u64);
    rng
}

/// One call of the main subroutine on an already rescaled point set.
///
/// Children that survive pruning receive consecutive ids starting at
/// `*next_id`.
pub fn main_subroutine(
    ps: &PointSet,
    branch: &BranchState,
    cfg: &RunConfig,
    next_id: &mut usize,
) -> Result<SubroutineStep> {
    let n = ps.len();
    let delta = cfg.power_delta / n as f64;
    let eigen = approx_top_eigenpair(ps, &branch.weights, delta, &mut branch_rng(cfg, branch.id))?;

    let outcome = basic_multifilter(ps, &branch.weights, &eigen.direction, cfg.alpha, cfg.big_c)
        .map_err(|e| match e {
            Error::InfeasibleSplit {
                total_weight,
                truncated_variance,
                candidates,
                ..
            } => Error::InfeasibleSplit {
                total_weight,
                truncated_variance,
                candidates,
                lineage: branch.lineage.clone(),
            },
            other => other,
        })?;

    let floor = prune_threshold(cfg.alpha, n);
    let (admitted, output) = match &outcome {
        MultifilterOutcome::Certified => (
            Vec::new(),
            SubroutineOutput::Hypothesis(weighted_mean(ps, &branch.weights)?),
        ),
        other => {
            let tag = other.tag();
            let mut admitted = Vec::new();
            let mut children = Vec::new();
            for child in other.children() {
                let keep = child.total() >= floor;
                admitted.push(keep);
                if keep {
                    let mut lineage = branch.lineage.clone();
                    lineage.push(tag);
                    children.push(BranchState {
                        id: *next_id,
                        parent: Some(branch.id),
                        weights: child.clone(),
                        depth: branch.depth + 1,
                        lineage,
                    });
                    *next_id += 1;
                }
            }
            (admitted, SubroutineOutput::Children(children))
        }
    };

    Ok(SubroutineStep {
        eigen,
        outcome,
        admitted,
        output,
    })
}

pub fn list_decode_mean(
    points: &PointSet,
    cfg: &RunConfig,
    inlier_mask: Option<&[bool]>,
) -> Result<DecodeRun> {
    list_decode_mean_observed(points, cfg, inlier_mask, |_| {})
}

/// [`list_decode_mean`] with a callback invoked after every subroutine call.
pub fn list_decode_mean_observed(
    points: &PointSet,
    cfg: &RunConfig,
    inlier_mask: Option<&[bool]>,
    mut observer: impl FnMut(&StepView<'_>),
) -> Result<DecodeRun> {
    cfg.validate()?;
    let n = points.len();
    if let Some(mask) = inlier_mask {
        if mask.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: mask.len(),
            });
        }
    }
    let ps = preprocess_rescale(points, cfg)?;

    let mut worklist = VecDeque::from([BranchState::root(n)]);
    let mut next_id = 1;
    let mut certified_potential = 0.0;
    let mut hypotheses = Vec::new();
    let mut trace = Vec::new();
    let mut stats = RunStats {
        branches: 1,
        max_live: 1,
        max_frontier_potential: (n * n) as f64,
        ..RunStats::default()
    };

    while let Some(branch) = worklist.pop_front() {
        let step = main_subroutine(&ps, &branch, cfg, &mut next_id)?;
        stats.subroutine_calls += 1;
        stats.max_depth = stats.max_depth.max(branch.depth);

        let wt_before = branch.weights.total();
        let ws_before = inlier_mask.map(|m| branch.weights.mass_on(m));
        let tag = step.outcome.tag();
        let event = |child_id, wt_after, ws_after| TraceEvent {
            branch_id: branch.id,
            parent_id: branch.parent,
            child_id,
            depth: branch.depth,
            tag,
            lambda_star: step.eigen.value,
            wt_before,
            wt_after,
            ws_before,
            ws_after,
        };

        match &step.output {
            SubroutineOutput::Hypothesis(mean) => {
                stats.certified += 1;
                certified_potential += wt_before * wt_before;
                hypotheses.push(mean.clone());
                if cfg.trace {
                    trace.push(event(None, wt_before, ws_before));
                }
            }
            SubroutineOutput::Children(children) => {
                match tag {
                    OutcomeTag::Split => stats.splits += 1,
                    _ => stats.reweighted += 1,
                }
                stats.pruned += step.admitted.iter().filter(|&&a| !a).count();
                stats.branches += children.len();
                if cfg.trace {
                    let mut admitted_iter = children.iter();
                    for (child, &kept) in step.outcome.children().into_iter().zip(&step.admitted) {
                        let child_id = if kept {
                            admitted_iter.next().map(|c| c.id)
                        } else {
                            None
                        };
                        let ws_after = inlier_mask.map(|m| child.mass_on(m));
                        trace.push(event(child_id, child.total(), ws_after));
                    }
                }
                worklist.extend(children.iter().cloned());
            }
        }

        let live: f64 = worklist
            .iter()
            .map(|b| b.weights.total() * b.weights.total())
            .sum();
        let frontier_potential = certified_potential + live;
        stats.max_frontier_potential = stats.max_frontier_potential.max(frontier_potential);
        stats.max_live = stats.max_live.max(worklist.len());

        observer(&StepView {
            points: &ps,
            branch: &branch,
            step: &step,
            frontier_potential,
        });
    }

    if hypotheses.is_empty() {
        if let Some(mask) = inlier_mask {
            if inliers_look_representative(&ps, mask, cfg)? {
                return Err(Error::NoHypothesis);
            }
        }
    }

    Ok(DecodeRun {
        hypotheses: postprocess_unscale(&HypothesisList(hypotheses), cfg),
        trace,
        stats,
    })
}

/// Checks the masked subset for `|S| ≥ α·n` and an estimated covariance
/// norm of at most 1 in rescaled units.
fn inliers_look_representative(ps: &PointSet, mask: &[bool], cfg: &RunConfig) -> Result<bool> {
    let w = WeightFn::from_mask(mask);
    if w.total() < cfg.alpha * ps.len() as f64 || w.total() == 0.0 {
        return Ok(false);
    }
    let eigen = approx_top_eigenpair(ps, &w, cfg.power_delta, &mut branch_rng(cfg, usize::MAX))?;
    Ok(eigen.value <= 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(alpha: f64) -> RunConfig {
        RunConfig::new(alpha)
    }

    #[test]
    fn config_validation() {
        assert!(cfg(0.2).validate().is_ok());
        for bad in [0.0, 0.5, 0.6, -0.1, f64::NAN] {
            assert!(cfg(bad).validate().is_err(), "alpha {bad}");
        }
        let mut c = cfg(0.2);
        c.sigma = 0.0;
        assert!(c.validate().is_err());
        let mut c = cfg(0.2);
        c.scale_c = 0.5;
        assert!(c.validate().is_err());
        let mut c = cfg(0.2);
        c.big_c = -1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn rescale_examples() {
        let mut c = cfg(0.2);
        c.sigma = 2.0;
        c.scale_c = 2.0;
        let ps = PointSet::from_rows(&[vec![4.0, 8.0]]).unwrap();
        assert_eq!(preprocess_rescale(&ps, &c).unwrap().point(0), &[1.0, 2.0]);
        let half = PointSet::from_rows(&[vec![2.0, 4.0]]).unwrap();
        assert_eq!(preprocess_rescale(&half, &c).unwrap().point(0), &[0.5, 1.0]);
        let back = postprocess_unscale(&HypothesisList(vec![vec![0.5, 1.0]]), &c);
        assert_eq!(back.0, vec![vec![2.0, 4.0]]);

        let mut ident = cfg(0.2);
        ident.scale_c = 1.0;
        assert_eq!(preprocess_rescale(&ps, &ident).unwrap(), ps);
        assert!(postprocess_unscale(&HypothesisList::default(), &c).is_empty());

        c.sigma = -1.0;
        assert!(preprocess_rescale(&ps, &c).is_err());
    }

    #[test]
    fn single_point_gives_itself() {
        let ps = PointSet::from_rows(&[vec![3.5, -2.0, 7.0]]).unwrap();
        let run = list_decode_mean(&ps, &cfg(0.3), None).unwrap();
        assert_eq!(run.hypotheses.len(), 1);
        for (a, b) in run.hypotheses.0[0].iter().zip([3.5, -2.0, 7.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn split_children_are_pruned_by_weight() {
        // 90 points at 0 and 10 at 400 in rescaled units; alpha 0.3 puts the
        // floor at 15, so the light side of any split disappears.
        let mut rows = vec![vec![0.0]; 90];
        rows.extend(vec![vec![800.0]; 10]);
        let ps = PointSet::from_rows(&rows).unwrap();
        let c = cfg(0.3);
        let scaled = preprocess_rescale(&ps, &c).unwrap();
        let mut next = 1;
        let step = main_subroutine(&scaled, &BranchState::root(100), &c, &mut next).unwrap();
        match step.outcome.tag() {
            OutcomeTag::Split => {
                assert_eq!(step.admitted.iter().filter(|&&a| a).count(), 1);
                let SubroutineOutput::Children(ch) = step.output else {
                    panic!()
                };
                assert_eq!(ch.len(), 1);
                assert_eq!(ch[0].depth, 1);
                assert_eq!(ch[0].lineage, vec![OutcomeTag::Split]);
            }
            other => panic!("expected split, got {other}"),
        }
    }

    #[test]
    fn trace_records_one_row_per_child() {
        let mut rows = vec![vec![0.0]; 50];
        rows.extend(vec![vec![200.0]; 50]);
        let ps = PointSet::from_rows(&rows).unwrap();
        let mask: Vec<bool> = (0..100).map(|i| i < 50).collect();
        let run = list_decode_mean(&ps, &cfg(0.2), Some(&mask)).unwrap();
        let root_rows: Vec<_> = run.trace.iter().filter(|e| e.branch_id == 0).collect();
        assert_eq!(root_rows.len(), 2);
        assert!(root_rows.iter().all(|e| e.tag == OutcomeTag::Split));
        assert_eq!(run.hypotheses.len(), 2);
        for e in &run.trace {
            assert!(e.ws_after.unwrap() <= e.wt_after + 1e-12);
        }
    }

    #[test]
    fn disabling_trace_keeps_hypotheses() {
        let mut rows = vec![vec![0.0, 1.0]; 40];
        rows.extend(vec![vec![300.0, 1.0]; 40]);
        let ps = PointSet::from_rows(&rows).unwrap();
        let mut c = cfg(0.25);
        let with = list_decode_mean(&ps, &c, None).unwrap();
        c.trace = false;
        let without = list_decode_mean(&ps, &c, None).unwrap();
        assert!(without.trace.is_empty());
        assert_eq!(with.hypotheses, without.hypotheses);
    }

    #[test]
    fn mask_length_checked() {
        let ps = PointSet::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        assert!(list_decode_mean(&ps, &cfg(0.2), Some(&[true])).is_err());
    }
}
