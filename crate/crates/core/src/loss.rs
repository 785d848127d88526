//! Loss and bound-loss of a simplification, their empirical tail functions, the
//! online upper bound `beta` and the online characterization loop.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{
    clt_bounds, estimate_se, minmax_branch_bounds, BoundKind, BoundPair, BoundSpec,
};
use crate::error::{argument, Result};
use crate::reward::{sample_return, Models, RewardModel};
use crate::rng::{tag, RngStream};
use crate::simplification::{replicate_stream, simplified_return, SimplificationSpec};
use crate::tree::{BranchView, CoupledTrees};

/// Original and simplified returns of both policies on one branch pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReturnQuadruple {
    pub g: f64,
    pub g_prime: f64,
    pub g_tilde: f64,
    pub g_tilde_prime: f64,
}

/// What the online characterization sees of one branch pair. Carries no
/// original returns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OnlineSample {
    pub g_tilde: f64,
    pub l: f64,
    pub u: f64,
    pub g_tilde_prime: f64,
    pub l_prime: f64,
    pub u_prime: f64,
}

impl OnlineSample {
    pub fn new(
        g_tilde: f64,
        bounds: BoundPair,
        g_tilde_prime: f64,
        bounds_prime: BoundPair,
    ) -> Self {
        Self {
            g_tilde,
            l: bounds.l,
            u: bounds.u,
            g_tilde_prime,
            l_prime: bounds_prime.l,
            u_prime: bounds_prime.u,
        }
    }
}

/// Return lost by following the simplified preference on this sample.
pub fn loss(q: &ReturnQuadruple) -> f64 {
    if q.g_tilde > q.g_tilde_prime {
        (q.g_prime - q.g).max(0.0)
    } else if q.g_tilde < q.g_tilde_prime {
        (q.g - q.g_prime).max(0.0)
    } else {
        0.0
    }
}

/// Upper bound on [`loss`] from the simplified returns and their bounds.
pub fn bound_loss(s: &OnlineSample) -> f64 {
    if s.g_tilde > s.g_tilde_prime {
        (s.u_prime - s.l).max(0.0)
    } else if s.g_tilde < s.g_tilde_prime {
        (s.u - s.l_prime).max(0.0)
    } else {
        0.0
    }
}

/// Whether the bound-loss dominates the loss on this sample.
pub fn dominance_check(q: &ReturnQuadruple, s: &OnlineSample) -> bool {
    bound_loss(s) >= loss(q)
}

fn sorted(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(argument("no samples"));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(argument("samples contain NaN"));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

fn tail_of_sorted(sorted: &[f64], delta: f64) -> f64 {
    let above = sorted.len() - sorted.partition_point(|&x| x <= delta);
    above as f64 / sorted.len() as f64
}

/// Fraction of samples strictly greater than each grid value.
pub fn empirical_tdf(samples: &[f64], grid: &[f64]) -> Result<Vec<f64>> {
    let s = sorted(samples)?;
    Ok(grid.iter().map(|&d| tail_of_sorted(&s, d)).collect())
}

/// `min(1, tdf / (1 - alpha)^2 + 2 alpha - alpha^2)`.
pub fn beta(tdf: f64, alpha: f64) -> f64 {
    let keep = 1.0 - alpha;
    (tdf / (keep * keep) + 2.0 * alpha - alpha * alpha).min(1.0)
}

pub fn beta_curve(tdf: &[f64], alpha: f64) -> Vec<f64> {
    tdf.iter().map(|&t| beta(t, alpha)).collect()
}

/// Uniform grid `0, step, 2 step, ...` up to `max` inclusive.
pub fn delta_grid(step: f64, max: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(argument(format!("grid step must be positive, got {step}")));
    }
    if !(max >= 0.0 && max.is_finite()) {
        return Err(argument(format!(
            "grid end must be finite and nonnegative, got {max}"
        )));
    }
    let count = (max / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|i| i as f64 * step).collect())
}

/// Grid over `[0, max(samples) + 1]`.
pub fn delta_grid_for(samples: &[f64], step: f64) -> Result<Vec<f64>> {
    let max = samples.iter().copied().fold(0.0, f64::max);
    delta_grid(step, max + 1.0)
}

/// Simplified-return replicates of both policies on one branch pair.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchReplicates {
    pub leaf: u64,
    pub replicates: [Vec<f64>; 2],
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct OnlineTimings {
    /// Primary simplified return of both policies on every branch.
    pub simplified_seconds: f64,
    /// Remaining `m - 1` replicates and the bounds.
    pub bounds_seconds: f64,
}

/// Output of the online characterization. Computed from simplified quantities only.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OnlineReport {
    pub alpha: f64,
    pub samples: Vec<OnlineSample>,
    pub bound_losses: Vec<f64>,
    pub grid: Vec<f64>,
    pub pbloss_tdf: Vec<f64>,
    pub beta: Vec<f64>,
    /// `|mean g~ - mean g~'|` over branches.
    pub delta_star: f64,
    pub degenerate_branches: usize,
    pub timings: OnlineTimings,
}

impl OnlineReport {
    /// `beta` at an arbitrary `delta`, off the grid.
    pub fn beta_at(&self, delta: f64) -> f64 {
        let s = sorted(&self.bound_losses).expect("report holds samples");
        beta(tail_of_sorted(&s, delta), self.alpha)
    }

    pub fn pbloss_tdf_at(&self, delta: f64) -> f64 {
        tail_of_sorted(
            &sorted(&self.bound_losses).expect("report holds samples"),
            delta,
        )
    }
}

/// Summarize online samples: bound-losses, their tail function on a grid of
/// step `grid_step`, `beta` and `delta_star`.
pub fn characterize(
    samples: Vec<OnlineSample>,
    alpha: f64,
    grid_step: f64,
) -> Result<OnlineReport> {
    let bound_losses: Vec<f64> = samples.iter().map(bound_loss).collect();
    let grid = delta_grid_for(&bound_losses, grid_step)?;
    let pbloss_tdf = empirical_tdf(&bound_losses, &grid)?;
    let beta = beta_curve(&pbloss_tdf, alpha);
    let n = samples.len() as f64;
    let mean = samples.iter().map(|s| s.g_tilde).sum::<f64>() / n;
    let mean_prime = samples.iter().map(|s| s.g_tilde_prime).sum::<f64>() / n;
    Ok(OnlineReport {
        alpha,
        samples,
        bound_losses,
        grid,
        pbloss_tdf,
        beta,
        delta_star: (mean - mean_prime).abs(),
        degenerate_branches: 0,
        timings: OnlineTimings::default(),
    })
}

/// Normal bounds from one policy's replicates; replicate 0 is the primary.
pub fn clt_bounds_from_replicates(replicates: &[f64], spec: &BoundSpec) -> Result<BoundPair> {
    Ok(clt_bounds(replicates[0], estimate_se(replicates)?, spec))
}

/// Inputs of the online characterization.
#[derive(Debug, Clone)]
pub struct Characterization<'a> {
    pub trees: &'a CoupledTrees,
    pub simplification: SimplificationSpec,
    pub bounds: BoundSpec,
    pub models: &'a Models,
    pub reward: &'a RewardModel,
    /// Root of every simplification stream.
    pub stream: RngStream,
}

impl Characterization<'_> {
    /// Simplification stream of `policy` on branch `leaf`.
    pub fn branch_stream(&self, policy: usize, leaf: u64) -> RngStream {
        self.stream
            .derive(tag::SIMPLIFY)
            .derive(policy as u64)
            .derive(leaf)
    }

    fn replicate(&self, view: &BranchView<'_>, policy: usize, r: usize) -> Result<(f64, bool)> {
        let s = replicate_stream(self.branch_stream(policy, view.leaf), r);
        let out = simplified_return(view, &self.simplification, self.models, self.reward, s)?;
        Ok((out.value, out.degenerate))
    }

    /// Replicates `range` of both policies on every branch, in branch order.
    fn replicates(&self, range: std::ops::Range<usize>) -> Result<Vec<([Vec<f64>; 2], bool)>> {
        (0..self.trees.branch_count())
            .into_par_iter()
            .map(|k| {
                let pair = self.trees.branch(k);
                let mut degenerate = false;
                let mut out: [Vec<f64>; 2] = Default::default();
                for (p, view) in pair.views().into_iter().enumerate() {
                    for r in range.clone() {
                        let (v, d) = self.replicate(view, p, r)?;
                        degenerate |= d;
                        out[p].push(v);
                    }
                }
                Ok((out, degenerate))
            })
            .collect()
    }

    /// All simplified-return replicates, primary first.
    pub fn branch_replicates(&self) -> Result<(Vec<BranchReplicates>, OnlineTimings)> {
        let start = Instant::now();
        let primary = self.replicates(0..1)?;
        let simplified_seconds = start.elapsed().as_secs_f64();
        let start = Instant::now();
        let rest = match self.bounds.kind {
            BoundKind::Clt => Some(self.replicates(1..self.bounds.m)?),
            BoundKind::Minmax => None,
        };
        let mut out = Vec::with_capacity(primary.len());
        for (k, (first, d)) in primary.into_iter().enumerate() {
            let mut replicates = first;
            let mut degenerate = d;
            if let Some(rest) = &rest {
                for (r, extra) in replicates.iter_mut().zip(&rest[k].0) {
                    r.extend_from_slice(extra);
                }
                degenerate |= rest[k].1;
            }
            out.push(BranchReplicates {
                leaf: self.trees.leaves[k],
                replicates,
                degenerate,
            });
        }
        let bounds_seconds = start.elapsed().as_secs_f64();
        Ok((
            out,
            OnlineTimings {
                simplified_seconds,
                bounds_seconds,
            },
        ))
    }

    /// Online sample of branch `k` from its replicates.
    pub fn online_sample(&self, k: usize, reps: &BranchReplicates) -> Result<OnlineSample> {
        let [a, b] = &reps.replicates;
        let (ba, bb) = match self.bounds.kind {
            BoundKind::Clt => (
                clt_bounds_from_replicates(a, &self.bounds)?,
                clt_bounds_from_replicates(b, &self.bounds)?,
            ),
            BoundKind::Minmax => {
                let pair = self.trees.branch(k);
                (
                    minmax_branch_bounds(&pair.primary, a[0])?,
                    minmax_branch_bounds(&pair.alternative, b[0])?,
                )
            }
        };
        Ok(OnlineSample::new(a[0], ba, b[0], bb))
    }
}

/// Online characterization: simplified returns and bounds on every branch
/// pair, bound-loss tail function, `beta` and `delta_star`.
pub fn run_algorithm_1(c: &Characterization<'_>, grid_step: f64) -> Result<OnlineReport> {
    let (reps, mut timings) = c.branch_replicates()?;
    let start = Instant::now();
    let samples = reps
        .iter()
        .enumerate()
        .map(|(k, r)| c.online_sample(k, r))
        .collect::<Result<Vec<_>>>()?;
    timings.bounds_seconds += start.elapsed().as_secs_f64();
    let mut report = characterize(samples, c.bounds.alpha, grid_step)?;
    report.degenerate_branches = reps.iter().filter(|r| r.degenerate).count();
    report.timings = timings;
    Ok(report)
}

/// Original returns of both policies on every branch pair, in branch order.
pub fn original_returns(trees: &CoupledTrees, reward: &RewardModel) -> Result<Vec<[f64; 2]>> {
    (0..trees.branch_count())
        .into_par_iter()
        .map(|k| {
            let pair = trees.branch(k);
            Ok([
                sample_return(&pair.primary.transitions(), reward)?.value,
                sample_return(&pair.alternative.transitions(), reward)?.value,
            ])
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OfflineReport {
    pub quadruples: Vec<ReturnQuadruple>,
    pub losses: Vec<f64>,
    pub ploss_tdf: Vec<f64>,
    pub original_seconds: f64,
}

/// Losses from original returns paired with the online report's simplified
/// returns; tail function on the report's grid.
pub fn compute_ploss_offline(
    trees: &CoupledTrees,
    reward: &RewardModel,
    online: &OnlineReport,
) -> Result<OfflineReport> {
    let start = Instant::now();
    let originals = original_returns(trees, reward)?;
    let original_seconds = start.elapsed().as_secs_f64();
    let quadruples: Vec<ReturnQuadruple> = originals
        .iter()
        .zip(&online.samples)
        .map(|(g, s)| ReturnQuadruple {
            g: g[0],
            g_prime: g[1],
            g_tilde: s.g_tilde,
            g_tilde_prime: s.g_tilde_prime,
        })
        .collect();
    offline_from_quadruples(quadruples, &online.grid, original_seconds)
}

pub fn offline_from_quadruples(
    quadruples: Vec<ReturnQuadruple>,
    grid: &[f64],
    original_seconds: f64,
) -> Result<OfflineReport> {
    let losses: Vec<f64> = quadruples.iter().map(loss).collect();
    let ploss_tdf = empirical_tdf(&losses, grid)?;
    Ok(OfflineReport {
        quadruples,
        losses,
        ploss_tdf,
        original_seconds,
    })
}

/// Three binomial standard errors at proportion `p` and sample size `count`.
pub fn binomial_slack(p: f64, count: usize) -> f64 {
    3.0 * (p * (1.0 - p) / count as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremDiagnostics {
    /// Fraction of samples with bound-loss at least the loss.
    pub lambda_hat: f64,
    /// `(1 - alpha)^2` less three binomial standard errors.
    pub lambda_floor: f64,
    pub lambda_holds: bool,
    /// Fraction of grid points with `PLoss TDF <= beta + slack`.
    pub dominated_fraction: f64,
    /// Grid values where the loss tail exceeds `beta` beyond the slack.
    pub violations: Vec<f64>,
}

/// Empirical checks that the bound-loss dominates the loss with probability at
/// least `(1 - alpha)^2` and that `beta` bounds the loss tail on the grid.
pub fn verify_theorems(
    losses: &[f64],
    online: &OnlineReport,
    ploss_tdf: &[f64],
) -> Result<TheoremDiagnostics> {
    let count = losses.len();
    if count == 0 || count != online.bound_losses.len() || ploss_tdf.len() != online.grid.len() {
        return Err(argument(
            "loss and bound-loss samples must pair up on the same grid",
        ));
    }
    let dominated = losses
        .iter()
        .zip(&online.bound_losses)
        .filter(|(l, b)| b >= l)
        .count();
    let lambda_hat = dominated as f64 / count as f64;
    let keep = (1.0 - online.alpha) * (1.0 - online.alpha);
    let lambda_floor = keep - binomial_slack(keep, count);
    let violations: Vec<f64> = online
        .grid
        .iter()
        .zip(ploss_tdf.iter().zip(&online.beta))
        .filter(|(_, (&p, &b))| p > b + binomial_slack(p, count))
        .map(|(&d, _)| d)
        .collect();
    let dominated_fraction = 1.0 - violations.len() as f64 / online.grid.len() as f64;
    Ok(TheoremDiagnostics {
        lambda_hat,
        lambda_floor,
        lambda_holds: lambda_hat >= lambda_floor,
        dominated_fraction,
        violations,
    })
}
