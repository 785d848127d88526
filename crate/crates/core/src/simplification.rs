//! Particle-subsampling simplifications and simplified returns.
//!
//! Variant [`Variant::A`] subsamples the root belief once with a frozen stream
//! and reruns an `n`-particle filter along the branch's observations. Variant
//! [`Variant::B`] subsamples the stored `N`-particle tree beliefs at every level
//! and runs no filter of its own.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::belief::{filter_step, systematic_indices, ParticleBelief};
use crate::error::{argument, Result};
use crate::reward::{cumulative, Models, ReturnSample, RewardModel, Transition};
use crate::rng::{tag, RngStream};
use crate::tree::BranchView;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Root subsample with a frozen stream, then an `n`-particle filter.
    A,
    /// Per-level subsample of the tree's beliefs.
    B,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplificationSpec {
    pub variant: Variant,
    pub n: usize,
    /// Stream of the root subsample shared by every branch and replicate (variant A).
    pub frozen: RngStream,
}

impl SimplificationSpec {
    pub fn new(variant: Variant, n: usize, frozen: RngStream) -> Result<Self> {
        if n == 0 {
            return Err(argument("simplified particle count must be at least 1"));
        }
        Ok(Self { variant, n, frozen })
    }
}

/// Indices of `n` particles drawn by weight with low-variance resampling over a
/// random permutation of the particles. With uniform weights this is a draw
/// without replacement; with `n == N` and uniform weights it is the identity.
pub fn simplify_indices(
    belief: &ParticleBelief,
    n: usize,
    stream: RngStream,
) -> Result<Vec<usize>> {
    let len = belief.len();
    if n > len {
        return Err(argument(format!("cannot simplify {len} particles to {n}")));
    }
    if n == len && belief.has_uniform_weights() {
        return Ok((0..len).collect());
    }
    let mut rng = stream.rng();
    let mut order: Vec<usize> = (0..len).collect();
    for i in (1..len).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let weights: Vec<f64> = order.iter().map(|&i| belief.weight(i)).collect();
    let u: f64 = rng.random();
    Ok(systematic_indices(&weights, n, u)?
        .into_iter()
        .map(|k| order[k])
        .collect())
}

/// `n`-particle belief with uniform weights drawn from `belief` by weight.
pub fn simplify_belief(
    belief: &ParticleBelief,
    n: usize,
    stream: RngStream,
) -> Result<ParticleBelief> {
    Ok(belief.select(&simplify_indices(belief, n, stream)?))
}

/// Frozen root subsample of variant A.
pub fn frozen_root(branch: &BranchView<'_>, spec: &SimplificationSpec) -> Result<ParticleBelief> {
    simplify_belief(branch.root, spec.n, spec.frozen)
}

/// Variant A return: filter the frozen root subsample along the branch's
/// observations, step `l` running on `level_streams[l]`.
pub fn simplified_branch_return_a(
    branch: &BranchView<'_>,
    spec: &SimplificationSpec,
    models: &Models,
    reward: &RewardModel,
    level_streams: &[RngStream],
) -> Result<ReturnSample> {
    if level_streams.len() != branch.horizon() {
        return Err(argument("one filter stream per level is required"));
    }
    let mut belief = frozen_root(branch, spec)?;
    let mut rewards = Vec::with_capacity(branch.horizon());
    let mut degenerate = false;
    for (i, &stream) in level_streams.iter().enumerate() {
        let action = branch.action(i);
        let observation = branch.observation(i);
        let step = filter_step(
            &belief,
            action,
            observation,
            models.motion.as_ref(),
            models.observation.as_ref(),
            stream,
        )?;
        let r = reward.momentary(&Transition {
            prior: &belief,
            propagated: &step.propagated,
            posterior: &step.posterior,
            action,
            observation,
        })?;
        degenerate |= r.degenerate || step.degenerate;
        rewards.push(r.value);
        belief = step.posterior;
    }
    Ok(ReturnSample {
        value: cumulative(&rewards),
        degenerate,
    })
}

/// Variant B return: subsample the tree's posterior at every level to `n`
/// particles and evaluate the reward on the subsamples. Propagated states are
/// taken at the same indices as the subsampled prior.
pub fn simplified_branch_return_b(
    branch: &BranchView<'_>,
    spec: &SimplificationSpec,
    reward: &RewardModel,
    stream: RngStream,
) -> Result<ReturnSample> {
    let levels = stream.derive(tag::LEVEL);
    let mut prior_idx = simplify_indices(branch.root, spec.n, levels.derive(0))?;
    let mut prior = branch.root.select(&prior_idx);
    let mut rewards = Vec::with_capacity(branch.horizon());
    let mut degenerate = false;
    for (i, step) in branch.steps.iter().enumerate() {
        let tree_step = &step.realization.step;
        let propagated = tree_step.propagated.select(&prior_idx);
        let post_idx = simplify_indices(&tree_step.posterior, spec.n, levels.derive(i as u64 + 1))?;
        let posterior = tree_step.posterior.select(&post_idx);
        let r = reward.momentary(&Transition {
            prior: &prior,
            propagated: &propagated,
            posterior: &posterior,
            action: branch.action(i),
            observation: branch.observation(i),
        })?;
        degenerate |= r.degenerate;
        rewards.push(r.value);
        prior = posterior;
        prior_idx = post_idx;
    }
    Ok(ReturnSample {
        value: cumulative(&rewards),
        degenerate,
    })
}

/// One simplified return drawn with replicate stream `stream`.
pub fn simplified_return(
    branch: &BranchView<'_>,
    spec: &SimplificationSpec,
    models: &Models,
    reward: &RewardModel,
    stream: RngStream,
) -> Result<ReturnSample> {
    match spec.variant {
        Variant::A => {
            let levels = stream.derive(tag::LEVEL);
            let streams: Vec<_> = (0..branch.horizon())
                .map(|l| levels.derive(l as u64))
                .collect();
            simplified_branch_return_a(branch, spec, models, reward, &streams)
        }
        Variant::B => simplified_branch_return_b(branch, spec, reward, stream),
    }
}

/// Replicate stream `r` of a branch whose simplification stream is `base`.
pub fn replicate_stream(base: RngStream, r: usize) -> RngStream {
    base.derive(tag::REPLICATE).derive(r as u64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplifiedReturnSet {
    /// First replicate.
    pub primary: f64,
    pub replicates: Vec<f64>,
    pub degenerate: bool,
}

/// `m` independent simplified returns of one branch; replicate 0 is the primary.
pub fn replicate_returns(
    branch: &BranchView<'_>,
    spec: &SimplificationSpec,
    m: usize,
    models: &Models,
    reward: &RewardModel,
    base: RngStream,
) -> Result<SimplifiedReturnSet> {
    if m < 2 {
        return Err(argument(format!(
            "at least two replicates are required, got {m}"
        )));
    }
    let streams: Vec<_> = (0..m).map(|r| replicate_stream(base, r)).collect();
    replicate_returns_with_streams(branch, spec, models, reward, &streams)
}

/// Simplified returns on caller-chosen replicate streams.
pub fn replicate_returns_with_streams(
    branch: &BranchView<'_>,
    spec: &SimplificationSpec,
    models: &Models,
    reward: &RewardModel,
    streams: &[RngStream],
) -> Result<SimplifiedReturnSet> {
    if streams.is_empty() {
        return Err(argument("no replicate streams"));
    }
    let mut replicates = Vec::with_capacity(streams.len());
    let mut degenerate = false;
    for &s in streams {
        let r = simplified_return(branch, spec, models, reward, s)?;
        degenerate |= r.degenerate;
        replicates.push(r.value);
    }
    Ok(SimplifiedReturnSet {
        primary: replicates[0],
        replicates,
        degenerate,
    })
}
