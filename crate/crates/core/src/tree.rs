//! Coupled extended belief trees for two candidate policies.
//!
//! Both trees grow from the same root belief with the same observation
//! schedule. Root branch `o` of each tree starts from the same ground-truth
//! state drawn from the root belief; from there each tree propagates its own
//! ground-truth trajectory under its policy, samples observations from it and
//! runs the stochastic belief update `n_b` times per observation.
//!
//! A root-to-leaf branch picks, at every level, one observation node and one of
//! its belief realizations. Leaves are numbered in mixed radix with level 1 as
//! the most significant digit; digit `l` is `o_l * n_b + r_l` with radix
//! `n_b * n_z(l)`. All random streams are derived from node paths, so any
//! subset of branches can be rebuilt in isolation.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::belief::{filter_step, FilterStep, ParticleBelief};
use crate::error::{argument, Error, Result};
use crate::models::PolicySequence;
use crate::reward::{Models, Transition};
use crate::rng::{tag, RngStream};

/// Number of observations sampled per belief at each level:
/// `n_z(1)` as given, `n_z(l) = max(1, floor(n_z(1) / ((l - 1) c)))` for `l >= 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObservationSchedule {
    first: usize,
    dwindle: f64,
    horizon: usize,
}

impl ObservationSchedule {
    pub fn new(first: usize, dwindle: f64, horizon: usize) -> Result<Self> {
        if first == 0 {
            return Err(Error::Config("n_z(1) must be at least 1".into()));
        }
        if !(dwindle > 0.0 && dwindle.is_finite()) {
            return Err(Error::Config(format!(
                "dwindle factor must be positive, got {dwindle}"
            )));
        }
        if horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        Ok(Self {
            first,
            dwindle,
            horizon,
        })
    }

    /// `n_z(level)` for `level` in `1..=horizon`.
    pub fn observations_at(&self, level: usize) -> usize {
        assert!(
            level >= 1 && level <= self.horizon,
            "level {level} outside 1..={}",
            self.horizon
        );
        if level == 1 {
            return self.first;
        }
        let v = (self.first as f64 / ((level - 1) as f64 * self.dwindle)).floor();
        (v as usize).max(1)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn first(&self) -> usize {
        self.first
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeConfig {
    pub schedule: ObservationSchedule,
    /// `n_b`: belief realizations per observation.
    pub beliefs_per_observation: usize,
    /// Upper bound on the number of branch pairs; excess leaves are pruned uniformly at random.
    pub branch_cap: Option<usize>,
}

impl TreeConfig {
    fn radix(&self, level: usize) -> u64 {
        (self.beliefs_per_observation * self.schedule.observations_at(level)) as u64
    }

    /// `S_l`: number of leaves below one belief realization at `level`.
    fn suffix(&self, level: usize) -> Result<u64> {
        ((level + 1)..=self.schedule.horizon()).try_fold(1u64, |acc, l| {
            acc.checked_mul(self.radix(l))
                .ok_or_else(|| Error::Config("tree has too many branches".into()))
        })
    }

    /// `prod_l n_b n_z(l)`: branch pairs before pruning.
    pub fn leaf_count(&self) -> Result<u64> {
        self.suffix(0)
    }

    /// Beliefs held at `level` by one full tree: `prod_{i <= level} n_b n_z(i)`.
    pub fn beliefs_at(&self, level: usize) -> u64 {
        (1..=level).map(|l| self.radix(l)).product()
    }
}

/// Pick `count` distinct particle indices uniformly without replacement with a
/// partial Fisher-Yates shuffle.
pub fn subsample_indices(len: usize, count: usize, stream: RngStream) -> Result<Vec<usize>> {
    if count > len {
        return Err(argument(format!(
            "cannot pick {count} of {len} particles without replacement"
        )));
    }
    let mut rng = stream.rng();
    let mut idx: Vec<usize> = (0..len).collect();
    for i in 0..count {
        let j = rng.random_range(i..len);
        idx.swap(i, j);
    }
    idx.truncate(count);
    Ok(idx)
}

/// States of `count` particles chosen uniformly without replacement.
pub fn subsample_states(
    belief: &ParticleBelief,
    count: usize,
    stream: RngStream,
) -> Result<Vec<Vec<f64>>> {
    Ok(subsample_indices(belief.len(), count, stream)?
        .into_iter()
        .map(|i| belief.state(i).to_vec())
        .collect())
}

/// Ground-truth states of `count` root branches: draws without replacement,
/// restarting on a fresh permutation whenever the particles run out.
pub fn root_branch_states(
    belief: &ParticleBelief,
    count: usize,
    stream: RngStream,
) -> Result<Vec<Vec<f64>>> {
    if belief.is_empty() {
        return Err(argument("root belief has no particles"));
    }
    let mut out = Vec::with_capacity(count);
    let mut round = 0u64;
    while out.len() < count {
        let take = (count - out.len()).min(belief.len());
        out.extend(subsample_states(belief, take, stream.derive(round))?);
        round += 1;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeliefRealization {
    pub step: FilterStep,
    /// Stream the update ran on.
    pub stream: RngStream,
}

impl BeliefRealization {
    pub fn posterior(&self) -> &ParticleBelief {
        &self.step.posterior
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchNode {
    /// Level `l`, starting at 1.
    pub depth: usize,
    /// Position among the parent's children (`r * n_z(l) + o`), or the root branch index at level 1.
    pub index: usize,
    pub observation: Vec<f64>,
    pub ground_truth: Vec<f64>,
    pub realizations: Vec<BeliefRealization>,
    /// Children present after pruning, sorted by `index`.
    pub children: Vec<BranchNode>,
}

impl BranchNode {
    pub fn child(&self, index: usize) -> Option<&BranchNode> {
        find(&self.children, index)
    }

    fn count_at(&self, depth: usize, acc: &mut [usize]) {
        acc[depth - 1] += 1;
        for c in &self.children {
            c.count_at(depth + 1, acc);
        }
    }
}

fn find(nodes: &[BranchNode], index: usize) -> Option<&BranchNode> {
    nodes
        .binary_search_by_key(&index, |n| n.index)
        .ok()
        .map(|i| &nodes[i])
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTree {
    pub policy: PolicySequence,
    /// Level-1 nodes, sorted by root branch index.
    pub roots: Vec<BranchNode>,
}

impl PolicyTree {
    /// Node count per depth.
    pub fn nodes_per_depth(&self) -> Vec<usize> {
        let mut acc = vec![0; self.policy.horizon()];
        for r in &self.roots {
            r.count_at(1, &mut acc);
        }
        acc
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledTrees {
    pub root: ParticleBelief,
    /// Ground-truth state at planning time for every root branch, shared by both trees.
    pub root_states: Vec<Vec<f64>>,
    pub trees: [PolicyTree; 2],
    pub config: TreeConfig,
    /// Kept leaf indices, ascending.
    pub leaves: Vec<u64>,
    pub stream: RngStream,
}

struct Builder<'a> {
    config: &'a TreeConfig,
    models: &'a Models,
    policy: &'a PolicySequence,
    leaves: &'a [u64],
    suffix: Vec<u64>,
}

impl Builder<'_> {
    fn has_leaf_in(&self, lo: u64, hi: u64) -> bool {
        let i = self.leaves.partition_point(|&l| l < lo);
        i < self.leaves.len() && self.leaves[i] < hi
    }

    /// Node `o` at `level` below a realization whose leaves start at `base`.
    #[allow(clippy::too_many_arguments)]
    fn node(
        &self,
        level: usize,
        index: usize,
        o: usize,
        base: u64,
        parent: &ParticleBelief,
        parent_truth: &[f64],
        stream: RngStream,
    ) -> Result<Option<BranchNode>> {
        let n_b = self.config.beliefs_per_observation;
        let span = self.suffix[level];
        let lo = base + (o * n_b) as u64 * span;
        if !self.has_leaf_in(lo, lo + n_b as u64 * span) {
            return Ok(None);
        }
        let action = self.policy.action(level - 1);
        let dim = self.models.dim();

        let mut ground_truth = vec![0.0; dim];
        self.models.motion.sample(
            parent_truth,
            action,
            &mut stream.derive(tag::GROUND_TRUTH).rng(),
            &mut ground_truth,
        );
        let mut observation = vec![0.0; self.models.observation.dim()];
        self.models.observation.sample(
            &ground_truth,
            &mut stream.derive(tag::OBSERVATION).rng(),
            &mut observation,
        );

        let filter = stream.derive(tag::FILTER);
        let realizations = (0..n_b)
            .map(|r| {
                let s = filter.derive(r as u64);
                let step = filter_step(
                    parent,
                    action,
                    &observation,
                    self.models.motion.as_ref(),
                    self.models.observation.as_ref(),
                    s,
                )?;
                Ok(BeliefRealization { step, stream: s })
            })
            .collect::<Result<Vec<_>>>()?;

        let mut children = Vec::new();
        if level < self.config.schedule.horizon() {
            let n_z = self.config.schedule.observations_at(level + 1);
            for (r, real) in realizations.iter().enumerate() {
                let child_base = lo + r as u64 * span;
                for o_child in 0..n_z {
                    let c = r * n_z + o_child;
                    if let Some(child) = self.node(
                        level + 1,
                        c,
                        o_child,
                        child_base,
                        real.posterior(),
                        &ground_truth,
                        stream.derive(c as u64),
                    )? {
                        children.push(child);
                    }
                }
            }
        }
        Ok(Some(BranchNode {
            depth: level,
            index,
            observation,
            ground_truth,
            realizations,
            children,
        }))
    }
}

impl CoupledTrees {
    /// Build both trees, keeping at most `config.branch_cap` branch pairs.
    pub fn build(
        root: &ParticleBelief,
        policies: [&PolicySequence; 2],
        config: &TreeConfig,
        models: &Models,
        stream: RngStream,
    ) -> Result<Self> {
        let total = config.leaf_count()?;
        let leaves: Vec<u64> = match config.branch_cap {
            Some(cap) if (cap as u64) < total => {
                if cap == 0 {
                    return Err(Error::Config("branch cap must be at least 1".into()));
                }
                let total = usize::try_from(total)
                    .map_err(|_| Error::Config("tree has too many branches".into()))?;
                let mut rng = stream.derive(tag::PRUNE).rng();
                let mut kept: Vec<u64> = index::sample(&mut rng, total, cap)
                    .into_iter()
                    .map(|i| i as u64)
                    .collect();
                kept.sort_unstable();
                kept
            }
            _ => (0..total).collect(),
        };
        Self::build_with_leaves(root, policies, config, models, stream, leaves)
    }

    /// Build only the branches listed in `leaves` (ascending, distinct). Every
    /// kept branch is bit-identical to the same branch of a fuller build.
    pub fn build_with_leaves(
        root: &ParticleBelief,
        policies: [&PolicySequence; 2],
        config: &TreeConfig,
        models: &Models,
        stream: RngStream,
        leaves: Vec<u64>,
    ) -> Result<Self> {
        let horizon = config.schedule.horizon();
        for p in policies {
            if p.horizon() != horizon {
                return Err(Error::Config(format!(
                    "policy length {} does not match horizon {horizon}",
                    p.horizon()
                )));
            }
            if p.dim() != models.dim() {
                return Err(Error::Dimension {
                    expected: models.dim(),
                    got: p.dim(),
                });
            }
        }
        if root.dim() != models.dim() {
            return Err(Error::Dimension {
                expected: models.dim(),
                got: root.dim(),
            });
        }
        if config.beliefs_per_observation == 0 {
            return Err(Error::Config("n_b must be at least 1".into()));
        }
        let total = config.leaf_count()?;
        if leaves.windows(2).any(|w| w[0] >= w[1]) || leaves.last().is_some_and(|&l| l >= total) {
            return Err(argument(
                "leaf indices must be ascending, distinct and within the tree",
            ));
        }

        let n_root = config.schedule.first();
        let root_states = root_branch_states(root, n_root, stream.derive(tag::ROOT_STATES))?;
        let suffix = (0..=horizon)
            .map(|l| config.suffix(l))
            .collect::<Result<Vec<_>>>()?;

        let build_tree = |p: usize| -> Result<PolicyTree> {
            let builder = Builder {
                config,
                models,
                policy: policies[p],
                leaves: &leaves,
                suffix: suffix.clone(),
            };
            let tree_stream = stream.derive(tag::TREE).derive(p as u64);
            let roots = (0..n_root)
                .into_par_iter()
                .map(|o| {
                    builder.node(
                        1,
                        o,
                        o,
                        0,
                        root,
                        &root_states[o],
                        tree_stream.derive(o as u64),
                    )
                })
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .flatten()
                .collect();
            Ok(PolicyTree {
                policy: policies[p].clone(),
                roots,
            })
        };
        let trees = [build_tree(0)?, build_tree(1)?];

        Ok(Self {
            root: root.clone(),
            root_states,
            trees,
            config: *config,
            leaves,
            stream,
        })
    }

    pub fn branch_count(&self) -> usize {
        self.leaves.len()
    }

    /// Branch pair `k` in enumeration order.
    pub fn branch(&self, k: usize) -> BranchPair<'_> {
        let leaf = self.leaves[k];
        BranchPair {
            leaf,
            primary: self.view(0, leaf),
            alternative: self.view(1, leaf),
        }
    }

    /// Every kept root-to-leaf branch pair, in ascending leaf order.
    pub fn enumerate_branches(&self) -> impl ExactSizeIterator<Item = BranchPair<'_>> + '_ {
        (0..self.leaves.len()).map(move |k| self.branch(k))
    }

    fn view(&self, tree: usize, leaf: u64) -> BranchView<'_> {
        let cfg = &self.config;
        let horizon = cfg.schedule.horizon();
        let n_b = cfg.beliefs_per_observation as u64;
        let t = &self.trees[tree];
        let mut steps = Vec::with_capacity(horizon);
        let mut siblings: &[BranchNode] = &t.roots;
        let mut parent_r = 0u64;
        for level in 1..=horizon {
            let span = cfg.suffix(level).expect("checked at build time");
            let digit = (leaf / span) % cfg.radix(level);
            let (o, r) = (digit / n_b, digit % n_b);
            let index = if level == 1 {
                o
            } else {
                parent_r * cfg.schedule.observations_at(level) as u64 + o
            };
            let node = find(siblings, index as usize).expect("kept leaf must have a built path");
            steps.push(BranchStep {
                node,
                realization: &node.realizations[r as usize],
            });
            siblings = &node.children;
            parent_r = r;
        }
        BranchView {
            leaf,
            root: &self.root,
            policy: &t.policy,
            steps,
        }
    }

    /// Belief updates that hit an all-zero likelihood.
    pub fn degenerate_updates(&self) -> usize {
        fn walk(n: &BranchNode) -> usize {
            n.realizations.iter().filter(|r| r.step.degenerate).count()
                + n.children.iter().map(walk).sum::<usize>()
        }
        self.trees.iter().flat_map(|t| &t.roots).map(walk).sum()
    }

    /// Observations and ground-truth states of every node, for replay and debugging.
    pub fn dump(&self) -> TreeDump {
        fn walk(n: &BranchNode, path: &mut Vec<usize>, out: &mut Vec<NodeDump>) {
            path.push(n.index);
            out.push(NodeDump {
                depth: n.depth,
                path: path.clone(),
                observation: n.observation.clone(),
                ground_truth: n.ground_truth.clone(),
                degenerate: n.realizations.iter().map(|r| r.step.degenerate).collect(),
            });
            for c in &n.children {
                walk(c, path, out);
            }
            path.pop();
        }
        let trees = self
            .trees
            .iter()
            .map(|t| {
                let mut nodes = Vec::new();
                for r in &t.roots {
                    walk(r, &mut Vec::new(), &mut nodes);
                }
                PolicyTreeDump {
                    actions: t.policy.actions().to_vec(),
                    nodes,
                }
            })
            .collect();
        TreeDump {
            seed: self.stream.seed,
            root_states: self.root_states.clone(),
            leaves: self.leaves.clone(),
            trees,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TreeDump {
    pub seed: u64,
    pub root_states: Vec<Vec<f64>>,
    pub leaves: Vec<u64>,
    pub trees: Vec<PolicyTreeDump>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PolicyTreeDump {
    pub actions: Vec<Vec<f64>>,
    pub nodes: Vec<NodeDump>,
}

#[derive(Debug, Clone, Serialize)]
pub struct NodeDump {
    pub depth: usize,
    pub path: Vec<usize>,
    pub observation: Vec<f64>,
    pub ground_truth: Vec<f64>,
    pub degenerate: Vec<bool>,
}

#[derive(Debug, Clone, Copy)]
pub struct BranchStep<'a> {
    pub node: &'a BranchNode,
    pub realization: &'a BeliefRealization,
}

/// One root-to-leaf branch of one policy tree.
#[derive(Debug, Clone)]
pub struct BranchView<'a> {
    pub leaf: u64,
    pub root: &'a ParticleBelief,
    pub policy: &'a PolicySequence,
    pub steps: Vec<BranchStep<'a>>,
}

impl<'a> BranchView<'a> {
    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    /// Belief the update at step `i` (0-based) started from.
    pub fn prior(&self, i: usize) -> &'a ParticleBelief {
        if i == 0 {
            self.root
        } else {
            self.steps[i - 1].realization.posterior()
        }
    }

    pub fn posterior(&self, i: usize) -> &'a ParticleBelief {
        self.steps[i].realization.posterior()
    }

    pub fn observation(&self, i: usize) -> &'a [f64] {
        &self.steps[i].node.observation
    }

    pub fn action(&self, i: usize) -> &'a [f64] {
        self.policy.action(i)
    }

    pub fn transitions(&self) -> Vec<Transition<'a>> {
        (0..self.horizon())
            .map(|i| Transition {
                prior: self.prior(i),
                propagated: &self.steps[i].realization.step.propagated,
                posterior: self.posterior(i),
                action: self.action(i),
                observation: self.observation(i),
            })
            .collect()
    }

    /// Streams the tree's belief updates ran on, one per level.
    pub fn filter_streams(&self) -> Vec<RngStream> {
        self.steps.iter().map(|s| s.realization.stream).collect()
    }

    pub fn degenerate(&self) -> bool {
        self.steps.iter().any(|s| s.realization.step.degenerate)
    }
}

/// Branch `leaf` of the primary-policy tree with its counterpart in the alternative tree.
#[derive(Debug, Clone)]
pub struct BranchPair<'a> {
    pub leaf: u64,
    pub primary: BranchView<'a>,
    pub alternative: BranchView<'a>,
}

impl<'a> BranchPair<'a> {
    pub fn views(&self) -> [&BranchView<'a>; 2] {
        [&self.primary, &self.alternative]
    }
}
