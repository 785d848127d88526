//! Ready-made problems: two beacon-navigation layouts and a one-dimensional
//! sample-mean problem.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::belief::ParticleBelief;
use crate::error::{Error, Result};
use crate::models::{
    BeaconObservation, GaussianObservation, LinearGaussian, NoiseProfile, PolicySequence,
};
use crate::reward::{Models, RewardModel};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    /// Clamped beacon noise, mirror-symmetric beacon layout.
    #[serde(rename = "beacon-1")]
    Beacon1,
    /// Unclamped beacon noise, one beacon missing on the alternative path.
    #[serde(rename = "beacon-2")]
    Beacon2,
    Toy,
}

impl std::fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScenarioKind::Beacon1 => "beacon-1",
            ScenarioKind::Beacon2 => "beacon-2",
            ScenarioKind::Toy => "toy",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyParams {
    pub motion_noise: f64,
    pub observation_variance: f64,
    /// Per-step displacement of the two policies.
    pub actions: [f64; 2],
}

impl Default for ToyParams {
    fn default() -> Self {
        Self {
            motion_noise: 0.5,
            observation_variance: 1.0,
            actions: [-1.0, -0.9],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioParams {
    pub kind: ScenarioKind,
    pub particles: usize,
    pub horizon: usize,
    /// `w`: motion noise variance and beacon noise scale.
    pub noise: f64,
    /// Explicit beacon positions; generated from the policies when absent.
    pub beacons: Option<Vec<[f64; 2]>>,
    /// Steps between generated beacons along the primary and the alternative path.
    pub beacon_spacing: [usize; 2],
    pub toy: ToyParams,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub models: Models,
    pub reward: RewardModel,
    pub root: ParticleBelief,
    pub policies: [PolicySequence; 2],
    /// Beacon positions (empty for the toy problem).
    pub beacons: Vec<[f64; 2]>,
}

/// Primary policy moves `+x` then `+y`; the alternative moves `+y` then `+x`.
pub fn l_shaped_policies(horizon: usize) -> [PolicySequence; 2] {
    let first = horizon.div_ceil(2);
    let legs = |a: [f64; 2], b: [f64; 2]| {
        let actions = (0..horizon)
            .map(|i| if i < first { a.to_vec() } else { b.to_vec() })
            .collect();
        PolicySequence::new(actions).expect("horizon is positive")
    };
    [legs([1.0, 0.0], [0.0, 1.0]), legs([0.0, 1.0], [1.0, 0.0])]
}

/// Expected positions along a policy from the centre of the unit square, one per step.
pub fn nominal_path(policy: &PolicySequence) -> Vec<[f64; 2]> {
    let mut p = [0.5, 0.5];
    policy
        .actions()
        .iter()
        .map(|a| {
            p = [p[0] + a[0], p[1] + a[1]];
            p
        })
        .collect()
}

/// Beacons on every `spacing[p]`-th nominal position of path `p`, deduplicated.
/// With `drop_first_alternative` the first beacon that only the alternative
/// path passes is left out.
pub fn beacon_layout(
    policies: &[PolicySequence; 2],
    spacing: [usize; 2],
    drop_first_alternative: bool,
) -> Vec<[f64; 2]> {
    let pick = |p: &PolicySequence, every: usize| -> Vec<[f64; 2]> {
        let every = every.max(1);
        let path = nominal_path(p);
        let picked: Vec<_> = path
            .iter()
            .copied()
            .skip(every - 1)
            .step_by(every)
            .collect();
        // short paths: keep the endpoint
        if picked.is_empty() {
            path.last().copied().into_iter().collect()
        } else {
            picked
        }
    };
    let primary = pick(&policies[0], spacing[0]);
    let mut alternative = pick(&policies[1], spacing[1]);
    if drop_first_alternative {
        if let Some(i) = alternative.iter().position(|b| !primary.contains(b)) {
            alternative.remove(i);
        }
    }
    let mut out = primary;
    for b in alternative {
        if !out.contains(&b) {
            out.push(b);
        }
    }
    out
}

fn uniform_box(dim: usize, count: usize, stream: RngStream) -> Result<ParticleBelief> {
    let mut rng = stream.rng();
    let states = (0..dim * count).map(|_| rng.random::<f64>()).collect();
    ParticleBelief::uniform(dim, states, 0)
}

impl Scenario {
    /// Build the scenario; the root belief is `N` uniform draws on the unit
    /// square (unit interval for the toy problem) from `stream`.
    pub fn build(params: &ScenarioParams, stream: RngStream) -> Result<Self> {
        if params.particles == 0 || params.horizon == 0 {
            return Err(Error::Config(
                "particle count and horizon must be positive".into(),
            ));
        }
        match params.kind {
            ScenarioKind::Beacon1 | ScenarioKind::Beacon2 => {
                let policies = l_shaped_policies(params.horizon);
                let (profile, drop) = match params.kind {
                    ScenarioKind::Beacon1 => (NoiseProfile::Clamped, false),
                    _ => (NoiseProfile::Unclamped, true),
                };
                let beacons = match &params.beacons {
                    Some(b) => b.clone(),
                    None => beacon_layout(&policies, params.beacon_spacing, drop),
                };
                let motion = Arc::new(LinearGaussian::new(2, params.noise)?);
                let observation = Arc::new(BeaconObservation::new(
                    beacons.clone(),
                    params.noise,
                    profile,
                )?);
                let models = Models::new(motion, observation)?;
                Ok(Self {
                    kind: params.kind,
                    reward: RewardModel::NegEntropy(models.clone()),
                    models,
                    root: uniform_box(2, params.particles, stream)?,
                    policies,
                    beacons,
                })
            }
            ScenarioKind::Toy => {
                let t = &params.toy;
                let motion = Arc::new(LinearGaussian::new(1, t.motion_noise)?);
                let observation = Arc::new(GaussianObservation::new(1, t.observation_variance)?);
                let policies = [
                    PolicySequence::new(vec![vec![t.actions[0]]; params.horizon])?,
                    PolicySequence::new(vec![vec![t.actions[1]]; params.horizon])?,
                ];
                Ok(Self {
                    kind: params.kind,
                    models: Models::new(motion, observation)?,
                    reward: RewardModel::SampleMean,
                    root: uniform_box(1, params.particles, stream)?,
                    policies,
                    beacons: Vec::new(),
                })
            }
        }
    }
}
