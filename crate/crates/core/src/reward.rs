//! Belief-dependent rewards: the particle differential-entropy estimator
//! (negated) and the sample-mean reward of the toy problem.

use std::fmt;
use std::sync::Arc;

use crate::belief::ParticleBelief;
use crate::error::{argument, Error, Result};
use crate::models::{ObservationModel, TransitionModel};

/// Substituted for `ln 0` when a mixture or likelihood term vanishes.
pub const LOG_FLOOR: f64 = -690.775_527_898_213_7; // ln(1e-300)

/// The pair of models a belief update runs on.
#[derive(Clone)]
pub struct Models {
    pub motion: Arc<dyn TransitionModel>,
    pub observation: Arc<dyn ObservationModel>,
}

impl Models {
    pub fn new(
        motion: Arc<dyn TransitionModel>,
        observation: Arc<dyn ObservationModel>,
    ) -> Result<Self> {
        if motion.dim() != observation.dim() {
            return Err(Error::Dimension {
                expected: motion.dim(),
                got: observation.dim(),
            });
        }
        Ok(Self {
            motion,
            observation,
        })
    }

    pub fn dim(&self) -> usize {
        self.motion.dim()
    }
}

impl fmt::Debug for Models {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Models")
            .field("dim", &self.dim())
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum RewardModel {
    /// `-H(b)` from the particle entropy estimator.
    NegEntropy(Models),
    /// Mean of a one-dimensional belief.
    SampleMean,
}

/// Everything a momentary reward at step `l` may look at.
#[derive(Debug, Clone, Copy)]
pub struct Transition<'a> {
    /// Belief at `l - 1`.
    pub prior: &'a ParticleBelief,
    /// Propagated states carrying the prior weights.
    pub propagated: &'a ParticleBelief,
    /// Belief at `l` the reward is evaluated on.
    pub posterior: &'a ParticleBelief,
    pub action: &'a [f64],
    pub observation: &'a [f64],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardSample {
    pub value: f64,
    pub timestamp: usize,
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyEstimate {
    pub value: f64,
    pub degenerate: bool,
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

fn log_weights(b: &ParticleBelief) -> Vec<f64> {
    let total: f64 = b.weights().iter().sum();
    b.weights().iter().map(|w| (w / total).ln()).collect()
}

/// Differential entropy of the posterior after one update, from particles:
///
/// ```text
/// H = - sum_j w'_j ln O(z | x'_j)
///     - sum_j w'_j ln sum_i w_i T(x_i, a, x'_j)
///     + ln sum_i w_i O(z | x^-_i)
/// ```
///
/// `prior` holds `(w_i, x_i)`, `predicted` the propagated states with the prior
/// weights and `posterior` the `(w'_j, x'_j)` the expectation is taken over.
/// Costs `|prior| * |posterior|` transition-density evaluations.
pub fn entropy_estimate_parts<T, O>(
    prior: &ParticleBelief,
    predicted: &ParticleBelief,
    posterior: &ParticleBelief,
    action: &[f64],
    observation: &[f64],
    motion: &T,
    obs_model: &O,
) -> Result<EntropyEstimate>
where
    T: TransitionModel + ?Sized,
    O: ObservationModel + ?Sized,
{
    let dim = motion.dim();
    for b in [prior, predicted, posterior] {
        if b.dim() != dim {
            return Err(Error::Dimension {
                expected: dim,
                got: b.dim(),
            });
        }
    }
    if observation.len() != obs_model.dim() {
        return Err(Error::Dimension {
            expected: obs_model.dim(),
            got: observation.len(),
        });
    }
    let mut degenerate = false;
    let mut floor = |v: f64| {
        if v.is_finite() {
            v
        } else {
            degenerate = true;
            LOG_FLOOR
        }
    };

    let prior_logw = log_weights(prior);
    let post_total: f64 = posterior.weights().iter().sum();

    let mut row = vec![0.0; prior.len()];
    let mut likelihood_term = 0.0;
    let mut mixture_term = 0.0;
    for (x, &w) in posterior.iter_states().zip(posterior.weights()) {
        if w == 0.0 {
            continue;
        }
        let w = w / post_total;
        likelihood_term += w * floor(obs_model.log_likelihood(x, observation));
        motion.log_density_row(prior.states(), action, x, &mut row);
        for (r, lw) in row.iter_mut().zip(&prior_logw) {
            *r += lw;
        }
        mixture_term += w * floor(log_sum_exp(&row));
    }

    let evidence_terms: Vec<f64> = predicted
        .iter_states()
        .zip(log_weights(predicted))
        .map(|(x, lw)| lw + obs_model.log_likelihood(x, observation))
        .collect();
    let evidence = floor(log_sum_exp(&evidence_terms));

    Ok(EntropyEstimate {
        value: -likelihood_term - mixture_term + evidence,
        degenerate,
    })
}

/// Entropy estimate from a weighted posterior whose states are the propagated
/// prior particles (`posterior[i]` is the propagation of `prior[i]`).
pub fn entropy_estimate<T, O>(
    prior: &ParticleBelief,
    posterior: &ParticleBelief,
    action: &[f64],
    observation: &[f64],
    motion: &T,
    obs_model: &O,
) -> Result<EntropyEstimate>
where
    T: TransitionModel + ?Sized,
    O: ObservationModel + ?Sized,
{
    if prior.len() != posterior.len() {
        return Err(argument(format!(
            "prior has {} particles but posterior has {}",
            prior.len(),
            posterior.len()
        )));
    }
    let predicted = ParticleBelief::from_parts(
        posterior.dim(),
        posterior.states().to_vec(),
        prior.weights().to_vec(),
        posterior.timestamp(),
    )?;
    entropy_estimate_parts(
        prior,
        &predicted,
        posterior,
        action,
        observation,
        motion,
        obs_model,
    )
}

impl RewardModel {
    pub fn momentary(&self, t: &Transition<'_>) -> Result<RewardSample> {
        let timestamp = t.posterior.timestamp();
        match self {
            RewardModel::NegEntropy(models) => {
                let h = entropy_estimate_parts(
                    t.prior,
                    t.propagated,
                    t.posterior,
                    t.action,
                    t.observation,
                    models.motion.as_ref(),
                    models.observation.as_ref(),
                )?;
                Ok(RewardSample {
                    value: -h.value,
                    timestamp,
                    degenerate: h.degenerate,
                })
            }
            RewardModel::SampleMean => Ok(RewardSample {
                value: sample_mean(t.posterior)?,
                timestamp,
                degenerate: false,
            }),
        }
    }
}

/// Weighted mean of a one-dimensional belief.
pub fn sample_mean(belief: &ParticleBelief) -> Result<f64> {
    if belief.dim() != 1 {
        return Err(Error::Dimension {
            expected: 1,
            got: belief.dim(),
        });
    }
    Ok(belief.mean()[0])
}

/// `(min_i x_i, max_i x_i)` of a one-dimensional belief. These bound the sample
/// mean of every belief built from the same states.
pub fn minmax_bounds(belief: &ParticleBelief) -> Result<(f64, f64)> {
    if belief.dim() != 1 {
        return Err(Error::Dimension {
            expected: 1,
            got: belief.dim(),
        });
    }
    let xs = belief.states();
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, hi))
}

/// Undiscounted cumulative reward, summed left to right.
pub fn cumulative(rewards: &[f64]) -> f64 {
    rewards.iter().fold(0.0, |acc, r| acc + r)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReturnSample {
    pub value: f64,
    pub degenerate: bool,
}

/// Return of one branch: the sum of the momentary rewards of its transitions.
pub fn sample_return(transitions: &[Transition<'_>], model: &RewardModel) -> Result<ReturnSample> {
    let mut values = Vec::with_capacity(transitions.len());
    let mut degenerate = false;
    for t in transitions {
        let r = model.momentary(t)?;
        degenerate |= r.degenerate;
        values.push(r.value);
    }
    Ok(ReturnSample {
        value: cumulative(&values),
        degenerate,
    })
}
