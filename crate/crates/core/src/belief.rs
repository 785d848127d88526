//! Weighted particle beliefs and the stochastic belief update
//! (bootstrap particle filter with low-variance resampling).

use rand::Rng;

use crate::error::{argument, Error, Result};
use crate::models::{ObservationModel, TransitionModel};
use crate::rng::{tag, RngStream};

const NORMALIZATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub state: Vec<f64>,
    pub weight: f64,
}

impl Particle {
    pub fn new(state: Vec<f64>, weight: f64) -> Self {
        Self { state, weight }
    }
}

/// A weighted sample set. States are stored flat, `dim` values per particle,
/// in insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleBelief {
    dim: usize,
    states: Vec<f64>,
    weights: Vec<f64>,
    timestamp: usize,
    normalized: bool,
}

impl ParticleBelief {
    pub fn from_particles(particles: Vec<Particle>, timestamp: usize) -> Result<Self> {
        let Some(first) = particles.first() else {
            return Err(argument("belief needs at least one particle"));
        };
        let dim = first.state.len();
        let mut states = Vec::with_capacity(dim * particles.len());
        let mut weights = Vec::with_capacity(particles.len());
        for p in particles {
            if p.state.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: p.state.len(),
                });
            }
            states.extend_from_slice(&p.state);
            weights.push(p.weight);
        }
        Self::from_parts(dim, states, weights, timestamp)
    }

    /// Equally weighted belief over a flat state buffer.
    pub fn uniform(dim: usize, states: Vec<f64>, timestamp: usize) -> Result<Self> {
        if dim == 0 || states.is_empty() || !states.len().is_multiple_of(dim) {
            return Err(argument(format!(
                "state buffer of length {} does not hold whole {dim}-dimensional particles",
                states.len()
            )));
        }
        let n = states.len() / dim;
        Self::from_parts(dim, states, vec![1.0 / n as f64; n], timestamp)
    }

    pub fn from_parts(
        dim: usize,
        states: Vec<f64>,
        weights: Vec<f64>,
        timestamp: usize,
    ) -> Result<Self> {
        if weights.is_empty() {
            return Err(argument("belief needs at least one particle"));
        }
        if dim == 0 || states.len() != dim * weights.len() {
            return Err(Error::Dimension {
                expected: dim * weights.len(),
                got: states.len(),
            });
        }
        if states.iter().any(|x| !x.is_finite()) {
            return Err(argument("particle states must be finite"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(argument("particle weights must be finite and nonnegative"));
        }
        let normalized = (weights.iter().sum::<f64>() - 1.0).abs() < NORMALIZATION_TOLERANCE;
        Ok(Self {
            dim,
            states,
            weights,
            timestamp,
            normalized,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn timestamp(&self) -> usize {
        self.timestamp
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn iter_states(&self) -> std::slice::ChunksExact<'_, f64> {
        self.states.chunks_exact(self.dim)
    }

    pub fn particles(&self) -> impl Iterator<Item = Particle> + '_ {
        self.iter_states()
            .zip(&self.weights)
            .map(|(s, &w)| Particle::new(s.to_vec(), w))
    }

    /// Rescale weights to sum to one. Fails when every weight is zero.
    pub fn normalize(&mut self) -> Result<()> {
        let total: f64 = self.weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::NotNormalized(total));
        }
        self.weights.iter_mut().for_each(|w| *w /= total);
        self.normalized = true;
        Ok(())
    }

    /// Weighted mean state.
    pub fn mean(&self) -> Vec<f64> {
        let total: f64 = self.weights.iter().sum();
        let mut m = vec![0.0; self.dim];
        for (x, w) in self.iter_states().zip(&self.weights) {
            for (mi, xi) in m.iter_mut().zip(x) {
                *mi += w * xi;
            }
        }
        m.iter_mut().for_each(|v| *v /= total);
        m
    }

    pub fn has_uniform_weights(&self) -> bool {
        let w0 = self.weights[0];
        self.weights.iter().all(|&w| w == w0)
    }

    /// Equally weighted belief over the particles at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut states = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            states.extend_from_slice(self.state(i));
        }
        let n = indices.len();
        Self {
            dim: self.dim,
            states,
            weights: vec![1.0 / n as f64; n],
            timestamp: self.timestamp,
            normalized: true,
        }
    }

    fn require_normalized(&self) -> Result<()> {
        if self.normalized {
            Ok(())
        } else {
            Err(Error::NotNormalized(self.weights.iter().sum()))
        }
    }
}

/// Draw every particle through the motion model. Weights are carried over.
pub fn propagate<T: TransitionModel + ?Sized>(
    belief: &ParticleBelief,
    action: &[f64],
    motion: &T,
    stream: RngStream,
) -> Result<ParticleBelief> {
    belief.require_normalized()?;
    let dim = motion.dim();
    if belief.dim != dim {
        return Err(Error::Dimension {
            expected: dim,
            got: belief.dim,
        });
    }
    if action.len() != dim {
        return Err(Error::Dimension {
            expected: dim,
            got: action.len(),
        });
    }
    let mut rng = stream.rng();
    let mut states = vec![0.0; belief.states.len()];
    for (out, x) in states.chunks_exact_mut(dim).zip(belief.iter_states()) {
        motion.sample(x, action, &mut rng, out);
    }
    Ok(ParticleBelief {
        dim,
        states,
        weights: belief.weights.clone(),
        timestamp: belief.timestamp + 1,
        normalized: true,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reweighted {
    pub belief: ParticleBelief,
    /// `ln sum_i w_i O(z | x_i)` under the incoming weights.
    pub log_evidence: f64,
    /// Every likelihood was zero; weights were reset to uniform.
    pub degenerate: bool,
}

/// Bayes reweighting `w_i <- w_i O(z | x_i)`, renormalized in the log domain.
pub fn reweight<O: ObservationModel + ?Sized>(
    belief: &ParticleBelief,
    observation: &[f64],
    obs_model: &O,
) -> Result<Reweighted> {
    if observation.len() != obs_model.dim() {
        return Err(Error::Dimension {
            expected: obs_model.dim(),
            got: observation.len(),
        });
    }
    if belief.dim != obs_model.dim() {
        return Err(Error::Dimension {
            expected: obs_model.dim(),
            got: belief.dim,
        });
    }
    let log_terms: Vec<f64> = belief
        .iter_states()
        .zip(&belief.weights)
        .map(|(x, &w)| {
            if w > 0.0 {
                w.ln() + obs_model.log_likelihood(x, observation)
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let max = log_terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let n = belief.len();
    if !max.is_finite() {
        return Ok(Reweighted {
            belief: ParticleBelief {
                weights: vec![1.0 / n as f64; n],
                normalized: true,
                ..belief.clone()
            },
            log_evidence: f64::NEG_INFINITY,
            degenerate: true,
        });
    }
    let mut weights: Vec<f64> = log_terms.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let prior_total: f64 = belief.weights.iter().sum();
    Ok(Reweighted {
        belief: ParticleBelief {
            weights,
            normalized: true,
            ..belief.clone()
        },
        log_evidence: max + total.ln() - prior_total.ln(),
        degenerate: false,
    })
}

/// Systematic (single-offset) resampling to `count` equally weighted particles.
///
/// Particle `i` receives between `floor(count * w_i)` and `ceil(count * w_i)`
/// copies; output order follows the sweep.
pub fn low_variance_resample(
    belief: &ParticleBelief,
    count: usize,
    stream: RngStream,
) -> Result<ParticleBelief> {
    let u: f64 = stream.rng().random();
    systematic_indices(&belief.weights, count, u).map(|idx| belief.select(&idx))
}

/// Indices picked by a systematic sweep with offset fraction `u` in `[0, 1)`.
pub(crate) fn systematic_indices(weights: &[f64], count: usize, u: f64) -> Result<Vec<usize>> {
    if count == 0 {
        return Err(argument("resample count must be at least 1"));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::NotNormalized(total));
    }
    let last_positive = weights.iter().rposition(|&w| w > 0.0).unwrap_or(0);
    let step = total / count as f64;
    let mut out = Vec::with_capacity(count);
    let mut i = 0;
    let mut cumulative = weights[0];
    for k in 0..count {
        let position = (u + k as f64) * step;
        while position >= cumulative && i < last_positive {
            i += 1;
            cumulative += weights[i];
        }
        out.push(i);
    }
    Ok(out)
}

/// One stochastic belief update: the propagated prior, the resampled posterior
/// and the evidence term the entropy estimator needs.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterStep {
    /// Propagated states carrying the prior weights.
    pub propagated: ParticleBelief,
    /// Resampled, equally weighted posterior.
    pub posterior: ParticleBelief,
    pub log_evidence: f64,
    pub degenerate: bool,
}

/// propagate -> reweight -> resample back to the input particle count.
pub fn filter_step<T, O>(
    belief: &ParticleBelief,
    action: &[f64],
    observation: &[f64],
    motion: &T,
    obs_model: &O,
    stream: RngStream,
) -> Result<FilterStep>
where
    T: TransitionModel + ?Sized,
    O: ObservationModel + ?Sized,
{
    let propagated = propagate(belief, action, motion, stream.derive(tag::PROPAGATE))?;
    let reweighted = reweight(&propagated, observation, obs_model)?;
    let posterior = low_variance_resample(
        &reweighted.belief,
        belief.len(),
        stream.derive(tag::RESAMPLE),
    )?;
    Ok(FilterStep {
        propagated,
        posterior,
        log_evidence: reweighted.log_evidence,
        degenerate: reweighted.degenerate,
    })
}
