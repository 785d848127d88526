//! Transition and observation models for the beacon-navigation world and the
//! one-dimensional toy problem.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::StreamRng;

/// Variance used by the unclamped beacon model when a state sits exactly on a beacon.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// Densities below this are reported as zero by [`ObservationModel::likelihood`].
pub const DENSITY_UNDERFLOW: f64 = 1e-300;

/// Density reported for a zero-variance observation that hits the state exactly.
pub const POINT_MASS_DENSITY: f64 = 1e300;

/// Log density of `N(z; mean, variance * I)`.
pub fn isotropic_gaussian_log_density(z: &[f64], mean: &[f64], variance: f64) -> f64 {
    let d2 = squared_distance(z, mean);
    if variance <= 0.0 {
        return if d2 == 0.0 {
            POINT_MASS_DENSITY.ln()
        } else {
            f64::NEG_INFINITY
        };
    }
    let dim = z.len() as f64;
    -0.5 * dim * (2.0 * std::f64::consts::PI * variance).ln() - d2 / (2.0 * variance)
}

#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub trait TransitionModel: Send + Sync {
    fn dim(&self) -> usize;

    /// Draw `x' ~ T(x, a, .)` into `out`.
    fn sample(&self, state: &[f64], action: &[f64], rng: &mut StreamRng, out: &mut [f64]);

    fn log_density(&self, from: &[f64], action: &[f64], to: &[f64]) -> f64;

    /// `out[i] = ln T(from_i, a, to)` for every state in the flat `from` buffer.
    fn log_density_row(&self, from: &[f64], action: &[f64], to: &[f64], out: &mut [f64]) {
        let d = self.dim();
        for (o, x) in out.iter_mut().zip(from.chunks_exact(d)) {
            *o = self.log_density(x, action, to);
        }
    }
}

pub trait ObservationModel: Send + Sync {
    fn dim(&self) -> usize;

    fn sample(&self, state: &[f64], rng: &mut StreamRng, out: &mut [f64]);

    fn log_likelihood(&self, state: &[f64], observation: &[f64]) -> f64;

    /// `O(z | x)`, with values below [`DENSITY_UNDERFLOW`] reported as zero.
    fn likelihood(&self, state: &[f64], observation: &[f64]) -> f64 {
        let l = self.log_likelihood(state, observation).exp();
        if l < DENSITY_UNDERFLOW {
            0.0
        } else {
            l
        }
    }
}

/// `x' = x + a + w`, `w ~ N(0, noise * I)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearGaussian {
    dim: usize,
    noise: f64,
}

impl LinearGaussian {
    pub fn new(dim: usize, noise: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config(
                "transition dimension must be positive".into(),
            ));
        }
        if !(noise > 0.0 && noise.is_finite()) {
            return Err(Error::Config(format!(
                "process noise must be positive, got {noise}"
            )));
        }
        Ok(Self { dim, noise })
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }
}

impl TransitionModel for LinearGaussian {
    fn dim(&self) -> usize {
        self.dim
    }

    fn sample(&self, state: &[f64], action: &[f64], rng: &mut StreamRng, out: &mut [f64]) {
        let sd = self.noise.sqrt();
        for ((o, x), a) in out.iter_mut().zip(state).zip(action) {
            let e: f64 = rng.sample(StandardNormal);
            *o = x + a + sd * e;
        }
    }

    fn log_density(&self, from: &[f64], action: &[f64], to: &[f64]) -> f64 {
        let d2: f64 = from
            .iter()
            .zip(action)
            .zip(to)
            .map(|((x, a), y)| {
                let r = y - x - a;
                r * r
            })
            .sum();
        -0.5 * self.dim as f64 * (2.0 * std::f64::consts::PI * self.noise).ln()
            - d2 / (2.0 * self.noise)
    }

    fn log_density_row(&self, from: &[f64], action: &[f64], to: &[f64], out: &mut [f64]) {
        let c = -0.5 * self.dim as f64 * (2.0 * std::f64::consts::PI * self.noise).ln();
        let inv = 1.0 / (2.0 * self.noise);
        match self.dim {
            1 => {
                let t = to[0] - action[0];
                for (o, x) in out.iter_mut().zip(from) {
                    let r = t - x;
                    *o = c - r * r * inv;
                }
            }
            2 => {
                let (t0, t1) = (to[0] - action[0], to[1] - action[1]);
                for (o, x) in out.iter_mut().zip(from.chunks_exact(2)) {
                    let (r0, r1) = (t0 - x[0], t1 - x[1]);
                    *o = c - (r0 * r0 + r1 * r1) * inv;
                }
            }
            d => {
                for (o, x) in out.iter_mut().zip(from.chunks_exact(d)) {
                    *o = self.log_density(x, action, to);
                }
            }
        }
    }
}

/// `z ~ N(x, variance * I)` with a constant variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianObservation {
    dim: usize,
    variance: f64,
}

impl GaussianObservation {
    pub fn new(dim: usize, variance: f64) -> Result<Self> {
        if dim == 0 || !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::Config(format!(
                "observation model needs dim > 0 and variance > 0, got dim {dim}, variance {variance}"
            )));
        }
        Ok(Self { dim, variance })
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }
}

impl ObservationModel for GaussianObservation {
    fn dim(&self) -> usize {
        self.dim
    }

    fn sample(&self, state: &[f64], rng: &mut StreamRng, out: &mut [f64]) {
        let sd = self.variance.sqrt();
        for (o, x) in out.iter_mut().zip(state) {
            let e: f64 = rng.sample(StandardNormal);
            *o = x + sd * e;
        }
    }

    fn log_likelihood(&self, state: &[f64], observation: &[f64]) -> f64 {
        isotropic_gaussian_log_density(observation, state, self.variance)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseProfile {
    /// `v(x) = w * min(1, |x - x*|^2)`
    Clamped,
    /// `v(x) = w * |x - x*|^2`, floored at [`VARIANCE_FLOOR`]
    Unclamped,
}

/// Observation of the planar position through the nearest light beacon:
/// `z ~ N(x, v(x) I)` where `v` grows with the distance to the closest beacon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeaconObservation {
    beacons: Vec<[f64; 2]>,
    noise: f64,
    profile: NoiseProfile,
}

impl BeaconObservation {
    pub fn new(beacons: Vec<[f64; 2]>, noise: f64, profile: NoiseProfile) -> Result<Self> {
        if beacons.is_empty() {
            return Err(Error::Config("at least one beacon is required".into()));
        }
        if beacons.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::Config("beacon coordinates must be finite".into()));
        }
        if !(noise > 0.0 && noise.is_finite()) {
            return Err(Error::Config(format!(
                "observation noise must be positive, got {noise}"
            )));
        }
        Ok(Self {
            beacons,
            noise,
            profile,
        })
    }

    pub fn beacons(&self) -> &[[f64; 2]] {
        &self.beacons
    }

    pub fn profile(&self) -> NoiseProfile {
        self.profile
    }

    /// Index of the closest beacon; the lowest index wins ties.
    pub fn nearest_beacon(&self, state: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d2 = f64::INFINITY;
        for (i, b) in self.beacons.iter().enumerate() {
            let d2 = squared_distance(state, b);
            if d2 < best_d2 {
                best = i;
                best_d2 = d2;
            }
        }
        best
    }

    pub fn variance_at(&self, state: &[f64]) -> f64 {
        let d2 = squared_distance(state, &self.beacons[self.nearest_beacon(state)]);
        match self.profile {
            NoiseProfile::Clamped => self.noise * d2.min(1.0),
            NoiseProfile::Unclamped => (self.noise * d2).max(VARIANCE_FLOOR),
        }
    }
}

impl ObservationModel for BeaconObservation {
    fn dim(&self) -> usize {
        2
    }

    fn sample(&self, state: &[f64], rng: &mut StreamRng, out: &mut [f64]) {
        let sd = self.variance_at(state).sqrt();
        for (o, x) in out.iter_mut().zip(state) {
            let e: f64 = rng.sample(StandardNormal);
            *o = x + sd * e;
        }
    }

    fn log_likelihood(&self, state: &[f64], observation: &[f64]) -> f64 {
        isotropic_gaussian_log_density(observation, state, self.variance_at(state))
    }
}

/// Open-loop action sequence evaluated as a policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySequence {
    actions: Vec<Vec<f64>>,
}

impl PolicySequence {
    pub fn new(actions: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = actions.first() else {
            return Err(Error::Config(
                "policy must contain at least one action".into(),
            ));
        };
        let dim = first.len();
        if let Some(bad) = actions.iter().find(|a| a.len() != dim) {
            return Err(Error::Dimension {
                expected: dim,
                got: bad.len(),
            });
        }
        Ok(Self { actions })
    }

    /// `count` copies of `first` followed by `count` copies of `second`.
    pub fn two_legs(first: &[f64], second: &[f64], count: usize) -> Self {
        let actions = std::iter::repeat_n(first.to_vec(), count)
            .chain(std::iter::repeat_n(second.to_vec(), count))
            .collect();
        Self { actions }
    }

    pub fn horizon(&self) -> usize {
        self.actions.len()
    }

    pub fn action(&self, step: usize) -> &[f64] {
        &self.actions[step]
    }

    pub fn actions(&self) -> &[Vec<f64>] {
        &self.actions
    }

    pub fn dim(&self) -> usize {
        self.actions[0].len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use approx::assert_abs_diff_eq;

    fn beacons_01() -> Vec<[f64; 2]> {
        vec![[0.0, 0.0], [4.0, 0.0]]
    }

    #[test]
    fn noise_free_transition_limit() {
        let m = LinearGaussian::new(2, 1e-12).unwrap();
        let mut rng = RngStream::new(1).rng();
        let mut out = [0.0; 2];
        m.sample(&[2.0, 3.0], &[1.0, 0.0], &mut rng, &mut out);
        assert_abs_diff_eq!(out[0], 3.0, epsilon = 1e-4);
        assert_abs_diff_eq!(out[1], 3.0, epsilon = 1e-4);
    }

    #[test]
    fn transition_sample_mean() {
        let w = 0.1;
        let m = LinearGaussian::new(2, w).unwrap();
        let mut rng = RngStream::new(2).rng();
        let draws = 100_000;
        let mut sum = [0.0; 2];
        let mut out = [0.0; 2];
        for _ in 0..draws {
            m.sample(&[0.0, 0.0], &[1.0, 1.0], &mut rng, &mut out);
            sum[0] += out[0];
            sum[1] += out[1];
        }
        let tol = 3.0 * (w / draws as f64).sqrt();
        for s in sum {
            assert!((s / draws as f64 - 1.0).abs() < tol);
        }
    }

    #[test]
    fn toy_transition_variance() {
        let w = 0.3;
        let m = LinearGaussian::new(1, w).unwrap();
        let mut rng = RngStream::new(3).rng();
        let draws = 50_000;
        let xs: Vec<f64> = (0..draws)
            .map(|_| {
                let mut o = [0.0];
                m.sample(&[0.0], &[0.0], &mut rng, &mut o);
                o[0]
            })
            .collect();
        let mean = xs.iter().sum::<f64>() / draws as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
        // sd of the sample variance is w * sqrt(2 / draws)
        assert!((var - w).abs() < 4.0 * w * (2.0 / draws as f64).sqrt());
    }

    #[test]
    fn clamped_variance_far_from_beacon() {
        let m = BeaconObservation::new(beacons_01(), 0.1, NoiseProfile::Clamped).unwrap();
        assert_abs_diff_eq!(m.variance_at(&[0.0, 2.0]), 0.1, epsilon = 1e-15);
    }

    #[test]
    fn clamped_at_beacon_is_exact() {
        let m = BeaconObservation::new(beacons_01(), 0.1, NoiseProfile::Clamped).unwrap();
        assert_eq!(m.variance_at(&[4.0, 0.0]), 0.0);
        let mut rng = RngStream::new(4).rng();
        let mut z = [9.0; 2];
        m.sample(&[4.0, 0.0], &mut rng, &mut z);
        assert_eq!(z, [4.0, 0.0]);
        assert_abs_diff_eq!(
            m.likelihood(&[4.0, 0.0], &[4.0, 0.0]) / POINT_MASS_DENSITY,
            1.0,
            epsilon = 1e-9
        );
        assert_eq!(m.likelihood(&[4.0, 0.0], &[4.0, 0.1]), 0.0);
    }

    #[test]
    fn unclamped_variance() {
        let m = BeaconObservation::new(beacons_01(), 0.1, NoiseProfile::Unclamped).unwrap();
        assert_abs_diff_eq!(m.variance_at(&[0.5, 0.0]), 0.025, epsilon = 1e-15);
        assert_eq!(m.variance_at(&[0.0, 0.0]), VARIANCE_FLOOR);
        assert_abs_diff_eq!(m.variance_at(&[0.0, 3.0]), 0.9, epsilon = 1e-12);
    }

    #[test]
    fn nearest_beacon_tie_breaks_low_index() {
        let m = BeaconObservation::new(beacons_01(), 0.1, NoiseProfile::Clamped).unwrap();
        assert_eq!(m.nearest_beacon(&[2.0, 1.0]), 0);
        assert_eq!(m.nearest_beacon(&[2.1, 1.0]), 1);
    }

    #[test]
    fn likelihood_at_mean() {
        let m = GaussianObservation::new(2, 0.1).unwrap();
        let expected = 1.0 / (2.0 * std::f64::consts::PI * 0.1);
        assert_abs_diff_eq!(
            m.likelihood(&[1.0, 1.0], &[1.0, 1.0]),
            expected,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(expected, 1.5915, epsilon = 1e-4);
    }

    #[test]
    fn likelihood_underflow_is_zero() {
        let m = GaussianObservation::new(2, 0.1).unwrap();
        assert_eq!(m.likelihood(&[0.0, 0.0], &[100.0, 0.0]), 0.0);
    }

    #[test]
    fn likelihood_is_isotropic() {
        let m = BeaconObservation::new(beacons_01(), 0.1, NoiseProfile::Clamped).unwrap();
        let x = [0.6, 0.2];
        let a = m.likelihood(&x, &[0.9, 0.1]);
        let b = m.likelihood(&x, &[0.3, 0.3]);
        let c = m.likelihood(&x, &[0.7, 0.5]);
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        assert_abs_diff_eq!(a, c, epsilon = 1e-12);
    }

    #[test]
    fn row_density_matches_pointwise() {
        let m = LinearGaussian::new(2, 0.2).unwrap();
        let from = [0.0, 0.0, 1.0, -1.0, 0.3, 0.7];
        let mut out = [0.0; 3];
        m.log_density_row(&from, &[0.5, 0.5], &[1.0, 0.2], &mut out);
        for (i, x) in from.chunks_exact(2).enumerate() {
            assert_abs_diff_eq!(
                out[i],
                m.log_density(x, &[0.5, 0.5], &[1.0, 0.2]),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(LinearGaussian::new(2, 0.0).is_err());
        assert!(BeaconObservation::new(vec![], 0.1, NoiseProfile::Clamped).is_err());
        assert!(PolicySequence::new(vec![vec![1.0], vec![1.0, 0.0]]).is_err());
    }
}
