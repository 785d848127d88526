use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use ploss_core::belief::{filter_step, low_variance_resample, propagate, reweight, ParticleBelief};
use ploss_core::models::{
    BeaconObservation, GaussianObservation, LinearGaussian, NoiseProfile, ObservationModel,
    TransitionModel,
};
use ploss_core::reward::minmax_bounds;
use ploss_core::rng::RngStream;

const BINS: usize = 20;

/// Chi-square statistic of `samples` against equiprobable bins of a CDF.
fn chi_square(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut counts = [0usize; BINS];
    for &s in samples {
        let k = ((cdf(s) * BINS as f64) as usize).min(BINS - 1);
        counts[k] += 1;
    }
    let expected = samples.len() as f64 / BINS as f64;
    counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum()
}

fn critical_1pct(df: usize) -> f64 {
    ChiSquared::new(df as f64).unwrap().inverse_cdf(0.99)
}

/// Squared radius over variance of a 2-D isotropic Gaussian is exponential with mean 2.
fn check_observation_sampler(
    model: &dyn ObservationModel,
    state: &[f64],
    variance: f64,
    seed: u64,
) {
    let mut rng = RngStream::new(seed).rng();
    let mut z = vec![0.0; model.dim()];
    let mut radial = Vec::with_capacity(10_000);
    let mut axis0 = Vec::with_capacity(10_000);
    let std_normal = statrs::distribution::Normal::new(0.0, 1.0).unwrap();
    for _ in 0..10_000 {
        model.sample(state, &mut rng, &mut z);
        let d2: f64 = z.iter().zip(state).map(|(a, b)| (a - b) * (a - b)).sum();
        radial.push(d2 / variance);
        axis0.push((z[0] - state[0]) / variance.sqrt());
        // density and sampler agree on the variance
        let expected = -0.5 * d2 / variance
            - 0.5 * model.dim() as f64 * (2.0 * std::f64::consts::PI * variance).ln();
        assert!((model.log_likelihood(state, &z) - expected).abs() < 1e-9);
    }
    let crit = critical_1pct(BINS - 1);
    let r = chi_square(&radial, |t| {
        if model.dim() == 2 {
            1.0 - (-0.5 * t).exp()
        } else {
            ChiSquared::new(1.0).unwrap().cdf(t)
        }
    });
    assert!(r < crit, "radial chi-square {r} >= {crit}");
    let a = chi_square(&axis0, |x| std_normal.cdf(x));
    assert!(a < crit, "axis chi-square {a} >= {crit}");
}

#[test]
fn observation_samplers_match_densities() {
    let beacons = vec![[0.0, 0.0], [3.0, 0.0]];
    let clamped = BeaconObservation::new(beacons.clone(), 0.1, NoiseProfile::Clamped).unwrap();
    let unclamped = BeaconObservation::new(beacons, 0.1, NoiseProfile::Unclamped).unwrap();
    for (i, state) in [[0.4, 0.3], [2.0, 2.0], [3.2, -0.1]].iter().enumerate() {
        check_observation_sampler(&clamped, state, clamped.variance_at(state), 10 + i as u64);
        check_observation_sampler(
            &unclamped,
            state,
            unclamped.variance_at(state),
            20 + i as u64,
        );
    }
    let toy = GaussianObservation::new(1, 0.7).unwrap();
    check_observation_sampler(&toy, &[1.5], 0.7, 30);
}

#[test]
fn transition_monte_carlo() {
    let m = LinearGaussian::new(2, 0.1).unwrap();
    let mut rng = RngStream::new(1).rng();
    let mut out = [0.0; 2];
    let mut sum = [0.0; 2];
    let draws = 100_000;
    for _ in 0..draws {
        m.sample(&[0.0, 0.0], &[1.0, 1.0], &mut rng, &mut out);
        sum[0] += out[0];
        sum[1] += out[1];
    }
    for s in sum {
        assert!((s / draws as f64 - 1.0).abs() < 3.0 * (0.1 / draws as f64).sqrt());
    }

    let tiny = LinearGaussian::new(2, 1e-12).unwrap();
    tiny.sample(&[2.0, 3.0], &[1.0, 0.0], &mut rng, &mut out);
    assert!((out[0] - 3.0).abs() < 1e-4 && (out[1] - 3.0).abs() < 1e-4);

    let toy = LinearGaussian::new(1, 0.4).unwrap();
    let mut x = [0.0];
    let xs: Vec<f64> = (0..100_000)
        .map(|_| {
            toy.sample(&[0.0], &[0.0], &mut rng, &mut x);
            x[0]
        })
        .collect();
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let var = xs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    // sample variance has sd w sqrt(2 / n)
    assert!((var - 0.4).abs() < 4.0 * 0.4 * (2.0 / xs.len() as f64).sqrt());
}

#[test]
fn propagation_mean_at_origin() {
    let m = LinearGaussian::new(2, 0.1).unwrap();
    let n = 10_000;
    let b = ParticleBelief::uniform(2, vec![0.0; 2 * n], 0).unwrap();
    let p = propagate(&b, &[0.0, 0.0], &m, RngStream::new(2)).unwrap();
    for (axis, v) in p.mean().iter().enumerate() {
        assert!(v.abs() < 3.0 * (0.1 / n as f64).sqrt(), "axis {axis}: {v}");
    }
}

/// Particle filter against the Kalman filter on a 2-D random walk with a
/// constant-variance position sensor.
#[test]
fn particle_filter_tracks_kalman_mean() {
    let (q, r) = (0.1, 0.05);
    let motion = LinearGaussian::new(2, q).unwrap();
    let obs = GaussianObservation::new(2, r).unwrap();
    let n = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let prior_sd = 0.5;
    let normal = Normal::new(0.0, prior_sd).unwrap();
    let mut belief =
        ParticleBelief::uniform(2, (0..2 * n).map(|_| normal.sample(&mut rng)).collect(), 0)
            .unwrap();
    // Kalman state per axis
    let mut mean = belief.mean();
    let mut var = prior_sd * prior_sd;
    let actions = [[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    let observations = [[1.1, -0.05], [1.9, 0.1], [2.05, 1.02]];
    for (k, (a, z)) in actions.iter().zip(&observations).enumerate() {
        let step =
            filter_step(&belief, a, z, &motion, &obs, RngStream::new(100 + k as u64)).unwrap();
        let predicted = var + q;
        let gain = predicted / (predicted + r);
        for i in 0..2 {
            mean[i] = mean[i] + a[i] + gain * (z[i] - mean[i] - a[i]);
        }
        var = (1.0 - gain) * predicted;
        belief = step.posterior;
        let pf = belief.mean();
        let err = ((pf[0] - mean[0]).powi(2) + (pf[1] - mean[1]).powi(2)).sqrt();
        let tol = 5.0 * (2.0 * var / n as f64).sqrt();
        assert!(err < tol, "step {k}: error {err} >= {tol}");
    }
}

#[test]
fn independent_filter_runs_agree_better_with_more_particles() {
    let motion = LinearGaussian::new(1, 0.2).unwrap();
    let obs = GaussianObservation::new(1, 0.1).unwrap();
    let spread = |n: usize| -> f64 {
        let prior =
            ParticleBelief::uniform(1, (0..n).map(|i| i as f64 / n as f64).collect(), 0).unwrap();
        let means: Vec<f64> = (0..40)
            .map(|s| {
                filter_step(&prior, &[0.5], &[1.0], &motion, &obs, RngStream::new(s))
                    .unwrap()
                    .posterior
                    .mean()[0]
            })
            .collect();
        let m = means.iter().sum::<f64>() / means.len() as f64;
        means.iter().map(|x| (x - m).abs()).sum::<f64>() / means.len() as f64
    };
    let (small, large) = (spread(100), spread(6400));
    assert!(large < 0.25 * small, "{small} vs {large}");
}

proptest! {
    #[test]
    fn resampling_keeps_count_and_normalization(
        weights in prop::collection::vec(0.0f64..10.0, 1..40),
        count in 1usize..60,
        seed in any::<u64>(),
    ) {
        prop_assume!(weights.iter().sum::<f64>() > 0.0);
        let n = weights.len();
        let b = ParticleBelief::from_parts(1, (0..n).map(|i| i as f64).collect(), weights.clone(), 0).unwrap();
        let r = low_variance_resample(&b, count, RngStream::new(seed)).unwrap();
        prop_assert_eq!(r.len(), count);
        prop_assert!((r.weights().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for x in r.states() {
            prop_assert!(weights[*x as usize] > 0.0);
        }
    }

    #[test]
    fn reweight_normalizes(states in prop::collection::vec(-3.0f64..3.0, 1..30), z in -3.0f64..3.0) {
        let b = ParticleBelief::uniform(1, states, 0).unwrap();
        let obs = GaussianObservation::new(1, 0.5).unwrap();
        let r = reweight(&b, &[z], &obs).unwrap();
        prop_assert!((r.belief.weights().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn mean_lies_within_extremes(states in prop::collection::vec(-100.0f64..100.0, 1..50)) {
        let b = ParticleBelief::uniform(1, states, 0).unwrap();
        let (lo, hi) = minmax_bounds(&b).unwrap();
        let m = b.mean()[0];
        prop_assert!(lo - 1e-9 <= m && m <= hi + 1e-9);
    }

    #[test]
    fn propagation_keeps_weights(w in prop::collection::vec(0.01f64..1.0, 1..20), seed in any::<u64>()) {
        let n = w.len();
        let mut b = ParticleBelief::from_parts(2, vec![0.0; 2 * n], w, 0).unwrap();
        b.normalize().unwrap();
        let m = LinearGaussian::new(2, 0.1).unwrap();
        let p = propagate(&b, &[1.0, 0.0], &m, RngStream::new(seed)).unwrap();
        prop_assert_eq!(p.weights(), b.weights());
        prop_assert_eq!(p.timestamp(), 1);
    }
}
