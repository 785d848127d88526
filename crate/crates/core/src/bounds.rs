//! Stochastic bounds on original returns from simplified-return replicates.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{argument, Error, Result};
use crate::reward::minmax_bounds;
use crate::simplification::Variant;
use crate::tree::BranchView;

// Acklam coefficients.
const A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];
const P_LOW: f64 = 0.024_25;

fn acklam(p: f64) -> f64 {
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -acklam(1.0 - p)
    }
}

/// `Phi^-1(p)`: Acklam's approximation refined by one Halley step.
pub fn inverse_normal_cdf(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(argument(format!("probability must lie in (0, 1), got {p}")));
    }
    let x = acklam(p);
    let e = 0.5 * erfc(-x / std::f64::consts::SQRT_2) - p;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (0.5 * x * x).exp();
    Ok(x - u / (1.0 + 0.5 * x * u))
}

/// `z_{alpha/2} = Phi^-1(1 - alpha/2)`.
///
/// With `table_rounding` the quantile is rounded to two decimals, except that
/// `alpha = 0.01` gives the tabulated 2.56.
pub fn z_alpha_half(alpha: f64, table_rounding: bool) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(argument(format!(
            "alpha must lie in (0, 1) for normal bounds, got {alpha}"
        )));
    }
    let z = inverse_normal_cdf(1.0 - 0.5 * alpha)?;
    if !table_rounding {
        return Ok(z);
    }
    if (alpha - 0.01).abs() < 1e-12 {
        Ok(2.56)
    } else {
        Ok((z * 100.0).round() / 100.0)
    }
}

/// Sample standard deviation of the replicates, `1/(m-1)` normalization.
pub fn estimate_se(replicates: &[f64]) -> Result<f64> {
    let m = replicates.len();
    if m < 2 {
        return Err(argument(format!(
            "at least two replicates are required, got {m}"
        )));
    }
    let mean = replicates.iter().sum::<f64>() / m as f64;
    let ss: f64 = replicates.iter().map(|r| (r - mean) * (r - mean)).sum();
    Ok((ss / (m - 1) as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundKind {
    /// `g~ -/+ z_{alpha/2} k se`, `k = sqrt 2` (variant A) or 2 (variant B).
    Clt,
    /// Sums of per-level particle extremes; probability-one bounds on sample-mean returns.
    Minmax,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundSpec {
    pub alpha: f64,
    pub m: usize,
    pub variant: Variant,
    pub kind: BoundKind,
    /// Normal quantile; NaN for min/max bounds.
    pub z: f64,
}

impl BoundSpec {
    pub fn new(
        alpha: f64,
        m: usize,
        variant: Variant,
        kind: BoundKind,
        table_rounding: bool,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::Config(format!(
                "alpha must lie in [0, 1), got {alpha}"
            )));
        }
        if m < 2 {
            return Err(Error::Config(format!("m must be at least 2, got {m}")));
        }
        let z = match kind {
            BoundKind::Clt => {
                z_alpha_half(alpha, table_rounding).map_err(|e| Error::Config(e.to_string()))?
            }
            BoundKind::Minmax => f64::NAN,
        };
        Ok(Self {
            alpha,
            m,
            variant,
            kind,
            z,
        })
    }

    /// `k` in `z k se`.
    pub fn inflation(&self) -> f64 {
        match self.variant {
            Variant::A => std::f64::consts::SQRT_2,
            Variant::B => 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundPair {
    pub l: f64,
    pub u: f64,
    pub se_hat: f64,
    /// `max(u - g~, g~ - l)`; equal to both for normal bounds.
    pub radius: f64,
}

pub fn clt_bounds(g_simplified: f64, se_hat: f64, spec: &BoundSpec) -> BoundPair {
    debug_assert!(se_hat >= 0.0);
    let radius = spec.z * spec.inflation() * se_hat;
    BoundPair {
        l: g_simplified - radius,
        u: g_simplified + radius,
        se_hat,
        radius,
    }
}

/// Sum over levels of the minimum and maximum particle of the branch's tree
/// posteriors. Bounds the sample-mean return of the branch and of any
/// per-level subsample of it.
pub fn minmax_branch_bounds(branch: &BranchView<'_>, g_simplified: f64) -> Result<BoundPair> {
    let (mut l, mut u) = (0.0, 0.0);
    for i in 0..branch.horizon() {
        let (lo, hi) = minmax_bounds(branch.posterior(i))?;
        l += lo;
        u += hi;
    }
    Ok(BoundPair {
        l,
        u,
        se_hat: 0.0,
        radius: (u - g_simplified).max(g_simplified - l),
    })
}

/// Fraction of `(g, l, u)` with `l <= g <= u`.
pub fn coverage_probe(samples: &[(f64, f64, f64)]) -> Result<f64> {
    if samples.is_empty() {
        return Err(argument("no samples"));
    }
    let hit = samples.iter().filter(|(g, l, u)| l <= g && g <= u).count();
    Ok(hit as f64 / samples.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn spec(alpha: f64, variant: Variant) -> BoundSpec {
        BoundSpec::new(alpha, 10, variant, BoundKind::Clt, false).unwrap()
    }

    #[test]
    fn quantile_spot_values() {
        assert_eq!(inverse_normal_cdf(0.5).unwrap(), 0.0);
        assert_abs_diff_eq!(
            inverse_normal_cdf(0.975).unwrap(),
            1.959_963_984_540_054,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(
            inverse_normal_cdf(0.995).unwrap(),
            2.575_829_303_548_900_4,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(
            inverse_normal_cdf(1e-10).unwrap(),
            -6.361_340_902_404_056,
            epsilon = 1e-8
        );
        assert!(inverse_normal_cdf(0.0).is_err());
        assert!(inverse_normal_cdf(1.0).is_err());
        assert_eq!(z_alpha_half(0.01, true).unwrap(), 2.56);
        assert_eq!(z_alpha_half(0.05, true).unwrap(), 1.96);
    }

    #[test]
    fn se_examples() {
        assert_eq!(estimate_se(&[4.0, 4.0, 4.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(
            estimate_se(&[1.0, 3.0]).unwrap(),
            2f64.sqrt(),
            epsilon = 1e-15
        );
        assert!(estimate_se(&[1.0]).is_err());
    }

    #[test]
    fn clt_examples() {
        let s = spec(0.01, Variant::A);
        let b = clt_bounds(10.0, 0.0, &s);
        assert_eq!((b.l, b.u), (10.0, 10.0));
        let b = clt_bounds(10.0, 1.0, &s);
        assert_abs_diff_eq!(b.radius, 3.642_773_5, epsilon = 1e-6);
        assert_abs_diff_eq!(b.l, 6.357_226_5, epsilon = 1e-6);
        assert_abs_diff_eq!(b.u, 13.642_773_5, epsilon = 1e-6);
        let bb = clt_bounds(10.0, 1.0, &spec(0.01, Variant::B));
        assert_abs_diff_eq!(bb.radius / b.radius, 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn spec_validation() {
        assert!(BoundSpec::new(1.0, 5, Variant::A, BoundKind::Clt, false).is_err());
        assert!(BoundSpec::new(0.05, 1, Variant::A, BoundKind::Clt, false).is_err());
        assert!(BoundSpec::new(0.0, 5, Variant::A, BoundKind::Clt, false).is_err());
        assert!(BoundSpec::new(0.0, 5, Variant::B, BoundKind::Minmax, false).is_ok());
    }

    #[test]
    fn coverage_counts_closed_interval() {
        let c = coverage_probe(&[
            (1.0, 1.0, 2.0),
            (2.0, 1.0, 2.0),
            (3.0, 1.0, 2.0),
            (0.5, 1.0, 2.0),
        ])
        .unwrap();
        assert_eq!(c, 0.5);
        assert!(coverage_probe(&[]).is_err());
    }

    proptest! {
        #[test]
        fn quantile_inverts_cdf(p in 1e-12f64..(1.0 - 1e-12)) {
            let x = inverse_normal_cdf(p).unwrap();
            let back = 0.5 * erfc(-x / std::f64::consts::SQRT_2);
            prop_assert!((back - p).abs() <= 1e-12 * p.max(1e-3));
        }

        #[test]
        fn quantile_is_monotone(p in 1e-9f64..0.999, dp in 1e-6f64..1e-3) {
            let q = (p + dp).min(1.0 - 1e-9);
            prop_assert!(inverse_normal_cdf(q).unwrap() >= inverse_normal_cdf(p).unwrap());
        }

        #[test]
        fn radius_monotone(se in 0.0f64..10.0, dse in 0.0f64..5.0, a in 0.001f64..0.5, da in 0.0f64..0.4) {
            let s = spec(a, Variant::A);
            prop_assert!(clt_bounds(0.0, se + dse, &s).radius >= clt_bounds(0.0, se, &s).radius);
            let looser = spec(a + da, Variant::A);
            prop_assert!(clt_bounds(0.0, se, &looser).radius <= clt_bounds(0.0, se, &s).radius);
        }

        #[test]
        fn variant_ratio_exact(g in -50.0f64..50.0, se in 0.01f64..10.0, a in 0.001f64..0.9) {
            let ra = clt_bounds(g, se, &spec(a, Variant::A)).radius;
            let rb = clt_bounds(g, se, &spec(a, Variant::B)).radius;
            prop_assert!((rb / ra - std::f64::consts::SQRT_2).abs() < 1e-14);
        }

        #[test]
        fn clt_bounds_symmetric(g in -50.0f64..50.0, se in 0.0f64..10.0) {
            let b = clt_bounds(g, se, &spec(0.05, Variant::B));
            prop_assert!(b.l <= b.u);
            prop_assert!(((b.u - g) - (g - b.l)).abs() <= 1e-12 * (1.0 + g.abs()));
        }
    }
}
