//! End-to-end runs: configuration, tree construction, online characterization
//! for every simplified particle count, optional offline loss, timings and
//! CSV output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::bounds::{BoundKind, BoundSpec};
use crate::error::{Error, Result};
use crate::loss::{
    compute_ploss_offline, empirical_tdf, run_algorithm_1, verify_theorems, Characterization,
    OfflineReport, OnlineReport, TheoremDiagnostics,
};
use crate::reward::sample_return;
use crate::rng::{tag, RngStream};
use crate::scenario::{Scenario, ScenarioKind, ScenarioParams, ToyParams};
use crate::simplification::{replicate_stream, simplified_return, SimplificationSpec, Variant};
use crate::tree::{CoupledTrees, ObservationSchedule, TreeConfig};

/// Version of the CSV layouts written by [`write_outputs`].
pub const SCHEMA_VERSION: u32 = 1;

/// Phases shorter than this are flagged as below timing resolution.
pub const TIMING_FLOOR_SECONDS: f64 = 0.01;

pub const TDF_HEADER: &str = "n,delta,pbloss_tdf,beta,ploss_tdf";
pub const SUMMARY_HEADER: &str = "schema_version,scenario,N,n,m,alpha,z,branches,delta_star,beta_delta_star,\
beta_half_delta_star,beta_zero,pbloss_tdf_zero,ploss_tdf_zero,ploss_tdf_delta_star,lambda_hat,lambda_floor,\
beta_dominated_fraction,mean_radius,mean_radius_prime,degenerate_branches";
pub const HIST_HEADER: &str = "n,bin_left,count";
pub const TIMINGS_HEADER: &str =
    "n,tree_build_s,original_returns_s,simplified_returns_s,bound_replicates_s,\
observed_speedup,predicted_speedup,below_resolution";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioKind,
    /// `N`.
    pub particles: usize,
    /// Simplified particle counts `n`, one run each.
    pub simplified: Vec<usize>,
    /// `m`.
    pub replicates: usize,
    /// `L`.
    pub horizon: usize,
    pub alpha: f64,
    /// `n_z(1)`.
    pub observations_first: usize,
    /// `c`.
    pub dwindle: f64,
    /// `n_b`.
    pub beliefs_per_observation: usize,
    pub branch_cap: Option<usize>,
    pub seed: u64,
    pub variant: Variant,
    pub bound_kind: BoundKind,
    pub paper_rounding: bool,
    pub offline_ploss: bool,
    pub grid_step: f64,
    pub loss_bin_width: f64,
    pub bound_loss_bin_width: f64,
    /// `w`.
    pub noise: f64,
    pub beacons: Option<Vec<[f64; 2]>>,
    /// Generated beacon spacing along the primary and the alternative path.
    pub beacon_spacing: [usize; 2],
    pub toy: ToyParams,
    pub output_dir: PathBuf,
    pub threads: Option<usize>,
    pub dump_tree: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::preset(ScenarioKind::Beacon1)
    }
}

impl ExperimentConfig {
    /// Defaults for a scenario.
    pub fn preset(kind: ScenarioKind) -> Self {
        let beacon = Self {
            scenario: kind,
            particles: 1500,
            simplified: vec![175, 125, 75, 25],
            replicates: 50,
            horizon: 12,
            alpha: 0.01,
            observations_first: 500,
            dwindle: 1000.0,
            beliefs_per_observation: 1,
            branch_cap: None,
            seed: 0,
            variant: Variant::A,
            bound_kind: BoundKind::Clt,
            paper_rounding: false,
            offline_ploss: true,
            grid_step: 0.01,
            loss_bin_width: 0.3,
            bound_loss_bin_width: 0.3,
            noise: 0.1,
            beacons: None,
            beacon_spacing: [2, 2],
            toy: ToyParams::default(),
            output_dir: PathBuf::from("out"),
            threads: None,
            dump_tree: false,
        };
        match kind {
            ScenarioKind::Beacon1 => beacon,
            ScenarioKind::Beacon2 => Self {
                particles: 1000,
                simplified: vec![100, 75, 50, 25],
                beacon_spacing: [1, 6],
                ..beacon
            },
            ScenarioKind::Toy => Self {
                particles: 1000,
                simplified: vec![200],
                replicates: 100,
                horizon: 1,
                alpha: 0.05,
                variant: Variant::B,
                ..beacon
            },
        }
    }

    /// Parse a JSON object on top of its scenario's preset. Keys in
    /// `overrides` replace keys of the file; a `scenario` key in either picks
    /// the preset.
    pub fn from_json(text: &str, overrides: &Map<String, Value>) -> Result<Self> {
        let file: Value =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid JSON: {e}")))?;
        let Value::Object(mut fields) = file else {
            return Err(Error::Config("configuration must be a JSON object".into()));
        };
        fields.extend(overrides.clone());
        let kind = match fields.get("scenario") {
            Some(v) => serde_json::from_value(v.clone())
                .map_err(|e| Error::Config(format!("scenario: {e}")))?,
            None => ScenarioKind::Beacon1,
        };
        let Value::Object(mut merged) =
            serde_json::to_value(Self::preset(kind)).expect("config serializes")
        else {
            unreachable!("config serializes to an object")
        };
        merged.extend(fields);
        let cfg: Self = serde_json::from_value(Value::Object(merged))
            .map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.simplified.is_empty() {
            return fail("at least one simplified particle count is required".into());
        }
        if let Some(&n) = self
            .simplified
            .iter()
            .find(|&&n| n == 0 || n >= self.particles)
        {
            return fail(format!(
                "simplified count {n} must satisfy 1 <= n < N = {}",
                self.particles
            ));
        }
        if self.replicates < 2 {
            return fail(format!("m must be at least 2, got {}", self.replicates));
        }
        if self.horizon == 0 {
            return fail("horizon must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return fail(format!("alpha must lie in [0, 1), got {}", self.alpha));
        }
        if self.bound_kind == BoundKind::Clt && self.alpha == 0.0 {
            return fail("normal bounds need alpha > 0".into());
        }
        if self.bound_kind == BoundKind::Minmax
            && (self.scenario != ScenarioKind::Toy || self.variant != Variant::B)
        {
            return fail(
                "min/max bounds are only valid for the toy scenario with variant b".into(),
            );
        }
        if self.observations_first == 0 || self.beliefs_per_observation == 0 {
            return fail("n_z(1) and n_b must be at least 1".into());
        }
        for (name, v) in [
            ("grid_step", self.grid_step),
            ("loss_bin_width", self.loss_bin_width),
            ("bound_loss_bin_width", self.bound_loss_bin_width),
            ("noise", self.noise),
            ("dwindle", self.dwindle),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return fail(format!("{name} must be positive, got {v}"));
            }
        }
        if self.threads == Some(0) {
            return fail("threads must be at least 1".into());
        }
        Ok(())
    }

    pub fn scenario_params(&self) -> ScenarioParams {
        ScenarioParams {
            kind: self.scenario,
            particles: self.particles,
            horizon: self.horizon,
            noise: self.noise,
            beacons: self.beacons.clone(),
            beacon_spacing: self.beacon_spacing,
            toy: self.toy.clone(),
        }
    }

    pub fn tree_config(&self) -> Result<TreeConfig> {
        Ok(TreeConfig {
            schedule: ObservationSchedule::new(
                self.observations_first,
                self.dwindle,
                self.horizon,
            )?,
            beliefs_per_observation: self.beliefs_per_observation,
            branch_cap: self.branch_cap,
        })
    }

    pub fn bound_spec(&self) -> Result<BoundSpec> {
        BoundSpec::new(
            self.alpha,
            self.replicates,
            self.variant,
            self.bound_kind,
            self.paper_rounding,
        )
    }

    pub fn root_stream(&self) -> RngStream {
        RngStream::new(self.seed)
    }

    pub fn simplification_spec(&self, n: usize) -> Result<SimplificationSpec> {
        SimplificationSpec::new(
            self.variant,
            n,
            self.root_stream().derive(tag::FROZEN_ROOT).derive(n as u64),
        )
    }
}

/// `N^2 / (n^2 m)`.
pub fn predicted_speedup(big_n: usize, n: usize, m: usize) -> f64 {
    let r = big_n as f64 / n as f64;
    r * r / m as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunTimings {
    pub tree_build_s: f64,
    pub original_returns_s: Option<f64>,
    pub simplified_returns_s: f64,
    pub bound_replicates_s: f64,
    /// Original-return time over simplified-plus-bounds time.
    pub observed_speedup: Option<f64>,
    pub predicted_speedup: f64,
    pub below_resolution: bool,
}

#[derive(Debug, Clone)]
pub struct SimplifiedRun {
    pub n: usize,
    pub online: OnlineReport,
    pub offline: Option<OfflineReport>,
    pub diagnostics: Option<TheoremDiagnostics>,
    pub timings: RunTimings,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub z: f64,
    pub branches: usize,
    pub degenerate_tree_updates: usize,
    pub runs: Vec<SimplifiedRun>,
    pub tree_dump: Option<String>,
}

/// Run `f` on a pool of `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| Error::Config(format!("thread pool: {e}"))),
    }
}

pub fn build_trees(config: &ExperimentConfig, scenario: &Scenario) -> Result<CoupledTrees> {
    let [p, q] = &scenario.policies;
    CoupledTrees::build(
        &scenario.root,
        [p, q],
        &config.tree_config()?,
        &scenario.models,
        config.root_stream(),
    )
}

fn warm_up(trees: &CoupledTrees, scenario: &Scenario, spec: &SimplificationSpec) -> Result<()> {
    if trees.branch_count() > 0 {
        let b = trees.branch(0);
        sample_return(&b.primary.transitions(), &scenario.reward)?;
        let s = RngStream::new(0).derive(tag::WARMUP);
        simplified_return(&b.primary, spec, &scenario.models, &scenario.reward, s)?;
    }
    Ok(())
}

/// Run every configured simplified particle count on one pair of trees.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    with_threads(config.threads, || run_in_pool(config))?
}

fn run_in_pool(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let root = config.root_stream();
    let scenario = Scenario::build(&config.scenario_params(), root.derive(tag::ROOT_BELIEF))?;
    let bounds = config.bound_spec()?;

    let start = Instant::now();
    let trees = build_trees(config, &scenario)?;
    let tree_build_s = start.elapsed().as_secs_f64();

    let mut originals: Option<(OfflineReport, f64)> = None;
    let mut runs = Vec::with_capacity(config.simplified.len());
    for &n in &config.simplified {
        let spec = config.simplification_spec(n)?;
        warm_up(&trees, &scenario, &spec)?;
        let c = Characterization {
            trees: &trees,
            simplification: spec,
            bounds,
            models: &scenario.models,
            reward: &scenario.reward,
            stream: root.derive(tag::SIMPLIFY).derive(n as u64),
        };
        let online = run_algorithm_1(&c, config.grid_step)?;

        let (offline, diagnostics, original_s) = if config.offline_ploss {
            let off = match &originals {
                // original returns do not depend on n; time them once
                Some((first, secs)) => {
                    let quads = first
                        .quadruples
                        .iter()
                        .zip(&online.samples)
                        .map(|(q, s)| crate::loss::ReturnQuadruple {
                            g_tilde: s.g_tilde,
                            g_tilde_prime: s.g_tilde_prime,
                            ..*q
                        })
                        .collect();
                    crate::loss::offline_from_quadruples(quads, &online.grid, *secs)?
                }
                None => {
                    let off = compute_ploss_offline(&trees, &scenario.reward, &online)?;
                    originals = Some((off.clone(), off.original_seconds));
                    off
                }
            };
            let d = verify_theorems(&off.losses, &online, &off.ploss_tdf)?;
            let secs = off.original_seconds;
            (Some(off), Some(d), Some(secs))
        } else {
            (None, None, None)
        };

        let t = online.timings;
        let simplified_total = t.simplified_seconds + t.bounds_seconds;
        let timings = RunTimings {
            tree_build_s,
            original_returns_s: original_s,
            simplified_returns_s: t.simplified_seconds,
            bound_replicates_s: t.bounds_seconds,
            observed_speedup: original_s.map(|o| o / simplified_total),
            predicted_speedup: predicted_speedup(config.particles, n, config.replicates),
            below_resolution: [
                Some(t.simplified_seconds),
                Some(t.bounds_seconds),
                original_s,
            ]
            .into_iter()
            .flatten()
            .any(|s| s < TIMING_FLOOR_SECONDS),
        };
        runs.push(SimplifiedRun {
            n,
            online,
            offline,
            diagnostics,
            timings,
        });
    }

    let tree_dump = if config.dump_tree {
        Some(
            serde_json::to_string_pretty(&trees.dump())
                .map_err(|e| Error::Config(e.to_string()))?,
        )
    } else {
        None
    };
    Ok(ExperimentOutput {
        config: config.clone(),
        z: bounds.z,
        branches: trees.branch_count(),
        degenerate_tree_updates: trees.degenerate_updates(),
        runs,
        tree_dump,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpeedupRow {
    pub n: usize,
    pub m: usize,
    pub original_s: f64,
    pub simplified_s: f64,
    pub observed: f64,
    pub predicted: f64,
    pub below_resolution: bool,
}

/// Time the original returns of every branch against `m` simplified returns
/// of every branch, both policies, after one warm-up evaluation.
pub fn speedup_probe(
    trees: &CoupledTrees,
    scenario: &Scenario,
    spec: &SimplificationSpec,
    m: usize,
) -> Result<SpeedupRow> {
    use rayon::prelude::*;
    warm_up(trees, scenario, spec)?;
    let big_n = trees.root.len();
    let start = Instant::now();
    crate::loss::original_returns(trees, &scenario.reward)?;
    let original_s = start.elapsed().as_secs_f64();
    let base = RngStream::new(spec.n as u64).derive(tag::SIMPLIFY);
    let start = Instant::now();
    (0..trees.branch_count())
        .into_par_iter()
        .map(|k| {
            let pair = trees.branch(k);
            for (p, v) in pair.views().into_iter().enumerate() {
                for r in 0..m {
                    let s = replicate_stream(base.derive(p as u64).derive(pair.leaf), r);
                    simplified_return(v, spec, &scenario.models, &scenario.reward, s)?;
                }
            }
            Ok(())
        })
        .collect::<Result<Vec<()>>>()?;
    let simplified_s = start.elapsed().as_secs_f64();
    Ok(SpeedupRow {
        n: spec.n,
        m,
        original_s,
        simplified_s,
        observed: original_s / simplified_s,
        predicted: predicted_speedup(big_n, spec.n, m),
        below_resolution: original_s < TIMING_FLOOR_SECONDS || simplified_s < TIMING_FLOOR_SECONDS,
    })
}

/// `(bin_left, count)` for bins `[k w, (k + 1) w)` from 0 to the largest sample.
pub fn histogram(samples: &[f64], width: f64) -> Vec<(f64, usize)> {
    if samples.is_empty() {
        return Vec::new();
    }
    let bin = |x: f64| (x.max(0.0) / width).floor() as usize;
    let top = samples.iter().map(|&x| bin(x)).max().unwrap_or(0);
    let mut counts = vec![0usize; top + 1];
    for &x in samples {
        counts[bin(x)] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(k, c)| (k as f64 * width, c))
        .collect()
}

fn mean(xs: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = xs.len() as f64;
    xs.sum::<f64>() / n
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ExperimentOutput {
    pub fn tdf_csv(&self) -> String {
        let mut s = format!("{TDF_HEADER}\n");
        for r in &self.runs {
            for (i, d) in r.online.grid.iter().enumerate() {
                let ploss = r.offline.as_ref().map(|o| o.ploss_tdf[i]);
                let _ = writeln!(
                    s,
                    "{},{},{},{},{}",
                    r.n,
                    d,
                    r.online.pbloss_tdf[i],
                    r.online.beta[i],
                    opt(ploss)
                );
            }
        }
        s
    }

    pub fn summary_csv(&self) -> String {
        let mut s = format!("{SUMMARY_HEADER}\n");
        for r in &self.runs {
            let o = &r.online;
            let ds = o.delta_star;
            let ploss_at = |d: f64| -> Option<f64> {
                r.offline
                    .as_ref()
                    .map(|off| empirical_tdf(&off.losses, &[d]).expect("losses present")[0])
            };
            let diag = r.diagnostics.as_ref();
            let _ = writeln!(
                s,
                "{SCHEMA_VERSION},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                self.config.scenario,
                self.config.particles,
                r.n,
                self.config.replicates,
                self.config.alpha,
                opt(Some(self.z).filter(|z| z.is_finite())),
                self.branches,
                ds,
                o.beta_at(ds),
                o.beta_at(0.5 * ds),
                o.beta_at(0.0),
                o.pbloss_tdf_at(0.0),
                opt(ploss_at(0.0)),
                opt(ploss_at(ds)),
                opt(diag.map(|d| d.lambda_hat)),
                opt(diag.map(|d| d.lambda_floor)),
                opt(diag.map(|d| d.dominated_fraction)),
                mean(o.samples.iter().map(|x| 0.5 * (x.u - x.l))),
                mean(o.samples.iter().map(|x| 0.5 * (x.u_prime - x.l_prime))),
                o.degenerate_branches,
            );
        }
        s
    }

    fn hist_csv(&self, pick: impl Fn(&SimplifiedRun) -> Option<(&[f64], f64)>) -> String {
        let mut s = format!("{HIST_HEADER}\n");
        for r in &self.runs {
            if let Some((samples, width)) = pick(r) {
                for (left, count) in histogram(samples, width) {
                    let _ = writeln!(s, "{},{left},{count}", r.n);
                }
            }
        }
        s
    }

    pub fn hist_loss_csv(&self) -> String {
        self.hist_csv(|r| {
            r.offline
                .as_ref()
                .map(|o| (o.losses.as_slice(), self.config.loss_bin_width))
        })
    }

    pub fn hist_bound_loss_csv(&self) -> String {
        self.hist_csv(|r| {
            Some((
                r.online.bound_losses.as_slice(),
                self.config.bound_loss_bin_width,
            ))
        })
    }

    pub fn timings_csv(&self) -> String {
        let mut s = format!("{TIMINGS_HEADER}\n");
        for r in &self.runs {
            let t = &r.timings;
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                r.n,
                t.tree_build_s,
                opt(t.original_returns_s),
                t.simplified_returns_s,
                t.bound_replicates_s,
                opt(t.observed_speedup),
                t.predicted_speedup,
                t.below_resolution
            );
        }
        s
    }

    /// Human-readable warnings about degenerate updates and coarse timings.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.degenerate_tree_updates > 0 {
            w.push(format!(
                "{} tree belief updates had an all-zero likelihood and were reset to uniform weights",
                self.degenerate_tree_updates
            ));
        }
        for r in &self.runs {
            if r.online.degenerate_branches > 0 {
                w.push(format!(
                    "n = {}: {} branch pairs had degenerate simplified updates",
                    r.n, r.online.degenerate_branches
                ));
            }
            if r.timings.below_resolution {
                w.push(format!(
                    "n = {}: a timed phase ran under {TIMING_FLOOR_SECONDS} s",
                    r.n
                ));
            }
        }
        w
    }
}

/// Write `tdf.csv`, `summary.csv`, `hist_loss.csv`, `hist_bound_loss.csv`,
/// `timings.csv` and, when requested, `tree.json` into `dir`.
pub fn write_outputs(output: &ExperimentOutput, dir: &Path) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("tdf.csv"), output.tdf_csv())?;
    fs::write(dir.join("summary.csv"), output.summary_csv())?;
    fs::write(dir.join("hist_loss.csv"), output.hist_loss_csv())?;
    fs::write(
        dir.join("hist_bound_loss.csv"),
        output.hist_bound_loss_csv(),
    )?;
    fs::write(dir.join("timings.csv"), output.timings_csv())?;
    if let Some(dump) = &output.tree_dump {
        fs::write(dir.join("tree.json"), dump)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_toy() -> ExperimentConfig {
        ExperimentConfig {
            particles: 60,
            simplified: vec![20, 40],
            replicates: 5,
            observations_first: 12,
            ..ExperimentConfig::preset(ScenarioKind::Toy)
        }
    }

    #[test]
    fn presets_validate() {
        for k in [
            ScenarioKind::Beacon1,
            ScenarioKind::Beacon2,
            ScenarioKind::Toy,
        ] {
            ExperimentConfig::preset(k).validate().unwrap();
        }
    }

    #[test]
    fn json_overlays_preset() {
        let mut o = Map::new();
        o.insert("alpha".into(), Value::from(0.2));
        let c =
            ExperimentConfig::from_json(r#"{"scenario": "toy", "particles": 300}"#, &o).unwrap();
        assert_eq!(c.scenario, ScenarioKind::Toy);
        assert_eq!(c.particles, 300);
        assert_eq!(c.replicates, 100);
        assert_eq!(c.alpha, 0.2);
        assert!(ExperimentConfig::from_json(r#"{"bogus": 1}"#, &Map::new()).is_err());
        assert!(ExperimentConfig::from_json(r#"{"simplified": [1500]}"#, &Map::new()).is_err());
        assert!(ExperimentConfig::from_json(r#"{"replicates": 1}"#, &Map::new()).is_err());
        assert!(ExperimentConfig::from_json(r#"{"alpha": 1.0}"#, &Map::new()).is_err());
        assert!(ExperimentConfig::from_json(r#"{"bound_kind": "minmax"}"#, &Map::new()).is_err());
    }

    #[test]
    fn speedup_formula() {
        assert_eq!(predicted_speedup(1000, 100, 10), 10.0);
        assert_eq!(predicted_speedup(1000, 1000, 1), 1.0);
        assert_eq!(
            predicted_speedup(1000, 200, 10) * 4.0,
            predicted_speedup(1000, 100, 10)
        );
    }

    #[test]
    fn histogram_bins() {
        let h = histogram(&[0.0, 0.29, 0.3, 1.0], 0.3);
        assert_eq!(h.iter().map(|x| x.1).collect::<Vec<_>>(), vec![2, 1, 0, 1]);
        assert!(histogram(&[], 1.0).is_empty());
    }

    #[test]
    fn toy_run_writes_every_file() {
        let out = run_experiment(&small_toy()).unwrap();
        assert_eq!(out.runs.len(), 2);
        let dir = tempfile::tempdir().unwrap();
        write_outputs(&out, dir.path()).unwrap();
        for f in [
            "tdf.csv",
            "summary.csv",
            "hist_loss.csv",
            "hist_bound_loss.csv",
            "timings.csv",
        ] {
            let text = fs::read_to_string(dir.path().join(f)).unwrap();
            assert!(text.lines().count() > 1, "{f}");
        }
        let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert_eq!(summary.lines().next().unwrap(), SUMMARY_HEADER);
    }

    #[test]
    fn minmax_toy_has_full_lambda() {
        let cfg = ExperimentConfig {
            bound_kind: BoundKind::Minmax,
            ..small_toy()
        };
        let out = run_experiment(&cfg).unwrap();
        for r in &out.runs {
            assert_eq!(r.diagnostics.as_ref().unwrap().lambda_hat, 1.0);
        }
    }
}
