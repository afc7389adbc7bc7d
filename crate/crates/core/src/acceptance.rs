//! End-to-end acceptance checks, shared by the `suite` command and the
//! acceptance integration test. Each criterion runs on its own stream of the
//! suite seed and reports one PASS/FAIL line.

use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extremal::{self, BlockScheme, WalkOptions, WalkTheta};
use crate::linrw::{self, SimBudget};
use crate::model::{ALaw, AffineLaw, AffineLawSpec, BLaw};
use crate::pointproc::{self, TestFunction};
use crate::recursion::{self, Trajectory};
use crate::rng::{self, RngStream};
use crate::ruin::{self, TargetSet};
use crate::spectral;
use crate::stable::{self, SumOptions};
use crate::stats::{self, Estimate};
use crate::tail::{self, TailFit, TailOptions};

pub const CRITERIA: [(u8, &str); 18] = [
    (1, "alpha recovery, exact curve"),
    (2, "alpha recovery, Monte Carlo"),
    (3, "GARCH route"),
    (4, "Hill consistency"),
    (5, "tail constant scaling"),
    (6, "extremal index tri-consistency"),
    (7, "independence control"),
    (8, "cluster-size oracle"),
    (9, "mean-cluster identity"),
    (10, "Frechet law"),
    (11, "compound Poisson"),
    (12, "ruin time"),
    (13, "logarithm law"),
    (14, "stable limit"),
    (15, "spectral gap"),
    (16, "drift inequality"),
    (17, "mixing gap"),
    (18, "determinism"),
];

const EPS_TRUNC: f64 = 1e-10;
const STATIONARY_BATCH: usize = 1_000_000;
const PATH_LENGTH: usize = 1_000_000;
/// Expected exceedances of the level used by the path estimators of theta.
const THETA_EXCEEDANCES: f64 = 1000.0;
/// Expected exceedances for the compound Poisson check: the top 1% of a
/// path, the same fraction the tail fit uses.
const CLUSTER_EXCEEDANCES: f64 = 10_000.0;

/// One numeric comparison inside a criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub label: String,
    pub value: f64,
    pub bound: String,
    pub pass: bool,
}

impl Check {
    fn at_most(label: &str, value: f64, bound: f64) -> Self {
        Self { label: label.into(), value, bound: format!("<= {bound}"), pass: value <= bound }
    }

    fn at_least(label: &str, value: f64, bound: f64) -> Self {
        Self { label: label.into(), value, bound: format!(">= {bound}"), pass: value >= bound }
    }

    fn within(label: &str, value: f64, target: f64, tol: f64) -> Self {
        Self { label: label.into(), value, bound: format!("{target} +- {tol}"), pass: (value - target).abs() <= tol }
    }

    fn inside(label: &str, value: f64, lo: f64, hi: f64, open: bool) -> Self {
        let pass = if open { value > lo && value < hi } else { value >= lo && value <= hi };
        let bound = if open { format!("in ({lo}, {hi})") } else { format!("in [{lo}, {hi}]") };
        Self { label: label.into(), value, bound, pass }
    }

    fn holds(label: &str, pass: bool) -> Self {
        Self { label: label.into(), value: pass as u8 as f64, bound: "true".into(), pass }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub id: u8,
    pub name: String,
    pub pass: bool,
    pub checks: Vec<Check>,
    pub seconds: f64,
    pub error: Option<String>,
}

impl Outcome {
    /// `PASS 06 extremal index tri-consistency | label=value (bound) ...`
    pub fn line(&self) -> String {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        let mut s = format!("{verdict} {:02} {} [{:.1}s]", self.id, self.name, self.seconds);
        if let Some(e) = &self.error {
            s.push_str(&format!(" | error: {e}"));
        }
        for c in &self.checks {
            let mark = if c.pass { "" } else { " !" };
            s.push_str(&format!(" | {}={:.6} ({}){mark}", c.label, c.value, c.bound));
        }
        s
    }
}

/// Shared L2P quantities used by several criteria.
struct TwoPoint {
    law: AffineLaw,
    sample_radii: Vec<f64>,
    fit: TailFit,
    path: Vec<f64>,
    theory: WalkTheta,
    blocks: Estimate,
    setup_seconds: f64,
}

pub struct Suite {
    seed: u64,
    scratch: PathBuf,
    l2p: OnceLock<Result<TwoPoint, String>>,
}

fn runtime(label: &str, start: Instant, limit_s: f64) -> Check {
    Check::at_most(label, start.elapsed().as_secs_f64(), limit_s)
}

fn pareto(alpha: f64, count: usize, rng: &RngStream) -> Vec<f64> {
    let mut g = rng.generator();
    (0..count).map(|_| (1.0 - g.random::<f64>()).powf(-1.0 / alpha)).collect()
}

fn tuned_two_point(alpha: f64) -> AffineLawSpec {
    let p = (1.0 - 2f64.powf(-alpha)) / (2f64.powf(alpha) - 2f64.powf(-alpha));
    AffineLawSpec::two_point(2.0, 0.5, p)
}

impl Suite {
    /// `scratch` receives the artifacts of the determinism reruns.
    pub fn new(seed: u64, scratch: impl AsRef<Path>) -> Self {
        Self { seed, scratch: scratch.as_ref().to_path_buf(), l2p: OnceLock::new() }
    }

    fn stream(&self, id: u8) -> RngStream {
        RngStream::new(self.seed, id as u64)
    }

    fn l2p(&self) -> Result<&TwoPoint> {
        self.l2p
            .get_or_init(|| self.build_l2p().map_err(|e| e.to_string()))
            .as_ref()
            .map_err(|e| Error::Inconclusive(format!("shared two-point setup failed: {e}")))
    }

    fn build_l2p(&self) -> Result<TwoPoint> {
        let start = Instant::now();
        let root = RngStream::new(self.seed, 100);
        let law = AffineLaw::new(AffineLawSpec::l2p())?;
        let alpha = linrw::solve_alpha(&law, &SimBudget::default(), &root, (0.1, 3.0), 1e-9)?.alpha;
        let sample = recursion::sample_stationary(&law, STATIONARY_BATCH, EPS_TRUNC, &root.fork("stationary"))?;
        let fit = tail::fit_tail(&sample, &TailOptions { alpha: Some(alpha), ..TailOptions::default() })?;
        let path = recursion::stationary_path(&law, PATH_LENGTH, EPS_TRUNC, &root.fork("path"))?.radii();
        let theory = extremal::theta_theory(&law, &fit, &WalkOptions::default(), &root.fork("theory"))?;
        let u = extremal::level_for(&fit, PATH_LENGTH, THETA_EXCEEDANCES);
        let scheme = BlockScheme::sparse(PATH_LENGTH, THETA_EXCEEDANCES)?;
        let blocks = extremal::theta_blocks(&path, u, &scheme, &root.fork("blocks"))?;
        let setup_seconds = start.elapsed().as_secs_f64();
        Ok(TwoPoint { law, sample_radii: sample.radii(), fit, path, theory, blocks, setup_seconds })
    }

    /// Runs one criterion; errors become a failed outcome.
    pub fn run(&self, id: u8) -> Outcome {
        let name = CRITERIA.iter().find(|c| c.0 == id).map_or("unknown", |c| c.1).to_string();
        let start = Instant::now();
        let result = match id {
            1 => self.c01(),
            2 => self.c02(),
            3 => self.c03(),
            4 => self.c04(),
            5 => self.c05(),
            6 => self.c06(),
            7 => self.c07(),
            8 => self.c08(),
            9 => self.c09(),
            10 => self.c10(),
            11 => self.c11(),
            12 => self.c12(),
            13 => self.c13(),
            14 => self.c14(),
            15 => self.c15(),
            16 => self.c16(),
            17 => self.c17(),
            18 => self.c18(),
            _ => Err(Error::InvalidInput(format!("no criterion {id}"))),
        };
        let seconds = start.elapsed().as_secs_f64();
        match result {
            Ok(checks) => Outcome { id, name, pass: checks.iter().all(|c| c.pass), checks, seconds, error: None },
            Err(e) => Outcome { id, name, pass: false, checks: Vec::new(), seconds, error: Some(e.to_string()) },
        }
    }

    pub fn run_all(&self, ids: &[u8]) -> Vec<Outcome> {
        ids.iter().map(|&id| self.run(id)).collect()
    }

    fn c01(&self) -> Result<Vec<Check>> {
        let start = Instant::now();
        let law = AffineLaw::new(AffineLawSpec::l2p())?;
        let s = linrw::solve_alpha(&law, &SimBudget::default(), &self.stream(1), (0.1, 3.0), 1e-9)?;
        Ok(vec![
            Check::within("alpha", s.alpha, 1.0, 1e-6),
            Check::holds("exact", s.exact),
            runtime("seconds", start, 1.0),
        ])
    }

    fn mc_alpha(&self, spec: AffineLawSpec, id: u8) -> Result<linrw::AlphaSolution> {
        let law = AffineLaw::new(spec)?;
        // ladder {1, 2, 4}: well inside the 50-step budget; scalar products
        // have E|S_n|^s = k(s)^n exactly, so short paths lose nothing
        let budget = SimBudget { path_length: 1000, replicas: 100_000, ladder_base: 1 };
        linrw::solve_alpha(&law, &budget, &self.stream(id), (0.1, 3.0), 0.05)
    }

    fn c02(&self) -> Result<Vec<Check>> {
        let start = Instant::now();
        let spec =
            AffineLawSpec::scalar(ALaw::ScalarLognormal { mu_log: -0.5, sigma_log: 1.0 }, BLaw::Constant(vec![1.0]));
        let s = self.mc_alpha(spec, 2)?;
        Ok(vec![Check::within("alpha", s.alpha, 1.0, 0.05), runtime("seconds", start, 30.0)])
    }

    fn c03(&self) -> Result<Vec<Check>> {
        let spec = AffineLawSpec::scalar(ALaw::GarchSquared { a: 1.0 }, BLaw::Constant(vec![1.0]));
        let s = self.mc_alpha(spec, 3)?;
        Ok(vec![Check::within("alpha", s.alpha, 1.0, 0.05)])
    }

    fn c04(&self) -> Result<Vec<Check>> {
        let iid = tail::hill_alpha(&pareto(2.0, 100_000, &self.stream(4)), 0.01)?;
        let l2p = tail::hill_alpha(&self.l2p()?.sample_radii, 0.01)?;
        Ok(vec![Check::within("hill_pareto2", iid.value, 2.0, 0.15), Check::within("hill_l2p", l2p.value, 1.0, 0.1)])
    }

    fn c05(&self) -> Result<Vec<Check>> {
        let base = self.l2p()?;
        let law = AffineLaw::new(AffineLawSpec::l2p().with_b_scaled(2.0))?;
        let sample = recursion::sample_stationary(&law, STATIONARY_BATCH, EPS_TRUNC, &self.stream(5))?;
        let fit = tail::fit_tail(&sample, &TailOptions { alpha: Some(base.fit.alpha), ..TailOptions::default() })?;
        let ratio = fit.c / base.fit.c;
        let target = 2f64.powf(base.fit.alpha);
        Ok(vec![Check::within("c_ratio", ratio, target, 0.2 * target)])
    }

    fn c06(&self) -> Result<Vec<Check>> {
        let start = Instant::now();
        let t = self.l2p()?;
        let u = extremal::level_for(&t.fit, PATH_LENGTH, THETA_EXCEEDANCES);
        let runs = extremal::theta_runs(&t.path, u, extremal::DEFAULT_RUN_LENGTH)?;
        let theory = t.theory.theta;
        let mut checks = vec![
            Check::at_most("blocks_vs_runs", (t.blocks.value - runs.value).abs(), 0.05),
            Check::at_most("blocks_vs_theory", (t.blocks.value - theory.value).abs(), 0.05),
            Check::at_most("runs_vs_theory", (runs.value - theory.value).abs(), 0.05),
        ];
        for (label, e) in [("blocks", t.blocks), ("runs", runs), ("theory", theory)] {
            checks.push(Check::inside(label, e.value, 0.02, 0.98, true));
            checks.push(Check::at_least(&format!("{label}_sigmas_below_1"), (1.0 - e.value) / e.stderr, 3.0));
        }
        // the shared path, fit and walk are part of this criterion's cost
        checks.push(Check::at_most("seconds", start.elapsed().as_secs_f64() + t.setup_seconds, 120.0));
        Ok(checks)
    }

    fn c07(&self) -> Result<Vec<Check>> {
        let n = PATH_LENGTH;
        let marks = pareto(1.0, n, &self.stream(7));
        // P{X > u} = 1/u: level with 1000 expected exceedances
        let u = n as f64 / THETA_EXCEEDANCES;
        let scheme = BlockScheme::sparse(n, THETA_EXCEEDANCES)?;
        let e = extremal::theta_blocks(&marks, u, &scheme, &self.stream(7).fork("bootstrap"))?;
        Ok(vec![Check::at_least("theta_blocks", e.value, 0.9)])
    }

    fn c08(&self) -> Result<Vec<Check>> {
        let law = AffineLaw::new(AffineLawSpec::deterministic(0.5, 1.0))?;
        let fit = TailFit::scalar(1.0, 1.0);
        let c = extremal::cluster_sizes(&law, &fit, &WalkOptions::default(), None, &self.stream(8))?;
        let worst = c.zeta.iter().enumerate().map(|(k, z)| (z - 0.5f64.powi(k as i32 + 1)).abs()).fold(0.0, f64::max);
        // monotone up to sampling noise of the later atom
        let monotone = c.zeta.windows(2).zip(&c.zeta_stderr[1..]).all(|(w, se)| w[1] <= w[0] + 2.0 * se);
        Ok(vec![
            Check::at_most("max_atom_error", worst, 0.01),
            Check::within("nu_sum", c.nu.iter().sum(), 1.0, 1e-12),
            Check::holds("zeta_nonincreasing", monotone),
        ])
    }

    fn c09(&self) -> Result<Vec<Check>> {
        let t = self.l2p()?;
        let c = extremal::cluster_sizes(&t.law, &t.fit, &WalkOptions::default(), None, &self.stream(9))?;
        let th = t.theory.theta;
        let inv = 1.0 / th.value;
        let z1 = c.theta();
        let se = ((th.stderr / (th.value * th.value)).powi(2) + (z1.stderr / (z1.value * z1.value)).powi(2)).sqrt();
        Ok(vec![Check::at_most("abs_diff_over_stderr", (inv - c.mean_size()).abs() / se, 3.0)])
    }

    fn c10(&self) -> Result<Vec<Check>> {
        let t = self.l2p()?;
        let m = pointproc::block_maxima(&t.law, 10_000, 1000, EPS_TRUNC, &self.stream(10))?;
        let f = pointproc::frechet_fit(&m, &t.fit)?;
        Ok(vec![
            Check::at_most("ks", f.ks_distance, 0.08),
            Check::at_most("theta_fit_vs_blocks", (f.theta.value - t.blocks.value).abs(), 0.07),
        ])
    }

    fn c11(&self) -> Result<Vec<Check>> {
        let t = self.l2p()?;
        let c = extremal::cluster_sizes(&t.law, &t.fit, &WalkOptions::default(), None, &self.stream(11))?;
        let u = extremal::level_for(&t.fit, PATH_LENGTH, CLUSTER_EXCEEDANCES);
        let proc = pointproc::exceedances(&Trajectory::from_scalars(t.path.clone()), u, 1.0)?;
        let test = pointproc::interexceedance_test(&proc, &c.nu, extremal::DEFAULT_RUN_LENGTH)?;
        Ok(vec![
            Check::at_most("size_tv", test.size_dist_tv, 0.1),
            Check::at_most("gap_ks", test.cluster_count_poisson_ks, 0.1),
        ])
    }

    fn c12(&self) -> Result<Vec<Check>> {
        let t = self.l2p()?;
        let rng = self.stream(12);
        let s = stats::sorted(&t.sample_radii);
        let level = stats::quantile_sorted(&s, 0.999);
        let theta = t.theory.theta.value;
        let horizon = ruin::default_horizon(&t.fit, theta, level);
        let target = TargetSet::exterior();
        let hits =
            ruin::hitting_times(&t.law, &[0.0], &target, level, 1000, horizon, t.fit.norm, &rng.fork("hitting"))?;
        let scaled: Vec<f64> = hits.times.iter().map(|&k| k as f64 * level.powf(-t.fit.alpha)).collect();
        // mean waiting time of the limiting exponential: alpha / (c theta)
        let expected = t.fit.alpha / (t.fit.c * theta);
        let fit = ruin::exp_fit(&hits, t.fit.alpha)?;
        let cone = TargetSet::half_line(vec![1.0]);
        let set = ruin::theta_of_set(
            &t.law,
            &t.fit,
            &cone,
            100_000,
            extremal::DEFAULT_HORIZON_CAP,
            extremal::DEFAULT_EPS_STOP,
            &rng.fork("cone"),
        )?;
        let sigma = t.theory.theta.stderr.hypot(set.theta_a.stderr);
        Ok(vec![
            Check::within("mean_scaled_tau", stats::mean(&scaled), expected, 0.15 * expected),
            Check::at_most("exp_ks", fit.ks_distance, 0.1),
            Check::at_most("theta_cone_minus_bound", set.theta_a.value - (theta + 2.0 * sigma), 0.0),
        ])
    }

    fn c13(&self) -> Result<Vec<Check>> {
        let law = AffineLaw::new(AffineLawSpec::l2p())?;
        let rng = self.stream(13);
        let maxima = rng::replicate(&rng, 100, |i, _| -> Result<Vec<f64>> {
            let t = recursion::simulate_path(&law, &[0.0], PATH_LENGTH, &rng.substream(i as u64))?;
            Ok(pointproc::running_maxima(&t.radii()))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let l = pointproc::loglaw_from_maxima(&maxima)?;
        Ok(vec![Check::inside("median_ratio", l.median_ratio, 0.9, 1.1, false)])
    }

    fn c14(&self) -> Result<Vec<Check>> {
        let rng = self.stream(14);
        let opts = SumOptions { replicas: 1000, ..SumOptions::default() };
        let mut checks = Vec::new();

        let start = Instant::now();
        let t = self.l2p()?;
        let s = stable::partial_sums(&t.law, &t.fit, &[10_000, 40_000], &opts, &rng.fork("l2p"))?;
        let c = stable::stability_check(&s[0], &s[1])?;
        checks.push(Check::holds("l2p_regime_alpha_eq_1", s[0].regime == stable::Regime::AlphaEq1));
        checks.push(Check::at_most("l2p_median_matched_ks", c.ks_distance, 0.06));
        checks.push(runtime("l2p_seconds", start, 300.0));

        let start = Instant::now();
        let law = AffineLaw::new(tuned_two_point(0.7))?;
        let alpha = linrw::solve_alpha(&law, &SimBudget::default(), &rng, (0.1, 3.0), 1e-9)?.alpha;
        let fit = TailFit::scalar(alpha, 1.0).with_signs(1.0, 0.0);
        let s = stable::partial_sums(&law, &fit, &[10_000, 40_000], &opts, &rng.fork("tuned"))?;
        let c = stable::stability_check(&s[0], &s[1])?;
        checks.push(Check::holds("tuned_regime_below_1", s[0].regime == stable::Regime::AlphaBelow1));
        checks.push(Check::at_most("tuned_ks", c.ks_distance, 0.05));
        checks.push(Check::at_most("tuned_ecf_defect", c.ecf_defect, 0.05));
        checks.push(runtime("tuned_seconds", start, 300.0));
        Ok(checks)
    }

    fn c15(&self) -> Result<Vec<Check>> {
        let law = AffineLaw::new(AffineLawSpec::scalar(
            ALaw::FiniteSupport(vec![(vec![vec![0.5]], 1.0)]),
            BLaw::FiniteSupport(vec![(vec![0.0], 0.5), (vec![0.5], 0.5)]),
        ))?;
        let op = spectral::build_grid_operator(&law, 2048, (0.0, 1.0))?;
        let e = spectral::second_eigenvalue(&op, 1000)?;
        let mu = op.stationary_vector(100_000);
        Ok(vec![
            Check::within("lambda2", e.lambda2, 0.5, 0.01),
            Check::at_most("stationary_uniform_defect", op.uniformity_defect(&mu), 1e-3),
        ])
    }

    fn c16(&self) -> Result<Vec<Check>> {
        let law = AffineLaw::new(AffineLawSpec::l2p())?;
        let r = spectral::verify_drift(&law, 1.0, 0.5, 20, &spectral::default_drift_grid(), 10_000, &self.stream(16))?;
        Ok(vec![Check::at_most("beta_hat", r.beta_hat, 1.0), Check::at_least("margin_sigmas", r.margin_sigmas(), 3.0)])
    }

    fn c17(&self) -> Result<Vec<Check>> {
        let t = self.l2p()?;
        let rng = self.stream(17);
        let grid: Vec<usize> = (10..=16).map(|k| 1usize << k).collect();
        let f = TestFunction::default();
        let curve = pointproc::mixing_gap_coupled(&t.law, &t.fit, &f, &grid, 4000, EPS_TRUNC, &rng.fork("l2p"))?;
        // i.i.d. Pareto(1) marks: u_n = n, and the surrogate has the same law
        let n_max = *grid.last().unwrap();
        let paths: Vec<Vec<f64>> = (0..512).map(|i| pareto(1.0, n_max, &rng.fork("iid").substream(i))).collect();
        let refs: Vec<&[f64]> = paths.iter().map(|p| p.as_slice()).collect();
        let control = pointproc::mixing_gap(&refs, &f, &[n_max], |n| n as f64)?;
        let g = control.points[0].gap;
        Ok(vec![
            Check::at_most("slope", curve.slope, -0.3),
            Check::at_most("iid_gap_sigmas", g.value.abs() / g.stderr, 2.0),
        ])
    }

    fn c18(&self) -> Result<Vec<Check>> {
        let config = crate::cli::RunConfig::determinism_probe(self.seed);
        let mut checks = Vec::new();
        for command in ["simulate", "theta", "clusters", "ruin"] {
            let dirs: Vec<PathBuf> =
                ["a", "b", "c"].iter().map(|s| self.scratch.join(format!("determinism-{command}-{s}"))).collect();
            for (dir, threads) in dirs.iter().zip([1, 1, 2]) {
                if dir.exists() {
                    std::fs::remove_dir_all(dir)?;
                }
                let mut cfg = config.clone();
                cfg.output_dir = dir.clone();
                crate::cli::execute(command, &cfg, threads)?;
            }
            checks.push(Check::holds(
                &format!("{command}_rerun_identical"),
                crate::cli::same_artifacts(&dirs[0], &dirs[1])?,
            ));
            checks.push(Check::holds(
                &format!("{command}_two_threads_identical"),
                crate::cli::same_artifacts(&dirs[0], &dirs[2])?,
            ));
        }
        Ok(checks)
    }
}
