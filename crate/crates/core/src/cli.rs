//! Command-line front end: JSON run configs with dotted overrides, one
//! command per module, artifacts plus a manifest per output directory.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::acceptance::{self, Suite};
use crate::error::{Error, Result};
use crate::extremal::{self, BlockScheme, ExtremalReport, WalkOptions};
use crate::linalg::VectorNorm;
use crate::linrw::{self, SimBudget};
use crate::model::{self, AffineLaw, AffineLawSpec};
use crate::pointproc::{self, TestFunction};
use crate::recursion::{self, StationarySample, Trajectory};
use crate::rng::RngStream;
use crate::ruin::{self, TargetSet};
use crate::spectral;
use crate::stable::{self, SumOptions};
use crate::stats;
use crate::tail::{self, TailFit, TailOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_UNRELIABLE: i32 = 2;
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Budget {
    pub path_length: usize,
    pub replicas: usize,
    /// Size of stationary batches (tail fits, centering).
    pub batch: usize,
    /// Base n0 of the moment ladder {n0, 2 n0, 4 n0}.
    pub ladder_base: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Self { path_length: 1_000_000, replicas: 1000, batch: 1_000_000, ladder_base: 1 }
    }
}

impl Budget {
    pub fn sim(&self) -> SimBudget {
        SimBudget { path_length: self.path_length, replicas: self.replicas, ladder_base: self.ladder_base }
    }
}

/// Command-specific settings; every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Options {
    pub eps_trunc: f64,
    /// Fixed tail index; solved or Hill-estimated when absent.
    pub alpha: Option<f64>,
    pub alpha_bracket: Option<(f64, f64)>,
    /// Root tolerance; 1e-9 on exact curves and 0.05 otherwise when absent.
    pub alpha_tol: Option<f64>,
    pub s_grid: Vec<f64>,
    pub k_frac: f64,
    pub norm: VectorNorm,
    /// Start point of `simulate` and `ruin`; the origin when absent.
    pub start: Option<Vec<f64>>,
    /// Expected exceedances of the level used by the path estimators.
    pub expected_exceedances: f64,
    pub run_length: usize,
    pub walk_count: usize,
    pub horizon_cap: usize,
    pub eps_stop: f64,
    pub max_cluster_size: Option<usize>,
    pub loglaw_paths: usize,
    pub mixing_grid: Vec<usize>,
    pub mixing_replicas: usize,
    pub target: TargetSet,
    /// Target scale t as a quantile of the stationary radius.
    pub t_quantile: f64,
    pub ruin_horizon: Option<u64>,
    pub sum_n: usize,
    pub grid_n: usize,
    pub interval: (f64, f64),
    pub iters: usize,
    pub chi: f64,
    pub ell: usize,
    pub x_grid: Option<Vec<f64>>,
    /// Criteria run by `suite`; all when absent.
    pub criteria: Option<Vec<u8>>,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            eps_trunc: 1e-10,
            alpha: None,
            alpha_bracket: None,
            alpha_tol: None,
            s_grid: (1..=30).map(|i| 0.1 * i as f64).collect(),
            k_frac: 0.01,
            norm: VectorNorm::Euclidean,
            start: None,
            expected_exceedances: 1000.0,
            run_length: extremal::DEFAULT_RUN_LENGTH,
            walk_count: 100_000,
            horizon_cap: extremal::DEFAULT_HORIZON_CAP,
            eps_stop: extremal::DEFAULT_EPS_STOP,
            max_cluster_size: None,
            loglaw_paths: 100,
            mixing_grid: (10..=16).map(|k| 1 << k).collect(),
            mixing_replicas: 4000,
            target: TargetSet::exterior(),
            t_quantile: 0.999,
            ruin_horizon: None,
            sum_n: 10_000,
            grid_n: 2048,
            interval: (0.0, 1.0),
            iters: 1000,
            chi: 0.5,
            ell: 20,
            x_grid: None,
            criteria: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: AffineLawSpec,
    #[serde(default)]
    pub budget: Budget,
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub options: Options,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn config_error(field: impl Into<String>, message: impl ToString) -> Error {
    Error::Config { field: field.into(), message: message.to_string() }
}

/// Sets `key` (dotted) in a JSON document, creating objects on the way.
/// The value is parsed as JSON and kept as a string when that fails.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) =
        assignment.split_once('=').ok_or_else(|| config_error(assignment, "override must be key=value"))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(config_error(key, "empty path segment"));
        }
        if !node.is_object() {
            *node = Value::Object(Default::default());
        }
        let map = node.as_object_mut().unwrap();
        if i + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        node = map.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

impl RunConfig {
    /// Parses a config document after applying overrides, seed and output
    /// directory; errors name the offending field or line.
    pub fn from_json(text: &str, overrides: &[String], seed: Option<u64>, out: Option<&Path>) -> Result<Self> {
        let mut doc: Value = serde_json::from_str(text)
            .map_err(|e| config_error(format!("line {} column {}", e.line(), e.column()), e))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        if let Some(s) = seed {
            apply_override(&mut doc, &format!("seed={s}"))?;
        }
        if let Some(dir) = out {
            doc.as_object_mut()
                .ok_or_else(|| config_error("<root>", "config must be a JSON object"))?
                .insert("output_dir".into(), Value::String(dir.to_string_lossy().into_owned()));
        }
        let cfg: RunConfig = serde_path_to_error::deserialize(doc).map_err(|e| {
            let path = e.path().to_string();
            config_error(path, e.into_inner())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String], seed: Option<u64>, out: Option<&Path>) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| config_error(path.display().to_string(), e))?;
        Self::from_json(&text, overrides, seed, out)
    }

    pub fn validate(&self) -> Result<()> {
        let b = &self.budget;
        for (field, v) in [
            ("budget.path_length", b.path_length),
            ("budget.replicas", b.replicas),
            ("budget.batch", b.batch),
            ("budget.ladder_base", b.ladder_base),
        ] {
            if v == 0 {
                return Err(config_error(field, "must be positive"));
            }
        }
        AffineLaw::new(self.model.clone()).map_err(|e| config_error("model", e))?;
        Ok(())
    }

    /// SHA-256 of the config with the output directory blanked.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        let digest = Sha256::digest(&bytes);
        format!("sha256:{}", digest.iter().map(|b| format!("{b:02x}")).collect::<String>())
    }

    /// Small two-point config used by the determinism criterion.
    pub fn determinism_probe(seed: u64) -> Self {
        Self {
            model: AffineLawSpec::l2p(),
            budget: Budget { path_length: 20_000, replicas: 200, batch: 20_000, ladder_base: 1 },
            seed,
            output_dir: default_output_dir(),
            options: Options { walk_count: 5_000, expected_exceedances: 100.0, t_quantile: 0.99, ..Options::default() },
        }
    }
}

/// Files written by a command and the soft flags it raised.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub artifacts: Vec<String>,
    pub flags: Vec<String>,
    /// Set by `suite` when a criterion fails.
    pub failed: bool,
}

impl RunSummary {
    pub fn exit_code(&self) -> i32 {
        if self.failed {
            EXIT_ERROR
        } else if self.flags.is_empty() {
            EXIT_OK
        } else {
            EXIT_UNRELIABLE
        }
    }

    fn flag(&mut self, on: bool, name: &str) {
        if on && !self.flags.iter().any(|f| f == name) {
            self.flags.push(name.to_string());
        }
    }
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    law: AffineLaw,
    rng: RngStream,
    summary: RunSummary,
}

impl Ctx<'_> {
    fn file(&mut self, name: &str) -> Result<BufWriter<File>> {
        self.summary.artifacts.push(name.to_string());
        Ok(BufWriter::new(File::create(self.cfg.output_dir.join(name))?))
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut f = self.file(name)?;
        serde_json::to_writer_pretty(&mut f, value)?;
        writeln!(f)?;
        f.flush()?;
        Ok(())
    }

    fn opts(&self) -> &Options {
        &self.cfg.options
    }

    fn alpha_tol(&self) -> f64 {
        self.opts().alpha_tol.unwrap_or(if linrw::exact_log_k(&self.law, 1.0).is_some() { 1e-9 } else { 0.05 })
    }

    fn solve_alpha(&self) -> Result<linrw::AlphaSolution> {
        let budget = self.cfg.budget.sim();
        let rng = self.rng.fork("alpha");
        let bracket = match self.opts().alpha_bracket {
            Some(b) => b,
            None => model::find_bracket(&self.law, &budget, &rng)?
                .ok_or_else(|| Error::Inconclusive("no sign change of log k(s) on (0, 64]".into()))?,
        };
        linrw::solve_alpha(&self.law, &budget, &rng, bracket, self.alpha_tol())
    }

    /// Tail index from the config, the exact moment curve, or Hill.
    fn alpha(&self) -> Result<Option<f64>> {
        if let Some(a) = self.opts().alpha {
            return Ok(Some(a));
        }
        if linrw::exact_log_k(&self.law, 1.0).is_some() {
            return Ok(Some(self.solve_alpha()?.alpha));
        }
        Ok(None)
    }

    fn stationary(&self) -> Result<StationarySample> {
        recursion::sample_stationary(
            &self.law,
            self.cfg.budget.batch,
            self.opts().eps_trunc,
            &self.rng.fork("stationary"),
        )
    }

    fn fit(&mut self) -> Result<(TailFit, StationarySample)> {
        let sample = self.stationary()?;
        let opts = TailOptions { k_frac: self.opts().k_frac, alpha: self.alpha()?, norm: self.opts().norm };
        let fit = tail::fit_tail(&sample, &opts)?;
        self.summary.flag(fit.no_plateau, "NoPlateau");
        Ok((fit, sample))
    }

    fn path(&self) -> Result<Trajectory> {
        recursion::stationary_path(
            &self.law,
            self.cfg.budget.path_length,
            self.opts().eps_trunc,
            &self.rng.fork("path"),
        )
    }

    fn walk(&self) -> WalkOptions {
        WalkOptions {
            count: self.opts().walk_count,
            horizon_cap: self.opts().horizon_cap,
            eps_stop: self.opts().eps_stop,
        }
    }
}

fn cmd_check(ctx: &mut Ctx) -> Result<()> {
    let ce = model::check_ce(&ctx.law, &ctx.cfg.budget.sim(), &ctx.rng.fork("check"))?;
    let ip = model::check_ip(&ctx.law, ctx.cfg.budget.replicas, &ctx.rng.fork("ip"))?;
    let holds = ce.lyapunov_negative && ce.alpha_root.is_some() && ce.moments_finite && ce.no_fixed_point;
    ctx.summary.flag(!holds, "ConditionNotMet");
    ctx.json(
        "check.json",
        &json!({ "contraction_expansion": ce, "irreducibility_proximality": ip, "conditions_hold": holds }),
    )
}

fn cmd_simulate(ctx: &mut Ctx) -> Result<()> {
    let x = ctx.opts().start.clone().unwrap_or_else(|| vec![0.0; ctx.law.dim()]);
    let t = recursion::simulate_path(&ctx.law, &x, ctx.cfg.budget.path_length, &ctx.rng.fork("simulate"))?;
    ctx.summary.flag(t.overflow, "Overflow");
    let mut f = ctx.file("trajectory.csv")?;
    t.write_csv(&mut f)?;
    f.flush()?;
    ctx.json("simulate.json", &json!({ "steps": t.len(), "start": x, "overflow": t.overflow }))
}

fn cmd_alpha(ctx: &mut Ctx) -> Result<()> {
    let sol = ctx.solve_alpha()?;
    let curve = linrw::moment_curve(&ctx.law, &ctx.opts().s_grid, &ctx.cfg.budget.sim(), &ctx.rng.fork("curve"))?;
    ctx.summary.flag(sol.heavy_tail_variance || curve.heavy_tail_variance, "HeavyTailVariance");
    let mut f = ctx.file("moment_curve.csv")?;
    curve.write_csv(&mut f)?;
    f.flush()?;
    ctx.json("alpha.json", &sol)
}

fn cmd_tail(ctx: &mut Ctx) -> Result<()> {
    let (fit, sample) = ctx.fit()?;
    let radii = sample.radii_with(fit.norm);
    let tc = tail::tail_constant(&radii, fit.alpha, &tail::default_t_grid(&radii))?;
    let mut f = ctx.file("tail_constant.csv")?;
    tc.write_csv(&mut f)?;
    f.flush()?;
    ctx.json("tail_fit.json", &fit)
}

fn cmd_theta(ctx: &mut Ctx) -> Result<()> {
    let (fit, _) = ctx.fit()?;
    let radii = ctx.path()?.radii_with(fit.norm);
    let n = radii.len();
    let scheme = BlockScheme::sparse(n, ctx.opts().expected_exceedances)?;
    let level = extremal::level_for(&fit, n, ctx.opts().expected_exceedances);
    let m = ctx.opts().run_length;
    let theta_blocks = extremal::theta_blocks(&radii, level, &scheme, &ctx.rng.fork("bootstrap"))?;
    let theta_runs = extremal::theta_runs(&radii, level, m)?;
    let theta_theory = extremal::theta_theory(&ctx.law, &fit, &ctx.walk(), &ctx.rng.fork("theory"))?;
    let clusters =
        extremal::cluster_sizes(&ctx.law, &fit, &ctx.walk(), ctx.opts().max_cluster_size, &ctx.rng.fork("clusters"))?;
    let m_grid: Vec<usize> = [1, 2, 5, 10, 20, 50, 100].into_iter().filter(|&k| k < scheme.r_n).collect();
    let anticluster_curve = extremal::anticluster_diag(&[&radii], level, &scheme, &m_grid)?;
    let runs_curve = extremal::runs_stability(&radii, level, &[10, 25, 50, 100, 200])?;
    ctx.summary.flag(theta_theory.unreliable || clusters.unreliable, "Unreliable");
    let report = ExtremalReport {
        level,
        scheme,
        theta_blocks,
        theta_runs,
        run_length: m,
        theta_theory,
        clusters,
        anticluster_curve,
        runs_curve,
    };
    let mut f = ctx.file("anticluster.csv")?;
    report.write_anticluster_csv(&mut f)?;
    f.flush()?;
    ctx.json("extremal.json", &report)
}

fn cmd_clusters(ctx: &mut Ctx) -> Result<()> {
    let (fit, _) = ctx.fit()?;
    let law =
        extremal::cluster_sizes(&ctx.law, &fit, &ctx.walk(), ctx.opts().max_cluster_size, &ctx.rng.fork("clusters"))?;
    ctx.summary.flag(law.unreliable, "Unreliable");
    let path = ctx.path()?;
    let level = extremal::level_for(&fit, path.len(), ctx.opts().expected_exceedances);
    let proc = pointproc::exceedances(&path, level, 1.0)?;
    let test = pointproc::interexceedance_test(&proc, &law.nu, ctx.opts().run_length)?;
    ctx.summary.flag(test.too_few_clusters, "Unreliable");
    let mut f = ctx.file("clusters.csv")?;
    law.write_csv(&mut f)?;
    f.flush()?;
    ctx.json(
        "clusters.json",
        &json!({ "theta": law.theta(), "mean_size": law.mean_size(), "level": level, "path_test": test }),
    )
}

fn cmd_frechet(ctx: &mut Ctx) -> Result<()> {
    let (fit, _) = ctx.fit()?;
    let b = ctx.cfg.budget;
    let maxima =
        pointproc::block_maxima(&ctx.law, b.path_length, b.replicas, ctx.opts().eps_trunc, &ctx.rng.fork("maxima"))?;
    let ff = pointproc::frechet_fit(&maxima, &fit)?;
    ctx.summary.flag(ff.bad_fit, "BadFit");
    let u = tail::u_n(&fit, b.path_length as f64);
    let mut w = csv::Writer::from_writer(ctx.file("maxima.csv")?);
    w.write_record(["replica", "max", "scaled"])?;
    for (i, m) in maxima.maxima.iter().enumerate() {
        w.write_record([i.to_string(), m.to_string(), (m / u).to_string()])?;
    }
    w.flush()?;
    ctx.json("frechet.json", &json!({ "n": b.path_length, "u_n": u, "alpha": fit.alpha, "fit": ff }))
}

fn cmd_pointproc(ctx: &mut Ctx) -> Result<()> {
    let (fit, _) = ctx.fit()?;
    let path = ctx.path()?;
    let level = extremal::level_for(&fit, path.len(), ctx.opts().expected_exceedances);
    let proc = pointproc::exceedances(&path, level, 1.0)?;
    let mut f = ctx.file("exceedances.ndjson")?;
    proc.write_ndjson(&mut f)?;
    f.flush()?;

    let n = ctx.cfg.budget.path_length;
    let law = &ctx.law;
    let eps = ctx.opts().eps_trunc;
    let stream = ctx.rng.fork("loglaw");
    let maxima = crate::rng::replicate(&stream, ctx.opts().loglaw_paths, |i, _| -> Result<Vec<f64>> {
        let x = vec![0.0; law.dim()];
        Ok(pointproc::running_maxima(&recursion::simulate_path(law, &x, n, &stream.substream(i as u64))?.radii()))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let loglaw = pointproc::loglaw_from_maxima(&maxima).ok();

    let mixing = if ctx.law.dim() == 1 {
        let curve = pointproc::mixing_gap_coupled(
            &ctx.law,
            &fit,
            &TestFunction::default(),
            &ctx.opts().mixing_grid,
            ctx.opts().mixing_replicas,
            eps,
            &ctx.rng.fork("mixing"),
        )?;
        ctx.summary.flag(curve.points.iter().any(|p| p.variance_too_high), "HeavyTailVariance");
        let mut f = ctx.file("mixing.csv")?;
        curve.write_csv(&mut f)?;
        f.flush()?;
        Some(curve)
    } else {
        None
    };
    ctx.json(
        "pointproc.json",
        &json!({ "level": level, "exceedances": proc.events.len(), "loglaw": loglaw, "mixing": mixing }),
    )
}

fn cmd_ruin(ctx: &mut Ctx) -> Result<()> {
    let (fit, sample) = ctx.fit()?;
    let theory = extremal::theta_theory(&ctx.law, &fit, &ctx.walk(), &ctx.rng.fork("theory"))?;
    let radii = stats::sorted(&sample.radii_with(fit.norm));
    let t = stats::quantile_sorted(&radii, ctx.opts().t_quantile).max(1.0);
    let horizon = ctx.opts().ruin_horizon.unwrap_or_else(|| ruin::default_horizon(&fit, theory.theta.value, t));
    let x = ctx.opts().start.clone().unwrap_or_else(|| vec![0.0; ctx.law.dim()]);
    let target = ctx.opts().target.clone();
    let hits = ruin::hitting_times(
        &ctx.law,
        &x,
        &target,
        t,
        ctx.cfg.budget.replicas,
        horizon,
        fit.norm,
        &ctx.rng.fork("hitting"),
    )?;
    let ef = ruin::exp_fit(&hits, fit.alpha)?;
    let set = ruin::theta_of_set(
        &ctx.law,
        &fit,
        &target,
        ctx.opts().walk_count,
        ctx.opts().horizon_cap,
        ctx.opts().eps_stop,
        &ctx.rng.fork("set"),
    )?;
    ctx.summary.flag(ef.censor_bias, "CensorBias");
    ctx.summary.flag(theory.unreliable, "Unreliable");
    let mut f = ctx.file("hitting_times.csv")?;
    hits.write_csv(&mut f)?;
    f.flush()?;
    ctx.json(
        "ruin.json",
        &json!({
            "t": t,
            "horizon": horizon,
            "censored": hits.censored,
            "exp_fit": ef,
            "theta": theory.theta,
            "predicted_rate": fit.c * set.gamma_a.value / fit.alpha,
            "set": set,
        }),
    )
}

fn cmd_stable(ctx: &mut Ctx) -> Result<()> {
    let (fit, _) = ctx.fit()?;
    let n = ctx.opts().sum_n;
    let opts = SumOptions {
        replicas: ctx.cfg.budget.replicas,
        centering_batch: ctx.cfg.budget.batch,
        eps_trunc: ctx.opts().eps_trunc,
    };
    let s = stable::partial_sums(&ctx.law, &fit, &[n, 4 * n], &opts, &ctx.rng.fork("sums"))?;
    let check = stable::stability_check(&s[0], &s[1])?;
    for (name, sample) in [("sums_n.csv", &s[0]), ("sums_4n.csv", &s[1])] {
        let mut f = ctx.file(name)?;
        sample.write_csv(&mut f)?;
        f.flush()?;
    }
    ctx.json(
        "stable.json",
        &json!({
            "n": n,
            "regime": s[0].regime,
            "alpha": s[0].alpha,
            "d_n": s[0].d_n_used,
            "d_4n": s[1].d_n_used,
            "scale_constant": s[0].scale_constant,
            "check": check,
        }),
    )
}

fn cmd_spectral(ctx: &mut Ctx) -> Result<()> {
    let o = ctx.opts().clone();
    let op = spectral::build_grid_operator(&ctx.law, o.grid_n, o.interval)?;
    let eig = spectral::second_eigenvalue(&op, o.iters)?;
    let mu = op.stationary_vector(o.iters.max(10_000));
    let mut f = ctx.file("stationary.csv")?;
    op.write_stationary_csv(&mu, &mut f)?;
    f.flush()?;
    let alpha = match ctx.alpha()? {
        Some(a) => a,
        None => ctx.fit()?.0.alpha,
    };
    let grid = o.x_grid.clone().unwrap_or_else(spectral::default_drift_grid);
    let drift =
        spectral::verify_drift(&ctx.law, alpha, o.chi, o.ell, &grid, ctx.cfg.budget.replicas, &ctx.rng.fork("drift"))?;
    ctx.summary.flag(eig.no_gap, "NoGap");
    let mut f = ctx.file("drift.csv")?;
    drift.write_csv(&mut f)?;
    f.flush()?;
    ctx.json(
        "spectral.json",
        &json!({
            "grid_n": o.grid_n,
            "interval": o.interval,
            "warnings": op.warnings,
            "second_eigenvalue": eig,
            "uniformity_defect": op.uniformity_defect(&mu),
            "drift": drift,
        }),
    )
}

fn cmd_suite(ctx: &mut Ctx) -> Result<()> {
    let ids: Vec<u8> =
        ctx.opts().criteria.clone().unwrap_or_else(|| acceptance::CRITERIA.iter().map(|c| c.0).collect());
    let suite = Suite::new(ctx.cfg.seed, ctx.cfg.output_dir.join("scratch"));
    let mut outcomes = Vec::new();
    for id in ids {
        let o = suite.run(id);
        println!("{}", o.line());
        ctx.summary.failed |= !o.pass;
        outcomes.push(o);
    }
    ctx.json("suite.json", &outcomes)
}

pub const COMMANDS: [&str; 12] = [
    "check",
    "simulate",
    "alpha",
    "tail",
    "theta",
    "clusters",
    "frechet",
    "pointproc",
    "ruin",
    "stable",
    "spectral",
    "suite",
];

/// Runs `command` on a pool of `threads` workers and writes its artifacts
/// and manifest into the configured output directory.
pub fn execute(command: &str, cfg: &RunConfig, threads: usize) -> Result<RunSummary> {
    if !COMMANDS.contains(&command) {
        return Err(Error::InvalidInput(format!("unknown command `{command}`")));
    }
    fs::create_dir_all(&cfg.output_dir)?;
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let law = AffineLaw::new(cfg.model.clone()).map_err(|e| config_error("model", e))?;
    let mut ctx = Ctx { cfg, law, rng: RngStream::new(cfg.seed, 0), summary: RunSummary::default() };
    pool.install(|| match command {
        "check" => cmd_check(&mut ctx),
        "simulate" => cmd_simulate(&mut ctx),
        "alpha" => cmd_alpha(&mut ctx),
        "tail" => cmd_tail(&mut ctx),
        "theta" => cmd_theta(&mut ctx),
        "clusters" => cmd_clusters(&mut ctx),
        "frechet" => cmd_frechet(&mut ctx),
        "pointproc" => cmd_pointproc(&mut ctx),
        "ruin" => cmd_ruin(&mut ctx),
        "stable" => cmd_stable(&mut ctx),
        "spectral" => cmd_spectral(&mut ctx),
        _ => cmd_suite(&mut ctx),
    })?;
    let summary = ctx.summary;
    let manifest = json!({
        "command": command,
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "versions": { env!("CARGO_PKG_NAME"): env!("CARGO_PKG_VERSION") },
        "threads": threads,
        "wall_time_s": start.elapsed().as_secs_f64(),
        "artifacts": summary.artifacts,
        "flags": summary.flags,
    });
    let mut f = BufWriter::new(File::create(cfg.output_dir.join(MANIFEST))?);
    serde_json::to_writer_pretty(&mut f, &manifest)?;
    writeln!(f)?;
    f.flush()?;
    Ok(summary)
}

/// True when both directories hold the same artifact files byte for byte,
/// manifests (which carry wall time) excluded.
pub fn same_artifacts(a: &Path, b: &Path) -> Result<bool> {
    let list = |d: &Path| -> Result<Vec<String>> {
        let mut v: Vec<String> = fs::read_dir(d)?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_file())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .filter(|n| n != MANIFEST)
            .collect();
        v.sort();
        Ok(v)
    };
    let (la, lb) = (list(a)?, list(b)?);
    if la != lb || la.is_empty() {
        return Ok(false);
    }
    for name in &la {
        if fs::read(a.join(name))? != fs::read(b.join(name))? {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Parser)]
#[command(
    name = "kesten-evt",
    version,
    about = "Heavy-tailed affine recursions: simulation and extreme-value estimation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run config.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, env = "KESTEN_EVT_THREADS")]
    pub threads: Option<usize>,
    /// Dotted key=value assignment into the config, repeatable.
    #[arg(long = "override", global = true)]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Contraction-expansion and irreducibility checks.
    Check,
    /// Simulate one path.
    Simulate,
    /// Solve k(alpha) = 1 and tabulate the moment curve.
    Alpha,
    /// Fit alpha and the tail constant from a stationary sample.
    Tail,
    /// Extremal index by blocks, runs and the linear walk.
    Theta,
    /// Cluster-size law and its check on a path.
    Clusters,
    /// Frechet fit of normalized maxima.
    Frechet,
    /// Exceedance process, logarithm law and mixing gap.
    Pointproc,
    /// Hitting times of scaled target sets.
    Ruin,
    /// Stable limit of partial sums.
    Stable,
    /// Grid operator gap and drift envelope (d = 1).
    Spectral,
    /// Acceptance criteria, one PASS/FAIL line each.
    Suite,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Simulate => "simulate",
            Command::Alpha => "alpha",
            Command::Tail => "tail",
            Command::Theta => "theta",
            Command::Clusters => "clusters",
            Command::Frechet => "frechet",
            Command::Pointproc => "pointproc",
            Command::Ruin => "ruin",
            Command::Stable => "stable",
            Command::Spectral => "spectral",
            Command::Suite => "suite",
        }
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let threads = cli.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let cfg = match (&cli.config, cli.command) {
        (Some(p), _) => RunConfig::load(p, &cli.overrides, cli.seed, cli.out.as_deref()),
        (None, Command::Suite) => {
            let base = serde_json::to_string(&RunConfig::determinism_probe(0)).expect("config serializes");
            RunConfig::from_json(&base, &cli.overrides, cli.seed, cli.out.as_deref())
        }
        (None, _) => Err(config_error("--config", "a config file is required")),
    };
    let result = cfg.and_then(|c| execute(cli.command.name(), &c, threads));
    match result {
        Ok(s) => {
            for f in &s.flags {
                eprintln!("flag: {f}");
            }
            s.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
