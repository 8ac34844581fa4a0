//! Certification sweeps and the library side of the `verify`, `run` and
//! `sweep` commands.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{Config, VerifySpec, EFFECTIVE_CONFIG};
use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::harness::adversary::AdversarySpec;
use crate::harness::experiment::{
    mix_seed, run_grid, run_once, Environment, ExperimentSpec, HorizonResult, RunOptions,
};
use crate::harness::metrics::{fit_slope, SlopeFit};
use crate::harness::persist::{
    config_hash, write_atomic, write_plot, write_report, write_slopes, write_summary, write_trace, PlotSeries,
    SlopeRow,
};
use crate::learners::{so_ip, so_ip_trajectory, LearnerKind};
use crate::objectives::{Objective, OracleSpec, StochasticOracle};
use crate::reductions::FeedbackMode;
use crate::surrogate::{bqnd_estimate, sample_z, z_cdf, SurrogateContext, LEMMA_TOL, LINEARIZATION_TOL};
use crate::vecops::{dist, norm};

/// Largest tolerated `|MC mean - ∇F|` in standard errors.
pub const BQND_Z_LIMIT: f64 = 4.0;
/// Largest tolerated sampler KS statistic.
pub const KS_LIMIT: f64 = 0.006;
/// Tolerance of the SO-IP checks.
pub const SO_IP_TOL: f64 = 1e-9;

/// One line of the certification table.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    /// Measured statistic (a minimum slack, a maximum z-score, ...).
    pub value: f64,
    pub threshold: f64,
    /// `true` when `value >= threshold`, `false` when `value <= threshold` passes.
    pub lower_bound: bool,
    pub detail: String,
}

impl Check {
    pub fn passed(&self) -> bool {
        if self.lower_bound {
            self.value >= self.threshold
        } else {
            self.value <= self.threshold
        }
    }
}

/// Kolmogorov-Smirnov statistic of `draws` sampler outputs against the analytic CDF.
pub fn sampler_ks(draws: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut zs = (0..draws)
        .map(|_| sample_z(rng.random::<f64>()).map(|s| s.z))
        .collect::<Result<Vec<f64>>>()?;
    zs.sort_by(f64::total_cmp);
    let n = draws as f64;
    Ok(zs
        .iter()
        .enumerate()
        .map(|(i, &z)| {
            let f = z_cdf(z);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max))
}

fn instance(spec: &VerifySpec, i: usize) -> (Objective, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, i as u64));
    let f = Objective::random(spec.dim, spec.density, &mut rng);
    (f, rng)
}

fn uniform_point(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..d).map(|_| rng.random::<f64>()).collect()
}

/// Outcome of the estimator audit.
#[derive(Debug, Clone, PartialEq)]
pub struct BqndAudit {
    /// Largest `|mean - ∇F| / SE` over instances and coordinates.
    pub max_z: f64,
    /// Largest `||g|| / B1` over all draws.
    pub max_norm_ratio: f64,
}

/// Compares the Monte Carlo mean of the single-query estimator with the
/// quadrature gradient on random instances. `sabotage` negates every draw.
pub fn bqnd_audit(spec: &VerifySpec, quad_nodes: usize, sabotage: bool) -> Result<BqndAudit> {
    let per = (0..spec.instances)
        .into_par_iter()
        .map(|i| {
            let (f, mut rng) = instance(spec, i);
            let d = spec.dim;
            let x = uniform_point(d, &mut rng);
            let ctx = SurrogateContext::new(&f, quad_nodes)?;
            let exact = ctx.grad_f_quadrature(&x)?;
            let ospec = OracleSpec::first_order(f.lipschitz(), d, spec.noise_sigma, rng.random());
            let b1 = ospec.clip;
            let mut oracle = StochasticOracle::new(ospec);
            let (mut mean, mut m2) = (vec![0.0; d], vec![0.0; d]);
            let mut max_ratio: f64 = 0.0;
            for k in 0..spec.bqnd_draws {
                let mut g = bqnd_estimate(&ctx, &x, &mut oracle, &mut rng)?;
                if sabotage {
                    g.iter_mut().for_each(|v| *v = -*v);
                }
                max_ratio = max_ratio.max(norm(&g) / b1);
                let n = (k + 1) as f64;
                for j in 0..d {
                    let delta = g[j] - mean[j];
                    mean[j] += delta / n;
                    m2[j] += delta * (g[j] - mean[j]);
                }
            }
            let n = spec.bqnd_draws as f64;
            let max_z = (0..d)
                .map(|j| {
                    let se = (m2[j] / (n - 1.0) / n).sqrt();
                    let err = (mean[j] - exact[j]).abs();
                    if se > 0.0 {
                        err / se
                    } else if err == 0.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                })
                .fold(0.0, f64::max);
            Ok((max_z, max_ratio))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BqndAudit {
        max_z: per.iter().map(|p| p.0).fold(0.0, f64::max),
        max_norm_ratio: per.iter().map(|p| p.1).fold(0.0, f64::max),
    })
}

/// Minimum of `f(h_z(x) ⊕ y) - e^{-z max x} f(y)` over random triples.
pub fn lemma_sweep(spec: &VerifySpec, quad_nodes: usize) -> Result<f64> {
    let mins = (0..spec.instances)
        .into_par_iter()
        .map(|i| {
            let (f, mut rng) = instance(spec, i);
            let ctx = SurrogateContext::new(&f, quad_nodes)?;
            let mut best = f64::INFINITY;
            for _ in 0..spec.samples {
                let x = uniform_point(spec.dim, &mut rng);
                let y = uniform_point(spec.dim, &mut rng);
                let z = rng.random::<f64>();
                best = best.min(ctx.certify_prob_sum_bound(&x, &y, z)?);
            }
            Ok(best)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(mins.into_iter().fold(f64::INFINITY, f64::min))
}

/// Minimum of `β<∇F(x), y - x> - ((1/e) f(y) - f(h(x)))` over random pairs.
pub fn linearization_sweep(spec: &VerifySpec, quad_nodes: usize) -> Result<f64> {
    let mins = (0..spec.instances)
        .into_par_iter()
        .map(|i| {
            let (f, mut rng) = instance(spec, i);
            let ctx = SurrogateContext::new(&f, quad_nodes)?;
            let mut best = f64::INFINITY;
            for _ in 0..spec.samples {
                let x = uniform_point(spec.dim, &mut rng);
                let y = uniform_point(spec.dim, &mut rng);
                best = best.min(ctx.certify_linearization(&x, &y)?);
            }
            Ok(best)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(mins.into_iter().fold(f64::INFINITY, f64::min))
}

/// Outcome of the infeasible-projection audit.
#[derive(Debug, Clone, PartialEq)]
pub struct SoIpAudit {
    pub cases: usize,
    /// Outputs found outside the domain.
    pub infeasible: usize,
    /// Minimum of `||y0 - q|| - ||so_ip(y0) - q||` over sampled shrunk-set points `q`.
    pub min_contraction_slack: f64,
    /// Largest deviation of the one-dimensional trajectory from `1.3, 1.2, 1.1, 1.0`.
    pub trajectory_error: f64,
}

fn random_domain(rng: &mut ChaCha8Rng) -> Result<Domain> {
    let d = rng.random_range(1..=5);
    match rng.random_range(0..3) {
        0 => Domain::unit_box(d),
        1 => Domain::scaled_box(d, rng.random_range(0.3..1.0)),
        _ => {
            let w: Vec<f64> = (0..d).map(|_| rng.random_range(0.2..2.0)).collect();
            let total: f64 = w.iter().sum();
            Domain::knapsack(w, total * rng.random_range(0.2..0.9))
        }
    }
}

pub fn so_ip_audit(cases: usize, seed: u64) -> Result<SoIpAudit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut infeasible, mut min_slack) = (0, f64::INFINITY);
    for _ in 0..cases {
        let dom = random_domain(&mut rng)?;
        let r = dom.inner_radius();
        let delta = r * rng.random_range(0.05..0.95);
        let spread = 2.0 * dom.diameter();
        let y0: Vec<f64> = dom
            .center()
            .iter()
            .map(|c| c + spread * (2.0 * rng.random::<f64>() - 1.0))
            .collect();
        let y = so_ip(&dom, &y0, delta)?.point;
        if !dom.contains(&y, SO_IP_TOL)? {
            infeasible += 1;
        }
        let shrunk = dom.shrink(delta)?;
        for _ in 0..5 {
            let q = shrunk.sample_point(&mut rng);
            min_slack = min_slack.min(dist(&y0, &q) - dist(&y, &q));
        }
    }
    let path = so_ip_trajectory(&Domain::unit_box(1)?, &[1.3], 0.1)?;
    let expect = [1.3, 1.2, 1.1, 1.0];
    let trajectory_error = if path.len() == expect.len() {
        path.iter().zip(expect).map(|(p, e)| (p[0] - e).abs()).fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    Ok(SoIpAudit { cases, infeasible, min_contraction_slack: min_slack, trajectory_error })
}

/// Per-mode query audit on a short run.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryAudit {
    pub mode: FeedbackMode,
    pub horizon: usize,
    pub total_queries: u64,
    pub max_per_round: u32,
    pub min_per_round: u32,
    /// Rounds whose query differed from the played point.
    pub nontrivial_rounds: usize,
}

impl QueryAudit {
    pub fn passed(&self) -> bool {
        self.min_per_round == 1
            && self.max_per_round == 1
            && self.total_queries == self.horizon as u64
            && (!self.mode.trivial_queries() || self.nontrivial_rounds == 0)
    }
}

pub fn query_audit(horizon: usize, seed: u64, quad_nodes: usize) -> Result<Vec<QueryAudit>> {
    FeedbackMode::ALL
        .iter()
        .map(|&mode| {
            let adv = AdversarySpec { instance_seed: seed, ..AdversarySpec::default() };
            let mut spec = ExperimentSpec::new(Domain::unit_box(2)?, adv, mode, LearnerKind::SoOga);
            spec.quad_nodes = quad_nodes;
            let env = Environment::build(&spec, horizon)?;
            let rec = run_once(&env, &spec, seed, RunOptions::default())?;
            Ok(QueryAudit {
                mode,
                horizon,
                total_queries: rec.total_queries(),
                max_per_round: rec.query_counts.iter().copied().max().unwrap_or(0),
                min_per_round: rec.query_counts.iter().copied().min().unwrap_or(0),
                nontrivial_rounds: rec.trivial_queries.iter().filter(|b| !**b).count(),
            })
        })
        .collect()
}

/// Runs every certification sweep.
pub fn certify(spec: &VerifySpec, quad_nodes: usize, sabotage: bool) -> Result<Vec<Check>> {
    spec.validate()?;
    let mut checks = Vec::new();
    let ks = sampler_ks(spec.sampler_draws, spec.seed)?;
    checks.push(Check {
        name: "sampler_ks",
        value: ks,
        threshold: KS_LIMIT,
        lower_bound: false,
        detail: format!("{} draws", spec.sampler_draws),
    });
    let b = bqnd_audit(spec, quad_nodes, sabotage)?;
    checks.push(Check {
        name: "bqnd_unbiased",
        value: b.max_z,
        threshold: BQND_Z_LIMIT,
        lower_bound: false,
        detail: format!("max standard errors, {} instances x {} draws", spec.instances, spec.bqnd_draws),
    });
    checks.push(Check {
        name: "bqnd_bounded",
        value: b.max_norm_ratio,
        threshold: 1.0,
        lower_bound: false,
        detail: "max ||g|| / B1".into(),
    });
    checks.push(Check {
        name: "lemma_slack",
        value: lemma_sweep(spec, quad_nodes)?,
        threshold: -LEMMA_TOL,
        lower_bound: true,
        detail: format!("{} instances x {} triples", spec.instances, spec.samples),
    });
    checks.push(Check {
        name: "linearization_gap",
        value: linearization_sweep(spec, quad_nodes)?,
        threshold: -LINEARIZATION_TOL,
        lower_bound: true,
        detail: format!("{} instances x {} pairs, {quad_nodes} nodes", spec.instances, spec.samples),
    });
    let s = so_ip_audit(spec.so_ip_cases, spec.seed)?;
    checks.push(Check {
        name: "so_ip_feasible",
        value: s.infeasible as f64,
        threshold: 0.0,
        lower_bound: false,
        detail: format!("infeasible outputs in {} cases", s.cases),
    });
    checks.push(Check {
        name: "so_ip_contraction",
        value: s.min_contraction_slack,
        threshold: -SO_IP_TOL,
        lower_bound: true,
        detail: "min ||y0 - q|| - ||y - q||".into(),
    });
    checks.push(Check {
        name: "so_ip_trajectory",
        value: s.trajectory_error,
        threshold: 1e-12,
        lower_bound: false,
        detail: "d = 1, y0 = 1.3, delta = 0.1".into(),
    });
    let worst = query_audit(256, spec.seed, quad_nodes)?
        .into_iter()
        .filter(|q| !q.passed())
        .map(|q| q.mode.as_str())
        .collect::<Vec<_>>();
    checks.push(Check {
        name: "query_budget",
        value: worst.len() as f64,
        threshold: 0.0,
        lower_bound: false,
        detail: if worst.is_empty() { "one query per round in every mode".into() } else { worst.join(" ") },
    });
    Ok(checks)
}

pub fn format_checks(checks: &[Check]) -> String {
    let mut s = format!("{:<20} {:>14} {:>12}  {:<6} {}\n", "check", "value", "threshold", "result", "detail");
    for c in checks {
        let _ = writeln!(
            s,
            "{:<20} {:>14.6e} {:>12.1e}  {:<6} {}",
            c.name,
            c.value,
            c.threshold,
            if c.passed() { "PASS" } else { "FAIL" },
            c.detail
        );
    }
    s
}

/// Command-line overrides shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct CliOptions {
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub quad_nodes: Option<usize>,
    pub plots: bool,
    /// Negative control: flips the sign of every gradient estimate.
    pub sabotage: bool,
}

impl CliOptions {
    fn apply(&self, cfg: &Config) -> Result<(Config, PathBuf)> {
        let mut cfg = cfg.clone();
        if let Some(n) = self.quad_nodes {
            cfg.quad_nodes = n;
        }
        cfg.validate()?;
        let out = self.out.clone().unwrap_or_else(|| cfg.resolved_out());
        Ok((cfg, out))
    }

    fn install<T: Send>(&self, job: impl FnOnce() -> Result<T> + Send) -> Result<T> {
        match self.jobs {
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?
                .install(job),
            None => job(),
        }
    }
}

/// Outcome of `verify`.
#[derive(Debug, Clone)]
pub struct VerifyOutcome {
    pub checks: Vec<Check>,
    pub table: String,
}

impl VerifyOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn first_failure(&self) -> Option<&Check> {
        self.checks.iter().find(|c| !c.passed())
    }
}

pub fn cmd_verify(cfg: &Config, opts: &CliOptions) -> Result<VerifyOutcome> {
    let (cfg, out) = opts.apply(cfg)?;
    let checks = opts.install(|| certify(&cfg.verify, cfg.quad_nodes, opts.sabotage))?;
    let table = format_checks(&checks);
    let mut csv = String::from("check,value,threshold,passed\n");
    for c in &checks {
        let _ = writeln!(csv, "{},{:e},{:e},{}", c.name, c.value, c.threshold, c.passed());
    }
    write_atomic(&out.join("verify.csv"), csv.as_bytes())?;
    Ok(VerifyOutcome { checks, table })
}

/// Files written by `run` or `sweep`, with the computed results.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub out: PathBuf,
    pub files: Vec<PathBuf>,
    pub results: Vec<HorizonResult>,
    pub slopes: Vec<SlopeRow>,
    pub summary: String,
}

fn persist_effective(cfg: &Config, out: &Path) -> Result<(PathBuf, String)> {
    let text = cfg.effective_text()?;
    let path = out.join(EFFECTIVE_CONFIG);
    write_atomic(&path, text.as_bytes())?;
    Ok((path, config_hash(&text)))
}

/// A fitted metric over the horizons of a grid.
fn fit_metric(
    results: &[HorizonResult],
    mode: FeedbackMode,
    learner: LearnerKind,
    metric: &str,
    pick: fn(&crate::harness::HorizonSummary) -> f64,
    target: f64,
) -> SlopeRow {
    let pts: Vec<(f64, f64)> = results.iter().map(|r| (r.summary.horizon as f64, pick(&r.summary))).collect();
    let fit = fit_slope(&pts).unwrap_or(SlopeFit {
        slope: f64::NAN,
        intercept: f64::NAN,
        r2: f64::NAN,
        used: 0,
        excluded: pts.len(),
    });
    SlopeRow {
        mode: mode.as_str().into(),
        learner: learner.as_str().into(),
        slope: fit.slope,
        r2: fit.r2,
        horizons: results.iter().map(|r| r.summary.horizon.to_string()).collect::<Vec<_>>().join(";"),
        seeds: results.first().map_or(0, |r| r.summary.seeds),
        metric: metric.into(),
        target,
    }
}

fn slope_rows(cfg: &Config, results: &[HorizonResult]) -> Vec<SlopeRow> {
    if results.len() < 2 {
        return Vec::new();
    }
    let (mode, learner) = (cfg.feedback, cfg.learner);
    let target = mode.target_exponent();
    let mut rows = vec![
        fit_metric(results, mode, learner, "static_certificate", |s| s.static_certificate, target),
        fit_metric(results, mode, learner, "static_regret", |s| s.static_regret, target),
    ];
    if cfg.adaptive {
        rows.push(fit_metric(results, mode, learner, "adaptive_certificate", |s| s.adaptive_certificate, target));
    }
    if cfg.dynamic {
        rows.push(fit_metric(results, mode, learner, "dynamic_certificate", |s| s.dynamic_certificate, f64::NAN));
    }
    rows
}

fn slope_summary(rows: &[SlopeRow]) -> String {
    let mut s = format!(
        "{:<12} {:<7} {:<21} {:>7} {:>7} {:>7}\n",
        "mode", "learner", "metric", "slope", "r2", "target"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<12} {:<7} {:<21} {:>7.3} {:>7.3} {:>7.3}",
            r.mode, r.learner, r.metric, r.slope, r.r2, r.target
        );
    }
    s
}

fn execute(cfg: &Config, opts: &CliOptions, out: &Path) -> Result<RunOutcome> {
    let spec = cfg.experiment_spec()?;
    let (eff_path, hash) = persist_effective(cfg, out)?;
    let run_opts = RunOptions { keep_points: false, sabotage: opts.sabotage };
    let results = opts.install(|| run_grid(&spec, &cfg.horizons, &cfg.seeds, run_opts))?;
    let mut files = vec![eff_path];
    for hr in &results {
        for run in &hr.runs {
            if run.record.query_counts.iter().any(|&q| q != 1) {
                return Err(Error::InvalidParameter(format!(
                    "query audit failed for seed {} at T = {}",
                    run.record.seed, run.record.horizon
                )));
            }
            files.push(write_trace(out, &run.record)?);
            files.push(write_report(out, &run.record, &run.report, &hash)?);
        }
    }
    let summaries: Vec<_> = results.iter().map(|r| r.summary.clone()).collect();
    files.push(write_summary(out, cfg.feedback.as_str(), cfg.learner.as_str(), &summaries)?);
    let slopes = slope_rows(cfg, &results);
    files.push(write_slopes(out, &slopes)?);
    if opts.plots {
        let mut series = vec![PlotSeries {
            label: "static certificate".into(),
            points: summaries.iter().map(|s| (s.horizon as f64, s.static_certificate)).collect(),
        }];
        if cfg.adaptive {
            series.push(PlotSeries {
                label: "adaptive certificate".into(),
                points: summaries.iter().map(|s| (s.horizon as f64, s.adaptive_certificate)).collect(),
            });
        }
        if cfg.dynamic {
            series.push(PlotSeries {
                label: "dynamic certificate".into(),
                points: summaries.iter().map(|s| (s.horizon as f64, s.dynamic_certificate)).collect(),
            });
        }
        let path = out.join(format!("regret_{}_{}.svg", cfg.feedback.as_str(), cfg.learner.as_str()));
        write_plot(&path, "regret certificates", &series)?;
        files.push(path);
    }
    let summary = slope_summary(&slopes);
    Ok(RunOutcome { out: out.to_path_buf(), files, results, slopes, summary })
}

/// Runs every (horizon, seed) pair of the config and persists traces, reports and slopes.
pub fn cmd_run(cfg: &Config, opts: &CliOptions) -> Result<RunOutcome> {
    let (cfg, out) = opts.apply(cfg)?;
    execute(&cfg, opts, &out)
}

/// Minimum grid of a rate sweep.
pub const SWEEP_MIN_HORIZONS: usize = 4;
pub const SWEEP_MIN_SEEDS: usize = 10;

/// Runs a rate sweep and writes `summary.txt` comparing slopes with targets.
pub fn cmd_sweep(cfg: &Config, opts: &CliOptions) -> Result<RunOutcome> {
    let (cfg, out) = opts.apply(cfg)?;
    if cfg.horizons.len() < SWEEP_MIN_HORIZONS {
        return Err(Error::Config(format!("a sweep needs at least {SWEEP_MIN_HORIZONS} horizons")));
    }
    if cfg.seeds.len() < SWEEP_MIN_SEEDS {
        return Err(Error::Config(format!("a sweep needs at least {SWEEP_MIN_SEEDS} seeds")));
    }
    let mut outcome = execute(&cfg, opts, &out)?;
    let path = out.join("summary.txt");
    write_atomic(&path, outcome.summary.as_bytes())?;
    outcome.files.push(path);
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> VerifySpec {
        VerifySpec {
            instances: 3,
            samples: 200,
            dim: 3,
            bqnd_draws: 20_000,
            so_ip_cases: 100,
            sampler_draws: 20_000,
            ..VerifySpec::default()
        }
    }

    #[test]
    fn small_certification_passes() {
        let checks = certify(&small(), 64, false).unwrap();
        for c in &checks {
            assert!(c.passed(), "{c:?}");
        }
        assert_eq!(checks.len(), 9);
    }

    #[test]
    fn sabotage_breaks_unbiasedness() {
        let a = bqnd_audit(&small(), 64, true).unwrap();
        assert!(a.max_z > BQND_Z_LIMIT);
        assert!(a.max_norm_ratio <= 1.0);
    }

    #[test]
    fn ks_statistic_is_small_for_the_exact_sampler() {
        assert!(sampler_ks(50_000, 1).unwrap() < KS_LIMIT);
    }

    #[test]
    fn table_marks_failures() {
        let c = Check { name: "x", value: -1.0, threshold: 0.0, lower_bound: true, detail: String::new() };
        assert!(format_checks(&[c]).contains("FAIL"));
    }
}
