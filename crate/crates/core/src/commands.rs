//! The `simulate`, `analytics`, `tables` and `diagnose` commands.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig};
use crate::diagnostics::{
    check_e, check_ef, check_efprime_negative, check_mesoscopic_smoothing_at_integers,
    check_local_gibbs_kl, check_v, ef_rms, estimate_omega, lambda_equidistribution, median,
    select_epsilon, windowed_profile, CurveScale, DiagnosticsError, LadderTrend, SmoothingVerdict,
    VariancePoint,
};
use crate::estimators::{centred_window_len, EmpiricalPmf, EnsembleStats, TimeAverageStats, LAGS};
use crate::gibbs::{f_hat, lambda_d, u_d, u_o, AveragedFamily, GibbsError};
use crate::io::{
    file_digest, fmt_f64, fmt_opt, read_csv, read_text, write_csv, write_text, IoError, RunManifest,
    Table,
};
use crate::processes::ProcessKind;
use crate::runner::{run_ensemble, EnsembleResult, RunError};
use crate::zero_range::{zr_f_hat, zr_phi_of_v, ZeroRangeError, ZrRate};

/// Bins used when testing whether site expectations are a function of the site mean.
pub const EFPRIME_BINS: usize = 20;
/// Detrending radius and integer tolerance for the mesoscopic smoothing check.
pub const SMOOTHING_RADIUS: usize = 5;
pub const SMOOTHING_INTEGER_TOLERANCE: f64 = 0.1;
/// Events per site over the time-average window that make a site count as active.
pub const ACTIVE_EVENTS: f64 = 50.0;

#[derive(Debug, Error)]
pub enum CommandError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error("{replicas} replicas exhausted their event budget; partial outputs are flagged in the manifest")]
    BudgetExceeded { replicas: usize },
    #[error("missing input: {0}")]
    MissingDependency(String),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Gibbs(#[from] GibbsError),
    #[error(transparent)]
    ZeroRange(#[from] ZeroRangeError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
}

impl CommandError {
    /// 2 for invalid input, 3 for an exhausted budget, 4 for missing inputs, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Config(_) | CommandError::Invalid(_) => 2,
            CommandError::Run(RunError::InvalidPlan(_) | RunError::Process(_)) => 2,
            CommandError::Io(IoError::HashMismatch { .. }) => 2,
            CommandError::Gibbs(GibbsError::KTooSmall(_)) => 2,
            CommandError::ZeroRange(ZeroRangeError::InvalidDensity(_)) => 2,
            CommandError::BudgetExceeded { .. } => 3,
            CommandError::MissingDependency(_) => 4,
            _ => 1,
        }
    }
}

fn lattice_dir(out: &Path, n: usize) -> PathBuf {
    out.join(format!("N{n}"))
}

fn sites_file(out: &Path, n: usize, k: usize) -> PathBuf {
    lattice_dir(out, n).join(format!("sites_t{k}.csv"))
}

fn windows_file(out: &Path, n: usize, k: usize) -> PathBuf {
    lattice_dir(out, n).join(format!("windows_t{k}.csv"))
}

fn correlations_file(out: &Path, n: usize, k: usize) -> PathBuf {
    lattice_dir(out, n).join(format!("correlations_t{k}.csv"))
}

fn pmf_file(out: &Path, n: usize, k: usize) -> PathBuf {
    lattice_dir(out, n).join(format!("pmf_t{k}.csv"))
}

const MANIFEST: &str = "manifest.txt";

#[derive(Debug, Clone, Copy, Default)]
pub struct SimulateOptions {
    /// Record elapsed time in the manifest; makes the manifest run-dependent.
    pub record_wall_clock: bool,
}

/// Runs every lattice size of the configuration and writes per-site tables and a manifest.
pub fn cmd_simulate(cfg: &ExperimentConfig, out: &Path, opts: SimulateOptions) -> Result<RunManifest, CommandError> {
    cfg.validate()?;
    let started = Instant::now();
    let hash = cfg.hash();
    let mut manifest = RunManifest {
        config_hash: hash.clone(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.seed,
        ..RunManifest::default()
    };
    let mut written = Vec::new();
    for &n in &cfg.n_ladder {
        let plan = cfg.plan(n);
        log::info!("simulating N={n} with {} replicas", plan.replicas);
        let result = run_ensemble(&plan)?;
        written.extend(write_lattice(out, &hash, n, &result, &cfg.epsilon_grid)?);
        manifest.lattices.push((n, result.events.iter().sum(), result.budget_exceeded.clone()));
    }
    for path in written {
        let rel = path.strip_prefix(out).unwrap_or(&path).to_string_lossy().replace('\\', "/");
        manifest.files.push((rel, file_digest(&path)?));
    }
    manifest.files.sort();
    if opts.record_wall_clock {
        manifest.wall_clock_seconds = Some(started.elapsed().as_secs_f64());
    }
    write_text(&out.join(MANIFEST), &manifest.render())?;
    let over: usize = manifest.lattices.iter().map(|l| l.2.len()).sum();
    if over > 0 {
        return Err(CommandError::BudgetExceeded { replicas: over });
    }
    Ok(manifest)
}

fn write_lattice(
    out: &Path,
    hash: &str,
    n: usize,
    result: &EnsembleResult,
    epsilon_grid: &[f64],
) -> Result<Vec<PathBuf>, CommandError> {
    let mut files = Vec::new();
    for (k, stats) in result.instant.iter().enumerate() {
        let ta = result.time_averaged[k].as_ref();
        let path = sites_file(out, n, k);
        write_csv(&path, hash, &["site", "x", "obs", "mean", "std_err", "time_avg_mean", "time_avg_std_err"], site_rows(stats, ta))?;
        files.push(path);

        let path = windows_file(out, n, k);
        let mut rows = Vec::new();
        for &eps in epsilon_grid {
            let len = centred_window_len(n, eps);
            let h = (len - 1) / 2;
            for centre in 0..n {
                let w = stats.window_stats_at((centre + n - h) % n, len).ok();
                let (mean, var) = (w.map(|w| w.mean), w.map(|w| w.variance));
                rows.push(vec![fmt_f64(eps), len.to_string(), centre.to_string(), fmt_opt(mean), fmt_opt(var)]);
            }
        }
        write_csv(&path, hash, &["epsilon", "window_sites", "centre", "mean", "variance"], rows)?;
        files.push(path);

        let path = correlations_file(out, n, k);
        let mut rows = Vec::new();
        for site in 0..n {
            let corr = stats.correlation_profile(site).ok();
            for (l, lag) in LAGS.enumerate() {
                let c = corr.as_ref().and_then(|c| c.per_lag[l]);
                rows.push(vec![site.to_string(), lag.to_string(), fmt_opt(c)]);
            }
        }
        write_csv(&path, hash, &["site", "lag", "corr"], rows)?;
        files.push(path);

        if stats.layout().pmf_samples > 0 {
            let path = pmf_file(out, n, k);
            let mut rows = Vec::new();
            for site in 0..n {
                for (v, c) in stats.pmf(site).map_err(RunError::from)?.counts() {
                    rows.push(vec![site.to_string(), v.to_string(), c.to_string()]);
                }
            }
            write_csv(&path, hash, &["site", "value", "count"], rows)?;
            files.push(path);
        }
    }
    let path = lattice_dir(out, n).join("events.csv");
    let rows = result.events.iter().enumerate().map(|(id, e)| vec![id.to_string(), e.to_string()]);
    write_csv(&path, hash, &["replica", "events"], rows)?;
    files.push(path);
    Ok(files)
}

fn site_rows(stats: &EnsembleStats, ta: Option<&TimeAverageStats>) -> Vec<Vec<String>> {
    let layout = stats.layout();
    let n = layout.n_sites;
    let mut rows = Vec::with_capacity(n * layout.observables.len());
    for site in 0..n {
        for (o, obs) in layout.observables.iter().enumerate() {
            let mean = stats.sample_mean(site, o).ok();
            let se = stats.ensemble_expectation(site, o).ok().map(|e| e.1);
            let ta_mean = ta.and_then(|t| t.sample_mean(site, o).ok());
            let ta_se = ta.and_then(|t| t.time_averaged_expectation(site, o).ok()).map(|e| e.1);
            rows.push(vec![
                site.to_string(),
                fmt_f64(site as f64 / n as f64),
                obs.name().to_string(),
                fmt_opt(mean),
                fmt_opt(se),
                fmt_opt(ta_mean),
                fmt_opt(ta_se),
            ]);
        }
    }
    rows
}

/// Evaluation grid `lo:hi:count`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.lo];
        }
        let step = (self.hi - self.lo) / (self.count - 1) as f64;
        (0..self.count).map(|i| self.lo + step * i as f64).collect()
    }
}

impl FromStr for Grid {
    type Err = CommandError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CommandError::Invalid(format!("grid `{s}` must be lo:hi:count with lo <= hi and count >= 1"));
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, count] = parts.as_slice() else { return Err(bad()) };
        let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
        let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
        let count: usize = count.trim().parse().map_err(|_| bad())?;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi && count >= 1) || (count == 1 && lo != hi) {
            return Err(bad());
        }
        Ok(Grid { lo, hi, count })
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.lo, self.hi, self.count)
    }
}

/// Which family `analytics` tabulates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnalyticsFamily {
    /// Discrete Gaussian mean maps and the averaged curvature family.
    Gibbs,
    ZeroRange(ZrRate),
}

impl FromStr for AnalyticsFamily {
    type Err = CommandError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gibbs" => Ok(AnalyticsFamily::Gibbs),
            "zero_range" => Ok(AnalyticsFamily::ZeroRange(ZrRate::LinearPlusFourthRoot)),
            other => match other.strip_prefix("zero_range:") {
                Some(g) => Ok(AnalyticsFamily::ZeroRange(g.parse().map_err(CommandError::Invalid)?)),
                None => Err(CommandError::Invalid(format!("unknown family `{other}`"))),
            },
        }
    }
}

fn digest_text(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes one reference table; returns its path.
pub fn cmd_analytics(family: AnalyticsFamily, k: f64, grid: Grid, out: &Path) -> Result<PathBuf, CommandError> {
    let xs = grid.points();
    match family {
        AnalyticsFamily::Gibbs => {
            let hash = digest_text(&format!("analytics gibbs K={k:?} grid={grid}"));
            let mut rows = Vec::with_capacity(xs.len());
            for &x in &xs {
                let fam = AveragedFamily::new(k, x)?;
                rows.push(vec![
                    fmt_f64(x),
                    fmt_f64(u_d(k, x)?),
                    fmt_f64(lambda_d(k, x)?),
                    fmt_f64(u_o(k, x)?),
                    fmt_f64(fam.mean()),
                    fmt_f64(fam.expectation(|n| crate::lattice::arrhenius_rate(n, k))?),
                    fmt_f64((-2.0 * k * x).exp()),
                    fmt_f64(fam.expectation(|n| (n * n) as f64)?),
                ]);
            }
            let path = out.join(format!("gibbs_K{k}.csv"));
            write_csv(
                &path,
                &hash,
                &["x", "u_d", "lambda_d", "u_o", "averaged_mean", "fhat_rate", "exp_neg_2kx", "fhat_square"],
                rows,
            )?;
            Ok(path)
        }
        AnalyticsFamily::ZeroRange(g) => {
            if grid.lo < 0.0 {
                return Err(CommandError::Invalid(format!("densities must be nonnegative, grid starts at {}", grid.lo)));
            }
            let hash = digest_text(&format!("analytics zero_range:{} grid={grid}", g.name()));
            let mut rows = Vec::with_capacity(xs.len());
            for &v in &xs {
                let fourth = |n: i64| (n as f64).sqrt().sqrt();
                rows.push(vec![
                    fmt_f64(v),
                    fmt_f64(zr_phi_of_v(g, v)?),
                    fmt_f64(zr_f_hat(g, v, |n| n as f64)?),
                    fmt_f64(zr_f_hat(g, v, fourth)?),
                    fmt_f64(zr_f_hat(g, v, |n| g.eval(n))?),
                    fmt_f64(zr_f_hat(g, v, |n| n as f64 * (-(n as f64)).exp())?),
                ]);
            }
            let path = out.join(format!("zero_range_{}.csv", g.name()));
            write_csv(
                &path,
                &hash,
                &["v", "phi", "fhat_identity", "fhat_fourth_root", "fhat_rate", "fhat_value_exp_decay"],
                rows,
            )?;
            Ok(path)
        }
    }
}

/// Standard reference tables: Gibbs curves for K in {1, 3, 5} and both zero-range rates.
pub fn cmd_tables(out: &Path) -> Result<Vec<PathBuf>, CommandError> {
    let mut paths = Vec::new();
    let omega = Grid { lo: -3.0, hi: 3.0, count: 61 };
    for k in [1.0, 3.0, 5.0] {
        paths.push(cmd_analytics(AnalyticsFamily::Gibbs, k, omega, out)?);
    }
    let density = Grid { lo: 0.0, hi: 10.0, count: 101 };
    for g in [ZrRate::LinearPlusFourthRoot, ZrRate::Linear] {
        paths.push(cmd_analytics(AnalyticsFamily::ZeroRange(g), 0.0, density, out)?);
    }
    Ok(paths)
}

/// Outcome of one diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        })
    }
}

impl From<bool> for Status {
    fn from(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub check: String,
    pub scope: String,
    pub status: Status,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiagnosticsReport {
    pub verdicts: Vec<Verdict>,
}

impl DiagnosticsReport {
    fn push(&mut self, check: &str, scope: String, status: Status, detail: String) {
        self.verdicts.push(Verdict { check: check.into(), scope, status, detail });
    }

    pub fn render(&self) -> String {
        self.verdicts
            .iter()
            .map(|v| format!("{} {} [{}] {}\n", v.status, v.check, v.scope, v.detail))
            .collect()
    }
}

/// Per-site columns of one sites table.
#[derive(Debug, Clone, Default)]
struct SiteData {
    mean: BTreeMap<String, Vec<Option<f64>>>,
    se: BTreeMap<String, Vec<Option<f64>>>,
    ta_mean: BTreeMap<String, Vec<Option<f64>>>,
}

fn complete(v: Option<&Vec<Option<f64>>>) -> Option<Vec<f64>> {
    v?.iter().copied().collect()
}

impl SiteData {
    fn instant(&self, obs: &str) -> Option<Vec<f64>> {
        complete(self.mean.get(obs))
    }

    fn std_err(&self, obs: &str) -> Option<Vec<f64>> {
        complete(self.se.get(obs))
    }

    fn averaged(&self, obs: &str) -> Option<Vec<f64>> {
        complete(self.ta_mean.get(obs))
    }
}

fn require_file(path: &Path) -> Result<(), CommandError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CommandError::MissingDependency(format!("{} (run simulate first)", path.display())))
    }
}

fn load_table(path: &Path, hash: &str) -> Result<Table, CommandError> {
    require_file(path)?;
    Ok(read_csv(path, Some(hash))?)
}

fn load_sites(path: &Path, hash: &str, n: usize) -> Result<SiteData, CommandError> {
    let t = load_table(path, hash)?;
    let (cs, co, cm, ce, ct) = (t.column("site")?, t.column("obs")?, t.column("mean")?, t.column("std_err")?, t.column("time_avg_mean")?);
    let mut data = SiteData::default();
    for r in 0..t.rows.len() {
        let site = t.usize_at(r, cs)?;
        if site >= n {
            return Err(CommandError::Invalid(format!("{}: site {site} out of range", path.display())));
        }
        let obs = t.rows[r][co].clone();
        for (map, col) in [(&mut data.mean, cm), (&mut data.se, ce), (&mut data.ta_mean, ct)] {
            map.entry(obs.clone()).or_insert_with(|| vec![None; n])[site] = t.opt_f64_at(r, col)?;
        }
    }
    Ok(data)
}

fn load_variances(path: &Path, hash: &str, n: usize) -> Result<Vec<VariancePoint>, CommandError> {
    let t = load_table(path, hash)?;
    let (ce, cl, cc, cv) = (t.column("epsilon")?, t.column("window_sites")?, t.column("centre")?, t.column("variance")?);
    let mut best: BTreeMap<u64, VariancePoint> = BTreeMap::new();
    for r in 0..t.rows.len() {
        let Some(var) = t.opt_f64_at(r, cv)? else { continue };
        let eps = t.f64_at(r, ce)?;
        let entry = best.entry(eps.to_bits()).or_insert(VariancePoint {
            n,
            epsilon: eps,
            window_sites: t.usize_at(r, cl)?,
            max_variance: f64::NEG_INFINITY,
            at_site: 0,
        });
        if var > entry.max_variance {
            entry.max_variance = var;
            entry.at_site = t.usize_at(r, cc)?;
        }
    }
    Ok(best.into_values().collect())
}

fn load_pmfs(path: &Path, hash: &str, n: usize) -> Result<Vec<EmpiricalPmf>, CommandError> {
    let t = load_table(path, hash)?;
    let (cs, cv, cc) = (t.column("site")?, t.column("value")?, t.column("count")?);
    let mut counts = vec![BTreeMap::new(); n];
    for r in 0..t.rows.len() {
        let site = t.usize_at(r, cs)?;
        if site >= n {
            return Err(CommandError::Invalid(format!("{}: site {site} out of range", path.display())));
        }
        counts[site].insert(t.i64_at(r, cv)?, t.usize_at(r, cc)? as u64);
    }
    Ok(counts.into_iter().map(EmpiricalPmf::from_counts).collect())
}

type Curve = Box<dyn Fn(f64) -> Result<f64, CommandError>>;

/// Predicted `E f` as a function of the mean value, and the scale to compare on.
fn reference_curve(cfg: &ExperimentConfig, obs: &str) -> Option<(Curve, CurveScale)> {
    let k = cfg.spec.params.k;
    match (cfg.spec.kind, obs) {
        (ProcessKind::ArrheniusCrystal, "rate") => Some((Box::new(move |x: f64| Ok((-2.0 * k * x).exp())), CurveScale::Log)),
        (ProcessKind::ArrheniusCrystal, "square") => {
            Some((Box::new(move |x: f64| Ok(f_hat(k, x, |n| (n * n) as f64)?)), CurveScale::Linear))
        }
        (ProcessKind::ZeroRange(g), name) if name != "value" => {
            let f: fn(ZrRate, i64) -> f64 = match name {
                "square" => |_, n| (n * n) as f64,
                "rate" => |g, n| g.eval(n),
                "fourth_root" => |_, n| (n as f64).sqrt().sqrt(),
                "value_exp_decay" => |_, n| n as f64 * (-(n as f64)).exp(),
                _ => return None,
            };
            Some((Box::new(move |x: f64| Ok(zr_f_hat(g, x.max(0.0), |n| f(g, n))?)), CurveScale::Linear))
        }
        (ProcessKind::SimpleExclusion, "square") => Some((Box::new(|x: f64| Ok(x)), CurveScale::Linear)),
        _ => None,
    }
}

/// Reads the outputs of `simulate` and runs every applicable diagnostic.
pub fn cmd_diagnose(cfg: &ExperimentConfig, out: &Path) -> Result<DiagnosticsReport, CommandError> {
    let hash = cfg.hash();
    let manifest_path = out.join(MANIFEST);
    require_file(&manifest_path)?;
    let manifest = RunManifest::parse(&read_text(&manifest_path)?)
        .ok_or_else(|| CommandError::Invalid(format!("{}: malformed manifest", manifest_path.display())))?;
    if manifest.config_hash != hash {
        return Err(IoError::HashMismatch { path: manifest_path, found: manifest.config_hash, expected: hash }.into());
    }
    let diag = out.join("diagnostics");
    let mut report = DiagnosticsReport::default();
    let k_bond = cfg.spec.params.k;
    let extra_obs: Vec<String> = cfg.plan_observables().iter().skip(2).map(|o| o.name().to_string()).collect();
    let mut ef_obs = vec!["square".to_string()];
    ef_obs.extend(extra_obs.iter().cloned());

    let mut eps_rows = Vec::new();
    let mut var_rows = Vec::new();
    let mut e_rows = Vec::new();
    let mut ef_rows = Vec::new();
    let mut efp_rows = Vec::new();
    let mut omega_rows = Vec::new();
    let mut kl_rows = Vec::new();
    let mut equi_rows = Vec::new();
    let mut smooth_rows = Vec::new();

    for (k, &t) in cfg.t_list.iter().enumerate() {
        let scope_t = format!("t={t}");
        let mut variance_points = Vec::new();
        let mut profiles = Vec::new();
        let mut noise_floor: f64 = 0.0;
        let mut ef_rms_by_obs: BTreeMap<String, Vec<(usize, f64)>> = BTreeMap::new();
        let mut omega_gap = Vec::new();
        for &n in &cfg.n_ladder {
            let scope = format!("N={n} t={t}");
            let sites = load_sites(&sites_file(out, n, k), &hash, n)?;
            variance_points.extend(load_variances(&windows_file(out, n, k), &hash, n)?);
            let Some(values) = sites.instant("value") else {
                report.push("select_epsilon", scope, Status::Skip, "site means unavailable".into());
                continue;
            };
            let ses = sites.std_err("value").unwrap_or_else(|| vec![0.0; n]);

            let epsilon = match select_epsilon(&values, &ses, &cfg.epsilon_grid) {
                Ok(choice) => {
                    for c in &choice.candidates {
                        eps_rows.push(vec![
                            n.to_string(), k.to_string(), fmt_f64(c.epsilon), fmt_f64(c.roughness), fmt_f64(c.bias),
                            c.qualifies.to_string(), (c.epsilon == choice.epsilon).to_string(),
                        ]);
                    }
                    report.push("select_epsilon", scope.clone(), Status::Pass, format!("epsilon={}", choice.epsilon));
                    Some(choice.epsilon)
                }
                Err(DiagnosticsError::NoEpsilonQualifies(table)) => {
                    report.push("select_epsilon", scope.clone(), Status::Fail, table.replace('\n', "; "));
                    None
                }
                Err(e) => return Err(e.into()),
            };
            noise_floor = noise_floor.max(crate::diagnostics::ROUGHNESS_FACTOR * median(&ses));

            if let Some(eps) = epsilon {
                profiles.push((n, windowed_profile(&values, eps)?));
                for obs in &ef_obs {
                    let Some((curve, scale)) = reference_curve(cfg, obs) else { continue };
                    let pair = match (sites.averaged("value"), sites.averaged(obs)) {
                        (Some(v), Some(f)) => Some((v, f)),
                        _ => sites.instant(obs).map(|f| (values.clone(), f)),
                    };
                    let Some((v, f)) = pair else { continue };
                    let (wv, wf) = (windowed_profile(&v, eps)?, windowed_profile(&f, eps)?);
                    let points: Vec<(f64, f64)> = wv.into_iter().zip(wf).collect();
                    let rms = ef_rms(&points, &curve, scale)?;
                    ef_rows.push(vec![k.to_string(), obs.clone(), n.to_string(), fmt_f64(eps), fmt_f64(rms)]);
                    ef_rms_by_obs.entry(obs.clone()).or_default().push((n, rms));
                }
            }

            for obs in &ef_obs {
                let (Some(f), Some(fse)) = (sites.instant(obs), sites.std_err(obs)) else { continue };
                let pairs: Vec<(f64, f64, f64)> = values.iter().zip(&f).zip(&fse).map(|((&v, &f), &s)| (v, f, s)).collect();
                let d = check_efprime_negative(&pairs, EFPRIME_BINS)?;
                for b in &d.bins {
                    efp_rows.push(vec![
                        n.to_string(), k.to_string(), obs.clone(), fmt_f64(b.lo), fmt_f64(b.hi),
                        b.count.to_string(), fmt_f64(b.spread), fmt_f64(b.noise),
                    ]);
                }
                report.push("efprime_dispersion", format!("{scope} f={obs}"), Status::Pass, format!("spread/noise={:.3}", d.ratio));
            }

            if cfg.spec.kind == ProcessKind::ArrheniusCrystal {
                let (Some(tv), Some(tr)) = (sites.averaged("value"), sites.averaged("rate")) else {
                    report.push("estimate_omega", scope, Status::Skip, "needs time-averaged value and rate".into());
                    continue;
                };
                let est = estimate_omega(&tv, &tr, k_bond)?;
                let window = cfg.delta.map(|d| cfg.spec.params.micro_time(n, d));
                let active: Vec<usize> = (0..n)
                    .filter(|&i| window.is_none_or(|w| 2.0 * tr[i] * w >= ACTIVE_EVENTS))
                    .collect();
                for i in 0..n {
                    omega_rows.push(vec![
                        n.to_string(), k.to_string(), i.to_string(),
                        fmt_f64(est.from_cumulative[i]), fmt_f64(est.from_rate[i]), fmt_f64(est.lambda[i]),
                        fmt_f64(est.roughness_cumulative[i]), fmt_f64(est.roughness_rate[i]),
                        active.binary_search(&i).is_ok().to_string(),
                    ]);
                }
                if !active.is_empty() {
                    omega_gap.push((n, est.sup_distance(active.iter().copied())));
                }

                let pmf_path = pmf_file(out, n, k);
                if cfg.pmf_samples > 0 && pmf_path.is_file() {
                    let pmfs = load_pmfs(&pmf_path, &hash, n)?;
                    let usable: Vec<usize> = active.iter().copied().filter(|&i| pmfs[i].total() > 0).collect();
                    if !usable.is_empty() {
                        let pick = |v: &Vec<f64>| usable.iter().map(|&i| v[i]).collect::<Vec<f64>>();
                        let p: Vec<EmpiricalPmf> = usable.iter().map(|&i| pmfs[i].clone()).collect();
                        let profile = check_local_gibbs_kl(&p, &pick(&est.from_cumulative), &pick(&est.lambda), k_bond)?;
                        for (j, &i) in usable.iter().enumerate() {
                            kl_rows.push(vec![
                                n.to_string(), k.to_string(), i.to_string(),
                                fmt_f64(profile.kl[j]), fmt_f64(profile.bias[j]), profile.samples[j].to_string(),
                            ]);
                        }
                        report.push(
                            "local_gibbs_kl",
                            scope.clone(),
                            Status::Pass,
                            format!("max_kl={:.4e} kl/bias={:.3}", profile.max, profile.aggregate_ratio()),
                        );
                    }
                }

                let lam: Vec<f64> = est.lambda.clone();
                let eq = lambda_equidistribution(&lam)?;
                for b in &eq.bounds {
                    equi_rows.push(vec![
                        n.to_string(), k.to_string(), b.cutoff.to_string(), fmt_f64(eq.star_discrepancy),
                        fmt_f64(b.shape), fmt_f64(b.bound), fmt_f64(b.explicit_bound),
                    ]);
                }
                report.push(
                    "equidistribution",
                    scope.clone(),
                    eq.within_bounds.into(),
                    format!("star_discrepancy={:.4e}", eq.star_discrepancy),
                );

                match check_mesoscopic_smoothing_at_integers(&tv, &est.from_cumulative, SMOOTHING_RADIUS, SMOOTHING_INTEGER_TOLERANCE)? {
                    SmoothingVerdict::Skipped(why) => report.push("mesoscopic_smoothing", scope, Status::Skip, why),
                    SmoothingVerdict::Checked { integer_centre, integer_metric, generic_centre, generic_metric, smoother_at_integer } => {
                        smooth_rows.push(vec![
                            n.to_string(), k.to_string(), integer_centre.to_string(), fmt_f64(integer_metric),
                            generic_centre.to_string(), fmt_f64(generic_metric),
                        ]);
                        report.push(
                            "mesoscopic_smoothing",
                            scope,
                            smoother_at_integer.into(),
                            format!("integer={integer_metric:.4e} generic={generic_metric:.4e}"),
                        );
                    }
                }
            }
        }

        for p in &variance_points {
            var_rows.push(vec![
                p.n.to_string(), k.to_string(), fmt_f64(p.epsilon), p.window_sites.to_string(),
                fmt_f64(p.max_variance), p.at_site.to_string(),
            ]);
        }
        match check_v(variance_points) {
            Ok(v) => {
                let slopes: Vec<String> = v.slopes.iter().map(|(e, s)| format!("eps={e}:slope={s:.3}")).collect();
                report.push("check_v", scope_t.clone(), v.decreasing.into(), slopes.join(" "));
            }
            Err(DiagnosticsError::TooFewPoints { .. }) => {
                let why = "needs three lattice sizes and an epsilon with 2 N epsilon >= 8";
                report.push("check_v", scope_t.clone(), Status::Skip, why.into());
            }
            Err(e) => return Err(e.into()),
        }
        if profiles.len() >= 2 {
            let c = check_e(&profiles, noise_floor)?;
            for (a, b, d) in &c.distances {
                e_rows.push(vec![k.to_string(), a.to_string(), b.to_string(), fmt_f64(*d)]);
            }
            report.push("check_e", scope_t.clone(), c.cauchy_decreasing.into(), format!("noise_floor={noise_floor:.3e}"));
        } else {
            report.push("check_e", scope_t.clone(), Status::Skip, "needs two lattice sizes with a selected epsilon".into());
        }
        for (obs, rms) in ef_rms_by_obs {
            let trend: LadderTrend = check_ef(rms);
            let shown: Vec<String> = trend.values.iter().map(|(n, r)| format!("N={n}:{r:.4e}")).collect();
            let status = if trend.values.len() >= 2 { trend.decreasing.into() } else { Status::Skip };
            report.push("check_ef", format!("{scope_t} f={obs}"), status, shown.join(" "));
        }
        if omega_gap.len() >= 2 {
            let trend = LadderTrend::new(omega_gap, 0.0);
            let shown: Vec<String> = trend.values.iter().map(|(n, r)| format!("N={n}:{r:.4e}")).collect();
            report.push("omega_gap", scope_t.clone(), trend.decreasing.into(), shown.join(" "));
        }
    }

    write_csv(&diag.join("select_epsilon.csv"), &hash, &["n", "t_index", "epsilon", "roughness", "bias", "qualifies", "selected"], eps_rows)?;
    write_csv(&diag.join("check_v.csv"), &hash, &["n", "t_index", "epsilon", "window_sites", "max_variance", "at_site"], var_rows)?;
    write_csv(&diag.join("check_e.csv"), &hash, &["t_index", "n_small", "n_large", "distance"], e_rows)?;
    write_csv(&diag.join("check_ef.csv"), &hash, &["t_index", "obs", "n", "epsilon", "rms"], ef_rows)?;
    write_csv(&diag.join("efprime.csv"), &hash, &["n", "t_index", "obs", "bin_lo", "bin_hi", "count", "spread", "noise"], efp_rows)?;
    write_csv(
        &diag.join("omega.csv"),
        &hash,
        &["n", "t_index", "site", "omega_cumulative", "omega_rate", "lambda", "roughness_cumulative", "roughness_rate", "active"],
        omega_rows,
    )?;
    write_csv(&diag.join("local_gibbs_kl.csv"), &hash, &["n", "t_index", "site", "kl", "bias", "samples"], kl_rows)?;
    write_csv(
        &diag.join("equidistribution.csv"),
        &hash,
        &["n", "t_index", "cutoff", "star_discrepancy", "shape", "bound", "explicit_bound"],
        equi_rows,
    )?;
    write_csv(
        &diag.join("mesoscopic_smoothing.csv"),
        &hash,
        &["n", "t_index", "integer_centre", "integer_metric", "generic_centre", "generic_metric"],
        smooth_rows,
    )?;
    write_text(&diag.join("verdicts.txt"), &report.render())?;
    Ok(report)
}
