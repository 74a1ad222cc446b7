//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs every criterion by default; numeric arguments select a subset, e.g.
//! `cargo test --test acceptance -- 1 7`.

use std::process::ExitCode;
use std::time::Instant;

use lesim_core::diagnostics::{
    check_v, detrended_roughness, ef_rms, estimate_omega, lambda_equidistribution, max_window_variance, median,
    roughness_metric, epsilon_table, star_discrepancy, windowed_profile, check_local_gibbs_kl, CurveScale,
    DiagnosticsError, LadderTrend,
};
use lesim_core::estimators::{centred_window_len, EmpiricalPmf, EnsembleStats, TimeAverageStats};
use lesim_core::gibbs::{exp_moment, lambda_d, u_d, AveragedFamily, CurvatureFamily, DiscreteGaussian};
use lesim_core::kmc::{replica_rng, JumpProcess, Step, Trajectory};
use lesim_core::lattice::{
    arrhenius_rate, column_jump_in_place, log_arrhenius_rate, wrap, CurvatureConfig, Direction, HeightConfig,
    SystemParams,
};
use lesim_core::observable::Observable;
use lesim_core::processes::{
    crystal_params, default_height_profile, default_occupancy_profile, sample_crystal, sample_zero_range,
    CrystalProcess, InitSampler, InitialCondition, ProcessKind, ProcessSpec,
};
use lesim_core::runner::{run_ensemble, EnsemblePlan};
use lesim_core::zero_range::{zr_f_hat, ZrRate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Binomial, ContinuousCDF, DiscreteCDF, Normal};

type Outcome = Result<(bool, String), Box<dyn std::error::Error>>;

const CRITERIA: [(u32, &str, fn() -> Outcome); 8] = [
    (1, "closed-form identities", closed_form_identities),
    (2, "structural simulation", structural_simulation),
    (3, "equilibrium stationarity", equilibrium_stationarity),
    (4, "zero-range Poisson invariance", zero_range_poisson),
    (5, "smooth local equilibrium", smooth_local_equilibrium),
    (6, "rough local equilibrium", rough_local_equilibrium),
    (7, "equidistribution", equidistribution),
    (8, "family KL on exact samples", family_kl),
];

fn main() -> ExitCode {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut all_pass = true;
    for (id, name, run) in CRITERIA {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = run().unwrap_or_else(|e| (false, format!("error: {e}")));
        all_pass &= pass;
        let status = if pass { "PASS" } else { "FAIL" };
        println!("criterion {id} {status} [{name}] ({:.1}s) {detail}", start.elapsed().as_secs_f64());
    }
    if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

/// Largest count of |z| > 3 among `tests` independent tests consistent with chance at level 0.001.
fn allowed_exceedances(tests: usize) -> u64 {
    allowed_exceedances_at(tests, 0.0027)
}

/// As `allowed_exceedances` with per-test exceedance probability `p`.
fn allowed_exceedances_at(tests: usize, p: f64) -> u64 {
    let b = Binomial::new(p, tests as u64).expect("valid binomial");
    (0..=tests as u64).find(|&k| b.cdf(k) >= 0.999).unwrap_or(tests as u64)
}

fn exceedances(z: &[f64]) -> u64 {
    z.iter().filter(|z| z.abs() > 3.0).count() as u64
}

fn two_sided_p(z: f64) -> f64 {
    let normal = Normal::standard();
    2.0 * (1.0 - normal.cdf(z.abs()))
}

fn site_z(stats: &EnsembleStats, obs: usize, target: f64) -> Result<Vec<f64>, Box<dyn std::error::Error>> {
    (0..stats.layout().n_sites)
        .map(|s| {
            let (m, se) = stats.ensemble_expectation(s, obs)?;
            Ok((m - target) / se)
        })
        .collect()
}

fn max_rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Wide enough that both tails are far below double precision for `K >= 1`.
const DIRECT_RANGE: std::ops::RangeInclusive<i64> = -80..=80;

fn closed_form_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut rate, mut mean, mut averaged, mut moment, mut round_trip) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for k in [1.0, 3.0, 5.0] {
        for _ in 0..100 {
            let omega = rng.random_range(-1.0..1.0);
            let lambda = rng.random_range(-2.0..2.0);
            let fam = CurvatureFamily::new(k, omega, lambda)?;
            let direct_rate: f64 = DIRECT_RANGE.map(|n| arrhenius_rate(n, k) * fam.pmf(n).p).sum();
            rate = rate.max(max_rel(direct_rate, (-2.0 * k * omega).exp()));
            let direct_mean: f64 = DIRECT_RANGE.map(|n| n as f64 * fam.pmf(n).p).sum();
            mean = mean.max((direct_mean - (u_d(k, lambda)? - u_d(k, lambda - omega)?)).abs());

            let c = rng.random_range(-1.0..1.0);
            let rho = DiscreteGaussian::new(k, lambda)?;
            let direct_moment: f64 = DIRECT_RANGE.map(|n| (c * k * n as f64).exp() * rho.pmf(n).p).sum();
            moment = moment.max(max_rel(exp_moment(k, lambda, c)?, direct_moment));
            round_trip = round_trip.max((lambda_d(k, u_d(k, lambda)?)? - lambda).abs());
        }
        for j in 0..=20 {
            let omega = -3.0 + 0.3 * j as f64;
            averaged = averaged.max((AveragedFamily::new(k, omega)?.mean() - omega).abs());
        }
    }
    let pass = rate < 1e-10 && mean < 1e-10 && averaged < 1e-8 && moment < 1e-10 && round_trip < 1e-10;
    Ok((
        pass,
        format!(
            "rate_rel={rate:.2e} mean={mean:.2e} averaged_mean={averaged:.2e} exp_moment_rel={moment:.2e} round_trip={round_trip:.2e}"
        ),
    ))
}

/// Largest `|closed - brute| / sum of rates` over every `w` in `[-2, 2]^n`.
fn exhaustive_drift(n: usize, k: f64) -> f64 {
    let rates: Vec<f64> = (-2..=2).map(|w| arrhenius_rate(w, k)).collect();
    let mut digits = vec![0usize; n];
    let mut w = vec![-2i64; n];
    let mut scratch = w.clone();
    let mut brute = vec![0.0; n];
    let mut worst: f64 = 0.0;
    loop {
        brute.iter_mut().for_each(|b| *b = 0.0);
        for i in 0..n {
            for dir in Direction::BOTH {
                column_jump_in_place(&mut scratch, i, dir);
                let r = rates[(w[i] + 2) as usize];
                for j in 0..n {
                    brute[j] += r * (scratch[j] - w[j]) as f64;
                }
                scratch.copy_from_slice(&w);
            }
        }
        let cfg = CurvatureConfig::new(w.clone()).expect("n >= 4");
        let scale: f64 = w.iter().map(|&v| rates[(v + 2) as usize]).sum();
        for (j, b) in brute.iter().enumerate() {
            worst = worst.max((cfg.generator_drift(j, k) - b).abs() / scale);
        }
        // Odometer step over base-5 digits.
        let mut pos = 0;
        loop {
            if pos == n {
                return worst;
            }
            digits[pos] += 1;
            if digits[pos] < 5 {
                w[pos] = digits[pos] as i64 - 2;
                scratch[pos] = w[pos];
                break;
            }
            digits[pos] = 0;
            w[pos] = -2;
            scratch[pos] = -2;
            pos += 1;
        }
    }
}

fn structural_simulation() -> Outcome {
    let drift = (4..=12).map(|n| exhaustive_drift(n, 1.0)).fold(0.0, f64::max);

    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut balance: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(4..40);
        let h: Vec<i64> = (0..n).map(|_| rng.random_range(-20..20)).collect();
        let k = rng.random_range(0.5..5.0);
        let hc = HeightConfig::new(h)?;
        let z = hc.slopes();
        let w = z.curvatures();
        for i in 0..n {
            for j in [wrap(i as isize - 1, n), wrap(i as isize + 1, n)] {
                let next = hc.apply_jump(i, j)?.slopes();
                let forward = log_arrhenius_rate(w.as_slice()[i], k) + z.gibbs_log_density(k);
                let reverse = log_arrhenius_rate(next.curvatures().as_slice()[j], k) + next.gibbs_log_density(k);
                balance = balance.max((forward - reverse).abs());
            }
        }
    }

    let process = sample_crystal(&InitialCondition::EquilibriumSlopes { lambda: 0.3 }, 64, 1.0, &mut replica_rng(3, 0))?;
    let start = process.slopes().conserved_quantities();
    let mut traj = Trajectory::new(process.clone(), replica_rng(3, 1));
    for _ in 0..100_000 {
        traj.step()?;
    }
    let end = traj.process().slopes().conserved_quantities();
    let conserved = traj.event_count() == 100_000 && end.s0 == start.s0 && end.s1_mod_n == start.s1_mod_n;

    let path = |p: CrystalProcess| -> Result<(Vec<Step>, Vec<i64>, u64), Box<dyn std::error::Error>> {
        let mut t = Trajectory::new(p, replica_rng(4, 7));
        let steps = (0..20_000).map(|_| t.step()).collect::<Result<Vec<_>, _>>()?;
        Ok((steps, t.process().values().to_vec(), t.t_micro().to_bits()))
    };
    let deterministic = path(process.clone())? == path(process)?;

    let pass = drift < 1e-12 && balance < 1e-10 && conserved && deterministic;
    Ok((
        pass,
        format!(
            "drift_rel(N=4..12 exhaustive)={drift:.2e} balance={balance:.2e} conserved={conserved} deterministic={deterministic}"
        ),
    ))
}

/// Per-site probability that the rate mean of `replicas` exact equilibrium draws lies more than
/// 3 plug-in standard errors from 1. Rare large rates make this far larger than the normal 0.0027.
fn rate_exceedance_null(k: f64, replicas: usize, sites: u64) -> Result<f64, Box<dyn std::error::Error>> {
    let fam = CurvatureFamily::new(k, 0.0, 0.0)?;
    let mut hits = 0;
    for s in 0..sites {
        let mut rng = replica_rng(3030, s);
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..replicas {
            let r = arrhenius_rate(fam.sample(&mut rng), k);
            sum += r;
            sq += r * r;
        }
        let n = replicas as f64;
        let mean = sum / n;
        let se = ((sq / n - mean * mean) / (n - 1.0)).sqrt();
        hits += usize::from(((mean - 1.0) / se).abs() > 3.0);
    }
    Ok(hits as f64 / sites as f64)
}

fn equilibrium_stationarity() -> Outcome {
    let (n, k) = (256, 3.0);
    let spec = ProcessSpec { kind: ProcessKind::ArrheniusCrystal, params: crystal_params(k)? };
    let mut plan = EnsemblePlan::new(spec, InitialCondition::EquilibriumSlopes { lambda: 0.0 }, n, 10_000, 303);
    plan.observables = vec![Observable::Value, Observable::Square, Observable::ArrheniusRate { k }];
    plan.sample_times = vec![5.0, 10.0];
    let result = run_ensemble(&plan)?;
    let null_p = rate_exceedance_null(k, plan.replicas as usize, 2000)?;
    let allowed = allowed_exceedances_at(n, null_p);
    let mut pass = true;
    let mut detail = vec![format!("null P(|z|>3)={null_p:.4} (nominal 0.0027)")];
    for (stats, t) in result.instant.iter().zip(&plan.sample_times) {
        let e = exceedances(&site_z(stats, 2, 1.0)?);
        pass &= e <= allowed;
        detail.push(format!("t={t}: rate |z|>3 at {e}/{n} (allowed {allowed}, nominal {})", allowed_exceedances(n)));
    }
    // Two-time comparison of the first two moments, Bonferroni over sites and moments.
    let (a, b) = (&result.instant[0], &result.instant[1]);
    let mut p_min: f64 = 1.0;
    for obs in 0..2 {
        for s in 0..n {
            let (ma, sa) = a.ensemble_expectation(s, obs)?;
            let (mb, sb) = b.ensemble_expectation(s, obs)?;
            p_min = p_min.min(two_sided_p((ma - mb) / (sa * sa + sb * sb).sqrt()));
        }
    }
    let adjusted = (p_min * 2.0 * n as f64).min(1.0);
    pass &= adjusted > 0.001;
    detail.push(format!("two-time moments adjusted p={adjusted:.3}"));
    Ok((pass, detail.join("; ")))
}

fn zero_range_poisson() -> Outcome {
    let n = 128;
    let horizon = (n * n) as f64 / 16.0;
    let spec = ProcessSpec { kind: ProcessKind::ZeroRange(ZrRate::Linear), params: SystemParams::new(1.0, 2.0, 0.0)? };
    let mut plan = EnsemblePlan::new(spec, InitialCondition::Poisson { density: 2.0 }, n, 10_000, 404);
    plan.sample_times = vec![horizon];
    let result = run_ensemble(&plan)?;
    let stats = &result.instant[0];
    let replicas = stats.count() as f64;
    let mean_z = site_z(stats, 0, 2.0)?;
    // Sample variance of Poisson(2) has variance (mu4 - sigma^4) / n = 10 / n.
    let var_se = (10.0 / replicas).sqrt();
    let var_z = (0..n)
        .map(|s| {
            let m = stats.sample_mean(s, 0)?;
            let m2 = stats.sample_mean(s, 1)?;
            Ok(((m2 - m * m) * replicas / (replicas - 1.0) - 2.0) / var_se)
        })
        .collect::<Result<Vec<f64>, Box<dyn std::error::Error>>>()?;
    let allowed = allowed_exceedances(n);
    let (em, ev) = (exceedances(&mean_z), exceedances(&var_z));
    Ok((
        em <= allowed && ev <= allowed,
        format!("t_micro={horizon} mean |z|>3 at {em}/{n}, variance |z|>3 at {ev}/{n} (allowed {allowed})"),
    ))
}

/// Per-site moments needed for the mean, `v^(1/4)` and their covariance.
struct ZrMoments {
    v: Vec<f64>,
    v2: Vec<f64>,
    f: Vec<f64>,
    f2: Vec<f64>,
    vf: Vec<f64>,
}

fn zr_moments(n: usize, replicas: u64, t_micro: f64, seed: u64) -> Result<ZrMoments, Box<dyn std::error::Error>> {
    let g = ZrRate::LinearPlusFourthRoot;
    let init = InitialCondition::Profile(InitSampler { profile: default_occupancy_profile(), beta: 0.0 });
    let mut m = ZrMoments { v: vec![0.0; n], v2: vec![0.0; n], f: vec![0.0; n], f2: vec![0.0; n], vf: vec![0.0; n] };
    for r in 0..replicas {
        let mut rng = replica_rng(seed, r);
        let process = sample_zero_range(&init, n, g, &mut rng)?;
        let mut traj = Trajectory::new(process, rng);
        traj.run_until_micro(t_micro, &mut [])?;
        for (i, &occ) in traj.process().occupancies().iter().enumerate() {
            let (x, f) = (occ as f64, Observable::FourthRoot.eval(occ));
            m.v[i] += x;
            m.v2[i] += x * x;
            m.f[i] += f;
            m.f2[i] += f * f;
            m.vf[i] += x * f;
        }
    }
    let scale = 1.0 / replicas as f64;
    for col in [&mut m.v, &mut m.v2, &mut m.f, &mut m.f2, &mut m.vf] {
        col.iter_mut().for_each(|s| *s *= scale);
    }
    Ok(m)
}

fn fourth_root_curve(v: f64) -> Result<f64, Box<dyn std::error::Error>> {
    Ok(zr_f_hat(ZrRate::LinearPlusFourthRoot, v.max(0.0), |n| Observable::FourthRoot.eval(n))?)
}

fn smooth_local_equilibrium() -> Outcome {
    let (replicas, t_micro) = (20_000u64, 100.0);
    let rn = replicas as f64;
    let mut pass = true;
    let mut detail = Vec::new();
    for n in [250usize, 500, 1000] {
        let m = zr_moments(n, replicas, t_micro, 500 + n as u64)?;
        let var_v: Vec<f64> = (0..n).map(|i| (m.v2[i] - m.v[i] * m.v[i]) * rn / (rn - 1.0)).collect();
        let se_v: Vec<f64> = var_v.iter().map(|v| (v / rn).sqrt()).collect();

        // Roughness at the steepest point of the profile.
        let (x, r) = (0.125, 5);
        let centre = (n as f64 * x).round() as i64;
        let window_se: Vec<f64> =
            (centre - r as i64..=centre + r as i64).map(|i| se_v[i.rem_euclid(n as i64) as usize]).collect();
        let rough = detrended_roughness(&m.v, x, r);
        let rough_limit = 5.0 * median(&window_se);

        // Pairs against the predicted curve with delta-method errors.
        let (mut ss, mut prop) = (0.0, 0.0);
        for i in 0..n {
            let fhat = fourth_root_curve(m.v[i])?;
            let h = 1e-4;
            let lo = (m.v[i] - h).max(0.0);
            let slope = (fourth_root_curve(m.v[i] + h)? - fourth_root_curve(lo)?) / (m.v[i] + h - lo);
            let var_f = m.f2[i] - m.f[i] * m.f[i];
            let cov = m.vf[i] - m.v[i] * m.f[i];
            let var_resid = (var_f - 2.0 * slope * cov + slope * slope * (m.v2[i] - m.v[i] * m.v[i])) * rn / (rn - 1.0);
            ss += (m.f[i] - fhat).powi(2);
            prop += var_resid / rn;
        }
        let rms = (ss / n as f64).sqrt();
        let prop_se = (prop / n as f64).sqrt();
        let ok = rough < rough_limit && rms < 3.0 * prop_se;
        pass &= ok;
        detail.push(format!(
            "N={n}: roughness={rough:.4} (< {rough_limit:.4}) rms={rms:.5} (< 3x{prop_se:.5}) {}",
            if ok { "ok" } else { "fail" }
        ));
    }
    Ok((pass, detail.join("; ")))
}

const ROUGH_EPSILONS: [f64; 5] = [1.0 / 128.0, 1.0 / 64.0, 1.0 / 32.0, 1.0 / 16.0, 1.0 / 8.0];
/// Minimum expected events per site in the averaging window for a site to count as active.
const ACTIVE_EVENTS: f64 = 50.0;

struct RoughRun {
    n: usize,
    instant: EnsembleStats,
    averaged: TimeAverageStats,
}

fn rough_run(n: usize, t_micro: f64, delta: f64) -> Result<RoughRun, Box<dyn std::error::Error>> {
    let k = 3.0;
    let spec = ProcessSpec { kind: ProcessKind::ArrheniusCrystal, params: crystal_params(k)? };
    let init = InitialCondition::Profile(InitSampler { profile: default_height_profile(), beta: 2.0 });
    let mut plan = EnsemblePlan::new(spec, init, n, 10_000, 600 + n as u64);
    plan.observables = vec![Observable::Value, Observable::Square, Observable::ArrheniusRate { k }];
    plan.sample_times = vec![t_micro];
    plan.delta = Some(delta);
    plan.window_lengths = ROUGH_EPSILONS.iter().map(|&e| centred_window_len(n, e)).collect();
    let mut result = run_ensemble(&plan)?;
    let averaged = result.time_averaged.remove(0).ok_or("time average missing")?;
    Ok(RoughRun { n, instant: result.instant.remove(0), averaged })
}

fn profile_with_se(
    expectation: impl Fn(usize) -> Result<(f64, f64), lesim_core::estimators::EstimatorError>,
    n: usize,
) -> Result<(Vec<f64>, Vec<f64>), Box<dyn std::error::Error>> {
    let pairs = (0..n).map(expectation).collect::<Result<Vec<_>, _>>()?;
    Ok(pairs.into_iter().unzip())
}

fn window_median(values: &[f64], centre: usize, r: usize) -> f64 {
    let n = values.len() as i64;
    let picked: Vec<f64> =
        (centre as i64 - r as i64..=centre as i64 + r as i64).map(|i| values[i.rem_euclid(n) as usize]).collect();
    median(&picked)
}

fn rough_local_equilibrium() -> Outcome {
    let (k, t_micro, delta) = (3.0, 8.0, 4.0);
    let mut pass_a = true;
    let mut detail = Vec::new();
    let mut variance_points = Vec::new();
    let mut ef = Vec::new();
    let mut gap = Vec::new();
    for n in [256usize, 512, 1024] {
        let run = rough_run(n, t_micro, delta)?;
        let (w, w_se) = profile_with_se(|s| run.instant.ensemble_expectation(s, 0), n)?;
        let (tv, _) = profile_with_se(|s| run.averaged.time_averaged_expectation(s, 0), n)?;
        let (tr, tr_se) = profile_with_se(|s| run.averaged.time_averaged_expectation(s, 2), n)?;
        let active: Vec<usize> = (0..n).filter(|&i| 2.0 * tr[i] * delta >= ACTIVE_EVENTS).collect();
        if active.is_empty() {
            return Ok((false, format!("N={n}: no active sites")));
        }

        // (a) roughest curvature-mean window in the active region; the rate means must be
        // smooth in that same window.
        let r = 5;
        let roughness_at = |i: usize| roughness_metric(&w, i as f64 / run.n as f64, r);
        let hot = active.iter().copied().max_by(|&a, &b| roughness_at(a).total_cmp(&roughness_at(b))).unwrap_or(0);
        let x = hot as f64 / run.n as f64;
        let w_rough = roughness_at(hot);
        let w_limit = 10.0 * window_median(&w_se, hot, r);
        let r_rough = detrended_roughness(&tr, x, r);
        let r_limit = 5.0 * window_median(&tr_se, hot, r);
        let ok_a = w_rough > w_limit && r_rough < r_limit;
        pass_a &= ok_a;

        // (b) inputs.
        for &e in &ROUGH_EPSILONS {
            variance_points.push(max_window_variance(&run.instant, e)?);
        }

        // (c) windowed rate means against exp(-2 K omega) over the active region. When no
        // epsilon qualifies, the one closest to qualifying is used.
        let table = epsilon_table(&w, &w_se, &ROUGH_EPSILONS)?;
        let eps = table.selected().unwrap_or_else(|| table.closest());
        let rms_at = |e: f64| -> Result<f64, Box<dyn std::error::Error>> {
            let (wv, wr) = (windowed_profile(&tv, e)?, windowed_profile(&tr, e)?);
            let points: Vec<(f64, f64)> = active.iter().map(|&i| (wv[i], wr[i])).collect();
            Ok(ef_rms(&points, |x| Ok::<_, DiagnosticsError>((-2.0 * k * x).exp()), CurveScale::Log)?)
        };
        let rms = rms_at(eps)?;
        ef.push((n, rms));
        let mut by_eps = Vec::new();
        for c in &table.candidates {
            by_eps.push(format!(
                "{}:{:.3}{}",
                c.epsilon,
                rms_at(c.epsilon)?,
                if c.qualifies { "q" } else { "" }
            ));
        }

        // (d) gap estimators over the active region.
        let est = estimate_omega(&tv, &tr, k)?;
        let distance = est.sup_distance(active.iter().copied());
        gap.push((n, distance));

        detail.push(format!(
            "N={n}: active={} x*={x:.3} w_rough={w_rough:.3} (> {w_limit:.3}) rate_rough={r_rough:.4} (< {r_limit:.4}) eps={eps}{} ef_rms={rms:.4} [{}] gap={distance:.4}",
            active.len(),
            if table.selected().is_some() { "" } else { " (closest)" },
            by_eps.join(" ")
        ));
    }
    let v = check_v(variance_points)?;
    let ef_trend = LadderTrend::new(ef, 0.0);
    let gap_trend = LadderTrend::new(gap, 0.0);
    let slopes: Vec<String> = v.slopes.iter().map(|(e, s)| format!("{e}:{s:.2}")).collect();
    detail.push(format!(
        "(a)={pass_a} (b)={} slopes=[{}] (c)={} (d)={}",
        v.decreasing,
        slopes.join(" "),
        ef_trend.decreasing,
        gap_trend.decreasing
    ));
    Ok((pass_a && v.decreasing && ef_trend.decreasing && gap_trend.decreasing, detail.join("; ")))
}

fn equidistribution() -> Outcome {
    let mut midpoint: f64 = 0.0;
    for n in [1usize, 10, 100, 1000, 10_000] {
        let grid: Vec<f64> = (1..=n).map(|i| (i as f64 - 0.5) / n as f64).collect();
        midpoint = midpoint.max((star_discrepancy(&grid) - 0.5 / n as f64).abs());
    }
    let golden = (5f64.sqrt() - 1.0) / 2.0;
    let mut within = true;
    let mut shown = Vec::new();
    for n in [100usize, 1000, 10_000] {
        let points: Vec<f64> = (1..=n).map(|i| (i as f64 * golden).fract()).collect();
        let eq = lambda_equidistribution(&points)?;
        within &= eq.within_bounds;
        let tightest = eq.bounds.iter().map(|b| b.bound.min(b.explicit_bound)).fold(f64::INFINITY, f64::min);
        shown.push(format!("n={n}: D*={:.3e} <= {tightest:.3e}", eq.star_discrepancy));
    }
    Ok((midpoint < 1e-14 && within, format!("midpoint_abs={midpoint:.1e}; {}", shown.join("; "))))
}

fn family_kl() -> Outcome {
    let k = 3.0;
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let (mut pmfs, mut omegas, mut lambdas) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..50 {
        let omega = rng.random_range(-1.0..1.0);
        let lambda = rng.random_range(0.0..1.0);
        let fam = CurvatureFamily::new(k, omega, lambda)?;
        pmfs.push(EmpiricalPmf::from_samples((0..1000).map(|_| fam.sample(&mut rng))));
        omegas.push(omega);
        lambdas.push(lambda);
    }
    let profile = check_local_gibbs_kl(&pmfs, &omegas, &lambdas, k)?;
    let ratio = profile.aggregate_ratio();
    let over = profile.kl.iter().zip(&profile.bias).filter(|(kl, b)| **kl > 3.0 * **b).count();
    Ok((
        (1.0 / 3.0..=3.0).contains(&ratio),
        format!("sum_kl/sum_bias={ratio:.3} instances above 3x bias: {over}/50 max_kl={:.2e}", profile.max),
    ))
}
