//! Verification checks comparing simulated statistics with local-equilibrium predictions:
//! variance decay, profile convergence, observable curves, roughness, parameter
//! estimators, relative entropy against the two-parameter family and equidistribution.

use std::f64::consts::PI;
use std::fmt::Write as _;

use thiserror::Error;

use crate::estimators::{centred_window_len, kl_divergence, EmpiricalPmf, EnsembleStats, EstimatorError};
use crate::gibbs::{lambda_d_with, u_o, CurvatureFamily, GibbsError, ThetaNormalizer};

/// Points of the common grid used to compare profiles across lattice sizes.
pub const RESAMPLE_POINTS: usize = 512;
/// Cutoffs at which the Fourier bound on the discrepancy is evaluated.
pub const ET_CUTOFFS: [usize; 3] = [10, 100, 1000];
/// Constant multiplying the Fourier bound.
pub const ET_CONSTANT: f64 = 1.0;
/// Multiple of the median standard error used as the roughness threshold.
pub const ROUGHNESS_FACTOR: f64 = 5.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("need at least {need} entries, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("input lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("no epsilon qualifies:\n{0}")]
    NoEpsilonQualifies(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Gibbs(#[from] GibbsError),
}

fn require(got: usize, need: usize) -> Result<(), DiagnosticsError> {
    if got < need {
        Err(DiagnosticsError::TooFewPoints { need, got })
    } else {
        Ok(())
    }
}

fn same_len(a: usize, b: usize) -> Result<(), DiagnosticsError> {
    if a != b {
        Err(DiagnosticsError::LengthMismatch(a, b))
    } else {
        Ok(())
    }
}

/// Sites `i` with `|i - N x| <= r`, wrapped onto the ring.
fn sites_within(n: usize, x: f64, r: usize) -> impl Iterator<Item = usize> {
    let c = n as f64 * x;
    let lo = (c - r as f64).ceil() as i64;
    let hi = (c + r as f64).floor() as i64;
    let count = ((hi - lo + 1).max(0) as usize).min(n);
    (0..count).map(move |k| (lo + k as i64).rem_euclid(n as i64) as usize)
}

/// `max |v_{i+1} - v_i|` over sites `|i - N x| <= r`.
pub fn roughness_metric(values: &[f64], x: f64, r: usize) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    sites_within(n, x, r)
        .map(|i| (values[(i + 1) % n] - values[i]).abs())
        .fold(0.0, f64::max)
}

/// Like `roughness_metric`, after removing a least-squares linear trend from the
/// differences in the window, so a smooth profile scores near zero at any slope.
pub fn detrended_roughness(values: &[f64], x: f64, r: usize) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let diffs: Vec<f64> = sites_within(n, x, r).map(|i| values[(i + 1) % n] - values[i]).collect();
    max_residual(&diffs)
}

fn max_residual(y: &[f64]) -> f64 {
    let m = y.len();
    if m < 3 {
        return 0.0;
    }
    let mf = m as f64;
    let xbar = (mf - 1.0) / 2.0;
    let ybar = y.iter().sum::<f64>() / mf;
    let (sxy, sxx) = y.iter().enumerate().fold((0.0, 0.0), |(sxy, sxx), (k, &v)| {
        let dx = k as f64 - xbar;
        (sxy + dx * (v - ybar), sxx + dx * dx)
    });
    let slope = sxy / sxx;
    y.iter()
        .enumerate()
        .map(|(k, &v)| (v - ybar - slope * (k as f64 - xbar)).abs())
        .fold(0.0, f64::max)
}

/// Largest detrended roughness over every site of the ring.
pub fn profile_roughness(values: &[f64], r: usize) -> f64 {
    let n = values.len();
    (0..n).map(|i| detrended_roughness(values, i as f64 / n as f64, r)).fold(0.0, f64::max)
}

/// Centred moving average over the `2 ceil(N eps) - 1` sites within `N eps` of each site.
pub fn windowed_profile(values: &[f64], epsilon: f64) -> Result<Vec<f64>, DiagnosticsError> {
    let n = values.len();
    require(n, 1)?;
    let len = centred_window_len(n, epsilon);
    if len == 0 {
        return Err(EstimatorError::EmptyWindow { x: 0.0, epsilon }.into());
    }
    let h = (len - 1) / 2;
    let mut prefix = Vec::with_capacity(3 * n + 1);
    prefix.push(0.0);
    for k in 0..3 * n {
        let last = prefix[k];
        prefix.push(last + values[k % n]);
    }
    Ok((0..n)
        .map(|i| {
            let start = i + n - h;
            (prefix[start + len] - prefix[start]) / len as f64
        })
        .collect())
}

/// Monotone-decrease summary of a quantity along the lattice-size ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct LadderTrend {
    pub values: Vec<(usize, f64)>,
    pub decreasing: bool,
}

impl LadderTrend {
    /// Strict decrease, except that values at or below `floor` count as converged.
    pub fn new(mut values: Vec<(usize, f64)>, floor: f64) -> Self {
        values.sort_by_key(|v| v.0);
        let decreasing = values.windows(2).all(|w| w[1].1 < w[0].1 || w[1].1 <= floor);
        Self { values, decreasing }
    }
}

/// Max-over-centre variance of the window average, for one lattice size and epsilon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariancePoint {
    pub n: usize,
    pub epsilon: f64,
    pub window_sites: usize,
    pub max_variance: f64,
    /// Site where the maximum is attained.
    pub at_site: usize,
}

/// Max over window centres of the ensemble variance of the window average.
pub fn max_window_variance(stats: &EnsembleStats, epsilon: f64) -> Result<VariancePoint, DiagnosticsError> {
    let n = stats.layout().n_sites;
    let len = centred_window_len(n, epsilon);
    let h = (len.max(1) - 1) / 2;
    let variances = stats.window_variances(len)?;
    let (start, max_variance) = variances
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (s, v)| if v > best.1 { (s, v) } else { best });
    Ok(VariancePoint { n, epsilon, window_sites: len, max_variance, at_site: (start + h) % n })
}

/// Smallest `2 N eps` for which a window enters the variance check.
pub const MIN_WINDOW_SPAN: f64 = 8.0;

/// Variance decay per epsilon along the ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceCheck {
    pub points: Vec<VariancePoint>,
    /// `(epsilon, log-log slope of variance against window size)`.
    pub slopes: Vec<(f64, f64)>,
    /// Epsilons left out because `2 N eps < MIN_WINDOW_SPAN` somewhere on the ladder.
    pub excluded: Vec<f64>,
    pub decreasing: bool,
}

/// Verdict: at every fixed epsilon the variance falls as the window grows with `N`.
pub fn check_v(points: Vec<VariancePoint>) -> Result<VarianceCheck, DiagnosticsError> {
    let mut ladder: Vec<usize> = points.iter().map(|p| p.n).collect();
    ladder.sort_unstable();
    ladder.dedup();
    require(ladder.len(), 3)?;
    let mut eps: Vec<f64> = points.iter().map(|p| p.epsilon).collect();
    eps.sort_by(f64::total_cmp);
    eps.dedup();
    let (eps, excluded): (Vec<f64>, Vec<f64>) = eps.into_iter().partition(|&e| {
        points.iter().filter(|p| p.epsilon == e).all(|p| 2.0 * p.n as f64 * e >= MIN_WINDOW_SPAN)
    });
    require(eps.len(), 1)?;
    let mut slopes = Vec::new();
    let mut decreasing = true;
    for &e in &eps {
        let mut row: Vec<&VariancePoint> = points.iter().filter(|p| p.epsilon == e).collect();
        row.sort_by_key(|p| p.n);
        decreasing &= row.windows(2).all(|w| w[1].max_variance < w[0].max_variance);
        let xy: Vec<(f64, f64)> = row
            .iter()
            .filter(|p| p.max_variance > 0.0)
            .map(|p| ((p.window_sites as f64).ln(), p.max_variance.ln()))
            .collect();
        if xy.len() >= 2 {
            slopes.push((e, fit_line(&xy).1));
        }
    }
    Ok(VarianceCheck { points, slopes, excluded, decreasing })
}

/// Least-squares `(intercept, slope)`.
pub fn fit_line(xy: &[(f64, f64)]) -> (f64, f64) {
    let m = xy.len() as f64;
    let xbar = xy.iter().map(|p| p.0).sum::<f64>() / m;
    let ybar = xy.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = xy.iter().map(|p| (p.0 - xbar) * (p.1 - ybar)).sum();
    let sxx: f64 = xy.iter().map(|p| (p.0 - xbar).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (ybar - slope * xbar, slope)
}

/// Metrics for one candidate epsilon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonCandidate {
    pub epsilon: f64,
    pub roughness: f64,
    pub bias: f64,
    pub qualifies: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonChoice {
    pub epsilon: f64,
    pub threshold: f64,
    pub candidates: Vec<EpsilonCandidate>,
}

/// Roughness and bias of every grid epsilon against a common threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonTable {
    pub threshold: f64,
    /// Sorted by increasing epsilon.
    pub candidates: Vec<EpsilonCandidate>,
}

impl EpsilonTable {
    /// Smallest qualifying epsilon.
    pub fn selected(&self) -> Option<f64> {
        self.candidates.iter().find(|c| c.qualifies).map(|c| c.epsilon)
    }

    /// Epsilon minimising `max(roughness, bias)`; ties go to the smaller epsilon.
    pub fn closest(&self) -> f64 {
        let worst = |c: &EpsilonCandidate| c.roughness.max(c.bias);
        self.candidates
            .iter()
            .fold(None::<&EpsilonCandidate>, |best, c| match best {
                Some(b) if worst(b) <= worst(c) => Some(b),
                _ => Some(c),
            })
            .map_or(f64::NAN, |c| c.epsilon)
    }

    fn listing(&self) -> String {
        let mut table = format!("threshold={:e}\n", self.threshold);
        for c in &self.candidates {
            let _ = writeln!(table, "epsilon={} roughness={:e} bias={:e}", c.epsilon, c.roughness, c.bias);
        }
        table
    }
}

/// Detrending radius used by `select_epsilon`.
pub const SELECT_ROUGHNESS_RADIUS: usize = 10;

/// Roughness and halving bias of the windowed profile for every grid epsilon.
///
/// The threshold is `ROUGHNESS_FACTOR` times the median site standard error.
pub fn epsilon_table(
    site_means: &[f64],
    site_std_errors: &[f64],
    grid: &[f64],
) -> Result<EpsilonTable, DiagnosticsError> {
    same_len(site_means.len(), site_std_errors.len())?;
    require(grid.len(), 1)?;
    require(site_means.len(), 3)?;
    let threshold = ROUGHNESS_FACTOR * median(site_std_errors);
    let mut grid = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let mut candidates = Vec::with_capacity(grid.len());
    for &epsilon in &grid {
        if epsilon.is_nan() || epsilon <= 0.0 {
            return Err(DiagnosticsError::InvalidParameter(format!("epsilon {epsilon}")));
        }
        let profile = windowed_profile(site_means, epsilon)?;
        let half = windowed_profile(site_means, epsilon / 2.0)?;
        let roughness = profile_roughness(&profile, SELECT_ROUGHNESS_RADIUS);
        let bias = profile.iter().zip(&half).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let qualifies = roughness < threshold && bias < threshold;
        candidates.push(EpsilonCandidate { epsilon, roughness, bias, qualifies });
    }
    Ok(EpsilonTable { threshold, candidates })
}

/// Smallest epsilon whose windowed profile is smooth and stable under halving epsilon.
pub fn select_epsilon(
    site_means: &[f64],
    site_std_errors: &[f64],
    grid: &[f64],
) -> Result<EpsilonChoice, DiagnosticsError> {
    let table = epsilon_table(site_means, site_std_errors, grid)?;
    match table.selected() {
        Some(epsilon) => Ok(EpsilonChoice { epsilon, threshold: table.threshold, candidates: table.candidates }),
        None => Err(DiagnosticsError::NoEpsilonQualifies(table.listing())),
    }
}

/// Median of finite values; zero for an empty slice.
pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

/// Periodic linear interpolation of a site profile (site `i` at `x = i/N`) onto `points` nodes.
pub fn resample(profile: &[f64], points: usize) -> Vec<f64> {
    let n = profile.len();
    (0..points)
        .map(|k| {
            let pos = k as f64 / points as f64 * n as f64;
            let i = pos.floor() as usize % n;
            let frac = pos - pos.floor();
            profile[i] * (1.0 - frac) + profile[(i + 1) % n] * frac
        })
        .collect()
}

/// Sup-norm distances between profiles of successive lattice sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceCheck {
    /// `(smaller N, larger N, distance)`.
    pub distances: Vec<(usize, usize, f64)>,
    pub cauchy_decreasing: bool,
}

/// Resamples each profile to a common grid and checks that successive distances shrink;
/// distances at or below `floor` count as converged.
pub fn check_e(profiles: &[(usize, Vec<f64>)], floor: f64) -> Result<ConvergenceCheck, DiagnosticsError> {
    require(profiles.len(), 2)?;
    let mut sorted: Vec<&(usize, Vec<f64>)> = profiles.iter().collect();
    sorted.sort_by_key(|p| p.0);
    let grids: Vec<Vec<f64>> = sorted.iter().map(|p| resample(&p.1, RESAMPLE_POINTS)).collect();
    let distances: Vec<(usize, usize, f64)> = grids
        .windows(2)
        .zip(sorted.windows(2))
        .map(|(g, p)| {
            let d = g[0].iter().zip(&g[1]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            (p[0].0, p[1].0, d)
        })
        .collect();
    let cauchy_decreasing = distances.windows(2).all(|w| w[1].2 < w[0].2 || w[1].2 <= floor);
    Ok(ConvergenceCheck { distances, cauchy_decreasing })
}

/// Scale on which scatter points are compared with the reference curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveScale {
    Linear,
    /// Compare logarithms; suited to curves spanning orders of magnitude.
    Log,
}

/// RMS vertical distance of `(x, y)` points to `curve`, evaluated at each point's `x`.
pub fn ef_rms<E>(
    points: &[(f64, f64)],
    curve: impl Fn(f64) -> Result<f64, E>,
    scale: CurveScale,
) -> Result<f64, E>
where
    E: From<DiagnosticsError>,
{
    if points.is_empty() {
        return Err(DiagnosticsError::TooFewPoints { need: 1, got: 0 }.into());
    }
    let mut ss = 0.0;
    for &(x, y) in points {
        let c = curve(x)?;
        let d = match scale {
            CurveScale::Linear => y - c,
            CurveScale::Log => {
                if y <= 0.0 || c <= 0.0 {
                    return Err(DiagnosticsError::InvalidParameter(format!(
                        "non-positive value on a log scale at x={x}"
                    ))
                    .into());
                }
                y.ln() - c.ln()
            }
        };
        ss += d * d;
    }
    Ok((ss / points.len() as f64).sqrt())
}

/// Verdict: RMS distance decreases along the ladder.
pub fn check_ef(rms_per_n: Vec<(usize, f64)>) -> LadderTrend {
    LadderTrend::new(rms_per_n, 0.0)
}

/// Residual spread within one bin of site means.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinSpread {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    /// RMS residual of `E f` about a linear fit in `E w` within the bin.
    pub spread: f64,
    /// RMS standard error of `E f` in the bin.
    pub noise: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dispersion {
    pub bins: Vec<BinSpread>,
    /// Pooled residual spread over pooled noise; near 1 for a function of the mean.
    pub ratio: f64,
}

/// Whether `E f(w_i)` is a function of `E w_i`: bins the pairs by `E w_i`, fits a line
/// in each bin and compares the residual spread with the standard errors.
pub fn check_efprime_negative(
    pairs: &[(f64, f64, f64)],
    n_bins: usize,
) -> Result<Dispersion, DiagnosticsError> {
    require(pairs.len(), 1)?;
    require(n_bins, 1)?;
    let lo = pairs.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = pairs.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / n_bins as f64 } else { 1.0 };
    let mut members: Vec<Vec<(f64, f64, f64)>> = vec![Vec::new(); n_bins];
    for &p in pairs {
        let b = (((p.0 - lo) / width) as usize).min(n_bins - 1);
        members[b].push(p);
    }
    let mut bins = Vec::new();
    let (mut resid_ss, mut noise_ss, mut dof) = (0.0, 0.0, 0.0);
    for (b, m) in members.iter().enumerate() {
        if m.is_empty() {
            continue;
        }
        let count = m.len();
        let noise = (m.iter().map(|p| p.2 * p.2).sum::<f64>() / count as f64).sqrt();
        let spread = if count <= 2 {
            0.0
        } else {
            let xy: Vec<(f64, f64)> = m.iter().map(|p| (p.0, p.1)).collect();
            let (a, s) = fit_line(&xy);
            let ss: f64 = xy.iter().map(|(x, y)| (y - a - s * x).powi(2)).sum();
            let d = (count - 2) as f64;
            resid_ss += ss;
            noise_ss += noise * noise * d;
            dof += d;
            (ss / d).sqrt()
        };
        bins.push(BinSpread {
            lo: lo + b as f64 * width,
            hi: lo + (b + 1) as f64 * width,
            count,
            spread,
            noise,
        });
    }
    let ratio = if dof == 0.0 {
        0.0
    } else if noise_ss > 0.0 {
        (resid_ss / noise_ss).sqrt()
    } else if resid_ss > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    Ok(Dispersion { bins, ratio })
}

/// Per-site estimates of the local slope-parameter gap.
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaEstimate {
    /// From the inverse mean map applied to zero-mean cumulative sums.
    pub from_cumulative: Vec<f64>,
    /// From the rate expectation; `NaN` at flagged sites.
    pub from_rate: Vec<f64>,
    /// Location path whose successive differences are `from_cumulative`.
    pub lambda: Vec<f64>,
    /// `N |d_{i+1} - d_i|` for each estimator.
    pub roughness_cumulative: Vec<f64>,
    pub roughness_rate: Vec<f64>,
    /// Sites whose rate estimate was not positive.
    pub flagged: Vec<usize>,
}

impl OmegaEstimate {
    /// Largest `|from_cumulative - from_rate|` over unflagged sites in `sites`.
    pub fn sup_distance(&self, sites: impl IntoIterator<Item = usize>) -> f64 {
        sites
            .into_iter()
            .filter(|&i| self.from_rate[i].is_finite())
            .map(|i| (self.from_cumulative[i] - self.from_rate[i]).abs())
            .fold(0.0, f64::max)
    }
}

/// Successive differences `l_i - l_{i-1}` around the ring.
pub fn omega_from_lambda_path(lambda: &[f64]) -> Vec<f64> {
    let n = lambda.len();
    (0..n).map(|i| lambda[i] - lambda[(i + n - 1) % n]).collect()
}

fn scaled_jumps(d: &[f64]) -> Vec<f64> {
    let n = d.len();
    (0..n).map(|i| n as f64 * (d[(i + 1) % n] - d[i]).abs()).collect()
}

/// Estimates the gap per site from time-averaged curvature means and rate means.
pub fn estimate_omega(
    mean_values: &[f64],
    mean_rates: &[f64],
    k: f64,
) -> Result<OmegaEstimate, DiagnosticsError> {
    same_len(mean_values.len(), mean_rates.len())?;
    require(mean_values.len(), 2)?;
    let theta = ThetaNormalizer::new(k)?;
    let mut running = 0.0;
    let cumulative: Vec<f64> = mean_values
        .iter()
        .map(|w| {
            running += w;
            running
        })
        .collect();
    let offset = cumulative.iter().sum::<f64>() / cumulative.len() as f64;
    let lambda = cumulative
        .iter()
        .map(|c| lambda_d_with(&theta, c - offset))
        .collect::<Result<Vec<_>, _>>()?;
    let from_cumulative = omega_from_lambda_path(&lambda);
    let mut flagged = Vec::new();
    let from_rate: Vec<f64> = mean_rates
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            if r > 0.0 && r.is_finite() {
                -r.ln() / (2.0 * k)
            } else {
                log::warn!("rate estimate {r} at site {i} is not positive; site excluded");
                flagged.push(i);
                f64::NAN
            }
        })
        .collect();
    Ok(OmegaEstimate {
        roughness_cumulative: scaled_jumps(&from_cumulative),
        roughness_rate: scaled_jumps(&from_rate),
        from_cumulative,
        from_rate,
        lambda,
        flagged,
    })
}

/// Relative entropy of per-site samples against the fitted family.
#[derive(Debug, Clone, PartialEq)]
pub struct KlProfile {
    pub kl: Vec<f64>,
    /// Plug-in bias `(support - 1) / (2 n)` of each estimate.
    pub bias: Vec<f64>,
    pub samples: Vec<u64>,
    pub max: f64,
}

impl KlProfile {
    /// `sum KL / sum bias`.
    pub fn aggregate_ratio(&self) -> f64 {
        self.kl.iter().sum::<f64>() / self.bias.iter().sum::<f64>()
    }
}

/// KL of each site's empirical pmf against the family member with gap `omega[i]` and
/// location `lambda[i]`.
pub fn check_local_gibbs_kl(
    pmfs: &[EmpiricalPmf],
    omega: &[f64],
    lambda: &[f64],
    k: f64,
) -> Result<KlProfile, DiagnosticsError> {
    same_len(pmfs.len(), omega.len())?;
    same_len(pmfs.len(), lambda.len())?;
    require(pmfs.len(), 1)?;
    let mut kl = Vec::with_capacity(pmfs.len());
    for ((p, &w), &l) in pmfs.iter().zip(omega).zip(lambda) {
        let family = CurvatureFamily::new(k, w, l)?;
        kl.push(kl_divergence(p, |n| family.pmf(n).p)?.value);
    }
    let max = kl.iter().copied().fold(0.0, f64::max);
    Ok(KlProfile {
        bias: pmfs.iter().map(EmpiricalPmf::plugin_bias).collect(),
        samples: pmfs.iter().map(EmpiricalPmf::total).collect(),
        kl,
        max,
    })
}

/// Exact star discrepancy `max_i max(i/n - x_(i), x_(i) - (i-1)/n)` of points in `[0, 1)`.
pub fn star_discrepancy(points: &[f64]) -> f64 {
    let mut x: Vec<f64> = points.iter().map(|p| p.rem_euclid(1.0)).collect();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(i, &xi)| ((i + 1) as f64 / n - xi).max(xi - i as f64 / n))
        .fold(0.0, f64::max)
}

/// `|(1/n) sum exp(2 pi i h x_j)|`.
pub fn fourier_coefficient(points: &[f64], h: usize) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    for &x in points {
        let phase = 2.0 * PI * (h as f64 * x).rem_euclid(1.0);
        let (s, c) = phase.sin_cos();
        re += c;
        im += s;
    }
    re.hypot(im) / points.len() as f64
}

/// Fourier bounds on the discrepancy at one cutoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierBound {
    pub cutoff: usize,
    /// `1/m + sum_{h <= m} |P(h)| / h`, without the constant.
    pub shape: f64,
    /// `ET_CONSTANT * shape`.
    pub bound: f64,
    /// `6/(m+1) + (4/pi) sum_{h <= m} (1/h - 1/(m+1)) |P(h)|`.
    pub explicit_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equidistribution {
    pub star_discrepancy: f64,
    pub bounds: Vec<FourierBound>,
    pub within_bounds: bool,
}

/// Star discrepancy of `points mod 1` and its Fourier bounds at `ET_CUTOFFS`.
pub fn lambda_equidistribution(points: &[f64]) -> Result<Equidistribution, DiagnosticsError> {
    require(points.len(), 8)?;
    let x: Vec<f64> = points.iter().map(|p| p.rem_euclid(1.0)).collect();
    let d = star_discrepancy(&x);
    let max_cut = *ET_CUTOFFS.iter().max().expect("cutoffs are non-empty");
    let coeffs: Vec<f64> = (1..=max_cut).map(|h| fourier_coefficient(&x, h)).collect();
    let bounds: Vec<FourierBound> = ET_CUTOFFS
        .iter()
        .map(|&m| {
            let mf = m as f64;
            let tail: f64 = coeffs[..m].iter().enumerate().map(|(h, c)| c / (h + 1) as f64).sum();
            let weighted: f64 = coeffs[..m]
                .iter()
                .enumerate()
                .map(|(h, c)| (1.0 / (h + 1) as f64 - 1.0 / (mf + 1.0)) * c)
                .sum();
            let shape = 1.0 / mf + tail;
            FourierBound {
                cutoff: m,
                shape,
                bound: ET_CONSTANT * shape,
                explicit_bound: 6.0 / (mf + 1.0) + 4.0 / PI * weighted,
            }
        })
        .collect();
    let within_bounds = bounds.iter().all(|b| d <= b.bound && d <= b.explicit_bound);
    Ok(Equidistribution { star_discrepancy: d, bounds, within_bounds })
}

/// Outcome of comparing profile smoothness near integer and generic gaps.
#[derive(Debug, Clone, PartialEq)]
pub enum SmoothingVerdict {
    Skipped(String),
    Checked {
        integer_centre: usize,
        integer_metric: f64,
        generic_centre: usize,
        generic_metric: f64,
        smoother_at_integer: bool,
    },
}

fn distance_to_integer(x: f64) -> f64 {
    (x - x.round()).abs()
}

fn distance_to_half_lattice(x: f64) -> f64 {
    let y = 2.0 * x;
    (y - y.round()).abs() / 2.0
}

/// Compares `max |E w_j - E w_{j-1}|` in the window of radius `r` where the gap is closest
/// to an integer against the window where it is furthest from `{0, 1/2} mod 1`.
/// `integer_tolerance` bounds the gap's distance to an integer across the window.
pub fn check_mesoscopic_smoothing_at_integers(
    mean_values: &[f64],
    omega: &[f64],
    r: usize,
    integer_tolerance: f64,
) -> Result<SmoothingVerdict, DiagnosticsError> {
    same_len(mean_values.len(), omega.len())?;
    let n = mean_values.len();
    require(n, 2 * r + 2)?;
    let window = |c: usize| (0..=2 * r).map(move |o| (c + n + o - r) % n);
    let metric = |c: usize| {
        window(c)
            .map(|j| (mean_values[j] - mean_values[(j + n - 1) % n]).abs())
            .fold(0.0, f64::max)
    };
    let worst = |c: usize, dist: &dyn Fn(f64) -> f64| window(c).map(|j| dist(omega[j])).fold(0.0, f64::max);
    let best_integer = (0..n)
        .filter(|&c| window(c).all(|j| omega[j].is_finite()))
        .map(|c| (c, worst(c, &distance_to_integer)))
        .filter(|&(_, d)| d <= integer_tolerance)
        .min_by(|a, b| a.1.total_cmp(&b.1));
    let Some((integer_centre, _)) = best_integer else {
        return Ok(SmoothingVerdict::Skipped(format!(
            "no window of radius {r} has gap within {integer_tolerance} of an integer"
        )));
    };
    let generic = (0..n)
        .filter(|&c| window(c).all(|j| omega[j].is_finite()))
        .map(|c| (c, window(c).map(|j| distance_to_half_lattice(omega[j])).fold(f64::INFINITY, f64::min)))
        .max_by(|a, b| a.1.total_cmp(&b.1));
    let Some((generic_centre, _)) = generic else {
        return Ok(SmoothingVerdict::Skipped("no finite generic window".into()));
    };
    let integer_metric = metric(integer_centre);
    let generic_metric = metric(generic_centre);
    Ok(SmoothingVerdict::Checked {
        integer_centre,
        integer_metric,
        generic_centre,
        generic_metric,
        smoother_at_integer: integer_metric < generic_metric,
    })
}

/// `sup_l |u_D(l) - l|` sampled on a fine grid of one period.
pub fn oscillation_sup(k: f64) -> Result<f64, DiagnosticsError> {
    let mut sup: f64 = 0.0;
    for j in 0..2048 {
        sup = sup.max(u_o(k, j as f64 / 2048.0)?.abs());
    }
    Ok(sup)
}

/// Bound on `|omega_i - window average of E w|` for a window of `2 N eps + 1` sites when
/// `N |omega_{i+1} - omega_i| <= c`.
pub fn window_mean_bound(k: f64, n: usize, epsilon: f64, c: f64) -> Result<f64, DiagnosticsError> {
    let nf = n as f64;
    Ok(2.0 * oscillation_sup(k)? / (2.0 * nf * epsilon + 1.0) + (2.0 * epsilon + 1.0 / nf) * c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roughness_examples() {
        let n = 20;
        let linear: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        assert!((roughness_metric(&linear, 0.5, 3) - 1.0 / n as f64).abs() < 1e-15);
        assert!(detrended_roughness(&linear, 0.5, 3) < 1e-15);
        assert_eq!(roughness_metric(&[2.0; 10], 0.3, 2), 0.0);
        let alt: Vec<f64> = (0..10).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert_eq!(roughness_metric(&alt, 0.5, 2), 2.0);
    }

    #[test]
    fn windowed_profile_of_constant() {
        let p = windowed_profile(&[3.0; 16], 0.2).unwrap();
        assert!(p.iter().all(|&v| (v - 3.0).abs() < 1e-15));
    }

    #[test]
    fn star_discrepancy_examples() {
        assert_eq!(star_discrepancy(&[0.5]), 0.5);
        for n in [1usize, 7, 64, 1000] {
            let grid: Vec<f64> = (1..=n).map(|i| (i as f64 - 0.5) / n as f64).collect();
            assert!((star_discrepancy(&grid) - 0.5 / n as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn omega_ignores_global_shift() {
        let l: Vec<f64> = (0..8).map(|i| (i as f64 * 0.7).sin()).collect();
        let shifted: Vec<f64> = l.iter().map(|v| v + 3.25).collect();
        let a = omega_from_lambda_path(&l);
        let b = omega_from_lambda_path(&shifted);
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-12));
    }

    #[test]
    fn equilibrium_rate_gives_zero_gap() {
        let est = estimate_omega(&[0.0; 8], &[1.0; 8], 3.0).unwrap();
        assert!(est.from_rate.iter().all(|&w| w == 0.0));
        assert!(est.from_cumulative.iter().all(|&w| w.abs() < 1e-10));
    }

    #[test]
    fn nonpositive_rate_is_flagged() {
        let mut rates = vec![1.0; 8];
        rates[3] = 0.0;
        let est = estimate_omega(&[0.0; 8], &rates, 3.0).unwrap();
        assert_eq!(est.flagged, vec![3]);
        assert!(est.from_rate[3].is_nan());
    }

    #[test]
    fn single_point_bin_has_zero_spread() {
        let d = check_efprime_negative(&[(0.0, 1.0, 0.1)], 4).unwrap();
        assert_eq!(d.bins.len(), 1);
        assert_eq!(d.bins[0].spread, 0.0);
    }

    #[test]
    fn identical_profiles_have_zero_distance() {
        let p: Vec<f64> = (0..64).map(|i| (i as f64 / 64.0 * 2.0 * PI).sin()).collect();
        let c = check_e(&[(64, p.clone()), (64 * 2, resample(&p, 128))], 0.0).unwrap();
        assert!(c.distances[0].2 < 1e-12);
    }
}
