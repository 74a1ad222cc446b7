//! Ensemble and time-averaged statistics over replicas, window averages,
//! correlations, empirical pmfs and relative entropy.
//!
//! Replicas are grouped into fixed blocks by id. Each block is filled in id order
//! and blocks are combined in block order when statistics are finalised, so the
//! result does not depend on which worker produced which block or on merge order.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use thiserror::Error;

use crate::observable::Observable;

/// Lags used for nearby-site correlations.
pub const LAGS: RangeInclusive<usize> = 2..=9;
const N_LAGS: usize = 8;
/// Replicas per block.
pub const DEFAULT_BLOCK_SIZE: u64 = 64;
/// Samples per site kept for empirical pmfs.
pub const DEFAULT_PMF_SAMPLES: u64 = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("need at least {need} replicas, have {have}")]
    InsufficientData { need: u64, have: u64 },
    #[error("site {site} out of range for {n} sites")]
    SiteOutOfRange { site: usize, n: usize },
    #[error("observable index {0} out of range")]
    ObservableOutOfRange(usize),
    #[error("window of {0} sites was not registered with the accumulator")]
    WindowNotRegistered(usize),
    #[error("window around x={x} with epsilon={epsilon} contains no site")]
    EmptyWindow { x: f64, epsilon: f64 },
    #[error("block {0} is present in both accumulators")]
    BlockOverlap(u64),
    #[error("replica {id} recorded after replica {last} in the same block")]
    OutOfOrder { id: u64, last: u64 },
    #[error("accumulators have different layouts")]
    LayoutMismatch,
    #[error("expected {expected} values, got {got}")]
    WrongLength { expected: usize, got: usize },
    #[error("empirical pmf has no samples")]
    ZeroSamples,
}

/// What an ensemble accumulator records for every replica.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsLayout {
    pub n_sites: usize,
    pub observables: Vec<Observable>,
    /// Lengths (in sites) of the sliding windows whose sums are tracked.
    pub window_lengths: Vec<usize>,
    /// Replicas with id below this contribute to per-site empirical pmfs.
    pub pmf_samples: u64,
    pub block_size: u64,
}

impl StatsLayout {
    pub fn new(n_sites: usize, observables: Vec<Observable>) -> Self {
        Self {
            n_sites,
            observables,
            window_lengths: Vec::new(),
            pmf_samples: 0,
            block_size: DEFAULT_BLOCK_SIZE,
        }
    }

    pub fn with_windows(mut self, mut lengths: Vec<usize>) -> Self {
        lengths.retain(|&l| l >= 1);
        lengths.sort_unstable();
        lengths.dedup();
        self.window_lengths = lengths;
        self
    }

    pub fn with_pmf_samples(mut self, samples: u64) -> Self {
        self.pmf_samples = samples;
        self
    }

    pub fn with_block_size(mut self, block: u64) -> Self {
        self.block_size = block.max(1);
        self
    }

    fn window_slot(&self, len: usize) -> Result<usize, EstimatorError> {
        self.window_lengths
            .iter()
            .position(|&l| l == len)
            .ok_or(EstimatorError::WindowNotRegistered(len))
    }
}

/// Sites `i` with `|i - N x| < N epsilon`, as `(first, count)` on the ring.
pub fn window_sites(n: usize, x: f64, epsilon: f64) -> Result<(usize, usize), EstimatorError> {
    let center = n as f64 * x;
    let half = n as f64 * epsilon;
    let lo = (center - half).floor() as i64 + 1;
    let hi = (center + half).ceil() as i64 - 1;
    if hi < lo {
        return Err(EstimatorError::EmptyWindow { x, epsilon });
    }
    let count = ((hi - lo + 1) as usize).min(n);
    Ok((lo.rem_euclid(n as i64) as usize, count))
}

/// Number of sites in a window centred on a site, `2 ceil(N eps) - 1`.
pub fn centred_window_len(n: usize, epsilon: f64) -> usize {
    window_sites(n, 0.0, epsilon).map(|(_, c)| c).unwrap_or(0)
}

/// Sample mean and standard error from running sums.
fn mean_se(sum: f64, sum_sq: f64, n: u64) -> (f64, f64) {
    let nf = n as f64;
    let mean = sum / nf;
    let var = ((sum_sq - sum * mean) / (nf - 1.0)).max(0.0);
    (mean, (var / nf).sqrt())
}

fn sample_variance(sum: f64, sum_sq: f64, n: u64) -> f64 {
    let nf = n as f64;
    ((sum_sq - sum * sum / nf) / (nf - 1.0)).max(0.0)
}

/// Sample mean and standard error of a slice.
pub fn mean_and_std_error(values: &[f64]) -> Result<(f64, f64), EstimatorError> {
    let n = values.len() as u64;
    if n < 2 {
        return Err(EstimatorError::InsufficientData { need: 2, have: n });
    }
    let sum: f64 = values.iter().sum();
    let mean = sum / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    Ok((mean, (ss / (n as f64 - 1.0) / n as f64).sqrt()))
}

#[derive(Debug, Clone)]
struct InstantBlock {
    count: u64,
    last_id: Option<u64>,
    /// `[obs][site]` sums then `[obs][site]` sums of squares.
    moments: Vec<f64>,
    /// `[lag][site]` sums of `x_i x_{i+lag}`.
    pairs: Vec<f64>,
    /// `[window][start]` sums then sums of squares of window totals.
    windows: Vec<f64>,
    hist: Vec<BTreeMap<i64, u64>>,
}

impl InstantBlock {
    fn new(layout: &StatsLayout) -> Self {
        let n = layout.n_sites;
        Self {
            count: 0,
            last_id: None,
            moments: vec![0.0; 2 * layout.observables.len() * n],
            pairs: vec![0.0; N_LAGS * n],
            windows: vec![0.0; 2 * layout.window_lengths.len() * n],
            hist: Vec::new(),
        }
    }
}

fn check_order(last: Option<u64>, id: u64) -> Result<(), EstimatorError> {
    match last {
        Some(l) if l >= id => Err(EstimatorError::OutOfOrder { id, last: l }),
        _ => Ok(()),
    }
}

/// Per-site moments, lagged pair products, window sums and pmfs of instantaneous values.
#[derive(Debug, Clone)]
pub struct EnsembleAccumulator {
    layout: StatsLayout,
    blocks: BTreeMap<u64, InstantBlock>,
    scratch: Vec<i64>,
}

impl EnsembleAccumulator {
    pub fn new(layout: StatsLayout) -> Self {
        Self { layout, blocks: BTreeMap::new(), scratch: Vec::new() }
    }

    pub fn layout(&self) -> &StatsLayout {
        &self.layout
    }

    pub fn count(&self) -> u64 {
        self.blocks.values().map(|b| b.count).sum()
    }

    /// Adds one replica's site values; ids within a block must increase.
    pub fn record(&mut self, replica_id: u64, values: &[i64]) -> Result<(), EstimatorError> {
        let n = self.layout.n_sites;
        if values.len() != n {
            return Err(EstimatorError::WrongLength { expected: n, got: values.len() });
        }
        let block_id = replica_id / self.layout.block_size;
        let layout = &self.layout;
        let block = self.blocks.entry(block_id).or_insert_with(|| InstantBlock::new(layout));
        check_order(block.last_id, replica_id)?;
        block.last_id = Some(replica_id);
        block.count += 1;

        let n_obs = layout.observables.len();
        for (o, obs) in layout.observables.iter().enumerate() {
            let (sums, squares) = block.moments.split_at_mut(n_obs * n);
            for (i, &v) in values.iter().enumerate() {
                let f = obs.eval(v);
                sums[o * n + i] += f;
                squares[o * n + i] += f * f;
            }
        }
        for (l, lag) in LAGS.enumerate() {
            let row = &mut block.pairs[l * n..(l + 1) * n];
            for i in 0..n {
                row[i] += (values[i] * values[(i + lag) % n]) as f64;
            }
        }
        if !layout.window_lengths.is_empty() {
            let prefix = &mut self.scratch;
            prefix.clear();
            prefix.push(0);
            for k in 0..2 * n {
                let last = *prefix.last().expect("prefix is non-empty");
                prefix.push(last + values[k % n]);
            }
            let nw = layout.window_lengths.len();
            let (sums, squares) = block.windows.split_at_mut(nw * n);
            for (wi, &len) in layout.window_lengths.iter().enumerate() {
                let len = len.min(n);
                for s in 0..n {
                    let total = (prefix[s + len] - prefix[s]) as f64;
                    sums[wi * n + s] += total;
                    squares[wi * n + s] += total * total;
                }
            }
        }
        if replica_id < layout.pmf_samples {
            if block.hist.is_empty() {
                block.hist = vec![BTreeMap::new(); n];
            }
            for (i, &v) in values.iter().enumerate() {
                *block.hist[i].entry(v).or_insert(0) += 1;
            }
        }
        Ok(())
    }

    /// Combines two accumulators over disjoint replica blocks.
    pub fn merge(mut self, other: Self) -> Result<Self, EstimatorError> {
        if self.layout != other.layout {
            return Err(EstimatorError::LayoutMismatch);
        }
        for (id, block) in other.blocks {
            if self.blocks.contains_key(&id) {
                return Err(EstimatorError::BlockOverlap(id));
            }
            self.blocks.insert(id, block);
        }
        Ok(self)
    }

    /// Reduces the blocks in id order.
    pub fn finalize(&self) -> EnsembleStats {
        let n = self.layout.n_sites;
        let mut count = 0;
        let mut moments = vec![0.0; 2 * self.layout.observables.len() * n];
        let mut pairs = vec![0.0; N_LAGS * n];
        let mut windows = vec![0.0; 2 * self.layout.window_lengths.len() * n];
        let mut hist: Vec<BTreeMap<i64, u64>> = vec![BTreeMap::new(); n];
        for block in self.blocks.values() {
            count += block.count;
            add_into(&mut moments, &block.moments);
            add_into(&mut pairs, &block.pairs);
            add_into(&mut windows, &block.windows);
            for (h, bh) in hist.iter_mut().zip(&block.hist) {
                for (&v, &c) in bh {
                    *h.entry(v).or_insert(0) += c;
                }
            }
        }
        EnsembleStats { layout: self.layout.clone(), count, moments, pairs, windows, hist }
    }
}

fn add_into(acc: &mut [f64], x: &[f64]) {
    for (a, b) in acc.iter_mut().zip(x) {
        *a += b;
    }
}

/// Mean and variance of a window average across replicas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowStats {
    pub mean: f64,
    pub variance: f64,
    pub sites: usize,
}

/// Correlations of one site with its neighbours at each lag.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationProfile {
    /// `None` where a variance vanishes.
    pub per_lag: Vec<Option<f64>>,
    pub max_abs: Option<f64>,
}

/// Finalised ensemble statistics.
#[derive(Debug, Clone)]
pub struct EnsembleStats {
    layout: StatsLayout,
    count: u64,
    moments: Vec<f64>,
    pairs: Vec<f64>,
    windows: Vec<f64>,
    hist: Vec<BTreeMap<i64, u64>>,
}

impl EnsembleStats {
    pub fn layout(&self) -> &StatsLayout {
        &self.layout
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    fn check(&self, site: usize, obs: usize) -> Result<(), EstimatorError> {
        if self.count < 2 {
            return Err(EstimatorError::InsufficientData { need: 2, have: self.count });
        }
        if site >= self.layout.n_sites {
            return Err(EstimatorError::SiteOutOfRange { site, n: self.layout.n_sites });
        }
        if obs >= self.layout.observables.len() {
            return Err(EstimatorError::ObservableOutOfRange(obs));
        }
        Ok(())
    }

    /// Sample mean and standard error of observable `obs` at `site`.
    pub fn ensemble_expectation(&self, site: usize, obs: usize) -> Result<(f64, f64), EstimatorError> {
        self.check(site, obs)?;
        let n = self.layout.n_sites;
        let off = self.layout.observables.len() * n;
        let idx = obs * n + site;
        Ok(mean_se(self.moments[idx], self.moments[off + idx], self.count))
    }

    /// Sample mean of observable `obs` at `site`; needs one replica.
    pub fn sample_mean(&self, site: usize, obs: usize) -> Result<f64, EstimatorError> {
        if self.count < 1 {
            return Err(EstimatorError::InsufficientData { need: 1, have: 0 });
        }
        if site >= self.layout.n_sites {
            return Err(EstimatorError::SiteOutOfRange { site, n: self.layout.n_sites });
        }
        if obs >= self.layout.observables.len() {
            return Err(EstimatorError::ObservableOutOfRange(obs));
        }
        Ok(self.moments[obs * self.layout.n_sites + site] / self.count as f64)
    }

    /// Means and standard errors of one observable at every site.
    pub fn profile(&self, obs: usize) -> Result<(Vec<f64>, Vec<f64>), EstimatorError> {
        (0..self.layout.n_sites)
            .map(|s| self.ensemble_expectation(s, obs))
            .collect::<Result<Vec<_>, _>>()
            .map(|v| v.into_iter().unzip())
    }

    /// Mean and variance of the window average over `|i - N x| < N epsilon`.
    pub fn window_stats(&self, x: f64, epsilon: f64) -> Result<WindowStats, EstimatorError> {
        let (start, len) = window_sites(self.layout.n_sites, x, epsilon)?;
        self.window_stats_at(start, len)
    }

    /// Window statistics for `len` sites starting at `start`.
    pub fn window_stats_at(&self, start: usize, len: usize) -> Result<WindowStats, EstimatorError> {
        if self.count < 2 {
            return Err(EstimatorError::InsufficientData { need: 2, have: self.count });
        }
        let n = self.layout.n_sites;
        let slot = self.layout.window_slot(len)?;
        let off = self.layout.window_lengths.len() * n;
        let sum = self.windows[slot * n + start];
        let sq = self.windows[off + slot * n + start];
        let l = len as f64;
        Ok(WindowStats {
            mean: sum / self.count as f64 / l,
            variance: sample_variance(sum, sq, self.count) / (l * l),
            sites: len,
        })
    }

    /// Variance of the window average for every start position.
    pub fn window_variances(&self, len: usize) -> Result<Vec<f64>, EstimatorError> {
        (0..self.layout.n_sites)
            .map(|s| self.window_stats_at(s, len).map(|w| w.variance))
            .collect()
    }

    /// Pearson correlations of the site value at `site` with `site + lag`, lags 2 to 9.
    pub fn correlation_profile(&self, site: usize) -> Result<CorrelationProfile, EstimatorError> {
        let value = self
            .layout
            .observables
            .iter()
            .position(|o| *o == Observable::Value)
            .ok_or(EstimatorError::ObservableOutOfRange(0))?;
        let square = self
            .layout
            .observables
            .iter()
            .position(|o| *o == Observable::Square)
            .ok_or(EstimatorError::ObservableOutOfRange(1))?;
        self.check(site, value)?;
        let n = self.layout.n_sites;
        let nf = self.count as f64;
        let stats = |s: usize| {
            let m = self.moments[value * n + s] / nf;
            let q = self.moments[square * n + s] / nf;
            (m, (q - m * m).max(0.0))
        };
        let (mi, vi) = stats(site);
        let mut per_lag = Vec::with_capacity(N_LAGS);
        for (l, lag) in LAGS.enumerate() {
            let j = (site + lag) % n;
            let (mj, vj) = stats(j);
            if vi <= 0.0 || vj <= 0.0 {
                log::warn!("zero variance at site {site} or {j}; correlation undefined");
                per_lag.push(None);
                continue;
            }
            let cov = self.pairs[l * n + site] / nf - mi * mj;
            per_lag.push(Some((cov / (vi * vj).sqrt()).clamp(-1.0, 1.0)));
        }
        let max_abs = per_lag.iter().flatten().map(|c| c.abs()).fold(None, |m: Option<f64>, c| {
            Some(m.map_or(c, |m| m.max(c)))
        });
        Ok(CorrelationProfile { per_lag, max_abs })
    }

    /// Empirical pmf of the site value from the first `pmf_samples` replicas.
    pub fn pmf(&self, site: usize) -> Result<EmpiricalPmf, EstimatorError> {
        if site >= self.layout.n_sites {
            return Err(EstimatorError::SiteOutOfRange { site, n: self.layout.n_sites });
        }
        Ok(EmpiricalPmf::from_counts(self.hist[site].clone()))
    }
}

#[derive(Debug, Clone)]
struct TimeBlock {
    count: u64,
    last_id: Option<u64>,
    moments: Vec<f64>,
}

/// Per-site time averages of observables over a window, collected across replicas.
#[derive(Debug, Clone)]
pub struct TimeAverageAccumulator {
    n_sites: usize,
    observables: Vec<Observable>,
    window: (f64, f64),
    block_size: u64,
    blocks: BTreeMap<u64, TimeBlock>,
}

impl TimeAverageAccumulator {
    /// `window` is the microscopic interval being averaged over.
    pub fn new(n_sites: usize, observables: Vec<Observable>, window: (f64, f64)) -> Self {
        Self { n_sites, observables, window, block_size: DEFAULT_BLOCK_SIZE, blocks: BTreeMap::new() }
    }

    pub fn with_block_size(mut self, block: u64) -> Self {
        self.block_size = block.max(1);
        self
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    pub fn count(&self) -> u64 {
        self.blocks.values().map(|b| b.count).sum()
    }

    /// Adds one replica's averages laid out as `[observable][site]`.
    pub fn record(&mut self, replica_id: u64, averages: &[f64]) -> Result<(), EstimatorError> {
        let len = self.observables.len() * self.n_sites;
        if averages.len() != len {
            return Err(EstimatorError::WrongLength { expected: len, got: averages.len() });
        }
        let block = self
            .blocks
            .entry(replica_id / self.block_size)
            .or_insert_with(|| TimeBlock { count: 0, last_id: None, moments: vec![0.0; 2 * len] });
        check_order(block.last_id, replica_id)?;
        block.last_id = Some(replica_id);
        block.count += 1;
        let (sums, squares) = block.moments.split_at_mut(len);
        for (k, &a) in averages.iter().enumerate() {
            sums[k] += a;
            squares[k] += a * a;
        }
        Ok(())
    }

    pub fn merge(mut self, other: Self) -> Result<Self, EstimatorError> {
        if self.n_sites != other.n_sites
            || self.observables != other.observables
            || self.window != other.window
            || self.block_size != other.block_size
        {
            return Err(EstimatorError::LayoutMismatch);
        }
        for (id, block) in other.blocks {
            if self.blocks.contains_key(&id) {
                return Err(EstimatorError::BlockOverlap(id));
            }
            self.blocks.insert(id, block);
        }
        Ok(self)
    }

    pub fn finalize(&self) -> TimeAverageStats {
        let len = self.observables.len() * self.n_sites;
        let mut moments = vec![0.0; 2 * len];
        let mut count = 0;
        for block in self.blocks.values() {
            count += block.count;
            add_into(&mut moments, &block.moments);
        }
        TimeAverageStats {
            n_sites: self.n_sites,
            observables: self.observables.clone(),
            window: self.window,
            count,
            moments,
        }
    }
}

/// Finalised time-averaged statistics.
#[derive(Debug, Clone)]
pub struct TimeAverageStats {
    n_sites: usize,
    observables: Vec<Observable>,
    window: (f64, f64),
    count: u64,
    moments: Vec<f64>,
}

impl TimeAverageStats {
    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    pub fn observables(&self) -> &[Observable] {
        &self.observables
    }

    /// Replica mean of the time average of `obs` at `site`, with its standard error.
    pub fn time_averaged_expectation(&self, site: usize, obs: usize) -> Result<(f64, f64), EstimatorError> {
        if self.count < 2 {
            return Err(EstimatorError::InsufficientData { need: 2, have: self.count });
        }
        if site >= self.n_sites {
            return Err(EstimatorError::SiteOutOfRange { site, n: self.n_sites });
        }
        if obs >= self.observables.len() {
            return Err(EstimatorError::ObservableOutOfRange(obs));
        }
        let len = self.observables.len() * self.n_sites;
        let idx = obs * self.n_sites + site;
        Ok(mean_se(self.moments[idx], self.moments[len + idx], self.count))
    }

    /// Replica mean of the time average; needs one replica.
    pub fn sample_mean(&self, site: usize, obs: usize) -> Result<f64, EstimatorError> {
        if self.count < 1 {
            return Err(EstimatorError::InsufficientData { need: 1, have: 0 });
        }
        if site >= self.n_sites {
            return Err(EstimatorError::SiteOutOfRange { site, n: self.n_sites });
        }
        if obs >= self.observables.len() {
            return Err(EstimatorError::ObservableOutOfRange(obs));
        }
        Ok(self.moments[obs * self.n_sites + site] / self.count as f64)
    }

    pub fn profile(&self, obs: usize) -> Result<(Vec<f64>, Vec<f64>), EstimatorError> {
        (0..self.n_sites)
            .map(|s| self.time_averaged_expectation(s, obs))
            .collect::<Result<Vec<_>, _>>()
            .map(|v| v.into_iter().unzip())
    }
}

/// Counts over an integer support.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmpiricalPmf {
    counts: BTreeMap<i64, u64>,
    total: u64,
}

impl EmpiricalPmf {
    pub fn from_counts(counts: BTreeMap<i64, u64>) -> Self {
        let counts: BTreeMap<i64, u64> = counts.into_iter().filter(|&(_, c)| c > 0).collect();
        let total = counts.values().sum();
        Self { counts, total }
    }

    pub fn from_samples(samples: impl IntoIterator<Item = i64>) -> Self {
        let mut counts = BTreeMap::new();
        for s in samples {
            *counts.entry(s).or_insert(0) += 1;
        }
        Self::from_counts(counts)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn support_size(&self) -> usize {
        self.counts.len()
    }

    pub fn probability(&self, n: i64) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.counts.get(&n).map_or(0.0, |&c| c as f64 / self.total as f64)
    }

    /// `(value, count)` in increasing value order.
    pub fn counts(&self) -> impl Iterator<Item = (i64, u64)> + '_ {
        self.counts.iter().map(|(&n, &c)| (n, c))
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        let t = self.total as f64;
        self.counts.iter().map(move |(&n, &c)| (n, c as f64 / t))
    }

    /// Expected bias of the plug-in relative entropy, `(support - 1) / (2 n)`.
    pub fn plugin_bias(&self) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        (self.support_size().saturating_sub(1)) as f64 / (2.0 * self.total as f64)
    }
}

/// Plug-in relative entropy and where the reference vanished, if it did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlDivergence {
    pub value: f64,
    pub zero_reference_at: Option<i64>,
}

/// `sum_{p > 0} p log(p / q)`; infinite if `q` vanishes on the support of `p`.
pub fn kl_divergence(p: &EmpiricalPmf, q: impl Fn(i64) -> f64) -> Result<KlDivergence, EstimatorError> {
    if p.total() == 0 {
        return Err(EstimatorError::ZeroSamples);
    }
    let mut value = 0.0;
    for (n, pn) in p.iter() {
        let qn = q(n);
        if qn <= 0.0 {
            log::warn!("reference pmf vanishes at {n} where the sample has mass {pn}");
            return Ok(KlDivergence { value: f64::INFINITY, zero_reference_at: Some(n) });
        }
        value += pn * (pn / qn).ln();
    }
    Ok(KlDivergence { value: value.max(0.0), zero_reference_at: None })
}
