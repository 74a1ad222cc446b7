//! Event-driven simulation of lattice jump processes with exact path integrals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::lattice::{wrap, Direction, SystemParams};
use crate::observable::Observable;
use crate::rate_index::RateIndex;

/// Events between full re-summations of the rate tree.
pub const RESYNC_INTERVAL: u64 = 1 << 20;
/// Default per-replica event budget.
pub const DEFAULT_EVENT_BUDGET: u64 = 1_000_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KmcError {
    #[error("event budget of {budget} exhausted at t_micro={t_micro} after {events} events")]
    BudgetExceeded { budget: u64, events: u64, t_micro: f64 },
    #[error("target time {target} precedes current time {current}")]
    TimeReversal { target: f64, current: f64 },
    #[error("total rate is not finite ({0}); a curvature is too negative for the chosen K")]
    RateOverflow(f64),
    #[error("window [{lo}, {hi}] was not fully observed (covered [{from}, {to}])")]
    WindowNotCovered { lo: f64, hi: f64, from: f64, to: f64 },
    #[error("invalid window [{lo}, {hi}]")]
    InvalidWindow { lo: f64, hi: f64 },
}

/// A run of `len` consecutive sites starting at `start`, wrapping around the ring.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SiteSpan {
    pub start: usize,
    pub len: usize,
}

impl SiteSpan {
    #[inline]
    pub fn new(start: usize, len: usize) -> Self {
        Self { start, len }
    }

    #[inline]
    pub fn sites(self, n: usize) -> impl Iterator<Item = usize> {
        (0..self.len).map(move |o| {
            let s = self.start + o;
            if s >= n {
                s - n
            } else {
                s
            }
        })
    }
}

/// A nearest-neighbour jump process on a ring; each site owns a left and a right event.
pub trait JumpProcess {
    fn n_sites(&self) -> usize;
    /// Rates of the `[left, right]` events at `site`.
    fn rates(&self, site: usize) -> [f64; 2];
    /// Integer value observed at `site`.
    fn value(&self, site: usize) -> i64;
    fn values(&self) -> &[i64];
    /// Sites whose values change if the event fires.
    fn changed_sites(&self, site: usize, dir: Direction) -> SiteSpan;
    /// Fires the event; returns the sites whose rates must be refreshed.
    fn apply(&mut self, site: usize, dir: Direction) -> SiteSpan;
}

/// Receives the piecewise-constant path of a trajectory.
pub trait PathObserver<P: JumpProcess> {
    /// Called at time `t` just before the values on `changing` are modified.
    fn before_event(&mut self, process: &P, t: f64, changing: SiteSpan);
    /// Called when a run stops at time `t`.
    fn finish(&mut self, process: &P, t: f64);
}

/// Generator for replica `replica_id` of a run seeded with `master_seed`.
pub fn replica_rng(master_seed: u64, replica_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(replica_id);
    rng
}

/// Outcome of a single `step`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Step {
    Jump { site: usize, dir: Direction, dt: f64 },
    Frozen,
}

/// A process state evolving in continuous time.
#[derive(Debug, Clone)]
pub struct Trajectory<P: JumpProcess> {
    process: P,
    index: RateIndex,
    rng: ChaCha8Rng,
    t_micro: f64,
    events: u64,
    budget: u64,
    since_resync: u64,
}

impl<P: JumpProcess> Trajectory<P> {
    pub fn new(process: P, rng: ChaCha8Rng) -> Self {
        let n = process.n_sites();
        let weights: Vec<f64> = (0..n).flat_map(|s| process.rates(s)).collect();
        Self {
            index: RateIndex::new(&weights),
            process,
            rng,
            t_micro: 0.0,
            events: 0,
            budget: DEFAULT_EVENT_BUDGET,
            since_resync: 0,
        }
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = budget;
        self
    }

    pub fn process(&self) -> &P {
        &self.process
    }

    pub fn into_process(self) -> P {
        self.process
    }

    pub fn rates(&self) -> &RateIndex {
        &self.index
    }

    pub fn t_micro(&self) -> f64 {
        self.t_micro
    }

    pub fn event_count(&self) -> u64 {
        self.events
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Recomputes every leaf from the state and re-sums the tree.
    pub fn resync(&mut self) {
        let p = &self.process;
        let n = p.n_sites();
        self.index.rebuild((0..n).flat_map(|s| p.rates(s)));
        self.since_resync = 0;
    }

    fn check_total(&self) -> Result<f64, KmcError> {
        let total = self.index.total();
        if total.is_finite() {
            Ok(total)
        } else {
            Err(KmcError::RateOverflow(total))
        }
    }

    #[inline]
    fn sample_event(&mut self, total: f64) -> (usize, Direction) {
        let leaf = self.index.find(self.rng.random::<f64>() * total);
        (leaf / 2, Direction::from_index(leaf % 2))
    }

    #[inline]
    fn fire(&mut self, site: usize, dir: Direction) {
        let span = self.process.apply(site, dir);
        let n = self.process.n_sites();
        for s in span.sites(n) {
            let [l, r] = self.process.rates(s);
            self.index.set_pair(s, l, r);
        }
        self.events += 1;
        self.since_resync += 1;
        if self.since_resync >= RESYNC_INTERVAL {
            self.resync();
        }
    }

    /// Samples one waiting time and one event and applies it.
    pub fn step(&mut self) -> Result<Step, KmcError> {
        let total = self.check_total()?;
        if total <= 0.0 {
            return Ok(Step::Frozen);
        }
        if self.events >= self.budget {
            return Err(self.budget_error());
        }
        let u = 1.0 - self.rng.random::<f64>();
        let dt = -u.ln() / total;
        let (site, dir) = self.sample_event(total);
        self.t_micro += dt;
        self.fire(site, dir);
        Ok(Step::Jump { site, dir, dt })
    }

    fn budget_error(&self) -> KmcError {
        KmcError::BudgetExceeded { budget: self.budget, events: self.events, t_micro: self.t_micro }
    }

    /// Advances to microscopic time `t_end`, reporting the path to `observers`.
    /// Returns the number of events fired.
    pub fn run_until_micro(
        &mut self,
        t_end: f64,
        observers: &mut [&mut dyn PathObserver<P>],
    ) -> Result<u64, KmcError> {
        if t_end < self.t_micro {
            return Err(KmcError::TimeReversal { target: t_end, current: self.t_micro });
        }
        let start_events = self.events;
        let n = self.process.n_sites();
        loop {
            let total = self.check_total()?;
            if total <= 0.0 {
                self.t_micro = t_end;
                break;
            }
            let u = 1.0 - self.rng.random::<f64>();
            let t_next = self.t_micro - u.ln() / total;
            if t_next > t_end {
                self.t_micro = t_end;
                break;
            }
            if self.events >= self.budget {
                for obs in observers.iter_mut() {
                    obs.finish(&self.process, self.t_micro);
                }
                return Err(self.budget_error());
            }
            self.t_micro = t_next;
            let (site, dir) = self.sample_event(total);
            let changing = self.process.changed_sites(site, dir);
            debug_assert!(changing.len <= n);
            for obs in observers.iter_mut() {
                obs.before_event(&self.process, self.t_micro, changing);
            }
            self.fire(site, dir);
        }
        for obs in observers.iter_mut() {
            obs.finish(&self.process, self.t_micro);
        }
        Ok(self.events - start_events)
    }

    /// Advances to macroscopic time `t_macro`, i.e. microscopic time `N^alpha t_macro`.
    pub fn run_until(
        &mut self,
        t_macro: f64,
        params: &SystemParams,
        observers: &mut [&mut dyn PathObserver<P>],
    ) -> Result<u64, KmcError> {
        let t_end = params.micro_time(self.process.n_sites(), t_macro);
        self.run_until_micro(t_end, observers)
    }
}

/// Exact time integrals of per-site observables over a microscopic window.
#[derive(Debug, Clone)]
pub struct PathIntegralAccumulator {
    observables: Vec<Observable>,
    n: usize,
    lo: f64,
    hi: f64,
    last: Vec<f64>,
    integrals: Vec<f64>,
    covered_from: f64,
    covered_to: f64,
}

impl PathIntegralAccumulator {
    /// Starts observing at `t_start`; the window is `[lo, hi]`.
    pub fn new(
        observables: Vec<Observable>,
        n: usize,
        lo: f64,
        hi: f64,
        t_start: f64,
    ) -> Result<Self, KmcError> {
        if !(lo <= hi && lo.is_finite() && hi.is_finite()) {
            return Err(KmcError::InvalidWindow { lo, hi });
        }
        let len = observables.len() * n;
        Ok(Self {
            observables,
            n,
            lo,
            hi,
            last: vec![t_start; n],
            integrals: vec![0.0; len],
            covered_from: t_start,
            covered_to: t_start,
        })
    }

    pub fn window(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn observables(&self) -> &[Observable] {
        &self.observables
    }

    #[inline]
    fn integrate_site(&mut self, site: usize, value: i64, t: f64) {
        let from = self.last[site].max(self.lo);
        let to = t.min(self.hi);
        if to > from {
            let dt = to - from;
            for (o, obs) in self.observables.iter().enumerate() {
                self.integrals[o * self.n + site] += obs.eval(value) * dt;
            }
        }
        self.last[site] = t;
    }

    fn check_covered(&self) -> Result<(), KmcError> {
        if self.covered_from <= self.lo && self.covered_to >= self.hi {
            Ok(())
        } else {
            Err(KmcError::WindowNotCovered {
                lo: self.lo,
                hi: self.hi,
                from: self.covered_from,
                to: self.covered_to,
            })
        }
    }

    /// `integral f_o(value_site(s)) ds` over the window.
    pub fn integral(&self, obs: usize, site: usize) -> Result<f64, KmcError> {
        self.check_covered()?;
        Ok(self.integrals[obs * self.n + site])
    }

    /// Integrals divided by the window length, laid out as `[observable][site]`.
    pub fn averages(&self) -> Result<Vec<f64>, KmcError> {
        self.check_covered()?;
        let len = self.hi - self.lo;
        if len <= 0.0 {
            return Err(KmcError::InvalidWindow { lo: self.lo, hi: self.hi });
        }
        Ok(self.integrals.iter().map(|v| v / len).collect())
    }
}

impl<P: JumpProcess> PathObserver<P> for PathIntegralAccumulator {
    fn before_event(&mut self, process: &P, t: f64, changing: SiteSpan) {
        for s in changing.sites(self.n) {
            self.integrate_site(s, process.value(s), t);
        }
    }

    fn finish(&mut self, process: &P, t: f64) {
        for s in 0..self.n {
            self.integrate_site(s, process.value(s), t);
        }
        self.covered_to = self.covered_to.max(t);
    }
}

/// Neighbour of `site` in direction `dir`.
#[inline]
pub fn neighbour(site: usize, dir: Direction, n: usize) -> usize {
    wrap(site as isize + dir.step(), n)
}
