//! Runs independent replicas in parallel and collects instantaneous and time-averaged
//! statistics at a list of sample times.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::estimators::{
    EnsembleAccumulator, EnsembleStats, EstimatorError, StatsLayout, TimeAverageAccumulator,
    TimeAverageStats, DEFAULT_BLOCK_SIZE,
};
use crate::kmc::{replica_rng, JumpProcess, KmcError, PathIntegralAccumulator, PathObserver, Trajectory};
use crate::observable::Observable;
use crate::processes::{sample_initial, InitialCondition, LatticeState, ProcessError, ProcessSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RunError {
    #[error(transparent)]
    Process(#[from] ProcessError),
    #[error(transparent)]
    Kmc(#[from] KmcError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
}

/// Everything needed to simulate an ensemble.
#[derive(Debug, Clone)]
pub struct EnsemblePlan {
    pub spec: ProcessSpec,
    pub init: InitialCondition,
    pub n_sites: usize,
    pub replicas: u64,
    pub seed: u64,
    /// Increasing microscopic sample times.
    pub sample_times: Vec<f64>,
    /// Length of the microscopic window `[t - delta, t]` for time averages.
    pub delta: Option<f64>,
    pub observables: Vec<Observable>,
    pub window_lengths: Vec<usize>,
    pub pmf_samples: u64,
    pub event_budget: u64,
    pub block_size: u64,
}

impl EnsemblePlan {
    pub fn new(spec: ProcessSpec, init: InitialCondition, n_sites: usize, replicas: u64, seed: u64) -> Self {
        Self {
            spec,
            init,
            n_sites,
            replicas,
            seed,
            sample_times: vec![0.0],
            delta: None,
            observables: vec![Observable::Value, Observable::Square],
            window_lengths: Vec::new(),
            pmf_samples: 0,
            event_budget: crate::kmc::DEFAULT_EVENT_BUDGET,
            block_size: DEFAULT_BLOCK_SIZE,
        }
    }

    /// Checks times, window and observables before anything is simulated.
    pub fn validate(&self) -> Result<(), RunError> {
        let bad = |m: String| Err(RunError::InvalidPlan(m));
        self.init.validate(self.spec.kind, self.n_sites)?;
        if self.replicas == 0 {
            return bad("at least one replica is required".into());
        }
        if self.sample_times.is_empty() {
            return bad("no sample times".into());
        }
        if self.sample_times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return bad("sample times must be finite and nonnegative".into());
        }
        if self.sample_times.windows(2).any(|w| w[1] <= w[0]) {
            return bad("sample times must be strictly increasing".into());
        }
        if let Some(d) = self.delta {
            if !(d > 0.0 && d.is_finite()) {
                return bad(format!("time-average window {d} must be positive"));
            }
            let min_gap = self.sample_times.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
            if d > min_gap {
                return bad(format!("time-average window {d} exceeds the smallest gap {min_gap}"));
            }
        }
        if !self.observables.contains(&Observable::Value) || !self.observables.contains(&Observable::Square) {
            return bad("observables must include value and square".into());
        }
        Ok(())
    }

    fn layout(&self) -> StatsLayout {
        StatsLayout::new(self.n_sites, self.observables.clone())
            .with_windows(self.window_lengths.clone())
            .with_pmf_samples(self.pmf_samples)
            .with_block_size(self.block_size)
    }

    /// Whether a time average is collected at sample time `t`.
    fn averages_at(&self, t: f64) -> Option<(f64, f64)> {
        self.delta.filter(|&d| t >= d).map(|d| (t - d, t))
    }
}

/// Statistics of an ensemble at every sample time.
#[derive(Debug, Clone)]
pub struct EnsembleResult {
    pub sample_times: Vec<f64>,
    pub instant: Vec<EnsembleStats>,
    pub time_averaged: Vec<Option<TimeAverageStats>>,
    /// Events fired by each replica, by replica id.
    pub events: Vec<u64>,
    /// Replicas that exhausted their event budget; they contribute only to earlier times.
    pub budget_exceeded: Vec<u64>,
}

#[derive(Debug, Clone)]
struct Partial {
    instant: Vec<EnsembleAccumulator>,
    averaged: Vec<Option<TimeAverageAccumulator>>,
    events: Vec<(u64, u64)>,
    exceeded: Vec<u64>,
}

impl Partial {
    fn empty(plan: &EnsemblePlan) -> Self {
        let layout = plan.layout();
        Self {
            instant: plan.sample_times.iter().map(|_| EnsembleAccumulator::new(layout.clone())).collect(),
            averaged: plan
                .sample_times
                .iter()
                .map(|&t| {
                    plan.averages_at(t).map(|w| {
                        TimeAverageAccumulator::new(plan.n_sites, plan.observables.clone(), w)
                            .with_block_size(plan.block_size)
                    })
                })
                .collect(),
            events: Vec::new(),
            exceeded: Vec::new(),
        }
    }

    fn merge(self, other: Self) -> Result<Self, RunError> {
        let instant = self
            .instant
            .into_iter()
            .zip(other.instant)
            .map(|(a, b)| a.merge(b))
            .collect::<Result<Vec<_>, _>>()?;
        let averaged = self
            .averaged
            .into_iter()
            .zip(other.averaged)
            .map(|(a, b)| match (a, b) {
                (Some(a), Some(b)) => a.merge(b).map(Some),
                _ => Ok(None),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut events = self.events;
        events.extend(other.events);
        let mut exceeded = self.exceeded;
        exceeded.extend(other.exceeded);
        Ok(Self { instant, averaged, events, exceeded })
    }
}

/// Simulates one replica and records it; budget exhaustion is reported, not propagated.
fn run_replica<P: JumpProcess>(
    process: P,
    rng: ChaCha8Rng,
    id: u64,
    plan: &EnsemblePlan,
    acc: &mut Partial,
) -> Result<(), RunError> {
    let mut traj = Trajectory::new(process, rng).with_budget(plan.event_budget);
    let outcome = (|| -> Result<(), RunError> {
        for (k, &t) in plan.sample_times.iter().enumerate() {
            match plan.averages_at(t) {
                Some((lo, hi)) => {
                    traj.run_until_micro(lo, &mut [])?;
                    let mut integ =
                        PathIntegralAccumulator::new(plan.observables.clone(), plan.n_sites, lo, hi, traj.t_micro())?;
                    {
                        let mut observers: [&mut dyn PathObserver<P>; 1] = [&mut integ];
                        traj.run_until_micro(hi, &mut observers)?;
                    }
                    if let Some(ta) = acc.averaged[k].as_mut() {
                        ta.record(id, &integ.averages()?)?;
                    }
                }
                None => {
                    traj.run_until_micro(t, &mut [])?;
                }
            }
            acc.instant[k].record(id, traj.process().values())?;
        }
        Ok(())
    })();
    acc.events.push((id, traj.event_count()));
    match outcome {
        Err(RunError::Kmc(KmcError::BudgetExceeded { .. })) => {
            log::warn!("replica {id} exhausted its event budget of {}", plan.event_budget);
            acc.exceeded.push(id);
            Ok(())
        }
        other => other,
    }
}

fn run_block(plan: &EnsemblePlan, first: u64, last: u64) -> Result<Partial, RunError> {
    let mut acc = Partial::empty(plan);
    for id in first..last {
        let mut rng = replica_rng(plan.seed, id);
        match sample_initial(&plan.spec, &plan.init, plan.n_sites, &mut rng)? {
            LatticeState::Crystal(p) => run_replica(p, rng, id, plan, &mut acc)?,
            LatticeState::ZeroRange(p) => run_replica(p, rng, id, plan, &mut acc)?,
            LatticeState::Exclusion(p) => run_replica(p, rng, id, plan, &mut acc)?,
        }
    }
    Ok(acc)
}

/// Runs the ensemble on the current rayon pool. Results do not depend on the number of
/// threads: each replica has its own random stream and blocks are reduced in id order.
pub fn run_ensemble(plan: &EnsemblePlan) -> Result<EnsembleResult, RunError> {
    plan.validate()?;
    let block = plan.block_size.max(1);
    let n_blocks = plan.replicas.div_ceil(block);
    let merged = (0..n_blocks)
        .into_par_iter()
        .map(|b| run_block(plan, b * block, ((b + 1) * block).min(plan.replicas)))
        .try_reduce(|| Partial::empty(plan), Partial::merge)?;
    let mut events = merged.events;
    events.sort_unstable();
    let mut exceeded = merged.exceeded;
    exceeded.sort_unstable();
    Ok(EnsembleResult {
        sample_times: plan.sample_times.clone(),
        instant: merged.instant.iter().map(EnsembleAccumulator::finalize).collect(),
        time_averaged: merged.averaged.iter().map(|a| a.as_ref().map(TimeAverageAccumulator::finalize)).collect(),
        events: events.into_iter().map(|(_, e)| e).collect(),
        budget_exceeded: exceeded,
    })
}
