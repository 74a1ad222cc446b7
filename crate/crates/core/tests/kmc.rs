use lesim_core::kmc::{replica_rng, JumpProcess, PathIntegralAccumulator, PathObserver, Step, Trajectory};
use lesim_core::lattice::{arrhenius_rate, Direction, SlopeConfig};
use lesim_core::observable::Observable;
use lesim_core::processes::{CrystalProcess, ZeroRangeProcess};
use lesim_core::rate_index::RateIndex;
use lesim_core::zero_range::ZrRate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn flat_crystal(n: usize) -> CrystalProcess {
    CrystalProcess::from_slopes(&SlopeConfig::new(vec![0; n]).unwrap(), 3.0).unwrap()
}

fn rough_crystal() -> CrystalProcess {
    let z = vec![0, 1, -1, 2, 0, -2, 1, 0, -1, 0, 1, -1];
    CrystalProcess::from_slopes(&SlopeConfig::new(z).unwrap(), 1.0).unwrap()
}

#[test]
fn flat_surface_total_rate() {
    let traj = Trajectory::new(flat_crystal(8), replica_rng(1, 0));
    let expected = 16.0 * (-6.0f64).exp();
    assert!((traj.rates().total() - expected).abs() < 1e-15);
}

#[test]
fn right_jump_changes_exactly_four_rates() {
    let mut p = flat_crystal(12);
    let before: Vec<f64> = (0..12).map(|s| p.rate(s)).collect();
    let i = 5;
    p.apply(i, Direction::Right);
    let changed: Vec<usize> = (0..12).filter(|&s| p.rate(s) != before[s]).collect();
    assert_eq!(changed, vec![i - 1, i, i + 1, i + 2]);
}

#[test]
fn event_sites_follow_leaf_weights() {
    // One step from the same state with 1e5 independent streams.
    let process = rough_crystal();
    let n = process.n_sites();
    let weights: Vec<f64> = (0..n).flat_map(|s| process.rates(s)).collect();
    let total: f64 = weights.iter().sum();
    let mut counts = vec![0u64; 2 * n];
    let draws = 100_000u64;
    for id in 0..draws {
        let mut traj = Trajectory::new(process.clone(), replica_rng(3, id));
        match traj.step().unwrap() {
            Step::Jump { site, dir, .. } => counts[2 * site + dir.index()] += 1,
            Step::Frozen => panic!("state is not frozen"),
        }
    }
    let chi2: f64 = counts
        .iter()
        .zip(&weights)
        .map(|(&c, &w)| {
            let e = draws as f64 * w / total;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    let p = 1.0 - ChiSquared::new((2 * n - 1) as f64).unwrap().cdf(chi2);
    assert!(p > 0.001, "chi2 = {chi2}, p = {p}");
}

#[test]
fn waiting_times_are_exponential() {
    // Linear zero-range rates sum to the particle count, which jumps preserve.
    let process = ZeroRangeProcess::new(vec![3, 0, 1, 4, 2, 0, 0, 5], ZrRate::Linear).unwrap();
    let total = process.particles() as f64;
    let mut traj = Trajectory::new(process, replica_rng(4, 0));
    let mut dts: Vec<f64> = (0..100_000)
        .map(|_| match traj.step().unwrap() {
            Step::Jump { dt, .. } => dt,
            Step::Frozen => panic!("state is not frozen"),
        })
        .collect();
    dts.sort_by(f64::total_cmp);
    let m = dts.len() as f64;
    let d = dts
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let f = 1.0 - (-total * t).exp();
            (f - i as f64 / m).abs().max((i as f64 + 1.0) / m - f)
        })
        .fold(0.0, f64::max);
    // Asymptotic Kolmogorov critical value at level 0.001.
    assert!(d * m.sqrt() < 1.949, "KS statistic {}", d * m.sqrt());
}

#[test]
fn same_seed_same_path() {
    let run = || {
        let mut traj = Trajectory::new(rough_crystal(), replica_rng(9, 2));
        let steps: Vec<Step> = (0..5000).map(|_| traj.step().unwrap()).collect();
        (steps, traj.process().values().to_vec(), traj.t_micro().to_bits())
    };
    assert_eq!(run(), run());
    let mut other = Trajectory::new(rough_crystal(), replica_rng(9, 3));
    let other_steps: Vec<Step> = (0..5000).map(|_| other.step().unwrap()).collect();
    assert_ne!(run().0, other_steps);
}

#[test]
fn conserved_quantities_over_many_events() {
    let process = rough_crystal();
    let start = process.slopes().conserved_quantities();
    let sum_w: i64 = process.curvatures().iter().sum();
    let mut traj = Trajectory::new(process, replica_rng(5, 0));
    for _ in 0..100_000 {
        traj.step().unwrap();
    }
    let end = traj.process().slopes().conserved_quantities();
    assert_eq!(traj.event_count(), 100_000);
    assert_eq!(end.s0, start.s0);
    assert_eq!(end.s1_mod_n, start.s1_mod_n);
    assert_eq!(traj.process().curvatures().iter().sum::<i64>(), sum_w);
    // Rates stay consistent with the state.
    for s in 0..traj.process().n_sites() {
        assert_eq!(traj.process().rate(s), arrhenius_rate(traj.process().curvatures()[s], 1.0));
    }
}

#[test]
fn run_to_current_time_fires_nothing() {
    let mut traj = Trajectory::new(rough_crystal(), replica_rng(6, 0));
    let before = traj.process().values().to_vec();
    assert_eq!(traj.run_until_micro(0.0, &mut []).unwrap(), 0);
    assert_eq!(traj.process().values(), &before[..]);
    traj.run_until_micro(2.0, &mut []).unwrap();
    assert_eq!(traj.t_micro(), 2.0);
    assert!(traj.run_until_micro(1.0, &mut []).is_err());
}

#[test]
fn empty_lattice_fast_forwards() {
    let mut traj = Trajectory::new(ZeroRangeProcess::new(vec![0; 8], ZrRate::Linear).unwrap(), replica_rng(1, 1));
    assert_eq!(traj.step().unwrap(), Step::Frozen);
    assert_eq!(traj.run_until_micro(7.5, &mut []).unwrap(), 0);
    assert_eq!(traj.t_micro(), 7.5);
}

#[test]
fn conserved_total_integrates_to_mass_times_window() {
    let process = ZeroRangeProcess::new(vec![2, 1, 0, 3, 0, 0, 1, 1], ZrRate::LinearPlusFourthRoot).unwrap();
    let mass = process.particles() as f64;
    let mut acc = PathIntegralAccumulator::new(vec![Observable::Value], 8, 0.5, 3.0, 0.0).unwrap();
    let mut traj = Trajectory::new(process, replica_rng(8, 0));
    let events = traj.run_until_micro(3.0, &mut [&mut acc]).unwrap();
    assert!(events > 10);
    let total: f64 = (0..8).map(|s| acc.integral(0, s).unwrap()).sum();
    assert!((total - mass * 2.5).abs() < 1e-12, "{total}");
}

#[test]
fn hand_built_path_integrals() {
    // Site 0 holds 2 on [0, 1), 1 on [1, 2.5), 0 after; its last particle wraps to site 3. Window [0.5, 4].
    let mut p = ZeroRangeProcess::new(vec![2, 0, 0, 0], ZrRate::Linear).unwrap();
    let mut acc = PathIntegralAccumulator::new(vec![Observable::Value, Observable::Square], 4, 0.5, 4.0, 0.0).unwrap();
    for (t, site, dir) in [(1.0, 0, Direction::Right), (2.5, 0, Direction::Left), (3.0, 1, Direction::Right)] {
        let span = p.changed_sites(site, dir);
        acc.before_event(&p, t, span);
        p.apply(site, dir);
    }
    acc.finish(&p, 4.0);
    let value = |s| acc.integral(0, s).unwrap();
    let square = |s| acc.integral(1, s).unwrap();
    assert_eq!(value(0), 2.0 * 0.5 + 1.0 * 1.5);
    assert_eq!(square(0), 4.0 * 0.5 + 1.0 * 1.5);
    assert_eq!(value(1), 2.0);
    assert_eq!(value(2), 1.0);
    assert_eq!(value(3), 1.5);
    let avg = acc.averages().unwrap();
    assert!((avg.iter().take(4).sum::<f64>() - 2.0).abs() < 1e-15);
}

#[test]
fn incremental_updates_do_not_drift() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let n = 1024;
    let weights: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let mut index = RateIndex::new(&weights);
    for _ in 0..1_000_000 {
        let leaf = rng.random_range(0..n);
        let scale = (-20.0 * rng.random::<f64>()).exp();
        index.set(leaf, scale * rng.random::<f64>());
    }
    let sum = index.leaf_sum();
    assert!((index.total() - sum).abs() / sum < 1e-9);
    let before = index.total();
    index.resum();
    assert!((index.total() - before).abs() / before < 1e-9);
}
