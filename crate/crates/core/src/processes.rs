//! Concrete lattice processes and initial-condition samplers.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use thiserror::Error;

use crate::gibbs::{DiscreteGaussian, GibbsError};
use crate::kmc::{JumpProcess, SiteSpan};
use crate::lattice::{
    check_rate_bound, column_jump_in_place, slope_jump_in_place, wrap, Direction, LatticeError,
    SlopeConfig, SystemParams,
};
use crate::observable::Observable;
use crate::zero_range::ZrRate;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProcessError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Gibbs(#[from] GibbsError),
    #[error("lattice needs at least {min} sites, got {got}")]
    TooSmall { min: usize, got: usize },
    #[error("occupancy profile is negative ({value}) at x={x}")]
    NegativeOccupancy { x: f64, value: f64 },
    #[error("exclusion profile leaves [0, 1] ({value}) at x={x}")]
    ExclusionOutOfRange { x: f64, value: f64 },
    #[error("invalid profile: {0}")]
    Profile(String),
    #[error("initial condition {init} does not apply to {kind}")]
    Mismatch { init: String, kind: String },
    #[error("invalid density {0}")]
    InvalidDensity(f64),
}

/// Rate of a symmetric simple exclusion jump from a site with occupancy `from` to one with `to`.
#[inline]
pub fn exclusion_rate(from: i64, to: i64) -> f64 {
    if from == 1 && to == 0 {
        1.0
    } else {
        0.0
    }
}

/// Cached Arrhenius rates for curvatures in a fixed range.
#[derive(Debug, Clone)]
struct RateTable {
    k: f64,
    offset: i64,
    table: Vec<f64>,
}

impl RateTable {
    const HALF_WIDTH: i64 = 64;

    fn new(k: f64) -> Self {
        let table = (-Self::HALF_WIDTH..=Self::HALF_WIDTH)
            .map(|w| crate::lattice::arrhenius_rate(w, k))
            .collect();
        Self { k, offset: Self::HALF_WIDTH, table }
    }

    #[inline]
    fn rate(&self, w: i64) -> f64 {
        let idx = w + self.offset;
        if idx >= 0 && (idx as usize) < self.table.len() {
            self.table[idx as usize]
        } else {
            crate::lattice::arrhenius_rate(w, self.k)
        }
    }
}

/// Crystal surface with Arrhenius rates; curvatures drive the rates and slopes are kept alongside.
#[derive(Debug, Clone)]
pub struct CrystalProcess {
    w: Vec<i64>,
    z: Vec<i64>,
    rates: RateTable,
}

impl CrystalProcess {
    pub fn from_slopes(z: &SlopeConfig, k: f64) -> Result<Self, ProcessError> {
        let w = z.curvatures().as_slice().to_vec();
        if w.len() < 4 {
            return Err(ProcessError::TooSmall { min: 4, got: w.len() });
        }
        for &wi in &w {
            check_rate_bound(wi, k)?;
        }
        Ok(Self { w, z: z.as_slice().to_vec(), rates: RateTable::new(k) })
    }

    pub fn k(&self) -> f64 {
        self.rates.k
    }

    pub fn curvatures(&self) -> &[i64] {
        &self.w
    }

    pub fn slopes(&self) -> SlopeConfig {
        SlopeConfig::new(self.z.clone()).expect("crystal has at least four sites")
    }

    #[inline]
    pub fn rate(&self, site: usize) -> f64 {
        self.rates.rate(self.w[site])
    }
}

impl JumpProcess for CrystalProcess {
    fn n_sites(&self) -> usize {
        self.w.len()
    }

    #[inline]
    fn rates(&self, site: usize) -> [f64; 2] {
        let r = self.rate(site);
        [r, r]
    }

    #[inline]
    fn value(&self, site: usize) -> i64 {
        self.w[site]
    }

    fn values(&self) -> &[i64] {
        &self.w
    }

    #[inline]
    fn changed_sites(&self, site: usize, dir: Direction) -> SiteSpan {
        let n = self.w.len();
        let start = match dir {
            Direction::Right => wrap(site as isize - 1, n),
            Direction::Left => wrap(site as isize - 2, n),
        };
        SiteSpan::new(start, 4)
    }

    #[inline]
    fn apply(&mut self, site: usize, dir: Direction) -> SiteSpan {
        slope_jump_in_place(&mut self.z, site, dir);
        let start = column_jump_in_place(&mut self.w, site, dir);
        SiteSpan::new(start, 4)
    }
}

/// Symmetric nearest-neighbour zero-range process; each direction fires at rate `g(v)/2`.
#[derive(Debug, Clone)]
pub struct ZeroRangeProcess {
    v: Vec<i64>,
    g: ZrRate,
    half_rates: Vec<f64>,
}

impl ZeroRangeProcess {
    const TABLE: usize = 4096;

    pub fn new(v: Vec<i64>, g: ZrRate) -> Result<Self, ProcessError> {
        if v.len() < 2 {
            return Err(ProcessError::TooSmall { min: 2, got: v.len() });
        }
        if let Some(&bad) = v.iter().find(|&&x| x < 0) {
            return Err(ProcessError::InvalidDensity(bad as f64));
        }
        let half_rates = (0..Self::TABLE as i64).map(|k| 0.5 * g.eval(k)).collect();
        Ok(Self { v, g, half_rates })
    }

    pub fn occupancies(&self) -> &[i64] {
        &self.v
    }

    pub fn particles(&self) -> i64 {
        self.v.iter().sum()
    }

    #[inline]
    fn half_rate(&self, k: i64) -> f64 {
        self.half_rates.get(k as usize).copied().unwrap_or_else(|| 0.5 * self.g.eval(k))
    }
}

impl JumpProcess for ZeroRangeProcess {
    fn n_sites(&self) -> usize {
        self.v.len()
    }

    #[inline]
    fn rates(&self, site: usize) -> [f64; 2] {
        let r = self.half_rate(self.v[site]);
        [r, r]
    }

    #[inline]
    fn value(&self, site: usize) -> i64 {
        self.v[site]
    }

    fn values(&self) -> &[i64] {
        &self.v
    }

    #[inline]
    fn changed_sites(&self, site: usize, dir: Direction) -> SiteSpan {
        match dir {
            Direction::Right => SiteSpan::new(site, 2),
            Direction::Left => SiteSpan::new(wrap(site as isize - 1, self.v.len()), 2),
        }
    }

    #[inline]
    fn apply(&mut self, site: usize, dir: Direction) -> SiteSpan {
        let n = self.v.len();
        let to = wrap(site as isize + dir.step(), n);
        self.v[site] -= 1;
        self.v[to] += 1;
        self.changed_sites(site, dir)
    }
}

/// Symmetric simple exclusion: a particle jumps to each empty neighbour at rate 1.
#[derive(Debug, Clone)]
pub struct ExclusionProcess {
    occ: Vec<i64>,
}

impl ExclusionProcess {
    pub fn new(occ: Vec<i64>) -> Result<Self, ProcessError> {
        if occ.len() < 3 {
            return Err(ProcessError::TooSmall { min: 3, got: occ.len() });
        }
        if let Some(&bad) = occ.iter().find(|&&x| x != 0 && x != 1) {
            return Err(ProcessError::InvalidDensity(bad as f64));
        }
        Ok(Self { occ })
    }
}

impl JumpProcess for ExclusionProcess {
    fn n_sites(&self) -> usize {
        self.occ.len()
    }

    #[inline]
    fn rates(&self, site: usize) -> [f64; 2] {
        let n = self.occ.len();
        let here = self.occ[site];
        [
            exclusion_rate(here, self.occ[wrap(site as isize - 1, n)]),
            exclusion_rate(here, self.occ[wrap(site as isize + 1, n)]),
        ]
    }

    #[inline]
    fn value(&self, site: usize) -> i64 {
        self.occ[site]
    }

    fn values(&self) -> &[i64] {
        &self.occ
    }

    #[inline]
    fn changed_sites(&self, site: usize, dir: Direction) -> SiteSpan {
        match dir {
            Direction::Right => SiteSpan::new(site, 2),
            Direction::Left => SiteSpan::new(wrap(site as isize - 1, self.occ.len()), 2),
        }
    }

    #[inline]
    fn apply(&mut self, site: usize, dir: Direction) -> SiteSpan {
        let n = self.occ.len();
        let to = wrap(site as isize + dir.step(), n);
        self.occ[site] = 0;
        self.occ[to] = 1;
        let lo = match dir {
            Direction::Right => site,
            Direction::Left => to,
        };
        SiteSpan::new(wrap(lo as isize - 1, n), 4)
    }
}

/// Which process a run simulates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProcessKind {
    ArrheniusCrystal,
    ZeroRange(ZrRate),
    SimpleExclusion,
}

impl ProcessKind {
    pub fn name(&self) -> &'static str {
        match self {
            ProcessKind::ArrheniusCrystal => "arrhenius",
            ProcessKind::ZeroRange(_) => "zero_range",
            ProcessKind::SimpleExclusion => "exclusion",
        }
    }

    /// Name of the per-site value this process exposes.
    pub fn view(&self) -> &'static str {
        match self {
            ProcessKind::ArrheniusCrystal => "curvature",
            ProcessKind::ZeroRange(_) | ProcessKind::SimpleExclusion => "occupancy",
        }
    }
}

/// A process together with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcessSpec {
    pub kind: ProcessKind,
    pub params: SystemParams,
}

impl ProcessSpec {
    /// Process-specific meaning of a named observable.
    pub fn observable(&self, name: &str) -> Result<Observable, String> {
        match (name, self.kind) {
            ("value", _) => Ok(Observable::Value),
            ("square", _) => Ok(Observable::Square),
            ("rate", ProcessKind::ArrheniusCrystal) => {
                Ok(Observable::ArrheniusRate { k: self.params.k })
            }
            ("rate", ProcessKind::ZeroRange(g)) => Ok(Observable::ZeroRangeRate(g)),
            ("fourth_root", ProcessKind::ZeroRange(_)) => Ok(Observable::FourthRoot),
            ("value_exp_decay", ProcessKind::ZeroRange(_)) => Ok(Observable::ValueExpDecay),
            (other, kind) => Err(format!("observable '{other}' is not defined for {}", kind.name())),
        }
    }
}

/// Basis function of a profile term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    Const,
    Sin,
    Cos,
    SinSquared,
}

/// `amplitude * basis(2 pi frequency x + phase)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileTerm {
    pub basis: Basis,
    pub amplitude: f64,
    pub frequency: u32,
    pub phase: f64,
}

impl ProfileTerm {
    fn angle(&self, x: f64) -> f64 {
        2.0 * PI * self.frequency as f64 * x + self.phase
    }

    fn eval(&self, x: f64) -> f64 {
        let a = self.amplitude;
        match self.basis {
            Basis::Const => a,
            Basis::Sin => a * self.angle(x).sin(),
            Basis::Cos => a * self.angle(x).cos(),
            Basis::SinSquared => a * self.angle(x).sin().powi(2),
        }
    }

    fn second_derivative(&self, x: f64) -> f64 {
        let c = 2.0 * PI * self.frequency as f64;
        let a = self.amplitude;
        match self.basis {
            Basis::Const => 0.0,
            Basis::Sin => -c * c * a * self.angle(x).sin(),
            Basis::Cos => -c * c * a * self.angle(x).cos(),
            // sin^2(t) = (1 - cos 2t) / 2
            Basis::SinSquared => 2.0 * c * c * a * (2.0 * self.angle(x)).cos(),
        }
    }
}

/// Periodic macroscopic profile on `[0, 1)` built from trigonometric terms.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroProfile {
    pub terms: Vec<ProfileTerm>,
    pub description: String,
}

impl MacroProfile {
    pub fn new(terms: Vec<ProfileTerm>) -> Self {
        let description = terms.iter().map(term_text).collect::<Vec<_>>().join(" + ");
        Self { terms, description }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![ProfileTerm { basis: Basis::Const, amplitude: c, frequency: 0, phase: 0.0 }])
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.terms.iter().map(|t| t.eval(x)).sum()
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        self.terms.iter().map(|t| t.second_derivative(x)).sum()
    }

    /// `int_0^1 phi(x) v(x) dx` by a fine periodic rule.
    pub fn integrate_against(&self, phi: impl Fn(f64) -> f64) -> f64 {
        let m = 8192;
        (0..m).map(|j| {
            let x = j as f64 / m as f64;
            phi(x) * self.eval(x)
        })
        .sum::<f64>()
            / m as f64
    }
}

fn term_text(t: &ProfileTerm) -> String {
    let basis = match t.basis {
        Basis::Const => return format!("const:{}", t.amplitude),
        Basis::Sin => "sin",
        Basis::Cos => "cos",
        Basis::SinSquared => "sin2",
    };
    format!("{basis}:{}:{}:{}", t.amplitude, t.frequency, t.phase)
}

impl fmt::Display for MacroProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.description)
    }
}

/// Parses `basis:amplitude[:frequency[:phase]]` terms joined by `+`, e.g. `sin2:5:1 + const:0.5`.
impl FromStr for MacroProfile {
    type Err = ProcessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |msg: String| ProcessError::Profile(msg);
        let mut terms = Vec::new();
        for raw in s.split('+') {
            let raw = raw.trim();
            if raw.is_empty() {
                return Err(bad(format!("empty term in '{s}'")));
            }
            let parts: Vec<&str> = raw.split(':').map(str::trim).collect();
            let basis = match parts[0] {
                "const" => Basis::Const,
                "sin" => Basis::Sin,
                "cos" => Basis::Cos,
                "sin2" => Basis::SinSquared,
                other => return Err(bad(format!("unknown basis '{other}'"))),
            };
            if parts.len() < 2 || parts.len() > 4 {
                return Err(bad(format!("term '{raw}' needs 2 to 4 fields")));
            }
            let num = |i: usize, default: f64| -> Result<f64, ProcessError> {
                match parts.get(i) {
                    None => Ok(default),
                    Some(p) => p
                        .parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| bad(format!("bad number '{p}' in '{raw}'"))),
                }
            };
            let amplitude = num(1, 0.0)?;
            let freq = num(2, 1.0)?;
            if freq < 0.0 || freq.fract() != 0.0 {
                return Err(bad(format!("frequency must be a nonnegative integer in '{raw}'")));
            }
            let phase = num(3, 0.0)?;
            terms.push(ProfileTerm { basis, amplitude, frequency: freq as u32, phase });
        }
        Ok(MacroProfile::new(terms))
    }
}

/// `floor(x) + Bernoulli(frac(x))`, whose mean is exactly `x`.
pub fn floor_plus_bernoulli<R: Rng + ?Sized>(x: f64, rng: &mut R) -> i64 {
    let base = x.floor();
    let frac = x - base;
    let bump = if frac > 0.0 && rng.random::<f64>() < frac { 1 } else { 0 };
    base as i64 + bump
}

/// Product-measure sampler around a scaled profile.
#[derive(Debug, Clone, PartialEq)]
pub struct InitSampler {
    pub profile: MacroProfile,
    pub beta: f64,
}

impl InitSampler {
    /// Target mean `N^beta v0(i/N)` at site `i`.
    pub fn target(&self, n: usize, i: usize) -> f64 {
        (n as f64).powf(self.beta) * self.profile.eval(i as f64 / n as f64)
    }

    pub fn sample_values<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<i64> {
        (0..n).map(|i| floor_plus_bernoulli(self.target(n, i), rng)).collect()
    }
}

/// How replicas are initialised.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    /// Values sampled around a scaled profile (heights for the crystal).
    Profile(InitSampler),
    /// Independent slopes from the discrete Gaussian with location `lambda`.
    EquilibriumSlopes { lambda: f64 },
    /// Independent Poisson occupancies.
    Poisson { density: f64 },
    /// Independent Bernoulli occupancies.
    Bernoulli { density: f64 },
}

impl InitialCondition {
    fn label(&self) -> String {
        match self {
            InitialCondition::Profile(_) => "profile".into(),
            InitialCondition::EquilibriumSlopes { .. } => "equilibrium".into(),
            InitialCondition::Poisson { .. } => "poisson".into(),
            InitialCondition::Bernoulli { .. } => "bernoulli".into(),
        }
    }

    /// Rejects combinations that cannot produce a valid state.
    pub fn validate(&self, kind: ProcessKind, n: usize) -> Result<(), ProcessError> {
        if n < 4 {
            return Err(ProcessError::TooSmall { min: 4, got: n });
        }
        let mismatch = || ProcessError::Mismatch { init: self.label(), kind: kind.name().into() };
        match (self, kind) {
            (InitialCondition::Profile(s), ProcessKind::ZeroRange(_)) => {
                for i in 0..n {
                    let v = s.target(n, i);
                    if v < 0.0 {
                        return Err(ProcessError::NegativeOccupancy { x: i as f64 / n as f64, value: v });
                    }
                }
                Ok(())
            }
            (InitialCondition::Profile(s), ProcessKind::SimpleExclusion) => {
                for i in 0..n {
                    let v = s.target(n, i);
                    if !(0.0..=1.0).contains(&v) {
                        return Err(ProcessError::ExclusionOutOfRange { x: i as f64 / n as f64, value: v });
                    }
                }
                Ok(())
            }
            (InitialCondition::Profile(_), ProcessKind::ArrheniusCrystal) => Ok(()),
            (InitialCondition::EquilibriumSlopes { lambda }, ProcessKind::ArrheniusCrystal) => {
                if lambda.is_finite() {
                    Ok(())
                } else {
                    Err(ProcessError::InvalidDensity(*lambda))
                }
            }
            (InitialCondition::Poisson { density }, ProcessKind::ZeroRange(_)) => {
                if *density >= 0.0 && density.is_finite() {
                    Ok(())
                } else {
                    Err(ProcessError::InvalidDensity(*density))
                }
            }
            (InitialCondition::Bernoulli { density }, ProcessKind::SimpleExclusion) => {
                if (0.0..=1.0).contains(density) {
                    Ok(())
                } else {
                    Err(ProcessError::InvalidDensity(*density))
                }
            }
            _ => Err(mismatch()),
        }
    }
}

/// Crystal state from sampled heights (profile) or independent slopes (equilibrium).
pub fn sample_crystal<R: Rng + ?Sized>(
    init: &InitialCondition,
    n: usize,
    k: f64,
    rng: &mut R,
) -> Result<CrystalProcess, ProcessError> {
    init.validate(ProcessKind::ArrheniusCrystal, n)?;
    let z = match init {
        InitialCondition::Profile(s) => {
            let h = s.sample_values(n, rng);
            (0..n).map(|i| h[(i + 1) % n] - h[i]).collect()
        }
        InitialCondition::EquilibriumSlopes { lambda } => {
            let rho = DiscreteGaussian::new(k, *lambda)?;
            (0..n).map(|_| rho.sample(rng)).collect()
        }
        _ => unreachable!("validated above"),
    };
    CrystalProcess::from_slopes(&SlopeConfig::new(z)?, k)
}

pub fn sample_zero_range<R: Rng + ?Sized>(
    init: &InitialCondition,
    n: usize,
    g: ZrRate,
    rng: &mut R,
) -> Result<ZeroRangeProcess, ProcessError> {
    init.validate(ProcessKind::ZeroRange(g), n)?;
    let v = match init {
        InitialCondition::Profile(s) => s.sample_values(n, rng),
        InitialCondition::Poisson { density } => {
            if *density == 0.0 {
                vec![0; n]
            } else {
                let p = Poisson::new(*density).map_err(|_| ProcessError::InvalidDensity(*density))?;
                (0..n).map(|_| p.sample(rng) as i64).collect()
            }
        }
        _ => unreachable!("validated above"),
    };
    ZeroRangeProcess::new(v, g)
}

pub fn sample_exclusion<R: Rng + ?Sized>(
    init: &InitialCondition,
    n: usize,
    rng: &mut R,
) -> Result<ExclusionProcess, ProcessError> {
    init.validate(ProcessKind::SimpleExclusion, n)?;
    let occ = match init {
        InitialCondition::Profile(s) => s.sample_values(n, rng),
        InitialCondition::Bernoulli { density } => {
            (0..n).map(|_| i64::from(rng.random::<f64>() < *density)).collect()
        }
        _ => unreachable!("validated above"),
    };
    ExclusionProcess::new(occ)
}

/// A sampled state of any of the supported processes.
#[derive(Debug, Clone)]
pub enum LatticeState {
    Crystal(CrystalProcess),
    ZeroRange(ZeroRangeProcess),
    Exclusion(ExclusionProcess),
}

impl LatticeState {
    pub fn values(&self) -> &[i64] {
        match self {
            LatticeState::Crystal(p) => p.values(),
            LatticeState::ZeroRange(p) => p.values(),
            LatticeState::Exclusion(p) => p.values(),
        }
    }
}

/// Samples an initial state for `spec` on `n` sites.
pub fn sample_initial<R: Rng + ?Sized>(
    spec: &ProcessSpec,
    init: &InitialCondition,
    n: usize,
    rng: &mut R,
) -> Result<LatticeState, ProcessError> {
    Ok(match spec.kind {
        ProcessKind::ArrheniusCrystal => LatticeState::Crystal(sample_crystal(init, n, spec.params.k, rng)?),
        ProcessKind::ZeroRange(g) => LatticeState::ZeroRange(sample_zero_range(init, n, g, rng)?),
        ProcessKind::SimpleExclusion => LatticeState::Exclusion(sample_exclusion(init, n, rng)?),
    })
}

/// Test function used to probe weak association with a profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestFunction {
    One,
    Sin(u32),
    Cos(u32),
}

impl TestFunction {
    /// Constant plus the first two Fourier modes.
    pub const BATTERY: [TestFunction; 5] = [
        TestFunction::One,
        TestFunction::Sin(1),
        TestFunction::Cos(1),
        TestFunction::Sin(2),
        TestFunction::Cos(2),
    ];

    pub fn eval(self, x: f64) -> f64 {
        match self {
            TestFunction::One => 1.0,
            TestFunction::Sin(m) => (2.0 * PI * m as f64 * x).sin(),
            TestFunction::Cos(m) => (2.0 * PI * m as f64 * x).cos(),
        }
    }
}

/// Deviation of one test function and whether it is within `tolerance`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssociationResult {
    pub test_fn: TestFunction,
    pub deviation: f64,
    pub pass: bool,
}

/// `|N^-1 sum phi(i/N) N^-beta v_i - int phi v0|` for each test function.
pub fn weak_association_test(
    values: &[i64],
    profile: &MacroProfile,
    beta: f64,
    test_fns: &[TestFunction],
    tolerance: f64,
) -> Vec<AssociationResult> {
    let n = values.len();
    let scale = (n as f64).powf(-beta) / n as f64;
    test_fns
        .iter()
        .map(|&phi| {
            let empirical: f64 = values
                .iter()
                .enumerate()
                .map(|(i, &v)| phi.eval(i as f64 / n as f64) * v as f64)
                .sum::<f64>()
                * scale;
            let exact = profile.integrate_against(|x| phi.eval(x));
            let deviation = (empirical - exact).abs();
            AssociationResult { test_fn: phi, deviation, pass: deviation <= tolerance }
        })
        .collect()
}

/// Default crystal height profile with small curvature.
pub fn default_height_profile() -> MacroProfile {
    MacroProfile::new(vec![
        ProfileTerm { basis: Basis::Sin, amplitude: 0.02, frequency: 1, phase: 0.0 },
        ProfileTerm { basis: Basis::Cos, amplitude: 0.005, frequency: 2, phase: 0.0 },
    ])
}

/// Default zero-range occupancy profile `5 sin^2(2 pi x)`.
pub fn default_occupancy_profile() -> MacroProfile {
    MacroProfile::new(vec![ProfileTerm { basis: Basis::SinSquared, amplitude: 5.0, frequency: 1, phase: 0.0 }])
}

/// Parameters for the crystal surface in the rough scaling regime.
pub fn crystal_params(k: f64) -> Result<SystemParams, LatticeError> {
    SystemParams::new(k, 4.0, 2.0)
}
