//! Experiment configuration: a flat `key = value` file with a fixed schema.
//!
//! Lines are `key = value`; `#` starts a comment; lists are comma separated.
//! Unknown or repeated keys are rejected.
//!
//! | key | meaning | default |
//! |---|---|---|
//! | `process` | `arrhenius`, `zero_range` or `exclusion` | required |
//! | `zr_rate` | `linear_plus_fourth_root` or `linear` | `linear_plus_fourth_root` |
//! | `K` | crystal bond strength | `3` |
//! | `alpha` | time scaling exponent | `4` (crystal), `2` otherwise |
//! | `beta` | height scaling exponent | `2` (crystal), `0` otherwise |
//! | `init` | `profile`, `equilibrium`, `poisson` or `bernoulli` | `profile` |
//! | `profile` | terms `basis:amp[:freq[:phase]]` joined by `+` | process default |
//! | `init_lambda` | slope location for `equilibrium` | `0` |
//! | `init_density` | density for `poisson` / `bernoulli` | `1` |
//! | `N_ladder` | increasing lattice sizes | required |
//! | `t_list` | increasing macroscopic sample times | required |
//! | `Delta` | macroscopic time-average window | none |
//! | `n_replicas` | replicas per lattice size | required |
//! | `seed` | master seed | `0` |
//! | `epsilon_grid` | candidate window half-widths | `0.01,0.02,0.04,0.08` |
//! | `observables` | names from `value, square, rate, fourth_root, value_exp_decay` | `value,square,rate` |
//! | `pmf_samples` | replicas kept for per-site pmfs | `1000` |
//! | `event_budget` | events per replica before giving up | `1000000000` |
//! | `output_dir` | output directory | `out` |

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::estimators::{centred_window_len, DEFAULT_PMF_SAMPLES};
use crate::kmc::DEFAULT_EVENT_BUDGET;
use crate::lattice::SystemParams;
use crate::observable::Observable;
use crate::processes::{
    default_height_profile, default_occupancy_profile, InitSampler, InitialCondition, MacroProfile,
    ProcessKind, ProcessSpec,
};
use crate::runner::EnsemblePlan;
use crate::zero_range::ZrRate;

const KEYS: [&str; 19] = [
    "process",
    "zr_rate",
    "K",
    "alpha",
    "beta",
    "init",
    "profile",
    "init_lambda",
    "init_density",
    "N_ladder",
    "t_list",
    "Delta",
    "n_replicas",
    "seed",
    "epsilon_grid",
    "observables",
    "pmf_samples",
    "event_budget",
    "output_dir",
];

/// Smallest lattice accepted by the configuration.
pub const MIN_SITES: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice")]
    DuplicateKey { line: usize, key: String },
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
}

fn invalid(key: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key, reason: reason.into() }
}

/// A validated experiment configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub spec: ProcessSpec,
    pub init: InitialCondition,
    /// The profile as written, for the record.
    pub profile: Option<MacroProfile>,
    pub n_ladder: Vec<usize>,
    pub t_list: Vec<f64>,
    pub delta: Option<f64>,
    pub n_replicas: u64,
    pub seed: u64,
    pub epsilon_grid: Vec<f64>,
    pub observables: Vec<String>,
    pub pmf_samples: u64,
    pub event_budget: u64,
    pub output_dir: PathBuf,
}

fn parse_one<T: FromStr>(key: &'static str, v: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    v.trim().parse().map_err(|e: T::Err| invalid(key, format!("`{v}`: {e}")))
}

fn parse_list<T: FromStr>(key: &'static str, v: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    v.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse_one(key, s)).collect()
}

impl ExperimentConfig {
    /// Parses and validates the text of a configuration file.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map: BTreeMap<&'static str, String> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::Syntax { line: idx + 1, text: raw.to_string() })?;
            let k = k.trim();
            let key = KEYS
                .iter()
                .find(|&&known| known == k)
                .ok_or_else(|| ConfigError::UnknownKey { line: idx + 1, key: k.to_string() })?;
            if map.insert(key, v.trim().to_string()).is_some() {
                return Err(ConfigError::DuplicateKey { line: idx + 1, key: k.to_string() });
            }
        }
        Self::from_map(&map)
    }

    fn from_map(map: &BTreeMap<&'static str, String>) -> Result<Self, ConfigError> {
        let get = |k: &'static str| map.get(k).map(String::as_str);
        let required = |k: &'static str| get(k).ok_or(ConfigError::Missing(k));

        let kind = match required("process")? {
            "arrhenius" => ProcessKind::ArrheniusCrystal,
            "zero_range" => {
                let g: ZrRate = get("zr_rate")
                    .unwrap_or("linear_plus_fourth_root")
                    .parse()
                    .map_err(|e: String| invalid("zr_rate", e))?;
                ProcessKind::ZeroRange(g)
            }
            "exclusion" => ProcessKind::SimpleExclusion,
            other => return Err(invalid("process", format!("unknown process `{other}`"))),
        };
        if get("zr_rate").is_some() && !matches!(kind, ProcessKind::ZeroRange(_)) {
            return Err(invalid("zr_rate", "only applies to zero_range"));
        }
        let crystal = kind == ProcessKind::ArrheniusCrystal;
        let k: f64 = get("K").map_or(Ok(3.0), |v| parse_one("K", v))?;
        if !(k > 0.0 && k.is_finite()) {
            return Err(invalid("K", "must be positive"));
        }
        let alpha = get("alpha").map_or(Ok(if crystal { 4.0 } else { 2.0 }), |v| parse_one("alpha", v))?;
        let beta = get("beta").map_or(Ok(if crystal { 2.0 } else { 0.0 }), |v| parse_one("beta", v))?;
        let params = SystemParams::new(k, alpha, beta).map_err(|e| invalid("K", e.to_string()))?;
        let spec = ProcessSpec { kind, params };

        let profile = get("profile")
            .map(|p| p.parse::<MacroProfile>().map_err(|e| invalid("profile", e.to_string())))
            .transpose()?;
        let init = match get("init").unwrap_or("profile") {
            "profile" => {
                let profile = profile.clone().unwrap_or_else(|| {
                    if crystal {
                        default_height_profile()
                    } else {
                        default_occupancy_profile()
                    }
                });
                InitialCondition::Profile(InitSampler { profile, beta })
            }
            "equilibrium" => InitialCondition::EquilibriumSlopes {
                lambda: get("init_lambda").map_or(Ok(0.0), |v| parse_one("init_lambda", v))?,
            },
            "poisson" => InitialCondition::Poisson {
                density: get("init_density").map_or(Ok(1.0), |v| parse_one("init_density", v))?,
            },
            "bernoulli" => InitialCondition::Bernoulli {
                density: get("init_density").map_or(Ok(1.0), |v| parse_one("init_density", v))?,
            },
            other => return Err(invalid("init", format!("unknown initial condition `{other}`"))),
        };

        let n_ladder: Vec<usize> = parse_list("N_ladder", required("N_ladder")?)?;
        let t_list: Vec<f64> = parse_list("t_list", required("t_list")?)?;
        let delta = get("Delta").map(|v| parse_one("Delta", v)).transpose()?;
        let n_replicas = parse_one("n_replicas", required("n_replicas")?)?;
        let seed = get("seed").map_or(Ok(0), |v| parse_one("seed", v))?;
        let epsilon_grid = get("epsilon_grid").map_or(Ok(vec![0.01, 0.02, 0.04, 0.08]), |v| parse_list("epsilon_grid", v))?;
        let observables: Vec<String> = get("observables")
            .unwrap_or("value,square,rate")
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        let pmf_samples = get("pmf_samples").map_or(Ok(DEFAULT_PMF_SAMPLES), |v| parse_one("pmf_samples", v))?;
        let event_budget = get("event_budget").map_or(Ok(DEFAULT_EVENT_BUDGET), |v| parse_one("event_budget", v))?;
        let output_dir = PathBuf::from(get("output_dir").unwrap_or("out"));

        let cfg = Self {
            spec,
            init,
            profile,
            n_ladder,
            t_list,
            delta,
            n_replicas,
            seed,
            epsilon_grid,
            observables,
            pmf_samples,
            event_budget,
            output_dir,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every constraint that does not need a simulation.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_ladder.is_empty() {
            return Err(invalid("N_ladder", "empty"));
        }
        if self.n_ladder.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("N_ladder", "must be strictly increasing"));
        }
        if let Some(&n) = self.n_ladder.iter().find(|&&n| n < MIN_SITES) {
            return Err(invalid("N_ladder", format!("{n} is below the minimum of {MIN_SITES} sites")));
        }
        if self.t_list.is_empty() {
            return Err(invalid("t_list", "empty"));
        }
        if self.t_list.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(invalid("t_list", "times must be finite and nonnegative"));
        }
        if self.t_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("t_list", "must be strictly increasing"));
        }
        if let Some(d) = self.delta {
            if !(d > 0.0 && d.is_finite()) {
                return Err(invalid("Delta", "must be positive"));
            }
            let gap = self.t_list.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
            if d > gap {
                return Err(invalid("Delta", format!("{d} exceeds the smallest gap {gap} between sample times")));
            }
        }
        if self.n_replicas < 1 {
            return Err(invalid("n_replicas", "must be at least 1"));
        }
        if self.epsilon_grid.iter().any(|e| !(*e > 0.0 && *e <= 0.5)) {
            return Err(invalid("epsilon_grid", "values must lie in (0, 0.5]"));
        }
        if self.event_budget == 0 {
            return Err(invalid("event_budget", "must be positive"));
        }
        for name in &self.observables {
            self.spec.observable(name).map_err(|e| invalid("observables", e))?;
        }
        for &n in &self.n_ladder {
            self.init.validate(self.spec.kind, n).map_err(|e| invalid("init", e.to_string()))?;
        }
        Ok(())
    }

    /// Canonical `key = value` text; everything that affects results and nothing else.
    pub fn canonical(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",");
        let mut lines = vec![
            format!("process = {}", self.spec.kind.name()),
            format!("K = {:?}", self.spec.params.k),
            format!("alpha = {:?}", self.spec.params.alpha),
            format!("beta = {:?}", self.spec.params.beta),
        ];
        if let ProcessKind::ZeroRange(g) = self.spec.kind {
            lines.push(format!("zr_rate = {}", g.name()));
        }
        match &self.init {
            InitialCondition::Profile(s) => {
                lines.push("init = profile".into());
                lines.push(format!("profile = {}", s.profile));
            }
            InitialCondition::EquilibriumSlopes { lambda } => {
                lines.push("init = equilibrium".into());
                lines.push(format!("init_lambda = {lambda:?}"));
            }
            InitialCondition::Poisson { density } => {
                lines.push("init = poisson".into());
                lines.push(format!("init_density = {density:?}"));
            }
            InitialCondition::Bernoulli { density } => {
                lines.push("init = bernoulli".into());
                lines.push(format!("init_density = {density:?}"));
            }
        }
        lines.push(format!(
            "N_ladder = {}",
            self.n_ladder.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(",")
        ));
        lines.push(format!("t_list = {}", join(&self.t_list)));
        if let Some(d) = self.delta {
            lines.push(format!("Delta = {d:?}"));
        }
        lines.push(format!("n_replicas = {}", self.n_replicas));
        lines.push(format!("seed = {}", self.seed));
        lines.push(format!("epsilon_grid = {}", join(&self.epsilon_grid)));
        lines.push(format!("observables = {}", self.observables.join(",")));
        lines.push(format!("pmf_samples = {}", self.pmf_samples));
        lines.push(format!("event_budget = {}", self.event_budget));
        lines.join("\n") + "\n"
    }

    /// SHA-256 of the canonical form, hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn observables(&self) -> Vec<Observable> {
        self.observables
            .iter()
            .map(|n| self.spec.observable(n).expect("validated"))
            .collect()
    }

    /// Observables of a plan: `value` and `square` first, then the configured extras.
    pub fn plan_observables(&self) -> Vec<Observable> {
        let mut obs = vec![Observable::Value, Observable::Square];
        for o in self.observables() {
            if !obs.contains(&o) {
                obs.push(o);
            }
        }
        obs
    }

    /// Simulation plan for lattice size `n`.
    pub fn plan(&self, n: usize) -> EnsemblePlan {
        let params = self.spec.params;
        let mut plan = EnsemblePlan::new(self.spec, self.init.clone(), n, self.n_replicas, self.seed);
        plan.sample_times = self.t_list.iter().map(|&t| params.micro_time(n, t)).collect();
        plan.delta = self.delta.map(|d| params.micro_time(n, d));
        plan.observables = self.plan_observables();
        plan.window_lengths = self.epsilon_grid.iter().map(|&e| centred_window_len(n, e)).collect();
        plan.pmf_samples = self.pmf_samples;
        plan.event_budget = self.event_budget;
        plan
    }
}
