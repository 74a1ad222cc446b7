//! Invariant family `nu[phi](n) = phi^n / (g(n)! Z(phi))` of the zero-range process
//! with its mean map, inverse and observable expectations.

use thiserror::Error;

const TAIL_RATIO: f64 = 1e-14;
const MAX_CAP: usize = 1 << 22;
const MAX_BISECTION_STEPS: usize = 400;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ZeroRangeError {
    #[error("fugacity must be finite and nonnegative, got {0}")]
    InvalidFugacity(f64),
    #[error("density must be finite and nonnegative, got {0}")]
    InvalidDensity(f64),
    #[error("series did not converge below cap {cap}; try a cap above {suggested}")]
    Truncation { cap: usize, suggested: usize },
    #[error("density {0} is outside the achievable range")]
    Unreachable(f64),
    #[error("observable expectation diverges: {0}")]
    Divergent(String),
    #[error("negative occupancy {0}")]
    NegativeOccupancy(i64),
}

/// Jump-rate rule `g` with `g(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ZrRate {
    /// `g(k) = k`: independent walkers.
    Linear,
    /// `g(k) = k + k^(1/4)`.
    LinearPlusFourthRoot,
}

impl ZrRate {
    #[inline]
    pub fn eval(self, k: i64) -> f64 {
        debug_assert!(k >= 0);
        if k <= 0 {
            return 0.0;
        }
        let kf = k as f64;
        match self {
            ZrRate::Linear => kf,
            ZrRate::LinearPlusFourthRoot => kf + kf.sqrt().sqrt(),
        }
    }

    pub fn checked(self, k: i64) -> Result<f64, ZeroRangeError> {
        if k < 0 {
            Err(ZeroRangeError::NegativeOccupancy(k))
        } else {
            Ok(self.eval(k))
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ZrRate::Linear => "linear",
            ZrRate::LinearPlusFourthRoot => "linear_plus_fourth_root",
        }
    }
}

impl std::str::FromStr for ZrRate {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "linear" => Ok(ZrRate::Linear),
            "linear_plus_fourth_root" => Ok(ZrRate::LinearPlusFourthRoot),
            other => Err(format!("unknown zero-range rate '{other}'")),
        }
    }
}

/// `g(k)` for the default rule `k + k^(1/4)`.
pub fn zero_range_rate(k: i64) -> Result<f64, ZeroRangeError> {
    ZrRate::LinearPlusFourthRoot.checked(k)
}

/// The measure `nu[phi]`, stored as normalised probabilities on `0..len`.
#[derive(Debug, Clone)]
pub struct ZrFamily {
    g: ZrRate,
    phi: f64,
    probs: Vec<f64>,
}

impl ZrFamily {
    pub fn new(g: ZrRate, phi: f64) -> Result<Self, ZeroRangeError> {
        Self::with_start_cap(g, phi, 8 * (1 + phi.ceil() as usize))
    }

    /// Builds the table, extending the cap until the last term is below the tail ratio.
    pub fn with_start_cap(g: ZrRate, phi: f64, start_cap: usize) -> Result<Self, ZeroRangeError> {
        if !(phi >= 0.0 && phi.is_finite()) {
            return Err(ZeroRangeError::InvalidFugacity(phi));
        }
        if phi == 0.0 {
            return Ok(Self { g, phi, probs: vec![1.0] });
        }
        let mut weights = vec![1.0];
        let mut total = 1.0;
        let mut term = 1.0;
        let mut cap = start_cap.max(2);
        let mut n = 0usize;
        loop {
            while n + 1 < cap {
                n += 1;
                term *= phi / g.eval(n as i64);
                weights.push(term);
                total += term;
            }
            if !total.is_finite() {
                return Err(ZeroRangeError::Truncation { cap, suggested: cap });
            }
            // past the mode the ratio phi/g(n) < 1, so the tail is bounded geometrically
            let ratio = phi / g.eval(n as i64 + 1);
            if ratio < 1.0 && term / (1.0 - ratio) < TAIL_RATIO * total {
                break;
            }
            if cap >= MAX_CAP {
                return Err(ZeroRangeError::Truncation { cap, suggested: 2 * cap });
            }
            cap *= 2;
        }
        let probs = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { g, phi, probs })
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn rate(&self) -> ZrRate {
        self.g
    }

    pub fn cap(&self) -> usize {
        self.probs.len()
    }

    pub fn pmf(&self, n: i64) -> f64 {
        if n < 0 {
            return 0.0;
        }
        self.probs.get(n as usize).copied().unwrap_or(0.0)
    }

    pub fn mean(&self) -> f64 {
        self.expectation(|n| n as f64)
    }

    pub fn expectation(&self, f: impl Fn(i64) -> f64) -> f64 {
        self.probs.iter().enumerate().map(|(n, p)| f(n as i64) * p).sum()
    }
}

/// `v(phi)`, the mean occupancy under `nu[phi]`.
pub fn zr_mean(g: ZrRate, phi: f64) -> Result<f64, ZeroRangeError> {
    Ok(ZrFamily::new(g, phi)?.mean())
}

/// Inverse of `zr_mean` by bisection; residual below `1e-10`.
pub fn zr_phi_of_v(g: ZrRate, v: f64) -> Result<f64, ZeroRangeError> {
    if !(v >= 0.0 && v.is_finite()) {
        return Err(ZeroRangeError::InvalidDensity(v));
    }
    if v == 0.0 {
        return Ok(0.0);
    }
    // g(k) >= k, so v(phi) <= phi and the root lies above v
    let mut lo = 0.0;
    let mut hi = v.max(1.0);
    let mut doublings = 0;
    while zr_mean(g, hi)? < v {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 200 {
            return Err(ZeroRangeError::Unreachable(v));
        }
    }
    for _ in 0..MAX_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let m = zr_mean(g, mid)?;
        if (m - v).abs() < 1e-13 * v.max(1.0) {
            return Ok(mid);
        }
        if m < v {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `f_hat(v) = nu[phi(v)](f)`.
pub fn zr_f_hat(g: ZrRate, v: f64, f: impl Fn(i64) -> f64) -> Result<f64, ZeroRangeError> {
    let fam = ZrFamily::new(g, zr_phi_of_v(g, v)?)?;
    let value = fam.expectation(&f);
    if !value.is_finite() {
        return Err(ZeroRangeError::Divergent(format!("non-finite expectation at v={v}")));
    }
    let last = fam.cap() as i64 - 1;
    let edge = (f(last) * fam.pmf(last)).abs();
    if edge > 1e-12 * value.abs().max(1.0) {
        return Err(ZeroRangeError::Divergent(format!(
            "edge term {edge:e} at n={last} does not vanish"
        )));
    }
    Ok(value)
}
