//! Single-site observables evaluated on integer site values.

use crate::zero_range::ZrRate;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Observable {
    /// The site value itself (curvature or occupancy).
    Value,
    Square,
    /// Arrhenius rate `exp(-2K(1 + w))`.
    ArrheniusRate { k: f64 },
    /// Zero-range jump rate `g(v)`.
    ZeroRangeRate(ZrRate),
    /// `v^(1/4)`.
    FourthRoot,
    /// `v exp(-v)`.
    ValueExpDecay,
}

impl Observable {
    #[inline]
    pub fn eval(&self, v: i64) -> f64 {
        match *self {
            Observable::Value => v as f64,
            Observable::Square => (v * v) as f64,
            Observable::ArrheniusRate { k } => crate::lattice::arrhenius_rate(v, k),
            Observable::ZeroRangeRate(g) => g.eval(v.max(0)),
            Observable::FourthRoot => (v.max(0) as f64).sqrt().sqrt(),
            Observable::ValueExpDecay => v as f64 * (-(v as f64)).exp(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Observable::Value => "value",
            Observable::Square => "square",
            Observable::ArrheniusRate { .. } => "rate",
            Observable::ZeroRangeRate(_) => "rate",
            Observable::FourthRoot => "fourth_root",
            Observable::ValueExpDecay => "value_exp_decay",
        }
    }
}
