//! Periodic height, slope and curvature configurations of the crystal surface,
//! together with jump operators, energies and Arrhenius rates.

use thiserror::Error;

/// Largest exponent accepted before `exp` would overflow an `f64`.
pub const MAX_RATE_EXPONENT: f64 = 700.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("lattice must have at least {min} sites, got {got}")]
    TooSmall { min: usize, got: usize },
    #[error("sites {i} and {j} are not periodic neighbours on a ring of {n}")]
    NotNeighbours { i: usize, j: usize, n: usize },
    #[error("site {site} out of range for ring of {n}")]
    SiteOutOfRange { site: usize, n: usize },
    #[error("K must be positive and finite, got {0}")]
    InvalidK(f64),
    #[error("curvature {w} gives an Arrhenius exponent above {MAX_RATE_EXPONENT} at K={k}")]
    RateOverflow { w: i64, k: f64 },
}

/// Reduces a signed index onto a ring of `n` sites.
#[inline]
pub fn wrap(i: isize, n: usize) -> usize {
    i.rem_euclid(n as isize) as usize
}

/// Direction of a nearest-neighbour jump.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Left,
    Right,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::Left, Direction::Right];

    #[inline]
    pub fn index(self) -> usize {
        match self {
            Direction::Left => 0,
            Direction::Right => 1,
        }
    }

    #[inline]
    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Direction::Left
        } else {
            Direction::Right
        }
    }

    #[inline]
    pub fn step(self) -> isize {
        match self {
            Direction::Left => -1,
            Direction::Right => 1,
        }
    }
}

/// Inverse temperature and scaling exponents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub k: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl SystemParams {
    pub fn new(k: f64, alpha: f64, beta: f64) -> Result<Self, LatticeError> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(LatticeError::InvalidK(k));
        }
        Ok(Self { k, alpha, beta })
    }

    /// Microscopic time corresponding to macroscopic `t` on a ring of `n` sites.
    pub fn micro_time(&self, n: usize, t_macro: f64) -> f64 {
        (n as f64).powf(self.alpha) * t_macro
    }
}

/// Log of the Arrhenius rate, `-2K(1 + w)`.
#[inline]
pub fn log_arrhenius_rate(w: i64, k: f64) -> f64 {
    -2.0 * k * (1.0 + w as f64)
}

/// Arrhenius rate `exp(-2K - 2Kw)`; equal for left and right jumps out of a site.
#[inline]
pub fn arrhenius_rate(w: i64, k: f64) -> f64 {
    log_arrhenius_rate(w, k).exp()
}

/// Checks that `w` is not so negative that its rate overflows.
pub fn check_rate_bound(w: i64, k: f64) -> Result<(), LatticeError> {
    if log_arrhenius_rate(w, k) > MAX_RATE_EXPONENT {
        Err(LatticeError::RateOverflow { w, k })
    } else {
        Ok(())
    }
}

/// Most negative curvature whose rate stays finite at inverse temperature `k`.
pub fn min_safe_curvature(k: f64) -> i64 {
    (-(MAX_RATE_EXPONENT / (2.0 * k)) - 1.0).ceil() as i64
}

fn check_len(n: usize, min: usize) -> Result<(), LatticeError> {
    if n < min {
        Err(LatticeError::TooSmall { min, got: n })
    } else {
        Ok(())
    }
}

/// Column heights on a ring.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HeightConfig {
    h: Vec<i64>,
}

impl HeightConfig {
    pub fn new(h: Vec<i64>) -> Result<Self, LatticeError> {
        check_len(h.len(), 2)?;
        Ok(Self { h })
    }

    pub fn n_sites(&self) -> usize {
        self.h.len()
    }

    pub fn as_slice(&self) -> &[i64] {
        &self.h
    }

    /// Moves one particle from column `i` onto neighbouring column `j`.
    pub fn apply_jump(&self, i: usize, j: usize) -> Result<Self, LatticeError> {
        let n = self.n_sites();
        if i >= n {
            return Err(LatticeError::SiteOutOfRange { site: i, n });
        }
        if j >= n {
            return Err(LatticeError::SiteOutOfRange { site: j, n });
        }
        if j != wrap(i as isize + 1, n) && j != wrap(i as isize - 1, n) {
            return Err(LatticeError::NotNeighbours { i, j, n });
        }
        let mut h = self.h.clone();
        h[i] -= 1;
        h[j] += 1;
        Ok(Self { h })
    }

    /// Removes a particle from column `i` without placing it anywhere.
    pub fn detach(&self, i: usize) -> Self {
        let mut h = self.h.clone();
        h[i] -= 1;
        Self { h }
    }

    pub fn slopes(&self) -> SlopeConfig {
        let n = self.n_sites();
        let z = (0..n).map(|i| self.h[wrap(i as isize + 1, n)] - self.h[i]).collect();
        SlopeConfig { z }
    }
}

/// Slopes `z_i = h_{i+1} - h_i` on a ring.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SlopeConfig {
    z: Vec<i64>,
}

impl SlopeConfig {
    pub fn new(z: Vec<i64>) -> Result<Self, LatticeError> {
        check_len(z.len(), 3)?;
        Ok(Self { z })
    }

    pub fn n_sites(&self) -> usize {
        self.z.len()
    }

    pub fn as_slice(&self) -> &[i64] {
        &self.z
    }

    pub fn curvatures(&self) -> CurvatureConfig {
        let n = self.n_sites();
        let w = (0..n).map(|i| self.z[i] - self.z[wrap(i as isize - 1, n)]).collect();
        CurvatureConfig { w }
    }

    /// `H(z) = sum of z_i^2`.
    pub fn hamiltonian(&self) -> f64 {
        self.z.iter().map(|&z| (z * z) as f64).sum()
    }

    /// Unnormalised log density `-K H(z)` of the product Gibbs measure.
    pub fn gibbs_log_density(&self, k: f64) -> f64 {
        -k * self.hamiltonian()
    }

    /// `(S0, S1 mod N)` with `S0 = sum z_k` and `S1 = sum k z_k`, sites counted from 1.
    pub fn conserved_quantities(&self) -> ConservedQuantities {
        let n = self.n_sites() as i64;
        let s0 = self.z.iter().sum();
        let s1: i64 = self.z.iter().enumerate().map(|(k, &z)| (k as i64 + 1) * z).sum();
        ConservedQuantities { s0, s1_raw: s1, s1_mod_n: s1.rem_euclid(n) }
    }

    /// Slope configuration after a particle jumps from column `i` in `dir`.
    pub fn apply_jump(&self, i: usize, dir: Direction) -> Self {
        let mut z = self.z.clone();
        slope_jump_in_place(&mut z, i, dir);
        Self { z }
    }
}

/// Applies a column jump to a slope array in place.
#[inline]
pub fn slope_jump_in_place(z: &mut [i64], i: usize, dir: Direction) {
    let n = z.len();
    let i = i as isize;
    match dir {
        Direction::Right => {
            z[wrap(i - 1, n)] -= 1;
            z[wrap(i, n)] += 2;
            z[wrap(i + 1, n)] -= 1;
        }
        Direction::Left => {
            z[wrap(i - 2, n)] += 1;
            z[wrap(i - 1, n)] -= 2;
            z[wrap(i, n)] += 1;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConservedQuantities {
    pub s0: i64,
    pub s1_raw: i64,
    pub s1_mod_n: i64,
}

/// Curvatures `w_i = z_i - z_{i-1}` on a ring.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CurvatureConfig {
    w: Vec<i64>,
}

/// Curvature increments of a right jump across bond `(i, i+1)` at sites `i-1..=i+2`.
pub const RIGHT_STENCIL: [i64; 4] = [-1, 3, -3, 1];

impl CurvatureConfig {
    pub fn new(w: Vec<i64>) -> Result<Self, LatticeError> {
        check_len(w.len(), 4)?;
        Ok(Self { w })
    }

    pub fn n_sites(&self) -> usize {
        self.w.len()
    }

    pub fn as_slice(&self) -> &[i64] {
        &self.w
    }

    /// `Right` moves a particle from `i` to `i+1`, `Left` from `i+1` to `i`;
    /// both touch sites `i-1..=i+2`.
    pub fn apply_jump(&self, i: usize, dir: Direction) -> Result<Self, LatticeError> {
        let n = self.n_sites();
        if i >= n {
            return Err(LatticeError::SiteOutOfRange { site: i, n });
        }
        let mut w = self.w.clone();
        bond_jump_in_place(&mut w, i, dir);
        Ok(Self { w })
    }

    /// Drift of `w_j` under the generator:
    /// `r(w_{j-2}) - 4r(w_{j-1}) + 6r(w_j) - 4r(w_{j+1}) + r(w_{j+2})`.
    pub fn generator_drift(&self, j: usize, k: f64) -> f64 {
        const COEFF: [f64; 5] = [1.0, -4.0, 6.0, -4.0, 1.0];
        let n = self.n_sites();
        COEFF
            .iter()
            .enumerate()
            .map(|(o, c)| c * arrhenius_rate(self.w[wrap(j as isize + o as isize - 2, n)], k))
            .sum()
    }

    pub fn total(&self) -> i64 {
        self.w.iter().sum()
    }
}

/// Applies the bond stencil at `(i, i+1)` in place.
#[inline]
pub fn bond_jump_in_place(w: &mut [i64], i: usize, dir: Direction) {
    let n = w.len();
    let sign = match dir {
        Direction::Right => 1,
        Direction::Left => -1,
    };
    for (o, d) in RIGHT_STENCIL.iter().enumerate() {
        w[wrap(i as isize + o as isize - 1, n)] += sign * d;
    }
}

/// Applies the curvature change of a particle leaving column `i` in `dir`.
/// Returns the first of the four touched sites.
#[inline]
pub fn column_jump_in_place(w: &mut [i64], i: usize, dir: Direction) -> usize {
    let n = w.len();
    match dir {
        Direction::Right => {
            bond_jump_in_place(w, i, Direction::Right);
            wrap(i as isize - 1, n)
        }
        Direction::Left => {
            let b = wrap(i as isize - 1, n);
            bond_jump_in_place(w, b, Direction::Left);
            wrap(i as isize - 2, n)
        }
    }
}
