//! Discrete Gaussian family on the integers, its moment map and inverse,
//! the two-parameter curvature family and its average over the location.

use rand::Rng;
use thiserror::Error;

/// Smallest inverse temperature accepted by the truncated sums.
pub const MIN_K: f64 = 0.5;
/// Default number of nodes of the periodic rule used for the location average.
pub const DEFAULT_QUADRATURE_POINTS: usize = 64;
/// Bisection tolerance on the location parameter.
pub const LAMBDA_TOLERANCE: f64 = 1e-13;
const MAX_BISECTION_STEPS: usize = 200;
const MAX_EXPONENT: f64 = 700.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GibbsError {
    #[error("K={0} is below the supported minimum {MIN_K}")]
    KTooSmall(f64),
    #[error("moment map is not increasing on [{lo}, {hi}] (values {u_lo}, {u_hi}, target {target})")]
    NonMonotone { lo: f64, hi: f64, u_lo: f64, u_hi: f64, target: f64 },
    #[error("exponential moment overflows (log value {0})")]
    Overflow(f64),
    #[error("observable is not summable against the curvature window: {0}")]
    Divergent(String),
    #[error("quadrature needs at least one node")]
    NoQuadratureNodes,
}

fn check_k(k: f64) -> Result<(), GibbsError> {
    if k >= MIN_K && k.is_finite() {
        Ok(())
    } else {
        Err(GibbsError::KTooSmall(k))
    }
}

/// Splits `x` into its nearest integer and a remainder in `[-1/2, 1/2]`.
#[inline]
fn split(x: f64) -> (i64, f64) {
    let base = x.round();
    (base as i64, x - base)
}

/// Truncated theta sum `Z_K(lambda) = sum_m exp(-K (m - lambda)^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaNormalizer {
    k: f64,
    radius: i64,
}

impl ThetaNormalizer {
    pub fn new(k: f64) -> Result<Self, GibbsError> {
        check_k(k)?;
        Ok(Self { k, radius: truncation_radius(k) })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn radius(&self) -> i64 {
        self.radius
    }

    /// Sum over the remainder window, symmetric in `m -> -m` so that `Z(-l) == Z(l)` exactly.
    fn reduced(&self, f: f64) -> (f64, f64) {
        let k = self.k;
        let mut z = 0.0;
        let mut first = 0.0;
        for m in (1..=self.radius).rev() {
            let m = m as f64;
            let a = (-k * (m - f) * (m - f)).exp();
            let b = (-k * (m + f) * (m + f)).exp();
            z += a + b;
            first += m * a - m * b;
        }
        z += (-k * f * f).exp();
        (z, first)
    }

    pub fn z(&self, lambda: f64) -> f64 {
        self.reduced(split(lambda).1).0
    }

    pub fn ln_z(&self, lambda: f64) -> f64 {
        self.z(lambda).ln()
    }

    /// Mean of the normalised weights, `u_D(lambda)`.
    pub fn mean(&self, lambda: f64) -> f64 {
        let (base, f) = split(lambda);
        let (z, first) = self.reduced(f);
        base as f64 + first / z
    }
}

/// `ceil(sqrt(45/K)) + 2`, enough for `exp(-K M^2) < 1e-18`.
pub fn truncation_radius(k: f64) -> i64 {
    (45.0 / k).sqrt().ceil() as i64 + 2
}

fn curvature_radius(k: f64) -> i64 {
    (90.0 / k).sqrt().ceil() as i64 + 2
}

/// `Z_K(lambda)`.
pub fn theta_z(k: f64, lambda: f64) -> Result<f64, GibbsError> {
    Ok(ThetaNormalizer::new(k)?.z(lambda))
}

/// First moment of the discrete Gaussian with location `lambda`.
pub fn u_d(k: f64, lambda: f64) -> Result<f64, GibbsError> {
    Ok(ThetaNormalizer::new(k)?.mean(lambda))
}

/// Periodic part of the moment map, `u_D(lambda) - lambda`.
pub fn u_o(k: f64, lambda: f64) -> Result<f64, GibbsError> {
    let theta = ThetaNormalizer::new(k)?;
    let (_, f) = split(lambda);
    let (z, first) = theta.reduced(f);
    Ok(first / z - f)
}

/// Inverse of the moment map by bisection.
pub fn lambda_d(k: f64, u: f64) -> Result<f64, GibbsError> {
    let theta = ThetaNormalizer::new(k)?;
    lambda_d_with(&theta, u)
}

/// Inverse of the moment map for a prepared normaliser.
pub fn lambda_d_with(theta: &ThetaNormalizer, u: f64) -> Result<f64, GibbsError> {
    let (base, r) = split(u);
    Ok(base as f64 + reduced_inverse(theta, r)?)
}

fn reduced_inverse(theta: &ThetaNormalizer, r: f64) -> Result<f64, GibbsError> {
    let (mut lo, mut hi) = (r - 1.0, r + 1.0);
    let (u_lo, u_hi) = (theta.mean(lo), theta.mean(hi));
    if !(u_lo <= r && r <= u_hi) {
        return Err(GibbsError::NonMonotone { lo, hi, u_lo, u_hi, target: r });
    }
    for _ in 0..MAX_BISECTION_STEPS {
        if hi - lo <= LAMBDA_TOLERANCE {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if theta.mean(mid) < r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Periodic part of the inverse moment map, `lambda_D(u) - u`.
pub fn lambda_o(k: f64, u: f64) -> Result<f64, GibbsError> {
    let theta = ThetaNormalizer::new(k)?;
    let (_, r) = split(u);
    Ok(reduced_inverse(&theta, r)? - r)
}

/// Confirms that `u_D` increases strictly on a grid of the given spacing over one period.
pub fn verify_monotone(k: f64, spacing: f64) -> Result<(), GibbsError> {
    let theta = ThetaNormalizer::new(k)?;
    let steps = (1.0 / spacing).ceil() as usize;
    let mut prev = theta.mean(-0.5);
    for s in 1..=steps {
        let lo = -0.5 + (s - 1) as f64 * spacing;
        let hi = -0.5 + s as f64 * spacing;
        let cur = theta.mean(hi);
        if cur <= prev {
            return Err(GibbsError::NonMonotone { lo, hi, u_lo: prev, u_hi: cur, target: cur });
        }
        prev = cur;
    }
    Ok(())
}

/// A probability paired with its logarithm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prob {
    pub p: f64,
    pub ln_p: f64,
}

impl Prob {
    fn from_ln(ln_p: f64) -> Self {
        Self { p: ln_p.exp(), ln_p }
    }
}

/// Discrete Gaussian `rho_K[lambda]`.
#[derive(Debug, Clone, Copy)]
pub struct DiscreteGaussian {
    theta: ThetaNormalizer,
    lambda: f64,
    ln_z: f64,
}

impl DiscreteGaussian {
    pub fn new(k: f64, lambda: f64) -> Result<Self, GibbsError> {
        let theta = ThetaNormalizer::new(k)?;
        Ok(Self::with_normalizer(theta, lambda))
    }

    pub fn with_normalizer(theta: ThetaNormalizer, lambda: f64) -> Self {
        Self { theta, lambda, ln_z: theta.ln_z(lambda) }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn pmf(&self, n: i64) -> Prob {
        let d = n as f64 - self.lambda;
        Prob::from_ln(-self.theta.k * d * d - self.ln_z)
    }

    /// Integers carrying all but a negligible tail of the mass.
    pub fn support(&self) -> std::ops::RangeInclusive<i64> {
        let (base, _) = split(self.lambda);
        base - self.theta.radius..=base + self.theta.radius
    }

    pub fn mean(&self) -> f64 {
        self.theta.mean(self.lambda)
    }

    /// Inverse-CDF draw over the truncation window.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let support = self.support();
        let last = *support.end();
        for n in support {
            acc += self.pmf(n).p;
            if u < acc {
                return n;
            }
        }
        last
    }
}

/// Two-parameter curvature family `mu_K[omega, lambda]`: law of `Z - Z'` with
/// `Z ~ rho_K[lambda]` and `Z' ~ rho_K[lambda - omega]` independent.
#[derive(Debug, Clone, Copy)]
pub struct CurvatureFamily {
    k: f64,
    omega: f64,
    lambda: f64,
    theta: ThetaNormalizer,
    theta2: ThetaNormalizer,
    ln_norm: f64,
}

impl CurvatureFamily {
    pub fn new(k: f64, omega: f64, lambda: f64) -> Result<Self, GibbsError> {
        let theta = ThetaNormalizer::new(k)?;
        let theta2 = ThetaNormalizer::new(2.0 * k)?;
        let ln_norm = theta.ln_z(lambda - omega) + theta.ln_z(lambda);
        Ok(Self { k, omega, lambda, theta, theta2, ln_norm })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `ln Q_K(n, omega, lambda)`.
    pub fn ln_q(&self, n: i64) -> f64 {
        self.theta2.ln_z(self.lambda - 0.5 * (self.omega + n as f64)) - self.ln_norm
    }

    /// Closed form `exp(-K (n - omega)^2 / 2) Q_K(n, omega, lambda)`.
    pub fn pmf(&self, n: i64) -> Prob {
        let d = n as f64 - self.omega;
        Prob::from_ln(-0.5 * self.k * d * d + self.ln_q(n))
    }

    /// The same probability as an explicit convolution of two discrete Gaussians.
    pub fn pmf_convolution(&self, n: i64) -> f64 {
        let first = DiscreteGaussian::with_normalizer(self.theta, self.lambda - self.omega);
        let second = DiscreteGaussian::with_normalizer(self.theta, self.lambda);
        first.support().map(|m| first.pmf(m).p * second.pmf(m + n).p).sum()
    }

    /// Window that holds the mass of the pmf and of its rate-tilted version.
    pub fn support(&self) -> std::ops::RangeInclusive<i64> {
        let (base, _) = split(self.omega);
        let r = curvature_radius(self.k) + 4;
        base - r..=base + r
    }

    pub fn expectation(&self, f: impl Fn(i64) -> f64) -> f64 {
        self.support().map(|n| f(n) * self.pmf(n).p).sum()
    }

    /// Closed-form mean `u_D(lambda) - u_D(lambda - omega)`.
    pub fn mean(&self) -> f64 {
        self.theta.mean(self.lambda) - self.theta.mean(self.lambda - self.omega)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        let z = DiscreteGaussian::with_normalizer(self.theta, self.lambda).sample(rng);
        let zp = DiscreteGaussian::with_normalizer(self.theta, self.lambda - self.omega).sample(rng);
        z - zp
    }
}

/// `mu_K[omega, lambda](n)` from the closed form.
pub fn mu_k_pmf(k: f64, omega: f64, lambda: f64, n: i64) -> Result<Prob, GibbsError> {
    Ok(CurvatureFamily::new(k, omega, lambda)?.pmf(n))
}

pub fn mu_k_mean(k: f64, omega: f64, lambda: f64) -> Result<f64, GibbsError> {
    Ok(CurvatureFamily::new(k, omega, lambda)?.mean())
}

/// `E[exp(c K Z)]` for `Z ~ rho_K[lambda]`, equal to
/// `exp(c K lambda + c^2 K / 4) Z_K(lambda + c/2) / Z_K(lambda)`.
pub fn exp_moment(k: f64, lambda: f64, c: f64) -> Result<f64, GibbsError> {
    let theta = ThetaNormalizer::new(k)?;
    let ln = c * k * lambda + 0.25 * c * c * k + theta.ln_z(lambda + 0.5 * c) - theta.ln_z(lambda);
    if ln > MAX_EXPONENT || !ln.is_finite() {
        return Err(GibbsError::Overflow(ln));
    }
    Ok(ln.exp())
}

/// Expected Arrhenius rate under `mu_K[omega, lambda]`, `exp(-2 K omega)` for every lambda.
pub fn mu_k_rate_expectation(k: f64, omega: f64) -> Result<f64, GibbsError> {
    check_k(k)?;
    Ok((-2.0 * k * omega).exp())
}

/// `mu_K[omega, .]` averaged over the location with a uniform periodic rule.
#[derive(Debug, Clone)]
pub struct AveragedFamily {
    k: f64,
    omega: f64,
    members: Vec<CurvatureFamily>,
    lo: i64,
    table: Vec<f64>,
}

impl AveragedFamily {
    pub fn new(k: f64, omega: f64) -> Result<Self, GibbsError> {
        Self::with_nodes(k, omega, DEFAULT_QUADRATURE_POINTS)
    }

    pub fn with_nodes(k: f64, omega: f64, nodes: usize) -> Result<Self, GibbsError> {
        if nodes == 0 {
            return Err(GibbsError::NoQuadratureNodes);
        }
        let members = (0..nodes)
            .map(|j| CurvatureFamily::new(k, omega, j as f64 / nodes as f64))
            .collect::<Result<Vec<_>, _>>()?;
        let support = members[0].support();
        let lo = *support.start();
        let mut fam = Self { k, omega, members, lo, table: Vec::new() };
        fam.table = support.map(|n| fam.average(n)).collect();
        Ok(fam)
    }

    fn average(&self, n: i64) -> f64 {
        let s: f64 = self.members.iter().map(|m| m.pmf(n).p).sum();
        s / self.members.len() as f64
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn support(&self) -> std::ops::RangeInclusive<i64> {
        self.lo..=self.lo + self.table.len() as i64 - 1
    }

    pub fn pmf(&self, n: i64) -> f64 {
        let idx = n - self.lo;
        if idx >= 0 && (idx as usize) < self.table.len() {
            self.table[idx as usize]
        } else {
            self.average(n)
        }
    }

    pub fn mean(&self) -> f64 {
        self.support().map(|n| n as f64 * self.pmf(n)).sum()
    }

    /// `sum_n f(n) mu_infty(n)`, widening the window until the edge terms vanish.
    pub fn expectation(&self, f: impl Fn(i64) -> f64) -> Result<f64, GibbsError> {
        let (base, _) = split(self.omega);
        let mut radius = (self.table.len() as i64 - 1) / 2;
        let mut total: f64 = self.support().map(|n| f(n) * self.pmf(n)).sum();
        for _ in 0..64 {
            if !total.is_finite() {
                break;
            }
            let edge_lo = f(base - radius) * self.pmf(base - radius);
            let edge_hi = f(base + radius) * self.pmf(base + radius);
            let scale = total.abs().max(1.0);
            if edge_lo.abs() <= 1e-16 * scale && edge_hi.abs() <= 1e-16 * scale {
                return Ok(total);
            }
            for n in [base - radius - 2, base - radius - 1, base + radius + 1, base + radius + 2] {
                total += f(n) * self.pmf(n);
            }
            radius += 2;
        }
        Err(GibbsError::Divergent(format!(
            "terms do not decay within {radius} sites of omega={}",
            self.omega
        )))
    }
}

/// `mu_infty_K[omega](n)` with the default number of quadrature nodes.
pub fn mu_infty_pmf(k: f64, omega: f64, n: i64) -> Result<f64, GibbsError> {
    Ok(AveragedFamily::new(k, omega)?.pmf(n))
}

/// `f_hat(omega) = mu_infty_K[omega](f)`.
pub fn f_hat(k: f64, omega: f64, f: impl Fn(i64) -> f64) -> Result<f64, GibbsError> {
    AveragedFamily::new(k, omega)?.expectation(f)
}

/// Ratio `mu_K[omega, lambda](n) / exp(-K n^2 / 3)` against the Gaussian majorizer.
pub fn majorizer_ratio(k: f64, omega: f64, lambda: f64, n: i64) -> Result<f64, GibbsError> {
    let p = mu_k_pmf(k, omega, lambda, n)?;
    Ok((p.ln_p + k * (n * n) as f64 / 3.0).exp())
}

/// `(lambda, u_D(lambda))` pairs.
pub fn u_d_table(k: f64, grid: &[f64]) -> Result<Vec<(f64, f64)>, GibbsError> {
    let theta = ThetaNormalizer::new(k)?;
    Ok(grid.iter().map(|&l| (l, theta.mean(l))).collect())
}

/// `(u, lambda_D(u))` pairs.
pub fn lambda_d_table(k: f64, grid: &[f64]) -> Result<Vec<(f64, f64)>, GibbsError> {
    let theta = ThetaNormalizer::new(k)?;
    grid.iter().map(|&u| Ok((u, lambda_d_with(&theta, u)?))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_reference_value() {
        // 1 + 2e^-3 + 2e^-12 + 2e^-27 summed directly
        let direct: f64 = (-10i64..=10).map(|m| (-3.0 * (m * m) as f64).exp()).sum();
        let z = theta_z(3.0, 0.0).unwrap();
        assert!((z - direct).abs() < 1e-15);
        assert!((z - 1.099_586_425_1).abs() < 1e-10);
    }

    #[test]
    fn theta_symmetries() {
        let t = ThetaNormalizer::new(1.0).unwrap();
        for &l in &[0.1, 0.37, -1.3, 2.49, 0.5] {
            assert!((t.z(l + 1.0) / t.z(l) - 1.0).abs() < 1e-14);
            assert!((t.z(-l) / t.z(l) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn small_k_rejected() {
        assert_eq!(ThetaNormalizer::new(0.4).unwrap_err(), GibbsError::KTooSmall(0.4));
    }

    #[test]
    fn moment_map_fixed_points() {
        for k in [1.0, 3.0, 5.0] {
            for m in -3..=3 {
                assert!((u_d(k, m as f64).unwrap() - m as f64).abs() < 1e-14);
                assert!((lambda_d(k, m as f64).unwrap() - m as f64).abs() < 1e-12);
            }
            assert!((u_d(k, 0.5).unwrap() - 0.5).abs() < 1e-14);
            assert!((lambda_d(k, 0.5).unwrap() - 0.5).abs() < 1e-12);
            assert_eq!(u_d(k, -0.3).unwrap(), -u_d(k, 0.3).unwrap());
            verify_monotone(k, 1e-3).unwrap();
        }
    }

    #[test]
    fn inverse_residual() {
        for k in [1.0, 3.0, 5.0] {
            for i in 0..50 {
                let u = -2.0 + 0.0813 * i as f64;
                let l = lambda_d(k, u).unwrap();
                assert!((u_d(k, l).unwrap() - u).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn periodic_parts() {
        let k = 3.0;
        assert!(u_o(k, 0.0).unwrap().abs() < 1e-15);
        assert!(u_o(k, 0.5).unwrap().abs() < 1e-15);
        assert!((u_o(k, 1.3).unwrap() - u_o(k, 0.3).unwrap()).abs() < 1e-14);
        let m = 1000;
        let integral: f64 = (0..m).map(|j| u_o(k, (j as f64 + 0.5) / m as f64).unwrap()).sum::<f64>() / m as f64;
        assert!(integral.abs() < 1e-10);
        assert!((lambda_o(k, 0.2).unwrap() + lambda_o(k, -0.2).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn curvature_family_basics() {
        let fam = CurvatureFamily::new(3.0, 0.0, 0.3).unwrap();
        for n in 0..4 {
            assert!((fam.pmf(n).p - fam.pmf(-n).p).abs() < 1e-15);
        }
        let total: f64 = fam.support().map(|n| fam.pmf(n).p).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let fam = CurvatureFamily::new(5.0, 2.0, 1.0).unwrap();
        assert!((fam.mean() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn exp_moment_special_cases() {
        assert!((exp_moment(3.0, 0.7, 0.0).unwrap() - 1.0).abs() < 1e-15);
        let v = exp_moment(3.0, 0.7, 2.0).unwrap();
        assert!((v / (2.0 * 3.0 * 0.7 + 3.0f64).exp() - 1.0).abs() < 1e-13);
        assert!(matches!(exp_moment(3.0, 0.0, 40.0), Err(GibbsError::Overflow(_))));
    }

    #[test]
    fn averaged_family_normalised() {
        let fam = AveragedFamily::new(3.0, 0.4).unwrap();
        let total: f64 = fam.support().map(|n| fam.pmf(n)).sum();
        assert!((total - 1.0).abs() < 1e-10);
        assert!((fam.expectation(|_| 1.0).unwrap() - 1.0).abs() < 1e-10);
        assert!(fam.expectation(|n| (3.0 * (n * n) as f64).exp()).is_err());
    }
}
