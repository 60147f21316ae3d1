//! Market/cost parameters, closed-form cost oracles, and the auxiliary
//! functions of the penalized formulation.
//!
//! The closed forms here are independent of the PDE solvers and double as
//! test oracles: [`trivial_strategy_cost`] is the exact expected cost of the
//! do-nothing strategy, and [`lemma22_bound`] the value-function upper bound
//! `s·e^{(μ−r)τ}[x⁺ + ν√τ/√(2π)]` that every computed surface must respect.

use statrs::function::erf::erf;
use thiserror::Error;

/// `1/√(2π)`.
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    /// The model requires the allowance-price drift to exceed the discount
    /// rate; otherwise purchasing before the horizon is never optimal and
    /// the constraint never binds.
    #[error("drift mu = {mu} must exceed discount rate r = {r}")]
    MuNotGreaterThanR { mu: f64, r: f64 },
    #[error("coefficient {field} = {value} must be positive")]
    NonPositiveCoefficient { field: &'static str, value: f64 },
    #[error("penalty epsilon = {0} must lie in (0, 1]")]
    EpsilonOutOfRange(f64),
    #[error("epsilon schedule must be strictly decreasing and non-empty")]
    BadEpsilonSchedule,
}

/// Validated market and cost coefficients.
///
/// * `mu`    — drift of the allowance price (1/time)
/// * `sigma` — price volatility (1/√time)
/// * `nu`    — emission-surplus volatility (quota/√time)
/// * `r`     — discount rate (1/time)
/// * `m`     — quadratic reduction-cost coefficient (money·time/quota²)
/// * `T`     — horizon (time)
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub mu: f64,
    pub sigma: f64,
    pub nu: f64,
    pub r: f64,
    pub m: f64,
    pub horizon: f64,
}

impl ModelParams {
    /// Validates the raw coefficients. Degenerate diffusions (`sigma = 0`
    /// or `nu = 0`) are rejected rather than special-cased: they change the
    /// equation class.
    pub fn new(
        mu: f64,
        sigma: f64,
        nu: f64,
        r: f64,
        m: f64,
        horizon: f64,
    ) -> Result<Self, ModelError> {
        let positive: [(&'static str, f64); 5] = [
            ("sigma", sigma),
            ("nu", nu),
            ("r", r),
            ("m", m),
            ("T", horizon),
        ];
        for (field, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(ModelError::NonPositiveCoefficient { field, value });
            }
        }
        if !mu.is_finite() || mu <= r {
            return Err(ModelError::MuNotGreaterThanR { mu, r });
        }
        Ok(Self {
            mu,
            sigma,
            nu,
            r,
            m,
            horizon,
        })
    }

    /// The benchmark parameter set used throughout the numerical study:
    /// μ=0.05, σ=0.2, ν=0.5, m=0.3, T=1, r=0.03.
    pub fn benchmark() -> Self {
        Self::new(0.05, 0.2, 0.5, 0.03, 0.3, 1.0).expect("benchmark params are valid")
    }

    /// Barrier scaling δ = (μ − r) / (2m).
    pub fn delta(&self) -> f64 {
        (self.mu - self.r) / (2.0 * self.m)
    }

    /// Growth rate of the exponential upper barrier: ν²/2 + μ − r.
    pub fn barrier_growth(&self) -> f64 {
        0.5 * self.nu * self.nu + self.mu - self.r
    }
}

/// Penalty parameter(s) for the penalized approximation.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyConfig {
    /// Strictly decreasing ε schedule; the last (smallest) entry produces
    /// the deliverable surface.
    pub schedule: Vec<f64>,
}

impl PenaltyConfig {
    pub fn new(schedule: Vec<f64>) -> Result<Self, ModelError> {
        if schedule.is_empty() {
            return Err(ModelError::BadEpsilonSchedule);
        }
        for &eps in &schedule {
            if !(eps > 0.0 && eps <= 1.0) {
                return Err(ModelError::EpsilonOutOfRange(eps));
            }
        }
        if schedule.windows(2).any(|w| w[1] >= w[0]) {
            return Err(ModelError::BadEpsilonSchedule);
        }
        Ok(Self { schedule })
    }

    pub fn default_schedule() -> Self {
        Self::new(vec![0.1, 0.05, 0.02, 0.01]).unwrap()
    }

    pub fn finest(&self) -> f64 {
        *self.schedule.last().unwrap()
    }
}

/// Constants entering the two-sided barrier checks: δ = (μ−r)/2m exactly,
/// κ > 2(σ² + μ), and a positive shift a.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConstants {
    pub delta: f64,
    pub kappa: f64,
    pub a_const: f64,
}

impl BoundConstants {
    /// κ defaults to 2(σ² + μ) + 10 ("large enough" with headroom),
    /// a defaults to 1.
    pub fn defaults(params: &ModelParams) -> Self {
        Self {
            delta: params.delta(),
            kappa: 2.0 * (params.sigma * params.sigma + params.mu) + 10.0,
            a_const: 1.0,
        }
    }

    pub fn with_kappa_a(params: &ModelParams, kappa: f64, a_const: f64) -> Self {
        Self {
            delta: params.delta(),
            kappa,
            a_const,
        }
    }
}

/// Standard Gaussian CDF, accurate to well below 1e-12 absolute.
pub fn gaussian_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z * std::f64::consts::FRAC_1_SQRT_2))
}

/// Standard Gaussian density.
pub fn gaussian_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Terminal compliance cost `x⁺ · s`.
pub fn terminal_payoff(x: f64, s: f64) -> f64 {
    x.max(0.0) * s
}

/// Exact expected discounted cost of the strategy a ≡ 0, b ≡ 0 with
/// time-to-horizon `tau`:
///
/// `s·e^{(μ−r)τ} [ x·N(x/(ν√τ)) + ν√τ·n(x/(ν√τ)) ]`,
///
/// reducing to `x⁺·s` at τ = 0.
pub fn trivial_strategy_cost(x: f64, s: f64, tau: f64, params: &ModelParams) -> f64 {
    if tau <= 0.0 {
        return terminal_payoff(x, s);
    }
    let w = params.nu * tau.sqrt();
    let z = x / w;
    s * ((params.mu - params.r) * tau).exp() * (x * gaussian_cdf(z) + w * gaussian_pdf(z))
}

/// Upper bound `s·e^{(μ−r)τ} [x⁺ + ν√τ/√(2π)]` on the value function;
/// coincides with [`trivial_strategy_cost`] at x = 0.
pub fn lemma22_bound(x: f64, s: f64, tau: f64, params: &ModelParams) -> f64 {
    let w = params.nu * tau.sqrt();
    s * ((params.mu - params.r) * tau).exp() * (x.max(0.0) + w * INV_SQRT_2PI)
}

/// Penalty function β: C¹, nonincreasing, convex, zero on [1, ∞), linear on
/// (−∞, 0], with β(0) = 2(μ−r).
///
/// Implemented as the piecewise polynomial
/// `2(μ−r)(1−2z)` for z ≤ 0, `2(μ−r)(1−z)²` on [0, 1], `0` for z ≥ 1;
/// values and slopes match at both junctions.
pub fn beta(z: f64, params: &ModelParams) -> f64 {
    let b0 = 2.0 * (params.mu - params.r);
    if z >= 1.0 {
        0.0
    } else if z <= 0.0 {
        b0 * (1.0 - 2.0 * z)
    } else {
        b0 * (1.0 - z) * (1.0 - z)
    }
}

/// Derivative of [`beta`]; ≤ 0 everywhere.
pub fn beta_prime(z: f64, params: &ModelParams) -> f64 {
    let b0 = 2.0 * (params.mu - params.r);
    if z >= 1.0 {
        0.0
    } else if z <= 0.0 {
        -2.0 * b0
    } else {
        -2.0 * b0 * (1.0 - z)
    }
}

/// Sine-corrected ramp used by the lower barrier:
/// 0 for z ≤ 1, 1 for z ≥ 3, `½(z−1) − sin(π(z−1))/(2π)` in between.
pub fn rho(z: f64) -> f64 {
    if z <= 1.0 {
        0.0
    } else if z >= 3.0 {
        1.0
    } else {
        0.5 * (z - 1.0) - (std::f64::consts::PI * (z - 1.0)).sin() / (2.0 * std::f64::consts::PI)
    }
}

/// Smooth monotone initial profile v₀^ε: 0 for x ≤ −ε, 1+ε for x ≥ 0, and
/// the cubic smoothstep `(1+ε)·S((x+ε)/ε)` with `S(w) = 3w² − 2w³` on the
/// ramp. Nondecreasing in both arguments and bounded by `e^{ε+x}`.
pub fn initial_profile(x: f64, eps: f64) -> f64 {
    debug_assert!(eps > 0.0 && eps <= 1.0);
    if x <= -eps {
        0.0
    } else if x >= 0.0 {
        1.0 + eps
    } else {
        let w = (x + eps) / eps;
        (1.0 + eps) * w * w * (3.0 - 2.0 * w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn table1() -> ModelParams {
        ModelParams::benchmark()
    }

    #[test]
    fn validate_benchmark_and_delta() {
        let p = table1();
        assert!((p.delta() - 1.0 / 30.0).abs() < 1e-15);
    }

    #[test]
    fn validate_rejects_mu_not_greater_than_r() {
        let err = ModelParams::new(0.03, 0.2, 0.5, 0.03, 0.3, 1.0).unwrap_err();
        assert_eq!(err, ModelError::MuNotGreaterThanR { mu: 0.03, r: 0.03 });
    }

    #[test]
    fn validate_rejects_degenerate_diffusion() {
        let err = ModelParams::new(0.05, 0.2, 0.0, 0.03, 0.3, 1.0).unwrap_err();
        assert_eq!(
            err,
            ModelError::NonPositiveCoefficient {
                field: "nu",
                value: 0.0
            }
        );
    }

    #[test]
    fn penalty_schedule_must_decrease() {
        assert!(PenaltyConfig::new(vec![0.1, 0.05, 0.05]).is_err());
        assert!(PenaltyConfig::new(vec![]).is_err());
        assert!(PenaltyConfig::new(vec![0.1, 1.5]).is_err());
        assert_eq!(PenaltyConfig::default_schedule().finest(), 0.01);
    }

    #[test]
    fn terminal_payoff_examples() {
        assert_eq!(terminal_payoff(2.0, 10.0), 20.0);
        assert_eq!(terminal_payoff(-1.0, 5.0), 0.0);
        assert_eq!(terminal_payoff(0.0, 7.0), 0.0);
    }

    #[test]
    fn trivial_cost_frozen_values() {
        let p = table1();
        // Frozen from the closed form evaluated at 30 decimal digits.
        assert!((trivial_strategy_cost(0.0, 1.0, 1.0, &p) - 0.203500724529435690).abs() < 1e-14);
        assert!((trivial_strategy_cost(1.0, 1.0, 1.0, &p) - 1.024532453120484949).abs() < 1e-14);
        assert_eq!(trivial_strategy_cost(1.5, 2.0, 0.0, &p), 3.0);
        assert_eq!(trivial_strategy_cost(-1.5, 2.0, 0.0, &p), 0.0);
    }

    #[test]
    fn trivial_cost_confirmed_by_monte_carlo() {
        // Independent oracle: E[(x + ν√τ Z)⁺] · s·e^{(μ−r)τ} by direct sampling.
        let p = table1();
        let (x, s, tau) = (0.0, 1.0, 1.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let n = 400_000;
        let w = p.nu * tau.sqrt();
        let growth = s * ((p.mu - p.r) * tau).exp();
        let (mut sum, mut sumsq) = (0.0, 0.0);
        for _ in 0..n {
            let z: f64 = StandardNormal.sample(&mut rng);
            let c = growth * (x + w * z).max(0.0);
            sum += c;
            sumsq += c * c;
        }
        let mean = sum / n as f64;
        let se = ((sumsq / n as f64 - mean * mean) / n as f64).sqrt();
        let exact = trivial_strategy_cost(x, s, tau, &p);
        assert!(
            (mean - exact).abs() < 3.0 * se,
            "MC {mean} vs closed form {exact} (se {se})"
        );
    }

    #[test]
    fn trivial_cost_confirmed_by_quadrature() {
        // Independent oracle: Simpson's rule on ∫ (x+ν√τ ξ)⁺ φ(ξ) dξ.
        let p = table1();
        let (x, s, tau) = (1.0, 1.0, 1.0);
        let w = p.nu * tau.sqrt();
        let (lo, hi, n) = (-x / w, 10.0, 20_000);
        let h = (hi - lo) / n as f64;
        let f = |xi: f64| (x + w * xi) * gaussian_pdf(xi);
        let mut acc = f(lo) + f(hi);
        for k in 1..n {
            let xi = lo + k as f64 * h;
            acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(xi);
        }
        let integral = s * ((p.mu - p.r) * tau).exp() * acc * h / 3.0;
        assert!((integral - trivial_strategy_cost(x, s, tau, &p)).abs() < 1e-10);
    }

    #[test]
    fn lemma22_frozen_values() {
        let p = table1();
        assert!((lemma22_bound(0.0, 1.0, 1.0, &p) - 0.203500724529435690).abs() < 1e-14);
        assert!((lemma22_bound(1.0, 1.0, 1.0, &p) - 1.223702064556191500).abs() < 1e-14);
        assert!((lemma22_bound(-3.0, 1.0, 1.0, &p) - 0.203500724529435690).abs() < 1e-14);
    }

    #[test]
    fn beta_examples_and_junctions() {
        let p = table1();
        assert!((beta(0.0, &p) - 0.04).abs() < 1e-15);
        assert_eq!(beta(1.5, &p), 0.0);
        assert!((beta(-1.0, &p) - 0.12).abs() < 1e-15);
        // C¹ junctions at 0 and 1.
        let h = 1e-7;
        for z0 in [0.0, 1.0] {
            let left = (beta(z0, &p) - beta(z0 - h, &p)) / h;
            let right = (beta(z0 + h, &p) - beta(z0, &p)) / h;
            assert!((left - right).abs() < 1e-5);
            assert!((beta_prime(z0, &p) - right).abs() < 1e-5);
        }
    }

    #[test]
    fn rho_examples_and_continuity() {
        assert_eq!(rho(0.3), 0.0);
        assert!((rho(2.0) - 0.5).abs() < 1e-15);
        assert!((rho(1.5) - 0.090845056908104664).abs() < 1e-14);
        assert!(rho(1.0).abs() < 1e-12 && (rho(3.0) - 1.0).abs() < 1e-12);
        assert!(rho(1.0 + 1e-9) < 1e-8);
        assert!(rho(3.0 - 1e-9) > 1.0 - 1e-8);
    }

    #[test]
    fn initial_profile_examples() {
        assert!((initial_profile(0.5, 0.1) - 1.1).abs() < 1e-15);
        assert_eq!(initial_profile(-0.2, 0.1), 0.0);
        assert!((initial_profile(-0.05, 0.1) - 0.55).abs() < 1e-15);
    }

    #[test]
    fn gaussian_cdf_reference_points() {
        assert_eq!(gaussian_cdf(0.0), 0.5);
        assert!((gaussian_cdf(1.0) - 0.841344746068542949).abs() < 1e-13);
        assert!((gaussian_cdf(2.0) - 0.977249868051820793).abs() < 1e-13);
        assert!(gaussian_cdf(-8.0) < 1e-14);
        assert!((gaussian_cdf(0.5) - 0.691462461274013104).abs() < 1e-13);
    }

    proptest! {
        #[test]
        fn beta_nonincreasing_rho_nondecreasing(z1 in -5.0..5.0f64, z2 in -5.0..5.0f64) {
            let p = table1();
            let (lo, hi) = if z1 < z2 { (z1, z2) } else { (z2, z1) };
            prop_assert!(beta(lo, &p) >= beta(hi, &p) - 1e-15);
            prop_assert!(rho(lo) <= rho(hi) + 1e-15);
        }

        #[test]
        fn beta_midpoint_below_chord(z1 in -4.0..4.0f64, z2 in -4.0..4.0f64) {
            let p = table1();
            let mid = beta(0.5 * (z1 + z2), &p);
            let chord = 0.5 * (beta(z1, &p) + beta(z2, &p));
            prop_assert!(mid <= chord + 1e-12);
        }

        #[test]
        fn initial_profile_bounds_and_monotonicity(
            x in -2.0..2.0f64,
            eps in 0.01..1.0f64,
            dx in 0.0..0.5f64,
            deps in 0.0..0.5f64,
        ) {
            let eps2 = (eps + deps).min(1.0);
            let v = initial_profile(x, eps);
            prop_assert!((0.0..=1.0 + eps).contains(&v));
            prop_assert!(v <= (eps + x).exp() + 1e-12);
            prop_assert!(initial_profile(x + dx, eps) >= v - 1e-12);
            prop_assert!(initial_profile(x, eps2) >= v - 1e-12);
        }

        #[test]
        fn trivial_cost_below_lemma22(x in -5.0..5.0f64, s in 0.1..10.0f64, tau in 0.0..2.0f64) {
            let p = table1();
            let t = trivial_strategy_cost(x, s, tau, &p);
            let b = lemma22_bound(x, s, tau, &p);
            prop_assert!(t <= b + 1e-12);
        }
    }
}
