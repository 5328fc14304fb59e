//! The fully asymmetric GARCH model: closed forms for the forward curve,
//! coupling kernel, skew, skewness, skewness/skew ratio and implied leverage,
//! plus a seeded path simulator.
//!
//! Dynamics: r_i = sigma_i eps_i,
//! sigma_{i+1}^2 = v0^2 + rho (sigma_i^2 - v0^2) + nu sigma_i^2 (eps_i^2 1_{eps_i<0} - 1/2),
//! i.e. X_{i+1} = rho X_i + nu (1 + X_i) f(eps_i) with sigma_i^2 = v0^2 (1 + X_i).

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fv::{ForwardVarianceModel, GarchShock, Kernel};
use crate::sum::KahanSum;

const SQRT_2_OVER_PI: f64 = 0.7978845608028653558798921198687637369;

/// Model parameters, daily units: `v0` is the baseline vol per sqrt(day).
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct GarchParams {
    pub v0: f64,
    pub rho: f64,
    pub nu: f64,
    /// Initial relative variance offset: sigma_1^2 = v0^2 (1 + x1).
    pub x1: f64,
}

impl GarchParams {
    pub fn new(v0: f64, rho: f64, nu: f64, x1: f64) -> Result<Self> {
        if !v0.is_finite() || v0 <= 0.0 {
            return Err(Error::InvalidInput(format!("v0 must be finite and > 0, got {v0}")));
        }
        if !rho.is_finite() || rho <= 0.0 || rho >= 1.0 {
            return Err(Error::InvalidInput(format!("rho must be in (0, 1), got {rho}")));
        }
        if !nu.is_finite() || nu < 0.0 {
            return Err(Error::InvalidInput(format!("nu must be finite and >= 0, got {nu}")));
        }
        // f >= -1/2, so rho >= nu/2 keeps the order-1 variance recursion positive
        if rho < nu / 2.0 {
            return Err(Error::InvalidInput(format!(
                "stability requires rho >= nu/2 (rho = {rho}, nu = {nu})"
            )));
        }
        if !x1.is_finite() || x1 <= -1.0 {
            return Err(Error::InvalidInput(format!("x1 must be > -1, got {x1}")));
        }
        Ok(Self { v0, rho, nu, x1 })
    }

    /// Volatility relaxation time -1/ln(rho), in days.
    pub fn relaxation_days(&self) -> f64 {
        -1.0 / self.rho.ln()
    }

    /// v_1^j = v0^2 (1 + rho^{j-1} x1), j = 1..=horizon.
    pub fn forward_curve(&self, horizon: usize) -> Result<Vec<f64>> {
        if horizon < 1 {
            return Err(Error::OutOfRange("horizon must be >= 1 day".into()));
        }
        Ok((1..=horizon)
            .map(|j| self.v0 * self.v0 * (1.0 + self.rho.powi(j as i32 - 1) * self.x1))
            .collect())
    }

    /// lambda_i^j = v0^2 rho^{j-i-1} (1 + rho^{i-1} x1), the coupling kernel
    /// with X_i evaluated on the initial curve at order nu^0.
    pub fn lambda(&self, i: usize, j: usize) -> Result<f64> {
        if i < 1 || j <= i {
            return Err(Error::OutOfRange(format!("lambda needs 1 <= i < j, got i={i}, j={j}")));
        }
        Ok(self.lambda_unchecked(i, j))
    }

    #[inline]
    fn lambda_unchecked(&self, i: usize, j: usize) -> f64 {
        self.v0 * self.v0
            * self.rho.powi((j - i) as i32 - 1)
            * (1.0 + self.rho.powi(i as i32 - 1) * self.x1)
    }

    /// The same kernel as a [`Kernel`] closure for the generic framework.
    pub fn kernel(&self) -> Kernel {
        let p = *self;
        Arc::new(move |i, j, _curve: &[f64]| p.lambda_unchecked(i, j))
    }

    /// Assemble the generic forward-variance model (curve + kernel + shock).
    pub fn to_model(&self, horizon: usize) -> Result<ForwardVarianceModel> {
        ForwardVarianceModel::new(self.forward_curve(horizon)?, self.nu, self.kernel(), Arc::new(GarchShock))
    }

    /// V_T = v0^2 (T + x1 (1 - rho^T)/(1 - rho)).
    pub fn total_variance(&self, t: usize) -> f64 {
        let tf = t as f64;
        self.v0 * self.v0 * (tf + self.x1 * (1.0 - self.rho.powi(t as i32)) / (1.0 - self.rho))
    }
}

/// The shock of the model, f(x) = x^2 1_{x<0} - 1/2.
pub fn garch_shock() -> GarchShock {
    GarchShock
}

/// Closed-form skew: the double sum with the sqrt(1 - v_1^i/V_T) factor.
pub fn skew(params: &GarchParams, t: usize) -> Result<f64> {
    skew_impl(params, t, true)
}

/// Closed-form S_T/6: the same sum without the variance-reduction factor.
pub fn skewness(params: &GarchParams, t: usize) -> Result<f64> {
    skew_impl(params, t, false)
}

fn skew_impl(params: &GarchParams, t: usize, variance_reduced: bool) -> Result<f64> {
    if t < 2 {
        if t == 1 {
            return Ok(0.0);
        }
        return Err(Error::OutOfRange("maturity must be >= 1 day".into()));
    }
    let &GarchParams { v0, rho, x1, nu } = params;
    let vt = params.total_variance(t);
    let mut sum = KahanSum::new();
    for j in 2..=t {
        for i in 1..j {
            let base = (1.0 + rho.powi(i as i32 - 1) * x1).sqrt()
                * (rho.powi((j - i) as i32 - 1) + rho.powi(j as i32 - 2) * x1);
            let v1i = v0 * v0 * (1.0 + rho.powi(i as i32 - 1) * x1);
            let factor = if variance_reduced { (1.0 - v1i / vt).max(0.0).sqrt() } else { 1.0 };
            sum.add(base * factor);
        }
    }
    Ok(-SQRT_2_OVER_PI * nu * v0.powi(3) / (2.0 * vt.powf(1.5)) * sum.value())
}

/// (S_T/6) / Skew_T as the double-sum ratio; reduces to sqrt(T/(T-1)) at x1 = 0.
pub fn skewness_skew_ratio(params: &GarchParams, t: usize) -> Result<f64> {
    if t < 2 {
        return Err(Error::OutOfRange("the ratio needs a maturity of at least 2 days".into()));
    }
    let sk = skew(params, t)?;
    if sk == 0.0 {
        return Err(Error::Degenerate("skew is zero; the ratio is undefined".into()));
    }
    Ok(skewness(params, t)? / sk)
}

/// Closed-form implied leverage:
/// gamma_T = -nu sqrt(1+x1) / (sqrt(2 pi) sqrt(T (T + x1 (1-rho^T)/(1-rho)))) * (1-rho^T)/(1-rho).
pub fn gamma(params: &GarchParams, t: usize) -> Result<f64> {
    if t < 1 {
        return Err(Error::OutOfRange("maturity must be >= 1 day".into()));
    }
    let &GarchParams { rho, x1, nu, .. } = params;
    let tf = t as f64;
    let geo = (1.0 - rho.powi(t as i32)) / (1.0 - rho);
    Ok(-nu * (1.0 + x1).sqrt() / ((2.0 * std::f64::consts::PI).sqrt() * (tf * (tf + x1 * geo)).sqrt())
        * geo)
}

/// Simulation request: `horizon` days per path.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SimConfig {
    pub horizon: usize,
    pub n_paths: usize,
    pub seed: u64,
}

/// Simulated paths. Raw returns are the paper's convention r_i = sigma_i eps_i;
/// martingale-adjusted returns (-sigma_i^2/2 + sigma_i eps_i) are derived for
/// pricing via [`SimOutput::adjusted_returns`].
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub returns: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
    /// Times the variance floor clipped the recursion (never silent).
    pub floor_hits: u64,
}

impl SimOutput {
    pub fn n_paths(&self) -> usize {
        self.returns.len()
    }

    /// Martingale-adjusted returns of one path: r_i - sigma_i^2/2.
    pub fn adjusted_returns(&self, path: usize) -> Vec<f64> {
        self.returns[path]
            .iter()
            .zip(&self.variances[path])
            .map(|(r, v)| r - 0.5 * v)
            .collect()
    }
}

/// Relative variance floor: sigma^2 is clipped at 1e-12 v0^2.
const VARIANCE_FLOOR: f64 = 1e-12;

/// One day of the recursion. Returns (sigma_i^2, X_{i+1}, floored).
#[inline]
pub(crate) fn step(params: &GarchParams, x: f64, eps: f64) -> (f64, f64, bool) {
    let one_plus = 1.0 + x;
    let sigma2 = params.v0 * params.v0 * one_plus;
    let f = (if eps < 0.0 { eps * eps } else { 0.0 }) - 0.5;
    let mut x_next = params.rho * x + params.nu * one_plus * f;
    let mut floored = false;
    if x_next <= -1.0 + VARIANCE_FLOOR {
        x_next = -1.0 + VARIANCE_FLOOR;
        floored = true;
    }
    (sigma2, x_next, floored)
}

/// Per-path RNG: one ChaCha stream per path index, so the output is
/// reproducible regardless of how paths are scheduled across threads.
pub(crate) fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

/// Seeded RNG for resampling procedures elsewhere in the crate.
pub(crate) fn bootstrap_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Simulate `n_paths` paths of `horizon` days. Identical seeds give
/// bit-identical output; paths are merged in path-index order.
pub fn simulate(params: &GarchParams, cfg: &SimConfig) -> Result<SimOutput> {
    if cfg.n_paths < 1 {
        return Err(Error::InvalidInput("need at least one path".into()));
    }
    if cfg.horizon < 1 {
        return Err(Error::OutOfRange("horizon must be >= 1 day".into()));
    }
    let params = *params;
    let per_path: Vec<(Vec<f64>, Vec<f64>, u64)> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(cfg.seed, p as u64);
            let mut returns = Vec::with_capacity(cfg.horizon);
            let mut variances = Vec::with_capacity(cfg.horizon);
            let mut floor_hits = 0u64;
            let mut x = params.x1;
            for _ in 0..cfg.horizon {
                let eps: f64 = StandardNormal.sample(&mut rng);
                let (sigma2, x_next, floored) = step(&params, x, eps);
                returns.push(sigma2.sqrt() * eps);
                variances.push(sigma2);
                floor_hits += floored as u64;
                x = x_next;
            }
            (returns, variances, floor_hits)
        })
        .collect();
    let mut out = SimOutput {
        returns: Vec::with_capacity(cfg.n_paths),
        variances: Vec::with_capacity(cfg.n_paths),
        floor_hits: 0,
    };
    for (r, v, fh) in per_path {
        out.returns.push(r);
        out.variances.push(v);
        out.floor_hits += fh;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn p(v0: f64, rho: f64, nu: f64, x1: f64) -> GarchParams {
        GarchParams::new(v0, rho, nu, x1).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(GarchParams::new(0.0, 0.9, 0.1, 0.0).is_err());
        assert!(GarchParams::new(0.01, 1.0, 0.1, 0.0).is_err());
        assert!(GarchParams::new(0.01, 0.9, -0.1, 0.0).is_err());
        assert!(GarchParams::new(0.01, 0.04, 0.1, 0.0).is_err(), "rho < nu/2");
        assert!(GarchParams::new(0.01, 0.9, 0.1, -1.0).is_err());
    }

    #[test]
    fn forward_curve_values() {
        // paper-calibrated S&P parameters (v0 here in its quoted annual unit;
        // the curve formula does not care about the unit)
        let curve = p(0.179, 0.988, 0.123, 0.1).forward_curve(3).unwrap();
        assert_abs_diff_eq!(curve[1], 0.0352066508, epsilon = 1e-12);
        // x1 = 0 is flat at v0^2
        let flat = p(0.0113, 0.9, 0.05, 0.0).forward_curve(100).unwrap();
        for v in &flat {
            assert_abs_diff_eq!(*v, 0.0113f64.powi(2), epsilon = 1e-18);
        }
        // mean reversion: v_1^j -> v0^2
        let long = p(0.0113, 0.9, 0.05, 0.8).forward_curve(500).unwrap();
        assert_abs_diff_eq!(long[499], 0.0113f64.powi(2), epsilon = 1e-12);
    }

    #[test]
    fn lambda_closed_form() {
        let params = p(0.0113, 0.9, 0.05, 0.0);
        // x1 = 0: lambda_i^j = v0^2 rho^{j-i-1}
        assert_abs_diff_eq!(
            params.lambda(3, 7).unwrap(),
            0.0113f64.powi(2) * 0.9f64.powi(3),
            epsilon = 1e-18
        );
        assert!(params.lambda(3, 3).is_err());
        assert!(params.lambda(0, 3).is_err());
        // rho -> 1 limit: lambda -> v0^2 at all lags
        let persistent = p(0.0113, 0.999999, 0.05, 0.0);
        let lam = persistent.lambda(1, 400).unwrap();
        assert!((lam / 0.0113f64.powi(2) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn gamma_closed_form_frozen_value() {
        // mpmath: -(0.123/sqrt(2 pi)) (1 - 0.988^20) / (0.012 * 20)
        let g = gamma(&p(0.0113, 0.988, 0.123, 0.0), 20).unwrap();
        assert_abs_diff_eq!(g, -0.04385892219405813, epsilon = 1e-15);
        assert!(g < 0.0);
        assert_eq!(gamma(&p(0.0113, 0.988, 0.0, 0.0), 20).unwrap(), 0.0);
    }

    #[test]
    fn skew_is_negative_and_zero_at_zero_vol_of_vol() {
        let params = p(0.0113, 0.93, 0.07, 0.2);
        assert!(skew(&params, 17).unwrap() < 0.0);
        assert_eq!(skew(&p(0.0113, 0.93, 0.0, 0.2), 17).unwrap(), 0.0);
    }

    #[test]
    fn skew_and_skewness_frozen_values() {
        // mpmath double sums at (v0=0.0113, rho=0.93, nu=0.07, x1=0.2, T=17)
        let params = p(0.0113, 0.93, 0.07, 0.2);
        assert_abs_diff_eq!(skew(&params, 17).unwrap(), -0.03900282010082787, epsilon = 1e-14);
        assert_abs_diff_eq!(skewness(&params, 17).unwrap(), -0.04022848579697815, epsilon = 1e-14);
    }

    #[test]
    fn ratio_law_at_x1_zero() {
        let params = p(0.0113, 0.95, 0.08, 0.0);
        for t in [2usize, 3, 10, 100, 500] {
            let r = skewness_skew_ratio(&params, t).unwrap();
            let want = (t as f64 / (t as f64 - 1.0)).sqrt();
            assert!((r - want).abs() < 1e-12, "T={t}: {r} vs {want}");
        }
        // T=2 is sqrt(2), not the 2 the paper's text claims
        assert_abs_diff_eq!(
            skewness_skew_ratio(&params, 2).unwrap(),
            std::f64::consts::SQRT_2,
            epsilon = 1e-12
        );
    }

    #[test]
    fn ratio_frozen_value_with_offset() {
        // mpmath double-sum oracle at x1 = 0.2, T = 30 (v0, nu cancel)
        let params = p(0.0113, 0.93, 0.07, 0.2);
        assert_abs_diff_eq!(skewness_skew_ratio(&params, 30).unwrap(), 1.017466181426135, epsilon = 1e-13);
    }

    #[test]
    fn cross_module_identities_match_generic_framework() {
        // closed forms vs the generic ops on (forward_curve, kernel, shock)
        for &rho in &[0.8, 0.93, 0.988] {
            for &x1 in &[-0.3, 0.0, 0.4] {
                let params = p(0.0113, rho, 0.07, x1);
                let model = params.to_model(121).unwrap();
                for &t in &[2usize, 5, 20, 60, 120] {
                    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
                    assert!(
                        rel(skew(&params, t).unwrap(), model.skew(t).unwrap()) < 1e-12,
                        "skew rho={rho} x1={x1} T={t}"
                    );
                    assert!(
                        rel(skewness(&params, t).unwrap(), model.skewness(t).unwrap()) < 1e-12,
                        "skewness rho={rho} x1={x1} T={t}"
                    );
                    assert!(
                        rel(gamma(&params, t).unwrap(), model.implied_leverage(t).unwrap()) < 1e-12,
                        "gamma rho={rho} x1={x1} T={t}"
                    );
                }
            }
        }
    }

    #[test]
    fn total_variance_closed_form_matches_curve_sum() {
        let params = p(0.0113, 0.93, 0.07, 0.35);
        let model = params.to_model(60).unwrap();
        for t in [1usize, 7, 33, 60] {
            assert_abs_diff_eq!(
                params.total_variance(t),
                model.total_variance(t).unwrap(),
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn simulation_is_reproducible_and_degenerate_at_zero_nu() {
        let params = p(0.0113, 0.9, 0.0, 0.0);
        let cfg = SimConfig { horizon: 50, n_paths: 4, seed: 99 };
        let a = simulate(&params, &cfg).unwrap();
        let b = simulate(&params, &cfg).unwrap();
        assert_eq!(a.returns, b.returns);
        assert_eq!(a.variances, b.variances);
        // nu = 0, x1 = 0: all variances exactly v0^2
        for path in &a.variances {
            for v in path {
                assert_eq!(*v, 0.0113f64 * 0.0113);
            }
        }
        assert_eq!(a.floor_hits, 0);
    }

    #[test]
    fn simulation_mean_variance_consistent() {
        // sample mean of sigma_i^2 at large i stays at v0^2 (E[f] = 0)
        let params = p(0.0113, 0.9, 0.05, 0.0);
        let cfg = SimConfig { horizon: 60, n_paths: 200_000, seed: 31 };
        let out = simulate(&params, &cfg).unwrap();
        let n = out.n_paths();
        let (mut sum, mut sumsq) = (0.0f64, 0.0f64);
        for p in 0..n {
            let v = out.variances[p][59];
            sum += v;
            sumsq += v * v;
        }
        let mean = sum / n as f64;
        let se = ((sumsq / n as f64 - mean * mean) / n as f64).sqrt();
        let want = 0.0113f64 * 0.0113;
        assert!((mean - want).abs() < 3.0 * se, "{mean} vs {want} (se {se})");
        assert_eq!(out.floor_hits, 0);
    }

    #[test]
    fn simulation_leverage_matches_lambda_kernel() {
        // sample E[r_i r_{i+lag}^2] vs Eq. route through the kernel, small nu
        let params = p(0.0113, 0.9, 0.05, 0.0);
        let cfg = SimConfig { horizon: 12, n_paths: 2_000_000, seed: 17 };
        let out = simulate(&params, &cfg).unwrap();
        let model = params.to_model(12).unwrap();
        let i = 3usize;
        for lag in [1usize, 3] {
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            for pth in 0..out.n_paths() {
                let z = out.returns[pth][i - 1] * out.returns[pth][i - 1 + lag].powi(2);
                sum += z;
                sumsq += z * z;
            }
            let n = out.n_paths() as f64;
            let mean = sum / n;
            let se = ((sumsq / n - mean * mean) / n).sqrt();
            let want = model.leverage_from_lambda(i, lag).unwrap();
            assert!((mean - want).abs() < 3.0 * se, "lag={lag}: {mean} vs {want} (se {se})");
        }
    }

    #[test]
    fn adjusted_returns_subtract_half_variance() {
        let params = p(0.0113, 0.9, 0.05, 0.3);
        let out = simulate(&params, &SimConfig { horizon: 5, n_paths: 2, seed: 1 }).unwrap();
        let adj = out.adjusted_returns(1);
        for i in 0..5 {
            assert_abs_diff_eq!(
                adj[i],
                out.returns[1][i] - 0.5 * out.variances[1][i],
                epsilon = 0.0
            );
        }
    }

    #[test]
    fn sigma1_squared_honors_x1() {
        let params = p(0.02, 0.9, 0.05, 0.5);
        let out = simulate(&params, &SimConfig { horizon: 1, n_paths: 3, seed: 5 }).unwrap();
        for pth in 0..3 {
            assert_abs_diff_eq!(out.variances[pth][0], 0.02f64.powi(2) * 1.5, epsilon = 1e-18);
        }
    }
}
