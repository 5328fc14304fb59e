//! Generic discrete forward-variance framework: smile, skew, skewness,
//! implied leverage and the skew-stickiness ratio at order 1 in vol-of-vol,
//! for an arbitrary initial curve, coupling kernel and shock function.
//!
//! Daily grid throughout: the initial curve holds v_1^j (variance per day)
//! for days j = 1..=horizon, V_T = sum_{j<=T} v_1^j, and vols are per
//! sqrt(day). Annualization is an I/O concern (see [`crate::units`]).

pub mod shock;

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sum::KahanSum;
pub use shock::{GarchShock, LinearShock, NegatedShock, QuadratureShock, Shock};

/// Coupling kernel lambda_i^j evaluated on the initial deterministic curve,
/// called with 1-based day indices i < j.
pub type Kernel = Arc<dyn Fn(usize, usize, &[f64]) -> f64 + Send + Sync>;

/// The model of the framework: initial curve, kernel, vol-of-vol and shock.
#[derive(Clone)]
pub struct ForwardVarianceModel {
    curve: Vec<f64>,
    kernel: Kernel,
    vol_of_vol: f64,
    shock: Arc<dyn Shock>,
}

impl ForwardVarianceModel {
    pub fn new(
        curve: Vec<f64>,
        vol_of_vol: f64,
        kernel: Kernel,
        shock: Arc<dyn Shock>,
    ) -> Result<Self> {
        if curve.is_empty() {
            return Err(Error::InvalidInput("initial curve is empty".into()));
        }
        if let Some(v) = curve.iter().find(|v| !v.is_finite() || **v <= 0.0) {
            return Err(Error::InvalidInput(format!("initial curve entries must be finite and > 0, got {v}")));
        }
        if !vol_of_vol.is_finite() || vol_of_vol < 0.0 {
            return Err(Error::InvalidInput(format!("vol-of-vol must be finite and >= 0, got {vol_of_vol}")));
        }
        Ok(Self { curve, kernel, vol_of_vol, shock })
    }

    /// Maximum maturity covered by the initial curve, in days.
    pub fn horizon(&self) -> usize {
        self.curve.len()
    }

    pub fn vol_of_vol(&self) -> f64 {
        self.vol_of_vol
    }

    pub fn initial_curve(&self) -> &[f64] {
        &self.curve
    }

    pub fn shock(&self) -> &dyn Shock {
        &*self.shock
    }

    /// v_1^j (1-based).
    fn v1(&self, j: usize) -> f64 {
        self.curve[j - 1]
    }

    /// lambda_i^j on the initial curve (1-based, i < j).
    fn lambda(&self, i: usize, j: usize) -> f64 {
        (self.kernel)(i, j, &self.curve)
    }

    fn check_maturity(&self, t: usize, need: usize) -> Result<()> {
        if t < 1 {
            return Err(Error::OutOfRange("maturity must be >= 1 day".into()));
        }
        if need > self.curve.len() {
            return Err(Error::OutOfRange(format!(
                "maturity {t} needs the curve up to day {need}, but it covers only {}",
                self.curve.len()
            )));
        }
        Ok(())
    }

    /// V_T = sum_{j=1}^T v_1^j.
    pub fn total_variance(&self, t: usize) -> Result<f64> {
        self.check_maturity(t, t)?;
        let mut k = KahanSum::new();
        for j in 1..=t {
            k.add(self.v1(j));
        }
        Ok(k.value())
    }

    /// sigma_ATM,T = sqrt(V_T / T), per sqrt(day).
    pub fn atm_vol(&self, t: usize) -> Result<f64> {
        Ok((self.total_variance(t)? / t as f64).sqrt())
    }

    /// Column sums c_j = sum_{i=j+1}^T lambda_j^i for j = 1..T-1 (index j-1).
    fn kernel_column_sums(&self, t: usize) -> Vec<f64> {
        let mut out = vec![0.0; t];
        for j in 1..t {
            let mut k = KahanSum::new();
            for i in (j + 1)..=t {
                k.add(self.lambda(j, i));
            }
            out[j - 1] = k.value();
        }
        out
    }

    /// The order-1 smile exactly as the theory produces it, including the
    /// at-the-money residual: for non-linear shocks E[f(Y_j)] does not vanish
    /// when Var(Y_j) < 1, so the curve at M = 0 sits slightly off
    /// sqrt(V_T/T) — a genuine first-order effect (the Monte Carlo lab
    /// confirms it). Moneyness is the shifted convention
    /// M = (ln(K/S) + V_T/2) / (sigma_ATM sqrt(T)).
    pub fn smile_curve_raw(&self, t: usize, moneyness: &[f64]) -> Result<Vec<f64>> {
        self.smile_with_anchor(t, moneyness, false)
    }

    /// The order-1 smile anchored so that M = 0 returns exactly sigma_ATM
    /// (the M-independent residual is subtracted; the slope is untouched).
    pub fn smile_curve(&self, t: usize, moneyness: &[f64]) -> Result<Vec<f64>> {
        self.smile_with_anchor(t, moneyness, true)
    }

    /// Raw smile value at M = 0 minus sigma_ATM: the first-order ATM shift
    /// dropped by the anchored convention. Zero for linear shocks.
    pub fn atm_vol_correction(&self, t: usize) -> Result<f64> {
        Ok(self.smile_correction_at(t, 0.0, &self.kernel_column_sums(t), self.total_variance(t)?))
    }

    fn smile_with_anchor(&self, t: usize, moneyness: &[f64], anchored: bool) -> Result<Vec<f64>> {
        if t < 2 {
            return Err(Error::OutOfRange("smile needs a maturity of at least 2 days".into()));
        }
        self.check_maturity(t, t)?;
        let vt = self.total_variance(t)?;
        let atm = (vt / t as f64).sqrt();
        let cols = self.kernel_column_sums(t);
        let anchor = if anchored { self.smile_correction_at(t, 0.0, &cols, vt) } else { 0.0 };
        let mut out = Vec::with_capacity(moneyness.len());
        for &m in moneyness {
            if !m.is_finite() {
                return Err(Error::InvalidInput(format!("moneyness must be finite, got {m}")));
            }
            let vol = atm + self.smile_correction_at(t, m, &cols, vt) - anchor;
            if vol <= 0.0 {
                return Err(Error::VolOfVolTooLarge(format!(
                    "first-order smile vol is not positive at M = {m} (got {vol:e}); reduce vol-of-vol"
                )));
            }
            out.push(vol);
        }
        Ok(out)
    }

    /// nu/(2 sqrt(V_T T)) * sum_j c_j E[f(a_j + Y_j)] at shifted moneyness m.
    fn smile_correction_at(&self, t: usize, m: f64, cols: &[f64], vt: f64) -> f64 {
        let mut sum = KahanSum::new();
        for j in 1..t {
            let vj = self.v1(j);
            let a = m * (vj / vt).sqrt();
            let s2 = (1.0 - vj / vt).max(0.0);
            sum.add(cols[j - 1] * self.shock.conditional_mean(a, s2));
        }
        self.vol_of_vol / (2.0 * (vt * t as f64).sqrt()) * sum.value()
    }

    /// Skew_T = nu/(2 V_T^{3/2}) sum_{i,j<i} sqrt(v_1^j) lambda_j^i E[f'(Y_j)].
    ///
    /// T = 1 has no double sum and returns 0 by convention.
    pub fn skew(&self, t: usize) -> Result<f64> {
        self.check_maturity(t, t)?;
        if t == 1 {
            return Ok(0.0);
        }
        let vt = self.total_variance(t)?;
        let cols = self.kernel_column_sums(t);
        let mut sum = KahanSum::new();
        for j in 1..t {
            let vj = self.v1(j);
            let s2 = (1.0 - vj / vt).max(0.0);
            sum.add(vj.sqrt() * cols[j - 1] * self.shock.deriv_mean(s2));
        }
        Ok(self.vol_of_vol / (2.0 * vt.powf(1.5)) * sum.value())
    }

    /// S_T/6 = nu/(2 V_T^{3/2}) (sum sqrt(v_1^j) lambda_j^i) E[f'(eps)]:
    /// the cumulant-expansion skewness proxy. Same conventions as [`skew`].
    pub fn skewness(&self, t: usize) -> Result<f64> {
        self.check_maturity(t, t)?;
        if t == 1 {
            return Ok(0.0);
        }
        let vt = self.total_variance(t)?;
        let cols = self.kernel_column_sums(t);
        let mut sum = KahanSum::new();
        for j in 1..t {
            sum.add(self.v1(j).sqrt() * cols[j - 1] * self.shock.deriv_mean(1.0));
        }
        Ok(self.vol_of_vol / (2.0 * vt.powf(1.5)) * sum.value())
    }

    /// gamma_T = nu E[f'(eps)] / (2 sqrt(T sigma_1^2 V_T)) * sum_{j=2}^{T+1} lambda_1^j.
    /// Needs the curve defined up to day T+1.
    pub fn implied_leverage(&self, t: usize) -> Result<f64> {
        self.check_maturity(t, t + 1)?;
        let vt = self.total_variance(t)?;
        let sigma1_sq = self.v1(1);
        let mut sum = KahanSum::new();
        for j in 2..=(t + 1) {
            sum.add(self.lambda(1, j));
        }
        Ok(self.vol_of_vol * self.shock.deriv_mean(1.0) / (2.0 * (t as f64 * sigma1_sq * vt).sqrt())
            * sum.value())
    }

    /// E[r_i r_{i+lag}^2] = nu sqrt(v_i^i) lambda_i^{i+lag} E[f'(eps)], with
    /// v_i^i approximated by v_1^i at order nu^0.
    pub fn leverage_from_lambda(&self, i: usize, lag: usize) -> Result<f64> {
        if i < 1 || lag < 1 {
            return Err(Error::OutOfRange("need day i >= 1 and lag >= 1".into()));
        }
        self.check_maturity(i + lag, i + lag)?;
        Ok(self.vol_of_vol * self.v1(i).sqrt() * self.lambda(i, i + lag) * self.shock.deriv_mean(1.0))
    }

    /// Bergomi's linear-model SSR:
    /// (V_T/sigma_1) * sum_{j=2}^{T+1} lambda_1^j / sum_{i,j<i} sqrt(v_1^j) lambda_j^i.
    pub fn ssr_linear(&self, t: usize) -> Result<f64> {
        if t < 2 {
            return Err(Error::OutOfRange("SSR needs a maturity of at least 2 days".into()));
        }
        self.check_maturity(t, t + 1)?;
        let vt = self.total_variance(t)?;
        let sigma1 = self.v1(1).sqrt();
        let mut num = KahanSum::new();
        for j in 2..=(t + 1) {
            num.add(self.lambda(1, j));
        }
        let cols = self.kernel_column_sums(t);
        let mut den = KahanSum::new();
        for j in 1..t {
            den.add(self.v1(j).sqrt() * cols[j - 1]);
        }
        if den.value() == 0.0 {
            return Err(Error::Degenerate("all kernel couplings vanish below maturity".into()));
        }
        Ok(vt / sigma1 * num.value() / den.value())
    }

    /// The full SSR: ssr_linear corrected by the skewness/skew ratio. Equals
    /// implied_leverage * sqrt(T) / skew identically.
    pub fn ssr(&self, t: usize) -> Result<f64> {
        let skew = self.skew(t)?;
        if skew == 0.0 {
            return Err(Error::Degenerate("skew is zero; the SSR is undefined".into()));
        }
        let skewness = self.skewness(t)?;
        Ok(self.ssr_linear(t)? * (skewness / skew))
    }

    /// Everything the smile dynamics theory says about one maturity.
    pub fn smile_report(&self, t: usize) -> Result<SmileReport> {
        let atm_vol = self.atm_vol(t)?;
        let skew = self.skew(t)?;
        let skewness_over_6 = self.skewness(t)?;
        let implied_leverage = self.implied_leverage(t)?;
        let (ssr, correction_factor) = if skew != 0.0 {
            (implied_leverage * (t as f64).sqrt() / skew, skewness_over_6 / skew)
        } else {
            (f64::NAN, f64::NAN)
        };
        Ok(SmileReport {
            maturity: t,
            atm_vol,
            skew,
            skewness_over_6,
            implied_leverage,
            ssr,
            correction_factor,
            atm_vol_correction: self.atm_vol_correction(t)?,
        })
    }
}

/// Per-maturity summary of the order-1 smile dynamics.
///
/// `ssr` is stored as `implied_leverage * sqrt(maturity) / skew` so the
/// definitional identity holds exactly among the fields, and
/// `atm_vol = sqrt(V_T/maturity)`.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SmileReport {
    pub maturity: usize,
    /// Per-sqrt(day) ATM vol, sqrt(V_T/T).
    pub atm_vol: f64,
    pub skew: f64,
    pub skewness_over_6: f64,
    /// Daily-vol change per unit return.
    pub implied_leverage: f64,
    pub ssr: f64,
    /// (S_T/6) / Skew_T.
    pub correction_factor: f64,
    /// First-order ATM shift dropped by the anchored smile convention.
    pub atm_vol_correction: f64,
}

/// gamma_T from observed leverage moments E[r_1 r_j^2], j = 2..=T+1
/// (Eq. route that needs no model assumptions):
/// gamma_T = sum_j E[r_1 r_j^2] / (2 sqrt(T sigma_1^4 V_T)).
pub fn gamma_from_leverage(leverage: &[f64], sigma1: f64, v_t: f64, t: usize) -> Result<f64> {
    if sigma1 <= 0.0 || !sigma1.is_finite() {
        return Err(Error::InvalidInput(format!("sigma_1 must be finite and > 0, got {sigma1}")));
    }
    if t < 1 {
        return Err(Error::OutOfRange("maturity must be >= 1".into()));
    }
    if leverage.len() != t {
        return Err(Error::OutOfRange(format!(
            "need E[r_1 r_j^2] for j = 2..=T+1 ({t} values), got {}",
            leverage.len()
        )));
    }
    let mut sum = KahanSum::new();
    for &x in leverage {
        sum.add(x);
    }
    Ok(sum.value() / (2.0 * (t as f64 * sigma1.powi(4) * v_t).sqrt()))
}

/// SSR for a flat curve and exponential leverage kernel g_L(l) = -A e^{-l/tau}.
#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct FlatExponentialSsr {
    /// Exact discrete ratio sum g_L / sum (1 - l/T) g_L. Saturates to
    /// 2T/(T-1), not 2, as tau -> infinity at fixed small T.
    pub discrete: f64,
    /// The continuous closed form T(1-e^{-T/tau}) / (T - tau(1-e^{-T/tau})),
    /// whose limits are 2 (1 << T << tau) and 1 + tau/T (T >> tau).
    pub continuous: f64,
}

/// Both SSR forms for the flat/exponential case. Independent of the
/// amplitude (it cancels in the ratios); `amplitude` is validated only.
pub fn ssr_flat_exponential(amplitude: f64, tau: f64, t: usize) -> Result<FlatExponentialSsr> {
    if !amplitude.is_finite() || amplitude <= 0.0 {
        return Err(Error::InvalidInput(format!("amplitude must be finite and > 0, got {amplitude}")));
    }
    if !tau.is_finite() || tau <= 0.0 {
        return Err(Error::InvalidInput(format!("tau must be finite and > 0, got {tau}")));
    }
    if t < 2 {
        return Err(Error::OutOfRange("SSR needs a maturity of at least 2 days".into()));
    }
    let tf = t as f64;
    let mut num = KahanSum::new();
    let mut den = KahanSum::new();
    for l in 1..=t {
        let g = (-(l as f64) / tau).exp();
        num.add(g);
        den.add((1.0 - l as f64 / tf) * g);
    }
    let discrete = num.value() / den.value();
    // exp_m1 keeps T - tau(1 - e^{-T/tau}) accurate when T << tau
    let e = -(-tf / tau).exp_m1();
    let continuous = tf * e / (tf - tau * e);
    Ok(FlatExponentialSsr { discrete, continuous })
}

/// ln(K/S) for a shifted moneyness M at total variance V_T:
/// ln(K/S) = M sqrt(V_T) - V_T/2.
pub fn log_strike_from_moneyness(m: f64, v_t: f64) -> f64 {
    m * v_t.sqrt() - 0.5 * v_t
}

/// Shifted moneyness of a strike: (ln(K/S) + V_T/2) / sqrt(V_T).
pub fn moneyness_from_log_strike(ln_k_over_s: f64, v_t: f64) -> f64 {
    (ln_k_over_s + 0.5 * v_t) / v_t.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// The arbitrary non-GARCH model frozen against an independent mpmath
    /// double-sum oracle: v_1^j = 1e-4 (1 + 0.1 sin j),
    /// lambda_j^i = 1e-4 * 0.9^(i-j) (1 + 0.05 cos j), GARCH shock, nu = 0.04.
    fn oracle_model() -> ForwardVarianceModel {
        let curve: Vec<f64> = (1..=13).map(|j| 1e-4 * (1.0 + 0.1 * (j as f64).sin())).collect();
        let kernel: Kernel = Arc::new(|j, i, _c: &[f64]| {
            1e-4 * 0.9f64.powi((i - j) as i32) * (1.0 + 0.05 * (j as f64).cos())
        });
        ForwardVarianceModel::new(curve, 0.04, kernel, Arc::new(GarchShock)).unwrap()
    }

    /// Flat curve, lambda_j^i = -A e^{-(i-j)/tau} (equity-like negative
    /// leverage), linear shock.
    fn flat_exponential_model(sigma2: f64, nu: f64, tau: f64, horizon: usize) -> ForwardVarianceModel {
        let kernel: Kernel =
            Arc::new(move |j, i, _c: &[f64]| -2e-4 * (-((i - j) as f64) / tau).exp());
        ForwardVarianceModel::new(vec![sigma2; horizon], nu, kernel, Arc::new(LinearShock)).unwrap()
    }

    #[test]
    fn total_variance_flat_curve() {
        let m = flat_exponential_model(4e-4, 0.1, 10.0, 50);
        assert_abs_diff_eq!(m.total_variance(30).unwrap(), 30.0 * 4e-4, epsilon = 1e-18);
    }

    #[test]
    fn total_variance_matches_plain_summation() {
        let m = oracle_model();
        let direct: f64 = m.initial_curve()[..12].iter().sum();
        assert_abs_diff_eq!(m.total_variance(12).unwrap(), direct, epsilon = 1e-18);
        assert_abs_diff_eq!(m.total_variance(12).unwrap(), 0.001198746252466668720269, epsilon = 1e-18);
    }

    #[test]
    fn total_variance_range_errors() {
        let m = oracle_model();
        assert!(m.total_variance(0).is_err());
        assert!(m.total_variance(14).is_err());
    }

    #[test]
    fn oracle_model_skew_skewness_gamma_ssr() {
        // frozen mpmath values for T = 12
        let m = oracle_model();
        assert_abs_diff_eq!(m.skew(12).unwrap(), -0.01600682441678148, epsilon = 1e-15);
        assert_abs_diff_eq!(m.skewness(12).unwrap(), -0.01673281283177026, epsilon = 1e-15);
        assert_abs_diff_eq!(m.implied_leverage(12).unwrap(), -0.008475310071153443, epsilon = 1e-15);
        assert_abs_diff_eq!(m.ssr_linear(12).unwrap(), 1.754596528476786, epsilon = 1e-12);
        assert_abs_diff_eq!(m.ssr(12).unwrap(), 1.834176132743465, epsilon = 1e-12);
    }

    #[test]
    fn ssr_definitional_identity() {
        let m = oracle_model();
        for t in 2..=12 {
            let lhs = m.ssr(t).unwrap();
            let rhs = m.implied_leverage(t).unwrap() * (t as f64).sqrt() / m.skew(t).unwrap();
            assert!((lhs - rhs).abs() < 1e-12, "T={t}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn gamma_from_leverage_cross_op_identity() {
        let m = oracle_model();
        for t in 2..=12 {
            let lev: Vec<f64> = (1..=t).map(|lag| m.leverage_from_lambda(1, lag).unwrap()).collect();
            let g = gamma_from_leverage(&lev, m.initial_curve()[0].sqrt(), m.total_variance(t).unwrap(), t)
                .unwrap();
            assert!((g - m.implied_leverage(t).unwrap()).abs() < 1e-12, "T={t}");
        }
    }

    #[test]
    fn gamma_from_leverage_flat_curve_reduction() {
        // with V_T = T sigma^2 the general form reduces to 1/(2 T sigma^3) sum
        let lev = [1e-6, -2e-6, 3e-6];
        let sigma1 = 0.02_f64;
        let t = 3usize;
        let general = gamma_from_leverage(&lev, sigma1, t as f64 * sigma1 * sigma1, t).unwrap();
        let flat: f64 = lev.iter().sum::<f64>() / (2.0 * t as f64 * sigma1.powi(3));
        assert_abs_diff_eq!(general, flat, epsilon = 1e-15 * flat.abs());
    }

    #[test]
    fn gamma_from_leverage_validates() {
        assert!(gamma_from_leverage(&[0.0], 0.0, 1.0, 1).is_err());
        assert!(gamma_from_leverage(&[0.0; 3], 0.1, 1.0, 2).is_err());
        assert_eq!(gamma_from_leverage(&[0.0; 4], 0.1, 4e-2, 4).unwrap(), 0.0);
    }

    #[test]
    fn zero_vol_of_vol_makes_everything_flat() {
        let curve: Vec<f64> = (1..=20).map(|j| 1e-4 * (1.0 + 0.3 * (j as f64 * 0.7).cos())).collect();
        let kernel: Kernel = Arc::new(|_, _, _: &[f64]| 2e-4);
        let m = ForwardVarianceModel::new(curve, 0.0, kernel, Arc::new(GarchShock)).unwrap();
        assert_eq!(m.skew(10).unwrap(), 0.0);
        assert_eq!(m.skewness(10).unwrap(), 0.0);
        assert_eq!(m.implied_leverage(10).unwrap(), 0.0);
        let atm = m.atm_vol(10).unwrap();
        for v in m.smile_curve(10, &[-1.0, -0.3, 0.0, 0.8]).unwrap() {
            assert_abs_diff_eq!(v, atm, epsilon = 1e-18);
        }
    }

    #[test]
    fn smile_is_anchored_at_atm() {
        let m = oracle_model();
        for t in [2usize, 5, 9, 12] {
            let atm = m.atm_vol(t).unwrap();
            let got = m.smile_curve(t, &[0.0]).unwrap()[0];
            assert!((got - atm).abs() < 1e-12, "T={t}");
        }
    }

    #[test]
    fn raw_smile_matches_mpmath_oracle() {
        // GARCH-style model, T=5, nu=0.05, rho=0.9, X1=0.1, v0=0.01 (frozen)
        let (v0, rho, x1) = (0.01_f64, 0.9_f64, 0.1_f64);
        let curve: Vec<f64> = (1..=5).map(|j| v0 * v0 * (1.0 + rho.powi(j - 1) * x1)).collect();
        let kernel: Kernel = Arc::new(move |i, j, _c: &[f64]| {
            v0 * v0 * rho.powi((j - i) as i32 - 1) * (1.0 + rho.powi(i as i32 - 1) * x1)
        });
        let m = ForwardVarianceModel::new(curve, 0.05, kernel, Arc::new(GarchShock)).unwrap();
        let vols = m.smile_curve_raw(5, &[-1.0, 0.0, 1.0]).unwrap();
        assert_abs_diff_eq!(vols[0], 0.01055950752234709, epsilon = 1e-15);
        assert_abs_diff_eq!(vols[1], 0.01035367795951680, epsilon = 1e-15);
        assert_abs_diff_eq!(vols[2], 0.01024339612113499, epsilon = 1e-15);
        // the ATM residual is the raw value minus sqrt(V_T/T)
        let atm = m.atm_vol(5).unwrap();
        assert_abs_diff_eq!(atm, 0.01040145182174104, epsilon = 1e-15);
        assert_abs_diff_eq!(m.atm_vol_correction(5).unwrap(), vols[1] - atm, epsilon = 1e-18);
    }

    #[test]
    fn linear_shock_smile_has_no_atm_residual() {
        let m = flat_exponential_model(4e-4, 0.05, 20.0, 40);
        assert_abs_diff_eq!(m.atm_vol_correction(30).unwrap(), 0.0, epsilon = 1e-18);
    }

    #[test]
    fn linear_identity_skew_equals_skewness() {
        let m = flat_exponential_model(2.5e-4, 0.08, 15.0, 120);
        for t in [2usize, 7, 30, 90] {
            let sk = m.skew(t).unwrap();
            let sn = m.skewness(t).unwrap();
            assert!((sk - sn).abs() < 1e-12, "T={t}: {sk} vs {sn}");
            assert!(sk < 0.0);
        }
    }

    #[test]
    fn linear_model_ssr_equals_ssr_linear() {
        let m = flat_exponential_model(2.5e-4, 0.08, 15.0, 120);
        for t in [2usize, 30, 90] {
            assert!((m.ssr(t).unwrap() - m.ssr_linear(t).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn flat_exponential_model_matches_ssr_closed_form() {
        // lambda proportional to g_L(i-j) on a flat curve recovers the ratio form
        let tau = 50.0;
        let m = flat_exponential_model(4e-4, 0.05, tau, 251);
        let closed = ssr_flat_exponential(0.2, tau, 250).unwrap();
        assert_abs_diff_eq!(m.ssr_linear(250).unwrap(), closed.discrete, epsilon = 1e-10);
    }

    #[test]
    fn ssr_flat_exponential_frozen_values() {
        // mpmath oracles
        let r = ssr_flat_exponential(0.2, 5000.0, 5).unwrap();
        assert_abs_diff_eq!(r.discrete, 2.499500099988667, epsilon = 1e-12);
        assert_abs_diff_eq!(r.continuous, 1.999666722218518, epsilon = 1e-12);
        let r = ssr_flat_exponential(0.2, 50.0, 5000).unwrap();
        assert_abs_diff_eq!(r.discrete, 1.010203390981128, epsilon = 1e-12);
        assert_abs_diff_eq!(r.continuous, 1.010101010101010, epsilon = 1e-12);
        let r = ssr_flat_exponential(0.2, 50.0, 250).unwrap();
        assert_abs_diff_eq!(r.discrete, 1.242580260815069, epsilon = 1e-12);
        assert_abs_diff_eq!(r.continuous, 1.239489662338455, epsilon = 1e-12);
        // the discrete ratio approaches 2 only for 1 << T << tau
        let r = ssr_flat_exponential(0.2, 5000.0, 50).unwrap();
        assert_abs_diff_eq!(r.discrete, 2.037352832490174, epsilon = 1e-12);
        assert!((r.discrete - 2.0).abs() / 2.0 < 0.05);
    }

    #[test]
    fn ssr_flat_exponential_amplitude_cancels() {
        let a = ssr_flat_exponential(0.1, 40.0, 100).unwrap();
        let b = ssr_flat_exponential(0.7, 40.0, 100).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sign_covariance_under_shock_negation() {
        let curve: Vec<f64> = (1..=21).map(|j| 1e-4 * (1.0 + 0.2 * (j as f64 * 1.3).sin())).collect();
        let kernel: Kernel =
            Arc::new(|j, i, _c: &[f64]| 1.5e-4 * 0.88f64.powi((i - j) as i32) * (1.0 + 0.1 * (j as f64).sin()));
        let pos =
            ForwardVarianceModel::new(curve.clone(), 0.05, kernel.clone(), Arc::new(GarchShock)).unwrap();
        let neg =
            ForwardVarianceModel::new(curve, 0.05, kernel, Arc::new(NegatedShock(GarchShock))).unwrap();
        for t in [2usize, 10, 20] {
            assert_abs_diff_eq!(pos.skew(t).unwrap(), -neg.skew(t).unwrap(), epsilon = 1e-16);
            assert_abs_diff_eq!(pos.skewness(t).unwrap(), -neg.skewness(t).unwrap(), epsilon = 1e-16);
            if t < 21 {
                assert_abs_diff_eq!(
                    pos.implied_leverage(t).unwrap(),
                    -neg.implied_leverage(t).unwrap(),
                    epsilon = 1e-16
                );
                assert_abs_diff_eq!(pos.ssr(t).unwrap(), neg.ssr(t).unwrap(), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn t_equals_one_returns_zero_skew() {
        let m = oracle_model();
        assert_eq!(m.skew(1).unwrap(), 0.0);
        assert_eq!(m.skewness(1).unwrap(), 0.0);
        assert!(m.skew(0).is_err());
    }

    #[test]
    fn smile_report_internally_consistent() {
        let m = oracle_model();
        let r = m.smile_report(10).unwrap();
        assert_eq!(r.ssr, r.implied_leverage * 10f64.sqrt() / r.skew);
        assert_eq!(r.atm_vol, m.atm_vol(10).unwrap());
        assert_eq!(r.correction_factor, r.skewness_over_6 / r.skew);
    }

    #[test]
    fn moneyness_conversion_round_trip() {
        let vt = 0.0432;
        for m in [-2.0, -0.5, 0.0, 1.0, 2.5] {
            let k = log_strike_from_moneyness(m, vt);
            assert_abs_diff_eq!(moneyness_from_log_strike(k, vt), m, epsilon = 1e-14);
        }
    }

    #[test]
    fn vol_of_vol_too_large_is_reported() {
        let kernel: Kernel = Arc::new(|j, i, _c: &[f64]| 2e-4 * 0.95f64.powi((i - j) as i32));
        let m = ForwardVarianceModel::new(vec![1e-6; 40], 80.0, kernel, Arc::new(LinearShock)).unwrap();
        match m.smile_curve(30, &[-8.0]) {
            Err(Error::VolOfVolTooLarge(_)) => {}
            other => panic!("expected VolOfVolTooLarge, got {other:?}"),
        }
    }

    #[test]
    fn degenerate_kernel_is_an_error_for_ssr() {
        let kernel: Kernel = Arc::new(|_, _, _: &[f64]| 0.0);
        let m = ForwardVarianceModel::new(vec![1e-4; 10], 0.1, kernel, Arc::new(LinearShock)).unwrap();
        assert!(matches!(m.ssr_linear(5), Err(Error::Degenerate(_))));
        assert!(matches!(m.ssr(5), Err(Error::Degenerate(_))));
    }
}
