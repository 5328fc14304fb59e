//! Black-Scholes pricing in the total-variance parametrization.
//!
//! Everything here works on the forward with zero rates and dividends: a call
//! is BS(S, v) = S N(d+) - K N(d-) with d± = (ln(S/K) ± v/2)/sqrt(v) and
//! v the *total* variance to maturity. Daily/annual conventions live upstream.

use crate::error::{Error, Result};
use crate::normal;

/// Inputs to the pricer. `total_variance` is sigma^2 * T, dimensionless.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsInputs {
    pub spot: f64,
    pub strike: f64,
    pub total_variance: f64,
}

impl BsInputs {
    pub fn new(spot: f64, strike: f64, total_variance: f64) -> Result<Self> {
        if !spot.is_finite() || spot <= 0.0 {
            return Err(Error::InvalidInput(format!("spot must be finite and > 0, got {spot}")));
        }
        if !strike.is_finite() || strike <= 0.0 {
            return Err(Error::InvalidInput(format!("strike must be finite and > 0, got {strike}")));
        }
        if !total_variance.is_finite() || total_variance < 0.0 {
            return Err(Error::InvalidInput(format!(
                "total variance must be finite and >= 0, got {total_variance}"
            )));
        }
        Ok(Self { spot, strike, total_variance })
    }

    #[inline]
    fn d_plus(&self) -> f64 {
        let sv = self.total_variance.sqrt();
        ((self.spot / self.strike).ln() + 0.5 * self.total_variance) / sv
    }
}

/// Undiscounted call price. v = 0 is exact intrinsic value, not a limit.
pub fn call_price(inputs: BsInputs) -> f64 {
    let BsInputs { spot, strike, total_variance: v } = inputs;
    if v == 0.0 {
        return (spot - strike).max(0.0);
    }
    let sv = v.sqrt();
    let dp = ((spot / strike).ln() + 0.5 * v) / sv;
    spot * normal::cdf(dp) - strike * normal::cdf(dp - sv)
}

/// The four derivatives of BS(S, v): dBS/dS, dBS/dv, d2BS/dv2, d2BS/dSdv.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Greeks {
    pub d_spot: f64,
    pub d_variance: f64,
    pub d2_variance: f64,
    pub d_spot_d_variance: f64,
}

/// Closed-form derivatives. Singular at v = 0, which is rejected.
pub fn greeks(inputs: BsInputs) -> Result<Greeks> {
    let BsInputs { spot, strike, total_variance: v } = inputs;
    if v <= 0.0 {
        return Err(Error::InvalidInput(
            "greeks need total variance > 0 (derivatives singular at v = 0)".into(),
        ));
    }
    let lk = (spot / strike).ln();
    let dp = inputs.d_plus();
    let phi = normal::pdf(dp);
    let d_spot = normal::cdf(dp);
    let d_variance = spot / (2.0 * v.sqrt()) * phi;
    let d2_variance =
        -spot / (4.0 * v.powf(1.5)) * phi + spot / (4.0 * v.powf(2.5)) * (lk * lk - v * v / 4.0) * phi;
    let d_spot_d_variance = (1.0 / (4.0 * v.sqrt()) - lk / (2.0 * v.powf(1.5))) * phi;
    Ok(Greeks { d_spot, d_variance, d2_variance, d_spot_d_variance })
}

/// Total implied variance from an undiscounted call price.
///
/// Safeguarded Newton on v using dBS/dv, bracketed by bisection bounds
/// [1e-12, 16]; vega vanishes deep ITM/OTM so raw Newton is unsafe.
pub fn implied_total_variance(price: f64, spot: f64, strike: f64) -> Result<f64> {
    if !price.is_finite() || !spot.is_finite() || !strike.is_finite() || spot <= 0.0 || strike <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "implied variance needs finite price and positive spot/strike (price={price}, S={spot}, K={strike})"
        )));
    }
    let intrinsic = (spot - strike).max(0.0);
    if price <= intrinsic {
        return Err(Error::NoArbitrage(format!(
            "price {price} at or below intrinsic value {intrinsic}"
        )));
    }
    if price >= spot {
        return Err(Error::NoArbitrage(format!("price {price} at or above spot {spot}")));
    }

    let (mut lo, mut hi) = (1e-12_f64, 16.0_f64);
    let f = |v: f64| call_price(BsInputs { spot, strike, total_variance: v }) - price;
    // price is strictly increasing in v; make sure the bracket actually holds
    if f(lo) > 0.0 {
        return Ok(lo);
    }
    if f(hi) < 0.0 {
        return Err(Error::NoArbitrage(format!(
            "price {price} above the v = 16 bound (S={spot}, K={strike})"
        )));
    }

    // price tolerance well below the spec'd 1e-10; the bracket-width stop
    // keeps the round trip at ~1e-10 relative in v even where vega is tiny
    let price_tol = 1e-13 * spot.max(1.0);
    const MAX_ITERS: usize = 200;
    let mut v = 0.5 * (lo + hi);
    for _ in 0..MAX_ITERS {
        let diff = f(v);
        if diff.abs() < price_tol || (hi - lo) < 1e-11 * v {
            return Ok(v);
        }
        if diff > 0.0 {
            hi = v;
        } else {
            lo = v;
        }
        let vega = spot / (2.0 * v.sqrt()) * normal::pdf(((spot / strike).ln() + 0.5 * v) / v.sqrt());
        let newton = v - diff / vega;
        v = if vega > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Err(Error::NonConvergence { what: "implied total variance".into(), iterations: MAX_ITERS })
}
