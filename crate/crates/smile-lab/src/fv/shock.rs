//! Shock functions f driving the forward-variance response to daily returns.
//!
//! A shock must satisfy E[f(eps)] = 0 under standard normal eps. The smile and
//! skew formulas only ever need two Gaussian functionals of f:
//! `conditional_mean(a, s2)` = E[f(a + Y)] and `deriv_mean(s2)` = E[f'(Y)]
//! for Y ~ N(0, s2). Shocks may evaluate those in closed form; arbitrary f
//! falls back to Gauss-Hermite quadrature.

use std::sync::Arc;

use crate::normal;
use crate::quad::{GaussHermite, GaussLegendre};

pub trait Shock: Send + Sync {
    /// Pointwise f(x).
    fn f(&self, x: f64) -> f64;

    /// Pointwise f'(x).
    fn df(&self, x: f64) -> f64;

    /// E[f(a + Y)] for Y ~ N(0, s2).
    fn conditional_mean(&self, a: f64, s2: f64) -> f64;

    /// E[f'(Y)] for Y ~ N(0, s2).
    fn deriv_mean(&self, s2: f64) -> f64;
}

/// f(x) = x. The Bergomi-Guyon linear case: skew and skewness coincide.
#[derive(Debug, Clone, Copy, Default)]
pub struct LinearShock;

impl Shock for LinearShock {
    fn f(&self, x: f64) -> f64 {
        x
    }

    fn df(&self, _x: f64) -> f64 {
        1.0
    }

    fn conditional_mean(&self, a: f64, _s2: f64) -> f64 {
        a
    }

    fn deriv_mean(&self, _s2: f64) -> f64 {
        1.0
    }
}

/// f(x) = x^2 1_{x<0} - 1/2, the fully asymmetric GARCH shock.
///
/// Only negative returns feed the variance. Note deriv_mean is negative:
/// E[f'(Y)] = E[2Y 1_{Y<0}] = -sqrt(2/pi) sqrt(s2); the sign is carried here
/// rather than reinstated in the skew formulas, so the GARCH skew comes out
/// negative without any inserted sign.
#[derive(Debug, Clone, Copy, Default)]
pub struct GarchShock;

const SQRT_2_OVER_PI: f64 = 0.7978845608028653558798921198687637369;

impl Shock for GarchShock {
    fn f(&self, x: f64) -> f64 {
        (if x < 0.0 { x * x } else { 0.0 }) - 0.5
    }

    fn df(&self, x: f64) -> f64 {
        if x < 0.0 {
            2.0 * x
        } else {
            0.0
        }
    }

    fn conditional_mean(&self, a: f64, s2: f64) -> f64 {
        if s2 == 0.0 {
            return self.f(a);
        }
        let s = s2.sqrt();
        let alpha = -a / s;
        // E[(a+Y)^2 1_{a+Y<0}] = (a^2+s2) N(alpha) - a s phi(alpha)
        (a * a + s2) * normal::cdf(alpha) - a * s * normal::pdf(alpha) - 0.5
    }

    fn deriv_mean(&self, s2: f64) -> f64 {
        -SQRT_2_OVER_PI * s2.sqrt()
    }
}

/// Arbitrary shock evaluated numerically: Gauss-Hermite (64 nodes by
/// default) for smooth f, or kink-split Gauss-Legendre panels when the shock
/// is only piecewise smooth — a fixed Hermite rule converges algebraically
/// across a kink and stalls near 1e-3, nowhere near quadrature tolerance.
pub struct QuadratureShock {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    df: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    hermite: GaussHermite,
    kinks: Vec<f64>,
    legendre: Option<GaussLegendre>,
}

impl QuadratureShock {
    pub fn new(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self::with_nodes(f, df, 64)
    }

    pub fn with_nodes(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
        nodes: usize,
    ) -> Self {
        QuadratureShock {
            f: Arc::new(f),
            df: Arc::new(df),
            hermite: GaussHermite::new(nodes),
            kinks: Vec::new(),
            legendre: None,
        }
    }

    /// Declare the points where f (or f') is not smooth; expectations then
    /// integrate piecewise and recover spectral accuracy.
    pub fn with_kinks(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
        kinks: Vec<f64>,
    ) -> Self {
        QuadratureShock {
            f: Arc::new(f),
            df: Arc::new(df),
            hermite: GaussHermite::new(64),
            kinks,
            legendre: Some(GaussLegendre::new(32)),
        }
    }
}

impl Shock for QuadratureShock {
    fn f(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    fn df(&self, x: f64) -> f64 {
        (self.df)(x)
    }

    fn conditional_mean(&self, a: f64, s2: f64) -> f64 {
        if s2 == 0.0 {
            return (self.f)(a);
        }
        let f = &self.f;
        match &self.legendre {
            Some(gl) => {
                // f(a + y) kinks at y = k - a
                let breaks: Vec<f64> = self.kinks.iter().map(|k| k - a).collect();
                gl.gaussian_mean_with_kinks(s2, &breaks, |y| f(a + y))
            }
            None => self.hermite.gaussian_mean(s2, |y| f(a + y)),
        }
    }

    fn deriv_mean(&self, s2: f64) -> f64 {
        if s2 == 0.0 {
            return (self.df)(0.0);
        }
        let df = &self.df;
        match &self.legendre {
            Some(gl) => gl.gaussian_mean_with_kinks(s2, &self.kinks, |y| df(y)),
            None => self.hermite.gaussian_mean(s2, |y| df(y)),
        }
    }
}

/// Sign-flipped wrapper: the shock -f. Used by the sign-covariance tests.
pub struct NegatedShock<S: Shock>(pub S);

impl<S: Shock> Shock for NegatedShock<S> {
    fn f(&self, x: f64) -> f64 {
        -self.0.f(x)
    }

    fn df(&self, x: f64) -> f64 {
        -self.0.df(x)
    }

    fn conditional_mean(&self, a: f64, s2: f64) -> f64 {
        -self.0.conditional_mean(a, s2)
    }

    fn deriv_mean(&self, s2: f64) -> f64 {
        -self.0.deriv_mean(s2)
    }
}
