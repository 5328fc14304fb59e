//! Gauss-Hermite quadrature for Gaussian expectations.
//!
//! Nodes/weights for the weight function e^{-x^2} via Golub-Welsch: the
//! eigenvalues of the symmetric tridiagonal Jacobi matrix are the nodes and
//! the squared first eigenvector components give the weights. Stable for any
//! practical node count (Newton-from-asymptotic-guess schemes derail beyond
//! ~128 nodes). Rescaled so that E[g(Y)] = sum_i w_i g(sqrt(2 s2) x_i) for
//! Y ~ N(0, s2).

use std::f64::consts::PI;

/// Nodes and weights for integrating against e^{-x^2}.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    /// Compute an n-point rule.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "need at least one quadrature node");
        // Jacobi matrix: zero diagonal, off-diagonal sqrt(k/2); the last
        // entry of `off` is workspace the sweep writes through
        let mut diag = vec![0.0f64; n];
        let mut off: Vec<f64> = (1..n).map(|k| (k as f64 / 2.0).sqrt()).collect();
        off.push(0.0);
        let mut first_row = vec![0.0f64; n];
        first_row[0] = 1.0;
        imtql2_first_row(&mut diag, &mut off, &mut first_row);

        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| diag[a].total_cmp(&diag[b]));
        let nodes: Vec<f64> = idx.iter().map(|&i| diag[i]).collect();
        let sqrt_pi = PI.sqrt();
        let weights: Vec<f64> = idx.iter().map(|&i| sqrt_pi * first_row[i] * first_row[i]).collect();
        GaussHermite { nodes, weights }
    }

    /// E[g(Y)] for Y ~ N(0, s2).
    pub fn gaussian_mean<F: Fn(f64) -> f64>(&self, s2: f64, g: F) -> f64 {
        debug_assert!(s2 >= 0.0);
        let scale = (2.0 * s2).sqrt();
        let inv_sqrt_pi = 1.0 / PI.sqrt();
        // Kahan sum: the smile double sums stack thousands of these
        let mut sum = 0.0;
        let mut c = 0.0;
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            let term = w * g(scale * x);
            let y = term - c;
            let t = sum + y;
            c = (t - sum) - y;
            sum = t;
        }
        sum * inv_sqrt_pi
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Gauss-Legendre rule on [-1, 1], for piecewise-smooth Gaussian expectations
/// where a fixed Hermite rule only converges algebraically (see
/// [`GaussLegendre::gaussian_mean_with_kinks`]).
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "need at least one quadrature node");
        let mut diag = vec![0.0f64; n];
        let mut off: Vec<f64> = (1..n)
            .map(|k| {
                let k = k as f64;
                k / (4.0 * k * k - 1.0).sqrt()
            })
            .collect();
        off.push(0.0);
        let mut first_row = vec![0.0f64; n];
        first_row[0] = 1.0;
        imtql2_first_row(&mut diag, &mut off, &mut first_row);
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| diag[a].total_cmp(&diag[b]));
        let nodes: Vec<f64> = idx.iter().map(|&i| diag[i]).collect();
        let weights: Vec<f64> = idx.iter().map(|&i| 2.0 * first_row[i] * first_row[i]).collect();
        GaussLegendre { nodes, weights }
    }

    /// Integral of f over [a, b].
    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let mut sum = 0.0;
        let mut c = 0.0;
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            let term = w * f(mid + half * x);
            let y = term - c;
            let t = sum + y;
            c = (t - sum) - y;
            sum = t;
        }
        sum * half
    }

    /// E[g(Y)], Y ~ N(0, s2), for g that is smooth except at the given
    /// breakpoints: the integration domain [-12 sigma, 12 sigma] is split at
    /// the breakpoints (and into panels at most 4 sigma wide), so every panel
    /// sees a smooth integrand and converges spectrally.
    pub fn gaussian_mean_with_kinks<F: Fn(f64) -> f64>(&self, s2: f64, breaks: &[f64], g: F) -> f64 {
        if s2 == 0.0 {
            return g(0.0);
        }
        let s = s2.sqrt();
        let limit = 12.0 * s;
        let mut cuts: Vec<f64> = vec![-limit];
        for &b in breaks {
            if b > -limit && b < limit {
                cuts.push(b);
            }
        }
        cuts.push(limit);
        cuts.sort_by(f64::total_cmp);
        let density = |y: f64| (-0.5 * y * y / s2).exp() / (s * (2.0 * PI).sqrt());
        let mut total = 0.0;
        for win in cuts.windows(2) {
            let (lo, hi) = (win[0], win[1]);
            let width = hi - lo;
            if width <= 0.0 {
                continue;
            }
            let panels = (width / (4.0 * s)).ceil().max(1.0) as usize;
            let step = width / panels as f64;
            for k in 0..panels {
                let a = lo + k as f64 * step;
                total += self.integrate(a, a + step, |y| g(y) * density(y));
            }
        }
        total
    }
}

/// Implicit-shift QL for a symmetric tridiagonal matrix, accumulating only
/// the first row of the eigenvector matrix (EISPACK imtql2 specialization).
fn imtql2_first_row(d: &mut [f64], e: &mut [f64], z: &mut [f64]) {
    let n = d.len();
    if n == 1 {
        return;
    }
    for l in 0..n {
        let mut iter = 0;
        loop {
            // first negligible off-diagonal at or after l
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter <= 50, "QL iteration failed to converge");
            // Wilkinson shift
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c) = (1.0f64, 1.0f64);
            let mut p = 0.0f64;
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                f = z[i + 1];
                z[i + 1] = s * z[i] + c * f;
                z[i] = c * z[i] - s * f;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
}
