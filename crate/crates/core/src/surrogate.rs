//! The exponential reparametrization that makes non-monotone DR-submodular
//! maximization 1/e-linearizable.
//!
//! For `f >= 0` on `[0,1]^d` the surrogate potential
//!
//! ```text
//! F(x) = ∫_0^1 e^{z-1} / ((1 - e^{-1}) z) · (f(1 - e^{-z x}) - f(0)) dz
//! ```
//!
//! satisfies `(1/e) f(y) - f(h(x)) <= (1 - 1/e) <∇F(x), y - x>` with
//! `h(x) = 1 - e^{-x}`. Its gradient is an expectation over `z` with density
//! `p(z) = e^{z-1} / (1 - e^{-1})`, so a single gradient query at
//! `h_z(x)` gives an unbiased estimate of `∇F(x)` (the BQND estimator).

use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::objectives::{Objective, StochasticOracle};
use crate::quadrature::GaussLegendre;
use crate::vecops::dot;

/// Approximation coefficient `1/e`.
pub const ALPHA: f64 = 0.367_879_441_171_442_33;
/// Scaling coefficient `1 - 1/e`.
pub const BETA: f64 = 1.0 - ALPHA;
/// Default number of Gauss–Legendre nodes.
pub const DEFAULT_QUAD_NODES: usize = 128;
/// Smallest accepted node count.
pub const MIN_QUAD_NODES: usize = 64;

/// Below this `z` the potential integrand is replaced by its analytic limit.
const Z_SINGULAR: f64 = 1e-6;

/// Certification tolerance for the exact-arithmetic inequality.
pub const LEMMA_TOL: f64 = 1e-9;
/// Certification tolerance for the quadrature-mediated inequality.
pub const LINEARIZATION_TOL: f64 = 1e-8;

/// `1 - e^{-x}` coordinatewise.
pub fn h_map(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| -(-v).exp_m1()).collect()
}

/// `1 - e^{-z x}` coordinatewise.
pub fn h_z_map(x: &[f64], z: f64) -> Vec<f64> {
    x.iter().map(|v| -(-z * v).exp_m1()).collect()
}

/// Probabilistic sum `1 - (1 - x)(1 - y)`.
pub fn prob_sum(x: &[f64], y: &[f64]) -> Vec<f64> {
    // Symmetric form keeps `⊕` exactly commutative and `x ⊕ 0 = x` exact.
    x.iter()
        .zip(y)
        .map(|(&a, &b)| {
            if a == 1.0 || b == 1.0 {
                1.0
            } else {
                (a + b - a * b).clamp(0.0, 1.0)
            }
        })
        .collect()
}

/// Density of the reweighting distribution on `[0, 1]`.
#[inline]
pub fn z_density(z: f64) -> f64 {
    (z - 1.0).exp() / BETA
}

/// Its CDF, `(e^{z-1} - e^{-1}) / (1 - e^{-1})`.
pub fn z_cdf(z: f64) -> f64 {
    ((z - 1.0).exp() - ALPHA) / BETA
}

/// A draw from the reweighting distribution together with its uniform seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZSample {
    pub z: f64,
    pub u: f64,
}

/// Inverse-CDF transform `z = 1 + ln(e^{-1} + u (1 - e^{-1}))`.
pub fn sample_z(u: f64) -> Result<ZSample> {
    if !(0.0..1.0).contains(&u) {
        return Err(Error::InvalidParameter(format!("uniform draw {u} outside [0, 1)")));
    }
    // ln(e^{-1} + uβ) + 1 = ln1p(u (e - 1)), which is exact at u = 0.
    let z = (u * (std::f64::consts::E - 1.0)).ln_1p();
    Ok(ZSample { z, u })
}

/// Draws a fresh `ZSample` from `rng`.
pub fn draw_z<R: Rng + ?Sized>(rng: &mut R) -> ZSample {
    sample_z(rng.random::<f64>()).expect("uniform draw lies in [0, 1)")
}

/// A function bundled with its quadrature rule and linearization constants.
#[derive(Debug, Clone, Copy)]
pub struct SurrogateContext<'a> {
    pub objective: &'a Objective,
    rule: &'static GaussLegendre,
    pub alpha: f64,
    pub beta: f64,
}

impl<'a> SurrogateContext<'a> {
    pub fn new(objective: &'a Objective, quad_nodes: usize) -> Result<Self> {
        if quad_nodes < MIN_QUAD_NODES {
            return Err(Error::InvalidParameter(format!(
                "quadrature needs at least {MIN_QUAD_NODES} nodes, got {quad_nodes}"
            )));
        }
        Ok(Self {
            objective,
            rule: GaussLegendre::cached(quad_nodes)?,
            alpha: ALPHA,
            beta: BETA,
        })
    }

    pub fn quad_nodes(&self) -> usize {
        self.rule.len()
    }

    /// The linearizing field `∇F(x) = ∫ p(z) ∇f(h_z(x)) ⊙ e^{-zx} dz`.
    pub fn grad_f_quadrature(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.objective.dim(), x.len())?;
        let mut out = vec![0.0; x.len()];
        self.grad_f_into(x, &mut out);
        Ok(out)
    }

    /// Unchecked variant of [`Self::grad_f_quadrature`] writing into `out`.
    pub fn grad_f_into(&self, x: &[f64], out: &mut [f64]) {
        let d = x.len();
        let mut q = vec![0.0; d];
        let mut damp = vec![0.0; d];
        let mut g = vec![0.0; d];
        out.iter_mut().for_each(|v| *v = 0.0);
        for (&z, &w) in self.rule.nodes().iter().zip(self.rule.weights()) {
            for i in 0..d {
                damp[i] = (-z * x[i]).exp();
                q[i] = 1.0 - damp[i];
            }
            self.objective.grad_into(&q, &mut g);
            let c = w * z_density(z);
            for i in 0..d {
                out[i] += c * g[i] * damp[i];
            }
        }
    }

    /// The potential `F(x)`; `F(0) = 0`.
    pub fn f_quadrature(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.objective.dim(), x.len())?;
        let f = self.objective;
        let origin = vec![0.0; x.len()];
        let f0 = f.eval(&origin);
        let slope0 = dot(&f.grad(&origin), x);
        Ok(self.rule.integrate(|z| {
            if z < Z_SINGULAR {
                z_density(0.0) * slope0
            } else {
                z_density(z) / z * (f.eval(&h_z_map(x, z)) - f0)
            }
        }))
    }

    /// `f(h_z(x) ⊕ y) - e^{-z max_j x_j} f(y)`; nonnegative for DR-submodular `f >= 0`.
    pub fn certify_prob_sum_bound(&self, x: &[f64], y: &[f64], z: f64) -> Result<f64> {
        let f = self.objective;
        check_dim(f.dim(), x.len())?;
        check_dim(f.dim(), y.len())?;
        let xbar = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lhs = f.value(&prob_sum(&h_z_map(x, z), y))?;
        Ok(lhs - (-z * xbar).exp() * f.value(y)?)
    }

    /// `β <∇F(x), y - x> - ((1/e) f(y) - f(h(x)))`; nonnegative up to quadrature error.
    pub fn certify_linearization(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let f = self.objective;
        check_dim(f.dim(), y.len())?;
        let g = self.grad_f_quadrature(x)?;
        let step: f64 = g.iter().zip(y.iter().zip(x)).map(|(gi, (yi, xi))| gi * (yi - xi)).sum();
        Ok(self.beta * step - (self.alpha * f.value(y)? - f.value(&h_map(x))?))
    }
}

/// The query half of BQND: where to ask the gradient oracle for input `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct BqndQuery {
    pub sample: ZSample,
    pub point: Vec<f64>,
}

/// Draws `z` and returns the query point `h_z(x)`.
pub fn bqnd_query<R: Rng + ?Sized>(x: &[f64], rng: &mut R) -> BqndQuery {
    let sample = draw_z(rng);
    BqndQuery { point: h_z_map(x, sample.z), sample }
}

/// The estimate half of BQND: `v ⊙ e^{-z x}` for an oracle response `v`.
pub fn bqnd_finish(query: &BqndQuery, x: &[f64], response: &[f64]) -> Vec<f64> {
    let z = query.sample.z;
    response.iter().zip(x).map(|(v, xi)| v * (-z * xi).exp()).collect()
}

/// One-query unbiased estimate of `∇F(x)`.
pub fn bqnd_estimate<R: Rng + ?Sized>(
    ctx: &SurrogateContext<'_>,
    x: &[f64],
    oracle: &mut StochasticOracle,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_dim(ctx.objective.dim(), x.len())?;
    let q = bqnd_query(x, rng);
    let v = oracle.stochastic_gradient(ctx.objective, &q.point)?;
    Ok(bqnd_finish(&q, x, &v))
}
