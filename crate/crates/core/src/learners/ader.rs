//! Improved Ader: exponential weights over projected-ascent experts with a
//! geometric grid of step sizes, for dynamic regret against moving
//! comparators.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::Domain;
use crate::learners::{so_ip, LinearLearner};
use crate::vecops::dot;

/// How experts return to the domain after an ascent step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ExpertProjection {
    #[default]
    Exact,
    SoIp,
}

#[derive(Debug, Clone)]
pub struct Ader {
    domain: Domain,
    etas: Vec<f64>,
    lambda: f64,
    projection: ExpertProjection,
    so_ip_delta: f64,
    initial_log_weights: Vec<f64>,
    /// Normalized log-weights (log-sum-exp is zero).
    log_weights: Vec<f64>,
    experts: Vec<Vec<f64>>,
    action: Vec<f64>,
}

impl Ader {
    pub fn new(
        domain: Domain,
        horizon: usize,
        grad_bound: f64,
        projection: ExpertProjection,
    ) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be positive".into()));
        }
        if !(grad_bound > 0.0 && grad_bound.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gradient bound must be positive, got {grad_bound}"
            )));
        }
        let t = horizon as f64;
        let d = domain.diameter();
        let n = Self::expert_count(horizon);
        let base = d / grad_bound * (7.0 / (2.0 * t)).sqrt();
        let etas: Vec<f64> = (0..n).map(|i| base * 2f64.powi(i as i32)).collect();
        let lambda = (2.0 / (t * grad_bound * grad_bound * d * d)).sqrt();
        let initial_log_weights = Self::initial_weights(n).iter().map(|w| w.ln()).collect();
        let so_ip_delta = 0.5 * domain.inner_radius() / t.sqrt();
        let mut out = Self {
            domain,
            etas,
            lambda,
            projection,
            so_ip_delta,
            log_weights: Vec::new(),
            initial_log_weights,
            experts: Vec::new(),
            action: Vec::new(),
        };
        out.reset();
        Ok(out)
    }

    /// `N = ceil(log2(1 + 4T/7) / 2) + 1`.
    pub fn expert_count(horizon: usize) -> usize {
        ((1.0 + 4.0 * horizon as f64 / 7.0).log2() / 2.0).ceil() as usize + 1
    }

    /// `C / (i (i + 1))` with `C = 1 + 1/N`, for `i = 1..N`.
    pub fn initial_weights(n: usize) -> Vec<f64> {
        let c = 1.0 + 1.0 / n as f64;
        (1..=n).map(|i| c / (i * (i + 1)) as f64).collect()
    }

    pub fn etas(&self) -> &[f64] {
        &self.etas
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|l| l.exp()).collect()
    }

    pub fn experts(&self) -> &[Vec<f64>] {
        &self.experts
    }

    fn mix(&mut self) {
        let weights = self.weights();
        let dim = self.domain.dim();
        self.action = vec![0.0; dim];
        for (w, x) in weights.iter().zip(&self.experts) {
            crate::vecops::axpy(*w, x, &mut self.action);
        }
    }

    fn normalize(&mut self) {
        let top = self.log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = self.log_weights.iter().map(|l| (l - top).exp()).sum();
        let shift = top + total.ln();
        self.log_weights.iter_mut().for_each(|l| *l -= shift);
    }
}

impl LinearLearner for Ader {
    fn next_action(&self) -> &[f64] {
        &self.action
    }

    fn feed(&mut self, reward: &[f64]) -> Result<()> {
        check_dim(self.domain.dim(), reward.len())?;
        // Linearized loss l(y) = <-o, y - x_t>.
        let played = dot(reward, &self.action);
        for (lw, x) in self.log_weights.iter_mut().zip(&self.experts) {
            let loss = played - dot(reward, x);
            *lw -= self.lambda * loss;
        }
        self.normalize();
        for (eta, x) in self.etas.iter().zip(self.experts.iter_mut()) {
            let y: Vec<f64> = x.iter().zip(reward).map(|(xi, o)| xi + eta * o).collect();
            *x = match self.projection {
                ExpertProjection::Exact => self.domain.euclidean_project(&y)?,
                ExpertProjection::SoIp => so_ip(&self.domain, &y, self.so_ip_delta)?.point,
            };
        }
        self.mix();
        Ok(())
    }

    fn reset(&mut self) {
        self.log_weights = self.initial_log_weights.clone();
        self.normalize();
        self.experts = vec![self.domain.center().to_vec(); self.etas.len()];
        self.mix();
    }

    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn name(&self) -> &'static str {
        "ader"
    }
}
