//! Online gradient ascent with infeasible projections built from a
//! separation oracle.

use crate::error::{Error, Result};
use crate::geometry::{Domain, Separation, MEMBERSHIP_TOL};
use crate::learners::LinearLearner;
use crate::vecops::{dist, norm};

/// Result of one infeasible projection.
#[derive(Debug, Clone, PartialEq)]
pub struct SoIpOutcome {
    pub point: Vec<f64>,
    /// Number of separation steps taken.
    pub iterations: usize,
}

fn so_ip_inner(
    dom: &Domain,
    y0: &[f64],
    delta: f64,
    mut trace: Option<&mut Vec<Vec<f64>>>,
) -> Result<SoIpOutcome> {
    let r = dom.inner_radius();
    if !(delta > 0.0 && delta < r) {
        return Err(Error::InvalidParameter(format!(
            "infeasible projection step {delta} must lie in (0, {r})"
        )));
    }
    let c = dom.center();
    let diameter = dom.diameter();
    let y1 = dom.affine_project(y0)?;
    // Clip into the radius-D ball around the center.
    let spread = dist(&y1, c) / diameter;
    let mut y: Vec<f64> = if spread > 1.0 {
        y1.iter().zip(c).map(|(yi, ci)| ci + (yi - ci) / spread).collect()
    } else {
        y1
    };
    let cap = (2.0 * diameter / delta).powi(2).ceil() as usize + 10;
    for iterations in 0..=cap {
        if let Some(t) = trace.as_deref_mut() {
            t.push(y.clone());
        }
        let g = match dom.separate(&y)? {
            Separation::Inside => return Ok(SoIpOutcome { point: y, iterations }),
            Separation::Hyperplane(g) => dom.direction_project(&g)?,
        };
        let gn = norm(&g);
        for (yi, gi) in y.iter_mut().zip(&g) {
            *yi -= delta * gi / gn;
        }
    }
    Err(Error::IterationCap {
        what: "infeasible projection",
        cap,
    })
}

/// Infeasible projection: clip `y0` into the ball of radius `D` around the
/// center, then step `delta` against separating normals until the point is
/// inside `dom`. Never farther than `y0` from any point of the
/// `delta`-shrunk domain.
pub fn so_ip(dom: &Domain, y0: &[f64], delta: f64) -> Result<SoIpOutcome> {
    so_ip_inner(dom, y0, delta, None)
}

/// Same as [`so_ip`], returning every visited point including the result.
pub fn so_ip_trajectory(dom: &Domain, y0: &[f64], delta: f64) -> Result<Vec<Vec<f64>>> {
    let mut trace = Vec::new();
    so_ip_inner(dom, y0, delta, Some(&mut trace))?;
    Ok(trace)
}

/// SO-OGA: `x_{t+1} = so_ip(x_t + η o_t, δ)` with
/// `δ = v T^{-1/2}` and `η = v r / (2G) T^{-1/2}`.
#[derive(Debug, Clone)]
pub struct SoOga {
    domain: Domain,
    x: Vec<f64>,
    eta: f64,
    delta: f64,
    v: f64,
    last_iterations: usize,
}

/// Default free parameter: the minimizer `2D / sqrt(r^2 + 2D)` of the
/// `(D^2/η + ηG^2T + δTGD/r)` bound, capped so that `δ <= min(1, r) / 2`.
pub fn default_v(domain: &Domain, horizon: usize) -> f64 {
    let (d, r) = (domain.diameter(), domain.inner_radius());
    let balanced = 2.0 * d / (r * r + 2.0 * d).sqrt();
    balanced.min(0.5 * r.min(1.0) * (horizon.max(1) as f64).sqrt())
}

impl SoOga {
    pub fn new(domain: Domain, horizon: usize, grad_bound: f64, v: f64) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be positive".into()));
        }
        if !(grad_bound > 0.0 && grad_bound.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gradient bound must be positive, got {grad_bound}"
            )));
        }
        let root = (horizon as f64).sqrt();
        let delta = v / root;
        let r = domain.inner_radius();
        if !(delta > 0.0 && delta < 1.0 && delta < r) {
            return Err(Error::InvalidParameter(format!(
                "v = {v} gives step {delta}, which must lie in (0, min(1, r = {r}))"
            )));
        }
        let eta = v * r / (2.0 * grad_bound) / root;
        let x = domain.center().to_vec();
        Ok(Self {
            domain,
            x,
            eta,
            delta,
            v,
            last_iterations: 0,
        })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    /// Separation steps used by the most recent projection.
    pub fn last_iterations(&self) -> usize {
        self.last_iterations
    }
}

impl LinearLearner for SoOga {
    fn next_action(&self) -> &[f64] {
        &self.x
    }

    fn feed(&mut self, reward: &[f64]) -> Result<()> {
        crate::error::check_dim(self.x.len(), reward.len())?;
        let y: Vec<f64> = self.x.iter().zip(reward).map(|(x, o)| x + self.eta * o).collect();
        let out = so_ip(&self.domain, &y, self.delta)?;
        debug_assert!(self.domain.contains(&out.point, MEMBERSHIP_TOL)?);
        self.last_iterations = out.iterations;
        self.x = out.point;
        Ok(())
    }

    fn reset(&mut self) {
        self.x = self.domain.center().to_vec();
        self.last_iterations = 0;
    }

    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn name(&self) -> &'static str {
        "so_oga"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feasible_input_is_returned_unchanged() {
        let dom = Domain::knapsack(vec![1.0, 2.0], 1.5).unwrap();
        let y = [0.3, 0.4];
        let out = so_ip(&dom, &y, 0.05).unwrap();
        assert_eq!(out.point, y.to_vec());
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn hand_simulated_trajectory() {
        let dom = Domain::unit_box(1).unwrap();
        let path = so_ip_trajectory(&dom, &[1.3], 0.1).unwrap();
        let expect = [1.3, 1.2, 1.1, 1.0];
        assert_eq!(path.len(), expect.len());
        for (p, e) in path.iter().zip(expect) {
            assert!((p[0] - e).abs() < 1e-12, "{p:?} vs {e}");
        }
    }

    #[test]
    fn rejects_bad_step() {
        let dom = Domain::unit_box(2).unwrap();
        assert!(so_ip(&dom, &[0.1, 0.1], 0.0).is_err());
        assert!(so_ip(&dom, &[0.1, 0.1], 0.5).is_err());
    }

    #[test]
    fn default_v_is_balanced_and_admissible() {
        let dom = Domain::unit_box(3).unwrap();
        let d = 3f64.sqrt();
        let want = 2.0 * d / (0.25 + 2.0 * d).sqrt();
        assert!((default_v(&dom, 10_000) - want).abs() < 1e-15);
        for t in [1, 2, 5, 10, 100] {
            assert!(SoOga::new(dom.clone(), t, 1.0, default_v(&dom, t)).is_ok());
        }
    }

    #[test]
    fn zero_reward_keeps_the_iterate() {
        let dom = Domain::unit_box(2).unwrap();
        let mut l = SoOga::new(dom, 100, 1.0, 0.25).unwrap();
        let x0 = l.next_action().to_vec();
        l.feed(&[0.0, 0.0]).unwrap();
        assert_eq!(l.next_action(), x0.as_slice());
    }

    #[test]
    fn interior_step_needs_no_projection() {
        // eta = v r / (2G sqrt T) = 0.4 * 0.5 / 2 = 0.1 with v = 0.4, T = 1, G = 1
        let dom = Domain::unit_box(1).unwrap();
        let mut l = SoOga::new(dom, 1, 1.0, 0.4).unwrap();
        assert!((l.eta() - 0.1).abs() < 1e-15);
        l.feed(&[1.0]).unwrap();
        assert!((l.next_action()[0] - 0.6).abs() < 1e-15);
        assert_eq!(l.last_iterations(), 0);
    }

    #[test]
    fn constant_reward_drives_iterates_to_the_loo_vertex() {
        let dom = Domain::knapsack(vec![1.0, 2.0], 1.5).unwrap();
        let c = [1.0, 3.0];
        let t = 100_000;
        let g = crate::vecops::norm(&c);
        let mut l = SoOga::new(dom.clone(), t, g, 0.8 * dom.inner_radius()).unwrap();
        for _ in 0..t {
            l.feed(&c).unwrap();
        }
        let v = dom.linear_maximize(&c).unwrap();
        let gap = dist(l.next_action(), &v);
        assert!(gap < 10.0 * (l.delta() + l.eta() * g), "gap {gap}");
    }
}
