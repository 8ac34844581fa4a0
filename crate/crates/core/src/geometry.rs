//! Down-closed convex domains inside the unit box.
//!
//! Three base shapes are supported: the unit box, a scaled box `s·[0,1]^d`
//! and a single-constraint knapsack polytope `{x ∈ [0,1]^d : <w, x> <= b}`.
//! Every domain may additionally carry a contraction toward its interior
//! center, which is how shrunk sets `(1 - δ/r)(K - c) + c` are represented.
//! All oracles on a contracted domain are computed by mapping back to the
//! base shape, so they stay exact.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::vecops::{dist, dot, norm};

/// Membership tolerance shared by the membership test, the separation
/// oracle and the infeasible projection loop.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

const PROJECTION_TOL: f64 = 1e-10;
const PROJECTION_CAP: usize = 400;

/// Base shape of a domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainKind {
    Box,
    ScaledBox { scale: f64 },
    Knapsack { weights: Vec<f64>, budget: f64 },
}

/// Answer of the separation oracle.
#[derive(Debug, Clone, PartialEq)]
pub enum Separation {
    Inside,
    /// Normal `g` with `<g, y - x> > 0` for every feasible `x`.
    Hyperplane(Vec<f64>),
}

/// A down-closed convex set in `[0,1]^d` (possibly contracted toward its center).
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    kind: DomainKind,
    dim: usize,
    center: Vec<f64>,
    inner_radius: f64,
    diameter: f64,
    /// Points of this domain are `contraction * (x - c) + c` for `x` in the base shape.
    contraction: f64,
}

impl Domain {
    /// The unit box `[0,1]^d`.
    pub fn unit_box(dim: usize) -> Result<Self> {
        Self::new(DomainKind::Box, dim)
    }

    pub fn scaled_box(dim: usize, scale: f64) -> Result<Self> {
        Self::new(DomainKind::ScaledBox { scale }, dim)
    }

    pub fn knapsack(weights: Vec<f64>, budget: f64) -> Result<Self> {
        let dim = weights.len();
        Self::new(DomainKind::Knapsack { weights, budget }, dim)
    }

    pub fn new(kind: DomainKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("domain dimension must be positive".into()));
        }
        let d = dim as f64;
        let (center, inner_radius, diameter) = match &kind {
            DomainKind::Box => (vec![0.5; dim], 0.5, d.sqrt()),
            DomainKind::ScaledBox { scale } => {
                let s = *scale;
                if !(s > 0.0 && s <= 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "box scale must lie in (0, 1], got {s}"
                    )));
                }
                (vec![0.5 * s; dim], 0.5 * s, s * d.sqrt())
            }
            DomainKind::Knapsack { weights, budget } => {
                check_dim(dim, weights.len())?;
                let b = *budget;
                if !(b > 0.0 && b.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "knapsack budget must be positive, got {b}"
                    )));
                }
                if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
                    return Err(Error::InvalidParameter(
                        "knapsack weights must be finite and nonnegative".into(),
                    ));
                }
                let total: f64 = weights.iter().sum();
                if total <= 0.0 {
                    return Err(Error::InvalidParameter(
                        "knapsack weights must not all vanish".into(),
                    ));
                }
                // Clamped at 1/2 so the center stays interior when the budget is slack.
                let ci = (b / (2.0 * total)).min(0.5);
                let center = vec![ci; dim];
                let budget_gap = (b - ci * total) / norm(weights);
                let r = ci.min(1.0 - ci).min(budget_gap);
                (center, r, d.sqrt())
            }
        };
        Ok(Self {
            kind,
            dim,
            center,
            inner_radius,
            diameter,
            contraction: 1.0,
        })
    }

    pub fn kind(&self) -> &DomainKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn inner_radius(&self) -> f64 {
        self.inner_radius * self.contraction
    }

    pub fn diameter(&self) -> f64 {
        self.diameter * self.contraction
    }

    /// Factor of the contraction toward the center (1 for an unshrunk domain).
    pub fn contraction(&self) -> f64 {
        self.contraction
    }

    /// Coordinatewise upper bound of the base shape.
    pub fn coordinate_cap(&self) -> f64 {
        match self.kind {
            DomainKind::ScaledBox { scale } => scale,
            _ => 1.0,
        }
    }

    fn to_base(&self, x: &[f64]) -> Vec<f64> {
        if self.contraction == 1.0 {
            return x.to_vec();
        }
        x.iter()
            .zip(&self.center)
            .map(|(xi, ci)| ci + (xi - ci) / self.contraction)
            .collect()
    }

    fn shrunk_coords(&self, x: Vec<f64>) -> Vec<f64> {
        if self.contraction == 1.0 {
            return x;
        }
        x.iter()
            .zip(&self.center)
            .map(|(xi, ci)| ci + self.contraction * (xi - ci))
            .collect()
    }

    /// Membership within additive tolerance `tol` on every defining constraint.
    pub fn contains(&self, x: &[f64], tol: f64) -> Result<bool> {
        check_dim(self.dim, x.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Ok(false);
        }
        Ok(self.worst_violation(&self.to_base(x)).0 <= tol)
    }

    /// Largest normalized constraint violation of a base-coordinate point
    /// and the corresponding outward normal.
    fn worst_violation(&self, y: &[f64]) -> (f64, Option<Vec<f64>>) {
        let cap = self.coordinate_cap();
        let mut worst = f64::NEG_INFINITY;
        let mut normal: Option<Vec<f64>> = None;
        let mut box_index = None;
        for (i, &v) in y.iter().enumerate() {
            if v - cap > worst {
                worst = v - cap;
                box_index = Some((i, 1.0));
            }
            if -v > worst {
                worst = -v;
                box_index = Some((i, -1.0));
            }
        }
        if let Some((i, sign)) = box_index {
            let mut g = vec![0.0; self.dim];
            g[i] = sign;
            normal = Some(g);
        }
        if let DomainKind::Knapsack { weights, budget } = &self.kind {
            let excess = (dot(weights, y) - budget) / norm(weights);
            if excess > worst {
                worst = excess;
                normal = Some(weights.clone());
            }
        }
        (worst, normal)
    }

    /// Separation oracle: `Inside` exactly when `contains(y, MEMBERSHIP_TOL)`.
    pub fn separate(&self, y: &[f64]) -> Result<Separation> {
        check_dim(self.dim, y.len())?;
        let base = self.to_base(y);
        let (worst, normal) = self.worst_violation(&base);
        if worst <= MEMBERSHIP_TOL {
            return Ok(Separation::Inside);
        }
        // The contraction is a positive scaling, so normals carry over unchanged.
        Ok(Separation::Hyperplane(normal.expect("violated constraint has a normal")))
    }

    /// Linear optimization oracle: a vertex maximizing `<c, v>`.
    pub fn linear_maximize(&self, c: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, c.len())?;
        let cap = self.coordinate_cap();
        let v = match &self.kind {
            DomainKind::Box | DomainKind::ScaledBox { .. } => c
                .iter()
                .map(|&ci| if ci > 0.0 { cap } else { 0.0 })
                .collect(),
            DomainKind::Knapsack { weights, budget } => {
                fractional_knapsack(c, weights, *budget)
            }
        };
        Ok(self.shrunk_coords(v))
    }

    /// Exact Euclidean projection.
    pub fn euclidean_project(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, y.len())?;
        let base = self.to_base(y);
        let cap = self.coordinate_cap();
        let p = match &self.kind {
            DomainKind::Box | DomainKind::ScaledBox { .. } => {
                base.iter().map(|v| v.clamp(0.0, cap)).collect()
            }
            DomainKind::Knapsack { weights, budget } => {
                project_knapsack(&base, weights, *budget)?
            }
        };
        Ok(self.shrunk_coords(p))
    }

    /// Orthogonal projection onto the affine hull. Every supported domain is
    /// full-dimensional, so this is the identity.
    pub fn affine_project(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, y.len())?;
        Ok(y.to_vec())
    }

    /// Projection of a direction onto the linear space parallel to the affine hull.
    pub fn direction_project(&self, g: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, g.len())?;
        Ok(g.to_vec())
    }

    /// The shrunk set `{(1 - δ/r)(x - c) + c : x ∈ K}`, every member of which is
    /// at least `delta` deep inside this domain.
    pub fn shrink(&self, delta: f64) -> Result<Domain> {
        let r = self.inner_radius();
        if !(delta >= 0.0 && delta < r) {
            return Err(Error::InvalidParameter(format!(
                "shrink parameter {delta} must lie in [0, {r})"
            )));
        }
        let mut out = self.clone();
        out.contraction = self.contraction * (1.0 - delta / r);
        Ok(out)
    }

    /// A feasible point drawn from a simple (not necessarily uniform) distribution
    /// that covers the whole domain.
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let cap = self.coordinate_cap();
        let mut x: Vec<f64> = (0..self.dim).map(|_| rng.random::<f64>() * cap).collect();
        if let DomainKind::Knapsack { weights, budget } = &self.kind {
            let load = dot(weights, &x);
            if load > *budget {
                // Down-closed: pull the point toward the origin, then randomize
                // how close to the budget facet it lands.
                let t = budget / load * rng.random::<f64>().sqrt();
                x.iter_mut().for_each(|v| *v *= t);
            }
        }
        self.shrunk_coords(x)
    }

    /// A uniformly random unit vector inside the hull directions.
    pub fn sample_direction<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        crate::reductions::unit_sphere(self.dim, rng)
    }

    /// Sanity helper: maximum pairwise distance over a finite point set.
    pub fn max_pairwise_distance(points: &[Vec<f64>]) -> f64 {
        let mut best = 0.0f64;
        for (i, a) in points.iter().enumerate() {
            for b in &points[i + 1..] {
                best = best.max(dist(a, b));
            }
        }
        best
    }
}

/// Greedy fractional knapsack: the LP over `{x ∈ [0,1]^d : <w, x> <= b}`.
fn fractional_knapsack(c: &[f64], w: &[f64], budget: f64) -> Vec<f64> {
    let d = c.len();
    let mut x = vec![0.0; d];
    let mut order: Vec<usize> = Vec::with_capacity(d);
    for i in 0..d {
        if c[i] <= 0.0 {
            continue;
        }
        if w[i] == 0.0 {
            x[i] = 1.0;
        } else {
            order.push(i);
        }
    }
    order.sort_by(|&i, &j| (c[j] / w[j]).total_cmp(&(c[i] / w[i])).then(i.cmp(&j)));
    let mut left = budget;
    for i in order {
        if left <= 0.0 {
            break;
        }
        let take = (left / w[i]).min(1.0);
        x[i] = take;
        left -= take * w[i];
    }
    x
}

/// Projection onto the knapsack polytope: box clamping combined with a
/// scalar bisection on the budget multiplier.
fn project_knapsack(y: &[f64], w: &[f64], budget: f64) -> Result<Vec<f64>> {
    let clamp_shift = |mu: f64| -> Vec<f64> {
        y.iter()
            .zip(w)
            .map(|(yi, wi)| (yi - mu * wi).clamp(0.0, 1.0))
            .collect()
    };
    let x0 = clamp_shift(0.0);
    if dot(w, &x0) <= budget {
        return Ok(x0);
    }
    let mut lo = 0.0;
    let mut hi = y
        .iter()
        .zip(w)
        .filter(|(_, wi)| **wi > 0.0)
        .map(|(yi, wi)| yi / wi)
        .fold(0.0f64, f64::max)
        .max(0.0);
    for _ in 0..PROJECTION_CAP {
        let mid = 0.5 * (lo + hi);
        if dot(w, &clamp_shift(mid)) > budget {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi.max(1.0) {
            break;
        }
    }
    // `hi` always sits on the feasible side of the budget.
    let x = clamp_shift(hi);
    if budget - dot(w, &x) > PROJECTION_TOL && hi - lo > PROJECTION_TOL {
        return Err(Error::IterationCap {
            what: "knapsack projection",
            cap: PROJECTION_CAP,
        });
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn membership_examples() {
        let b = Domain::unit_box(3).unwrap();
        assert!(b.contains(&[0.0, 0.0, 0.0], MEMBERSHIP_TOL).unwrap());
        assert!(!b.contains(&[1.1, 0.0, 0.0], 1e-9).unwrap());
        let k = Domain::knapsack(vec![1.0, 1.0], 1.0).unwrap();
        assert!(!k.contains(&[0.6, 0.6], 1e-9).unwrap());
        assert!(matches!(
            b.contains(&[0.0, 0.0], 1e-9),
            Err(Error::DimensionMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn linear_maximize_examples() {
        let b = Domain::unit_box(2).unwrap();
        assert_eq!(b.linear_maximize(&[1.0, 1.0]).unwrap(), vec![1.0, 1.0]);
        assert_eq!(b.linear_maximize(&[1.0, -1.0]).unwrap(), vec![1.0, 0.0]);
        let k = Domain::knapsack(vec![1.0, 2.0], 2.0).unwrap();
        assert_eq!(k.linear_maximize(&[1.0, 3.0]).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn knapsack_loo_matches_vertex_enumeration() {
        // Vertices of {x in [0,1]^2 : x1 + 2 x2 <= 2}.
        let verts = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 0.5]];
        let k = Domain::knapsack(vec![1.0, 2.0], 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let c = [rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0];
            let best = verts.iter().map(|v| dot(&c, v)).fold(f64::MIN, f64::max);
            let v = k.linear_maximize(&c).unwrap();
            assert!((dot(&c, &v) - best).abs() < 1e-12);
        }
    }

    #[test]
    fn separation_examples() {
        let b = Domain::unit_box(2).unwrap();
        assert_eq!(b.separate(&[0.5, 0.5]).unwrap(), Separation::Inside);
        assert_eq!(
            b.separate(&[1.2, 0.5]).unwrap(),
            Separation::Hyperplane(vec![1.0, 0.0])
        );
        let k = Domain::knapsack(vec![1.0, 1.0], 1.0).unwrap();
        let y = [0.8, 0.8];
        let Separation::Hyperplane(g) = k.separate(&y).unwrap() else {
            panic!("expected a hyperplane");
        };
        assert_eq!(g, vec![1.0, 1.0]);
        // grid of feasible points
        for i in 0..=20 {
            for j in 0..=20 {
                let x = [i as f64 / 20.0, j as f64 / 20.0];
                if k.contains(&x, 0.0).unwrap() {
                    assert!(dot(&g, &[y[0] - x[0], y[1] - x[1]]) > 0.0);
                }
            }
        }
    }

    #[test]
    fn projection_examples() {
        let b = Domain::unit_box(2).unwrap();
        assert_eq!(b.euclidean_project(&[1.5, -0.3]).unwrap(), vec![1.0, 0.0]);
        let k = Domain::knapsack(vec![1.0, 1.0], 1.0).unwrap();
        let p = k.euclidean_project(&[1.0, 1.0]).unwrap();
        assert!(close(&p, &[0.5, 0.5], 1e-10));
        let inside = [0.2, 0.3];
        assert!(close(&k.euclidean_project(&inside).unwrap(), &inside, 1e-15));
    }

    #[test]
    fn shrink_examples() {
        let b = Domain::unit_box(1).unwrap();
        assert_eq!(b.shrink(0.0).unwrap(), b);
        let s = b.shrink(0.25).unwrap();
        assert!(s.contains(&[0.25], 1e-12).unwrap());
        assert!(s.contains(&[0.75], 1e-12).unwrap());
        assert!(!s.contains(&[0.2], 1e-9).unwrap());
        assert!(!s.contains(&[0.8], 1e-9).unwrap());
        assert!(close(&s.linear_maximize(&[1.0]).unwrap(), &[0.75], 1e-15));
        assert!(close(&s.linear_maximize(&[-1.0]).unwrap(), &[0.25], 1e-15));
        assert!(matches!(b.shrink(0.5), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn knapsack_center_and_radius() {
        let k = Domain::knapsack(vec![1.0, 1.0], 1.0).unwrap();
        assert!(close(k.center(), &[0.25, 0.25], 1e-15));
        // distance from (1/4,1/4) to x1+x2=1 is (1/2)/sqrt(2)
        let expect = 0.25f64.min(0.5 / 2f64.sqrt());
        assert!((k.inner_radius() - expect).abs() < 1e-15);
        let slack = Domain::knapsack(vec![0.1, 0.1], 5.0).unwrap();
        assert!(close(slack.center(), &[0.5, 0.5], 1e-15));
        assert!((slack.inner_radius() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn affine_projection_is_identity_and_idempotent() {
        let k = Domain::knapsack(vec![1.0, 2.0, 0.5], 1.5).unwrap();
        let y = vec![0.3, -2.0, 4.0];
        let p = k.affine_project(&y).unwrap();
        assert_eq!(p, y);
        assert_eq!(k.affine_project(&p).unwrap(), p);
    }

    #[test]
    fn invalid_domains_are_rejected() {
        assert!(Domain::unit_box(0).is_err());
        assert!(Domain::scaled_box(2, 1.5).is_err());
        assert!(Domain::knapsack(vec![1.0, -1.0], 1.0).is_err());
        assert!(Domain::knapsack(vec![0.0, 0.0], 1.0).is_err());
        assert!(Domain::knapsack(vec![1.0, 1.0], 0.0).is_err());
    }
}
