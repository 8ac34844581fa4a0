//! Seeded generators of reward-function sequences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Domain, DomainKind};
use crate::objectives::Objective;
use crate::vecops::dist;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AdversaryKind {
    /// Fixed curvature, linear term redrawn i.i.d. around a fixed center.
    #[default]
    IidRandom,
    /// A fresh random instance on each of several equal segments.
    PiecewiseStationary,
    /// Diagonal curvature with the linear term moving along a circle.
    Drifting,
}

/// Function family the adversary draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    #[default]
    Quadratic,
    /// Monotone linear rewards with nonnegative coefficients.
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversarySpec {
    pub kind: AdversaryKind,
    #[serde(default)]
    pub family: Family,
    /// Off-diagonal density of the random curvature matrices.
    #[serde(default = "default_density")]
    pub density: f64,
    /// Standard deviation of the oracle noise.
    #[serde(default = "default_sigma")]
    pub noise_sigma: f64,
    #[serde(default)]
    pub instance_seed: u64,
    /// Segment count; `None` means `ceil(T^{1/4})`.
    #[serde(default)]
    pub num_segments: Option<usize>,
    /// Per-round step of the drifting linear term is `drift_rate * T^{-drift_exponent}`.
    #[serde(default = "default_drift_rate")]
    pub drift_rate: f64,
    #[serde(default = "default_drift_exponent")]
    pub drift_exponent: f64,
}

fn default_density() -> f64 {
    0.5
}
fn default_sigma() -> f64 {
    0.1
}
fn default_drift_rate() -> f64 {
    0.1
}
fn default_drift_exponent() -> f64 {
    0.5
}

impl Default for AdversarySpec {
    fn default() -> Self {
        Self {
            kind: AdversaryKind::IidRandom,
            family: Family::Quadratic,
            density: default_density(),
            noise_sigma: default_sigma(),
            instance_seed: 0,
            num_segments: None,
            drift_rate: default_drift_rate(),
            drift_exponent: default_drift_exponent(),
        }
    }
}

/// A generated sequence together with what the generator knows about it.
#[derive(Debug, Clone)]
pub struct Sequence {
    pub functions: Vec<Objective>,
    /// Segment start rounds (always begins with 0).
    pub segment_starts: Vec<usize>,
    /// Exact per-round maximizers, when the generator knows them.
    pub designed_optima: Option<Vec<Vec<f64>>>,
    pub designed_path_length: Option<f64>,
}

/// Radius of the drifting circle relative to the smallest curvature entry.
const DRIFT_RADIUS: f64 = 0.18;
/// Half-width of the i.i.d. band around the linear-term center, in units of row sums.
const IID_SPREAD: f64 = 0.2;

impl AdversarySpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(0.0..=1.0).contains(&self.density) {
            return bad(format!("density {} outside [0, 1]", self.density));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise_sigma {} must be nonnegative", self.noise_sigma));
        }
        if self.num_segments == Some(0) {
            return bad("num_segments must be positive".into());
        }
        if !(self.drift_rate >= 0.0 && self.drift_rate.is_finite()) {
            return bad(format!("drift_rate {} must be nonnegative", self.drift_rate));
        }
        Ok(())
    }

    /// Per-round movement of the drifting linear term at horizon `t`.
    pub fn drift_step(&self, horizon: usize) -> f64 {
        self.drift_rate * (horizon as f64).powf(-self.drift_exponent)
    }

    pub fn segments(&self, horizon: usize) -> usize {
        self.num_segments
            .unwrap_or_else(|| (horizon as f64).powf(0.25).ceil() as usize)
            .clamp(1, horizon.max(1))
    }

    /// Emits `horizon` reward functions on `[0,1]^d`.
    pub fn generate(&self, domain: &Domain, horizon: usize) -> Result<Sequence> {
        self.validate()?;
        if horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be positive".into()));
        }
        let d = domain.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(self.instance_seed);
        match self.kind {
            AdversaryKind::IidRandom => Ok(self.iid(d, horizon, &mut rng)),
            AdversaryKind::PiecewiseStationary => Ok(self.piecewise(d, horizon, &mut rng)),
            AdversaryKind::Drifting => self.drifting(domain, horizon, &mut rng),
        }
    }

    fn draw_linear(d: usize, rng: &mut ChaCha8Rng) -> Objective {
        let a = (0..d).map(|_| 0.5 + 0.5 * rng.random::<f64>()).collect();
        Objective::linear(a).expect("positive coefficients")
    }

    fn iid(&self, d: usize, horizon: usize, rng: &mut ChaCha8Rng) -> Sequence {
        let functions = match self.family {
            Family::Linear => (0..horizon).map(|_| Self::draw_linear(d, rng)).collect(),
            Family::Quadratic => {
                let base = Objective::random(d, self.density, rng);
                let sums: Vec<f64> = base
                    .quadratic_term()
                    .chunks(d)
                    .map(|r| r.iter().sum())
                    .collect();
                (0..horizon)
                    .map(|_| {
                        let a = sums
                            .iter()
                            .map(|s| s * (0.75 + IID_SPREAD * (2.0 * rng.random::<f64>() - 1.0)))
                            .collect();
                        base.with_linear(a)
                    })
                    .collect()
            }
        };
        Sequence {
            functions,
            segment_starts: vec![0],
            designed_optima: None,
            designed_path_length: None,
        }
    }

    fn piecewise(&self, d: usize, horizon: usize, rng: &mut ChaCha8Rng) -> Sequence {
        let n = self.segments(horizon);
        let starts: Vec<usize> = (0..n).map(|k| k * horizon / n).collect();
        let mut functions = Vec::with_capacity(horizon);
        for (k, &s) in starts.iter().enumerate() {
            let e = starts.get(k + 1).copied().unwrap_or(horizon);
            let f = match self.family {
                Family::Linear => Self::draw_linear(d, rng),
                Family::Quadratic => Objective::random(d, self.density, rng),
            };
            functions.extend(std::iter::repeat_n(f, e - s));
        }
        Sequence {
            functions,
            segment_starts: starts,
            designed_optima: None,
            designed_path_length: None,
        }
    }

    fn drifting(&self, domain: &Domain, horizon: usize, rng: &mut ChaCha8Rng) -> Result<Sequence> {
        let d = domain.dim();
        if d < 2 {
            return Err(Error::Config("drifting adversary needs dimension >= 2".into()));
        }
        if self.family == Family::Linear {
            return Err(Error::Config("drifting adversary moves a quadratic; use family = quadratic".into()));
        }
        let w: Vec<f64> = (0..d).map(|_| 0.5 + 0.5 * rng.random::<f64>()).collect();
        let mut quad = vec![0.0; d * d];
        for i in 0..d {
            quad[i * d + i] = w[i];
        }
        let center: Vec<f64> = w.iter().map(|wi| 0.75 * wi).collect();
        let radius = DRIFT_RADIUS * w[0].min(w[1]);
        let step = self.drift_step(horizon);
        if step > 2.0 * radius {
            return Err(Error::Config(format!(
                "drift step {step} exceeds the drifting circle's diameter {}",
                2.0 * radius
            )));
        }
        // Chord length 2R sin(dθ/2) equals the requested step.
        let dtheta = 2.0 * (step / (2.0 * radius)).asin();
        let phase = rng.random::<f64>() * std::f64::consts::TAU;
        let mut functions = Vec::with_capacity(horizon);
        let mut optima = Vec::with_capacity(horizon);
        for t in 0..horizon {
            let theta = phase + dtheta * t as f64;
            let mut a = center.clone();
            a[0] += radius * theta.cos();
            a[1] += radius * theta.sin();
            // Diagonal curvature: the box maximizer is a_i / w_i, inside (1/2, 1).
            optima.push(a.iter().zip(&w).map(|(ai, wi)| ai / wi).collect::<Vec<f64>>());
            functions.push(Objective::from_parts(a, quad.clone(), 0.0));
        }
        let exact = matches!(domain.kind(), DomainKind::Box) && domain.contraction() == 1.0;
        let path: f64 = optima.windows(2).map(|p| dist(&p[0], &p[1])).sum();
        Ok(Sequence {
            functions,
            segment_starts: vec![0],
            designed_path_length: exact.then_some(path),
            designed_optima: exact.then_some(optima),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: AdversaryKind) -> AdversarySpec {
        AdversarySpec { kind, instance_seed: 4, ..AdversarySpec::default() }
    }

    #[test]
    fn emitted_functions_are_valid_family_members() {
        let dom = Domain::unit_box(3).unwrap();
        for kind in [AdversaryKind::IidRandom, AdversaryKind::PiecewiseStationary, AdversaryKind::Drifting] {
            let seq = spec(kind).generate(&dom, 256).unwrap();
            assert_eq!(seq.functions.len(), 256);
            for f in &seq.functions {
                let rows: Vec<Vec<f64>> = f.quadratic_term().chunks(3).map(|r| r.to_vec()).collect();
                let g = Objective::quadratic(f.linear_term().to_vec(), rows).unwrap();
                assert!(g.is_non_monotone(), "{kind:?}");
            }
        }
    }

    #[test]
    fn piecewise_segments_follow_the_quarter_power() {
        let dom = Domain::unit_box(2).unwrap();
        let seq = spec(AdversaryKind::PiecewiseStationary).generate(&dom, 1000).unwrap();
        assert_eq!(seq.segment_starts.len(), 6);
        for w in seq.segment_starts.windows(2) {
            assert_eq!(seq.functions[w[0]], seq.functions[w[1] - 1]);
            assert_ne!(seq.functions[w[1] - 1], seq.functions[w[1]]);
        }
    }

    #[test]
    fn drifting_moves_at_the_requested_rate() {
        let dom = Domain::unit_box(2).unwrap();
        let s = spec(AdversaryKind::Drifting);
        let seq = s.generate(&dom, 400).unwrap();
        let step = s.drift_step(400);
        for p in seq.functions.windows(2) {
            let da = dist(p[0].linear_term(), p[1].linear_term());
            assert!((da - step).abs() < 1e-12);
        }
        let optima = seq.designed_optima.unwrap();
        for (f, u) in seq.functions.iter().zip(&optima) {
            assert!(f.grad(u).iter().all(|g| g.abs() < 1e-12));
        }
        assert!(seq.designed_path_length.unwrap() > 0.0);
    }

    #[test]
    fn generation_is_reproducible() {
        let dom = Domain::unit_box(3).unwrap();
        let a = spec(AdversaryKind::IidRandom).generate(&dom, 50).unwrap();
        let b = spec(AdversaryKind::IidRandom).generate(&dom, 50).unwrap();
        assert_eq!(a.functions, b.functions);
    }
}
