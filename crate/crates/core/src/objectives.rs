//! Non-negative, non-monotone DR-submodular test functions.
//!
//! The family is `f(x) = c0 + <a, x> - (1/2) x^T W x` with `W >= 0`
//! entrywise (so every Hessian entry is nonpositive). Generated instances
//! draw `a_i` from `[S_i / 2, S_i)` with `S_i = sum_j W_ij`, which keeps `f`
//! nonnegative on the unit box and makes every coordinate non-monotone.
//! The constant `c0` is zero for all public families; it only appears in
//! derived functions such as `f` composed with a contraction map.

use std::fmt::Write as _;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::Domain;
use crate::vecops::{dist, dot, norm};

const BOX_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    NonMonotoneQuadratic,
    Separable1D,
    /// Monotone linear function with nonnegative coefficients.
    Linear,
    /// Built internally from other objectives (sums, contractions).
    Derived,
}

/// A quadratic DR-submodular objective on `[0,1]^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    kind: ObjectiveKind,
    dim: usize,
    linear: Vec<f64>,
    /// Row-major symmetric `d x d`, entrywise nonnegative.
    quad: Vec<f64>,
    constant: f64,
    lipschitz: f64,
    smoothness: f64,
}

impl Objective {
    /// Validated quadratic: `W` symmetric and entrywise nonnegative, and
    /// `a_i >= S_i / 2` so that `f >= 0` on the box. Boundary cases with
    /// `a = S` (gradient vanishing at the all-ones corner) are accepted;
    /// [`Self::is_non_monotone`] reports whether some `a_i < S_i`.
    pub fn quadratic(a: Vec<f64>, w: Vec<Vec<f64>>) -> Result<Self> {
        let dim = a.len();
        if dim == 0 {
            return Err(Error::InvalidParameter("objective needs dimension >= 1".into()));
        }
        check_dim(dim, w.len())?;
        let mut quad = Vec::with_capacity(dim * dim);
        for row in &w {
            check_dim(dim, row.len())?;
            quad.extend_from_slice(row);
        }
        for i in 0..dim {
            for j in 0..dim {
                let v = quad[i * dim + j];
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "quadratic term W[{i}][{j}] = {v} must be finite and nonnegative"
                    )));
                }
                if (v - quad[j * dim + i]).abs() > 1e-12 * v.abs().max(1.0) {
                    return Err(Error::InvalidParameter("quadratic term must be symmetric".into()));
                }
            }
        }
        let row_sums = row_sums(&quad, dim);
        if a.iter().zip(&row_sums).any(|(ai, si)| *ai < 0.5 * si) {
            return Err(Error::InvalidParameter(
                "non-negativity condition a_i >= (1/2) sum_j W_ij violated".into(),
            ));
        }
        Ok(Self::build(ObjectiveKind::NonMonotoneQuadratic, a, quad, 0.0))
    }

    /// `f(x) = x - x^2` on `[0,1]`.
    pub fn separable_1d() -> Self {
        Self::build(ObjectiveKind::Separable1D, vec![1.0], vec![2.0], 0.0)
    }

    /// Monotone linear `<a, x>` with `a >= 0`.
    pub fn linear(a: Vec<f64>) -> Result<Self> {
        if a.is_empty() || a.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter(
                "linear objective needs nonnegative finite coefficients".into(),
            ));
        }
        let d = a.len();
        Ok(Self::build(ObjectiveKind::Linear, a, vec![0.0; d * d], 0.0))
    }

    /// Random instance: symmetric `W` with the given off-diagonal density,
    /// positive diagonal, and `a_i` uniform in `[S_i / 2, S_i)`.
    pub fn random<R: Rng + ?Sized>(dim: usize, density: f64, rng: &mut R) -> Self {
        let mut quad = vec![0.0; dim * dim];
        for i in 0..dim {
            quad[i * dim + i] = 0.5 + 0.5 * rng.random::<f64>();
            for j in (i + 1)..dim {
                if rng.random::<f64>() < density {
                    let v = rng.random::<f64>();
                    quad[i * dim + j] = v;
                    quad[j * dim + i] = v;
                }
            }
        }
        let a = row_sums(&quad, dim)
            .into_iter()
            .map(|s| s * (0.5 + 0.5 * rng.random::<f64>()))
            .collect();
        Self::build(ObjectiveKind::NonMonotoneQuadratic, a, quad, 0.0)
    }

    /// Random separable instance (diagonal `W`), whose maximizer over the
    /// unit box is `a_i / W_ii` coordinatewise.
    pub fn random_separable<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        let mut quad = vec![0.0; dim * dim];
        let mut a = Vec::with_capacity(dim);
        for i in 0..dim {
            let w = 0.5 + 0.5 * rng.random::<f64>();
            quad[i * dim + i] = w;
            a.push(w * (0.5 + 0.5 * rng.random::<f64>()));
        }
        Self::build(ObjectiveKind::NonMonotoneQuadratic, a, quad, 0.0)
    }

    /// Same curvature, new linear term. Used by drifting adversaries; the
    /// caller keeps the linear term inside the admissible band.
    pub(crate) fn with_linear(&self, a: Vec<f64>) -> Self {
        Self::build(self.kind, a, self.quad.clone(), self.constant)
    }

    /// Weighted sum `sum_k c_k f_k` (weights must be nonnegative).
    pub fn aggregate<'a, I>(dim: usize, parts: I) -> Self
    where
        I: IntoIterator<Item = (f64, &'a Objective)>,
    {
        let mut a = vec![0.0; dim];
        let mut quad = vec![0.0; dim * dim];
        let mut constant = 0.0;
        for (c, f) in parts {
            debug_assert!(c >= 0.0);
            crate::vecops::axpy(c, &f.linear, &mut a);
            crate::vecops::axpy(c, &f.quad, &mut quad);
            constant += c * f.constant;
        }
        Self::build(ObjectiveKind::Derived, a, quad, constant)
    }

    /// `x -> f(s (x - c) + c)`, i.e. `f` seen through a contraction toward `c`.
    pub fn compose_contraction(&self, s: f64, center: &[f64]) -> Self {
        let d = self.dim;
        let m: Vec<f64> = center.iter().map(|c| (1.0 - s) * c).collect();
        let wm = self.mat_vec(&m);
        let a = self
            .linear
            .iter()
            .zip(&wm)
            .map(|(ai, wmi)| s * (ai - wmi))
            .collect();
        let quad = self.quad.iter().map(|w| s * s * w).collect();
        let constant = self.constant + dot(&self.linear, &m) - 0.5 * dot(&m, &wm);
        debug_assert_eq!(m.len(), d);
        Self::build(ObjectiveKind::Derived, a, quad, constant)
    }

    /// Unvalidated assembly from raw coefficients (row-major `quad`).
    pub(crate) fn from_parts(linear: Vec<f64>, quad: Vec<f64>, constant: f64) -> Self {
        debug_assert_eq!(quad.len(), linear.len() * linear.len());
        Self::build(ObjectiveKind::Derived, linear, quad, constant)
    }

    fn build(kind: ObjectiveKind, linear: Vec<f64>, quad: Vec<f64>, constant: f64) -> Self {
        let dim = linear.len();
        let sums = row_sums(&quad, dim);
        // Each gradient coordinate ranges over [a_i - S_i, a_i] on the box.
        let lipschitz = linear
            .iter()
            .zip(&sums)
            .map(|(a, s)| a.abs().max((a - s).abs()).powi(2))
            .sum::<f64>()
            .sqrt();
        let smoothness = sums.iter().cloned().fold(0.0, f64::max);
        Self {
            kind,
            dim,
            linear,
            quad,
            constant,
            lipschitz,
            smoothness,
        }
    }

    /// Some gradient coordinate turns negative inside the box.
    pub fn is_non_monotone(&self) -> bool {
        let sums = row_sums(&self.quad, self.dim);
        self.linear.iter().zip(&sums).any(|(a, s)| a < s)
    }

    pub fn kind(&self) -> ObjectiveKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn linear_term(&self) -> &[f64] {
        &self.linear
    }

    pub fn quadratic_term(&self) -> &[f64] {
        &self.quad
    }

    pub fn constant_term(&self) -> f64 {
        self.constant
    }

    /// Bound `M1` on the gradient norm over the unit box.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// Smoothness bound `L` (max row sum of `W`). Recorded for reporting only.
    pub fn smoothness(&self) -> f64 {
        self.smoothness
    }

    /// Upper bound on `|f|` over the unit box.
    ///
    /// With `W >= 0` and `x` in the box,
    /// `c0 + Σ x_i (a_i - S_i/2) <= f(x) <= c0 + Σ max_{s∈[0,1]} (a_i s - W_ii s^2 / 2)`.
    pub fn value_bound(&self) -> f64 {
        let d = self.dim;
        let (mut lo, mut hi) = (self.constant, self.constant);
        for i in 0..d {
            let a = self.linear[i];
            let row = &self.quad[i * d..(i + 1) * d];
            let w = row[i];
            lo += (a - 0.5 * row.iter().sum::<f64>()).min(0.0);
            hi += if a <= 0.0 {
                0.0
            } else if a < w {
                a * a / (2.0 * w)
            } else {
                a - 0.5 * w
            };
        }
        lo.abs().max(hi.abs())
    }

    fn mat_vec(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d)
            .map(|i| dot(&self.quad[i * d..(i + 1) * d], x))
            .collect()
    }

    fn check_box(&self, x: &[f64]) -> Result<()> {
        check_dim(self.dim, x.len())?;
        for (index, &value) in x.iter().enumerate() {
            if !(-BOX_TOL..=1.0 + BOX_TOL).contains(&value) {
                return Err(Error::OutOfBox { index, value });
            }
        }
        Ok(())
    }

    /// Exact value; errors outside the unit box.
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.check_box(x)?;
        Ok(self.eval(x))
    }

    /// Exact gradient `a - W x`; errors outside the unit box.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_box(x)?;
        Ok(self.grad(x))
    }

    /// Unchecked value, for inner loops that already guarantee feasibility.
    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        let d = self.dim;
        let mut quad = 0.0;
        for i in 0..d {
            quad += x[i] * dot(&self.quad[i * d..(i + 1) * d], x);
        }
        self.constant + dot(&self.linear, x) - 0.5 * quad
    }

    /// Unchecked gradient written into `out`.
    #[inline]
    pub fn grad_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        for ((o, a), row) in out.iter_mut().zip(&self.linear).zip(self.quad.chunks(d)) {
            *o = a - dot(row, x);
        }
    }

    #[inline]
    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        self.grad_into(x, &mut g);
        g
    }

    /// Plain-text serialization (exact round trip of every coefficient).
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let kind = match self.kind {
            ObjectiveKind::NonMonotoneQuadratic => "non_monotone_quadratic",
            ObjectiveKind::Separable1D => "separable_1d",
            ObjectiveKind::Linear => "linear",
            ObjectiveKind::Derived => "derived",
        };
        let _ = writeln!(s, "kind {kind}");
        let _ = writeln!(s, "dim {}", self.dim);
        let _ = writeln!(s, "constant {}", self.constant);
        let _ = writeln!(s, "a {}", join(&self.linear));
        let _ = writeln!(s, "W");
        for row in self.quad.chunks(self.dim) {
            let _ = writeln!(s, "{}", join(row));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::Config(format!("objective text: {m}"));
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let mut field = |name: &str| -> Result<String> {
            let line = lines.next().ok_or_else(|| bad("truncated"))?;
            let rest = line
                .strip_prefix(name)
                .ok_or_else(|| bad(&format!("expected `{name}`")))?;
            Ok(rest.trim().to_string())
        };
        let kind = match field("kind")?.as_str() {
            "non_monotone_quadratic" => ObjectiveKind::NonMonotoneQuadratic,
            "separable_1d" => ObjectiveKind::Separable1D,
            "linear" => ObjectiveKind::Linear,
            "derived" => ObjectiveKind::Derived,
            other => return Err(bad(&format!("unknown kind {other}"))),
        };
        let dim: usize = field("dim")?.parse().map_err(|_| bad("dim"))?;
        let constant: f64 = field("constant")?.parse().map_err(|_| bad("constant"))?;
        let a = parse_row(&field("a")?).ok_or_else(|| bad("a"))?;
        field("W")?;
        let mut quad = Vec::with_capacity(dim * dim);
        for _ in 0..dim {
            let row = parse_row(&field("")?).ok_or_else(|| bad("W row"))?;
            check_dim(dim, row.len())?;
            quad.extend(row);
        }
        check_dim(dim, a.len())?;
        let f = Self::build(kind, a, quad, constant);
        if kind == ObjectiveKind::NonMonotoneQuadratic {
            let rows = f.quad.chunks(dim).map(|r| r.to_vec()).collect();
            return Self::quadratic(f.linear, rows);
        }
        Ok(f)
    }
}

fn row_sums(quad: &[f64], dim: usize) -> Vec<f64> {
    (0..dim).map(|i| quad[i * dim..(i + 1) * dim].iter().sum()).collect()
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn parse_row(s: &str) -> Option<Vec<f64>> {
    s.split_whitespace().map(|t| t.parse().ok()).collect()
}

/// Feedback order of a stochastic oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleOrder {
    First,
    Zeroth,
}

/// Parameters of a bounded, unbiased stochastic oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSpec {
    pub order: OracleOrder,
    pub noise_sigma: f64,
    /// Deterministic bound on every oracle output (`B1` or `B0`).
    pub clip: f64,
    pub rng_seed: u64,
}

impl OracleSpec {
    /// First-order oracle with clip `M1 + sigma sqrt(3d)`, which the noise
    /// model never exceeds.
    pub fn first_order(lipschitz: f64, dim: usize, noise_sigma: f64, rng_seed: u64) -> Self {
        Self {
            order: OracleOrder::First,
            noise_sigma,
            clip: lipschitz + noise_sigma * (3.0 * dim as f64).sqrt(),
            rng_seed,
        }
    }

    /// Zeroth-order oracle with clip `value_bound + sigma sqrt(3)`.
    pub fn zeroth_order(value_bound: f64, noise_sigma: f64, rng_seed: u64) -> Self {
        Self {
            order: OracleOrder::Zeroth,
            noise_sigma,
            clip: value_bound + noise_sigma * 3f64.sqrt(),
            rng_seed,
        }
    }
}

/// Seeded stochastic oracle. Noise is coordinatewise uniform on
/// `[-sigma sqrt(3), sigma sqrt(3)]`: zero mean, variance `sigma^2`, bounded.
#[derive(Debug, Clone)]
pub struct StochasticOracle {
    spec: OracleSpec,
    rng: ChaCha8Rng,
    queries: u64,
}

impl StochasticOracle {
    pub fn new(spec: OracleSpec) -> Self {
        Self {
            spec,
            rng: ChaCha8Rng::seed_from_u64(spec.rng_seed),
            queries: 0,
        }
    }

    pub fn spec(&self) -> &OracleSpec {
        &self.spec
    }

    /// Number of oracle calls made so far.
    pub fn queries(&self) -> u64 {
        self.queries
    }

    fn noise(&mut self) -> f64 {
        if self.spec.noise_sigma == 0.0 {
            return 0.0;
        }
        let half = self.spec.noise_sigma * 3f64.sqrt();
        half * (2.0 * self.rng.random::<f64>() - 1.0)
    }

    /// Unbiased gradient sample with `||g|| <= clip`.
    pub fn stochastic_gradient(&mut self, f: &Objective, x: &[f64]) -> Result<Vec<f64>> {
        if self.spec.order != OracleOrder::First {
            return Err(Error::InvalidParameter("gradient query on a zeroth-order oracle".into()));
        }
        let mut g = f.gradient(x)?;
        self.queries += 1;
        for gi in g.iter_mut() {
            *gi += self.noise();
        }
        let n = norm(&g);
        if n > self.spec.clip {
            // Never reached when the clip is built from M1 + sigma sqrt(3d).
            let s = self.spec.clip / n;
            g.iter_mut().for_each(|v| *v *= s);
        }
        Ok(g)
    }

    /// Unbiased value sample with `|o| <= clip`.
    pub fn stochastic_value(&mut self, f: &Objective, x: &[f64]) -> Result<f64> {
        if self.spec.order != OracleOrder::Zeroth {
            return Err(Error::InvalidParameter("value query on a first-order oracle".into()));
        }
        let v = f.value(x)? + self.noise();
        self.queries += 1;
        Ok(v.clamp(-self.spec.clip, self.spec.clip))
    }
}

/// Result of an offline maximization.
#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub point: Vec<f64>,
    /// Attained value at `point`; a lower bound on the true maximum.
    pub value: f64,
    /// Upper bound on `true max - value`; infinite when no bound is certified.
    pub error_bound: f64,
}

/// Largest dimension handled by exhaustive grid search.
pub const GRID_MAX_DIM: usize = 4;
/// Largest dimension handled at all.
pub const BENCHMARK_MAX_DIM: usize = 8;
/// Grid resolution used for the static benchmark.
pub const BENCHMARK_GRID_STEPS: usize = 50;
const MULTISTART: usize = 32;

/// Approximate `argmax_{x in dom} sum_t f_t(x)`.
pub fn offline_benchmark(fs: &[Objective], dom: &Domain) -> Result<Benchmark> {
    let first = fs
        .first()
        .ok_or_else(|| Error::InvalidParameter("benchmark needs at least one function".into()))?;
    check_dim(dom.dim(), first.dim())?;
    let total = Objective::aggregate(dom.dim(), fs.iter().map(|f| (1.0, f)));
    maximize(&total, dom, BENCHMARK_GRID_STEPS)
}

/// Maximize one objective over `dom`: grid with `grid_steps` cells per axis
/// plus projected-gradient polish for `d <= 4`, multistart projected
/// gradient ascent for `4 < d <= 8`.
pub fn maximize(f: &Objective, dom: &Domain, grid_steps: usize) -> Result<Benchmark> {
    let d = dom.dim();
    check_dim(d, f.dim())?;
    if d > BENCHMARK_MAX_DIM {
        return Err(Error::DimensionTooLarge {
            dim: d,
            max: BENCHMARK_MAX_DIM,
            mode: "offline benchmark",
        });
    }
    if f.quad.iter().all(|w| *w == 0.0) {
        let point = dom.linear_maximize(&f.linear)?;
        let value = f.eval(&point);
        return Ok(Benchmark { point, value, error_bound: 0.0 });
    }
    if d <= GRID_MAX_DIM {
        let steps = grid_steps.max(1);
        let (start, _) = grid_search(f, dom, steps)?;
        let polished = polish(f, dom, &start)?;
        let (point, value) = best_of(f, start, polished);
        let h = dom.coordinate_cap() / steps as f64;
        let error_bound = f.lipschitz() * h * (d as f64).sqrt();
        Ok(Benchmark { point, value, error_bound })
    } else {
        multistart(f, dom, MULTISTART, 0x5eed)
    }
}

/// Multistart projected gradient ascent; no certified error bound.
pub fn multistart(f: &Objective, dom: &Domain, starts: usize, seed: u64) -> Result<Benchmark> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for k in 0..starts {
        let x0 = if k == 0 { dom.center().to_vec() } else { dom.sample_point(&mut rng) };
        let x = polish(f, dom, &x0)?;
        let v = f.eval(&x);
        if best.as_ref().is_none_or(|(_, bv)| v > *bv) {
            best = Some((x, v));
        }
    }
    let (point, value) = best.expect("at least one start");
    Ok(Benchmark { point, value, error_bound: f64::INFINITY })
}

fn best_of(f: &Objective, a: Vec<f64>, b: Vec<f64>) -> (Vec<f64>, f64) {
    let (va, vb) = (f.eval(&a), f.eval(&b));
    if vb >= va {
        (b, vb)
    } else {
        (a, va)
    }
}

fn grid_search(f: &Objective, dom: &Domain, steps: usize) -> Result<(Vec<f64>, f64)> {
    let d = dom.dim();
    let h = dom.coordinate_cap() / steps as f64;
    let mut idx = vec![0usize; d];
    let mut x = vec![0.0; d];
    let mut best = (vec![0.0; d], f.eval(&vec![0.0; d]));
    loop {
        for (xi, &k) in x.iter_mut().zip(&idx) {
            *xi = k as f64 * h;
        }
        if dom.contains(&x, 0.0)? {
            let v = f.eval(&x);
            if v > best.1 {
                best = (x.clone(), v);
            }
        }
        // odometer increment
        let mut pos = 0;
        loop {
            if pos == d {
                return Ok(best);
            }
            idx[pos] += 1;
            if idx[pos] <= steps {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

/// Projected gradient ascent with step `1 / L` until the iterate stalls.
pub(crate) fn polish(f: &Objective, dom: &Domain, start: &[f64]) -> Result<Vec<f64>> {
    let step = if f.smoothness > 0.0 { 1.0 / f.smoothness } else { 1.0 };
    let mut x = dom.euclidean_project(start)?;
    let mut g = vec![0.0; x.len()];
    for _ in 0..20_000 {
        f.grad_into(&x, &mut g);
        let trial: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi + step * gi).collect();
        let next = dom.euclidean_project(&trial)?;
        let moved = dist(&next, &x);
        x = next;
        if moved < 1e-13 {
            break;
        }
    }
    Ok(x)
}
