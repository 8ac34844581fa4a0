//! Regret metrics, interval sampling plans and log-log slope fits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::objectives::{maximize, offline_benchmark, Objective};
use crate::surrogate::ALPHA;
use crate::vecops::dist;

/// Horizons up to this size enumerate every interval exactly.
pub const EXACT_INTERVAL_LIMIT: usize = 512;
/// Number of uniformly sampled intervals added to the dyadic ones.
pub const SAMPLED_INTERVALS: usize = 500;

/// Which contiguous intervals `[start, end)` the adaptive regret inspects.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalPlan {
    pub intervals: Vec<(usize, usize)>,
    /// Every interval of the horizon is present.
    pub exact: bool,
    pub seed: u64,
}

impl IntervalPlan {
    /// Exact enumeration for `T <= 512`; otherwise all dyadic intervals plus
    /// 500 uniform samples. The full horizon is always included.
    pub fn new(horizon: usize, seed: u64) -> Self {
        if horizon <= EXACT_INTERVAL_LIMIT {
            return Self::exhaustive(horizon, seed);
        }
        Self::sampled(horizon, SAMPLED_INTERVALS, seed)
    }

    pub fn exhaustive(horizon: usize, seed: u64) -> Self {
        let mut intervals = Vec::with_capacity(horizon * (horizon + 1) / 2);
        for s in 0..horizon {
            for e in (s + 1)..=horizon {
                intervals.push((s, e));
            }
        }
        Self { intervals, exact: true, seed }
    }

    pub fn sampled(horizon: usize, samples: usize, seed: u64) -> Self {
        let mut intervals = Vec::new();
        let mut len = 1;
        loop {
            let mut s = 0;
            while s < horizon {
                intervals.push((s, (s + len).min(horizon)));
                s += len;
            }
            if len >= horizon {
                break;
            }
            len *= 2;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..samples {
            let a = rng.random_range(0..horizon);
            let b = rng.random_range(0..horizon);
            intervals.push((a.min(b), a.max(b) + 1));
        }
        intervals.sort_unstable();
        intervals.dedup();
        Self { intervals, exact: false, seed }
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }
}

/// Prefix sums of a scalar series: `p[t] = sum_{s < t} x_s`.
pub fn prefix(xs: &[f64]) -> Vec<f64> {
    let mut p = Vec::with_capacity(xs.len() + 1);
    p.push(0.0);
    let mut acc = 0.0;
    for x in xs {
        acc += x;
        p.push(acc);
    }
    p
}

/// Prefix sums of a vector series, flattened row-major with `T + 1` rows.
pub fn prefix_vectors(rows: &[Vec<f64>], dim: usize) -> Vec<f64> {
    let mut p = vec![0.0; (rows.len() + 1) * dim];
    for (t, r) in rows.iter().enumerate() {
        for i in 0..dim {
            p[(t + 1) * dim + i] = p[t * dim + i] + r[i];
        }
    }
    p
}

/// Sum of rows `[s, e)` from a flattened prefix array.
pub fn window(p: &[f64], dim: usize, s: usize, e: usize) -> Vec<f64> {
    (0..dim).map(|i| p[e * dim + i] - p[s * dim + i]).collect()
}

/// Sum of `f_t` over `[s, e)` from prefix sums of their coefficients.
#[derive(Debug, Clone)]
pub struct PrefixObjectives {
    dim: usize,
    linear: Vec<f64>,
    quad: Vec<f64>,
    constant: Vec<f64>,
}

impl PrefixObjectives {
    pub fn new(fs: &[Objective], dim: usize) -> Self {
        let t = fs.len();
        let mut linear = vec![0.0; (t + 1) * dim];
        let mut quad = vec![0.0; (t + 1) * dim * dim];
        let mut constant = vec![0.0; t + 1];
        for (k, f) in fs.iter().enumerate() {
            for i in 0..dim {
                linear[(k + 1) * dim + i] = linear[k * dim + i] + f.linear_term()[i];
            }
            let q = dim * dim;
            for i in 0..q {
                quad[(k + 1) * q + i] = quad[k * q + i] + f.quadratic_term()[i];
            }
            constant[k + 1] = constant[k] + f.constant_term();
        }
        Self { dim, linear, quad, constant }
    }

    pub fn window(&self, s: usize, e: usize) -> Objective {
        let q = self.dim * self.dim;
        let a = window(&self.linear, self.dim, s, e);
        let w = window(&self.quad, q, s, e);
        Objective::from_parts(a, w, self.constant[e] - self.constant[s])
    }
}

/// `(1/e) max_K sum_t f_t - sum_t reward_t`, with the benchmark's error bound.
pub fn regret_static(rewards: &[f64], fs: &[Objective], dom: &Domain) -> Result<(f64, f64)> {
    let b = offline_benchmark(fs, dom)?;
    Ok((ALPHA * b.value - rewards.iter().sum::<f64>(), b.error_bound))
}

/// Interval maximization shared by adaptive and dynamic metrics.
pub const INTERVAL_GRID_STEPS: usize = 8;

/// Max over the plan of interval static regrets.
pub fn regret_adaptive(
    rewards: &[f64],
    fs: &[Objective],
    dom: &Domain,
    plan: &IntervalPlan,
) -> Result<f64> {
    let pf = PrefixObjectives::new(fs, dom.dim());
    let pr = prefix(rewards);
    let mut best = f64::NEG_INFINITY;
    for &(s, e) in &plan.intervals {
        let v = maximize(&pf.window(s, e), dom, INTERVAL_GRID_STEPS)?.value;
        best = best.max(ALPHA * v - (pr[e] - pr[s]));
    }
    Ok(best)
}

/// `(1/e) sum_t f_t(u*_t) - sum_t reward_t` and the path length of `u*`.
pub fn regret_dynamic(rewards: &[f64], fs: &[Objective], dom: &Domain) -> Result<(f64, f64)> {
    let mut total = 0.0;
    let mut path = 0.0;
    let mut prev: Option<Vec<f64>> = None;
    for f in fs {
        let b = maximize(f, dom, INTERVAL_GRID_STEPS)?;
        total += b.value;
        if let Some(p) = &prev {
            path += dist(p, &b.point);
        }
        prev = Some(b.point);
    }
    Ok((ALPHA * total - rewards.iter().sum::<f64>(), path))
}

/// Upper bound on `sup Σ_t <g_t, u_t>` over comparator sequences in the unit
/// box with Euclidean path length at most `path_budget`.
///
/// The Euclidean path is relaxed to an `l1` path of budget `sqrt(d) P` and the
/// budget is dualized; for each multiplier the problem splits into per-coordinate
/// switching programs over `{0,1}` solved exactly. Every multiplier gives a
/// valid bound; the returned value is the smallest one found.
pub fn path_linear_max(grads: &[Vec<f64>], dim: usize, path_budget: f64) -> f64 {
    if grads.is_empty() {
        return 0.0;
    }
    let budget = (dim as f64).sqrt() * path_budget.max(0.0);
    let switching = |i: usize, lambda: f64| -> f64 {
        let (mut v0, mut v1): (f64, f64) = (0.0, grads[0][i]);
        for g in &grads[1..] {
            let n0 = v0.max(v1 - lambda);
            let n1 = g[i] + v1.max(v0 - lambda);
            v0 = n0;
            v1 = n1;
        }
        v0.max(v1)
    };
    let dual = |lambda: f64| -> f64 { lambda * budget + (0..dim).map(|i| switching(i, lambda)).sum::<f64>() };
    let hi = (0..dim)
        .map(|i| grads.iter().map(|g| g[i].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let (mut a, mut b) = (0.0, hi);
    let mut best = dual(0.0).min(dual(hi));
    for _ in 0..100 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        let (f1, f2) = (dual(m1), dual(m2));
        best = best.min(f1).min(f2);
        if f1 <= f2 {
            b = m2;
        } else {
            a = m1;
        }
        if b - a <= 1e-12 * hi.max(1.0) {
            break;
        }
    }
    best
}

/// Least-squares fit of `log y = slope log x + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Points used after excluding nonpositive values.
    pub used: usize,
    pub excluded: usize,
}

pub fn fit_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut excluded = 0;
    for &(x, y) in points {
        if x > 0.0 && y > 0.0 && y.is_finite() {
            xs.push(x.ln());
            ys.push(y.ln());
        } else {
            log::warn!("slope fit: excluding nonpositive point ({x}, {y})");
            excluded += 1;
        }
    }
    let n = xs.len();
    if n < 2 {
        return Err(Error::Fit(format!(
            "need at least two positive points, have {n} ({excluded} excluded)"
        )));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all abscissae coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r2 = if ss_tot <= 1e-300 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(SlopeFit { slope, intercept, r2, used: n, excluded })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_linear_max_bounds_every_comparator_on_a_lattice() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = 7;
        for _ in 0..30 {
            let g: Vec<Vec<f64>> = (0..t).map(|_| vec![rng.random::<f64>() * 2.0 - 1.0]).collect();
            for budget in [0.0, 0.5, 1.0, 2.0] {
                let ub = path_linear_max(&g, 1, budget);
                let mut best = f64::NEG_INFINITY;
                for code in 0..3usize.pow(t as u32) {
                    let u: Vec<f64> = (0..t).map(|k| (code / 3usize.pow(k as u32) % 3) as f64 / 2.0).collect();
                    let path: f64 = u.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
                    if path <= budget + 1e-12 {
                        best = best.max(u.iter().zip(&g).map(|(a, b)| a * b[0]).sum());
                    }
                }
                assert!(ub >= best - 1e-9, "{ub} < {best}");
            }
            let unconstrained: f64 = g.iter().map(|x| x[0].max(0.0)).sum();
            assert!((path_linear_max(&g, 1, t as f64) - unconstrained).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_budget_is_the_static_box_maximum() {
        let g = vec![vec![1.0, -2.0], vec![0.5, 1.0], vec![-0.25, 0.5]];
        assert!((path_linear_max(&g, 2, 0.0) - 1.25).abs() < 1e-9);
    }

    fn horizons() -> Vec<f64> {
        (10..=14).map(|k| 2f64.powi(k)).collect()
    }

    #[test]
    fn slope_examples() {
        let sq: Vec<_> = horizons().into_iter().map(|t| (t, t.sqrt())).collect();
        let f = fit_slope(&sq).unwrap();
        assert!((f.slope - 0.5).abs() < 1e-12 && (f.r2 - 1.0).abs() < 1e-12);
        let tt: Vec<_> = horizons().into_iter().map(|t| (t, t.powf(2.0 / 3.0))).collect();
        assert!((fit_slope(&tt).unwrap().slope - 0.6667).abs() < 1e-4);
        let c: Vec<_> = horizons().into_iter().map(|t| (t, 3.0)).collect();
        assert!(fit_slope(&c).unwrap().slope.abs() < 1e-12);
        let mut neg = sq.clone();
        neg[0].1 = -1.0;
        let g = fit_slope(&neg).unwrap();
        assert_eq!((g.used, g.excluded), (4, 1));
        assert!(fit_slope(&[(1.0, -1.0), (2.0, 1.0)]).is_err());
    }

    #[test]
    fn plans() {
        let p = IntervalPlan::new(8, 0);
        assert!(p.exact);
        assert_eq!(p.len(), 36);
        let q = IntervalPlan::new(1024, 3);
        assert!(!q.exact);
        assert!(q.intervals.contains(&(0, 1024)));
        assert!(q.intervals.contains(&(512, 1024)));
        assert!(q.intervals.iter().all(|&(s, e)| s < e && e <= 1024));
        assert!(q.len() >= 2047);
    }

    #[test]
    fn static_regret_examples() {
        let dom = Domain::unit_box(1).unwrap();
        let f = Objective::separable_1d();
        let (r, _) = regret_static(&[0.0], std::slice::from_ref(&f), &dom).unwrap();
        assert!((r - ALPHA * 0.25).abs() < 1e-12);
        assert!((r - 0.09197).abs() < 1e-5);
        let zero = Objective::linear(vec![0.0]).unwrap();
        let (r0, _) = regret_static(&[0.0; 5], &vec![zero.clone(); 5], &dom).unwrap();
        assert_eq!(r0, 0.0);
        let fs = vec![f.clone(); 10];
        let (rb, _) = regret_static(&[0.25; 10], &fs, &dom).unwrap();
        assert!((rb - (ALPHA - 1.0) * 2.5).abs() < 1e-12);
        let (d0, p0) = regret_dynamic(&[0.0; 5], &vec![zero; 5], &dom).unwrap();
        assert_eq!((d0, p0), (0.0, 0.0));
    }

    #[test]
    fn stationary_dynamic_equals_static() {
        let dom = Domain::unit_box(2).unwrap();
        let f = Objective::quadratic(vec![0.8, 0.6], vec![vec![1.0, 0.2], vec![0.2, 1.0]]).unwrap();
        let fs = vec![f; 20];
        let rewards: Vec<f64> = (0..20).map(|t| 0.01 * t as f64).collect();
        let (s, _) = regret_static(&rewards, &fs, &dom).unwrap();
        let (d, p) = regret_dynamic(&rewards, &fs, &dom).unwrap();
        assert!(p < 1e-9);
        assert!((s - d).abs() < 1e-8);
        let plan = IntervalPlan::new(20, 0);
        let a = regret_adaptive(&rewards, &fs, &dom, &plan).unwrap();
        assert!(a >= s - 1e-8);
    }

    #[test]
    fn sampled_plan_is_a_lower_bound_of_exact_enumeration() {
        let dom = Domain::unit_box(1).unwrap();
        let fs = vec![Objective::separable_1d(); 64];
        let rewards: Vec<f64> = (0..64).map(|t| if t % 7 == 0 { 0.0 } else { 0.2 }).collect();
        let exact = regret_adaptive(&rewards, &fs, &dom, &IntervalPlan::exhaustive(64, 0)).unwrap();
        let sampled = regret_adaptive(&rewards, &fs, &dom, &IntervalPlan::sampled(64, 20, 1)).unwrap();
        assert!(sampled <= exact + 1e-12);
    }
}
