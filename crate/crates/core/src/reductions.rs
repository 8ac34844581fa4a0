//! Feedback reductions on top of an online linear learner.
//!
//! * [`Ombq`] plays `h(x_t)` and feeds one BQND estimate per round
//!   (first-order, full information).
//! * [`Sftt`] turns a full-information algorithm into one whose every query
//!   is at the played point, by committing to one inner round per block of
//!   `L` rounds and hiding the inner query at a random position.
//! * [`Fotzo`] replaces each gradient query by a one-point spherical
//!   estimate built from a value query (zeroth order, full information).
//! * [`Stb`] perturbs the played point of a semi-bandit algorithm and
//!   feeds the same one-point estimate (bandit).
//!
//! The smoothing wrappers run their inner algorithm in the coordinates of
//! the unshrunk domain `K` and map every point through the contraction
//! `φ(x) = s (x - c) + c` onto the shrunk set, so `δ`-perturbations of
//! played and queried points stay feasible. The inner algorithm therefore
//! faces `f ∘ φ`, whose gradient is `s ∇f(φ(x))`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::Domain;
use crate::learners::LinearLearner;
use crate::surrogate::{bqnd_finish, bqnd_query, h_map, BqndQuery};

/// Uniform unit vector via a normalized Gaussian draw.
pub fn unit_sphere<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = crate::vecops::norm(&v);
        if n > 1e-300 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Feedback model of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackMode {
    #[default]
    FirstFull,
    SemiBandit,
    ZerothFull,
    Bandit,
}

impl FeedbackMode {
    pub const ALL: [FeedbackMode; 4] = [
        FeedbackMode::FirstFull,
        FeedbackMode::SemiBandit,
        FeedbackMode::ZerothFull,
        FeedbackMode::Bandit,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeedbackMode::FirstFull => "first_full",
            FeedbackMode::SemiBandit => "semi_bandit",
            FeedbackMode::ZerothFull => "zeroth_full",
            FeedbackMode::Bandit => "bandit",
        }
    }

    /// Whether every query must sit at the played point.
    pub fn trivial_queries(self) -> bool {
        matches!(self, FeedbackMode::SemiBandit | FeedbackMode::Bandit)
    }

    pub fn zeroth_order(self) -> bool {
        matches!(self, FeedbackMode::ZerothFull | FeedbackMode::Bandit)
    }

    pub fn uses_blocks(self) -> bool {
        matches!(self, FeedbackMode::SemiBandit | FeedbackMode::Bandit)
    }

    /// Exponent of the regret rate the reduction is designed for.
    pub fn target_exponent(self) -> f64 {
        match self {
            FeedbackMode::FirstFull => 0.5,
            FeedbackMode::SemiBandit => 2.0 / 3.0,
            FeedbackMode::ZerothFull => 0.75,
            FeedbackMode::Bandit => 0.8,
        }
    }
}

impl std::str::FromStr for FeedbackMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeedbackMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown feedback mode `{s}`")))
    }
}

/// Block length and smoothing radius of a reduction stack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReductionParams {
    pub mode: FeedbackMode,
    pub horizon: usize,
    /// Block length (1 when the mode has no blocks).
    pub block_len: usize,
    /// Smoothing radius (0 for first-order modes).
    pub delta_smooth: f64,
    /// Dimension of the sampling subspace.
    pub k: usize,
}

impl ReductionParams {
    /// Defaults: `L = ceil(T^{1/3})` (semi-bandit), `δ = T^{-1/4}` (zeroth
    /// order), and `L = ceil(T^{1/5})`, `δ = T^{-1/5}` (bandit).
    pub fn defaults(mode: FeedbackMode, horizon: usize, dim: usize) -> Self {
        let t = horizon as f64;
        let (block_len, delta_smooth) = match mode {
            FeedbackMode::FirstFull => (1, 0.0),
            FeedbackMode::SemiBandit => (t.cbrt().ceil() as usize, 0.0),
            FeedbackMode::ZerothFull => (1, t.powf(-0.25)),
            FeedbackMode::Bandit => (t.powf(0.2).ceil() as usize, t.powf(-0.2)),
        };
        Self {
            mode,
            horizon,
            block_len: block_len.max(1),
            delta_smooth,
            k: dim,
        }
    }

    pub fn with_overrides(mut self, block_len: Option<usize>, delta_smooth: Option<f64>) -> Self {
        if self.mode.uses_blocks() {
            if let Some(l) = block_len {
                self.block_len = l;
            }
        }
        if self.mode.zeroth_order() {
            if let Some(d) = delta_smooth {
                self.delta_smooth = d;
            }
        }
        self
    }

    /// Rounds seen by the base learner.
    pub fn learner_horizon(&self) -> usize {
        self.horizon.div_ceil(self.block_len)
    }

    pub fn validate(&self, domain: &Domain) -> Result<()> {
        if self.horizon == 0 || self.block_len == 0 {
            return Err(Error::InvalidParameter("horizon and block length must be positive".into()));
        }
        if self.mode.uses_blocks() && self.block_len < 2 {
            return Err(Error::InvalidParameter(
                "block length must exceed the single inner query".into(),
            ));
        }
        if self.mode.zeroth_order() {
            let r = domain.inner_radius();
            if !(self.delta_smooth > 0.0 && self.delta_smooth < r) {
                return Err(Error::InvalidParameter(format!(
                    "smoothing radius {} must lie in (0, r = {r})",
                    self.delta_smooth
                )));
            }
        }
        Ok(())
    }

    /// The contraction applied by the smoothing wrappers (identity otherwise).
    pub fn shrink_map(&self, domain: &Domain) -> ShrinkMap {
        if self.mode.zeroth_order() {
            ShrinkMap::new(1.0 - self.delta_smooth / domain.inner_radius(), domain.center())
        } else {
            ShrinkMap::identity(domain.center())
        }
    }
}

/// `φ(x) = s (x - c) + c`, mapping `K` onto its `δ`-shrunk copy.
#[derive(Debug, Clone, PartialEq)]
pub struct ShrinkMap {
    pub scale: f64,
    pub center: Vec<f64>,
}

impl ShrinkMap {
    pub fn new(scale: f64, center: &[f64]) -> Self {
        Self { scale, center: center.to_vec() }
    }

    pub fn identity(center: &[f64]) -> Self {
        Self::new(1.0, center)
    }

    pub fn is_identity(&self) -> bool {
        self.scale == 1.0
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        if self.is_identity() {
            return x.to_vec();
        }
        x.iter()
            .zip(&self.center)
            .map(|(xi, ci)| self.scale * (xi - ci) + ci)
            .collect()
    }
}

/// An online algorithm that answers each round with one gradient query.
///
/// Within a round, [`Self::action`] and [`Self::query`] are fixed until
/// [`Self::respond`] delivers the oracle answer and advances to the next round.
pub trait FirstOrderAlgorithm: Send {
    fn action(&self) -> &[f64];
    fn query(&self) -> &[f64];
    fn respond(&mut self, gradient: &[f64]) -> Result<()>;
    /// Current point of the underlying linear learner.
    fn learner_point(&self) -> &[f64];
}

/// An online algorithm that answers each round with one value query.
pub trait ZerothOrderAlgorithm: Send {
    fn action(&self) -> &[f64];
    fn query(&self) -> &[f64];
    fn respond(&mut self, value: f64) -> Result<()>;
    fn learner_point(&self) -> &[f64];
}

/// Main loop of the reduction: play `h(x_t)`, query the gradient at
/// `h_z(x_t)`, feed `v ⊙ e^{-z x_t}` to the learner.
pub struct Ombq {
    learner: Box<dyn LinearLearner>,
    rng: ChaCha8Rng,
    played: Vec<f64>,
    pending: BqndQuery,
    sabotage: bool,
}

impl Ombq {
    pub fn new(learner: Box<dyn LinearLearner>, rng_seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        rng.set_stream(1);
        let x = learner.next_action().to_vec();
        let pending = bqnd_query(&x, &mut rng);
        Self {
            played: h_map(&x),
            learner,
            rng,
            pending,
            sabotage: false,
        }
    }

    /// Negative control: feed the negated estimate.
    #[doc(hidden)]
    pub fn sabotaged(mut self) -> Self {
        self.sabotage = true;
        self
    }

    pub fn learner(&self) -> &dyn LinearLearner {
        self.learner.as_ref()
    }
}

impl FirstOrderAlgorithm for Ombq {
    fn action(&self) -> &[f64] {
        &self.played
    }

    fn query(&self) -> &[f64] {
        &self.pending.point
    }

    fn respond(&mut self, gradient: &[f64]) -> Result<()> {
        check_dim(self.played.len(), gradient.len())?;
        let mut est = bqnd_finish(&self.pending, self.learner.next_action(), gradient);
        if self.sabotage {
            est.iter_mut().for_each(|v| *v = -*v);
        }
        self.learner.feed(&est)?;
        let x = self.learner.next_action().to_vec();
        self.played = h_map(&x);
        self.pending = bqnd_query(&x, &mut self.rng);
        Ok(())
    }

    fn learner_point(&self) -> &[f64] {
        self.learner.next_action()
    }
}

/// Full-information to trivial-query wrapper with blocks of `L` rounds.
pub struct Sftt<A> {
    inner: A,
    block_len: usize,
    horizon: usize,
    rng: ChaCha8Rng,
    round: usize,
    /// Round (absolute) carrying the hidden inner query of the current block.
    query_round: usize,
    block_end: usize,
    saved: Option<Vec<f64>>,
    on_query_round: bool,
}

impl<A: FirstOrderAlgorithm> Sftt<A> {
    pub fn new(inner: A, block_len: usize, horizon: usize, rng_seed: u64) -> Result<Self> {
        if block_len < 2 {
            return Err(Error::InvalidParameter("block length must be at least 2".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        rng.set_stream(2);
        let mut s = Self {
            inner,
            block_len,
            horizon,
            rng,
            round: 0,
            query_round: 0,
            block_end: 0,
            saved: None,
            on_query_round: false,
        };
        s.start_block();
        Ok(s)
    }

    fn start_block(&mut self) {
        let start = self.round;
        let len = self.block_len.min(self.horizon.saturating_sub(start)).max(1);
        self.block_end = start + len;
        // A partial block carries its query on its first round.
        self.query_round = if len == self.block_len {
            start + self.rng.random_range(0..len)
        } else {
            start
        };
        self.on_query_round = self.round == self.query_round;
        self.saved = None;
    }

    pub fn inner(&self) -> &A {
        &self.inner
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    /// Whether the current round carries the inner query.
    pub fn on_query_round(&self) -> bool {
        self.on_query_round
    }
}

impl<A: FirstOrderAlgorithm> FirstOrderAlgorithm for Sftt<A> {
    fn action(&self) -> &[f64] {
        if self.on_query_round {
            self.inner.query()
        } else {
            self.inner.action()
        }
    }

    fn query(&self) -> &[f64] {
        self.action()
    }

    fn respond(&mut self, gradient: &[f64]) -> Result<()> {
        if self.on_query_round {
            self.saved = Some(gradient.to_vec());
        }
        self.round += 1;
        if self.round >= self.block_end {
            let g = self.saved.take().expect("every block carries one query");
            self.inner.respond(&g)?;
            self.start_block();
        } else {
            self.on_query_round = self.round == self.query_round;
        }
        Ok(())
    }

    fn learner_point(&self) -> &[f64] {
        self.inner.learner_point()
    }
}

/// One-point spherical smoothing shared by FOTZO and STB.
struct Smoother {
    map: ShrinkMap,
    delta: f64,
    k: usize,
    rng: ChaCha8Rng,
    direction: Vec<f64>,
}

impl Smoother {
    fn new(map: ShrinkMap, delta: f64, k: usize, rng_seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        rng.set_stream(stream);
        let direction = unit_sphere(map.center.len(), &mut rng);
        Self { map, delta, k, rng, direction }
    }

    /// `φ(y) + δ v` for the current direction `v`.
    fn perturb(&self, y: &[f64]) -> Vec<f64> {
        let mut p = self.map.apply(y);
        crate::vecops::axpy(self.delta, &self.direction, &mut p);
        p
    }

    /// `s (k/δ) o v`: gradient estimate of `f ∘ φ` at `y`.
    fn estimate(&self, value: f64) -> Vec<f64> {
        let c = self.map.scale * self.k as f64 / self.delta * value;
        self.direction.iter().map(|v| c * v).collect()
    }

    fn redraw(&mut self) {
        self.direction = unit_sphere(self.map.center.len(), &mut self.rng);
    }
}

/// First-order to zeroth-order wrapper (full information).
pub struct Fotzo<A> {
    inner: A,
    smoother: Smoother,
    played: Vec<f64>,
    query: Vec<f64>,
}

impl<A: FirstOrderAlgorithm> Fotzo<A> {
    pub fn new(inner: A, map: ShrinkMap, delta: f64, k: usize, rng_seed: u64) -> Self {
        let smoother = Smoother::new(map, delta, k, rng_seed, 3);
        let mut s = Self {
            played: Vec::new(),
            query: Vec::new(),
            inner,
            smoother,
        };
        s.refresh();
        s
    }

    fn refresh(&mut self) {
        self.played = self.smoother.map.apply(self.inner.action());
        self.query = self.smoother.perturb(self.inner.query());
    }

    pub fn inner(&self) -> &A {
        &self.inner
    }
}

impl<A: FirstOrderAlgorithm> ZerothOrderAlgorithm for Fotzo<A> {
    fn action(&self) -> &[f64] {
        &self.played
    }

    fn query(&self) -> &[f64] {
        &self.query
    }

    fn respond(&mut self, value: f64) -> Result<()> {
        let g = self.smoother.estimate(value);
        self.inner.respond(&g)?;
        self.smoother.redraw();
        self.refresh();
        Ok(())
    }

    fn learner_point(&self) -> &[f64] {
        self.inner.learner_point()
    }
}

/// Semi-bandit to bandit wrapper: play `φ(x_t) + δ v_t`, feed `s (k/δ) o_t v_t`.
pub struct Stb<A> {
    inner: A,
    smoother: Smoother,
    played: Vec<f64>,
}

impl<A: FirstOrderAlgorithm> Stb<A> {
    pub fn new(inner: A, map: ShrinkMap, delta: f64, k: usize, rng_seed: u64) -> Self {
        let smoother = Smoother::new(map, delta, k, rng_seed, 4);
        let played = smoother.perturb(inner.action());
        Self { inner, smoother, played }
    }

    pub fn inner(&self) -> &A {
        &self.inner
    }
}

impl<A: FirstOrderAlgorithm> ZerothOrderAlgorithm for Stb<A> {
    fn action(&self) -> &[f64] {
        &self.played
    }

    fn query(&self) -> &[f64] {
        &self.played
    }

    fn respond(&mut self, value: f64) -> Result<()> {
        let g = self.smoother.estimate(value);
        self.inner.respond(&g)?;
        self.smoother.redraw();
        self.played = self.smoother.perturb(self.inner.action());
        Ok(())
    }

    fn learner_point(&self) -> &[f64] {
        self.inner.learner_point()
    }
}

/// A fully assembled reduction stack for one feedback mode.
pub enum Stack {
    First(Box<dyn FirstOrderAlgorithm>),
    Zeroth(Box<dyn ZerothOrderAlgorithm>),
}

impl Stack {
    /// Builds the stack for `params` around `learner` (which lives in the
    /// coordinates of the unshrunk domain).
    pub fn build(
        params: &ReductionParams,
        learner: Box<dyn LinearLearner>,
        rng_seed: u64,
        sabotage: bool,
    ) -> Result<Self> {
        let domain = learner.domain().clone();
        params.validate(&domain)?;
        let mut ombq = Ombq::new(learner, rng_seed);
        if sabotage {
            ombq = ombq.sabotaged();
        }
        let map = params.shrink_map(&domain);
        let (l, t, d, k) = (params.block_len, params.horizon, params.delta_smooth, params.k);
        Ok(match params.mode {
            FeedbackMode::FirstFull => Stack::First(Box::new(ombq)),
            FeedbackMode::SemiBandit => Stack::First(Box::new(Sftt::new(ombq, l, t, rng_seed)?)),
            FeedbackMode::ZerothFull => Stack::Zeroth(Box::new(Fotzo::new(ombq, map, d, k, rng_seed))),
            FeedbackMode::Bandit => {
                let sftt = Sftt::new(ombq, l, t, rng_seed)?;
                Stack::Zeroth(Box::new(Stb::new(sftt, map, d, k, rng_seed)))
            }
        })
    }

    pub fn action(&self) -> &[f64] {
        match self {
            Stack::First(a) => a.action(),
            Stack::Zeroth(a) => a.action(),
        }
    }

    pub fn query(&self) -> &[f64] {
        match self {
            Stack::First(a) => a.query(),
            Stack::Zeroth(a) => a.query(),
        }
    }

    pub fn learner_point(&self) -> &[f64] {
        match self {
            Stack::First(a) => a.learner_point(),
            Stack::Zeroth(a) => a.learner_point(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::SoOga;
    use crate::objectives::{Objective, OracleSpec, StochasticOracle};

    /// Learner that never moves.
    struct Frozen(Domain, Vec<f64>);

    impl LinearLearner for Frozen {
        fn next_action(&self) -> &[f64] {
            &self.1
        }
        fn feed(&mut self, _: &[f64]) -> Result<()> {
            Ok(())
        }
        fn reset(&mut self) {}
        fn domain(&self) -> &Domain {
            &self.0
        }
        fn name(&self) -> &'static str {
            "frozen"
        }
    }

    #[test]
    fn sphere_samples_are_unit() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for d in 1..6 {
            let v = unit_sphere(d, &mut rng);
            assert!((crate::vecops::norm(&v) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn default_parameters() {
        let p = ReductionParams::defaults(FeedbackMode::SemiBandit, 1000, 3);
        assert_eq!(p.block_len, 10);
        assert_eq!(p.learner_horizon(), 100);
        let z = ReductionParams::defaults(FeedbackMode::ZerothFull, 10_000, 3);
        assert!((z.delta_smooth - 0.1).abs() < 1e-12);
        assert_eq!(z.k, 3);
        let b = ReductionParams::defaults(FeedbackMode::Bandit, 1 << 10, 3);
        assert_eq!(b.block_len, 4);
        assert!((b.delta_smooth - 0.25).abs() < 1e-12);
        assert_eq!("bandit".parse::<FeedbackMode>().unwrap(), FeedbackMode::Bandit);
        assert!("nope".parse::<FeedbackMode>().is_err());
    }

    #[test]
    fn frozen_learner_at_origin_plays_origin() {
        let dom = Domain::unit_box(2).unwrap();
        let mut a = Ombq::new(Box::new(Frozen(dom, vec![0.0, 0.0])), 1);
        assert_eq!(a.action(), &[0.0, 0.0]);
        assert_eq!(a.query(), &[0.0, 0.0]);
        a.respond(&[1.0, 1.0]).unwrap();
        assert_eq!(a.action(), &[0.0, 0.0]);
    }

    #[test]
    fn sftt_hides_exactly_one_query_per_block() {
        let dom = Domain::unit_box(1).unwrap();
        let inner = Ombq::new(Box::new(Frozen(dom, vec![0.8])), 5);
        let (l, t) = (5, 23);
        let mut s = Sftt::new(inner, l, t, 9).unwrap();
        let mut off = vec![0usize; t.div_ceil(l)];
        for round in 0..t {
            let base = h_map(&[0.8]);
            if s.action() != base.as_slice() {
                off[round / l] += 1;
                assert!(s.on_query_round());
            }
            if round == 20 {
                // partial final block: query on its first round
                assert!(s.on_query_round());
            }
            assert_eq!(s.action(), s.query());
            s.respond(&[0.0]).unwrap();
        }
        assert!(off.iter().all(|&c| c <= 1));
        assert!(off.iter().sum::<usize>() >= off.len() - 1);
    }

    #[test]
    fn fotzo_estimate_of_a_constant_has_zero_mean() {
        let dom = Domain::unit_box(3).unwrap();
        let map = ShrinkMap::new(0.8, dom.center());
        let mut sm = Smoother::new(map, 0.1, 3, 7, 3);
        let mut acc = [0.0; 3];
        let n = 200_000;
        for _ in 0..n {
            let g = sm.estimate(2.0);
            for i in 0..3 {
                acc[i] += g[i] / n as f64;
            }
            sm.redraw();
        }
        // each coordinate has sd s k o / δ / sqrt(3) ≈ 27.7; SE ≈ 0.062
        assert!(acc.iter().all(|m| m.abs() < 0.25), "{acc:?}");
    }

    #[test]
    fn stb_plays_its_queries_and_stays_feasible() {
        let dom = Domain::knapsack(vec![1.0, 1.0], 1.2).unwrap();
        let t = 3000;
        let params = ReductionParams::defaults(FeedbackMode::Bandit, t, 2);
        let learner = SoOga::new(dom.clone(), params.learner_horizon(), 50.0, 0.1).unwrap();
        let mut stack = Stack::build(&params, Box::new(learner), 3, false).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = Objective::random(2, 1.0, &mut rng);
        let mut oracle = StochasticOracle::new(OracleSpec::zeroth_order(f.value_bound(), 0.1, 2));
        for _ in 0..t {
            assert_eq!(stack.action(), stack.query());
            assert!(dom.contains(stack.action(), 1e-9).unwrap());
            let Stack::Zeroth(alg) = &mut stack else { panic!() };
            let o = oracle.stochastic_value(&f, alg.query()).unwrap();
            alg.respond(o).unwrap();
        }
        assert_eq!(oracle.queries(), t as u64);
    }
}
