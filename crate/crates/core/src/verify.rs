//! Exact and sampled checks of the inequalities behind each bound.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::bounds::{
    self, evaluate, population_risks, serialize_epsilon, Analysis, BoundError, BoundFamily,
    BoundId, BoundParams, BoundQuery, GammaChoice, GenTable, MomentOrder,
};
use crate::measures::{self, max_information, maximal_leakage, moment_root_infinity};
use crate::numeric::{log_sum_exp, CompensatedSum};
use crate::prob::{JointModel, ProbError};
use crate::problem::{LearningProblem, ProblemError, Setup};

/// Slack allowed when comparing a probability against δ.
pub const COVERAGE_TOL: f64 = 1e-12;
pub const THEOREM1_TOL: f64 = 1e-9;
pub const ORDERING_TOL: f64 = 1e-9;
pub const MIN_MC_SAMPLES: u64 = 1_000;
pub const MC_BLOCK: u64 = 4_096;
pub const DEFAULT_DELTAS: [f64; 4] = [0.5, 0.25, 0.1, 0.05];
pub const DEFAULT_ORDERS: [f64; 3] = [1.0, 2.0, 4.0];
pub const DEFAULT_HOEFFDING_EPSILONS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error("bound {bound} is not in the {expected} family")]
    WrongFamily { bound: BoundId, expected: &'static str },

    #[error("bound not MC-estimable: {0} needs per-atom information density")]
    NotEstimable(BoundId),

    #[error("too few samples: {0} (need at least {MIN_MC_SAMPLES})")]
    TooFewSamples(u64),

    #[error("model has n = {model} but setup has n = {setup}")]
    SizeMismatch { model: usize, setup: usize },

    #[error(transparent)]
    Bound(#[from] BoundError),

    #[error(transparent)]
    Problem(#[from] ProblemError),

    #[error(transparent)]
    Prob(#[from] ProbError),
}

fn serialize_opt_epsilon<S: Serializer>(eps: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match eps {
        Some(e) => serialize_epsilon(e, s),
        None => s.serialize_none(),
    }
}

/// The 81-point grid on `[−50, 50]` plus `±1000`.
pub fn default_lambda_grid() -> Vec<f64> {
    let mut grid: Vec<f64> = (0..81).map(|k| -50.0 + 1.25 * k as f64).collect();
    grid.push(-1000.0);
    grid.push(1000.0);
    grid
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theorem1Report {
    pub max_expectation: f64,
    pub argmax_lambda: f64,
    pub grid_size: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtomDetail {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w: Option<usize>,
    pub zn: usize,
    pub gen: f64,
    #[serde(serialize_with = "serialize_epsilon")]
    pub epsilon: f64,
    pub violated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub bound_id: BoundId,
    pub delta: f64,
    pub params: BoundParams,
    /// ε for data-independent bounds, after scaling.
    #[serde(serialize_with = "serialize_opt_epsilon")]
    pub epsilon: Option<f64>,
    pub violation_mass: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_atom_detail: Option<Vec<AtomDetail>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AverageReport {
    pub expected_gen: f64,
    pub epsilon: f64,
    pub slack: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaPoint {
    pub epsilon: f64,
    pub gamma: f64,
    pub event_mass: f64,
    pub tail_strict: f64,
    pub product_mass: f64,
    pub rhs: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaReport {
    pub points: Vec<LemmaPoint>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HoeffdingPoint {
    pub w: usize,
    pub epsilon: f64,
    pub tail: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HoeffdingReport {
    pub points: Vec<HoeffdingPoint>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderingReport {
    pub maximal_leakage: f64,
    pub max_information: f64,
    pub mi_plus_moment_infinity: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    pub bound_id: BoundId,
    #[serde(serialize_with = "serialize_epsilon")]
    pub epsilon: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub violations: u64,
    pub samples: u64,
    pub seed: u64,
}

impl McEstimate {
    /// True when `value` lies within `k` standard errors of the estimate.
    pub fn agrees_with(&self, value: f64, k: f64) -> bool {
        (self.estimate - value).abs() <= k * self.std_error + COVERAGE_TOL
    }
}

/// Controls shared by the coverage checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageOptions {
    /// Multiplies every ε before comparison. Values below one corrupt the
    /// bound on purpose.
    pub epsilon_scale: f64,
    pub detail: bool,
}

impl Default for CoverageOptions {
    fn default() -> Self {
        Self {
            epsilon_scale: 1.0,
            detail: false,
        }
    }
}

/// Exact checks on one enumerated model.
pub struct Verifier<'a> {
    setup: &'a Setup,
    analysis: Analysis<'a>,
    gen: GenTable,
}

impl<'a> Verifier<'a> {
    pub fn new(setup: &'a Setup, model: &'a JointModel) -> Result<Self, VerifyError> {
        if model.n() != setup.n {
            return Err(VerifyError::SizeMismatch {
                model: model.n(),
                setup: setup.n,
            });
        }
        Ok(Self {
            setup,
            analysis: Analysis::new(model),
            gen: GenTable::new(&setup.problem, model),
        })
    }

    pub fn analysis(&self) -> &Analysis<'a> {
        &self.analysis
    }

    pub fn gen_table(&self) -> &GenTable {
        &self.gen
    }

    pub fn sigma(&self) -> f64 {
        self.setup.sigma.value
    }

    pub fn n(&self) -> usize {
        self.setup.n
    }

    fn model(&self) -> &'a JointModel {
        self.analysis.model()
    }

    pub fn params(&self) -> BoundParams {
        BoundParams::new(self.sigma(), self.n())
    }

    /// `max_λ E[exp(λ·gen − λ²σ²/(2n) − ı)]` over the grid.
    pub fn theorem1_check(&self, lambda_grid: &[f64]) -> Theorem1Report {
        let model = self.model();
        let (sigma, n) = (self.sigma(), self.n() as f64);
        let atoms = self.analysis.profile().atoms();
        let mut terms = vec![0.0; atoms.len()];
        let mut best = (f64::NEG_INFINITY, f64::NAN);
        for &lambda in lambda_grid {
            let penalty = lambda * lambda * sigma * sigma / (2.0 * n);
            for (t, a) in terms.iter_mut().zip(atoms) {
                // log p − ı = log p_w + log p_zn
                let base = model.p_w().log_prob(a.w) + model.p_zn().log_prob(a.zn);
                *t = base + lambda * self.gen.get(a.w, a.zn) - penalty;
            }
            let value = log_sum_exp(&terms).exp();
            if value > best.0 {
                best = (value, lambda);
            }
        }
        Theorem1Report {
            max_expectation: best.0,
            argmax_lambda: best.1,
            grid_size: lambda_grid.len(),
            pass: best.0 <= 1.0 + THEOREM1_TOL,
        }
    }

    /// Exact `P_{W Z^n}[|gen| > ε]`; infeasible ε counts as a violation.
    pub fn coverage_single_draw(
        &self,
        query: &BoundQuery,
        options: CoverageOptions,
    ) -> Result<CoverageReport, VerifyError> {
        if query.bound_id.family() != BoundFamily::SingleDraw {
            return Err(VerifyError::WrongFamily {
                bound: query.bound_id,
                expected: "single-draw",
            });
        }
        query.validate()?;
        let delta = query.params.delta.unwrap_or(f64::NAN);
        let scale = query.params.scale()?;
        let fixed = if query.bound_id.is_data_dependent() {
            None
        } else {
            Some(scaled(evaluate(&self.analysis, query)?.epsilon, options))
        };

        let mut mass = CompensatedSum::new();
        let mut detail = options.detail.then(Vec::new);
        for a in self.analysis.profile().atoms() {
            let eps = fixed.unwrap_or_else(|| {
                let e = scale
                    .root(bounds::formula::single_draw_pointwise(a.density, delta))
                    .unwrap_or(f64::INFINITY);
                scaled(e, options)
            });
            let gen = self.gen.get(a.w, a.zn);
            let violated = violates(gen, eps);
            if violated {
                mass.add(a.log_prob.exp());
            }
            if let Some(d) = detail.as_mut() {
                d.push(AtomDetail {
                    w: Some(a.w),
                    zn: a.zn,
                    gen,
                    epsilon: eps,
                    violated,
                });
            }
        }
        Ok(coverage_report(query, delta, fixed, mass.value(), detail))
    }

    /// Exact `P_{Z^n}[|E_{P_{W|Z^n}}[gen]| > ε]`.
    pub fn coverage_pac_bayes(
        &self,
        query: &BoundQuery,
        options: CoverageOptions,
    ) -> Result<CoverageReport, VerifyError> {
        if query.bound_id.family() != BoundFamily::PacBayes {
            return Err(VerifyError::WrongFamily {
                bound: query.bound_id,
                expected: "PAC-Bayes",
            });
        }
        query.validate()?;
        let delta = query.params.delta.unwrap_or(f64::NAN);
        let scale = query.params.scale()?;
        let model = self.model();
        let fixed = if query.bound_id.is_data_dependent() {
            None
        } else {
            Some(scaled(evaluate(&self.analysis, query)?.epsilon, options))
        };

        let mut mass = CompensatedSum::new();
        let mut detail = options.detail.then(Vec::new);
        for (zn, p, div) in measures::posterior_divergences(model) {
            let eps = fixed.unwrap_or_else(|| {
                let e = scale
                    .root(bounds::formula::pac_bayes(div, delta))
                    .unwrap_or(f64::INFINITY);
                scaled(e, options)
            });
            let mut mean = CompensatedSum::new();
            for (w, &lp) in model.kernel().conditional_log_probs(zn).iter().enumerate() {
                if lp > f64::NEG_INFINITY {
                    mean.add(lp.exp() * self.gen.get(w, zn));
                }
            }
            let gen = mean.value();
            let violated = violates(gen, eps);
            if violated {
                mass.add(p);
            }
            if let Some(d) = detail.as_mut() {
                d.push(AtomDetail {
                    w: None,
                    zn,
                    gen,
                    epsilon: eps,
                    violated,
                });
            }
        }
        Ok(coverage_report(query, delta, fixed, mass.value(), detail))
    }

    /// Dispatches on the bound's family. The average bound is rejected.
    pub fn coverage(
        &self,
        query: &BoundQuery,
        options: CoverageOptions,
    ) -> Result<CoverageReport, VerifyError> {
        match query.bound_id.family() {
            BoundFamily::PacBayes => self.coverage_pac_bayes(query, options),
            BoundFamily::SingleDraw => self.coverage_single_draw(query, options),
            BoundFamily::Average => Err(VerifyError::WrongFamily {
                bound: query.bound_id,
                expected: "tail-bound",
            }),
        }
    }

    /// `|E[gen]| ≤ sqrt((2σ²/n) I)`.
    pub fn coverage_average(&self, options: CoverageOptions) -> Result<AverageReport, VerifyError> {
        let expected_gen = self
            .model()
            .expect(|w, zn| self.gen.get(w, zn))?;
        let eps = scaled(
            bounds::avg_gen_bound(&self.analysis, self.sigma(), self.n())?.epsilon,
            options,
        );
        Ok(AverageReport {
            expected_gen,
            epsilon: eps,
            slack: eps - expected_gen.abs(),
            pass: expected_gen.abs() <= eps + COVERAGE_TOL,
        })
    }

    /// `P[E] ≤ P[ı > γ] + e^γ Q[E]` with `E = {|gen| > ε}`, `P` the joint
    /// and `Q = P_W × P_{Z^n}`.
    pub fn lemma_split_check(&self, epsilon: f64, gamma: f64) -> LemmaPoint {
        let model = self.model();
        let mut event = CompensatedSum::new();
        for a in self.analysis.profile().atoms() {
            if self.gen.get(a.w, a.zn).abs() > epsilon {
                event.add(a.log_prob.exp());
            }
        }
        let mut product = CompensatedSum::new();
        for zn in model.p_zn().support() {
            let pz = model.p_zn().prob(zn);
            for w in model.p_w().support() {
                if self.gen.get(w, zn).abs() > epsilon {
                    product.add(model.p_w().prob(w) * pz);
                }
            }
        }
        let event_mass = event.value();
        let product_mass = product.value();
        let tail_strict = self.analysis.profile().tail_strict(gamma);
        let change = if product_mass > 0.0 {
            gamma.exp() * product_mass
        } else {
            0.0
        };
        let rhs = tail_strict + change;
        LemmaPoint {
            epsilon,
            gamma,
            event_mass,
            tail_strict,
            product_mass,
            rhs,
            pass: event_mass <= rhs + COVERAGE_TOL,
        }
    }

    /// Five ε values from 0 up to `0.8·max|gen|` crossed with five γ values
    /// spanning the density range widened by one on each side.
    pub fn default_lemma_grid(&self) -> Vec<(f64, f64)> {
        let max_gen = self
            .analysis
            .profile()
            .atoms()
            .iter()
            .map(|a| self.gen.get(a.w, a.zn).abs())
            .fold(0.0_f64, f64::max);
        let lo = self.analysis.profile().min_density() - 1.0;
        let hi = self.analysis.profile().max_density() + 1.0;
        let mut grid = Vec::with_capacity(25);
        for i in 0..5 {
            let eps = max_gen * i as f64 / 5.0;
            for j in 0..5 {
                grid.push((eps, lo + (hi - lo) * j as f64 / 4.0));
            }
        }
        grid
    }

    pub fn lemma_grid_check(&self, grid: &[(f64, f64)]) -> LemmaReport {
        let points: Vec<LemmaPoint> = grid
            .iter()
            .map(|&(e, g)| self.lemma_split_check(e, g))
            .collect();
        LemmaReport {
            pass: points.iter().all(|p| p.pass),
            points,
        }
    }

    /// `L ≤ I_max ≤ I + M_∞`.
    pub fn ordering_check(&self) -> OrderingReport {
        ordering_check(&self.analysis)
    }

    pub fn hoeffding_tail_check(&self, epsilons: &[f64]) -> HoeffdingReport {
        hoeffding_tail_check(
            &self.setup.problem,
            self.model().p_z(),
            self.n(),
            self.sigma(),
            epsilons,
        )
    }
}

fn scaled(eps: f64, options: CoverageOptions) -> f64 {
    eps * options.epsilon_scale
}

fn violates(gen: f64, eps: f64) -> bool {
    eps.is_infinite() || gen.abs() > eps
}

fn coverage_report(
    query: &BoundQuery,
    delta: f64,
    epsilon: Option<f64>,
    violation_mass: f64,
    detail: Option<Vec<AtomDetail>>,
) -> CoverageReport {
    let violation_mass = violation_mass.clamp(0.0, 1.0);
    CoverageReport {
        bound_id: query.bound_id,
        delta,
        params: query.params,
        epsilon,
        violation_mass,
        pass: violation_mass <= delta + COVERAGE_TOL,
        per_atom_detail: detail,
    }
}

pub fn ordering_check(analysis: &Analysis) -> OrderingReport {
    let leak = maximal_leakage(analysis.model());
    let imax = max_information(analysis.profile());
    let upper = analysis.mutual_information() + moment_root_infinity(analysis.profile());
    OrderingReport {
        maximal_leakage: leak,
        max_information: imax,
        mi_plus_moment_infinity: upper,
        pass: leak <= imax + ORDERING_TOL && imax <= upper + ORDERING_TOL,
    }
}

/// Exact `P_{Z^n}[|gen(w, Z^n)| > ε] ≤ 2 exp(−nε²/(2σ²))` for every `w`.
///
/// The left side is computed over type classes (count vectors), so the cost
/// grows polynomially in `n` rather than exponentially.
pub fn hoeffding_tail_check(
    problem: &LearningProblem,
    p_z: &crate::prob::FiniteDistribution,
    n: usize,
    sigma: f64,
    epsilons: &[f64],
) -> HoeffdingReport {
    let support: Vec<usize> = p_z.support().collect();
    let log_fact: Vec<f64> = std::iter::once(0.0)
        .chain((1..=n).scan(0.0, |acc, k| {
            *acc += (k as f64).ln();
            Some(*acc)
        }))
        .collect();
    // (log probability, count vector over the support) for each type class.
    let mut classes = Vec::new();
    let mut counts = vec![0usize; support.len()];
    enumerate_types(n, 0, &mut counts, &mut |c| {
        let mut lp = log_fact[n];
        for (k, &z) in support.iter().enumerate() {
            lp += c[k] as f64 * p_z.log_prob(z) - log_fact[c[k]];
        }
        classes.push((lp, c.to_vec()));
    });
    let risks = population_risks(problem, p_z);

    let mut points = Vec::new();
    for (w, risk) in risks.iter().enumerate() {
        let gens: Vec<(f64, f64)> = classes
            .iter()
            .map(|(lp, c)| {
                let total: f64 = support
                    .iter()
                    .zip(c)
                    .map(|(&z, &k)| k as f64 * problem.loss(w, z))
                    .sum();
                (lp.exp(), total / n as f64 - risk)
            })
            .collect();
        for &eps in epsilons {
            let mut tail = CompensatedSum::new();
            for &(p, g) in &gens {
                if g.abs() > eps {
                    tail.add(p);
                }
            }
            let tail = tail.value();
            let bound = 2.0 * (-(n as f64) * eps * eps / (2.0 * sigma * sigma)).exp();
            points.push(HoeffdingPoint {
                w,
                epsilon: eps,
                tail,
                bound,
                pass: tail <= bound + COVERAGE_TOL,
            });
        }
    }
    HoeffdingReport {
        pass: points.iter().all(|p| p.pass),
        points,
    }
}

fn enumerate_types(remaining: usize, k: usize, counts: &mut [usize], f: &mut impl FnMut(&[usize])) {
    if k + 1 == counts.len() {
        counts[k] = remaining;
        f(counts);
        return;
    }
    for c in 0..=remaining {
        counts[k] = c;
        enumerate_types(remaining - c, k + 1, counts, f);
    }
}

/// Samples `(z^n, w)` from `P_Z^n × P_{W|Z^n}` without building the joint and
/// counts how often the bound fails.
///
/// `epsilon` is the (already scaled) data-independent ε; pass `+∞` for an
/// infeasible bound. Blocks of [`MC_BLOCK`] samples each draw from their own
/// ChaCha8 stream keyed by `(seed, block)`, so the result does not depend on
/// the number of worker threads.
pub fn coverage_monte_carlo(
    setup: &Setup,
    bound_id: BoundId,
    epsilon: f64,
    samples: u64,
    seed: u64,
) -> Result<McEstimate, VerifyError> {
    if bound_id.is_data_dependent() || bound_id.family() == BoundFamily::Average {
        return Err(VerifyError::NotEstimable(bound_id));
    }
    if samples < MIN_MC_SAMPLES {
        return Err(VerifyError::TooFewSamples(samples));
    }
    setup.learner.validate(&setup.problem)?;
    let pac_bayes = bound_id.family() == BoundFamily::PacBayes;
    let problem = &setup.problem;
    let n = setup.n;
    let width = problem.hypotheses().size();
    let risks = population_risks(problem, &setup.p_z);
    let z_cdf = cumulative(&setup.p_z.probs());
    let blocks = samples.div_ceil(MC_BLOCK);

    let violations: u64 = (0..blocks)
        .into_par_iter()
        .map(|block| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(block);
            let count = MC_BLOCK.min(samples - block * MC_BLOCK);
            let mut dataset = vec![0usize; n];
            let mut row = vec![0.0; width];
            let mut hits = 0u64;
            for _ in 0..count {
                for z in dataset.iter_mut() {
                    *z = draw(&z_cdf, rng.random::<f64>());
                }
                setup.learner.conditional_log_probs(problem, &dataset, &mut row);
                let gen = if pac_bayes {
                    let mut mean = CompensatedSum::new();
                    for (w, &lp) in row.iter().enumerate() {
                        if lp > f64::NEG_INFINITY {
                            mean.add(lp.exp() * sample_gen(problem, &dataset, w, &risks));
                        }
                    }
                    mean.value()
                } else {
                    let probs: Vec<f64> = row.iter().map(|lp| lp.exp()).collect();
                    let w = draw(&cumulative(&probs), rng.random::<f64>());
                    sample_gen(problem, &dataset, w, &risks)
                };
                if violates(gen, epsilon) {
                    hits += 1;
                }
            }
            hits
        })
        .sum();

    let estimate = violations as f64 / samples as f64;
    Ok(McEstimate {
        bound_id,
        epsilon,
        estimate,
        std_error: (estimate * (1.0 - estimate) / samples as f64).sqrt(),
        violations,
        samples,
        seed,
    })
}

fn sample_gen(problem: &LearningProblem, dataset: &[usize], w: usize, risks: &[f64]) -> f64 {
    problem.dataset_loss(w, dataset) / dataset.len() as f64 - risks[w]
}

fn cumulative(probs: &[f64]) -> Vec<f64> {
    let mut acc = CompensatedSum::new();
    probs
        .iter()
        .map(|&p| {
            acc.add(p);
            acc.value()
        })
        .collect()
}

/// Inverse-CDF draw; skips zero-probability outcomes.
fn draw(cdf: &[f64], u: f64) -> usize {
    let total = *cdf.last().expect("non-empty distribution");
    let target = u * total;
    let idx = cdf.partition_point(|&c| c <= target);
    idx.min(cdf.len() - 1)
}

/// Which checks a suite run performs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Theorem1,
    Coverage,
    Lemma,
    Hoeffding,
    Ordering,
    Average,
}

impl CheckKind {
    pub const ALL: [CheckKind; 6] = [
        CheckKind::Theorem1,
        CheckKind::Coverage,
        CheckKind::Lemma,
        CheckKind::Hoeffding,
        CheckKind::Ordering,
        CheckKind::Average,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CheckKind::Theorem1 => "theorem1",
            CheckKind::Coverage => "coverage",
            CheckKind::Lemma => "lemma",
            CheckKind::Hoeffding => "hoeffding",
            CheckKind::Ordering => "ordering",
            CheckKind::Average => "average",
        }
    }
}

impl std::str::FromStr for CheckKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CheckKind::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown check {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub checks: Vec<CheckKind>,
    pub deltas: Vec<f64>,
    pub orders: Vec<f64>,
    pub alphas: Vec<f64>,
    pub bounds: Vec<BoundId>,
    pub coverage: CoverageOptions,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            checks: CheckKind::ALL.to_vec(),
            deltas: DEFAULT_DELTAS.to_vec(),
            orders: DEFAULT_ORDERS.to_vec(),
            alphas: vec![2.0],
            bounds: BoundId::ALL
                .into_iter()
                .filter(|b| *b != BoundId::Average)
                .collect(),
            coverage: CoverageOptions::default(),
        }
    }
}

impl SuiteConfig {
    /// Every tail-bound query the coverage check runs.
    pub fn coverage_queries(&self, base: BoundParams) -> Vec<BoundQuery> {
        let mut out = Vec::new();
        for &delta in &self.deltas {
            for &id in &self.bounds {
                let p = base.delta(delta);
                if id.needs_moment() {
                    for &m in &self.orders {
                        out.push(BoundQuery::new(id, p.moment(MomentOrder::Finite(m))));
                    }
                } else if id == BoundId::BaselineAlpha {
                    for &a in &self.alphas {
                        out.push(BoundQuery::new(id, p.alpha(a)));
                    }
                } else if id == BoundId::StrongConverse {
                    out.push(BoundQuery::new(id, p.gamma(GammaChoice::Optimize)));
                } else if id != BoundId::Average {
                    out.push(BoundQuery::new(id, p));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theorem1: Option<Theorem1Report>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub average: Option<AverageReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub coverage: Vec<CoverageReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lemma: Option<LemmaReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hoeffding: Option<HoeffdingReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ordering: Option<OrderingReport>,
}

impl SuiteReport {
    /// Names of the checks that failed.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.theorem1.as_ref().is_some_and(|r| !r.pass) {
            out.push("theorem1".to_string());
        }
        if self.average.as_ref().is_some_and(|r| !r.pass) {
            out.push("average".to_string());
        }
        for c in self.coverage.iter().filter(|c| !c.pass) {
            out.push(format!("coverage:{}{}@delta={}", c.bound_id, param_tag(&c.params), c.delta));
        }
        if self.lemma.as_ref().is_some_and(|r| !r.pass) {
            out.push("lemma".to_string());
        }
        if self.hoeffding.as_ref().is_some_and(|r| !r.pass) {
            out.push("hoeffding".to_string());
        }
        if self.ordering.as_ref().is_some_and(|r| !r.pass) {
            out.push("ordering".to_string());
        }
        out
    }
}

fn param_tag(p: &BoundParams) -> String {
    match (p.m, p.alpha) {
        (Some(m), _) => format!("[m={m}]"),
        (None, Some(a)) => format!("[alpha={a}]"),
        _ => String::new(),
    }
}

pub fn run_suite(verifier: &Verifier, config: &SuiteConfig) -> Result<SuiteReport, VerifyError> {
    let wants = |k| config.checks.contains(&k);
    let theorem1 = wants(CheckKind::Theorem1).then(|| verifier.theorem1_check(&default_lambda_grid()));
    let average = if wants(CheckKind::Average) {
        Some(verifier.coverage_average(config.coverage)?)
    } else {
        None
    };
    let coverage = if wants(CheckKind::Coverage) {
        config
            .coverage_queries(verifier.params())
            .iter()
            .map(|q| verifier.coverage(q, config.coverage))
            .collect::<Result<Vec<_>, _>>()?
    } else {
        Vec::new()
    };
    let lemma = wants(CheckKind::Lemma).then(|| verifier.lemma_grid_check(&verifier.default_lemma_grid()));
    let hoeffding =
        wants(CheckKind::Hoeffding).then(|| verifier.hoeffding_tail_check(&DEFAULT_HOEFFDING_EPSILONS));
    let ordering = wants(CheckKind::Ordering).then(|| verifier.ordering_check());

    let mut report = SuiteReport {
        pass: true,
        theorem1,
        average,
        coverage,
        lemma,
        hoeffding,
        ordering,
    };
    report.pass = report.failures().is_empty();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::golden;

    fn verifier_for(setup: &Setup) -> (JointModel, &Setup) {
        (setup.build_model().unwrap(), setup)
    }

    #[test]
    fn lambda_grid_shape() {
        let g = default_lambda_grid();
        assert_eq!(g.len(), 83);
        assert_eq!(g[0], -50.0);
        assert_eq!(g[80], 50.0);
        assert!(g.contains(&0.0));
    }

    #[test]
    fn theorem1_copy_channel_at_zero() {
        let setup = golden::copy_channel().setup(None).unwrap();
        let (model, setup) = verifier_for(&setup);
        let v = Verifier::new(setup, &model).unwrap();
        let r = v.theorem1_check(&[0.0]);
        assert!((r.max_expectation - 0.5).abs() < 1e-15);
        assert!(v.theorem1_check(&default_lambda_grid()).pass);
    }

    #[test]
    fn theorem1_independent_constant_is_one() {
        let setup = golden::independent_constant().setup(None).unwrap();
        let (model, setup) = verifier_for(&setup);
        let v = Verifier::new(setup, &model).unwrap();
        for lambda in [-1000.0, -3.0, 0.0, 7.5, 1000.0] {
            let r = v.theorem1_check(&[lambda]);
            assert!((r.max_expectation - 1.0).abs() < 1e-12, "{lambda}: {r:?}");
        }
    }

    #[test]
    fn copy_channel_coverage_and_average() {
        let setup = golden::copy_channel().setup(None).unwrap();
        let (model, setup) = verifier_for(&setup);
        let v = Verifier::new(setup, &model).unwrap();
        let q = BoundQuery::new(BoundId::SingleDrawData, v.params().delta(0.1));
        let r = v
            .coverage_single_draw(&q, CoverageOptions { epsilon_scale: 1.0, detail: true })
            .unwrap();
        assert_eq!(r.violation_mass, 0.0);
        let detail = r.per_atom_detail.unwrap();
        assert_eq!(detail.len(), 2);
        assert!(detail.iter().all(|d| (d.gen + 0.5).abs() < 1e-15));

        let q = BoundQuery::new(BoundId::PacBayesData, v.params().delta(0.1));
        assert_eq!(v.coverage_pac_bayes(&q, CoverageOptions::default()).unwrap().violation_mass, 0.0);

        let avg = v.coverage_average(CoverageOptions::default()).unwrap();
        assert!((avg.expected_gen + 0.5).abs() < 1e-15);
        assert!(avg.pass);
        assert!((avg.slack - (0.5887050112577373 - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn wrong_family_is_rejected() {
        let setup = golden::copy_channel().setup(None).unwrap();
        let (model, setup) = verifier_for(&setup);
        let v = Verifier::new(setup, &model).unwrap();
        let q = BoundQuery::new(BoundId::PacBayesData, v.params().delta(0.1));
        assert!(v.coverage_single_draw(&q, CoverageOptions::default()).is_err());
        let q = BoundQuery::new(BoundId::Average, v.params());
        assert!(v.coverage(&q, CoverageOptions::default()).is_err());
    }

    #[test]
    fn lemma_limits() {
        let setup = golden::gibbs_golden().setup(None).unwrap();
        let (model, setup) = verifier_for(&setup);
        let v = Verifier::new(setup, &model).unwrap();
        let low = v.analysis().profile().min_density() - 1.0;
        let p = v.lemma_split_check(0.1, low);
        assert!((p.tail_strict - 1.0).abs() < 1e-12 && p.pass);
        let high = v.analysis().profile().max_density() + 1.0;
        let p = v.lemma_split_check(0.1, high);
        assert_eq!(p.tail_strict, 0.0);
        assert!(p.pass);
        assert!(v.lemma_grid_check(&v.default_lemma_grid()).pass);
    }

    #[test]
    fn hoeffding_copy_setup_n4() {
        let setup = golden::copy_channel().setup(Some(4)).unwrap();
        let r = hoeffding_tail_check(&setup.problem, &setup.p_z, 4, setup.sigma.value, &DEFAULT_HOEFFDING_EPSILONS);
        assert_eq!(r.points.len(), 18);
        assert!(r.pass);
        // P[|k/4 − 1/2| > 0.1] = 1 − P[k = 2] = 1 − 6/16
        assert!((r.points[0].tail - 10.0 / 16.0).abs() < 1e-15);
        let zero = hoeffding_tail_check(&setup.problem, &setup.p_z, 4, setup.sigma.value, &[0.0]);
        assert!(zero.points.iter().all(|p| p.bound == 2.0));
    }

    #[test]
    fn ordering_simple_models() {
        for spec in [golden::copy_channel(), golden::independent()] {
            let setup = spec.setup(None).unwrap();
            let model = setup.build_model().unwrap();
            let r = ordering_check(&Analysis::new(&model));
            assert!(r.pass, "{r:?}");
        }
    }

    #[test]
    fn monte_carlo_is_deterministic() {
        let setup = golden::gibbs_golden().setup(None).unwrap();
        let a = coverage_monte_carlo(&setup, BoundId::SingleDrawLeakage, 0.2, 10_000, 7).unwrap();
        let b = coverage_monte_carlo(&setup, BoundId::SingleDrawLeakage, 0.2, 10_000, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.estimate > 0.0 && a.estimate < 1.0);
        let c = coverage_monte_carlo(&setup, BoundId::SingleDrawLeakage, 0.2, 10_000, 8).unwrap();
        assert_ne!(a.violations, c.violations);
    }

    #[test]
    fn monte_carlo_errors() {
        let setup = golden::gibbs_golden().setup(None).unwrap();
        let e = coverage_monte_carlo(&setup, BoundId::SingleDrawData, 1.0, 10_000, 1).unwrap_err();
        assert!(e.to_string().contains("bound not MC-estimable"));
        assert!(matches!(
            coverage_monte_carlo(&setup, BoundId::SingleDrawLeakage, 1.0, 10, 1),
            Err(VerifyError::TooFewSamples(10))
        ));
    }

    #[test]
    fn monte_carlo_independent_constant_is_zero() {
        let setup = golden::independent_constant().setup(None).unwrap();
        let r = coverage_monte_carlo(&setup, BoundId::SingleDrawMInf, 0.0, 2_000, 3).unwrap();
        assert_eq!(r.estimate, 0.0);
        assert_eq!(r.std_error, 0.0);
    }

    #[test]
    fn suite_passes_on_gibbs_golden() {
        let setup = golden::gibbs_golden().setup(None).unwrap();
        let model = setup.build_model().unwrap();
        let v = Verifier::new(&setup, &model).unwrap();
        let r = run_suite(&v, &SuiteConfig::default()).unwrap();
        assert!(r.pass, "{:?}", r.failures());
    }
}
