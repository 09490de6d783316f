//! Closed-form generalization-error bounds.
//!
//! Every bound has the shape `ε = sqrt((2σ²/n) · A)` for a bound-specific
//! argument `A`. When `A` is negative, or a logarithm argument is not
//! positive, the result is infeasible (`ε = +∞`) rather than an error.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};
use serde_json::{json, Value};
use thiserror::Error;

use crate::measures::{
    self, binary_entropy, central_moment_root, divergence_moment_root,
    divergence_moment_root_infinity, information_profile, maximal_leakage, moment_root_infinity,
    InfoProfile, MeasureError,
};
use crate::numeric::CompensatedSum;
use crate::prob::{decode_tuple, FiniteDistribution, JointModel};
use crate::problem::LearningProblem;

/// Offset added to density atoms when optimizing γ.
pub const GAMMA_STEP: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundError {
    #[error("invalid delta {0}: must lie in (0, 1)")]
    InvalidDelta(f64),

    #[error("invalid sigma {0}: must be positive")]
    InvalidSigma(f64),

    #[error("invalid n: must be positive")]
    InvalidN,

    #[error("missing parameter `{param}` for bound {bound}")]
    MissingParameter { bound: BoundId, param: &'static str },

    #[error("invalid gamma {0}: must be finite")]
    InvalidGamma(f64),

    #[error("unknown bound id {0:?}")]
    UnknownBound(String),

    #[error(transparent)]
    Measure(#[from] MeasureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundId {
    Average,
    PacBayesData,
    PacBayesMoment,
    SingleDrawData,
    SingleDrawMoment,
    SingleDrawMInf,
    SingleDrawLeakage,
    StrongConverse,
    BaselineMi,
    BaselineAlpha,
    RederivedMoment,
    RederivedLeakage,
}

/// Which probability a bound controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundFamily {
    /// `|E_{P_{W,Z^n}}[gen]|`.
    Average,
    /// `P_{Z^n}[|E_{P_{W|Z^n}}[gen]| ≤ ε]`.
    PacBayes,
    /// `P_{W,Z^n}[|gen| ≤ ε]`.
    SingleDraw,
}

impl BoundId {
    pub const ALL: [BoundId; 12] = [
        BoundId::Average,
        BoundId::PacBayesData,
        BoundId::PacBayesMoment,
        BoundId::SingleDrawData,
        BoundId::SingleDrawMoment,
        BoundId::SingleDrawMInf,
        BoundId::SingleDrawLeakage,
        BoundId::StrongConverse,
        BoundId::BaselineMi,
        BoundId::BaselineAlpha,
        BoundId::RederivedMoment,
        BoundId::RederivedLeakage,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BoundId::Average => "average",
            BoundId::PacBayesData => "pac_bayes_data",
            BoundId::PacBayesMoment => "pac_bayes_moment",
            BoundId::SingleDrawData => "single_draw_data",
            BoundId::SingleDrawMoment => "single_draw_moment",
            BoundId::SingleDrawMInf => "single_draw_m_inf",
            BoundId::SingleDrawLeakage => "single_draw_leakage",
            BoundId::StrongConverse => "strong_converse",
            BoundId::BaselineMi => "baseline_mi",
            BoundId::BaselineAlpha => "baseline_alpha",
            BoundId::RederivedMoment => "rederived_moment",
            BoundId::RederivedLeakage => "rederived_leakage",
        }
    }

    pub fn family(self) -> BoundFamily {
        match self {
            BoundId::Average => BoundFamily::Average,
            BoundId::PacBayesData | BoundId::PacBayesMoment => BoundFamily::PacBayes,
            _ => BoundFamily::SingleDraw,
        }
    }

    /// True when ε varies with the dataset (or atom).
    pub fn is_data_dependent(self) -> bool {
        matches!(self, BoundId::PacBayesData | BoundId::SingleDrawData)
    }

    pub fn needs_delta(self) -> bool {
        self != BoundId::Average
    }

    pub fn needs_moment(self) -> bool {
        matches!(
            self,
            BoundId::PacBayesMoment | BoundId::SingleDrawMoment | BoundId::RederivedMoment
        )
    }
}

impl fmt::Display for BoundId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoundId {
    type Err = BoundError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BoundId::ALL
            .into_iter()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| BoundError::UnknownBound(s.to_string()))
    }
}

/// Moment order `m`, possibly the `m → ∞` limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MomentOrder {
    Finite(f64),
    Infinity,
}

impl FromStr for MomentOrder {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "inf" | "infinity" | "∞" => Ok(MomentOrder::Infinity),
            t => t
                .parse::<f64>()
                .map(|v| {
                    if v.is_infinite() && v > 0.0 {
                        MomentOrder::Infinity
                    } else {
                        MomentOrder::Finite(v)
                    }
                })
                .map_err(|_| format!("invalid moment order {t:?}")),
        }
    }
}

impl fmt::Display for MomentOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MomentOrder::Finite(m) => write!(f, "{m}"),
            MomentOrder::Infinity => f.write_str("inf"),
        }
    }
}

impl Serialize for MomentOrder {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            MomentOrder::Finite(m) => s.serialize_f64(*m),
            MomentOrder::Infinity => s.serialize_str("inf"),
        }
    }
}

/// Strong-converse threshold: fixed or chosen by [`optimize_strong_converse`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaChoice {
    Fixed(f64),
    Optimize,
}

impl FromStr for GammaChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "optimize" => Ok(GammaChoice::Optimize),
            t => t
                .parse::<f64>()
                .map(GammaChoice::Fixed)
                .map_err(|_| format!("invalid gamma {t:?}")),
        }
    }
}

impl Serialize for GammaChoice {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            GammaChoice::Fixed(g) => s.serialize_f64(*g),
            GammaChoice::Optimize => s.serialize_str("optimize"),
        }
    }
}

/// Bound parameters; which ones are required depends on the bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundParams {
    pub delta: Option<f64>,
    pub m: Option<MomentOrder>,
    pub alpha: Option<f64>,
    pub gamma: Option<GammaChoice>,
    pub sigma: f64,
    pub n: usize,
}

impl BoundParams {
    pub fn new(sigma: f64, n: usize) -> Self {
        Self {
            delta: None,
            m: None,
            alpha: None,
            gamma: None,
            sigma,
            n,
        }
    }

    pub fn delta(mut self, delta: f64) -> Self {
        self.delta = Some(delta);
        self
    }

    pub fn moment(mut self, m: MomentOrder) -> Self {
        self.m = Some(m);
        self
    }

    pub fn m(self, m: f64) -> Self {
        self.moment(MomentOrder::Finite(m))
    }

    pub fn alpha(mut self, alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self
    }

    pub fn gamma(mut self, gamma: GammaChoice) -> Self {
        self.gamma = Some(gamma);
        self
    }

    pub fn scale(&self) -> Result<Scale, BoundError> {
        Scale::new(self.sigma, self.n)
    }
}

/// A bound identifier with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundQuery {
    pub bound_id: BoundId,
    pub params: BoundParams,
}

impl BoundQuery {
    pub fn new(bound_id: BoundId, params: BoundParams) -> Self {
        Self { bound_id, params }
    }

    pub fn validate(&self) -> Result<(), BoundError> {
        let id = self.bound_id;
        let p = &self.params;
        p.scale()?;
        if id.needs_delta() {
            let d = p.delta.ok_or(BoundError::MissingParameter {
                bound: id,
                param: "delta",
            })?;
            check_delta(d)?;
        }
        if id.needs_moment() {
            match p.m.ok_or(BoundError::MissingParameter { bound: id, param: "m" })? {
                MomentOrder::Finite(m) if !(m.is_finite() && m > 0.0) => {
                    return Err(MeasureError::InvalidMomentOrder(m).into())
                }
                _ => {}
            }
        }
        if id == BoundId::BaselineAlpha {
            let a = p.alpha.ok_or(BoundError::MissingParameter {
                bound: id,
                param: "alpha",
            })?;
            if !(a > 1.0) {
                return Err(MeasureError::AlphaOutOfRange(a).into());
            }
        }
        if let Some(GammaChoice::Fixed(g)) = p.gamma {
            if !g.is_finite() {
                return Err(BoundError::InvalidGamma(g));
            }
        }
        Ok(())
    }
}

pub(crate) fn serialize_epsilon<S: Serializer>(eps: &f64, s: S) -> Result<S::Ok, S::Error> {
    if eps.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*eps)
    }
}

/// Outcome of evaluating one bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundResult {
    pub bound_id: BoundId,
    pub params: BoundParams,
    #[serde(serialize_with = "serialize_epsilon")]
    pub epsilon: f64,
    pub feasible: bool,
    pub detail: BTreeMap<String, Value>,
}

impl BoundResult {
    fn new(query: BoundQuery, epsilon: Option<f64>) -> Self {
        Self {
            bound_id: query.bound_id,
            params: query.params,
            epsilon: epsilon.unwrap_or(f64::INFINITY),
            feasible: epsilon.is_some(),
            detail: BTreeMap::new(),
        }
    }

    fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.detail.insert(key.to_string(), value.into());
        self
    }
}

/// The prefactor `2σ²/n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scale {
    factor: f64,
}

impl Scale {
    pub fn new(sigma: f64, n: usize) -> Result<Self, BoundError> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(BoundError::InvalidSigma(sigma));
        }
        if n == 0 {
            return Err(BoundError::InvalidN);
        }
        Ok(Self {
            factor: 2.0 * sigma * sigma / n as f64,
        })
    }

    pub fn factor(&self) -> f64 {
        self.factor
    }

    /// `sqrt(factor · arg)`, or `None` when `arg` is negative or undefined.
    pub fn root(&self, arg: f64) -> Option<f64> {
        if arg.is_finite() && arg >= 0.0 {
            Some((self.factor * arg).sqrt())
        } else {
            None
        }
    }
}

pub fn check_delta(delta: f64) -> Result<(), BoundError> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(BoundError::InvalidDelta(delta))
    }
}

/// `(δ/2)^{1/m}`, which is 1 in the m → ∞ limit.
fn half_delta_root(delta: f64, m: MomentOrder) -> f64 {
    match m {
        MomentOrder::Finite(m) => (delta / 2.0).powf(1.0 / m),
        MomentOrder::Infinity => 1.0,
    }
}

/// Square-root arguments of each bound as functions of the measures they
/// consume. Kept separate from model evaluation so that measures can be
/// injected directly.
pub mod formula {
    use super::*;

    pub fn average(mi: f64) -> f64 {
        mi
    }

    pub fn pac_bayes(divergence: f64, delta: f64) -> f64 {
        divergence + (1.0 / delta).ln()
    }

    pub fn pac_bayes_moment(div_moment_root: f64, delta: f64, m: MomentOrder) -> f64 {
        div_moment_root / half_delta_root(delta, m) + (2.0 / delta).ln()
    }

    pub fn single_draw_pointwise(density: f64, delta: f64) -> f64 {
        density + (1.0 / delta).ln()
    }

    pub fn single_draw_moment(mi: f64, moment_root: f64, delta: f64, m: MomentOrder) -> f64 {
        mi + moment_root / half_delta_root(delta, m) + (2.0 / delta).ln()
    }

    pub fn single_draw_m_inf(mi: f64, moment_inf: f64, delta: f64) -> f64 {
        mi + moment_inf + (2.0 / delta).ln()
    }

    pub fn single_draw_leakage(leakage: f64, delta: f64) -> f64 {
        leakage + 2.0 * (2.0 / delta).ln()
    }

    /// `None` when `δ − tail ≤ 0`.
    pub fn strong_converse(gamma: f64, tail: f64, delta: f64) -> Option<f64> {
        let slack = delta - tail;
        if slack > 0.0 {
            Some(gamma + (2.0 / slack).ln())
        } else {
            None
        }
    }

    pub fn baseline_mi(mi: f64, binary_entropy: f64, delta: f64) -> f64 {
        (mi + binary_entropy) / delta + std::f64::consts::LN_2
    }

    pub fn baseline_alpha(alpha_mi: f64, alpha: f64, delta: f64) -> f64 {
        alpha_mi + std::f64::consts::LN_2 + alpha / (alpha - 1.0) * (1.0 / delta).ln()
    }

    pub fn rederived_moment(mi: f64, moment_root: f64, delta: f64, m: MomentOrder) -> f64 {
        mi + moment_root / half_delta_root(delta, m) + (4.0 / delta).ln()
    }

    pub fn rederived_leakage(leakage: f64, delta: f64) -> f64 {
        leakage + (4.0 / delta).ln() + (2.0 / delta).ln()
    }
}

/// A model together with its information profile, shared by all bound
/// evaluations on that model.
#[derive(Debug, Clone)]
pub struct Analysis<'a> {
    model: &'a JointModel,
    profile: InfoProfile,
}

impl<'a> Analysis<'a> {
    pub fn new(model: &'a JointModel) -> Self {
        Self {
            model,
            profile: information_profile(model),
        }
    }

    pub fn model(&self) -> &'a JointModel {
        self.model
    }

    pub fn profile(&self) -> &InfoProfile {
        &self.profile
    }

    pub fn mutual_information(&self) -> f64 {
        measures::mutual_information(&self.profile)
    }

    fn moment_root(&self, m: MomentOrder) -> Result<f64, MeasureError> {
        match m {
            MomentOrder::Finite(m) => central_moment_root(&self.profile, m),
            MomentOrder::Infinity => Ok(moment_root_infinity(&self.profile)),
        }
    }

    fn divergence_moment(&self, m: MomentOrder) -> Result<f64, MeasureError> {
        match m {
            MomentOrder::Finite(m) => divergence_moment_root(self.model, m),
            MomentOrder::Infinity => Ok(divergence_moment_root_infinity(self.model)),
        }
    }
}

/// Per-atom generalization errors, laid out like the joint
/// (`zn * |W| + w`).
#[derive(Debug, Clone)]
pub struct GenTable {
    width: usize,
    population: Vec<f64>,
    values: Vec<f64>,
}

impl GenTable {
    pub fn new(problem: &LearningProblem, model: &JointModel) -> Self {
        let width = model.num_hypotheses();
        let nz = problem.instances().size();
        let n = model.n();
        let population = population_risks(problem, model.p_z());
        let mut values = Vec::with_capacity(model.num_atoms());
        let mut tuple = vec![0; n];
        for zn in 0..model.num_datasets() {
            decode_tuple(zn, nz, &mut tuple);
            for (w, pop) in population.iter().enumerate() {
                values.push(problem.dataset_loss(w, &tuple) / n as f64 - pop);
            }
        }
        Self {
            width,
            population,
            values,
        }
    }

    pub fn get(&self, w: usize, zn: usize) -> f64 {
        self.values[zn * self.width + w]
    }

    pub fn population_risk(&self, w: usize) -> f64 {
        self.population[w]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

fn population_risk(problem: &LearningProblem, p_z: &FiniteDistribution, w: usize) -> f64 {
    let mut acc = CompensatedSum::new();
    for z in p_z.support() {
        acc.add(p_z.prob(z) * problem.loss(w, z));
    }
    acc.value()
}

/// `E_{P_Z}[ℓ(w, Z)]` for every hypothesis.
pub fn population_risks(problem: &LearningProblem, p_z: &FiniteDistribution) -> Vec<f64> {
    (0..problem.hypotheses().size())
        .map(|w| population_risk(problem, p_z, w))
        .collect()
}

/// `gen(w, z^n) = (1/n) Σ_k ℓ(w, z_k) − E_{P_Z}[ℓ(w, Z)]`.
pub fn gen_error(problem: &LearningProblem, w: usize, zn: usize, model: &JointModel) -> f64 {
    let tuple = model.dataset(zn);
    problem.dataset_loss(w, &tuple) / model.n() as f64 - population_risk(problem, model.p_z(), w)
}

fn query(id: BoundId, params: BoundParams) -> Result<(BoundQuery, Scale), BoundError> {
    let q = BoundQuery::new(id, params);
    q.validate()?;
    Ok((q, params.scale()?))
}

pub fn avg_gen_bound(analysis: &Analysis, sigma: f64, n: usize) -> Result<BoundResult, BoundError> {
    let (q, scale) = query(BoundId::Average, BoundParams::new(sigma, n))?;
    let mi = analysis.mutual_information();
    Ok(BoundResult::new(q, scale.root(formula::average(mi))).with("mutual_information", mi))
}

/// Data-dependent PAC-Bayesian bound for one dataset.
pub fn pac_bayes_bound(
    analysis: &Analysis,
    zn: usize,
    delta: f64,
    sigma: f64,
    n: usize,
) -> Result<BoundResult, BoundError> {
    let (q, scale) = query(BoundId::PacBayesData, BoundParams::new(sigma, n).delta(delta))?;
    let d = measures::posterior_divergence(analysis.model, zn)?;
    Ok(BoundResult::new(q, scale.root(formula::pac_bayes(d, delta)))
        .with("dataset", zn)
        .with("divergence", d))
}

pub fn pac_bayes_moment_bound(
    analysis: &Analysis,
    delta: f64,
    m: MomentOrder,
    sigma: f64,
    n: usize,
) -> Result<BoundResult, BoundError> {
    let params = BoundParams::new(sigma, n).delta(delta).moment(m);
    let (q, scale) = query(BoundId::PacBayesMoment, params)?;
    let dm = analysis.divergence_moment(m)?;
    Ok(
        BoundResult::new(q, scale.root(formula::pac_bayes_moment(dm, delta, m)))
            .with("divergence_moment_root", dm),
    )
}

/// Data-dependent single-draw bound at a given information-density value.
pub fn single_draw_pointwise_bound(
    density: f64,
    delta: f64,
    sigma: f64,
    n: usize,
) -> Result<BoundResult, BoundError> {
    let (q, scale) = query(BoundId::SingleDrawData, BoundParams::new(sigma, n).delta(delta))?;
    Ok(
        BoundResult::new(q, scale.root(formula::single_draw_pointwise(density, delta)))
            .with("density", density),
    )
}

/// Moment bound; `m = ∞` gives [`single_draw_m_infinity_bound`]'s value.
pub fn single_draw_moment_bound(
    analysis: &Analysis,
    delta: f64,
    m: MomentOrder,
    sigma: f64,
    n: usize,
) -> Result<BoundResult, BoundError> {
    let params = BoundParams::new(sigma, n).delta(delta).moment(m);
    let (q, scale) = query(BoundId::SingleDrawMoment, params)?;
    let mi = analysis.mutual_information();
    let mm = analysis.moment_root(m)?;
    Ok(
        BoundResult::new(q, scale.root(formula::single_draw_moment(mi, mm, delta, m)))
            .with("mutual_information", mi)
            .with("moment_root", mm),
    )
}

pub fn single_draw_m_infinity_bound(
    analysis: &Analysis,
    delta: f64,
    sigma: f64,
    n: usize,
) -> Result<BoundResult, BoundError> {
    let (q, scale) = query(BoundId::SingleDrawMInf, BoundParams::new(sigma, n).delta(delta))?;
    let mi = analysis.mutual_information();
    let minf = moment_root_infinity(&analysis.profile);
    Ok(
        BoundResult::new(q, scale.root(formula::single_draw_m_inf(mi, minf, delta)))
            .with("mutual_information", mi)
            .with("moment_infinity", minf),
    )
}

pub fn single_draw_leakage_bound(
    analysis: &Analysis,
    delta: f64,
    sigma: f64,
    n: usize,
) -> Result<BoundResult, BoundError> {
    let (q, scale) = query(BoundId::SingleDrawLeakage, BoundParams::new(sigma, n).delta(delta))?;
    let leak = maximal_leakage(analysis.model);
    Ok(
        BoundResult::new(q, scale.root(formula::single_draw_leakage(leak, delta)))
            .with("maximal_leakage", leak),
    )
}

/// Tail-based bound at a fixed threshold γ, with the inclusive tail
/// `P[ı ≥ γ]`.
pub fn strong_converse_bound(
    analysis: &Analysis,
    delta: f64,
    gamma: f64,
    sigma: f64,
    n: usize,
) -> Result<BoundResult, BoundError> {
    let params = BoundParams::new(sigma, n)
        .delta(delta)
        .gamma(GammaChoice::Fixed(gamma));
    let (q, scale) = query(BoundId::StrongConverse, params)?;
    let tail = measures::info_tail(&analysis.profile, gamma);
    let eps = formula::strong_converse(gamma, tail, delta).and_then(|a| scale.root(a));
    Ok(BoundResult::new(q, eps)
        .with("gamma", gamma)
        .with("tail", tail))
}

/// Minimizes the tail-based bound over the candidate thresholds
/// `{v, v + η}` for each distinct density value `v`, plus `min v − η`.
/// Ties go to the smallest γ.
pub fn optimize_strong_converse(
    analysis: &Analysis,
    delta: f64,
    sigma: f64,
    n: usize,
) -> Result<BoundResult, BoundError> {
    let params = BoundParams::new(sigma, n)
        .delta(delta)
        .gamma(GammaChoice::Optimize);
    let (q, scale) = query(BoundId::StrongConverse, params)?;
    let values = analysis.profile.distinct_densities();
    let mut candidates = Vec::with_capacity(2 * values.len() + 1);
    if let Some(&min) = values.first() {
        candidates.push(min - GAMMA_STEP);
    }
    for &v in &values {
        candidates.push(v);
        candidates.push(v + GAMMA_STEP);
    }
    candidates.sort_by(f64::total_cmp);

    let mut best: Option<(f64, f64, f64)> = None;
    for &gamma in &candidates {
        let tail = analysis.profile.tail_inclusive(gamma);
        let Some(eps) = formula::strong_converse(gamma, tail, delta).and_then(|a| scale.root(a))
        else {
            continue;
        };
        if best.is_none_or(|(b, _, _)| eps < b) {
            best = Some((eps, gamma, tail));
        }
    }
    let mut result = BoundResult::new(q, best.map(|b| b.0))
        .with("gamma_policy", "density_atom_candidates")
        .with("candidates_examined", candidates.len());
    if let Some((_, gamma, tail)) = best {
        result = result.with("gamma", gamma).with("tail", tail);
    }
    Ok(result)
}

pub fn baseline_mi_bound(
    analysis: &Analysis,
    delta: f64,
    sigma: f64,
    n: usize,
) -> Result<BoundResult, BoundError> {
    let (q, scale) = query(BoundId::BaselineMi, BoundParams::new(sigma, n).delta(delta))?;
    let mi = analysis.mutual_information();
    let hb = binary_entropy(delta)?;
    Ok(
        BoundResult::new(q, scale.root(formula::baseline_mi(mi, hb, delta)))
            .with("mutual_information", mi)
            .with("binary_entropy", hb),
    )
}

pub fn baseline_alpha_bound(
    analysis: &Analysis,
    delta: f64,
    alpha: f64,
    sigma: f64,
    n: usize,
) -> Result<BoundResult, BoundError> {
    let params = BoundParams::new(sigma, n).delta(delta).alpha(alpha);
    let (q, scale) = query(BoundId::BaselineAlpha, params)?;
    let ia = measures::alpha_mutual_information(analysis.model, alpha)?;
    Ok(
        BoundResult::new(q, scale.root(formula::baseline_alpha(ia, alpha, delta)))
            .with("alpha_mutual_information", ia),
    )
}

pub fn rederived_moment_bound(
    analysis: &Analysis,
    delta: f64,
    m: MomentOrder,
    sigma: f64,
    n: usize,
) -> Result<BoundResult, BoundError> {
    let params = BoundParams::new(sigma, n).delta(delta).moment(m);
    let (q, scale) = query(BoundId::RederivedMoment, params)?;
    let mi = analysis.mutual_information();
    let mm = analysis.moment_root(m)?;
    let gamma = mi + mm / half_delta_root(delta, m);
    Ok(
        BoundResult::new(q, scale.root(formula::rederived_moment(mi, mm, delta, m)))
            .with("mutual_information", mi)
            .with("moment_root", mm)
            .with("gamma", gamma),
    )
}

pub fn rederived_leakage_bound(
    analysis: &Analysis,
    delta: f64,
    sigma: f64,
    n: usize,
) -> Result<BoundResult, BoundError> {
    let (q, scale) = query(BoundId::RederivedLeakage, BoundParams::new(sigma, n).delta(delta))?;
    let leak = maximal_leakage(analysis.model);
    Ok(
        BoundResult::new(q, scale.root(formula::rederived_leakage(leak, delta)))
            .with("maximal_leakage", leak)
            .with("gamma", leak + (2.0 / delta).ln()),
    )
}

/// Evaluate any bound from a query.
///
/// The two data-dependent bounds are summarized over their support: ε is
/// the largest feasible per-dataset (or per-atom) value, and the detail map
/// records the smallest value, the mean, and the infeasible mass.
pub fn evaluate(analysis: &Analysis, query: &BoundQuery) -> Result<BoundResult, BoundError> {
    query.validate()?;
    let p = query.params;
    let delta = p.delta.unwrap_or(f64::NAN);
    let m = p.m.unwrap_or(MomentOrder::Finite(1.0));
    let (sigma, n) = (p.sigma, p.n);
    match query.bound_id {
        BoundId::Average => avg_gen_bound(analysis, sigma, n),
        BoundId::PacBayesData => pac_bayes_envelope(analysis, delta, sigma, n),
        BoundId::PacBayesMoment => pac_bayes_moment_bound(analysis, delta, m, sigma, n),
        BoundId::SingleDrawData => single_draw_envelope(analysis, delta, sigma, n),
        BoundId::SingleDrawMoment => single_draw_moment_bound(analysis, delta, m, sigma, n),
        BoundId::SingleDrawMInf => single_draw_m_infinity_bound(analysis, delta, sigma, n),
        BoundId::SingleDrawLeakage => single_draw_leakage_bound(analysis, delta, sigma, n),
        BoundId::StrongConverse => match p.gamma.unwrap_or(GammaChoice::Optimize) {
            GammaChoice::Fixed(g) => strong_converse_bound(analysis, delta, g, sigma, n),
            GammaChoice::Optimize => optimize_strong_converse(analysis, delta, sigma, n),
        },
        BoundId::BaselineMi => baseline_mi_bound(analysis, delta, sigma, n),
        BoundId::BaselineAlpha => {
            baseline_alpha_bound(analysis, delta, p.alpha.unwrap_or(f64::NAN), sigma, n)
        }
        BoundId::RederivedMoment => rederived_moment_bound(analysis, delta, m, sigma, n),
        BoundId::RederivedLeakage => rederived_leakage_bound(analysis, delta, sigma, n),
    }
}

struct Envelope {
    max: f64,
    min: f64,
    mean: CompensatedSum,
    infeasible_mass: CompensatedSum,
}

impl Envelope {
    fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            min: f64::INFINITY,
            mean: CompensatedSum::new(),
            infeasible_mass: CompensatedSum::new(),
        }
    }

    fn add(&mut self, prob: f64, eps: Option<f64>) {
        match eps {
            Some(e) => {
                self.max = self.max.max(e);
                self.min = self.min.min(e);
                self.mean.add(prob * e);
            }
            None => self.infeasible_mass.add(prob),
        }
    }

    fn finish(self, q: BoundQuery) -> BoundResult {
        let feasible = self.max.is_finite();
        let mut r = BoundResult::new(q, feasible.then_some(self.max))
            .with("infeasible_mass", self.infeasible_mass.value())
            .with("summary", "max_over_support");
        if feasible {
            r = r
                .with("min_epsilon", self.min)
                .with("feasible_mean_epsilon", self.mean.value());
        }
        r
    }
}

fn pac_bayes_envelope(
    analysis: &Analysis,
    delta: f64,
    sigma: f64,
    n: usize,
) -> Result<BoundResult, BoundError> {
    let (q, scale) = query(BoundId::PacBayesData, BoundParams::new(sigma, n).delta(delta))?;
    let mut env = Envelope::new();
    for (_, p, d) in measures::posterior_divergences(analysis.model) {
        env.add(p, scale.root(formula::pac_bayes(d, delta)));
    }
    Ok(env.finish(q))
}

fn single_draw_envelope(
    analysis: &Analysis,
    delta: f64,
    sigma: f64,
    n: usize,
) -> Result<BoundResult, BoundError> {
    let (q, scale) = query(BoundId::SingleDrawData, BoundParams::new(sigma, n).delta(delta))?;
    let mut env = Envelope::new();
    for atom in analysis.profile.atoms() {
        env.add(
            atom.log_prob.exp(),
            scale.root(formula::single_draw_pointwise(atom.density, delta)),
        );
    }
    Ok(env.finish(q))
}

/// JSON form of a result, with `epsilon` as `"inf"` when infeasible.
pub fn result_json(result: &BoundResult) -> Value {
    serde_json::to_value(result).unwrap_or_else(|e| json!({ "error": e.to_string() }))
}
