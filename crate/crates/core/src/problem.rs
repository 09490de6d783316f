//! Synthetic learning problems and the randomized learners that turn them
//! into posterior kernels.

use rand::Rng;
use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::prob::{
    decode_tuple, Alphabet, FiniteDistribution, JointModel, PosteriorKernel, ProbError,
    DEFAULT_ATOM_BUDGET,
};
use crate::numeric::log_sum_exp;

/// Stand-in subgaussian parameter when an automatic σ would be zero.
pub const DEGENERATE_SIGMA: f64 = 1e-12;

/// Relative tolerance when grouping empirical risks into an argmin set.
const ERM_TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid field `{field}`: {message}")]
    Invalid { field: String, message: String },

    #[error(transparent)]
    Prob(#[from] ProbError),
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ProblemError {
    ProblemError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

/// User-supplied σ or the bounded-loss default.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaSpec {
    Auto,
    Value(f64),
}

impl Serialize for SigmaSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            SigmaSpec::Auto => s.serialize_str("auto"),
            SigmaSpec::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for SigmaSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(SigmaSpec::Value(v)),
            Raw::Text(t) if t == "auto" => Ok(SigmaSpec::Auto),
            Raw::Text(t) => Err(de::Error::custom(format!(
                "sigma must be \"auto\" or a number, got {t:?}"
            ))),
        }
    }
}

/// Resolved subgaussian parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResolvedSigma {
    pub value: f64,
    /// True when the loss is constant and σ was replaced by [`DEGENERATE_SIGMA`].
    pub degenerate: bool,
    pub automatic: bool,
}

/// Instance and hypothesis alphabets, loss table `ℓ(w, z)` and σ.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningProblem {
    instances: Alphabet,
    hypotheses: Alphabet,
    loss: Vec<f64>,
    sigma: SigmaSpec,
}

impl LearningProblem {
    /// `loss[w][z]`: one row per hypothesis, one column per instance.
    pub fn new(
        instances: Alphabet,
        hypotheses: Alphabet,
        loss: &[Vec<f64>],
        sigma: SigmaSpec,
    ) -> Result<Self, ProblemError> {
        if loss.len() != hypotheses.size() {
            return Err(invalid(
                "loss",
                format!(
                    "expected {} rows (one per hypothesis), found {}",
                    hypotheses.size(),
                    loss.len()
                ),
            ));
        }
        let mut flat = Vec::with_capacity(hypotheses.size() * instances.size());
        for (w, row) in loss.iter().enumerate() {
            if row.len() != instances.size() {
                return Err(invalid(
                    format!("loss[{w}]"),
                    format!(
                        "expected {} entries (one per instance), found {}",
                        instances.size(),
                        row.len()
                    ),
                ));
            }
            for (z, &v) in row.iter().enumerate() {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(invalid(
                        format!("loss[{w}][{z}]"),
                        format!("loss must be finite and nonnegative, got {v}"),
                    ));
                }
            }
            flat.extend_from_slice(row);
        }
        if let SigmaSpec::Value(s) = sigma {
            if !(s.is_finite() && s > 0.0) {
                return Err(invalid("sigma", format!("must be positive, got {s}")));
            }
        }
        Ok(Self {
            instances,
            hypotheses,
            loss: flat,
            sigma,
        })
    }

    pub fn instances(&self) -> &Alphabet {
        &self.instances
    }

    pub fn hypotheses(&self) -> &Alphabet {
        &self.hypotheses
    }

    pub fn sigma_spec(&self) -> SigmaSpec {
        self.sigma
    }

    pub fn loss(&self, w: usize, z: usize) -> f64 {
        self.loss[w * self.instances.size() + z]
    }

    pub fn loss_row(&self, w: usize) -> &[f64] {
        let k = self.instances.size();
        &self.loss[w * k..(w + 1) * k]
    }

    /// Same problem with `shift` added to every loss entry.
    pub fn shifted(&self, shift: f64) -> Self {
        Self {
            loss: self.loss.iter().map(|l| l + shift).collect(),
            ..self.clone()
        }
    }

    /// `Σ_k ℓ(w, z_k)`.
    pub fn dataset_loss(&self, w: usize, dataset: &[usize]) -> f64 {
        let row = self.loss_row(w);
        dataset.iter().map(|&z| row[z]).sum()
    }
}

/// σ for the problem: the user's value, otherwise the Hoeffding constant
/// `(max ℓ − min ℓ) / 2` of a bounded loss.
pub fn sigma_from_bounded_loss(problem: &LearningProblem) -> ResolvedSigma {
    match problem.sigma {
        SigmaSpec::Value(value) => ResolvedSigma {
            value,
            degenerate: false,
            automatic: false,
        },
        SigmaSpec::Auto => {
            let max = problem.loss.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = problem.loss.iter().copied().fold(f64::INFINITY, f64::min);
            let value = (max - min) / 2.0;
            if value > 0.0 {
                ResolvedSigma {
                    value,
                    degenerate: false,
                    automatic: true,
                }
            } else {
                ResolvedSigma {
                    value: DEGENERATE_SIGMA,
                    degenerate: true,
                    automatic: true,
                }
            }
        }
    }
}

/// A randomized learner `P_{W | Z^n}`.
#[derive(Debug, Clone, PartialEq)]
pub enum LearnerSpec {
    /// `P(w | z^n) ∝ prior(w) · exp(−β Σ_k ℓ(w, z_k))`.
    Gibbs { beta: f64, prior: FiniteDistribution },
    /// Uniform over the empirical-risk argmin set, mixed with the uniform
    /// distribution with weight `noise`.
    ErmNoisy { noise: f64 },
    /// Ignores the data.
    Independent { prior: FiniteDistribution },
}

impl LearnerSpec {
    pub fn validate(&self, problem: &LearningProblem) -> Result<(), ProblemError> {
        match self {
            LearnerSpec::Gibbs { beta, prior } => {
                if !(beta.is_finite() && *beta >= 0.0) {
                    return Err(invalid("learner.beta", format!("must be >= 0, got {beta}")));
                }
                check_prior(prior, problem)
            }
            LearnerSpec::ErmNoisy { noise } => {
                if !(0.0..=1.0).contains(noise) {
                    return Err(invalid("learner.noise", format!("must be in [0,1], got {noise}")));
                }
                Ok(())
            }
            LearnerSpec::Independent { prior } => check_prior(prior, problem),
        }
    }

    /// Writes `log P(w | dataset)` for every `w` into `out`.
    pub fn conditional_log_probs(
        &self,
        problem: &LearningProblem,
        dataset: &[usize],
        out: &mut [f64],
    ) {
        match self {
            LearnerSpec::Gibbs { beta, prior } => {
                if *beta == 0.0 {
                    out.copy_from_slice(prior.log_probs());
                    return;
                }
                for (w, slot) in out.iter_mut().enumerate() {
                    *slot = prior.log_prob(w) - beta * problem.dataset_loss(w, dataset);
                }
                let norm = log_sum_exp(out);
                for slot in out.iter_mut() {
                    *slot -= norm;
                }
            }
            LearnerSpec::ErmNoisy { noise } => {
                let width = out.len();
                for (w, slot) in out.iter_mut().enumerate() {
                    *slot = problem.dataset_loss(w, dataset);
                }
                let min = out.iter().copied().fold(f64::INFINITY, f64::min);
                let tol = ERM_TIE_TOL * min.abs().max(1.0);
                let argmin: Vec<bool> = out.iter().map(|&r| r <= min + tol).collect();
                let ties = argmin.iter().filter(|&&b| b).count() as f64;
                let floor = noise / width as f64;
                for (slot, &is_min) in out.iter_mut().zip(&argmin) {
                    let p = if is_min { (1.0 - noise) / ties + floor } else { floor };
                    *slot = if p > 0.0 { p.ln() } else { f64::NEG_INFINITY };
                }
            }
            LearnerSpec::Independent { prior } => out.copy_from_slice(prior.log_probs()),
        }
    }

    /// Enumerate the kernel over `𝒵^n`.
    pub fn kernel(
        &self,
        problem: &LearningProblem,
        n: usize,
        budget: usize,
    ) -> Result<PosteriorKernel, ProblemError> {
        self.validate(problem)?;
        let datasets = problem.instances().power(n, budget)?;
        let width = problem.hypotheses().size();
        let atoms = datasets.size() as u128 * width as u128;
        if atoms > budget as u128 {
            return Err(ProbError::EnumerationTooLarge { atoms, budget }.into());
        }
        let mut rows = vec![0.0; datasets.size() * width];
        let mut tuple = vec![0; n];
        let base = problem.instances().size();
        for (zn, row) in rows.chunks_mut(width).enumerate() {
            decode_tuple(zn, base, &mut tuple);
            self.conditional_log_probs(problem, &tuple, row);
        }
        Ok(PosteriorKernel::from_log_rows(
            datasets,
            problem.hypotheses().clone(),
            rows,
        )?)
    }
}

fn check_prior(prior: &FiniteDistribution, problem: &LearningProblem) -> Result<(), ProblemError> {
    if prior.len() != problem.hypotheses().size() {
        return Err(invalid(
            "learner.prior",
            format!(
                "expected {} weights (one per hypothesis), found {}",
                problem.hypotheses().size(),
                prior.len()
            ),
        ));
    }
    Ok(())
}

pub fn gibbs_kernel(
    problem: &LearningProblem,
    n: usize,
    beta: f64,
    prior: &FiniteDistribution,
) -> Result<PosteriorKernel, ProblemError> {
    LearnerSpec::Gibbs {
        beta,
        prior: prior.clone(),
    }
    .kernel(problem, n, DEFAULT_ATOM_BUDGET)
}

pub fn erm_noisy_kernel(
    problem: &LearningProblem,
    n: usize,
    noise: f64,
) -> Result<PosteriorKernel, ProblemError> {
    LearnerSpec::ErmNoisy { noise }.kernel(problem, n, DEFAULT_ATOM_BUDGET)
}

/// Every conditional equals `prior`.
pub fn independent_kernel(
    prior: &FiniteDistribution,
    n: usize,
    instance_alphabet: &Alphabet,
) -> Result<PosteriorKernel, ProblemError> {
    let datasets = instance_alphabet.power(n, DEFAULT_ATOM_BUDGET)?;
    let rows = prior.log_probs().repeat(datasets.size());
    Ok(PosteriorKernel::from_log_rows(
        datasets,
        prior.alphabet().clone(),
        rows,
    )?)
}

/// A label given as a JSON string or number.
#[derive(Debug, Clone, PartialEq)]
pub struct Label(pub String);

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Num(serde_json::Number),
        }
        Ok(match Raw::deserialize(d)? {
            Raw::Text(s) => Label(s),
            Raw::Num(n) => Label(n.to_string()),
        })
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    Gibbs,
    ErmNoisy,
    Independent,
}

/// `learner` object of the problem file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerConfig {
    pub kind: LearnerKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Weights over hypotheses; uniform when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<f64>,
}

/// Problem file document.
///
/// ```json
/// {"instances": ["0","1"], "hypotheses": ["0","1"], "p_z": [0.5, 0.5],
///  "loss": [[0,1],[1,0]], "sigma": "auto",
///  "learner": {"kind": "gibbs", "beta": 1.0}, "n": 2}
/// ```
///
/// `loss[w][z]` has one row per hypothesis. The Gibbs exponent is
/// `−β Σ_k ℓ(w, z_k)` (a raw sum over the dataset, not the average).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub instances: Vec<Label>,
    pub hypotheses: Vec<Label>,
    pub p_z: Vec<f64>,
    pub loss: Vec<Vec<f64>>,
    pub sigma: SigmaSpec,
    pub learner: LearnerConfig,
    pub n: usize,
}

/// A validated problem with its data distribution and learner, before the
/// joint is enumerated.
#[derive(Debug, Clone, PartialEq)]
pub struct Setup {
    pub problem: LearningProblem,
    pub p_z: FiniteDistribution,
    pub learner: LearnerSpec,
    pub n: usize,
    pub sigma: ResolvedSigma,
}

impl Setup {
    pub fn kernel(&self, budget: usize) -> Result<PosteriorKernel, ProblemError> {
        self.learner.kernel(&self.problem, self.n, budget)
    }

    pub fn build_model(&self) -> Result<JointModel, ProblemError> {
        self.build_model_with_budget(DEFAULT_ATOM_BUDGET)
    }

    pub fn build_model_with_budget(&self, budget: usize) -> Result<JointModel, ProblemError> {
        let kernel = self.kernel(budget)?;
        Ok(JointModel::build_with_budget(
            self.p_z.clone(),
            self.n,
            kernel,
            budget,
        )?)
    }

    pub fn with_n(&self, n: usize) -> Result<Self, ProblemError> {
        if n == 0 {
            return Err(invalid("n", "must be positive"));
        }
        Ok(Self { n, ..self.clone() })
    }

    /// Replace the Gibbs inverse temperature.
    pub fn with_beta(&self, beta: f64) -> Result<Self, ProblemError> {
        match &self.learner {
            LearnerSpec::Gibbs { prior, .. } => {
                let learner = LearnerSpec::Gibbs {
                    beta,
                    prior: prior.clone(),
                };
                learner.validate(&self.problem)?;
                Ok(Self {
                    learner,
                    ..self.clone()
                })
            }
            _ => Err(invalid("learner.beta", "beta applies only to the gibbs learner")),
        }
    }
}

impl ProblemSpec {
    pub fn from_json_str(text: &str) -> Result<Self, ProblemError> {
        serde_json::from_str(text).map_err(|e| ProblemError::Parse(e.to_string()))
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem spec serializes")
    }

    /// Validate and resolve into a [`Setup`]; `n_override` replaces `n`.
    pub fn setup(&self, n_override: Option<usize>) -> Result<Setup, ProblemError> {
        let instances = Alphabet::new(self.instances.iter().map(|l| l.0.clone()))
            .map_err(|e| invalid("instances", e.to_string()))?;
        let hypotheses = Alphabet::new(self.hypotheses.iter().map(|l| l.0.clone()))
            .map_err(|e| invalid("hypotheses", e.to_string()))?;
        let p_z = FiniteDistribution::from_weights_on(instances.clone(), &self.p_z)
            .map_err(|e| invalid("p_z", e.to_string()))?;
        let problem = LearningProblem::new(instances, hypotheses.clone(), &self.loss, self.sigma)?;
        let n = n_override.unwrap_or(self.n);
        if n == 0 {
            return Err(invalid("n", "must be positive"));
        }

        let prior = || -> Result<FiniteDistribution, ProblemError> {
            match &self.learner.prior {
                Some(weights) => FiniteDistribution::from_weights_on(hypotheses.clone(), weights)
                    .map_err(|e| invalid("learner.prior", e.to_string())),
                None => Ok(FiniteDistribution::uniform(hypotheses.clone())),
            }
        };
        let cfg = &self.learner;
        let learner = match cfg.kind {
            LearnerKind::Gibbs => {
                if cfg.noise.is_some() {
                    return Err(invalid("learner.noise", "not used by the gibbs learner"));
                }
                let beta = cfg
                    .beta
                    .ok_or_else(|| invalid("learner.beta", "required for the gibbs learner"))?;
                LearnerSpec::Gibbs {
                    beta,
                    prior: prior()?,
                }
            }
            LearnerKind::ErmNoisy => {
                if cfg.beta.is_some() || cfg.prior.is_some() {
                    return Err(invalid(
                        "learner",
                        "erm_noisy takes only `noise`",
                    ));
                }
                let noise = cfg
                    .noise
                    .ok_or_else(|| invalid("learner.noise", "required for the erm_noisy learner"))?;
                LearnerSpec::ErmNoisy { noise }
            }
            LearnerKind::Independent => {
                if cfg.beta.is_some() || cfg.noise.is_some() {
                    return Err(invalid("learner", "independent takes only `prior`"));
                }
                LearnerSpec::Independent { prior: prior()? }
            }
        };
        learner.validate(&problem)?;
        let sigma = sigma_from_bounded_loss(&problem);
        Ok(Setup {
            problem,
            p_z,
            learner,
            n,
            sigma,
        })
    }

    /// A random small problem: `2..=max_instances` instances,
    /// `2..=max_hypotheses` hypotheses, losses in `[0, 1]`, `1..=max_n`
    /// samples, and a Gibbs or noisy-ERM learner.
    pub fn random<R: Rng + ?Sized>(
        rng: &mut R,
        max_instances: usize,
        max_hypotheses: usize,
        max_n: usize,
    ) -> Self {
        let nz = rng.random_range(2..=max_instances.max(2));
        let nw = rng.random_range(2..=max_hypotheses.max(2));
        let n = rng.random_range(1..=max_n.max(1));
        let p_z = (0..nz).map(|_| rng.random_range(0.05..1.0)).collect();
        let loss = (0..nw)
            .map(|_| (0..nz).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        let learner = if rng.random_bool(0.75) {
            LearnerConfig {
                kind: LearnerKind::Gibbs,
                beta: Some(rng.random_range(0.0..4.0)),
                prior: Some((0..nw).map(|_| rng.random_range(0.1..1.0)).collect()),
                noise: None,
            }
        } else {
            LearnerConfig {
                kind: LearnerKind::ErmNoisy,
                beta: None,
                prior: None,
                noise: Some(rng.random_range(0.0..1.0)),
            }
        };
        Self {
            instances: (0..nz).map(|i| Label(format!("z{i}"))).collect(),
            hypotheses: (0..nw).map(|i| Label(format!("w{i}"))).collect(),
            p_z,
            loss,
            sigma: SigmaSpec::Auto,
            learner,
            n,
        }
    }
}
