//! Exact finite probability: alphabets, log-domain distributions, n-fold
//! products, posterior kernels and the joint model `P_{W,Z^n}`.
//!
//! Every probability is stored as a natural logarithm. Zero mass is `-inf`
//! and such atoms are excluded from all expectations.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::numeric::{compensated_sum, log_sum_exp, CompensatedSum, LogSumExpAcc};

/// Default cap on the number of enumerated atoms.
pub const DEFAULT_ATOM_BUDGET: usize = 10_000_000;

/// Tolerance for normalization and marginal consistency.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Separator used when rendering tuple labels of a power alphabet.
pub const TUPLE_SEPARATOR: char = ',';

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProbError {
    #[error("empty alphabet")]
    EmptyAlphabet,

    #[error("duplicate label {0:?} in alphabet")]
    DuplicateLabel(String),

    #[error("{labels} labels but {weights} weights")]
    LengthMismatch { labels: usize, weights: usize },

    #[error("invalid weight {value} at index {index}")]
    InvalidWeight { index: usize, value: f64 },

    #[error("degenerate distribution: every weight is zero")]
    Degenerate,

    #[error("distribution not normalized: log-sum-exp = {0:e}")]
    NotNormalized(f64),

    #[error("tuple length must be positive")]
    ZeroLength,

    #[error("enumeration too large: {atoms} atoms exceeds budget of {budget}")]
    EnumerationTooLarge { atoms: u128, budget: usize },

    #[error("kernel/dataset mismatch: {0}")]
    KernelMismatch(String),

    #[error("non-finite integrand {value} at atom (w={w}, zn={zn})")]
    NonFiniteIntegrand { w: usize, zn: usize, value: f64 },

    #[error("joint model invariant violated: {0}")]
    Invariant(String),
}

enum AlphabetRepr {
    Labels {
        symbols: Vec<String>,
        index: HashMap<String, usize>,
    },
    Power {
        base: Alphabet,
        n: usize,
        size: usize,
    },
}

/// Ordered set of distinct labels.
///
/// Power alphabets (`𝒵^n`) are kept implicit: labels are rendered on demand
/// and tuples decoded from the index, lexicographic with the first
/// coordinate most significant.
#[derive(Clone)]
pub struct Alphabet(Arc<AlphabetRepr>);

impl Alphabet {
    pub fn new<I, S>(labels: I) -> Result<Self, ProbError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let symbols: Vec<String> = labels.into_iter().map(Into::into).collect();
        if symbols.is_empty() {
            return Err(ProbError::EmptyAlphabet);
        }
        let mut index = HashMap::with_capacity(symbols.len());
        for (i, s) in symbols.iter().enumerate() {
            if index.insert(s.clone(), i).is_some() {
                return Err(ProbError::DuplicateLabel(s.clone()));
            }
        }
        Ok(Self(Arc::new(AlphabetRepr::Labels { symbols, index })))
    }

    /// Alphabet `{0, 1, ..., size-1}` with decimal labels.
    pub fn indexed(size: usize) -> Result<Self, ProbError> {
        Self::new((0..size).map(|i| i.to_string()))
    }

    /// The n-fold power alphabet, subject to `budget` symbols.
    pub fn power(&self, n: usize, budget: usize) -> Result<Self, ProbError> {
        if n == 0 {
            return Err(ProbError::ZeroLength);
        }
        let atoms = (self.size() as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
        if atoms > budget as u128 {
            return Err(ProbError::EnumerationTooLarge { atoms, budget });
        }
        Ok(Self(Arc::new(AlphabetRepr::Power {
            base: self.clone(),
            n,
            size: atoms as usize,
        })))
    }

    pub fn size(&self) -> usize {
        match &*self.0 {
            AlphabetRepr::Labels { symbols, .. } => symbols.len(),
            AlphabetRepr::Power { size, .. } => *size,
        }
    }

    /// `(base, n)` when this is a power alphabet.
    pub fn as_power(&self) -> Option<(&Alphabet, usize)> {
        match &*self.0 {
            AlphabetRepr::Power { base, n, .. } => Some((base, *n)),
            AlphabetRepr::Labels { .. } => None,
        }
    }

    pub fn label(&self, index: usize) -> String {
        match &*self.0 {
            AlphabetRepr::Labels { symbols, .. } => symbols[index].clone(),
            AlphabetRepr::Power { base, n, .. } => {
                let mut tuple = vec![0; *n];
                decode_tuple(index, base.size(), &mut tuple);
                let parts: Vec<String> = tuple.iter().map(|&z| base.label(z)).collect();
                parts.join(&TUPLE_SEPARATOR.to_string())
            }
        }
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        match &*self.0 {
            AlphabetRepr::Labels { index, .. } => index.get(label).copied(),
            AlphabetRepr::Power { base, n, .. } => {
                let parts: Vec<&str> = label.split(TUPLE_SEPARATOR).collect();
                if parts.len() != *n {
                    return None;
                }
                let mut tuple = Vec::with_capacity(*n);
                for p in parts {
                    tuple.push(base.index_of(p)?);
                }
                Some(encode_tuple(&tuple, base.size()))
            }
        }
    }

    /// Decode a power-alphabet index into base indices. Panics on a plain
    /// alphabet.
    pub fn tuple(&self, index: usize) -> Vec<usize> {
        let (base, n) = self.as_power().expect("tuple() on a non-power alphabet");
        let mut out = vec![0; n];
        decode_tuple(index, base.size(), &mut out);
        out
    }

    pub fn labels(&self) -> impl Iterator<Item = String> + '_ {
        (0..self.size()).map(move |i| self.label(i))
    }
}

impl PartialEq for Alphabet {
    fn eq(&self, other: &Self) -> bool {
        if Arc::ptr_eq(&self.0, &other.0) {
            return true;
        }
        match (&*self.0, &*other.0) {
            (AlphabetRepr::Labels { symbols: a, .. }, AlphabetRepr::Labels { symbols: b, .. }) => {
                a == b
            }
            (
                AlphabetRepr::Power { base: a, n: na, .. },
                AlphabetRepr::Power { base: b, n: nb, .. },
            ) => na == nb && a == b,
            _ => false,
        }
    }
}

impl fmt::Debug for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.0 {
            AlphabetRepr::Labels { symbols, .. } => f.debug_list().entries(symbols).finish(),
            AlphabetRepr::Power { base, n, .. } => write!(f, "{base:?}^{n}"),
        }
    }
}

/// Lexicographic decode, first coordinate most significant.
pub fn decode_tuple(mut index: usize, base: usize, out: &mut [usize]) {
    for slot in out.iter_mut().rev() {
        *slot = index % base;
        index /= base;
    }
}

pub fn encode_tuple(tuple: &[usize], base: usize) -> usize {
    tuple.iter().fold(0, |acc, &z| acc * base + z)
}

/// Probability vector over an [`Alphabet`], stored as natural logs.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDistribution {
    alphabet: Alphabet,
    log_probs: Vec<f64>,
}

impl FiniteDistribution {
    /// Normalize nonnegative weights over fresh labels.
    pub fn from_weights<S: Into<String>>(
        labels: impl IntoIterator<Item = S>,
        weights: &[f64],
    ) -> Result<Self, ProbError> {
        Self::from_weights_on(Alphabet::new(labels)?, weights)
    }

    pub fn from_weights_on(alphabet: Alphabet, weights: &[f64]) -> Result<Self, ProbError> {
        if weights.len() != alphabet.size() {
            return Err(ProbError::LengthMismatch {
                labels: alphabet.size(),
                weights: weights.len(),
            });
        }
        for (index, &value) in weights.iter().enumerate() {
            if !(value.is_finite() && value >= 0.0) {
                return Err(ProbError::InvalidWeight { index, value });
            }
        }
        let total = compensated_sum(weights.iter().copied());
        if total <= 0.0 {
            return Err(ProbError::Degenerate);
        }
        let log_total = total.ln();
        let log_probs = weights
            .iter()
            .map(|&w| if w > 0.0 { w.ln() - log_total } else { f64::NEG_INFINITY })
            .collect();
        Ok(Self { alphabet, log_probs })
    }

    /// Wrap log probabilities that are already normalized.
    pub fn from_log_probs(alphabet: Alphabet, log_probs: Vec<f64>) -> Result<Self, ProbError> {
        if log_probs.len() != alphabet.size() {
            return Err(ProbError::LengthMismatch {
                labels: alphabet.size(),
                weights: log_probs.len(),
            });
        }
        for (index, &value) in log_probs.iter().enumerate() {
            if value.is_nan() || value > NORMALIZATION_TOL {
                return Err(ProbError::InvalidWeight { index, value });
            }
        }
        let lse = log_sum_exp(&log_probs);
        if !(lse.abs() <= NORMALIZATION_TOL) {
            return Err(ProbError::NotNormalized(lse));
        }
        Ok(Self { alphabet, log_probs })
    }

    pub fn uniform(alphabet: Alphabet) -> Self {
        let lp = -(alphabet.size() as f64).ln();
        let log_probs = vec![lp; alphabet.size()];
        Self { alphabet, log_probs }
    }

    pub fn point_mass(alphabet: Alphabet, index: usize) -> Self {
        let mut log_probs = vec![f64::NEG_INFINITY; alphabet.size()];
        log_probs[index] = 0.0;
        Self { alphabet, log_probs }
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn len(&self) -> usize {
        self.log_probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_probs.is_empty()
    }

    pub fn log_probs(&self) -> &[f64] {
        &self.log_probs
    }

    pub fn log_prob(&self, index: usize) -> f64 {
        self.log_probs[index]
    }

    pub fn prob(&self, index: usize) -> f64 {
        self.log_probs[index].exp()
    }

    pub fn probs(&self) -> Vec<f64> {
        self.log_probs.iter().map(|lp| lp.exp()).collect()
    }

    /// Indices with nonzero mass.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.log_probs
            .iter()
            .enumerate()
            .filter(|(_, lp)| lp.is_finite())
            .map(|(i, _)| i)
    }

    /// `P^{⊗n}` over the lexicographic tuple alphabet.
    pub fn product_power(&self, n: usize) -> Result<Self, ProbError> {
        self.product_power_with_budget(n, DEFAULT_ATOM_BUDGET)
    }

    pub fn product_power_with_budget(&self, n: usize, budget: usize) -> Result<Self, ProbError> {
        let alphabet = self.alphabet.power(n, budget)?;
        let mut log_probs = Vec::with_capacity(alphabet.size());
        log_probs.push(0.0);
        for _ in 0..n {
            let mut next = Vec::with_capacity(log_probs.len() * self.len());
            for &prefix in &log_probs {
                for &lp in &self.log_probs {
                    next.push(prefix + lp);
                }
            }
            log_probs = next;
        }
        Ok(Self { alphabet, log_probs })
    }
}

/// `make_distribution`: normalized log-domain distribution from weights.
pub fn make_distribution<S: Into<String>>(
    labels: impl IntoIterator<Item = S>,
    weights: &[f64],
) -> Result<FiniteDistribution, ProbError> {
    FiniteDistribution::from_weights(labels, weights)
}

/// Conditional distribution of the hypothesis given each dataset.
///
/// Stored row-major: row `zn` holds `log P(w | z^n)` for every `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorKernel {
    dataset_alphabet: Alphabet,
    hypothesis_alphabet: Alphabet,
    log_probs: Vec<f64>,
}

impl PosteriorKernel {
    pub fn new(
        dataset_alphabet: Alphabet,
        conditionals: Vec<FiniteDistribution>,
    ) -> Result<Self, ProbError> {
        if conditionals.len() != dataset_alphabet.size() {
            return Err(ProbError::KernelMismatch(format!(
                "{} conditionals for {} datasets",
                conditionals.len(),
                dataset_alphabet.size()
            )));
        }
        let hypothesis_alphabet = conditionals[0].alphabet().clone();
        let mut log_probs = Vec::with_capacity(conditionals.len() * hypothesis_alphabet.size());
        for (zn, c) in conditionals.iter().enumerate() {
            if c.alphabet() != &hypothesis_alphabet {
                return Err(ProbError::KernelMismatch(format!(
                    "conditional {zn} is over a different hypothesis alphabet"
                )));
            }
            log_probs.extend_from_slice(c.log_probs());
        }
        Ok(Self {
            dataset_alphabet,
            hypothesis_alphabet,
            log_probs,
        })
    }

    /// Build from flattened rows, checking each row's normalization.
    pub fn from_log_rows(
        dataset_alphabet: Alphabet,
        hypothesis_alphabet: Alphabet,
        log_probs: Vec<f64>,
    ) -> Result<Self, ProbError> {
        let width = hypothesis_alphabet.size();
        if log_probs.len() != dataset_alphabet.size() * width {
            return Err(ProbError::KernelMismatch(format!(
                "{} entries for {} datasets x {} hypotheses",
                log_probs.len(),
                dataset_alphabet.size(),
                width
            )));
        }
        for row in log_probs.chunks(width) {
            if row.iter().any(|v| v.is_nan() || *v > NORMALIZATION_TOL) {
                return Err(ProbError::Invariant("kernel entry out of range".into()));
            }
            let lse = log_sum_exp(row);
            if !(lse.abs() <= NORMALIZATION_TOL) {
                return Err(ProbError::NotNormalized(lse));
            }
        }
        Ok(Self {
            dataset_alphabet,
            hypothesis_alphabet,
            log_probs,
        })
    }

    pub fn dataset_alphabet(&self) -> &Alphabet {
        &self.dataset_alphabet
    }

    pub fn hypothesis_alphabet(&self) -> &Alphabet {
        &self.hypothesis_alphabet
    }

    pub fn num_datasets(&self) -> usize {
        self.dataset_alphabet.size()
    }

    pub fn num_hypotheses(&self) -> usize {
        self.hypothesis_alphabet.size()
    }

    pub fn conditional_log_probs(&self, zn: usize) -> &[f64] {
        let w = self.num_hypotheses();
        &self.log_probs[zn * w..(zn + 1) * w]
    }

    pub fn conditional(&self, zn: usize) -> FiniteDistribution {
        FiniteDistribution {
            alphabet: self.hypothesis_alphabet.clone(),
            log_probs: self.conditional_log_probs(zn).to_vec(),
        }
    }

    pub(crate) fn raw(&self) -> &[f64] {
        &self.log_probs
    }
}

/// `P_Z`, `n`, the kernel, and the derived `P_{Z^n}`, `P_W`, `P_{W,Z^n}`.
#[derive(Debug, Clone)]
pub struct JointModel {
    p_z: FiniteDistribution,
    n: usize,
    kernel: PosteriorKernel,
    p_zn: FiniteDistribution,
    p_w: FiniteDistribution,
    joint_log_probs: Vec<f64>,
}

impl JointModel {
    pub fn build(
        p_z: FiniteDistribution,
        n: usize,
        kernel: PosteriorKernel,
    ) -> Result<Self, ProbError> {
        Self::build_with_budget(p_z, n, kernel, DEFAULT_ATOM_BUDGET)
    }

    pub fn build_with_budget(
        p_z: FiniteDistribution,
        n: usize,
        kernel: PosteriorKernel,
        budget: usize,
    ) -> Result<Self, ProbError> {
        let p_zn = p_z.product_power_with_budget(n, budget)?;
        if kernel.dataset_alphabet() != p_zn.alphabet() {
            return Err(ProbError::KernelMismatch(format!(
                "kernel datasets {:?} vs product alphabet {:?}",
                kernel.dataset_alphabet(),
                p_zn.alphabet()
            )));
        }
        let width = kernel.num_hypotheses();
        let atoms = (width as u128) * (p_zn.len() as u128);
        if atoms > budget as u128 {
            return Err(ProbError::EnumerationTooLarge { atoms, budget });
        }

        let joint_log_probs: Vec<f64> = kernel
            .raw()
            .chunks(width)
            .zip(p_zn.log_probs())
            .flat_map(|(row, &lz)| row.iter().map(move |&lk| lz + lk))
            .collect();

        let mut columns = vec![LogSumExpAcc::default(); width];
        for row in joint_log_probs.chunks(width) {
            for (acc, &v) in columns.iter_mut().zip(row) {
                acc.add(v);
            }
        }
        let p_w = FiniteDistribution {
            alphabet: kernel.hypothesis_alphabet().clone(),
            log_probs: columns.iter().map(LogSumExpAcc::value).collect(),
        };

        let model = Self {
            p_z,
            n,
            kernel,
            p_zn,
            p_w,
            joint_log_probs,
        };
        model.check_invariants()?;
        Ok(model)
    }

    /// Marginal consistency, normalization and absolute continuity.
    pub fn check_invariants(&self) -> Result<(), ProbError> {
        let width = self.num_hypotheses();
        let mut col_sums = vec![CompensatedSum::new(); width];
        let mut total = CompensatedSum::new();
        for (zn, row) in self.joint_log_probs.chunks(width).enumerate() {
            let mut row_sum = CompensatedSum::new();
            for (w, &lp) in row.iter().enumerate() {
                if lp.is_finite() {
                    if !(self.p_w.log_prob(w).is_finite() && self.p_zn.log_prob(zn).is_finite()) {
                        return Err(ProbError::Invariant(format!(
                            "atom (w={w}, zn={zn}) outside product support"
                        )));
                    }
                    let p = lp.exp();
                    row_sum.add(p);
                    col_sums[w].add(p);
                    total.add(p);
                }
            }
            let residual = (row_sum.value() - self.p_zn.prob(zn)).abs();
            if residual > NORMALIZATION_TOL {
                return Err(ProbError::Invariant(format!(
                    "sum over w of joint differs from P_Zn at zn={zn} by {residual:e}"
                )));
            }
        }
        for (w, s) in col_sums.iter().enumerate() {
            let residual = (s.value() - self.p_w.prob(w)).abs();
            if residual > NORMALIZATION_TOL {
                return Err(ProbError::Invariant(format!(
                    "sum over zn of joint differs from P_W at w={w} by {residual:e}"
                )));
            }
        }
        if (total.value() - 1.0).abs() > NORMALIZATION_TOL {
            return Err(ProbError::Invariant(format!(
                "joint mass {} is not 1",
                total.value()
            )));
        }
        Ok(())
    }

    pub fn p_z(&self) -> &FiniteDistribution {
        &self.p_z
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kernel(&self) -> &PosteriorKernel {
        &self.kernel
    }

    pub fn p_zn(&self) -> &FiniteDistribution {
        &self.p_zn
    }

    pub fn p_w(&self) -> &FiniteDistribution {
        &self.p_w
    }

    pub fn num_hypotheses(&self) -> usize {
        self.kernel.num_hypotheses()
    }

    pub fn num_datasets(&self) -> usize {
        self.p_zn.len()
    }

    pub fn num_atoms(&self) -> usize {
        self.joint_log_probs.len()
    }

    /// Flattened joint, index `zn * |W| + w`.
    pub fn joint_log_probs(&self) -> &[f64] {
        &self.joint_log_probs
    }

    pub fn log_joint(&self, w: usize, zn: usize) -> f64 {
        self.joint_log_probs[zn * self.num_hypotheses() + w]
    }

    /// Instance indices of dataset `zn`.
    pub fn dataset(&self, zn: usize) -> Vec<usize> {
        self.p_zn.alphabet().tuple(zn)
    }

    /// Support atoms `(w, zn, log P(w, z^n))` in storage order.
    pub fn support(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let width = self.num_hypotheses();
        self.joint_log_probs
            .iter()
            .enumerate()
            .filter(|(_, lp)| lp.is_finite())
            .map(move |(i, &lp)| (i % width, i / width, lp))
    }

    /// `E_{P_{W,Z^n}}[f(w, z^n)]` over the joint support.
    pub fn expect<F>(&self, mut f: F) -> Result<f64, ProbError>
    where
        F: FnMut(usize, usize) -> f64,
    {
        let mut acc = CompensatedSum::new();
        for (w, zn, lp) in self.support() {
            let value = f(w, zn);
            if !value.is_finite() {
                return Err(ProbError::NonFiniteIntegrand { w, zn, value });
            }
            acc.add(lp.exp() * value);
        }
        Ok(acc.value())
    }
}

/// `build_joint`: the joint model for `p_z`, `n` and `kernel`.
pub fn build_joint(
    p_z: FiniteDistribution,
    n: usize,
    kernel: PosteriorKernel,
) -> Result<JointModel, ProbError> {
    JointModel::build(p_z, n, kernel)
}
