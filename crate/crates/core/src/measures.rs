//! Information density and the dependence measures derived from it.
//!
//! All quantities are in nats. Essential suprema over finite spaces are
//! maxima over the joint support; atoms of zero joint mass never enter.

use serde::ser::{Serialize, SerializeMap, Serializer};
use thiserror::Error;

use crate::numeric::{compensated_sum, weighted_power_mean, CompensatedSum, LogSumExpAcc};
use crate::prob::JointModel;

/// Below this magnitude a computed mutual information is reported as zero.
pub const MI_CLAMP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeasureError {
    #[error("invalid moment order {0}: must be finite and positive")]
    InvalidMomentOrder(f64),

    #[error("alpha out of range: {0} (must be > 1)")]
    AlphaOutOfRange(f64),

    #[error("conditioning on null set: dataset {0} has zero probability")]
    NullDataset(usize),

    #[error("invalid probability {0}")]
    InvalidProbability(f64),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),
}

/// One support atom of `P_{W,Z^n}` with its information density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityAtom {
    pub w: usize,
    pub zn: usize,
    pub log_prob: f64,
    pub density: f64,
}

/// Atom-level distribution of `ı(W, Z^n)` under the joint.
#[derive(Debug, Clone)]
pub struct InfoProfile {
    atoms: Vec<DensityAtom>,
    mean: f64,
    // densities sorted descending, and cumulative mass of that prefix
    sorted_density: Vec<f64>,
    cumulative_mass: Vec<f64>,
}

impl InfoProfile {
    fn from_atoms_unchecked(atoms: Vec<DensityAtom>) -> Self {
        let mean = compensated_sum(atoms.iter().map(|a| a.log_prob.exp() * a.density));

        let mut order: Vec<usize> = (0..atoms.len()).collect();
        order.sort_by(|&a, &b| {
            atoms[b]
                .density
                .total_cmp(&atoms[a].density)
                .then(a.cmp(&b))
        });
        let sorted_density = order.iter().map(|&i| atoms[i].density).collect();
        let mut cumulative_mass = Vec::with_capacity(atoms.len() + 1);
        cumulative_mass.push(0.0);
        let mut acc = CompensatedSum::new();
        for &i in &order {
            acc.add(atoms[i].log_prob.exp());
            cumulative_mass.push(acc.value());
        }

        Self {
            atoms,
            mean,
            sorted_density,
            cumulative_mass,
        }
    }

    /// Profile from `(probability, density)` pairs, for formula-level tests
    /// and injected measures. Atom indices are the pair positions.
    pub fn from_weighted_densities(pairs: &[(f64, f64)]) -> Result<Self, MeasureError> {
        let mut atoms = Vec::with_capacity(pairs.len());
        for (i, &(p, d)) in pairs.iter().enumerate() {
            if !(p.is_finite() && p >= 0.0 && d.is_finite()) {
                return Err(MeasureError::InvalidProfile(format!(
                    "atom {i}: probability {p}, density {d}"
                )));
            }
            if p > 0.0 {
                atoms.push(DensityAtom {
                    w: i,
                    zn: i,
                    log_prob: p.ln(),
                    density: d,
                });
            }
        }
        let total = compensated_sum(atoms.iter().map(|a| a.log_prob.exp()));
        if (total - 1.0).abs() > 1e-12 {
            return Err(MeasureError::InvalidProfile(format!("total mass {total}")));
        }
        Ok(Self::from_atoms_unchecked(atoms))
    }

    pub fn atoms(&self) -> &[DensityAtom] {
        &self.atoms
    }

    /// Unclamped probability-weighted mean density.
    pub fn raw_mean(&self) -> f64 {
        self.mean
    }

    pub fn min_density(&self) -> f64 {
        self.sorted_density.last().copied().unwrap_or(0.0)
    }

    pub fn max_density(&self) -> f64 {
        self.sorted_density.first().copied().unwrap_or(0.0)
    }

    /// Distinct density values, ascending.
    pub fn distinct_densities(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.sorted_density.iter().rev().copied().collect();
        v.dedup();
        v
    }

    /// `P[ı ≥ γ]`, inclusive right tail.
    pub fn tail_inclusive(&self, gamma: f64) -> f64 {
        let k = self.sorted_density.partition_point(|&d| d >= gamma);
        self.cumulative_mass[k]
    }

    /// `P[ı > γ]`, strict right tail.
    pub fn tail_strict(&self, gamma: f64) -> f64 {
        let k = self.sorted_density.partition_point(|&d| d > gamma);
        self.cumulative_mass[k]
    }
}

/// Information density `log P(w,z^n) − log P(w) − log P(z^n)` on every
/// support atom.
pub fn information_profile(model: &JointModel) -> InfoProfile {
    let p_w = model.p_w().log_probs();
    let p_zn = model.p_zn().log_probs();
    let atoms = model
        .support()
        .map(|(w, zn, lp)| DensityAtom {
            w,
            zn,
            log_prob: lp,
            density: lp - p_w[w] - p_zn[zn],
        })
        .collect();
    InfoProfile::from_atoms_unchecked(atoms)
}

/// `I(W;Z^n)`, clamped to zero when within rounding of it.
pub fn mutual_information(profile: &InfoProfile) -> f64 {
    let m = profile.mean;
    if m.abs() <= MI_CLAMP_TOL {
        0.0
    } else {
        m
    }
}

fn check_order(m: f64) -> Result<(), MeasureError> {
    if m.is_finite() && m > 0.0 {
        Ok(())
    } else {
        Err(MeasureError::InvalidMomentOrder(m))
    }
}

fn density_is_constant(profile: &InfoProfile) -> bool {
    profile.max_density() == profile.min_density()
}

/// `M_m = E^{1/m}[|ı − I|^m]`.
pub fn central_moment_root(profile: &InfoProfile, m: f64) -> Result<f64, MeasureError> {
    check_order(m)?;
    if density_is_constant(profile) {
        return Ok(0.0);
    }
    let mean = profile.mean;
    let pairs = profile
        .atoms
        .iter()
        .map(move |a| (a.log_prob.exp(), a.density - mean));
    Ok(weighted_power_mean(pairs, m))
}

/// `M_∞ = max |ı − I|` over the support.
pub fn moment_root_infinity(profile: &InfoProfile) -> f64 {
    if density_is_constant(profile) {
        return 0.0;
    }
    let mean = profile.mean;
    (profile.max_density() - mean)
        .abs()
        .max((profile.min_density() - mean).abs())
}

/// Sibson α-mutual information from `Z^n` to `W`:
/// `α/(α−1) · log E_{P_W}[ E_{P_{Z^n}}^{1/α}[ r^α ] ]` with `r = e^ı`.
///
/// The inner expectation runs over datasets so that the α → ∞ limit is the
/// maximal leakage `L(Z^n → W)`.
pub fn alpha_mutual_information(model: &JointModel, alpha: f64) -> Result<f64, MeasureError> {
    if !(alpha > 1.0) || alpha.is_nan() {
        return Err(MeasureError::AlphaOutOfRange(alpha));
    }
    let width = model.num_hypotheses();
    let p_w = model.p_w().log_probs();
    let p_zn = model.p_zn().log_probs();
    let mut inner = vec![LogSumExpAcc::default(); width];
    for (w, zn, lp) in model.support() {
        let density = lp - p_w[w] - p_zn[zn];
        inner[w].add(p_zn[zn] + alpha * density);
    }
    let mut outer = LogSumExpAcc::default();
    for (w, acc) in inner.iter().enumerate() {
        if p_w[w].is_finite() {
            outer.add(p_w[w] + acc.value() / alpha);
        }
    }
    let value = alpha / (alpha - 1.0) * outer.value();
    Ok(if value.abs() <= MI_CLAMP_TOL { 0.0 } else { value })
}

/// `L(Z^n → W) = log Σ_w P(w) · max_{z^n} e^{ı(w,z^n)}`.
pub fn maximal_leakage(model: &JointModel) -> f64 {
    let width = model.num_hypotheses();
    let p_w = model.p_w().log_probs();
    let p_zn = model.p_zn().log_probs();
    let mut best = vec![f64::NEG_INFINITY; width];
    for (w, zn, lp) in model.support() {
        let density = lp - p_w[w] - p_zn[zn];
        if density > best[w] {
            best[w] = density;
        }
    }
    let mut acc = LogSumExpAcc::default();
    for w in 0..width {
        if p_w[w].is_finite() {
            acc.add(p_w[w] + best[w]);
        }
    }
    let value = acc.value();
    if value.abs() <= MI_CLAMP_TOL {
        0.0
    } else {
        value
    }
}

/// `I_max = max ı` over the support.
pub fn max_information(profile: &InfoProfile) -> f64 {
    let v = profile.max_density();
    if v.abs() <= MI_CLAMP_TOL {
        0.0
    } else {
        v
    }
}

/// `P_{W,Z^n}[ı ≥ γ]`.
pub fn info_tail(profile: &InfoProfile, gamma: f64) -> f64 {
    profile.tail_inclusive(gamma)
}

/// `D(P_{W|Z^n=z^n} ‖ P_W)`.
pub fn posterior_divergence(model: &JointModel, zn: usize) -> Result<f64, MeasureError> {
    if !model.p_zn().log_prob(zn).is_finite() {
        return Err(MeasureError::NullDataset(zn));
    }
    let p_w = model.p_w().log_probs();
    let row = model.kernel().conditional_log_probs(zn);
    let d = compensated_sum(
        row.iter()
            .zip(p_w)
            .filter(|(lk, _)| lk.is_finite())
            .map(|(&lk, &lw)| lk.exp() * (lk - lw)),
    );
    Ok(d.max(0.0))
}

/// Divergence for every dataset in `supp(P_{Z^n})`, as `(zn, P(z^n), D)`.
pub fn posterior_divergences(model: &JointModel) -> Vec<(usize, f64, f64)> {
    model
        .p_zn()
        .support()
        .map(|zn| {
            let d = posterior_divergence(model, zn).expect("support dataset");
            (zn, model.p_zn().prob(zn), d)
        })
        .collect()
}

/// `E^{1/m}_{P_{Z^n}}[D(P_{W|Z^n} ‖ P_W)^m]`.
pub fn divergence_moment_root(model: &JointModel, m: f64) -> Result<f64, MeasureError> {
    check_order(m)?;
    let divs = posterior_divergences(model);
    if m == 1.0 {
        return Ok(compensated_sum(divs.iter().map(|&(_, p, d)| p * d)));
    }
    Ok(weighted_power_mean(divs.iter().map(|&(_, p, d)| (p, d)), m))
}

/// `max D(P_{W|Z^n=z^n} ‖ P_W)` over `supp(P_{Z^n})`, the m → ∞ limit.
pub fn divergence_moment_root_infinity(model: &JointModel) -> f64 {
    posterior_divergences(model)
        .iter()
        .map(|&(_, _, d)| d)
        .fold(0.0, f64::max)
}

/// Binary entropy in nats, `0 · log 0 = 0`.
pub fn binary_entropy(delta: f64) -> Result<f64, MeasureError> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(MeasureError::InvalidProbability(delta));
    }
    let term = |p: f64| if p > 0.0 { -p * p.ln() } else { 0.0 };
    Ok(term(delta) + term(1.0 - delta))
}

/// Every measure the bounds consume, for one model.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureReport {
    pub mutual_information: f64,
    pub moment_roots: Vec<(f64, f64)>,
    pub moment_infinity: f64,
    pub maximal_leakage: f64,
    pub max_information: f64,
    pub alpha_mi: Vec<(f64, f64)>,
}

pub const DEFAULT_REPORT_ORDERS: [f64; 6] = [1.0, 2.0, 3.0, 4.0, 8.0, 16.0];
pub const DEFAULT_REPORT_ALPHAS: [f64; 7] = [1.1, 1.5, 2.0, 4.0, 10.0, 100.0, 1e4];

impl MeasureReport {
    pub fn compute(
        model: &JointModel,
        profile: &InfoProfile,
        orders: &[f64],
        alphas: &[f64],
    ) -> Result<Self, MeasureError> {
        let moment_roots = orders
            .iter()
            .map(|&m| Ok((m, central_moment_root(profile, m)?)))
            .collect::<Result<_, MeasureError>>()?;
        let alpha_mi = alphas
            .iter()
            .map(|&a| Ok((a, alpha_mutual_information(model, a)?)))
            .collect::<Result<_, MeasureError>>()?;
        Ok(Self {
            mutual_information: mutual_information(profile),
            moment_roots,
            moment_infinity: moment_root_infinity(profile),
            maximal_leakage: maximal_leakage(model),
            max_information: max_information(profile),
            alpha_mi,
        })
    }

    /// Flat `(key, value)` pairs in output order.
    pub fn entries(&self) -> Vec<(String, f64)> {
        let mut out = vec![("mutual_information".to_string(), self.mutual_information)];
        for &(m, v) in &self.moment_roots {
            out.push((format!("moment_root_{m}"), v));
        }
        out.push(("moment_infinity".into(), self.moment_infinity));
        out.push(("maximal_leakage".into(), self.maximal_leakage));
        out.push(("max_information".into(), self.max_information));
        for &(a, v) in &self.alpha_mi {
            out.push((format!("alpha_mi_{a}"), v));
        }
        out
    }
}

impl Serialize for MeasureReport {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let entries = self.entries();
        let mut map = serializer.serialize_map(Some(entries.len()))?;
        for (k, v) in &entries {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}
