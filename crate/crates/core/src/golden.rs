//! Reference problems used by the test suites and the example specs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::problem::{Label, LearnerConfig, LearnerKind, ProblemSpec, SigmaSpec};

fn labels(n: usize) -> Vec<Label> {
    (0..n).map(|i| Label(i.to_string())).collect()
}

fn zero_one(size: usize) -> Vec<Vec<f64>> {
    (0..size)
        .map(|w| (0..size).map(|z| if w == z { 0.0 } else { 1.0 }).collect())
        .collect()
}

fn learner(kind: LearnerKind) -> LearnerConfig {
    LearnerConfig {
        kind,
        beta: None,
        prior: None,
        noise: None,
    }
}

/// Binary uniform data, 0-1 loss, `n = 1`, and a learner that outputs its
/// single sample.
pub fn copy_channel() -> ProblemSpec {
    ProblemSpec {
        instances: labels(2),
        hypotheses: labels(2),
        p_z: vec![0.5, 0.5],
        loss: zero_one(2),
        sigma: SigmaSpec::Auto,
        learner: LearnerConfig {
            noise: Some(0.0),
            ..learner(LearnerKind::ErmNoisy)
        },
        n: 1,
    }
}

/// Binary uniform data, 0-1 loss, and a uniform learner that ignores it.
pub fn independent() -> ProblemSpec {
    ProblemSpec {
        learner: learner(LearnerKind::Independent),
        ..copy_channel()
    }
}

/// Like [`independent`] but with a constant loss, so `gen ≡ 0`.
pub fn independent_constant() -> ProblemSpec {
    ProblemSpec {
        loss: vec![vec![1.0, 1.0], vec![1.0, 1.0]],
        ..independent()
    }
}

/// `|𝒵| = |𝒲| = 2`, `n = 2`, Gibbs with `β = 1`, 0-1 loss, uniform data
/// and prior.
pub fn gibbs_golden() -> ProblemSpec {
    ProblemSpec {
        learner: LearnerConfig {
            beta: Some(1.0),
            ..learner(LearnerKind::Gibbs)
        },
        n: 2,
        ..copy_channel()
    }
}

/// `|𝒵| = 3`, `|𝒲| = 5`, loss `|w/4 − z/2|`, `P_Z = (0.2, 0.5, 0.3)`.
pub fn extended_gibbs(n: usize, beta: f64) -> ProblemSpec {
    ProblemSpec {
        instances: labels(3),
        hypotheses: labels(5),
        p_z: vec![0.2, 0.5, 0.3],
        loss: (0..5)
            .map(|w| (0..3).map(|z| (w as f64 / 4.0 - z as f64 / 2.0).abs()).collect())
            .collect(),
        sigma: SigmaSpec::Auto,
        learner: LearnerConfig {
            beta: Some(beta),
            ..learner(LearnerKind::Gibbs)
        },
        n,
    }
}

pub const EXTENDED_BETAS: [f64; 2] = [0.5, 2.0];
pub const EXTENDED_MAX_N: usize = 6;
pub const RANDOM_SEED: u64 = 20_240_601;
pub const RANDOM_COUNT: usize = 30;

/// Seeded random problems with `|𝒵|, |𝒲| ≤ 4` and `n ≤ 4`.
pub fn random_models(seed: u64, count: usize) -> Vec<ProblemSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| ProblemSpec::random(&mut rng, 4, 4, 4))
        .collect()
}

/// The whole golden suite, each entry named.
pub fn suite() -> Vec<(String, ProblemSpec)> {
    let mut out = vec![
        ("copy_channel".to_string(), copy_channel()),
        ("independent".to_string(), independent()),
        ("independent_constant".to_string(), independent_constant()),
        ("gibbs_golden".to_string(), gibbs_golden()),
    ];
    for beta in EXTENDED_BETAS {
        for n in 1..=EXTENDED_MAX_N {
            out.push((format!("extended_gibbs_beta{beta}_n{n}"), extended_gibbs(n, beta)));
        }
    }
    for (i, spec) in random_models(RANDOM_SEED, RANDOM_COUNT).into_iter().enumerate() {
        out.push((format!("random_{i:02}"), spec));
    }
    out
}
