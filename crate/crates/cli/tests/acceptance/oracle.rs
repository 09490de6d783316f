//! Brute-force reference: linear-domain probabilities and plain double loops
//! over `(w, z^n)`, sharing nothing with the library beyond the problem
//! definition.

use infogen::problem::{LearnerSpec, Setup};

pub struct Oracle {
    pub n: usize,
    pub sigma: f64,
    pub datasets: Vec<Vec<usize>>,
    pub p_zn: Vec<f64>,
    /// `cond[zn][w] = P(w | z^n)`.
    pub cond: Vec<Vec<f64>>,
    pub joint: Vec<Vec<f64>>,
    pub p_w: Vec<f64>,
    /// `gen[zn][w]`.
    pub gen: Vec<Vec<f64>>,
}

fn all_tuples(base: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        let mut next = Vec::new();
        for t in &out {
            for z in 0..base {
                let mut u = t.clone();
                u.push(z);
                next.push(u);
            }
        }
        out = next;
    }
    out
}

impl Oracle {
    pub fn new(setup: &Setup) -> Self {
        let problem = &setup.problem;
        let nz = problem.instances().size();
        let nw = problem.hypotheses().size();
        let n = setup.n;
        let pz: Vec<f64> = (0..nz).map(|z| setup.p_z.prob(z)).collect();
        let datasets = all_tuples(nz, n);
        let p_zn: Vec<f64> = datasets
            .iter()
            .map(|t| t.iter().map(|&z| pz[z]).product())
            .collect();
        let risk = |w: usize, t: &[usize]| -> f64 { t.iter().map(|&z| problem.loss(w, z)).sum() };

        let cond: Vec<Vec<f64>> = datasets
            .iter()
            .map(|t| match &setup.learner {
                LearnerSpec::Gibbs { beta, prior } => {
                    let raw: Vec<f64> = (0..nw)
                        .map(|w| prior.prob(w) * (-beta * risk(w, t)).exp())
                        .collect();
                    let s: f64 = raw.iter().sum();
                    raw.iter().map(|r| r / s).collect()
                }
                LearnerSpec::ErmNoisy { noise } => {
                    let r: Vec<f64> = (0..nw).map(|w| risk(w, t)).collect();
                    let min = r.iter().cloned().fold(f64::INFINITY, f64::min);
                    let tol = 1e-12 * min.abs().max(1.0);
                    let ties = r.iter().filter(|&&x| x <= min + tol).count() as f64;
                    r.iter()
                        .map(|&x| {
                            let hit = if x <= min + tol { (1.0 - noise) / ties } else { 0.0 };
                            hit + noise / nw as f64
                        })
                        .collect()
                }
                LearnerSpec::Independent { prior } => (0..nw).map(|w| prior.prob(w)).collect(),
            })
            .collect();

        let joint: Vec<Vec<f64>> = cond
            .iter()
            .zip(&p_zn)
            .map(|(row, &p)| row.iter().map(|&c| c * p).collect())
            .collect();
        let mut p_w = vec![0.0; nw];
        for row in &joint {
            for (w, &j) in row.iter().enumerate() {
                p_w[w] += j;
            }
        }
        let pop: Vec<f64> = (0..nw)
            .map(|w| (0..nz).map(|z| pz[z] * problem.loss(w, z)).sum())
            .collect();
        let gen = datasets
            .iter()
            .map(|t| (0..nw).map(|w| risk(w, t) / n as f64 - pop[w]).collect())
            .collect();
        Self {
            n,
            sigma: setup.sigma.value,
            datasets,
            p_zn,
            cond,
            joint,
            p_w,
            gen,
        }
    }

    /// `(probability, density)` over the joint support.
    fn atoms(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for (zn, row) in self.joint.iter().enumerate() {
            for (w, &j) in row.iter().enumerate() {
                if j > 0.0 {
                    out.push((j, (j / (self.p_w[w] * self.p_zn[zn])).ln()));
                }
            }
        }
        out
    }

    pub fn mutual_information(&self) -> f64 {
        self.atoms().iter().map(|(p, d)| p * d).sum()
    }

    pub fn moment_root(&self, m: f64) -> f64 {
        let i = self.mutual_information();
        let s: f64 = self.atoms().iter().map(|(p, d)| p * (d - i).abs().powf(m)).sum();
        s.powf(1.0 / m)
    }

    pub fn moment_infinity(&self) -> f64 {
        let i = self.mutual_information();
        self.atoms().iter().map(|(_, d)| (d - i).abs()).fold(0.0, f64::max)
    }

    pub fn max_information(&self) -> f64 {
        self.atoms().iter().map(|(_, d)| *d).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn maximal_leakage(&self) -> f64 {
        let nw = self.p_w.len();
        let mut total = 0.0;
        for w in 0..nw {
            let mut best = 0.0_f64;
            for (zn, row) in self.cond.iter().enumerate() {
                if self.p_zn[zn] > 0.0 {
                    best = best.max(row[w]);
                }
            }
            total += best;
        }
        total.ln()
    }

    /// Sibson order: the inner mean runs over datasets.
    pub fn alpha_mi(&self, alpha: f64) -> f64 {
        let nw = self.p_w.len();
        let mut total = 0.0;
        for w in 0..nw {
            let top = self.cond.iter().map(|r| r[w]).fold(0.0, f64::max);
            if top == 0.0 {
                continue;
            }
            let inner: f64 = self
                .cond
                .iter()
                .zip(&self.p_zn)
                .map(|(r, &p)| p * (r[w] / top).powf(alpha))
                .sum();
            total += top * inner.powf(1.0 / alpha);
        }
        alpha / (alpha - 1.0) * total.ln()
    }

    pub fn tail(&self, gamma: f64) -> f64 {
        self.atoms().iter().filter(|(_, d)| *d >= gamma).map(|(p, _)| p).sum()
    }

    pub fn divergences(&self) -> Vec<f64> {
        self.cond
            .iter()
            .zip(&self.p_zn)
            .filter(|(_, &p)| p > 0.0)
            .map(|(row, _)| {
                row.iter()
                    .zip(&self.p_w)
                    .filter(|(&c, _)| c > 0.0)
                    .map(|(&c, &q)| c * (c / q).ln())
                    .sum()
            })
            .collect()
    }

    pub fn expected_gen(&self) -> f64 {
        let mut s = 0.0;
        for (zn, row) in self.joint.iter().enumerate() {
            for (w, &j) in row.iter().enumerate() {
                s += j * self.gen[zn][w];
            }
        }
        s
    }

    pub fn theorem1(&self, lambda: f64) -> f64 {
        let pen = lambda * lambda * self.sigma * self.sigma / (2.0 * self.n as f64);
        let mut s = 0.0;
        for (zn, row) in self.joint.iter().enumerate() {
            for (w, &j) in row.iter().enumerate() {
                if j > 0.0 {
                    let r = j / (self.p_w[w] * self.p_zn[zn]);
                    s += j * (lambda * self.gen[zn][w] - pen).exp() / r;
                }
            }
        }
        s
    }

    pub fn num_atoms(&self) -> usize {
        self.datasets.len() * self.p_w.len()
    }
}
