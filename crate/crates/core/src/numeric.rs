//! Log-domain aggregation and compensated summation.

/// Running sum with Neumaier's variant of Kahan compensation.
///
/// Terms are combined in the order they are added, so two accumulators fed
/// the same sequence produce bit-identical results.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl Extend<f64> for CompensatedSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for v in iter {
            self.add(v);
        }
    }
}

/// Compensated sum of an iterator of finite reals.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = CompensatedSum::new();
    acc.extend(values);
    acc.value()
}

/// `log Σ exp(x_i)`, shifted by the maximum. Empty input and all-`-inf`
/// input both give `-inf`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let total = compensated_sum(values.iter().map(|&v| (v - max).exp()));
    max + total.ln()
}

/// Iterator form of [`log_sum_exp`]; buffers the values once.
pub fn log_sum_exp_iter<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let buf: Vec<f64> = values.into_iter().collect();
    log_sum_exp(&buf)
}

/// Streaming log-sum-exp accumulator that rescales when a new maximum
/// arrives. Used for column sums over strided layouts.
#[derive(Debug, Clone, Copy)]
pub struct LogSumExpAcc {
    max: f64,
    scaled: f64,
}

impl Default for LogSumExpAcc {
    fn default() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            scaled: 0.0,
        }
    }
}

impl LogSumExpAcc {
    pub fn add(&mut self, value: f64) {
        if value == f64::NEG_INFINITY {
            return;
        }
        if value > self.max {
            self.scaled = self.scaled * (self.max - value).exp() + 1.0;
            self.max = value;
        } else {
            self.scaled += (value - self.max).exp();
        }
    }

    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled.ln()
        }
    }
}

/// `(Σ w_i · x_i^p)^{1/p}` for nonnegative `x_i` and weights summing to one,
/// rescaled by `max x_i` so that large orders neither overflow nor underflow.
pub fn weighted_power_mean<I>(pairs: I, order: f64) -> f64
where
    I: IntoIterator<Item = (f64, f64)> + Clone,
{
    let scale = pairs
        .clone()
        .into_iter()
        .map(|(_, x)| x.abs())
        .fold(0.0_f64, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    let inner = compensated_sum(
        pairs
            .into_iter()
            .map(|(w, x)| w * (x.abs() / scale).powf(order)),
    );
    scale * inner.powf(1.0 / order)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_handles_extremes() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
        let v = log_sum_exp(&[-1000.0, -1000.0]);
        assert!((v - (-1000.0 + 2f64.ln())).abs() < 1e-12);
        let v = log_sum_exp(&[800.0, 800.0]);
        assert!((v - (800.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn streaming_matches_batch() {
        let xs = [-3.0, 2.5, f64::NEG_INFINITY, 0.1, 7.0, -50.0];
        let mut acc = LogSumExpAcc::default();
        for &x in &xs {
            acc.add(x);
        }
        assert!((acc.value() - log_sum_exp(&xs)).abs() < 1e-13);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut values = vec![1.0];
        values.extend(std::iter::repeat_n(1e-16, 10_000));
        let s = compensated_sum(values.iter().copied());
        assert!((s - (1.0 + 1e-12)).abs() < 1e-15);
    }

    #[test]
    fn power_mean_large_order() {
        let pairs = [(0.5, 1e3), (0.5, 2e3)];
        let v = weighted_power_mean(pairs, 200.0);
        assert!(v.is_finite() && v < 2e3 && v > 1.99e3);
        assert_eq!(weighted_power_mean([(1.0, 0.0)], 3.0), 0.0);
    }
}
