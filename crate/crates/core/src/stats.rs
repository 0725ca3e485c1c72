//! Numerical and output-analysis helpers: compensated sums, log-domain
//! accumulation and batch-means standard errors.

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
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

/// Pairwise (cascade) summation.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 16;
    if values.len() <= BLOCK {
        values.iter().sum()
    } else {
        let (a, b) = values.split_at(values.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

/// `ln sum exp(t)`, shifted by the maximum and summed pairwise.
/// Returns `-inf` for an empty slice.
pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let scaled: Vec<f64> = terms.iter().map(|t| (t - max).exp()).collect();
    max + pairwise_sum(&scaled).ln()
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    pairwise_sum(values) / values.len() as f64
}

/// Unbiased sample variance; zero for fewer than two values.
pub fn sample_variance(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let squares: Vec<f64> = values.iter().map(|v| (v - m) * (v - m)).collect();
    pairwise_sum(&squares) / (values.len() - 1) as f64
}

/// Standard error of the mean of a correlated sequence, from
/// `ceil(sqrt(n))` contiguous batches of equal size.
///
/// Trailing values that do not fill a batch are left out of the error
/// estimate. Returns `NaN` when fewer than two batches can be formed.
pub fn batch_means_stderr(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 4 {
        return f64::NAN;
    }
    let batches = (n as f64).sqrt().ceil() as usize;
    let size = n / batches;
    let means: Vec<f64> = values[..batches * size]
        .chunks_exact(size)
        .map(mean)
        .collect();
    (sample_variance(&means) / batches as f64).sqrt()
}

/// One batch of a ratio estimator `sum(numerator) / sum(denominator)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RatioBatch {
    pub numerator: f64,
    pub denominator: f64,
}

/// Standard error of the ratio of sums over batches, by the delta method.
pub fn ratio_batch_stderr(batches: &[RatioBatch]) -> f64 {
    let b = batches.len();
    if b < 2 {
        return f64::NAN;
    }
    let num: f64 = batches.iter().map(|x| x.numerator).sum();
    let den: f64 = batches.iter().map(|x| x.denominator).sum();
    if den <= 0.0 {
        return f64::NAN;
    }
    let ratio = num / den;
    let mean_den = den / b as f64;
    let ss: f64 = batches
        .iter()
        .map(|x| {
            let r = x.numerator - ratio * x.denominator;
            r * r
        })
        .sum();
    (ss / (b * (b - 1)) as f64).sqrt() / mean_den
}

/// Streams observations into a bounded number of batches without knowing
/// the run length: when the batch list fills up, neighbouring batches are
/// merged pairwise and the batch size doubles.
#[derive(Debug, Clone)]
pub struct MergingBatches<T> {
    batches: Vec<T>,
    current: T,
    fill: u64,
    size: u64,
    max_batches: usize,
}

pub trait Mergeable: Copy + Default {
    fn merge(&mut self, other: &Self);
}

impl Mergeable for RatioBatch {
    fn merge(&mut self, other: &Self) {
        self.numerator += other.numerator;
        self.denominator += other.denominator;
    }
}

impl<T: Mergeable> MergingBatches<T> {
    /// Keeps between `max_batches / 2` and `max_batches` full batches once
    /// enough observations have arrived. `max_batches` must be even.
    pub fn new(max_batches: usize) -> Self {
        assert!(max_batches >= 2 && max_batches.is_multiple_of(2));
        Self {
            batches: Vec::with_capacity(max_batches),
            current: T::default(),
            fill: 0,
            size: 1,
            max_batches,
        }
    }

    pub fn push(&mut self, obs: T) {
        self.current.merge(&obs);
        self.fill += 1;
        if self.fill == self.size {
            self.batches.push(self.current);
            self.current = T::default();
            self.fill = 0;
            if self.batches.len() == self.max_batches {
                let merged: Vec<T> = self
                    .batches
                    .chunks_exact(2)
                    .map(|p| {
                        let mut m = p[0];
                        m.merge(&p[1]);
                        m
                    })
                    .collect();
                self.batches = merged;
                self.size *= 2;
            }
        }
    }

    /// Completed batches; the partial batch in progress is excluded.
    pub fn batches(&self) -> &[T] {
        &self.batches
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn log_sum_exp_basics() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert!((log_sum_exp(&[0.0, 0.0]) - 2f64.ln()).abs() < 1e-15);
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn neumaier_beats_naive() {
        let mut s = NeumaierSum::default();
        for v in [1.0, 1e100, 1.0, -1e100] {
            s.add(v);
        }
        assert_eq!(s.value(), 2.0);
    }

    #[test]
    fn batch_means_on_iid_sequence() {
        // Alternating +-1 around 5: the batch means are exact and the error is 0.
        let values: Vec<f64> = (0..100).map(|i| 5.0 + if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert_eq!(batch_means_stderr(&values), 0.0);
        assert!(batch_means_stderr(&[1.0, 2.0]).is_nan());
    }

    #[test]
    fn ratio_stderr_zero_for_proportional_batches() {
        let b: Vec<RatioBatch> = (1..10)
            .map(|i| RatioBatch { numerator: 2.0 * i as f64, denominator: i as f64 })
            .collect();
        assert_eq!(ratio_batch_stderr(&b), 0.0);
    }

    #[test]
    fn merging_batches_bounds() {
        let mut m = MergingBatches::<RatioBatch>::new(8);
        for _ in 0..1000 {
            m.push(RatioBatch { numerator: 1.0, denominator: 1.0 });
        }
        let n = m.batches().len();
        assert!((4..8).contains(&n), "{n}");
        let total: f64 = m.batches().iter().map(|b| b.denominator).sum();
        assert!(total <= 1000.0 && total > 500.0);
    }

    proptest! {
        #[test]
        fn pairwise_close_to_compensated(values in proptest::collection::vec(-1e3f64..1e3, 0..200)) {
            let mut s = NeumaierSum::default();
            for v in &values { s.add(*v); }
            prop_assert!((pairwise_sum(&values) - s.value()).abs() <= 1e-9);
        }
    }
}
