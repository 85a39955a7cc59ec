//! Sample reductions used by the Monte Carlo code.

/// Mean and standard error of a Monte Carlo estimator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

impl Estimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                std_error: f64::NAN,
            };
        }
        let mean = pairwise_sum(samples) / n as f64;
        if n == 1 {
            return Self {
                mean,
                std_error: 0.0,
            };
        }
        let dev: Vec<f64> = samples.iter().map(|x| (x - mean) * (x - mean)).collect();
        let var = pairwise_sum(&dev) / (n - 1) as f64;
        Self {
            mean,
            std_error: (var / n as f64).sqrt(),
        }
    }
}

/// Pairwise (cascade) summation; the result does not depend on how the
/// caller chunks work, only on the sample order.
pub fn pairwise_sum(x: &[f64]) -> f64 {
    if x.len() <= 32 {
        return x.iter().sum();
    }
    let mid = x.len() / 2;
    pairwise_sum(&x[..mid]) + pairwise_sum(&x[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_samples_have_zero_error() {
        let e = Estimate::from_samples(&[2.5; 1000]);
        assert_eq!(e.mean, 2.5);
        assert_eq!(e.std_error, 0.0);
    }

    #[test]
    fn standard_error_of_two_points() {
        let e = Estimate::from_samples(&[1.0, 3.0]);
        assert_eq!(e.mean, 2.0);
        assert!((e.std_error - 1.0).abs() < 1e-15);
    }
}
