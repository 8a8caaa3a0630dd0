//! Small-sample summary statistics over seed replications.

use statrs::distribution::{ContinuousCDF, StudentsT};

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n - 1 denominator).
pub fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return f64::NAN;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m).powi(2)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// Student-t quantile with `dof` degrees of freedom.
pub fn t_quantile(p: f64, dof: usize) -> f64 {
    StudentsT::new(0.0, 1.0, dof as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(p)
}

/// Half-width of the two-sided 95% confidence interval of the mean, or
/// `None` with fewer than two samples.
pub fn ci95_half_width(values: &[f64]) -> Option<f64> {
    let n = values.len();
    if n < 2 {
        return None;
    }
    Some(t_quantile(0.975, n - 1) * std_dev(values) / (n as f64).sqrt())
}

/// Lower bound of the one-sided 95% confidence interval for the mean of
/// the paired differences `a[i] - b[i]`.
pub fn paired_lower_bound_95(a: &[f64], b: &[f64]) -> Option<f64> {
    assert_eq!(a.len(), b.len(), "paired samples must have equal length");
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = diffs.len();
    if n < 2 {
        return None;
    }
    Some(mean(&diffs) - t_quantile(0.95, n - 1) * std_dev(&diffs) / (n as f64).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub ci95: Option<f64>,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        Summary { n: values.len(), mean: mean(values), ci95: ci95_half_width(values) }
    }

    pub fn low(&self) -> f64 {
        self.mean - self.ci95.unwrap_or(0.0)
    }

    pub fn high(&self) -> f64 {
        self.mean + self.ci95.unwrap_or(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn t_quantiles_match_tables() {
        assert_abs_diff_eq!(t_quantile(0.975, 4), 2.7764, epsilon = 1e-4);
        assert_abs_diff_eq!(t_quantile(0.975, 9), 2.2622, epsilon = 1e-4);
        assert_abs_diff_eq!(t_quantile(0.95, 9), 1.8331, epsilon = 1e-4);
    }

    #[test]
    fn ci_examples() {
        assert_eq!(ci95_half_width(&[0.4]), None);
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_abs_diff_eq!(mean(&v), 3.0);
        assert_abs_diff_eq!(std_dev(&v), 2.5f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(ci95_half_width(&v).unwrap(), 2.7764 * 2.5f64.sqrt() / 5f64.sqrt(), epsilon = 1e-3);
        assert_eq!(ci95_half_width(&[2.0, 2.0, 2.0]), Some(0.0));
    }

    #[test]
    fn paired_bound() {
        let a = [0.5, 0.6, 0.55, 0.58];
        let b = [0.1, 0.12, 0.09, 0.11];
        assert!(paired_lower_bound_95(&a, &b).unwrap() > 0.0);
        assert!(paired_lower_bound_95(&b, &a).unwrap() < 0.0);
    }
}
