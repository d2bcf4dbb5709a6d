//! Monte Carlo summaries of an estimator across replications.

use crate::population::Z_975;

/// One replication's estimate, variance estimate and truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Draw {
    pub estimate: f64,
    pub variance: f64,
    pub truth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    /// `mean(theta_hat - truth)`
    pub bias: f64,
    /// Standard deviation of `theta_hat - truth` over replications (divisor `R - 1`).
    /// With a fixed truth this is the standard deviation of `theta_hat`.
    pub se: f64,
    /// `mean(sqrt(v_hat)) / se - 1`; NaN when `se` is zero.
    pub rb_se: f64,
    /// Fraction of replications with `|theta_hat - truth| <= 1.959964 sqrt(v_hat)`.
    pub cr: f64,
    pub reps: usize,
}

/// Summarizes at least two replications.
pub fn summarize(draws: &[Draw]) -> Summary {
    assert!(draws.len() >= 2, "metrics need at least two replications");
    let r = draws.len() as f64;
    let errors: Vec<f64> = draws.iter().map(|d| d.estimate - d.truth).collect();
    let bias = errors.iter().sum::<f64>() / r;
    let se = (errors.iter().map(|e| (e - bias).powi(2)).sum::<f64>() / (r - 1.0)).sqrt();
    let mean_sd = draws.iter().map(|d| d.variance.max(0.0).sqrt()).sum::<f64>() / r;
    let rb_se = if se > 0.0 { mean_sd / se - 1.0 } else { f64::NAN };
    let covered = draws
        .iter()
        .zip(&errors)
        .filter(|(d, e)| e.abs() <= Z_975 * d.variance.max(0.0).sqrt())
        .count();
    Summary {
        bias,
        se,
        rb_se,
        cr: covered as f64 / r,
        reps: draws.len(),
    }
}
