//! Combining the big-data sample with an independent probability sample:
//! outcome regression, the doubly robust estimator, and nearest-neighbor
//! mass imputation.
//!
//! The doubly robust estimator is
//!
//! ```text
//! theta_DR = N^-1 { sum_B (y_i - x_i'beta) / p_i + sum_A d_i x_i'beta }
//! ```
//!
//! with `beta` from ordinary least squares on `B` (intercept included) and
//! `p_i` from the pseudo-likelihood propensity fit. When either working
//! model is right, its variance is dominated by the design variance of the
//! regression-projection term `N^-1 sum_A d_i x_i'beta`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::solve_spd;
use crate::neighbors::NeighborIndex;
use crate::population::{mean, sample_variance, BigDataSample, Covariates, EstimateReport, Method, ProbabilitySample};
use crate::propensity::PropensityFit;

/// Least-squares fit of `y` on `(1, x)` over the big-data sample.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit {
    /// Intercept first.
    pub beta: Vec<f64>,
    /// `y_i - (1, x_i)'beta` for each unit of `B`.
    pub residuals: Vec<f64>,
    pub xtx_inverse: DMatrix<f64>,
}

impl RegressionFit {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.beta[0] + row.iter().zip(&self.beta[1..]).map(|(x, b)| x * b).sum::<f64>()
    }
}

/// Ordinary least squares with an intercept on all covariates of `B`.
pub fn ols_fit(b: &BigDataSample) -> Result<RegressionFit> {
    let p = b.x().ncols();
    let q = p + 1;
    if b.sample_size() < q {
        return Err(Error::Singular { context: "OLS design matrix" });
    }
    // Center columns for conditioning; the intercept absorbs the shift.
    let means = b.x().column_means();
    let ybar = b.mean();
    let mut xtx = DMatrix::zeros(p, p);
    let mut xty = DVector::zeros(p);
    for (row, &y) in b.x().rows().zip(b.y()) {
        for a in 0..p {
            let ca = row[a] - means[a];
            xty[a] += ca * (y - ybar);
            for c in 0..=a {
                xtx[(a, c)] += ca * (row[c] - means[c]);
            }
        }
    }
    for a in 0..p {
        for c in 0..a {
            xtx[(c, a)] = xtx[(a, c)];
        }
    }
    let slopes = if p == 0 {
        DVector::zeros(0)
    } else {
        solve_spd(&xtx, &xty, "OLS design matrix")?
    };
    let intercept = ybar - slopes.iter().zip(&means).map(|(s, m)| s * m).sum::<f64>();
    let mut beta = Vec::with_capacity(q);
    beta.push(intercept);
    beta.extend(slopes.iter());

    // (X'X)^-1 for the uncentered design, via the partitioned inverse.
    let nb = b.sample_size() as f64;
    let centered_inv = if p == 0 {
        DMatrix::zeros(0, 0)
    } else {
        crate::linalg::inverse(&xtx, "OLS design matrix")?
    };
    let m = DVector::from_column_slice(&means);
    let cm = &centered_inv * &m;
    let mut xtx_inverse = DMatrix::zeros(q, q);
    xtx_inverse[(0, 0)] = 1.0 / nb + m.dot(&cm);
    for a in 0..p {
        xtx_inverse[(0, a + 1)] = -cm[a];
        xtx_inverse[(a + 1, 0)] = -cm[a];
        for c in 0..p {
            xtx_inverse[(a + 1, c + 1)] = centered_inv[(a, c)];
        }
    }

    let mut fit = RegressionFit {
        beta,
        residuals: Vec::new(),
        xtx_inverse,
    };
    fit.residuals = b.x().rows().zip(b.y()).map(|(r, &y)| y - fit.predict(r)).collect();
    Ok(fit)
}

/// Doubly robust point estimate with its decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrResult {
    pub theta: f64,
    pub variance: f64,
    /// `N^-1 sum_A d_i x_i'beta`
    pub theta_reg: f64,
    /// `N^-1 sum_B (y_i - x_i'beta) / p_i`
    pub correction_term: f64,
    /// Propensities clamped into `[1e-12, 1 - 1e-12]`.
    pub clamped: usize,
}

fn check_regression(reg: &RegressionFit, x: &Covariates, what: &str) -> Result<()> {
    if reg.beta.len() != x.ncols() + 1 {
        return Err(Error::DimensionMismatch(format!(
            "regression has {} coefficients (intercept first) but {what} has {} covariates",
            reg.beta.len(),
            x.ncols()
        )));
    }
    Ok(())
}

/// Doubly robust estimator of the population mean.
pub fn dr_estimator(
    a: &ProbabilitySample,
    b: &BigDataSample,
    fit: &PropensityFit,
    reg: &RegressionFit,
    population_size: usize,
) -> Result<DrResult> {
    check_regression(reg, b.x(), "the big-data sample")?;
    check_regression(reg, a.x(), "the probability sample")?;
    if reg.residuals.len() != b.sample_size() {
        return Err(Error::DimensionMismatch("regression residuals do not belong to this big-data sample".into()));
    }
    let n_pop = population_size as f64;
    let (p, clamped) = fit.propensities(b.x(), b.ids())?;
    let correction_term = reg.residuals.iter().zip(&p).map(|(e, p)| e / p).sum::<f64>() / n_pop;
    let theta_reg = a
        .x()
        .rows()
        .zip(a.weights())
        .map(|(r, d)| d * reg.predict(r))
        .sum::<f64>()
        / n_pop;
    let variance = dr_variance(a, reg, population_size)?;
    Ok(DrResult {
        theta: correction_term + theta_reg,
        variance,
        theta_reg,
        correction_term,
        clamped,
    })
}

/// Design variance of `N^-1 sum_A d_i m_i` with `m_i = x_i'beta`.
///
/// Equal design weights are treated as simple random sampling without
/// replacement, `(1 - n/N) s_m^2 / n`; unequal weights use the
/// with-replacement approximation `n/(n-1) sum (d_i m_i / N - theta/n)^2`.
pub fn dr_variance(a: &ProbabilitySample, reg: &RegressionFit, population_size: usize) -> Result<f64> {
    check_regression(reg, a.x(), "the probability sample")?;
    let n = a.size();
    if n < 2 {
        return Err(Error::InvalidInput("variance needs a probability sample of size n >= 2".into()));
    }
    let m: Vec<f64> = a.x().rows().map(|r| reg.predict(r)).collect();
    Ok(design_variance_of_mean(a.weights(), &m, population_size))
}

fn design_variance_of_mean(d: &[f64], m: &[f64], population_size: usize) -> f64 {
    let n = m.len() as f64;
    let n_pop = population_size as f64;
    let equal = d.iter().all(|&w| w == d[0]);
    if equal {
        ((1.0 - n / n_pop) * sample_variance(m) / n).max(0.0)
    } else {
        let t: Vec<f64> = d.iter().zip(m).map(|(d, m)| d * m / n_pop).collect();
        let total: f64 = t.iter().sum();
        n / (n - 1.0) * t.iter().map(|v| (v - total / n).powi(2)).sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RiversOptions {
    /// Divide each covariate by its big-sample standard deviation before matching.
    pub standardize: bool,
    /// Use the linear scan instead of the k-d tree.
    pub brute_force: bool,
}

/// Nearest-neighbor mass imputation: `y*_i` for each unit of `A` is the `y`
/// of the closest unit of `B` in Euclidean distance, ties to the smallest id.
pub fn rivers_impute(a: &ProbabilitySample, b: &BigDataSample, opts: &RiversOptions) -> Result<Vec<f64>> {
    if a.x().ncols() != b.x().ncols() {
        return Err(Error::DimensionMismatch(format!(
            "probability sample has {} covariates, big-data sample {}",
            a.x().ncols(),
            b.x().ncols()
        )));
    }
    let scale: Vec<f64> = if opts.standardize {
        (0..b.x().ncols())
            .map(|j| {
                let col = b.x().column(j);
                let m = mean(&col);
                let sd = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / col.len() as f64).sqrt();
                if sd > 0.0 {
                    1.0 / sd
                } else {
                    1.0
                }
            })
            .collect()
    } else {
        vec![1.0; b.x().ncols()]
    };
    let rescale = |x: &Covariates| -> Result<Covariates> {
        let data = x
            .as_slice()
            .chunks_exact(x.ncols().max(1))
            .flat_map(|r| r.iter().zip(&scale).map(|(v, s)| v * s))
            .collect();
        Covariates::from_row_major(data, x.nrows(), x.ncols())
    };
    let (points, queries) = if opts.standardize {
        (rescale(b.x())?, rescale(a.x())?)
    } else {
        (b.x().clone(), a.x().clone())
    };
    let index = NeighborIndex::build(points, b.ids().to_vec());
    queries
        .rows()
        .map(|q| {
            let hit = if opts.brute_force {
                index.nearest_brute_force(q)
            } else {
                index.nearest(q)
            };
            hit.map(|h| b.y()[h.index])
                .ok_or_else(|| Error::InvalidInput("big-data sample is empty".into()))
        })
        .collect()
}

/// `N^-1 sum_A d_i y*_i` with variance `s^2_{y*} / n`.
pub fn rivers_estimator(a: &ProbabilitySample, imputed: &[f64], population_size: usize) -> Result<EstimateReport> {
    if imputed.len() != a.size() {
        return Err(Error::DimensionMismatch(format!(
            "{} imputed values for {} units",
            imputed.len(),
            a.size()
        )));
    }
    let n_pop = population_size as f64;
    let theta = a.weights().iter().zip(imputed).map(|(d, y)| d * y).sum::<f64>() / n_pop;
    let variance = if imputed.len() < 2 {
        0.0
    } else {
        sample_variance(imputed).max(0.0) / imputed.len() as f64
    };
    EstimateReport::new(Method::Rivers, theta, variance)
}

/// Horvitz-Thompson mean from `A`; needs `y` on `A` (simulation mode only).
pub fn ht_estimator_a(a: &ProbabilitySample, population_size: usize) -> Result<f64> {
    let y = a.y().ok_or(Error::MissingStudyVariable)?;
    Ok(a.weights().iter().zip(y).map(|(d, y)| d * y).sum::<f64>() / population_size as f64)
}
