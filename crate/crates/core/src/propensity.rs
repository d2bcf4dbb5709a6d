//! Big-data propensity model estimated from the probability sample.
//!
//! Membership `delta_i` is observed on `A`, so the logistic model
//! `logit p_i = x_i'lambda` is fit by maximizing the design-weighted
//! pseudo log-likelihood
//!
//! ```text
//! l(lambda) = sum_A d_i [delta_i log p_i + (1 - delta_i) log(1 - p_i)]
//! ```
//!
//! The big-data mean is then estimated by the Hajek-form inverse propensity
//! weighted mean over `B`, with a sandwich variance built from the joint
//! estimating equations `U(theta, lambda) = sum_B (y_i - theta) / p_i` and
//! `S(lambda) = sum_A d_i (delta_i - p_i) g_i`, where `g_i = x_i` under the
//! logistic link.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{inverse, max_abs, solve_spd};
use crate::population::{BigDataSample, Covariates, ProbabilitySample};

/// Fitted probabilities are kept inside `[P_FLOOR, 1 - P_FLOOR]` in weights.
pub const P_FLOOR: f64 = 1e-12;
/// A fitted linear predictor beyond this magnitude on `A` signals separation.
const SEPARATION_ETA: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropensityOptions {
    /// Tolerance on `max |S(lambda)| / sum_A d_i`.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub step_halving_limit: usize,
}

impl Default for PropensityOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 100,
            step_halving_limit: 30,
        }
    }
}

/// Numerically stable logistic function.
pub fn expit(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(t))` without overflow.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// Logistic propensity fit. `lambda[0]` is the intercept; `lambda[k + 1]`
/// multiplies covariate column `columns[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PropensityFit {
    lambda: Vec<f64>,
    columns: Vec<usize>,
    converged: bool,
    iterations: usize,
    score_norm: f64,
    loglik_trace: Vec<f64>,
}

impl PropensityFit {
    /// Fit with given coefficients, e.g. a known true model.
    pub fn from_coefficients(lambda: Vec<f64>, columns: Vec<usize>) -> Result<Self> {
        if lambda.len() != columns.len() + 1 {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for intercept + {} columns",
                lambda.len(),
                columns.len()
            )));
        }
        Ok(Self {
            lambda,
            columns,
            converged: true,
            iterations: 0,
            score_norm: 0.0,
            loglik_trace: Vec::new(),
        })
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn columns(&self) -> &[usize] {
        &self.columns
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// `max |S(lambda_hat)| / sum_A d_i`
    pub fn score_norm(&self) -> f64 {
        self.score_norm
    }

    /// Pseudo log-likelihood at the start and after each accepted step.
    pub fn loglik_trace(&self) -> &[f64] {
        &self.loglik_trace
    }

    /// `g_i = (1, x_i[columns])`
    pub fn design_row(&self, row: &[f64]) -> Vec<f64> {
        design_row(&self.columns, row)
    }

    pub fn linear_predictor(&self, row: &[f64]) -> f64 {
        linear_predictor(&self.lambda, &self.columns, row)
    }

    /// Unclamped `p(x'lambda)`.
    pub fn probability(&self, row: &[f64]) -> f64 {
        expit(self.linear_predictor(row))
    }

    /// Clamped propensities for every row, and how many were clamped.
    /// Fails if a propensity underflows to zero.
    pub fn propensities(&self, x: &Covariates, ids: &[u64]) -> Result<(Vec<f64>, usize)> {
        let mut clamped = 0;
        let mut out = Vec::with_capacity(x.nrows());
        for (row, &id) in x.rows().zip(ids) {
            let p = self.probability(row);
            if p <= 0.0 {
                return Err(Error::DegenerateWeight { id });
            }
            let c = p.clamp(P_FLOOR, 1.0 - P_FLOOR);
            if c != p {
                clamped += 1;
            }
            out.push(c);
        }
        Ok((out, clamped))
    }
}

fn design_row(columns: &[usize], row: &[f64]) -> Vec<f64> {
    std::iter::once(1.0).chain(columns.iter().map(|&c| row[c])).collect()
}

fn linear_predictor(lambda: &[f64], columns: &[usize], row: &[f64]) -> f64 {
    lambda[0] + columns.iter().zip(&lambda[1..]).map(|(&c, l)| l * row[c]).sum::<f64>()
}

struct LikelihoodState {
    loglik: f64,
    score: Vec<f64>,
    information: DMatrix<f64>,
}

fn likelihood_state(design: &[Vec<f64>], d: &[f64], delta: &[bool], lambda: &[f64]) -> LikelihoodState {
    let q = lambda.len();
    let mut loglik = 0.0;
    let mut score = vec![0.0; q];
    let mut information = DMatrix::zeros(q, q);
    for ((g, &w), &member) in design.iter().zip(d).zip(delta) {
        let eta: f64 = g.iter().zip(lambda).map(|(a, b)| a * b).sum();
        let p = expit(eta);
        loglik -= w * if member { softplus(-eta) } else { softplus(eta) };
        let resid = f64::from(u8::from(member)) - p;
        let curv = w * p * (1.0 - p);
        for a in 0..q {
            score[a] += w * resid * g[a];
            for b in 0..=a {
                information[(a, b)] += curv * g[a] * g[b];
            }
        }
    }
    for a in 0..q {
        for b in 0..a {
            information[(b, a)] = information[(a, b)];
        }
    }
    LikelihoodState {
        loglik,
        score,
        information,
    }
}

fn loglik_only(design: &[Vec<f64>], d: &[f64], delta: &[bool], lambda: &[f64]) -> f64 {
    design
        .iter()
        .zip(d)
        .zip(delta)
        .map(|((g, &w), &member)| {
            let eta: f64 = g.iter().zip(lambda).map(|(a, b)| a * b).sum();
            -w * if member { softplus(-eta) } else { softplus(eta) }
        })
        .sum()
}

/// Pseudo maximum likelihood fit of `logit p = lambda_0 + x[columns]'lambda_x`
/// on the probability sample, by Newton-Raphson with step halving.
pub fn fit_pseudo_mle(a: &ProbabilitySample, columns: &[usize], opts: &PropensityOptions) -> Result<PropensityFit> {
    if let Some(&bad) = columns.iter().find(|&&c| c >= a.x().ncols()) {
        return Err(Error::DimensionMismatch(format!(
            "propensity column {bad} does not exist (p = {})",
            a.x().ncols()
        )));
    }
    let delta = a.delta();
    if delta.iter().all(|&m| m) {
        return Err(Error::DegenerateResponse(1));
    }
    if delta.iter().all(|&m| !m) {
        return Err(Error::DegenerateResponse(0));
    }
    let d = a.weights();
    let total_weight: f64 = d.iter().sum();
    let design: Vec<Vec<f64>> = a.x().rows().map(|r| design_row(columns, r)).collect();
    let q = columns.len() + 1;

    let mut lambda = vec![0.0; q];
    let mut state = likelihood_state(&design, d, delta, &lambda);
    // Collinear design columns leave the information singular at every lambda.
    solve_spd(
        &state.information,
        &DVector::from_column_slice(&state.score),
        "propensity information matrix",
    )?;
    let mut trace = vec![state.loglik];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        if max_abs(&state.score) / total_weight <= opts.tolerance {
            converged = true;
            break;
        }
        let rhs = DVector::from_column_slice(&state.score);
        let step = match solve_spd(&state.information, &rhs, "propensity information matrix") {
            Ok(s) => s,
            Err(e) if iterations == 0 => return Err(e),
            Err(_) => {
                return Err(Error::Separation {
                    iterations,
                    lambda_norm: max_abs(&lambda),
                })
            }
        };
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.step_halving_limit {
            let candidate: Vec<f64> = lambda.iter().zip(step.iter()).map(|(l, s)| l + t * s).collect();
            let ll = loglik_only(&design, d, delta, &candidate);
            let slack = 4.0 * f64::EPSILON * state.loglik.abs().max(1.0);
            if ll.is_finite() && ll >= state.loglik - slack {
                let next = likelihood_state(&design, d, delta, &candidate);
                if ll > state.loglik || max_abs(&next.score) < max_abs(&state.score) {
                    accepted = Some((candidate, next));
                    break;
                }
            }
            t *= 0.5;
        }
        iterations += 1;
        let Some((candidate, next)) = accepted else {
            break;
        };
        lambda = candidate;
        state = next;
        trace.push(state.loglik);
    }
    if !converged && max_abs(&state.score) / total_weight <= opts.tolerance {
        converged = true;
    }

    let max_eta = design
        .iter()
        .map(|g| g.iter().zip(&lambda).map(|(a, b)| a * b).sum::<f64>().abs())
        .fold(0.0_f64, f64::max);
    if max_eta > SEPARATION_ETA {
        return Err(Error::Separation {
            iterations,
            lambda_norm: max_abs(&lambda),
        });
    }
    if !converged {
        return Err(Error::NoConvergence {
            solver: "propensity Newton-Raphson",
            iterations,
            residual: max_abs(&state.score) / total_weight,
        });
    }
    Ok(PropensityFit {
        lambda,
        columns: columns.to_vec(),
        converged,
        iterations,
        score_norm: max_abs(&state.score) / total_weight,
        loglik_trace: trace,
    })
}

/// Hajek-form inverse propensity weighted mean over `B`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsEstimate {
    pub theta: f64,
    /// Number of fitted propensities clamped into `[P_FLOOR, 1 - P_FLOOR]`.
    pub clamped: usize,
}

/// `sum_B y_i / p_i / sum_B 1 / p_i`
pub fn ps_estimator(b: &BigDataSample, fit: &PropensityFit) -> Result<PsEstimate> {
    check_columns(fit, b.x())?;
    let (p, clamped) = fit.propensities(b.x(), b.ids())?;
    let (num, den) = p
        .iter()
        .zip(b.y())
        .fold((0.0, 0.0), |(n, d), (&p, &y)| (n + y / p, d + 1.0 / p));
    Ok(PsEstimate {
        theta: num / den,
        clamped,
    })
}

fn check_columns(fit: &PropensityFit, x: &Covariates) -> Result<()> {
    match fit.columns().iter().find(|&&c| c >= x.ncols()) {
        Some(&c) => Err(Error::DimensionMismatch(format!(
            "propensity column {c} does not exist in a sample with {} covariates",
            x.ncols()
        ))),
        None => Ok(()),
    }
}

/// Pieces of the sandwich variance for `(theta_hat, lambda_hat)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SandwichComponents {
    /// `U(theta, lambda)`
    pub u_value: f64,
    /// `S(lambda)`
    pub s_value: Vec<f64>,
    /// Jacobian of `(U, S)` with respect to `(theta, lambda)`.
    pub h: DMatrix<f64>,
    /// Estimated covariance of `(U, S)`.
    pub v_us: DMatrix<f64>,
    /// `(1, 1)` element of `H^-1 V (H^-1)'`.
    pub var_theta: f64,
    /// The raw sandwich element was negative and has been set to zero.
    pub clamped_negative: bool,
    /// No membership unit of `A` could be matched to `B`; the `U`-`S` covariance was dropped.
    pub covariance_dropped: bool,
    /// Units of `A` with `delta = 1` that were not found in `B` by id.
    pub unmatched_overlap: usize,
    /// Propensities clamped while forming the components.
    pub clamped: usize,
}

/// Sandwich variance of the propensity weighted estimator.
///
/// Units of `A` with `delta = 1` are matched to `B` by id to obtain their
/// `y` for the covariance between the two estimating equations.
pub fn sandwich_variance(
    theta: f64,
    fit: &PropensityFit,
    a: &ProbabilitySample,
    b: &BigDataSample,
) -> Result<SandwichComponents> {
    check_columns(fit, b.x())?;
    check_columns(fit, a.x())?;
    let q = fit.lambda().len();
    let (p_b, clamped_b) = fit.propensities(b.x(), b.ids())?;
    let (p_a, clamped_a) = fit.propensities(a.x(), a.ids())?;

    let mut u_value = 0.0;
    let mut var_u = 0.0;
    let mut du_dtheta = 0.0;
    let mut du_dlambda = vec![0.0; q];
    for ((row, &y), &p) in b.x().rows().zip(b.y()).zip(&p_b) {
        let r = y - theta;
        u_value += r / p;
        var_u += (1.0 - p) / (p * p) * r * r;
        du_dtheta -= 1.0 / p;
        let g = fit.design_row(row);
        for (acc, gk) in du_dlambda.iter_mut().zip(&g) {
            *acc -= (1.0 - p) / p * r * gk;
        }
    }

    let b_index: HashMap<u64, usize> = b.ids().iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let mut s_value = vec![0.0; q];
    let mut var_s = DMatrix::zeros(q, q);
    let mut ds_dlambda = DMatrix::zeros(q, q);
    let mut cov_us = vec![0.0; q];
    let mut members = 0;
    let mut matched = 0;
    for (i, row) in a.x().rows().enumerate() {
        let d = a.weights()[i];
        let p = p_a[i];
        let member = a.delta()[i];
        let g = fit.design_row(row);
        let resid = f64::from(u8::from(member)) - p;
        for k in 0..q {
            s_value[k] += d * resid * g[k];
            for l in 0..q {
                var_s[(k, l)] += d * d * p * (1.0 - p) * g[k] * g[l];
                ds_dlambda[(k, l)] -= d * p * (1.0 - p) * g[k] * g[l];
            }
        }
        if member {
            members += 1;
            if let Some(&j) = b_index.get(&a.ids()[i]) {
                matched += 1;
                let r = b.y()[j] - theta;
                for k in 0..q {
                    cov_us[k] += d / p * r * (1.0 - p) * g[k];
                }
            }
        }
    }

    let dim = q + 1;
    let mut h = DMatrix::zeros(dim, dim);
    h[(0, 0)] = du_dtheta;
    for k in 0..q {
        h[(0, k + 1)] = du_dlambda[k];
        for l in 0..q {
            h[(k + 1, l + 1)] = ds_dlambda[(k, l)];
        }
    }
    let mut v_us = DMatrix::zeros(dim, dim);
    v_us[(0, 0)] = var_u;
    for k in 0..q {
        v_us[(0, k + 1)] = cov_us[k];
        v_us[(k + 1, 0)] = cov_us[k];
        for l in 0..q {
            v_us[(k + 1, l + 1)] = var_s[(k, l)];
        }
    }

    let h_inv = inverse(&h, "sandwich Jacobian H")?;
    let sandwich = &h_inv * &v_us * h_inv.transpose();
    let raw = sandwich[(0, 0)];
    Ok(SandwichComponents {
        u_value,
        s_value,
        h,
        v_us,
        var_theta: raw.max(0.0),
        clamped_negative: raw < 0.0,
        covariance_dropped: members > 0 && matched == 0,
        unmatched_overlap: members - matched,
        clamped: clamped_a + clamped_b,
    })
}
