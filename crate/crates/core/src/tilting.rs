//! Exponential tilting calibration of a big-data sample to known population
//! covariate means.
//!
//! Weights are `w_i = exp(x_i'lambda) / sum_j exp(x_j'lambda)` with `lambda`
//! chosen so that `sum_i w_i x_i` equals the target mean. The calibration
//! equation is solved by Newton's method on the convex potential
//!
//! ```text
//! K(lambda) = log sum_i exp(x_i'lambda) - lambda'target
//! ```
//!
//! whose gradient is the weighted mean minus the target and whose Hessian is
//! the weighted covariance of `x`. Steps are halved until `K` stops
//! increasing, so the iteration converges from `lambda = 0` whenever the
//! target lies in the interior of the convex hull of the sample rows.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{max_abs, solve_spd};
use crate::population::Covariates;

/// `|lambda|` beyond which the target is treated as outside the hull.
const LAMBDA_DIVERGENCE: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltingOptions {
    /// Max-norm tolerance on the calibration residual.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub step_halving_limit: usize,
    /// Take the single Newton step from `lambda = 0` instead of iterating.
    pub one_step: bool,
}

impl Default for TiltingOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 100,
            step_halving_limit: 30,
            one_step: false,
        }
    }
}

impl TiltingOptions {
    fn validate(&self) -> Result<()> {
        if self.tolerance.is_nan() || self.tolerance <= 0.0 || self.max_iterations == 0 || self.step_halving_limit == 0 {
            return Err(Error::InvalidInput(format!("invalid tilting options {self:?}")));
        }
        Ok(())
    }
}

/// Calibration parameter and the normalized importance weights it induces.
#[derive(Debug, Clone, PartialEq)]
pub struct TiltingSolution {
    lambda: Vec<f64>,
    weights: Vec<f64>,
    iterations: usize,
    converged: bool,
    residual_norm: f64,
    potential_trace: Vec<f64>,
}

impl TiltingSolution {
    /// Wraps externally supplied importance weights, normalizing them to sum to one.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidInput("empty weight vector".into()));
        }
        if let Some(i) = weights.iter().position(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidInput(format!(
                "importance weight {} at position {i} is not positive",
                weights[i]
            )));
        }
        let total: f64 = weights.iter().sum();
        Ok(Self {
            lambda: Vec::new(),
            weights: weights.into_iter().map(|w| w / total).collect(),
            iterations: 0,
            converged: true,
            residual_norm: 0.0,
            potential_trace: Vec::new(),
        })
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    /// `max_j |sum_i w_i x_ij - target_j|`
    pub fn residual_norm(&self) -> f64 {
        self.residual_norm
    }

    /// Values of the potential `K` at lambda = 0 and after each accepted step.
    pub fn potential_trace(&self) -> &[f64] {
        &self.potential_trace
    }
}

/// Potential, weights, gradient and Hessian at one `lambda`.
struct Evaluation {
    potential: f64,
    weights: Vec<f64>,
    gradient: Vec<f64>,
    hessian: DMatrix<f64>,
}

/// Rows centered at the target: `z_i = x_i - target`. With this shift the
/// potential is a plain log-sum-exp and its gradient is the residual.
fn centered(x: &Covariates, target: &[f64]) -> Vec<f64> {
    let p = target.len();
    let mut z = x.as_slice().to_vec();
    for row in z.chunks_exact_mut(p) {
        for (v, t) in row.iter_mut().zip(target) {
            *v -= t;
        }
    }
    z
}

fn scores(z: &[f64], p: usize, lambda: &[f64]) -> Vec<f64> {
    z.chunks_exact(p)
        .map(|r| r.iter().zip(lambda).map(|(a, b)| a * b).sum())
        .collect()
}

fn potential(z: &[f64], p: usize, lambda: &[f64]) -> f64 {
    let s = scores(z, p, lambda);
    let m = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + s.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn evaluate(z: &[f64], p: usize, lambda: &[f64]) -> Evaluation {
    let s = scores(z, p, lambda);
    let m = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut weights: Vec<f64> = s.iter().map(|v| (v - m).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);

    let mut gradient = vec![0.0; p];
    let mut second = DMatrix::<f64>::zeros(p, p);
    for (row, &w) in z.chunks_exact(p).zip(&weights) {
        for a in 0..p {
            gradient[a] += w * row[a];
            for b in 0..=a {
                second[(a, b)] += w * row[a] * row[b];
            }
        }
    }
    let mut hessian = DMatrix::zeros(p, p);
    for a in 0..p {
        for b in 0..=a {
            let v = second[(a, b)] - gradient[a] * gradient[b];
            hessian[(a, b)] = v;
            hessian[(b, a)] = v;
        }
    }
    Evaluation {
        potential: m + total.ln(),
        weights,
        gradient,
        hessian,
    }
}

fn check_inputs(x: &Covariates, target: &[f64]) -> Result<()> {
    if x.nrows() == 0 {
        return Err(Error::InvalidInput("cannot calibrate an empty sample".into()));
    }
    if x.ncols() != target.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} covariates but {} target means",
            x.ncols(),
            target.len()
        )));
    }
    if target.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidInput("calibration target must be finite".into()));
    }
    Ok(())
}

/// Solves the calibration equation `sum_i w_i(lambda) x_i = target`.
pub fn solve_calibration(x: &Covariates, target: &[f64], opts: &TiltingOptions) -> Result<TiltingSolution> {
    check_inputs(x, target)?;
    opts.validate()?;
    let p = target.len();
    let z = centered(x, target);

    if opts.one_step {
        let lambda = one_step_lambda(x, target)?;
        let eval = evaluate(&z, p, &lambda);
        let residual_norm = max_abs(&eval.gradient);
        return Ok(TiltingSolution {
            lambda,
            weights: eval.weights,
            iterations: 1,
            converged: residual_norm <= opts.tolerance,
            residual_norm,
            potential_trace: vec![potential(&z, p, &vec![0.0; p]), eval.potential],
        });
    }

    let mut lambda = vec![0.0; p];
    let mut eval = evaluate(&z, p, &lambda);
    let mut trace = vec![eval.potential];
    for iteration in 0..opts.max_iterations {
        let residual = max_abs(&eval.gradient);
        if residual <= opts.tolerance {
            return Ok(TiltingSolution {
                lambda,
                weights: eval.weights,
                iterations: iteration,
                converged: true,
                residual_norm: residual,
                potential_trace: trace,
            });
        }
        let rhs = DVector::from_iterator(p, eval.gradient.iter().map(|g| -g));
        let step = match solve_spd(&eval.hessian, &rhs, "tilting Hessian") {
            Ok(step) => step,
            // All weights are positive, so the weighted covariance is
            // singular at some lambda only if it is singular at lambda = 0.
            Err(e) if iteration == 0 => return Err(e),
            Err(_) => {
                return Err(Error::CalibrationInfeasible {
                    iterations: iteration,
                    residual,
                })
            }
        };

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.step_halving_limit {
            let candidate: Vec<f64> = lambda.iter().zip(step.iter()).map(|(l, s)| l + t * s).collect();
            let next = evaluate(&z, p, &candidate);
            let slack = 4.0 * f64::EPSILON * eval.potential.abs().max(1.0);
            let decreased = next.potential < eval.potential;
            let flat_but_closer = next.potential <= eval.potential + slack
                && max_abs(&next.gradient) < residual;
            if next.potential.is_finite() && (decreased || flat_but_closer) {
                accepted = Some((candidate, next));
                break;
            }
            t *= 0.5;
        }
        let Some((candidate, next)) = accepted else {
            return Err(Error::CalibrationInfeasible {
                iterations: iteration + 1,
                residual,
            });
        };
        lambda = candidate;
        eval = next;
        trace.push(eval.potential);
        if max_abs(&lambda) > LAMBDA_DIVERGENCE {
            return Err(Error::CalibrationInfeasible {
                iterations: iteration + 1,
                residual: max_abs(&eval.gradient),
            });
        }
    }
    let residual = max_abs(&eval.gradient);
    if residual <= opts.tolerance {
        return Ok(TiltingSolution {
            lambda,
            weights: eval.weights,
            iterations: opts.max_iterations,
            converged: true,
            residual_norm: residual,
            potential_trace: trace,
        });
    }
    Err(Error::CalibrationInfeasible {
        iterations: opts.max_iterations,
        residual,
    })
}

/// Single Newton step from `lambda = 0`: `S_xx^-1 (target - xbar_B)`, with
/// the divide-by-N_B sample covariance.
pub fn one_step_lambda(x: &Covariates, target: &[f64]) -> Result<Vec<f64>> {
    check_inputs(x, target)?;
    let p = target.len();
    let z = centered(x, target);
    let eval = evaluate(&z, p, &vec![0.0; p]);
    let rhs = DVector::from_iterator(p, eval.gradient.iter().map(|g| -g));
    let step = solve_spd(&eval.hessian, &rhs, "big-sample covariance of x")?;
    Ok(step.iter().copied().collect())
}

/// `sum_i w_i y_i`
pub fn tilted_estimator(sol: &TiltingSolution, y: &[f64]) -> Result<f64> {
    if y.len() != sol.weights.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights but {} y values",
            sol.weights.len(),
            y.len()
        )));
    }
    Ok(sol.weights.iter().zip(y).map(|(w, y)| w * y).sum())
}

/// Linearization variance of the tilted mean without finite population
/// correction: `m/(m-1) sum_i w_i^2 e_i^2`, where `e` are residuals from
/// the weighted least-squares fit of `y` on `(1, x)` with weights `w`.
pub fn linearization_variance(sol: &TiltingSolution, x: &Covariates, y: &[f64]) -> Result<f64> {
    let w = sol.weights();
    if y.len() != w.len() || x.nrows() != w.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights, {} covariate rows and {} y values",
            w.len(),
            x.nrows(),
            y.len()
        )));
    }
    let m = y.len();
    if m < 2 {
        return Err(Error::InvalidInput("variance needs at least two units".into()));
    }
    let q = x.ncols() + 1;
    let mut xtwx = DMatrix::<f64>::zeros(q, q);
    let mut xtwy = DVector::<f64>::zeros(q);
    for ((row, &yi), &wi) in x.rows().zip(y).zip(w) {
        let g: Vec<f64> = std::iter::once(1.0).chain(row.iter().copied()).collect();
        for a in 0..q {
            xtwy[a] += wi * g[a] * yi;
            for b in 0..q {
                xtwx[(a, b)] += wi * g[a] * g[b];
            }
        }
    }
    let coef = solve_spd(&xtwx, &xtwy, "weighted regression for the linearization variance")?;
    let s: f64 = x
        .rows()
        .zip(y)
        .zip(w)
        .map(|((row, &yi), &wi)| {
            let fit = coef[0] + row.iter().zip(coef.iter().skip(1)).map(|(a, b)| a * b).sum::<f64>();
            (wi * (yi - fit)).powi(2)
        })
        .sum();
    let m = m as f64;
    Ok(m / (m - 1.0) * s)
}
