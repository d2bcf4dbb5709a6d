//! Domain types shared by every estimator, and the exact error
//! decomposition of a big-data sample mean.
//!
//! Membership of a population unit in the big-data sample is never stored as
//! an `N`-vector: it is derived from id containment, so a [`BigDataSample`]
//! can exist on its own (estimation mode) while a [`FinitePopulation`] is only
//! needed when the truth is known (simulation mode).

use std::collections::{HashMap, HashSet};
use std::fmt;

use crate::error::{Error, Result};

/// Two-sided 97.5% standard normal quantile used for every Wald interval.
pub const Z_975: f64 = 1.959964;

/// Dense row-major covariate matrix (`nrows x ncols`).
#[derive(Debug, Clone, PartialEq)]
pub struct Covariates {
    data: Vec<f64>,
    nrows: usize,
    ncols: usize,
}

impl Covariates {
    pub fn from_row_major(data: Vec<f64>, nrows: usize, ncols: usize) -> Result<Self> {
        if data.len() != nrows * ncols {
            return Err(Error::DimensionMismatch(format!(
                "{} values cannot fill a {nrows}x{ncols} covariate matrix",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite covariate in row {}",
                pos / ncols.max(1)
            )));
        }
        Ok(Self { data, nrows, ncols })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let ncols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * ncols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != ncols {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} covariates, expected {ncols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::from_row_major(data, rows.len(), ncols)
    }

    /// Builds a matrix from equally long columns.
    pub fn from_columns(columns: &[&[f64]]) -> Result<Self> {
        let nrows = columns.first().map_or(0, |c| c.len());
        if columns.iter().any(|c| c.len() != nrows) {
            return Err(Error::DimensionMismatch("columns differ in length".into()));
        }
        let ncols = columns.len();
        let mut data = vec![0.0; nrows * ncols];
        for (j, col) in columns.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                data[i * ncols + j] = v;
            }
        }
        Self::from_row_major(data, nrows, ncols)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        (0..self.nrows).map(move |i| self.row(i))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut means = vec![0.0; self.ncols];
        for r in self.rows() {
            for (m, v) in means.iter_mut().zip(r) {
                *m += v;
            }
        }
        let n = self.nrows as f64;
        means.iter_mut().for_each(|m| *m /= n);
        means
    }

    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.ncols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            data,
            nrows: indices.len(),
            ncols: self.ncols,
        }
    }

    pub fn select_columns(&self, columns: &[usize]) -> Result<Self> {
        if let Some(&bad) = columns.iter().find(|&&c| c >= self.ncols) {
            return Err(Error::DimensionMismatch(format!(
                "covariate column {bad} does not exist (p = {})",
                self.ncols
            )));
        }
        let mut data = Vec::with_capacity(self.nrows * columns.len());
        for r in self.rows() {
            data.extend(columns.iter().map(|&c| r[c]));
        }
        Ok(Self {
            data,
            nrows: self.nrows,
            ncols: columns.len(),
        })
    }
}

fn check_unique(ids: &[u64]) -> Result<()> {
    let mut seen = HashSet::with_capacity(ids.len());
    for &id in ids {
        if !seen.insert(id) {
            return Err(Error::InvalidInput(format!("duplicate unit id {id}")));
        }
    }
    Ok(())
}

fn check_finite(name: &str, v: &[f64]) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(Error::InvalidInput(format!("non-finite {name} at position {i}"))),
        None => Ok(()),
    }
}

/// Full finite population `U` with covariates and study variable.
#[derive(Debug, Clone, PartialEq)]
pub struct FinitePopulation {
    ids: Vec<u64>,
    x: Covariates,
    y: Vec<f64>,
}

impl FinitePopulation {
    pub fn new(ids: Vec<u64>, x: Covariates, y: Vec<f64>) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::InvalidInput("population must have N >= 1 units".into()));
        }
        if x.nrows() != ids.len() || y.len() != ids.len() {
            return Err(Error::DimensionMismatch(format!(
                "population has {} ids, {} covariate rows and {} y values",
                ids.len(),
                x.nrows(),
                y.len()
            )));
        }
        check_unique(&ids)?;
        check_finite("y", &y)?;
        Ok(Self { ids, x, y })
    }

    /// Population with ids `1..=N`.
    pub fn with_sequential_ids(x: Covariates, y: Vec<f64>) -> Result<Self> {
        let ids = (1..=y.len() as u64).collect();
        Self::new(ids, x, y)
    }

    pub fn size(&self) -> usize {
        self.ids.len()
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn x(&self) -> &Covariates {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Big-data sample made of the units at the given row positions.
    pub fn subsample(&self, rows: &[usize]) -> Result<BigDataSample> {
        BigDataSample::new(
            rows.iter().map(|&i| self.ids[i]).collect(),
            self.x.select_rows(rows),
            rows.iter().map(|&i| self.y[i]).collect(),
            self.size(),
        )
    }
}

/// The self-selected big-data sample `B`, with the known population size `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct BigDataSample {
    ids: Vec<u64>,
    x: Covariates,
    y: Vec<f64>,
    population_size: usize,
}

impl BigDataSample {
    pub fn new(ids: Vec<u64>, x: Covariates, y: Vec<f64>, population_size: usize) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::InvalidInput("big-data sample must have N_B >= 1 units".into()));
        }
        if x.nrows() != ids.len() || y.len() != ids.len() {
            return Err(Error::DimensionMismatch(format!(
                "big-data sample has {} ids, {} covariate rows and {} y values",
                ids.len(),
                x.nrows(),
                y.len()
            )));
        }
        if ids.len() > population_size {
            return Err(Error::InvalidInput(format!(
                "big-data sample size N_B = {} exceeds population size N = {population_size}",
                ids.len()
            )));
        }
        check_unique(&ids)?;
        check_finite("y", &y)?;
        Ok(Self {
            ids,
            x,
            y,
            population_size,
        })
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn x(&self) -> &Covariates {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// `N`
    pub fn population_size(&self) -> usize {
        self.population_size
    }

    /// `N_B`
    pub fn sample_size(&self) -> usize {
        self.ids.len()
    }

    /// `f_B = N_B / N`
    pub fn fraction(&self) -> f64 {
        self.sample_size() as f64 / self.population_size as f64
    }

    pub fn mean(&self) -> f64 {
        mean(&self.y)
    }

    pub fn with_y(&self, y: Vec<f64>) -> Result<Self> {
        Self::new(self.ids.clone(), self.x.clone(), y, self.population_size)
    }
}

/// The independent probability sample `A`: covariates, design weights and
/// observed big-data membership. `y` is present only in simulation mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilitySample {
    ids: Vec<u64>,
    x: Covariates,
    d: Vec<f64>,
    delta: Vec<bool>,
    y: Option<Vec<f64>>,
}

impl ProbabilitySample {
    pub fn new(
        ids: Vec<u64>,
        x: Covariates,
        d: Vec<f64>,
        delta: Vec<bool>,
        y: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = ids.len();
        if n == 0 {
            return Err(Error::InvalidInput("probability sample must have n >= 1 units".into()));
        }
        if x.nrows() != n || d.len() != n || delta.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "probability sample has {n} ids, {} covariate rows, {} weights, {} indicators",
                x.nrows(),
                d.len(),
                delta.len()
            )));
        }
        if let Some(i) = d.iter().position(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidInput(format!(
                "design weight d = {} at position {i} is not positive",
                d[i]
            )));
        }
        if let Some(y) = &y {
            if y.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "probability sample has {n} units but {} y values",
                    y.len()
                )));
            }
            check_finite("y", y)?;
        }
        check_unique(&ids)?;
        Ok(Self { ids, x, d, delta, y })
    }

    pub fn size(&self) -> usize {
        self.ids.len()
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn x(&self) -> &Covariates {
        &self.x
    }

    pub fn weights(&self) -> &[f64] {
        &self.d
    }

    pub fn delta(&self) -> &[bool] {
        &self.delta
    }

    pub fn y(&self) -> Option<&[f64]> {
        self.y.as_deref()
    }
}

/// Estimation method tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Naive,
    Calibration,
    InverseSampling,
    PropensityScore,
    DoublyRobust,
    Rivers,
    HorvitzThompsonA,
}

impl Method {
    /// Short machine-readable tag.
    pub fn tag(self) -> &'static str {
        match self {
            Method::Naive => "naive",
            Method::Calibration => "calibration",
            Method::InverseSampling => "invsample",
            Method::PropensityScore => "ps",
            Method::DoublyRobust => "dr",
            Method::Rivers => "rivers",
            Method::HorvitzThompsonA => "ht_a",
        }
    }

    /// Label used in simulation tables.
    pub fn label(self) -> &'static str {
        match self {
            Method::Naive => "Naive",
            Method::Calibration => "Calibration",
            Method::InverseSampling => "Proposed",
            Method::PropensityScore => "PS",
            Method::DoublyRobust => "DR",
            Method::Rivers => "Rivers",
            Method::HorvitzThompsonA => "HT-A",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Point estimate, variance estimate and Wald 95% interval.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub method: Method,
    pub theta_hat: f64,
    pub var_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub warnings: Vec<String>,
}

impl EstimateReport {
    pub fn new(method: Method, theta_hat: f64, var_hat: f64) -> Result<Self> {
        if !theta_hat.is_finite() || !var_hat.is_finite() || var_hat < 0.0 {
            return Err(Error::InvalidInput(format!(
                "{method} estimate {theta_hat} with variance {var_hat} is not reportable"
            )));
        }
        let half = Z_975 * var_hat.sqrt();
        Ok(Self {
            method,
            theta_hat,
            var_hat,
            ci_low: theta_hat - half,
            ci_high: theta_hat + half,
            warnings: Vec::new(),
        })
    }

    pub fn with_warning(mut self, warning: impl Into<String>) -> Self {
        self.warnings.push(warning.into());
        self
    }

    pub fn se_hat(&self) -> f64 {
        self.var_hat.sqrt()
    }

    pub fn covers(&self, truth: f64) -> bool {
        (self.theta_hat - truth).abs() <= Z_975 * self.se_hat()
    }
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample variance with the `n - 1` divisor.
pub(crate) fn sample_variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() as f64 - 1.0)
}

/// `N^-1 sum transform(y_i)`; the identity when `transform` is `None`.
pub fn population_mean(pop: &FinitePopulation, transform: Option<&dyn Fn(f64) -> f64>) -> f64 {
    match transform {
        None => mean(pop.y()),
        Some(f) => pop.y().iter().map(|&y| f(y)).sum::<f64>() / pop.size() as f64,
    }
}

/// `I(y < threshold)` as a real-valued transform.
pub fn indicator_below(threshold: f64) -> impl Fn(f64) -> f64 {
    move |y| if y < threshold { 1.0 } else { 0.0 }
}

/// Correlation between membership and the study variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Correlation {
    Defined(f64),
    /// `f_B = 1` or `sigma^2 = 0`: Var(delta) Var(y) vanishes.
    Undefined,
}

impl Correlation {
    pub fn value(self) -> Option<f64> {
        match self {
            Correlation::Defined(c) => Some(c),
            Correlation::Undefined => None,
        }
    }
}

/// Exact decomposition of the realized error of the big-data mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorDecomposition {
    /// `Ybar_B - Ybar_N`
    pub error: f64,
    /// `N^-1 sum (delta_i - f_B)(y_i - Ybar_N)`
    pub cov_delta_y: f64,
    pub corr_delta_y: Correlation,
    pub f_b: f64,
    /// Population variance, divide-by-N.
    pub sigma2: f64,
}

impl ErrorDecomposition {
    /// `cov / f_B`, which equals `error` identically.
    pub fn error_from_covariance(&self) -> f64 {
        self.cov_delta_y / self.f_b
    }

    /// `corr^2 (1/f_B - 1) sigma^2`, which equals `error^2` identically.
    pub fn squared_error_from_ddi(&self) -> Option<f64> {
        self.corr_delta_y
            .value()
            .map(|c| c * c * (1.0 / self.f_b - 1.0) * self.sigma2)
    }
}

/// Decomposes `Ybar_B - Ybar_N` into `Cov(delta, y) / f_B` and the data
/// defect form. `big` must be a subset of `pop` by id with matching `y`.
pub fn error_decomposition(pop: &FinitePopulation, big: &BigDataSample) -> Result<ErrorDecomposition> {
    if big.population_size() != pop.size() {
        return Err(Error::InvalidInput(format!(
            "big-data sample declares N = {} but the population has {} units",
            big.population_size(),
            pop.size()
        )));
    }
    let index: HashMap<u64, usize> = pop.ids().iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let mut member = vec![false; pop.size()];
    for (&id, &yb) in big.ids().iter().zip(big.y()) {
        let &i = index.get(&id).ok_or_else(|| {
            Error::InvalidInput(format!("big-data unit {id} is not in the population"))
        })?;
        if yb != pop.y()[i] {
            return Err(Error::InvalidInput(format!(
                "unit {id} has y = {yb} in the big-data sample but {} in the population",
                pop.y()[i]
            )));
        }
        member[i] = true;
    }

    let n = pop.size() as f64;
    let f_b = big.fraction();
    let y_bar_n = mean(pop.y());
    let y_bar_b = big.mean();
    let cov_delta_y = pop
        .y()
        .iter()
        .zip(&member)
        .map(|(&y, &m)| (f64::from(u8::from(m)) - f_b) * (y - y_bar_n))
        .sum::<f64>()
        / n;
    let sigma2 = pop.y().iter().map(|&y| (y - y_bar_n).powi(2)).sum::<f64>() / n;
    let var_delta = f_b * (1.0 - f_b);
    let corr_delta_y = if var_delta > 0.0 && sigma2 > 0.0 {
        Correlation::Defined(cov_delta_y / (var_delta * sigma2).sqrt())
    } else {
        Correlation::Undefined
    };
    Ok(ErrorDecomposition {
        error: y_bar_b - y_bar_n,
        cov_delta_y,
        corr_delta_y,
        f_b,
        sigma2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pop_1d(y: &[f64]) -> FinitePopulation {
        let x = Covariates::from_columns(&[y]).unwrap();
        FinitePopulation::with_sequential_ids(x, y.to_vec()).unwrap()
    }

    #[test]
    fn mean_and_indicator() {
        let pop = pop_1d(&[1.0, 2.0, 3.0]);
        assert_eq!(population_mean(&pop, None), 2.0);
        let pop = pop_1d(&[5.0, 5.0]);
        let below6 = indicator_below(6.0);
        assert_eq!(population_mean(&pop, Some(&below6)), 1.0);
    }

    #[test]
    fn decomposition_four_units() {
        let pop = pop_1d(&[1.0, 2.0, 3.0, 4.0]);
        let big = pop.subsample(&[2, 3]).unwrap();
        let dec = error_decomposition(&pop, &big).unwrap();
        assert!((dec.error - 1.0).abs() < 1e-15);
        assert!((dec.cov_delta_y - 0.5).abs() < 1e-15);
        assert!((dec.error_from_covariance() - 1.0).abs() < 1e-15);
        let sq = dec.squared_error_from_ddi().unwrap();
        assert!((sq - 1.0).abs() < 1e-12);
    }

    #[test]
    fn census_has_zero_error_and_undefined_corr() {
        let pop = pop_1d(&[1.0, 4.0, 9.0]);
        let big = pop.subsample(&[0, 1, 2]).unwrap();
        let dec = error_decomposition(&pop, &big).unwrap();
        assert_eq!(dec.error, 0.0);
        assert!(dec.cov_delta_y.abs() < 1e-15);
        assert_eq!(dec.corr_delta_y, Correlation::Undefined);
    }

    #[test]
    fn rejects_foreign_units_and_size_conflicts() {
        let pop = pop_1d(&[1.0, 2.0]);
        let x = Covariates::from_rows(&[[1.0]]).unwrap();
        let stranger = BigDataSample::new(vec![99], x.clone(), vec![1.0], 2).unwrap();
        assert!(error_decomposition(&pop, &stranger).is_err());
        let wrong_n = BigDataSample::new(vec![1], x, vec![1.0], 5).unwrap();
        assert!(error_decomposition(&pop, &wrong_n).is_err());
    }

    #[test]
    fn type_invariants() {
        let x = Covariates::from_rows(&[[0.0], [1.0]]).unwrap();
        assert!(BigDataSample::new(vec![1, 1], x.clone(), vec![0.0, 1.0], 3).is_err());
        assert!(BigDataSample::new(vec![1, 2], x.clone(), vec![0.0, 1.0], 1).is_err());
        assert!(ProbabilitySample::new(vec![1, 2], x.clone(), vec![1.0, -1.0], vec![true, false], None).is_err());
        assert!(ProbabilitySample::new(vec![1, 2], x, vec![1.0, 2.0], vec![true, false], None).is_ok());
        assert!(Covariates::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn report_interval() {
        let r = EstimateReport::new(Method::Naive, 1.0, 4.0).unwrap();
        assert!((r.ci_low - (1.0 - 2.0 * Z_975)).abs() < 1e-15);
        assert!((r.ci_high - (1.0 + 2.0 * Z_975)).abs() < 1e-15);
        assert!(r.covers(1.0 + 3.9));
        assert!(EstimateReport::new(Method::Naive, 1.0, -1.0).is_err());
    }
}
