//! Data integration with a small probability sample.
//!
//! Per unit: `x1 ~ N(1, 1)`, `x2 ~ Exp(1)`, `eps ~ N(0, 1)`, independent.
//!
//! | scenario | outcome                              | big-data propensity                   |
//! |----------|--------------------------------------|---------------------------------------|
//! | I        | `y = 1 + x1 + x2 + eps`              | `logit p = x2`                        |
//! | II       | `y = 1 + x1 + x2 + eps`              | `logit p = -0.5 + 0.5 (x2 - 2)^2`     |
//! | III      | `y = 0.5 (x1 - 1.5)^2 + x2 + eps`    | `logit p = x2`                        |
//!
//! `A` is a simple random sample of size `n` from the population with
//! `d = N / n`. The working propensity model is `logit p = l0 + l1 x2` and
//! the working outcome model is linear in `(x1, x2)` in every scenario.
//!
//! Draw order inside a replication: `(x1_i, x2_i, eps_i)` for `i = 1..N`,
//! then `delta_i` for `i = 1..N`, then the sample `A`.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::integration::{dr_estimator, ols_fit, rivers_estimator, rivers_impute, RiversOptions};
use crate::population::{mean, sample_variance, BigDataSample, Covariates, FinitePopulation, Method, ProbabilitySample};
use crate::propensity::{expit, fit_pseudo_mle, ps_estimator, sandwich_variance, PropensityOptions};
use crate::sim::metrics::{summarize, Draw};
use crate::sim::rng::{bernoulli, exponential, replication_rng, srs_indices, standard_normal, StreamStudy};
use crate::sim::{is_replication_failure, run_indexed, MetricsRow, RunOptions, StudyResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    I,
    II,
    III,
}

impl Scenario {
    fn outcome(self, x1: f64, x2: f64, eps: f64) -> f64 {
        match self {
            Scenario::I | Scenario::II => 1.0 + x1 + x2 + eps,
            Scenario::III => 0.5 * (x1 - 1.5).powi(2) + x2 + eps,
        }
    }

    fn propensity(self, x2: f64) -> f64 {
        match self {
            Scenario::I | Scenario::III => expit(x2),
            Scenario::II => expit(-0.5 + 0.5 * (x2 - 2.0).powi(2)),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::I => "I",
            Scenario::II => "II",
            Scenario::III => "III",
        })
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "I" | "1" => Ok(Scenario::I),
            "II" | "2" => Ok(Scenario::II),
            "III" | "3" => Ok(Scenario::III),
            other => Err(Error::InvalidInput(format!("unknown scenario `{other}` (use I, II or III)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Study2Config {
    /// `N`
    pub population_size: usize,
    /// Size of the probability sample `A`.
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub scenario: Scenario,
}

impl Default for Study2Config {
    fn default() -> Self {
        Self {
            population_size: 100_000,
            n: 500,
            reps: 500,
            seed: 1,
            scenario: Scenario::I,
        }
    }
}

impl Study2Config {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.population_size < self.n {
            return Err(Error::InvalidInput(format!(
                "need N >= n >= 2, got N = {} and n = {}",
                self.population_size, self.n
            )));
        }
        if self.reps < 2 {
            return Err(Error::InvalidInput("need at least 2 replications".into()));
        }
        Ok(())
    }
}

pub const METHODS: [Method; 4] = [Method::Naive, Method::Rivers, Method::PropensityScore, Method::DoublyRobust];

/// Covariate column of `x2`, the only regressor of the working propensity model.
const X2: usize = 1;

pub fn gen_population_study2<R: Rng + ?Sized>(
    scenario: Scenario,
    population_size: usize,
    rng: &mut R,
) -> Result<FinitePopulation> {
    let mut x = Vec::with_capacity(2 * population_size);
    let mut y = Vec::with_capacity(population_size);
    for _ in 0..population_size {
        let x1 = 1.0 + standard_normal(rng);
        let x2 = exponential(rng);
        let eps = standard_normal(rng);
        x.extend([x1, x2]);
        y.push(scenario.outcome(x1, x2, eps));
    }
    FinitePopulation::with_sequential_ids(Covariates::from_row_major(x, population_size, 2)?, y)
}

/// Membership flags by population row, and the resulting big-data sample.
pub fn gen_big_study2<R: Rng + ?Sized>(
    pop: &FinitePopulation,
    scenario: Scenario,
    rng: &mut R,
) -> Result<(Vec<bool>, BigDataSample)> {
    let member: Vec<bool> = pop
        .x()
        .rows()
        .map(|row| bernoulli(rng, scenario.propensity(row[X2])))
        .collect();
    let rows: Vec<usize> = (0..pop.size()).filter(|&i| member[i]).collect();
    let big = pop.subsample(&rows)?;
    Ok((member, big))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Study2Replication {
    pub big_size: usize,
    /// Indexed like [`METHODS`].
    pub draws: [Draw; 4],
    /// Sandwich variance components were adjusted (clamping, dropped covariance).
    pub sandwich_adjusted: bool,
}

pub fn run_study2_replication(cfg: &Study2Config, replication: usize) -> Result<Study2Replication> {
    let mut rng = replication_rng(cfg.seed, StreamStudy::Study2, replication);
    let pop = gen_population_study2(cfg.scenario, cfg.population_size, &mut rng)?;
    let (member, big) = gen_big_study2(&pop, cfg.scenario, &mut rng)?;
    let rows = srs_indices(&mut rng, pop.size(), cfg.n);
    let n_pop = pop.size();
    let a = ProbabilitySample::new(
        rows.iter().map(|&i| pop.ids()[i]).collect(),
        pop.x().select_rows(&rows),
        vec![n_pop as f64 / cfg.n as f64; cfg.n],
        rows.iter().map(|&i| member[i]).collect(),
        Some(rows.iter().map(|&i| pop.y()[i]).collect()),
    )?;
    let truth = mean(pop.y());
    let nb = big.sample_size() as f64;

    let naive = Draw {
        estimate: big.mean(),
        variance: sample_variance(big.y()) / nb,
        truth,
    };

    let imputed = rivers_impute(&a, &big, &RiversOptions::default())?;
    let rivers = rivers_estimator(&a, &imputed, n_pop)?;

    let fit = fit_pseudo_mle(&a, &[X2], &PropensityOptions::default())?;
    let ps = ps_estimator(&big, &fit)?;
    let sandwich = sandwich_variance(ps.theta, &fit, &a, &big)?;

    let reg = ols_fit(&big)?;
    let dr = dr_estimator(&a, &big, &fit, &reg, n_pop)?;

    Ok(Study2Replication {
        big_size: big.sample_size(),
        draws: [
            naive,
            Draw {
                estimate: rivers.theta_hat,
                variance: rivers.var_hat,
                truth,
            },
            Draw {
                estimate: ps.theta,
                variance: sandwich.var_theta,
                truth,
            },
            Draw {
                estimate: dr.theta,
                variance: dr.variance,
                truth,
            },
        ],
        sandwich_adjusted: sandwich.clamped_negative || sandwich.covariance_dropped || sandwich.clamped > 0,
    })
}

pub fn run_study2(cfg: &Study2Config, opts: &RunOptions) -> Result<StudyResult> {
    cfg.validate()?;
    let outcomes = run_indexed(cfg.reps, opts, |r| run_study2_replication(cfg, r))?;
    let mut ok = Vec::with_capacity(cfg.reps);
    let mut failures = Vec::new();
    for (r, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(rep) => ok.push(rep),
            Err(e) if is_replication_failure(&e) => failures.push((r, e.to_string())),
            Err(e) => return Err(e),
        }
    }
    if ok.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "only {} of {} replications succeeded; first failure: {}",
            ok.len(),
            cfg.reps,
            failures.first().map(|f| f.1.as_str()).unwrap_or("none")
        )));
    }
    let rows = METHODS
        .iter()
        .enumerate()
        .map(|(m, &method)| {
            let draws: Vec<Draw> = ok.iter().map(|rep| rep.draws[m]).collect();
            MetricsRow {
                study: "study2".into(),
                scenario_or_phi: cfg.scenario.to_string(),
                parameter: "Y_N".into(),
                n: cfg.n,
                method,
                summary: summarize(&draws),
                failed_reps: failures.len(),
            }
        })
        .collect();
    Ok(StudyResult { rows, failures })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_truths_and_rates() {
        for (scenario, truth) in [(Scenario::I, 3.0), (Scenario::II, 3.0), (Scenario::III, 1.625)] {
            let mut rng = replication_rng(21, StreamStudy::Study2, 0);
            let pop = gen_population_study2(scenario, 100_000, &mut rng).unwrap();
            let (_, big) = gen_big_study2(&pop, scenario, &mut rng).unwrap();
            assert!((mean(pop.y()) - truth).abs() < 0.03, "{scenario}: {}", mean(pop.y()));
            assert!((big.fraction() - 0.6).abs() < 0.1, "{scenario}: {}", big.fraction());
        }
    }

    #[test]
    fn scenario_parsing() {
        assert_eq!("II".parse::<Scenario>().unwrap(), Scenario::II);
        assert!("IV".parse::<Scenario>().is_err());
    }

    #[test]
    fn small_run_shapes() {
        let cfg = Study2Config {
            population_size: 5_000,
            n: 200,
            reps: 4,
            seed: 9,
            scenario: Scenario::III,
        };
        let res = run_study2(&cfg, &RunOptions::default()).unwrap();
        assert_eq!(res.rows.len(), 4);
        assert_eq!(res.rows[3].method, Method::DoublyRobust);
    }
}
