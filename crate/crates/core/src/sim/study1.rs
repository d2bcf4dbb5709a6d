//! Inverse sampling against naive and calibrated subsampling of a
//! self-selected big sample.
//!
//! Data generating model, per unit: `x ~ Exp(1)`, `e | x ~ N(0, x^2)`,
//! `y = 5 + 3x + e`, and big-data membership `delta ~ Ber(p)` with
//! `logit p = phi (x - 2)`. Parameters are `Y_N = mean(y)` and
//! `P_N = mean(I(y < 6))`.
//!
//! Draw order inside a replication: `(x_i, e_i)` for `i = 1..N`, then
//! `delta_i` for `i = 1..N`, then the simple random subsample of `B`, then
//! the systematic PPS second-phase sample.

use rand::Rng;

use crate::error::{Error, Result};
use crate::inverse_sampling::{second_phase_design, SamplingMethod};
use crate::population::{mean, sample_variance, BigDataSample, Covariates, FinitePopulation, Method};
use crate::propensity::expit;
use crate::sim::metrics::{summarize, Draw};
use crate::sim::rng::{bernoulli, exponential, replication_rng, srs_indices, standard_normal, StreamStudy};
use crate::sim::{is_replication_failure, run_indexed, MetricsRow, RunOptions, StudyResult};
use crate::tilting::{linearization_variance, solve_calibration, tilted_estimator, TiltingOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Parameter {
    /// `Y_N`, the population mean of `y`.
    Mean,
    /// `P_N`, the population proportion with `y < 6`.
    BelowSix,
}

impl Parameter {
    pub fn tag(self) -> &'static str {
        match self {
            Parameter::Mean => "Y_N",
            Parameter::BelowSix => "P_N",
        }
    }

    fn apply(self, y: f64) -> f64 {
        match self {
            Parameter::Mean => y,
            Parameter::BelowSix => f64::from(u8::from(y < 6.0)),
        }
    }
}

impl std::str::FromStr for Parameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "Y_N" | "mean" => Ok(Parameter::Mean),
            "P_N" | "prop" => Ok(Parameter::BelowSix),
            other => Err(Error::InvalidInput(format!("unknown parameter `{other}` (use Y_N or P_N)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Study1Config {
    /// `N`
    pub population_size: usize,
    /// Selection coefficient `phi`.
    pub phi: f64,
    /// Second-phase (and subsample) size `n`.
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub parameters: Vec<Parameter>,
}

impl Default for Study1Config {
    fn default() -> Self {
        Self {
            population_size: 100_000,
            phi: -0.2,
            n: 500,
            reps: 2_000,
            seed: 1,
            parameters: vec![Parameter::Mean, Parameter::BelowSix],
        }
    }
}

impl Study1Config {
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
        if !self.phi.is_finite() {
            return Err(Error::InvalidInput("phi must be finite".into()));
        }
        if self.parameters.is_empty() {
            return Err(Error::InvalidInput("no parameters selected".into()));
        }
        Ok(())
    }
}

pub const METHODS: [Method; 3] = [Method::Naive, Method::Calibration, Method::InverseSampling];

pub fn gen_population_study1<R: Rng + ?Sized>(population_size: usize, rng: &mut R) -> Result<FinitePopulation> {
    let mut x = Vec::with_capacity(population_size);
    let mut y = Vec::with_capacity(population_size);
    for _ in 0..population_size {
        let xi = exponential(rng);
        let e = xi * standard_normal(rng);
        x.push(xi);
        y.push(5.0 + 3.0 * xi + e);
    }
    FinitePopulation::with_sequential_ids(Covariates::from_row_major(x, population_size, 1)?, y)
}

/// Bernoulli self-selection with `logit p = phi (x - 2)`; an empty draw is retried once.
pub fn gen_big_study1<R: Rng + ?Sized>(pop: &FinitePopulation, phi: f64, rng: &mut R) -> Result<BigDataSample> {
    for _ in 0..2 {
        let rows: Vec<usize> = (0..pop.size())
            .filter(|&i| bernoulli(rng, expit(phi * (pop.x().row(i)[0] - 2.0))))
            .collect();
        if !rows.is_empty() {
            return pop.subsample(&rows);
        }
    }
    Err(Error::InvalidInput("big-data sample came out empty twice".into()))
}

/// Per-replication output: truths and one draw per (parameter, method).
#[derive(Debug, Clone, PartialEq)]
pub struct Study1Replication {
    pub big_size: usize,
    /// Indexed like `cfg.parameters`, then like [`METHODS`].
    pub draws: Vec<[Draw; 3]>,
}

pub fn run_study1_replication(cfg: &Study1Config, replication: usize) -> Result<Study1Replication> {
    let mut rng = replication_rng(cfg.seed, StreamStudy::Study1, replication);
    let pop = gen_population_study1(cfg.population_size, &mut rng)?;
    let big = gen_big_study1(&pop, cfg.phi, &mut rng)?;
    let nb = big.sample_size();
    if cfg.n > nb {
        return Err(Error::InfeasibleSampleSize {
            n: cfg.n,
            max_feasible_n: nb,
        });
    }
    let target = pop.x().column_means();
    let opts = TiltingOptions::default();

    let srs = srs_indices(&mut rng, nb, cfg.n);
    let srs_x = big.x().select_rows(&srs);
    let calibrated = solve_calibration(&srs_x, &target, &opts)?;
    let tilt = solve_calibration(big.x(), &target, &opts)?;
    let design = second_phase_design(&tilt, cfg.n, SamplingMethod::SystematicPps)?;
    let second = design.draw(&mut rng);

    let n = cfg.n as f64;
    let mut draws = Vec::with_capacity(cfg.parameters.len());
    for &param in &cfg.parameters {
        let truth = mean(&pop.y().iter().map(|&y| param.apply(y)).collect::<Vec<_>>());
        let y_big: Vec<f64> = big.y().iter().map(|&y| param.apply(y)).collect();
        let y_srs: Vec<f64> = srs.iter().map(|&i| y_big[i]).collect();

        let naive = Draw {
            estimate: mean(&y_srs),
            variance: (1.0 - n / nb as f64) * sample_variance(&y_srs) / n,
            truth,
        };
        let calibration = Draw {
            estimate: tilted_estimator(&calibrated, &y_srs)?,
            variance: (1.0 - n / nb as f64) * linearization_variance(&calibrated, &srs_x, &y_srs)?,
            truth,
        };
        let proposed = Draw {
            estimate: second.ht_mean(&y_big)?,
            variance: second.ht_variance(&y_big)?,
            truth,
        };
        draws.push([naive, calibration, proposed]);
    }
    Ok(Study1Replication { big_size: nb, draws })
}

pub fn run_study1(cfg: &Study1Config, opts: &RunOptions) -> Result<StudyResult> {
    cfg.validate()?;
    let outcomes = run_indexed(cfg.reps, opts, |r| run_study1_replication(cfg, r))?;
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
    let mut rows = Vec::new();
    for (p, &param) in cfg.parameters.iter().enumerate() {
        for (m, &method) in METHODS.iter().enumerate() {
            let draws: Vec<Draw> = ok.iter().map(|rep| rep.draws[p][m]).collect();
            rows.push(MetricsRow {
                study: "study1".into(),
                scenario_or_phi: format!("{}", cfg.phi),
                parameter: param.tag().into(),
                n: cfg.n,
                method,
                summary: summarize(&draws),
                failed_reps: failures.len(),
            });
        }
    }
    Ok(StudyResult { rows, failures })
}
