use bigsample::integration::{dr_estimator, ols_fit, rivers_estimator, rivers_impute, RiversOptions};
use bigsample::inverse_sampling::{second_phase_design, SamplingMethod};
use bigsample::io::{load_big_sample, load_probability_sample};
use bigsample::propensity::{fit_pseudo_mle, ps_estimator, sandwich_variance, PropensityOptions};
use bigsample::tilting::{linearization_variance, solve_calibration, tilted_estimator, TiltingOptions};
use bigsample::{BigDataSample, EstimateReport, Method, ProbabilitySample};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{CliError, CliResult, EstimateArgs, EstimateMethod};

/// Second-phase sampling fractions above this make the Hajek joint-inclusion approximation doubtful.
const HAJEK_FRACTION_WARNING: f64 = 0.1;

fn require<T: Clone>(value: &Option<T>, flag: &str, method: &str) -> CliResult<T> {
    value
        .clone()
        .ok_or_else(|| CliError::Usage(format!("`estimate {method}` requires {flag}")))
}

fn method_name(m: EstimateMethod) -> &'static str {
    match m {
        EstimateMethod::Tilt => "tilt",
        EstimateMethod::Invsample => "invsample",
        EstimateMethod::Ps => "ps",
        EstimateMethod::Dr => "dr",
        EstimateMethod::Rivers => "rivers",
    }
}

fn ps_columns(spec: &Option<String>, p: usize) -> CliResult<Vec<usize>> {
    let Some(spec) = spec else {
        return Ok((0..p).collect());
    };
    if spec.trim() == "none" {
        return Ok(Vec::new());
    }
    spec.split(',')
        .map(|s| match s.trim().parse::<usize>() {
            Ok(k) if (1..=p).contains(&k) => Ok(k - 1),
            _ => Err(CliError::Usage(format!(
                "--ps-columns entry `{s}` is not a covariate index in 1..={p}"
            ))),
        })
        .collect()
}

pub fn run(args: EstimateArgs) -> CliResult<()> {
    let name = method_name(args.method);
    // Flag requirements are checked before any file is read.
    let target = match args.method {
        EstimateMethod::Tilt | EstimateMethod::Invsample => Some(require(&args.target_means, "--target-means", name)?),
        _ => None,
    };
    let second_phase_n = match args.method {
        EstimateMethod::Invsample => Some(require(&args.n, "--n", name)?),
        _ => None,
    };
    let aux_path = match args.method {
        EstimateMethod::Ps | EstimateMethod::Dr | EstimateMethod::Rivers => {
            Some(require(&args.aux_sample, "--aux-sample", name)?)
        }
        _ => None,
    };
    if args.method == EstimateMethod::Dr {
        require(&args.population_size, "--population-size", name)?;
    }

    // Without a known N the big sample is loaded with N = unbounded; only
    // estimators that do not use N run in that case.
    let big = load_big_sample(&args.big, args.population_size.unwrap_or(usize::MAX))?;
    let aux = aux_path.map(load_probability_sample).transpose()?;

    let report = match args.method {
        EstimateMethod::Tilt => tilt(&big, &target.unwrap_or_default(), args.population_size)?,
        EstimateMethod::Invsample => invsample(
            &big,
            &target.unwrap_or_default(),
            second_phase_n.unwrap_or_default(),
            args.seed,
        )?,
        EstimateMethod::Ps => {
            let a = aux.as_ref().expect("checked above");
            ps(&big, a, &ps_columns(&args.ps_columns, a.x().ncols())?)?
        }
        EstimateMethod::Dr => {
            let a = aux.as_ref().expect("checked above");
            dr(
                &big,
                a,
                &ps_columns(&args.ps_columns, a.x().ncols())?,
                args.population_size.expect("checked above"),
            )?
        }
        EstimateMethod::Rivers => rivers(&big, aux.as_ref().expect("checked above"), args.population_size)?,
    };

    println!("method,theta_hat,se_hat,ci_low,ci_high");
    println!(
        "{name},{},{},{},{}",
        report.theta_hat,
        report.se_hat(),
        report.ci_low,
        report.ci_high
    );
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn check_target(big: &BigDataSample, target: &[f64]) -> CliResult<()> {
    if target.len() != big.x().ncols() {
        return Err(CliError::Usage(format!(
            "--target-means has {} values but the big sample has {} covariates",
            target.len(),
            big.x().ncols()
        )));
    }
    Ok(())
}

fn tilt(big: &BigDataSample, target: &[f64], population_size: Option<usize>) -> CliResult<EstimateReport> {
    check_target(big, target)?;
    let sol = solve_calibration(big.x(), target, &TiltingOptions::default())?;
    let theta = tilted_estimator(&sol, big.y())?;
    let fpc = population_size.map_or(1.0, |_| 1.0 - big.fraction());
    let var = fpc * linearization_variance(&sol, big.x(), big.y())?;
    let mut report = EstimateReport::new(Method::Calibration, theta, var)?;
    if population_size.is_none() {
        report = report.with_warning("population size unknown; variance has no finite population correction");
    }
    Ok(report)
}

fn invsample(big: &BigDataSample, target: &[f64], n: usize, seed: u64) -> CliResult<EstimateReport> {
    check_target(big, target)?;
    let sol = solve_calibration(big.x(), target, &TiltingOptions::default())?;
    let design = second_phase_design(&sol, n, SamplingMethod::SystematicPps)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample = design.draw(&mut rng);
    let theta = sample.ht_mean(big.y())?;
    let var = sample.ht_variance(big.y())?;
    let mut report = EstimateReport::new(Method::InverseSampling, theta, var)?;
    let fraction = n as f64 / big.sample_size() as f64;
    if fraction > HAJEK_FRACTION_WARNING {
        report = report.with_warning(format!(
            "n / N_B = {fraction:.3} exceeds {HAJEK_FRACTION_WARNING}; the Hajek joint-inclusion approximation may be poor"
        ));
    }
    Ok(report)
}

fn ps(big: &BigDataSample, a: &ProbabilitySample, columns: &[usize]) -> CliResult<EstimateReport> {
    let fit = fit_pseudo_mle(a, columns, &PropensityOptions::default())?;
    let est = ps_estimator(big, &fit)?;
    let sw = sandwich_variance(est.theta, &fit, a, big)?;
    let mut report = EstimateReport::new(Method::PropensityScore, est.theta, sw.var_theta)?;
    if sw.clamped > 0 {
        report = report.with_warning(format!("{} fitted propensities clamped into [1e-12, 1 - 1e-12]", sw.clamped));
    }
    if sw.covariance_dropped {
        report = report.with_warning(
            "no unit of the auxiliary sample with delta = 1 matched the big sample by id; covariance term dropped",
        );
    } else if sw.unmatched_overlap > 0 {
        report = report.with_warning(format!(
            "{} auxiliary units with delta = 1 were not found in the big sample",
            sw.unmatched_overlap
        ));
    }
    if sw.clamped_negative {
        report = report.with_warning("negative sandwich variance set to zero");
    }
    Ok(report)
}

fn dr(big: &BigDataSample, a: &ProbabilitySample, columns: &[usize], n_pop: usize) -> CliResult<EstimateReport> {
    let fit = fit_pseudo_mle(a, columns, &PropensityOptions::default())?;
    let reg = ols_fit(big)?;
    let r = dr_estimator(a, big, &fit, &reg, n_pop)?;
    let mut report = EstimateReport::new(Method::DoublyRobust, r.theta, r.variance)?;
    if r.clamped > 0 {
        report = report.with_warning(format!("{} fitted propensities clamped into [1e-12, 1 - 1e-12]", r.clamped));
    }
    Ok(report)
}

fn rivers(big: &BigDataSample, a: &ProbabilitySample, population_size: Option<usize>) -> CliResult<EstimateReport> {
    let imputed = rivers_impute(a, big, &RiversOptions::default())?;
    let (n_pop, estimated) = match population_size {
        Some(n) => (n, false),
        None => (a.weights().iter().sum::<f64>().round() as usize, true),
    };
    let mut report = rivers_estimator(a, &imputed, n_pop)?;
    if estimated {
        report = report.with_warning(format!("population size not given; using sum of design weights N = {n_pop}"));
    }
    Ok(report)
}
