//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each export returns a JSON string; errors come back as plain messages.
//! Seeds are 32-bit so they fit a JavaScript number.

use bigsample::inverse_sampling::max_feasible_n;
use bigsample::population::population_mean;
use bigsample::sim::rng::{replication_rng, StreamStudy};
use bigsample::sim::study1::{gen_big_study1, gen_population_study1};
use bigsample::sim::{run_study1, run_study2, MetricsRow, RunOptions, Scenario, Study1Config, Study2Config};
use bigsample::tilting::{solve_calibration, tilted_estimator, TiltingOptions};
use bigsample::{error_decomposition, Correlation};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn rows_json(rows: &[MetricsRow], failures: usize) -> String {
    let rows: Vec<Value> = rows
        .iter()
        .map(|r| {
            json!({
                "parameter": r.parameter,
                "method": r.method.label(),
                "bias": r.summary.bias,
                "se": r.summary.se,
                "rb_se": r.summary.rb_se,
                "cr": r.summary.cr,
                "reps": r.summary.reps,
            })
        })
        .collect();
    json!({ "rows": rows, "failed_reps": failures }).to_string()
}

/// One population and self-selected big sample under `logit p = phi (x - 2)`:
/// the naive error, its decomposition, and the tilting correction.
#[wasm_bindgen]
pub fn selection_snapshot(phi: f64, population_size: u32, seed: u32) -> Result<String, String> {
    let mut rng = replication_rng(u64::from(seed), StreamStudy::Study1, 0);
    let pop = gen_population_study1(population_size as usize, &mut rng).map_err(|e| e.to_string())?;
    let big = gen_big_study1(&pop, phi, &mut rng).map_err(|e| e.to_string())?;
    let dec = error_decomposition(&pop, &big).map_err(|e| e.to_string())?;
    let target = pop.x().column_means();
    let sol = solve_calibration(big.x(), &target, &TiltingOptions::default()).map_err(|e| e.to_string())?;
    let tilted = tilted_estimator(&sol, big.y()).map_err(|e| e.to_string())?;

    let mut w: Vec<f64> = sol.weights().iter().map(|w| w * big.sample_size() as f64).collect();
    w.sort_by(f64::total_cmp);
    let q = |p: f64| w[((w.len() - 1) as f64 * p).round() as usize];

    Ok(json!({
        "population_size": pop.size(),
        "big_size": big.sample_size(),
        "population_mean": population_mean(&pop, None),
        "big_mean": big.mean(),
        "error": dec.error,
        "cov_delta_y": dec.cov_delta_y,
        "corr_delta_y": match dec.corr_delta_y {
            Correlation::Defined(r) => Value::from(r),
            Correlation::Undefined => Value::Null,
        },
        "f_b": dec.f_b,
        "sigma2": dec.sigma2,
        "lambda": sol.lambda()[0],
        "tilted_mean": tilted,
        "max_feasible_n": max_feasible_n(&sol),
        "relative_weight_quantiles": [q(0.0), q(0.25), q(0.5), q(0.75), q(1.0)],
    })
    .to_string())
}

/// Monte Carlo comparison of naive, calibration and inverse sampling estimators.
#[wasm_bindgen]
pub fn study1(phi: f64, n: u32, population_size: u32, reps: u32, seed: u32) -> Result<String, String> {
    let cfg = Study1Config {
        population_size: population_size as usize,
        phi,
        n: n as usize,
        reps: reps as usize,
        seed: u64::from(seed),
        ..Study1Config::default()
    };
    let res = run_study1(&cfg, &RunOptions::default()).map_err(|e| e.to_string())?;
    Ok(rows_json(&res.rows, res.failures.len()))
}

/// Monte Carlo comparison of naive, Rivers, PS and DR estimators; `scenario` is I, II or III.
#[wasm_bindgen]
pub fn study2(scenario: &str, n: u32, population_size: u32, reps: u32, seed: u32) -> Result<String, String> {
    let scenario: Scenario = scenario.parse().map_err(|e: bigsample::Error| e.to_string())?;
    let cfg = Study2Config {
        population_size: population_size as usize,
        n: n as usize,
        reps: reps as usize,
        seed: u64::from(seed),
        scenario,
    };
    let res = run_study2(&cfg, &RunOptions::default()).map_err(|e| e.to_string())?;
    Ok(rows_json(&res.rows, res.failures.len()))
}
