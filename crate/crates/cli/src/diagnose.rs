use std::path::Path;

use bigsample::io::{load_big_sample, load_population};
use bigsample::{error_decomposition, Correlation};

use crate::CliResult;

/// Relative tolerance for the printed identity checks.
const IDENTITY_TOL: f64 = 1e-10;

pub fn ddi(population: &Path, big: &Path) -> CliResult<()> {
    let pop = load_population(population)?;
    let big = load_big_sample(big, pop.size())?;
    let dec = error_decomposition(&pop, &big)?;

    println!("error = {}", dec.error);
    println!("cov_delta_y = {}", dec.cov_delta_y);
    match dec.corr_delta_y {
        Correlation::Defined(r) => println!("corr_delta_y = {r}"),
        Correlation::Undefined => println!("corr_delta_y = undefined (f_B = 1 or sigma2 = 0)"),
    }
    println!("f_B = {}", dec.f_b);
    println!("sigma2 = {}", dec.sigma2);

    let first = dec.error_from_covariance();
    let first_ok = (dec.error - first).abs() <= IDENTITY_TOL * dec.error.abs().max(first.abs()).max(dec.sigma2.sqrt());
    let second = dec.squared_error_from_ddi();
    let second_ok = second.is_none_or(|sq| {
        let e2 = dec.error * dec.error;
        (e2 - sq).abs() <= IDENTITY_TOL * e2.max(sq).max(dec.sigma2)
    });
    let detail = match second {
        Some(sq) => format!("error^2 = {}, corr^2 (1/f_B - 1) sigma2 = {sq}", dec.error * dec.error),
        None => "corr undefined, checked error = cov / f_B only".to_string(),
    };
    println!(
        "identity check: {} ({detail})",
        if first_ok && second_ok { "PASS" } else { "FAIL" }
    );
    if first_ok && second_ok {
        Ok(())
    } else {
        Err(bigsample::Error::InvalidInput("error decomposition identity failed".into()).into())
    }
}
