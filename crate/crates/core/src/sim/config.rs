//! Flat `key = value` configuration files for the simulation studies.
//!
//! Blank lines and lines starting with `#` are ignored. Keys match the
//! config field names; `N` and `pop_size` are accepted for
//! `population_size`. Unknown keys are rejected.

use crate::error::{Error, Result};
use crate::sim::study1::Parameter;
use crate::sim::{Study1Config, Study2Config};

/// Parsed `(line number, key, value)` entries in file order.
pub fn parse_key_values(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            path: "config".into(),
            row: k + 1,
            message: format!("expected `key = value`, found `{line}`"),
        })?;
        out.push((k + 1, key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}

fn bad(row: usize, key: &str, value: &str) -> Error {
    Error::Parse {
        path: "config".into(),
        row,
        message: format!("invalid value `{value}` for `{key}`"),
    }
}

fn number<T: std::str::FromStr>(row: usize, key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| bad(row, key, value))
}

fn canonical(key: &str) -> &str {
    match key {
        "N" | "pop_size" | "pop-size" => "population_size",
        other => other,
    }
}

/// Applies config entries to a study 1 configuration. `study` and `threads` keys are skipped.
pub fn apply_study1(cfg: &mut Study1Config, entries: &[(usize, String, String)]) -> Result<()> {
    for (row, key, value) in entries {
        match canonical(key) {
            "population_size" => cfg.population_size = number(*row, key, value)?,
            "phi" => cfg.phi = number(*row, key, value)?,
            "n" => cfg.n = number(*row, key, value)?,
            "reps" => cfg.reps = number(*row, key, value)?,
            "seed" => cfg.seed = number(*row, key, value)?,
            "parameters" => {
                cfg.parameters = value
                    .split(',')
                    .map(|p| p.parse::<Parameter>())
                    .collect::<Result<_>>()
                    .map_err(|_| bad(*row, key, value))?
            }
            "study" | "threads" => {}
            _ => return Err(unknown(*row, key)),
        }
    }
    Ok(())
}

/// Applies config entries to a study 2 configuration. `study` and `threads` keys are skipped.
pub fn apply_study2(cfg: &mut Study2Config, entries: &[(usize, String, String)]) -> Result<()> {
    for (row, key, value) in entries {
        match canonical(key) {
            "population_size" => cfg.population_size = number(*row, key, value)?,
            "n" => cfg.n = number(*row, key, value)?,
            "reps" => cfg.reps = number(*row, key, value)?,
            "seed" => cfg.seed = number(*row, key, value)?,
            "scenario" => cfg.scenario = value.parse().map_err(|_| bad(*row, key, value))?,
            "study" | "threads" => {}
            _ => return Err(unknown(*row, key)),
        }
    }
    Ok(())
}

fn unknown(row: usize, key: &str) -> Error {
    Error::Parse {
        path: "config".into(),
        row,
        message: format!("unknown key `{key}`"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Scenario;

    #[test]
    fn study1_overrides() {
        let text = "# desk run\nphi = -0.5\nN=20000\n\nn = 1000\nparameters = P_N\n";
        let mut cfg = Study1Config::default();
        apply_study1(&mut cfg, &parse_key_values(text).unwrap()).unwrap();
        assert_eq!((cfg.phi, cfg.population_size, cfg.n), (-0.5, 20_000, 1000));
        assert_eq!(cfg.parameters, vec![Parameter::BelowSix]);
        assert_eq!(cfg.reps, Study1Config::default().reps);
    }

    #[test]
    fn study2_errors_name_line() {
        let mut cfg = Study2Config::default();
        apply_study2(&mut cfg, &parse_key_values("scenario = III").unwrap()).unwrap();
        assert_eq!(cfg.scenario, Scenario::III);
        let err = apply_study2(&mut cfg, &parse_key_values("n = 5\nreps = many").unwrap()).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 2, .. }));
        assert!(apply_study2(&mut cfg, &parse_key_values("phi = 1").unwrap()).is_err());
        assert!(parse_key_values("just words").is_err());
    }
}
