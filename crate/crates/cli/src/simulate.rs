use std::fs;

use bigsample::sim::config::{apply_study1, apply_study2, parse_key_values};
use bigsample::sim::report::{to_csv, to_table};
use bigsample::sim::{run_study1, run_study2, RunOptions, StudyResult, Study1Config, Study2Config};

use crate::output::write_atomic;
use crate::{CliError, CliResult, CommonSimArgs, Format, Study1Args, Study2Args};

type Entries = Vec<(usize, String, String)>;

fn config_entries(common: &CommonSimArgs) -> CliResult<Entries> {
    let Some(path) = &common.config else {
        return Ok(Vec::new());
    };
    let text = fs::read_to_string(path).map_err(bigsample::Error::from)?;
    parse_key_values(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn threads(common: &CommonSimArgs, entries: &Entries) -> CliResult<Option<usize>> {
    if common.threads.is_some() {
        return Ok(common.threads);
    }
    match entries.iter().rev().find(|e| e.1 == "threads") {
        Some((row, _, v)) => v
            .parse()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("config line {row}: invalid thread count `{v}`"))),
        None => Ok(None),
    }
}

fn usage(e: bigsample::Error) -> CliError {
    CliError::Usage(e.to_string())
}

pub fn study1(args: Study1Args) -> CliResult<()> {
    let entries = config_entries(&args.common)?;
    let mut cfg = Study1Config::default();
    apply_study1(&mut cfg, &entries).map_err(usage)?;
    let c = &args.common;
    if let Some(phi) = args.phi {
        cfg.phi = phi;
    }
    if let Some(p) = &args.parameters {
        cfg.parameters = p
            .split(',')
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(usage)?;
    }
    cfg.n = c.n.unwrap_or(cfg.n);
    cfg.population_size = c.pop_size.unwrap_or(cfg.population_size);
    cfg.reps = c.reps.unwrap_or(cfg.reps);
    cfg.seed = c.seed.unwrap_or(cfg.seed);
    cfg.validate().map_err(usage)?;
    let opts = RunOptions {
        threads: threads(c, &entries)?,
    };
    if opts.threads == Some(0) {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    let result = run_study1(&cfg, &opts)?;
    emit(c, &result)
}

pub fn study2(args: Study2Args) -> CliResult<()> {
    let entries = config_entries(&args.common)?;
    let mut cfg = Study2Config::default();
    apply_study2(&mut cfg, &entries).map_err(usage)?;
    let c = &args.common;
    if let Some(s) = args.scenario {
        cfg.scenario = s;
    }
    cfg.n = c.n.unwrap_or(cfg.n);
    cfg.population_size = c.pop_size.unwrap_or(cfg.population_size);
    cfg.reps = c.reps.unwrap_or(cfg.reps);
    cfg.seed = c.seed.unwrap_or(cfg.seed);
    cfg.validate().map_err(usage)?;
    let opts = RunOptions {
        threads: threads(c, &entries)?,
    };
    if opts.threads == Some(0) {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    let result = run_study2(&cfg, &opts)?;
    emit(c, &result)
}

fn emit(c: &CommonSimArgs, result: &StudyResult) -> CliResult<()> {
    if let Some((rep, reason)) = result.failures.first() {
        eprintln!(
            "warning: {} replication(s) skipped; first was replication {rep}: {reason}",
            result.failures.len()
        );
    }
    let csv = to_csv(&result.rows, c.full_precision);
    if let Some(path) = &c.out {
        write_atomic(path, &csv)?;
    }
    match c.format {
        Format::Csv => print!("{csv}"),
        Format::Table => print!("{}", to_table(&result.rows)),
    }
    Ok(())
}
