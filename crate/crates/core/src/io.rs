//! CSV loading and writing for populations and samples.
//!
//! Layouts (header row required, UTF-8):
//! - population: `id,x1,...,xp,y`
//! - big-data sample: `id,x1,...,xp,y`, with `N` supplied separately
//! - probability sample: `id,x1,...,xp,d,delta[,y]`
//!
//! Row numbers in errors are file line numbers, so the header is row 1.

use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::population::{BigDataSample, Covariates, FinitePopulation, ProbabilitySample};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    Population,
    Probability,
}

struct Table {
    ids: Vec<u64>,
    x: Covariates,
    y: Option<Vec<f64>>,
    d: Vec<f64>,
    delta: Vec<bool>,
}

fn parse_error(path: &str, row: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_string(),
        row,
        message: message.into(),
    }
}

/// Number of covariates implied by the header, after checking the column names.
fn check_header(path: &str, header: &csv::StringRecord, layout: Layout) -> Result<(usize, bool)> {
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    let expected = match layout {
        Layout::Population => "id,x1,...,xp,y",
        Layout::Probability => "id,x1,...,xp,d,delta[,y]",
    };
    let bad = |what: String| parse_error(path, 1, format!("{what}; expected header {expected}"));
    if names.first() != Some(&"id") {
        return Err(bad("first column must be `id`".into()));
    }
    let (tail, has_y): (&[&str], bool) = match layout {
        Layout::Population => (&["y"], true),
        Layout::Probability => {
            if names.last() == Some(&"y") {
                (&["d", "delta", "y"], true)
            } else {
                (&["d", "delta"], false)
            }
        }
    };
    if names.len() < 1 + tail.len() {
        return Err(bad(format!("missing column `{}`", tail[tail.len() - 1])));
    }
    let p = names.len() - 1 - tail.len();
    for (k, name) in names[1..=p].iter().enumerate() {
        let want = format!("x{}", k + 1);
        if *name != want {
            return Err(bad(format!("column {} is `{name}`, not `{want}`", k + 2)));
        }
    }
    for (name, want) in names[p + 1..].iter().zip(tail) {
        if name != want {
            return Err(bad(format!("missing column `{want}` (found `{name}`)")));
        }
    }
    Ok((p, has_y))
}

fn read_table<R: Read>(path: &str, reader: R, layout: Layout) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| parse_error(path, 1, e.to_string()))?
        .clone();
    let (p, has_y) = check_header(path, &header, layout)?;
    let width = header.len();

    let mut ids = Vec::new();
    let mut seen = HashSet::new();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut d = Vec::new();
    let mut delta = Vec::new();
    for (k, record) in rdr.records().enumerate() {
        let row = k + 2;
        let record = record.map_err(|e| parse_error(path, row, e.to_string()))?;
        if record.len() != width {
            return Err(parse_error(
                path,
                row,
                format!("expected {width} fields, found {}", record.len()),
            ));
        }
        let number = |j: usize| -> Result<f64> {
            let cell = &record[j];
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(parse_error(
                    path,
                    row,
                    format!("column `{}` holds non-numeric value `{cell}`", header[j].trim()),
                )),
            }
        };
        let id: u64 = record[0]
            .parse()
            .map_err(|_| parse_error(path, row, format!("id `{}` is not an unsigned integer", &record[0])))?;
        if !seen.insert(id) {
            return Err(parse_error(path, row, format!("duplicate id {id}")));
        }
        ids.push(id);
        for j in 1..=p {
            xs.push(number(j)?);
        }
        match layout {
            Layout::Population => ys.push(number(p + 1)?),
            Layout::Probability => {
                let w = number(p + 1)?;
                if w <= 0.0 {
                    return Err(parse_error(path, row, format!("design weight d = {w} is not positive")));
                }
                d.push(w);
                delta.push(match &record[p + 2] {
                    "1" | "true" => true,
                    "0" | "false" => false,
                    other => {
                        return Err(parse_error(path, row, format!("delta must be 0 or 1, found `{other}`")));
                    }
                });
                if has_y {
                    ys.push(number(p + 3)?);
                }
            }
        }
    }
    if ids.is_empty() {
        return Err(parse_error(path, 1, "file has a header but no data rows"));
    }
    let n = ids.len();
    Ok(Table {
        ids,
        x: Covariates::from_row_major(xs, n, p)?,
        y: has_y.then_some(ys),
        d,
        delta,
    })
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| parse_error(&path.display().to_string(), 0, format!("cannot open file: {e}")))
}

pub fn read_population<R: Read>(name: &str, reader: R) -> Result<FinitePopulation> {
    let t = read_table(name, reader, Layout::Population)?;
    FinitePopulation::new(t.ids, t.x, t.y.unwrap_or_default())
}

/// Reads a big-data sample; `population_size` is the known `N`.
pub fn read_big_sample<R: Read>(name: &str, reader: R, population_size: usize) -> Result<BigDataSample> {
    let t = read_table(name, reader, Layout::Population)?;
    if t.ids.len() > population_size {
        return Err(parse_error(
            name,
            t.ids.len() + 1,
            format!(
                "file has {} units but the population size N is {population_size}",
                t.ids.len()
            ),
        ));
    }
    BigDataSample::new(t.ids, t.x, t.y.unwrap_or_default(), population_size)
}

pub fn read_probability_sample<R: Read>(name: &str, reader: R) -> Result<ProbabilitySample> {
    let t = read_table(name, reader, Layout::Probability)?;
    ProbabilitySample::new(t.ids, t.x, t.d, t.delta, t.y)
}

pub fn load_population(path: impl AsRef<Path>) -> Result<FinitePopulation> {
    let path = path.as_ref();
    read_population(&path.display().to_string(), open(path)?)
}

pub fn load_big_sample(path: impl AsRef<Path>, population_size: usize) -> Result<BigDataSample> {
    let path = path.as_ref();
    read_big_sample(&path.display().to_string(), open(path)?, population_size)
}

pub fn load_probability_sample(path: impl AsRef<Path>) -> Result<ProbabilitySample> {
    let path = path.as_ref();
    read_probability_sample(&path.display().to_string(), open(path)?)
}

fn covariate_header(p: usize) -> Vec<String> {
    std::iter::once("id".to_string())
        .chain((1..=p).map(|k| format!("x{k}")))
        .collect()
}

fn write_units<W: Write>(
    writer: W,
    header: Vec<String>,
    ids: &[u64],
    x: &Covariates,
    extra: impl Fn(usize) -> Vec<String>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(&header).map_err(csv_err)?;
    for (i, (id, row)) in ids.iter().zip(x.rows()).enumerate() {
        // `{}` on f64 prints the shortest string that parses back to the same value.
        let mut fields: Vec<String> = vec![id.to_string()];
        fields.extend(row.iter().map(|v| format!("{v}")));
        fields.extend(extra(i));
        w.write_record(&fields).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_population<W: Write>(writer: W, pop: &FinitePopulation) -> Result<()> {
    let mut header = covariate_header(pop.x().ncols());
    header.push("y".into());
    write_units(writer, header, pop.ids(), pop.x(), |i| vec![format!("{}", pop.y()[i])])
}

pub fn write_big_sample<W: Write>(writer: W, big: &BigDataSample) -> Result<()> {
    let mut header = covariate_header(big.x().ncols());
    header.push("y".into());
    write_units(writer, header, big.ids(), big.x(), |i| vec![format!("{}", big.y()[i])])
}

pub fn write_probability_sample<W: Write>(writer: W, a: &ProbabilitySample) -> Result<()> {
    let mut header = covariate_header(a.x().ncols());
    header.extend(["d".to_string(), "delta".to_string()]);
    if a.y().is_some() {
        header.push("y".into());
    }
    write_units(writer, header, a.ids(), a.x(), |i| {
        let mut f = vec![format!("{}", a.weights()[i]), u8::from(a.delta()[i]).to_string()];
        if let Some(y) = a.y() {
            f.push(format!("{}", y[i]));
        }
        f
    })
}
