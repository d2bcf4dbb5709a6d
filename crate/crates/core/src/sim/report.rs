//! CSV and aligned-table rendering of metrics rows.

use crate::sim::MetricsRow;

pub const CSV_HEADER: &str = "study,scenario_or_phi,parameter,n,method,bias,se,rb_se,cr,reps,failed_reps";

/// Formats `v` with `digits` significant digits, dropping trailing zeros.
pub fn significant(v: f64, digits: usize) -> String {
    if !v.is_finite() {
        return if v.is_nan() { "NaN".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", digits - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..digits as i32).contains(&exp) {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, v))
    } else {
        format!("{}e{}", trim_zeros(mantissa.to_string()), exp)
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn fields(row: &MetricsRow, digits: usize) -> [String; 11] {
    let s = &row.summary;
    [
        row.study.clone(),
        row.scenario_or_phi.clone(),
        row.parameter.clone(),
        row.n.to_string(),
        row.method.label().to_string(),
        significant(s.bias, digits),
        significant(s.se, digits),
        significant(s.rb_se, digits),
        significant(s.cr, digits),
        s.reps.to_string(),
        row.failed_reps.to_string(),
    ]
}

/// CSV with 6 significant digits, or 17 with `full_precision`.
pub fn to_csv(rows: &[MetricsRow], full_precision: bool) -> String {
    let digits = if full_precision { 17 } else { 6 };
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&fields(row, digits).join(","));
        out.push('\n');
    }
    out
}

/// Right-aligned columns for terminal output.
pub fn to_table(rows: &[MetricsRow]) -> String {
    let header: Vec<String> = CSV_HEADER.split(',').map(String::from).collect();
    let body: Vec<[String; 11]> = rows.iter().map(|r| fields(r, 4)).collect();
    let mut widths: Vec<usize> = header.iter().map(String::len).collect();
    for line in &body {
        for (w, f) in widths.iter_mut().zip(line) {
            *w = (*w).max(f.len());
        }
    }
    let render = |cells: &[String]| -> String {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:>w$}"))
            .collect::<Vec<_>>()
            .join("  ")
    };
    let mut out = render(&header);
    out.push('\n');
    for line in &body {
        out.push_str(&render(line));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::Method;
    use crate::sim::metrics::Summary;

    #[test]
    fn significant_digits() {
        assert_eq!(significant(-0.27123456, 6), "-0.271235");
        assert_eq!(significant(0.95, 6), "0.95");
        assert_eq!(significant(123456789.0, 6), "1.23457e8");
        assert_eq!(significant(1.5e-7, 6), "1.5e-7");
        assert_eq!(significant(0.0, 6), "0");
        assert_eq!(significant(f64::NAN, 6), "NaN");
        let v = 0.1 + 0.2;
        assert_eq!(significant(v, 17).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn csv_layout() {
        let row = MetricsRow {
            study: "study2".into(),
            scenario_or_phi: "I".into(),
            parameter: "Y_N".into(),
            n: 500,
            method: Method::DoublyRobust,
            summary: Summary {
                bias: 0.001,
                se: 0.063,
                rb_se: -0.02,
                cr: 0.95,
                reps: 500,
            },
            failed_reps: 0,
        };
        let csv = to_csv(std::slice::from_ref(&row), false);
        assert_eq!(csv, format!("{CSV_HEADER}\nstudy2,I,Y_N,500,DR,0.001,0.063,-0.02,0.95,500,0\n"));
        let table = to_table(&[row]);
        assert_eq!(table.lines().count(), 2);
        assert!(table.lines().all(|l| l.len() == table.lines().next().unwrap().len()));
    }
}
