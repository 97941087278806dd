//! Line-delimited text formats.
//!
//! Matrix files start with `N <dim>` followed by `N` rows of `N`
//! whitespace-separated entries written as `re+imj` (scientific notation
//! accepted). Field files start with `T <real> m <int>` followed by `m` real
//! samples, one per line. Blank lines and lines starting with `#` are skipped.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::scalar::{cplx, lit, to_f64, CMatrix, Real};

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// Parses one complex entry such as `1.5e-3-2e+1j`, `-0.5+0j`, `3`, or `2j`.
pub fn parse_complex(token: &str) -> Option<(f64, f64)> {
    let t = token.trim();
    if t.is_empty() {
        return None;
    }
    let Some(body) = t.strip_suffix('j').or_else(|| t.strip_suffix('i')) else {
        return t.parse::<f64>().ok().map(|r| (r, 0.0));
    };
    // Split at the last sign that is neither leading nor part of an exponent.
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    match split {
        Some(k) => {
            let re = body[..k].parse::<f64>().ok()?;
            let im = body[k..].parse::<f64>().ok()?;
            Some((re, im))
        }
        None => {
            let im = match body {
                "" | "+" => 1.0,
                "-" => -1.0,
                _ => body.parse::<f64>().ok()?,
            };
            Some((0.0, im))
        }
    }
}

pub fn format_complex(re: f64, im: f64) -> String {
    format!("{re:.17e}{im:+.17e}j")
}

pub fn parse_matrix<T: Real>(text: &str) -> Result<CMatrix<T>> {
    let mut lines = content_lines(text);
    let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "empty matrix file"))?;
    let mut head = header.split_whitespace();
    let n = match (head.next(), head.next(), head.next()) {
        (Some("N"), Some(v), None) => v
            .parse::<usize>()
            .map_err(|_| parse_err(hline, format!("invalid dimension `{v}`")))?,
        _ => return Err(parse_err(hline, "expected header `N <dim>`")),
    };
    if n == 0 {
        return Err(parse_err(hline, "dimension must be positive"));
    }
    let mut m = CMatrix::<T>::zeros(n, n);
    for row in 0..n {
        let (lno, line) = lines
            .next()
            .ok_or_else(|| parse_err(hline + row + 1, format!("missing row {} of {n}", row + 1)))?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != n {
            return Err(parse_err(lno, format!("expected {n} entries, found {}", tokens.len())));
        }
        for (col, tok) in tokens.iter().enumerate() {
            let (re, im) = parse_complex(tok).ok_or_else(|| parse_err(lno, format!("invalid entry `{tok}`")))?;
            if !re.is_finite() || !im.is_finite() {
                return Err(parse_err(lno, format!("non-finite entry `{tok}`")));
            }
            m[(row, col)] = cplx(lit(re), lit(im));
        }
    }
    if let Some((lno, _)) = lines.next() {
        return Err(parse_err(lno, "trailing data after matrix rows"));
    }
    Ok(m)
}

pub fn format_matrix<T: Real>(m: &CMatrix<T>) -> String {
    let mut out = format!("N {}\n", m.nrows());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols())
            .map(|j| format_complex(to_f64(m[(i, j)].re), to_f64(m[(i, j)].im)))
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn read_matrix<T: Real>(path: impl AsRef<std::path::Path>) -> Result<CMatrix<T>> {
    parse_matrix(&std::fs::read_to_string(path)?)
}

pub fn write_matrix<T: Real>(path: impl AsRef<std::path::Path>, m: &CMatrix<T>) -> Result<()> {
    std::fs::write(path, format_matrix(m))?;
    Ok(())
}

/// Horizon and samples of a piecewise-constant field file.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldRecord {
    pub horizon: f64,
    pub samples: Vec<f64>,
}

pub fn parse_field(text: &str) -> Result<FieldRecord> {
    let mut lines = content_lines(text);
    let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "empty field file"))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    let (horizon, m) = match tokens.as_slice() {
        ["T", t, "m", m] => (
            t.parse::<f64>().map_err(|_| parse_err(hline, format!("invalid horizon `{t}`")))?,
            m.parse::<usize>().map_err(|_| parse_err(hline, format!("invalid slice count `{m}`")))?,
        ),
        _ => return Err(parse_err(hline, "expected header `T <real> m <int>`")),
    };
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(parse_err(hline, "horizon must be positive"));
    }
    if m == 0 {
        return Err(parse_err(hline, "slice count must be positive"));
    }
    let mut samples = Vec::with_capacity(m);
    for (lno, line) in lines {
        let v = line
            .parse::<f64>()
            .map_err(|_| parse_err(lno, format!("invalid sample `{line}`")))?;
        if !v.is_finite() {
            return Err(parse_err(lno, "non-finite sample"));
        }
        samples.push(v);
    }
    if samples.len() != m {
        return Err(parse_err(hline, format!("header declares {m} samples, found {}", samples.len())));
    }
    Ok(FieldRecord { horizon, samples })
}

pub fn format_field(record: &FieldRecord) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "T {:.17e} m {}", record.horizon, record.samples.len());
    for v in &record.samples {
        let _ = writeln!(out, "{v:.17e}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_entry_forms() {
        assert_eq!(parse_complex("1.5e-3-2e+1j"), Some((1.5e-3, -20.0)));
        assert_eq!(parse_complex("-0.5+0j"), Some((-0.5, 0.0)));
        assert_eq!(parse_complex("3"), Some((3.0, 0.0)));
        assert_eq!(parse_complex("-2j"), Some((0.0, -2.0)));
        assert_eq!(parse_complex("1E+2+1E-2j"), Some((100.0, 0.01)));
        assert_eq!(parse_complex("abc"), None);
    }

    #[test]
    fn rejects_malformed_matrix() {
        assert!(parse_matrix::<f64>("N 2\n1+0j 0+0j\n").is_err());
        assert!(parse_matrix::<f64>("M 2\n").is_err());
        assert!(parse_matrix::<f64>("N 1\nfoo\n").is_err());
        let err = parse_matrix::<f64>("N 2\n1+0j 0+0j\n0+0j\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
    }

    #[test]
    fn field_header_and_count_checked() {
        let ok = parse_field("T 2.5 m 2\n0.1\n-3e-2\n").unwrap();
        assert_eq!(ok, FieldRecord { horizon: 2.5, samples: vec![0.1, -0.03] });
        assert!(parse_field("T 2.5 m 3\n0.1\n").is_err());
        assert!(parse_field("T -1 m 1\n0\n").is_err());
    }

    proptest! {
        #[test]
        fn matrix_text_round_trip(entries in prop::collection::vec((-1e6f64..1e6, -1e6f64..1e6), 9)) {
            let m = CMatrix::<f64>::from_fn(3, 3, |i, j| { let (a, b) = entries[3 * i + j]; cplx(a, b) });
            let back: CMatrix<f64> = parse_matrix(&format_matrix(&m)).unwrap();
            prop_assert_eq!(back, m);
        }

        #[test]
        fn field_text_round_trip(samples in prop::collection::vec(-1e3f64..1e3, 1..20), t in 1e-3f64..1e3) {
            let rec = FieldRecord { horizon: t, samples };
            prop_assert_eq!(parse_field(&format_field(&rec)).unwrap(), rec);
        }
    }
}
