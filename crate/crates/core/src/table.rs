//! Tab-delimited tables: feature files, datasets, annotation files.
//!
//! Layout: optional leading `#key=value` metadata lines, a header row, then
//! one tab-separated row per record. Blank lines are ignored.

use std::io::{BufRead, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TableError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("missing column {0:?}")]
    MissingColumn(String),
    #[error("table has no header row")]
    NoHeader,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DelimitedTable {
    pub metadata: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Source line number of each row, for error messages.
    pub row_lines: Vec<usize>,
}

impl DelimitedTable {
    pub fn column(&self, name: &str) -> Result<usize, TableError> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| TableError::MissingColumn(name.to_string()))
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Parses cell (row, col) as a finite float.
    pub fn float(&self, row: usize, col: usize) -> Result<f64, TableError> {
        let cell = &self.rows[row][col];
        match cell.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(TableError::Parse {
                line: self.row_lines[row],
                message: format!("column {:?}: {cell:?} is not a finite number", self.header[col]),
            }),
        }
    }
}

pub fn read_delimited<R: BufRead>(source: R) -> Result<DelimitedTable, TableError> {
    let mut table = DelimitedTable::default();
    let mut have_header = false;
    for (idx, line) in source.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        let line = if lineno == 1 {
            line.trim_start_matches('\u{feff}')
        } else {
            line
        };
        if line.trim().is_empty() {
            continue;
        }
        if !have_header {
            if let Some(meta) = line.strip_prefix('#') {
                if let Some((k, v)) = meta.trim().split_once('=') {
                    table.metadata.push((k.trim().to_string(), v.trim().to_string()));
                }
                continue;
            }
            table.header = line.split('\t').map(|h| h.trim().to_string()).collect();
            let mut seen = std::collections::HashSet::new();
            if let Some(dup) = table.header.iter().find(|h| !seen.insert(h.as_str())) {
                return Err(TableError::Parse {
                    line: lineno,
                    message: format!("duplicate column {dup:?}"),
                });
            }
            have_header = true;
            continue;
        }
        let fields: Vec<String> = line.split('\t').map(str::to_string).collect();
        if fields.len() != table.header.len() {
            return Err(TableError::Parse {
                line: lineno,
                message: format!("expected {} fields, found {}", table.header.len(), fields.len()),
            });
        }
        table.rows.push(fields);
        table.row_lines.push(lineno);
    }
    if !have_header {
        return Err(TableError::NoHeader);
    }
    Ok(table)
}

/// Formats like C's `%.{sig}g`: `sig` significant digits, trailing zeros
/// removed, scientific notation for very large or small magnitudes.
pub fn format_sig(x: f64, sig: usize) -> String {
    let sig = sig.max(1);
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", sig - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= sig as i32 {
        let mantissa = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        strip_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn clean_cell(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

/// Writes a feature table: metadata lines, then a header of `leading`
/// passthrough columns followed by category names, then one row per record
/// with weights at 6 significant digits.
pub fn write_feature_table<W: Write>(
    mut out: W,
    metadata: &[(String, String)],
    leading: &[String],
    categories: &[String],
    rows: impl IntoIterator<Item = (Vec<String>, Vec<f64>)>,
) -> std::io::Result<()> {
    for (k, v) in metadata {
        writeln!(out, "#{}={}", clean_cell(k), clean_cell(v))?;
    }
    let header: Vec<String> = leading.iter().chain(categories).map(|s| clean_cell(s)).collect();
    writeln!(out, "{}", header.join("\t"))?;
    for (pass, weights) in rows {
        let cells: Vec<String> = pass
            .iter()
            .map(|s| clean_cell(s))
            .chain(weights.iter().map(|&w| format_sig(w, 6)))
            .collect();
        writeln!(out, "{}", cells.join("\t"))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig6_matches_printf_g() {
        // expected strings are what C printf("%g") produces
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (2.0, "2"),
            (0.888888888, "0.888889"),
            (-0.5, "-0.5"),
            (123456.7, "123457"),
            (1234567.0, "1.23457e+06"),
            (0.0001, "0.0001"),
            (0.00001234, "1.234e-05"),
            (100.0, "100"),
            (0.1 + 0.2, "0.3"),
            (999999.5, "1e+06"),
        ];
        for (x, want) in cases {
            assert_eq!(format_sig(x, 6), want, "{x}");
        }
    }

    #[test]
    fn reads_metadata_header_rows() {
        let src = "#method=bow\n# seed = 3\nid\ta\tb\n\nx\t1\t2\ny\t3\t4e-1\n";
        let t = read_delimited(src.as_bytes()).unwrap();
        assert_eq!(t.meta("method"), Some("bow"));
        assert_eq!(t.meta("seed"), Some("3"));
        assert_eq!(t.header, ["id", "a", "b"]);
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.float(1, 2).unwrap(), 0.4);
        assert_eq!(t.row_lines, [5, 6]);
    }

    #[test]
    fn ragged_row_names_line() {
        let err = read_delimited("a\tb\n1\t2\n3\n".as_bytes()).unwrap_err();
        assert!(matches!(err, TableError::Parse { line: 3, .. }));
        assert!(matches!(read_delimited("#x=1\n".as_bytes()), Err(TableError::NoHeader)));
        assert!(read_delimited("a\ta\n".as_bytes()).is_err());
    }

    #[test]
    fn non_numeric_cell() {
        let t = read_delimited("a\nnan\nx\n".as_bytes()).unwrap();
        assert!(t.float(0, 0).is_err());
        assert!(t.float(1, 0).is_err());
    }

    #[test]
    fn writer_round_trips_through_reader() {
        let mut buf = Vec::new();
        write_feature_table(
            &mut buf,
            &[("method".into(), "sentecon".into())],
            &["id".into()],
            &["posemo".into(), "negemo".into()],
            vec![(vec!["s\t1".into()], vec![0.5, -1.0 / 3.0])],
        )
        .unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "#method=sentecon\nid\tposemo\tnegemo\ns 1\t0.5\t-0.333333\n");
        let t = read_delimited(text.as_bytes()).unwrap();
        assert_eq!(t.header, ["id", "posemo", "negemo"]);
    }
}
