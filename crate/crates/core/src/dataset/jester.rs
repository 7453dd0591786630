//! Dense joke-rating matrices with a "not rated" sentinel.
//!
//! Each row is either `count, r_0, .., r_99` or `user_id, count, r_0, .., r_99`.
//! Cells equal to 99.0 are unrated. Comma and tab delimiters are detected
//! from the first data line.

use std::io::BufRead;

use super::{NormalizationScheme, RatingMatrix, SparseRow};
use crate::error::{Error, Result};

pub const JESTER_ITEMS: usize = 100;
const SENTINEL: f64 = 99.0;
const SENTINEL_TOL: f64 = 1e-9;

/// What to do when a row's declared rating count disagrees with its cells.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum CountCheck {
    #[default]
    Warn,
    Fail,
}

pub fn parse_jester(reader: impl BufRead) -> Result<RatingMatrix> {
    parse_jester_with(reader, CountCheck::Warn)
}

pub fn parse_jester_with(reader: impl BufRead, check: CountCheck) -> Result<RatingMatrix> {
    let scheme = NormalizationScheme::JesterAffine;
    let mut delimiter = None;
    let mut rows = Vec::new();
    let mut user_ids = Vec::new();
    let mut mismatches = 0usize;

    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let delim = *delimiter.get_or_insert(if line.contains('\t') { '\t' } else { ',' });
        let fields: Vec<&str> = line.split(delim).map(str::trim).collect();

        let (user_id, rest) = match fields.len() {
            n if n == JESTER_ITEMS + 1 => (rows.len() as u64, &fields[..]),
            n if n == JESTER_ITEMS + 2 => (
                parse_num::<u64>(fields[0], "user id", line_no)?,
                &fields[1..],
            ),
            n => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!(
                        "expected {} or {} fields, found {n}",
                        JESTER_ITEMS + 1,
                        JESTER_ITEMS + 2
                    ),
                })
            }
        };
        let declared = parse_num::<f64>(rest[0], "rating count", line_no)?;

        let mut indices = Vec::new();
        let mut values = Vec::new();
        for (item, cell) in rest[1..].iter().enumerate() {
            let raw = parse_num::<f64>(cell, "rating", line_no)?;
            if (raw - SENTINEL).abs() < SENTINEL_TOL {
                continue;
            }
            let value = scheme.apply(raw).ok_or(Error::Range {
                line: Some(line_no),
                value: raw,
                range: "[-10, 10] or 99",
            })?;
            indices.push(item as u32);
            values.push(value);
        }

        if declared != indices.len() as f64 {
            match check {
                CountCheck::Fail => {
                    return Err(Error::CountMismatch {
                        line: line_no,
                        declared: declared as usize,
                        observed: indices.len(),
                    })
                }
                CountCheck::Warn => {
                    mismatches += 1;
                    log::debug!(
                        "line {line_no}: declared {declared} ratings, observed {}",
                        indices.len()
                    );
                }
            }
        }
        user_ids.push(user_id);
        rows.push(SparseRow::from_sorted(indices, values));
    }
    if mismatches > 0 {
        log::warn!("{mismatches} rows declare a rating count that differs from their rated cells");
    }

    RatingMatrix::new(
        rows,
        JESTER_ITEMS,
        user_ids,
        (0..JESTER_ITEMS as u64).collect(),
        scheme,
        None,
    )
}

fn parse_num<T: std::str::FromStr>(field: &str, what: &str, line: usize) -> Result<T> {
    field.parse().map_err(|_| Error::Parse {
        line,
        message: format!("cannot parse {what} from {field:?}"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(declared: usize, cells: &[(usize, f64)], delim: &str) -> String {
        let mut all = vec![SENTINEL; JESTER_ITEMS];
        for &(i, v) in cells {
            all[i] = v;
        }
        std::iter::once(declared.to_string())
            .chain(all.iter().map(|v| format!("{v:.2}")))
            .collect::<Vec<_>>()
            .join(delim)
    }

    #[test]
    fn sentinels_drop_and_values_map() {
        let text = row(2, &[(0, -9.68), (99, 3.20)], ", ");
        let m = parse_jester_with(text.as_bytes(), CountCheck::Fail).unwrap();
        let r = m.row(0).unwrap();
        assert_eq!(r.indices(), &[0, 99]);
        assert!((r.values()[0] - 1.064).abs() < 1e-12);
        assert!((r.values()[1] - 3.64).abs() < 1e-12);
        assert_eq!(m.n_items(), JESTER_ITEMS);
    }

    #[test]
    fn endpoints_and_tabs() {
        let text = format!(
            "{}\n{}\n",
            row(2, &[(3, -10.0), (4, 10.0)], "\t"),
            row(0, &[], "\t")
        );
        let m = parse_jester(text.as_bytes()).unwrap();
        assert_eq!(m.n_users(), 2);
        assert_eq!(m.row(0).unwrap().values(), &[1.0, 5.0]);
        assert!(m.row(1).unwrap().is_empty());
        assert_eq!(m.user_ids(), &[0, 1]);
    }

    #[test]
    fn explicit_user_id_column() {
        let text = format!("42,{}", row(1, &[(7, 0.0)], ","));
        let m = parse_jester(text.as_bytes()).unwrap();
        assert_eq!(m.user_ids(), &[42]);
        assert_eq!(m.row(0).unwrap().get(7), Some(3.0));
    }

    #[test]
    fn wrong_field_count() {
        let err = parse_jester("1,2,3".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn value_out_of_range() {
        let text = row(1, &[(0, 12.5)], ",");
        assert!(matches!(
            parse_jester(text.as_bytes()).unwrap_err(),
            Error::Range { line: Some(1), .. }
        ));
    }

    #[test]
    fn count_mismatch_policy() {
        let text = row(5, &[(0, 1.0)], ",");
        assert!(parse_jester_with(text.as_bytes(), CountCheck::Warn).is_ok());
        assert!(matches!(
            parse_jester_with(text.as_bytes(), CountCheck::Fail).unwrap_err(),
            Error::CountMismatch {
                declared: 5,
                observed: 1,
                ..
            }
        ));
    }
}
