//! `userId::movieId::rating::timestamp` event logs.

use std::io::BufRead;

use super::{NormalizationScheme, RatingEvent, SCALE_MIN};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MovieLensOptions {
    /// Raise half-star ratings in `[0.5, 1)` to 1.0 instead of failing.
    pub clamp_half_star: bool,
}

pub fn parse_movielens(reader: impl BufRead) -> Result<Vec<RatingEvent>> {
    parse_movielens_with(reader, MovieLensOptions::default())
}

pub fn parse_movielens_with(
    reader: impl BufRead,
    opts: MovieLensOptions,
) -> Result<Vec<RatingEvent>> {
    let mut events = Vec::new();
    let mut clamped = 0usize;
    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split("::").collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 4 '::'-separated fields, found {}", fields.len()),
            });
        }
        let user_id = parse_field::<u64>(fields[0], "user id", line_no)?;
        let item_id = parse_field::<u64>(fields[1], "item id", line_no)?;
        let raw = parse_field::<f64>(fields[2], "rating", line_no)?;
        let timestamp = parse_field::<i64>(fields[3], "timestamp", line_no)?;

        let raw = if opts.clamp_half_star && (0.5..SCALE_MIN).contains(&raw) {
            clamped += 1;
            SCALE_MIN
        } else {
            raw
        };
        let value = NormalizationScheme::Identity1To5
            .apply(raw)
            .ok_or(Error::Range {
                line: Some(line_no),
                value: raw,
                range: "[1, 5]",
            })?;
        events.push(RatingEvent {
            user_id,
            item_id,
            value,
            timestamp: Some(timestamp),
        });
    }
    if clamped > 0 {
        log::warn!("raised {clamped} half-star ratings to 1.0");
    }
    Ok(events)
}

fn parse_field<T: std::str::FromStr>(field: &str, what: &str, line: usize) -> Result<T> {
    field.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("cannot parse {what} from {field:?}"),
    })
}
