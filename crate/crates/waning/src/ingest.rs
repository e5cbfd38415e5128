//! Turning timestamp files into event streams.
//!
//! Three record layouts are accepted: one ISO-8601 date or datetime per line,
//! one non-negative decimal day count per line, or a CSV file with a named
//! column holding either of those. Blank lines and lines starting with `#`
//! are ignored in the line-based layouts.
//!
//! By default the earliest record is the origin: it defines `t = 0` and is
//! not itself an event. `Origin::Zero` keeps numeric values as they are,
//! which is what a stream written by `simulate` needs.

use std::fmt;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use waning_core::rng::EventRng;
use waning_core::EventStream;

const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("input is empty")]
    Empty,
    #[error("line {line}: {message}")]
    Record { line: usize, message: String },
    #[error("csv has no column named {0:?}")]
    MissingColumn(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Stream(#[from] waning_core::Error),
    #[error("no events after the origin")]
    NoEvents,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InputFormat {
    /// ISO-8601 lines if the first record is not a number, numeric lines otherwise.
    Auto,
    Iso8601,
    Numeric,
    Csv { column: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SourceFormat {
    Iso8601Lines,
    NumericLines,
    CsvColumn,
}

impl SourceFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            SourceFormat::Iso8601Lines => "iso8601_lines",
            SourceFormat::NumericLines => "numeric_lines",
            SourceFormat::CsvColumn => "csv_column",
        }
    }
}

impl fmt::Display for SourceFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DedupPolicy {
    /// Keep the first of each group of equal times.
    #[default]
    Drop,
    /// Shift every event forward by a uniform draw within the source resolution.
    Jitter { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Origin {
    #[default]
    EarliestRecord,
    /// `t = 0` is the origin and every record is an event. Numeric input only.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct IngestOptions {
    pub dedup: DedupPolicy,
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestedSeries {
    pub stream: EventStream,
    pub source_format: SourceFormat,
    pub raw_count: usize,
    pub dropped_duplicates: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Value {
    Days(f64),
    Instant(NaiveDateTime),
}

struct Record {
    line: usize,
    value: Value,
    /// Width of the interval the record rounds to, in days.
    resolution: f64,
}

pub fn parse_timestamps(input: &str, format: &InputFormat, opts: &IngestOptions) -> Result<IngestedSeries, IngestError> {
    let (records, source_format) = match format {
        InputFormat::Csv { column } => (csv_records(input, column)?, SourceFormat::CsvColumn),
        InputFormat::Iso8601 => (line_records(input, parse_iso)?, SourceFormat::Iso8601Lines),
        InputFormat::Numeric => (line_records(input, parse_days)?, SourceFormat::NumericLines),
        InputFormat::Auto => {
            let first = content_lines(input).next().ok_or(IngestError::Empty)?.1;
            if parse_days(first).is_ok() {
                (line_records(input, parse_days)?, SourceFormat::NumericLines)
            } else if parse_iso(first).is_ok() {
                (line_records(input, parse_iso)?, SourceFormat::Iso8601Lines)
            } else {
                let column = header_column(first).ok_or_else(|| IngestError::Record {
                    line: 1,
                    message: format!("header {first:?} has several columns; pick one with --column"),
                })?;
                (csv_records(input, &column)?, SourceFormat::CsvColumn)
            }
        }
    };
    build_series(records, source_format, opts)
}

/// Column to read from an unlabelled CSV: `time_days` if present, else the only one.
fn header_column(header: &str) -> Option<String> {
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    if names.contains(&"time_days") {
        Some("time_days".into())
    } else if let [only] = names[..] {
        Some(only.to_string())
    } else {
        None
    }
}

fn content_lines(input: &str) -> impl Iterator<Item = (usize, &str)> {
    input
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn line_records(input: &str, parse: fn(&str) -> Result<(Value, f64), String>) -> Result<Vec<Record>, IngestError> {
    let mut out = Vec::new();
    for (line, text) in content_lines(input) {
        let (value, resolution) = parse(text).map_err(|message| IngestError::Record { line, message })?;
        out.push(Record { line, value, resolution });
    }
    if out.is_empty() {
        return Err(IngestError::Empty);
    }
    Ok(out)
}

fn csv_records(input: &str, column: &str) -> Result<Vec<Record>, IngestError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input.as_bytes());
    let index = reader
        .headers()?
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| IngestError::MissingColumn(column.to_string()))?;
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row?;
        // header is line 1
        let line = row.position().map_or(0, |p| p.line() as usize);
        let field = row.get(index).unwrap_or("");
        if field.is_empty() {
            return Err(IngestError::Record {
                line,
                message: format!("empty {column:?} field"),
            });
        }
        let parsed = parse_days(field).or_else(|_| parse_iso(field));
        let (value, resolution) = parsed.map_err(|_| IngestError::Record {
            line,
            message: format!("cannot parse {field:?} as a timestamp or day count"),
        })?;
        out.push(Record { line, value, resolution });
    }
    if out.is_empty() {
        return Err(IngestError::Empty);
    }
    if out.iter().any(|r| matches!(r.value, Value::Days(_))) && out.iter().any(|r| matches!(r.value, Value::Instant(_))) {
        return Err(IngestError::Record {
            line: out[0].line,
            message: "column mixes calendar timestamps and day counts".into(),
        });
    }
    Ok(out)
}

fn parse_days(text: &str) -> Result<(Value, f64), String> {
    let v: f64 = text.parse().map_err(|_| format!("not a number: {text:?}"))?;
    if !(v.is_finite() && v >= 0.0) {
        return Err(format!("day count must be finite and non-negative: {text:?}"));
    }
    let decimals = match text.split_once('.') {
        Some((_, frac)) if !frac.contains(['e', 'E']) => frac.len() as i32,
        _ => 0,
    };
    Ok((Value::Days(v), 10f64.powi(-decimals)))
}

fn parse_iso(text: &str) -> Result<(Value, f64), String> {
    if let Ok(d) = NaiveDate::parse_from_str(text, "%Y-%m-%d") {
        return Ok((Value::Instant(d.and_hms_opt(0, 0, 0).expect("midnight exists")), 1.0));
    }
    let seconds_resolution = if text.contains('.') { 1e-3 } else { 1.0 } / SECONDS_PER_DAY;
    if let Ok(dt) = DateTime::parse_from_rfc3339(text) {
        return Ok((Value::Instant(dt.naive_utc()), seconds_resolution));
    }
    for pattern in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(text, pattern) {
            return Ok((Value::Instant(dt), seconds_resolution));
        }
    }
    for pattern in ["%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(text, pattern) {
            return Ok((Value::Instant(dt), 60.0 / SECONDS_PER_DAY));
        }
    }
    Err(format!("not an ISO-8601 date or datetime: {text:?}"))
}

fn days_between(from: NaiveDateTime, to: NaiveDateTime) -> f64 {
    let d = to - from;
    d.num_seconds() as f64 / SECONDS_PER_DAY + d.subsec_nanos() as f64 / (SECONDS_PER_DAY * 1e9)
}

fn build_series(records: Vec<Record>, source_format: SourceFormat, opts: &IngestOptions) -> Result<IngestedSeries, IngestError> {
    let raw_count = records.len();
    let (origin_label, mut times, resolutions) = match opts.origin {
        Origin::EarliestRecord => {
            let earliest = records
                .iter()
                .min_by(|a, b| compare(a.value, b.value))
                .expect("records are non-empty");
            let origin = earliest.value;
            let mut skipped = false;
            let mut times = Vec::with_capacity(raw_count - 1);
            let mut resolutions = Vec::with_capacity(raw_count - 1);
            for r in &records {
                if !skipped && r.line == earliest.line {
                    skipped = true;
                    continue;
                }
                times.push(offset(origin, r.value));
                resolutions.push(r.resolution);
            }
            (label(origin), times, resolutions)
        }
        Origin::Zero => {
            let mut times = Vec::with_capacity(raw_count);
            for r in &records {
                match r.value {
                    Value::Days(v) => times.push(v),
                    Value::Instant(_) => {
                        return Err(IngestError::Record {
                            line: r.line,
                            message: "a zero origin needs day counts, not calendar timestamps".into(),
                        })
                    }
                }
            }
            (String::from("0"), times, records.iter().map(|r| r.resolution).collect())
        }
    };

    if let DedupPolicy::Jitter { seed } = opts.dedup {
        let mut rng = EventRng::new(seed);
        for (t, res) in times.iter_mut().zip(&resolutions) {
            *t += rng.uniform() * res;
        }
    }
    times.sort_by(f64::total_cmp);

    // the origin occupies t = 0, so events there collide with it
    let mut kept = Vec::with_capacity(times.len());
    let mut last = 0.0;
    for t in times {
        if t > last {
            kept.push(t);
            last = t;
        }
    }
    let consumed_origin = usize::from(opts.origin == Origin::EarliestRecord);
    let dropped_duplicates = raw_count - consumed_origin - kept.len();
    let horizon = *kept.last().ok_or(IngestError::NoEvents)?;
    let stream = EventStream::new(kept, horizon)?.with_origin_label(origin_label);
    Ok(IngestedSeries {
        stream,
        source_format,
        raw_count,
        dropped_duplicates,
    })
}

fn compare(a: Value, b: Value) -> std::cmp::Ordering {
    match (a, b) {
        (Value::Days(x), Value::Days(y)) => x.total_cmp(&y),
        (Value::Instant(x), Value::Instant(y)) => x.cmp(&y),
        // csv_records rejects mixed columns and the line parsers are uniform
        _ => unreachable!("mixed record kinds"),
    }
}

fn offset(origin: Value, v: Value) -> f64 {
    match (origin, v) {
        (Value::Days(o), Value::Days(x)) => x - o,
        (Value::Instant(o), Value::Instant(x)) => days_between(o, x),
        _ => unreachable!("mixed record kinds"),
    }
}

fn label(origin: Value) -> String {
    match origin {
        Value::Days(v) => format!("{v}"),
        Value::Instant(dt) => dt.format("%Y-%m-%dT%H:%M:%S%.f").to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ingest(input: &str, format: InputFormat) -> Result<IngestedSeries, IngestError> {
        parse_timestamps(input, &format, &IngestOptions::default())
    }

    #[test]
    fn calendar_dates_become_days_since_first() {
        let s = ingest("2007-03-15\n2007-03-16\n2007-03-18\n", InputFormat::Auto).unwrap();
        assert_eq!(s.stream.times(), &[1.0, 3.0]);
        assert_eq!(s.source_format, SourceFormat::Iso8601Lines);
        assert_eq!(s.raw_count, 3);
        assert_eq!(s.dropped_duplicates, 0);
        assert_eq!(s.stream.origin_label(), Some("2007-03-15T00:00:00"));
    }

    #[test]
    fn numeric_duplicates_dropped() {
        let s = ingest("0\n2.5\n2.5\n7", InputFormat::Auto).unwrap();
        assert_eq!(s.stream.times(), &[2.5, 7.0]);
        assert_eq!(s.source_format, SourceFormat::NumericLines);
        assert_eq!(s.dropped_duplicates, 1);
        assert_eq!(s.raw_count, s.stream.len() + s.dropped_duplicates + 1);
    }

    #[test]
    fn datetimes_and_offsets() {
        let s = ingest(
            "2010-01-01T00:00:00Z\n2010-01-01T12:00:00+00:00\n2010-01-02 06:00\n2010-01-01T18:00:00.5",
            InputFormat::Iso8601,
        )
        .unwrap();
        let t = s.stream.times();
        assert_eq!(t[0], 0.5);
        assert!((t[1] - (0.75 + 0.5 / SECONDS_PER_DAY)).abs() < 1e-12);
        assert_eq!(t[2], 1.25);
    }

    #[test]
    fn unsorted_input_is_sorted_and_origin_is_earliest() {
        let s = ingest("2007-3-20\n2007-3-15\n2007-3-16", InputFormat::Auto).unwrap();
        assert_eq!(s.stream.times(), &[1.0, 5.0]);
    }

    #[test]
    fn errors_name_the_line() {
        let err = ingest("2007-03-15\n\n2007-03-16\nyesterday\n", InputFormat::Auto).unwrap_err();
        assert!(matches!(err, IngestError::Record { line: 4, .. }), "{err}");
        assert!(err.to_string().starts_with("line 4:"));
        let err = ingest("1\n-2\n", InputFormat::Numeric).unwrap_err();
        assert!(matches!(err, IngestError::Record { line: 2, .. }));
        assert!(matches!(ingest("", InputFormat::Auto), Err(IngestError::Empty)));
        assert!(matches!(ingest("# nothing\n\n", InputFormat::Numeric), Err(IngestError::Empty)));
        assert!(matches!(ingest("3\n3\n", InputFormat::Numeric), Err(IngestError::NoEvents)));
    }

    #[test]
    fn csv_column() {
        let text = "id,posted\n1,2009-05-01\n2,2009-05-03\n3,2009-05-03\n";
        let s = ingest(text, InputFormat::Csv { column: "posted".into() }).unwrap();
        assert_eq!(s.source_format, SourceFormat::CsvColumn);
        assert_eq!(s.stream.times(), &[2.0]);
        assert_eq!(s.dropped_duplicates, 1);
        assert_eq!(s.raw_count, 3);

        let err = ingest(text, InputFormat::Csv { column: "when".into() }).unwrap_err();
        assert!(matches!(err, IngestError::MissingColumn(_)));
        let err = ingest("a,b\n1,x\n", InputFormat::Csv { column: "b".into() }).unwrap_err();
        assert!(matches!(err, IngestError::Record { line: 2, .. }), "{err}");
    }

    #[test]
    fn auto_detects_a_header() {
        let s = ingest("time_days\n0.5\n1.25\n4\n", InputFormat::Auto).unwrap();
        assert_eq!(s.source_format, SourceFormat::CsvColumn);
        assert_eq!(s.stream.times(), &[0.75, 3.5]);
        let s = ingest("posted\n2007-03-15\n2007-03-18\n", InputFormat::Auto).unwrap();
        assert_eq!(s.stream.times(), &[3.0]);
        assert!(matches!(
            ingest("id,when\n1,2007-03-15\n", InputFormat::Auto),
            Err(IngestError::Record { line: 1, .. })
        ));
    }

    #[test]
    fn zero_origin_keeps_values() {
        let opts = IngestOptions {
            origin: Origin::Zero,
            ..IngestOptions::default()
        };
        let s = parse_timestamps("time_days\n0.5\n1.25\n", &InputFormat::Csv { column: "time_days".into() }, &opts).unwrap();
        assert_eq!(s.stream.times(), &[0.5, 1.25]);
        assert_eq!(s.raw_count, 2);
        let s = parse_timestamps("0\n1\n", &InputFormat::Numeric, &opts).unwrap();
        assert_eq!(s.stream.times(), &[1.0]);
        assert_eq!(s.dropped_duplicates, 1);
        assert!(parse_timestamps("2001-01-01\n", &InputFormat::Iso8601, &opts).is_err());
    }

    #[test]
    fn jitter_separates_ties_within_a_day() {
        let opts = IngestOptions {
            dedup: DedupPolicy::Jitter { seed: 3 },
            ..IngestOptions::default()
        };
        let text = "2007-03-15\n2007-03-15\n2007-03-16\n2007-03-16\n2007-03-16\n";
        let s = parse_timestamps(text, &InputFormat::Auto, &opts).unwrap();
        assert_eq!(s.dropped_duplicates, 0);
        assert_eq!(s.stream.len(), 4);
        let t = s.stream.times();
        assert!(t[0] > 0.0 && t[0] < 1.0);
        assert!(t[1..].iter().all(|&x| (1.0..2.0).contains(&x)));
        assert_eq!(parse_timestamps(text, &InputFormat::Auto, &opts).unwrap(), s);
    }

    #[test]
    fn large_file_counts_every_record() {
        let start = NaiveDate::from_ymd_opt(2007, 3, 15).unwrap();
        let text: String = (0..588)
            .map(|i| format!("{}\n", start + chrono::Days::new(i * 1073 / 587)))
            .collect();
        let s = ingest(&text, InputFormat::Auto).unwrap();
        assert_eq!(s.raw_count, 588);
        assert_eq!(s.raw_count, s.stream.len() + s.dropped_duplicates + 1);
        assert_eq!(s.stream.horizon(), 1073.0);
    }
}
