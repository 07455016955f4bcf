//! Observation records and the line-delimited trace file format.
//!
//! A trace file is UTF-8 with one JSON object per line. Line 1 is the header
//! `{"format":"tokenleak-trace/1","mode":"streaming"|"non-streaming"}`; every
//! following line is a record carrying exactly the keys `id`, `label`,
//! `input_bytes`, `output_bytes`, `output_tokens`, `t_send`, `t_first` and
//! `t_done`. Nullable keys must still be present. Times are decimal seconds
//! with microsecond resolution and are written with six fractional digits,
//! which is the canonical form produced by [`Trace::to_canonical_string`].

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

pub const TRACE_FORMAT: &str = "tokenleak-trace/1";

/// Wall-clock instant or duration in whole microseconds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(i64);

impl Timestamp {
    pub const ZERO: Timestamp = Timestamp(0);

    pub const fn from_micros(micros: i64) -> Self {
        Timestamp(micros)
    }

    /// Rounds to the nearest microsecond.
    pub fn from_secs_f64(secs: f64) -> Self {
        Timestamp((secs * 1e6).round() as i64)
    }

    pub const fn micros(self) -> i64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub fn offset_secs(self, secs: f64) -> Self {
        Timestamp(self.0 + (secs * 1e6).round() as i64)
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{sign}{}.{:06}", abs / 1_000_000, abs % 1_000_000)
    }
}

/// Whether per-token timing is visible on the wire.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Streaming,
    NonStreaming,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Streaming => "streaming",
            Mode::NonStreaming => "non-streaming",
        }
    }
}

/// One request/response observation.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationRecord {
    pub id: String,
    /// Ground-truth language or class name; absent in attack traces.
    pub label: Option<String>,
    pub input_bytes: u64,
    pub output_bytes: u64,
    pub output_tokens: Option<u64>,
    pub t_send: Timestamp,
    pub t_first: Option<Timestamp>,
    pub t_done: Option<Timestamp>,
}

impl ObservationRecord {
    /// A length-only record sent at time zero.
    pub fn with_counts(
        id: impl Into<String>,
        label: Option<&str>,
        input_bytes: u64,
        output_bytes: u64,
        output_tokens: u64,
    ) -> Self {
        ObservationRecord {
            id: id.into(),
            label: label.map(str::to_owned),
            input_bytes,
            output_bytes,
            output_tokens: Some(output_tokens),
            t_send: Timestamp::ZERO,
            t_first: None,
            t_done: None,
        }
    }

    /// `t_done - t_send` in seconds, when the completion time is known.
    pub fn duration(&self) -> Option<f64> {
        self.t_done
            .map(|done| (done.micros() - self.t_send.micros()) as f64 / 1e6)
    }

    /// Checks the record-level invariants for a trace of the given mode.
    pub fn validate(&self, mode: Mode) -> Result<(), InvariantViolation> {
        let fail = |field: &'static str, message: &str| {
            Err(InvariantViolation {
                field,
                message: message.to_owned(),
            })
        };
        if self.input_bytes < 1 {
            return fail("input_bytes", "must be at least 1");
        }
        if self.output_tokens == Some(0) {
            return fail("output_tokens", "must be at least 1 when present");
        }
        if self.t_send.micros() < 0 {
            return fail("t_send", "must be non-negative");
        }
        if let Some(first) = self.t_first {
            if mode == Mode::NonStreaming {
                return fail("t_first", "not observable in a non-streaming trace");
            }
            if first < self.t_send {
                return fail("t_first", "timestamp ordering violated: t_send <= t_first");
            }
        }
        if let Some(done) = self.t_done {
            if done < self.t_send {
                return fail("t_done", "timestamp ordering violated: t_send <= t_done");
            }
            if matches!(self.t_first, Some(first) if done < first) {
                return fail("t_done", "timestamp ordering violated: t_first <= t_done");
            }
        }
        if self.output_tokens.is_none() && self.t_done.is_none() {
            return fail(
                "output_tokens",
                "unusable record: neither output_tokens nor t_done present",
            );
        }
        Ok(())
    }

    fn write_json(&self, out: &mut String) {
        use fmt::Write as _;
        let json_str = |s: &str| serde_json::to_string(s).expect("string serialization");
        let opt_num = |v: Option<u64>| v.map_or_else(|| "null".to_owned(), |n| n.to_string());
        let opt_time = |v: Option<Timestamp>| v.map_or_else(|| "null".to_owned(), |t| t.to_string());
        let _ = write!(
            out,
            "{{\"id\":{},\"label\":{},\"input_bytes\":{},\"output_bytes\":{},\"output_tokens\":{},\"t_send\":{},\"t_first\":{},\"t_done\":{}}}",
            json_str(&self.id),
            self.label.as_deref().map_or_else(|| "null".to_owned(), json_str),
            self.input_bytes,
            self.output_bytes,
            opt_num(self.output_tokens),
            self.t_send,
            opt_time(self.t_first),
            opt_time(self.t_done),
        );
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("invariant violated on `{field}`: {message}")]
pub struct InvariantViolation {
    pub field: &'static str,
    pub message: String,
}

#[derive(Debug, PartialEq, Eq, Error)]
pub enum LineErrorKind {
    #[error("malformed record: {0}")]
    Malformed(String),
    #[error(transparent)]
    Invariant(#[from] InvariantViolation),
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
}

#[derive(Debug, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct LineError {
    pub line: usize,
    pub kind: LineErrorKind,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("cannot read trace {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("trace is empty: missing header line")]
    MissingHeader,
    #[error("line 1: bad header: {0}")]
    Header(String),
    #[error("{} invalid line(s): {}", .0.len(), join_lines(.0))]
    Lines(Vec<LineError>),
}

fn join_lines(errors: &[LineError]) -> String {
    errors
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// An ordered collection of observations sharing one observability mode.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub mode: Mode,
    pub records: Vec<ObservationRecord>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHeader {
    format: String,
    mode: Mode,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    id: String,
    #[serde(deserialize_with = "present_nullable")]
    label: Option<String>,
    input_bytes: u64,
    output_bytes: u64,
    #[serde(deserialize_with = "present_nullable")]
    output_tokens: Option<u64>,
    t_send: f64,
    #[serde(deserialize_with = "present_nullable")]
    t_first: Option<f64>,
    #[serde(deserialize_with = "present_nullable")]
    t_done: Option<f64>,
}

// Using `deserialize_with` makes serde treat the key as required even though
// the value may be null.
fn present_nullable<'de, D, T>(de: D) -> Result<Option<T>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    Option::<T>::deserialize(de)
}

impl Trace {
    pub fn new(mode: Mode, records: Vec<ObservationRecord>) -> Self {
        Trace { mode, records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Trace, TraceError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| TraceError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Trace::parse(&text)
    }

    /// Parses a whole trace, collecting every bad line before failing.
    pub fn parse(text: &str) -> Result<Trace, TraceError> {
        let mut lines = text.lines().enumerate();
        let header_line = loop {
            match lines.next() {
                Some((_, l)) if l.trim().is_empty() => continue,
                Some((_, l)) => break l,
                None => return Err(TraceError::MissingHeader),
            }
        };
        let header: RawHeader =
            serde_json::from_str(header_line).map_err(|e| TraceError::Header(e.to_string()))?;
        if header.format != TRACE_FORMAT {
            return Err(TraceError::Header(format!(
                "unsupported format `{}`, expected `{TRACE_FORMAT}`",
                header.format
            )));
        }

        let mut records = Vec::new();
        let mut errors = Vec::new();
        let mut seen = HashSet::new();
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let line_no = idx + 1;
            match parse_record(line, header.mode) {
                Ok(rec) => {
                    if !seen.insert(rec.id.clone()) {
                        errors.push(LineError {
                            line: line_no,
                            kind: LineErrorKind::DuplicateId(rec.id),
                        });
                    } else {
                        records.push(rec);
                    }
                }
                Err(kind) => errors.push(LineError {
                    line: line_no,
                    kind,
                }),
            }
        }
        if errors.is_empty() {
            Ok(Trace {
                mode: header.mode,
                records,
            })
        } else {
            Err(TraceError::Lines(errors))
        }
    }

    pub fn to_canonical_string(&self) -> String {
        let mut out = format!(
            "{{\"format\":\"{TRACE_FORMAT}\",\"mode\":\"{}\"}}\n",
            self.mode.as_str()
        );
        for rec in &self.records {
            rec.write_json(&mut out);
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_canonical_string())
    }

    /// Records carrying `label`, in trace order.
    pub fn with_label<'a>(&'a self, label: &'a str) -> impl Iterator<Item = &'a ObservationRecord> {
        self.records
            .iter()
            .filter(move |r| r.label.as_deref() == Some(label))
    }

    /// Distinct labels in sorted order.
    pub fn labels(&self) -> Vec<String> {
        let mut labels: Vec<String> = self
            .records
            .iter()
            .filter_map(|r| r.label.clone())
            .collect();
        labels.sort();
        labels.dedup();
        labels
    }
}

fn parse_record(line: &str, mode: Mode) -> Result<ObservationRecord, LineErrorKind> {
    let raw: RawRecord =
        serde_json::from_str(line).map_err(|e| LineErrorKind::Malformed(e.to_string()))?;
    let time = |field: &'static str, secs: f64| {
        if secs.is_finite() && secs >= 0.0 {
            Ok(Timestamp::from_secs_f64(secs))
        } else {
            Err(LineErrorKind::Invariant(InvariantViolation {
                field,
                message: "time must be a finite non-negative number of seconds".into(),
            }))
        }
    };
    let rec = ObservationRecord {
        id: raw.id,
        label: raw.label,
        input_bytes: raw.input_bytes,
        output_bytes: raw.output_bytes,
        output_tokens: raw.output_tokens,
        t_send: time("t_send", raw.t_send)?,
        t_first: raw.t_first.map(|t| time("t_first", t)).transpose()?,
        t_done: raw.t_done.map(|t| time("t_done", t)).transpose()?,
    };
    rec.validate(mode)?;
    Ok(rec)
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<Trace, TraceError> {
    Trace::load(path)
}

/// Per-record side-channel features.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivedFeatures {
    /// Output bytes per generated token.
    pub token_density: f64,
    /// Output bytes per input byte.
    pub io_ratio: f64,
}

impl DerivedFeatures {
    /// Features from a (possibly estimated, possibly fractional) token count.
    pub fn from_parts(output_bytes: u64, output_tokens: f64, input_bytes: u64) -> Self {
        DerivedFeatures {
            token_density: output_bytes as f64 / output_tokens,
            io_ratio: output_bytes as f64 / input_bytes as f64,
        }
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.token_density, self.io_ratio]
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("record `{0}` has no output token count; estimate it from timing first")]
pub struct MissingTokens(pub String);

pub fn derive_features(rec: &ObservationRecord) -> Result<DerivedFeatures, MissingTokens> {
    let tokens = rec
        .output_tokens
        .ok_or_else(|| MissingTokens(rec.id.clone()))?;
    Ok(DerivedFeatures::from_parts(
        rec.output_bytes,
        tokens as f64,
        rec.input_bytes,
    ))
}
