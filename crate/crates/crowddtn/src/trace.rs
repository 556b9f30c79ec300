//! Newline-delimited event trace format.
//!
//! One `time,kind,msg,from,to` record per line after a fixed header line.
//! Times are written in shortest round-trip form, so parsing a written trace
//! reproduces the original log bit for bit.

use std::fmt::Write as _;

use crate::metrics::{Event, EventKind, EventLog, MessageId};
use crate::scenario::NodeId;

pub const TRACE_HEADER: &str = "time,kind,msg,from,to";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TraceParseError {
    #[error("line 1: expected header `{TRACE_HEADER}`")]
    MissingHeader,
    #[error("line {line}: expected 5 comma-separated fields, found {found}")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}: invalid {field}: `{value}`")]
    InvalidField {
        line: usize,
        field: &'static str,
        value: String,
    },
    #[error("line {line}: event time moves backwards")]
    TimeRegression { line: usize },
}

/// Renders the log in trace format, header included.
pub fn write_trace(log: &EventLog) -> String {
    let mut out = String::with_capacity(16 + log.len() * 24);
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for e in log.events() {
        let _ = write!(out, "{},{},{},", e.time, e.kind.as_str(), e.message);
        if let Some(n) = e.from {
            let _ = write!(out, "{n}");
        }
        out.push(',');
        if let Some(n) = e.to {
            let _ = write!(out, "{n}");
        }
        out.push('\n');
    }
    out
}

/// Parses a trace produced by [`write_trace`]. Never panics on malformed
/// input; the first offending line is reported.
pub fn parse_trace(text: &str) -> Result<EventLog, TraceParseError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == TRACE_HEADER => {}
        _ => return Err(TraceParseError::MissingHeader),
    }

    let mut log = EventLog::new();
    let mut prev_time = f64::NEG_INFINITY;
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != 5 {
            return Err(TraceParseError::FieldCount {
                line,
                found: fields.len(),
            });
        }
        let time = parse_time(fields[0], line)?;
        if time < prev_time {
            return Err(TraceParseError::TimeRegression { line });
        }
        prev_time = time;
        let kind = EventKind::parse(fields[1]).ok_or_else(|| TraceParseError::InvalidField {
            line,
            field: "kind",
            value: fields[1].to_string(),
        })?;
        let message = fields[2]
            .parse::<u64>()
            .map(MessageId)
            .map_err(|_| TraceParseError::InvalidField {
                line,
                field: "msg",
                value: fields[2].to_string(),
            })?;
        let from = parse_node(fields[3], "from", line)?;
        let to = parse_node(fields[4], "to", line)?;
        log.push(Event {
            time,
            kind,
            message,
            from,
            to,
        });
    }
    Ok(log)
}

fn parse_time(s: &str, line: usize) -> Result<f64, TraceParseError> {
    let invalid = || TraceParseError::InvalidField {
        line,
        field: "time",
        value: s.to_string(),
    };
    let t: f64 = s.parse().map_err(|_| invalid())?;
    if !t.is_finite() || t < 0.0 {
        return Err(invalid());
    }
    Ok(t)
}

fn parse_node(s: &str, field: &'static str, line: usize) -> Result<Option<NodeId>, TraceParseError> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<u32>()
        .map(|n| Some(NodeId(n)))
        .map_err(|_| TraceParseError::InvalidField {
            line,
            field,
            value: s.to_string(),
        })
}
