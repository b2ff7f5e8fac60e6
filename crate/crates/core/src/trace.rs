//! Timestamped symbol traces and their on-disk CSV form.

use crate::error::Error;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

/// A 64-bit message identifier, rendered as 16 uppercase hex digits.
///
/// On a CAN-style bus this would be the arbitration id plus whatever
/// discriminator the tap hashes in; the engine only cares that equal ids
/// mean "same message type".
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SymbolId(pub u64);

impl fmt::Display for SymbolId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016X}", self.0)
    }
}

impl fmt::Debug for SymbolId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymbolId({:016X})", self.0)
    }
}

impl FromStr for SymbolId {
    type Err = String;

    /// Accepts exactly 16 uppercase hex digits, nothing else.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() != 16 || !s.bytes().all(|b| b.is_ascii_digit() || (b'A'..=b'F').contains(&b)) {
            return Err(format!("expected 16 uppercase hex digits, got {s:?}"));
        }
        u64::from_str_radix(s, 16)
            .map(SymbolId)
            .map_err(|e| e.to_string())
    }
}

/// One observed message: arrival time in integer milliseconds and its symbol.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct SymbolEvent {
    pub time_ms: u64,
    pub symbol: SymbolId,
}

/// A channel's event stream, ordered by non-decreasing arrival time.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Trace {
    pub channel_id: String,
    pub events: Vec<SymbolEvent>,
}

impl Trace {
    pub fn new(channel_id: impl Into<String>, events: Vec<SymbolEvent>) -> Self {
        let events_ok = events.windows(2).all(|w| w[0].time_ms <= w[1].time_ms);
        debug_assert!(events_ok, "trace events must be time-ordered");
        Trace {
            channel_id: channel_id.into(),
            events,
        }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Wall-clock span of the trace in ms (0 for traces with < 2 events).
    pub fn duration_ms(&self) -> u64 {
        match (self.events.first(), self.events.last()) {
            (Some(a), Some(b)) => b.time_ms - a.time_ms,
            _ => 0,
        }
    }
}

pub const TRACE_HEADER: &str = "time_ms,symbol";

/// Reads a trace file: a `time_ms,symbol` header followed by one
/// `<decimal ms>,<16 hex digits>` row per event. The channel id is taken
/// from the file stem.
pub fn parse_trace(path: &Path) -> Result<Trace, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let channel_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_trace_str(&text, channel_id)
}

/// Same as [`parse_trace`] but over an in-memory string.
pub fn parse_trace_str(text: &str, channel_id: impl Into<String>) -> Result<Trace, Error> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::parse(1, "empty file"))?;
    if header != TRACE_HEADER {
        return Err(Error::parse(
            1,
            format!("expected header {TRACE_HEADER:?}, got {header:?}"),
        ));
    }

    let mut events = Vec::new();
    let mut prev_time: Option<u64> = None;
    for (idx, line) in lines.enumerate() {
        let lineno = idx + 2;
        let (time_part, sym_part) = line
            .split_once(',')
            .ok_or_else(|| Error::parse(lineno, format!("malformed row {line:?}")))?;
        if time_part.is_empty() || !time_part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Error::parse(
                lineno,
                format!("invalid timestamp {time_part:?}"),
            ));
        }
        let time_ms: u64 = time_part
            .parse()
            .map_err(|_| Error::parse(lineno, format!("timestamp {time_part:?} out of range")))?;
        let symbol = SymbolId::from_str(sym_part).map_err(|e| Error::parse(lineno, e))?;
        if let Some(prev) = prev_time {
            if time_ms < prev {
                return Err(Error::Parse {
                    line: lineno,
                    msg: "decreasing timestamp".to_string(),
                });
            }
        }
        prev_time = Some(time_ms);
        events.push(SymbolEvent { time_ms, symbol });
    }

    Ok(Trace {
        channel_id: channel_id.into(),
        events,
    })
}

/// Serializes a trace back to the CSV form read by [`parse_trace`].
/// Round-trips bit-exactly.
pub fn write_trace(trace: &Trace, path: &Path) -> Result<(), Error> {
    fs::write(path, trace_to_string(trace)).map_err(|e| Error::io(path, e))
}

pub fn trace_to_string(trace: &Trace) -> String {
    let mut out = String::with_capacity(24 * (trace.events.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for ev in &trace.events {
        out.push_str(&format!("{},{}\n", ev.time_ms, ev.symbol));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sid(x: u64) -> SymbolId {
        SymbolId(x)
    }

    #[test]
    fn symbol_id_formats_as_16_upper_hex() {
        assert_eq!(sid(0x1A2B).to_string(), "0000000000001A2B");
        assert_eq!(sid(u64::MAX).to_string(), "FFFFFFFFFFFFFFFF");
        assert_eq!(sid(0).to_string(), "0000000000000000");
    }

    #[test]
    fn symbol_id_parses_only_canonical_form() {
        assert_eq!("0000000000001A2B".parse::<SymbolId>().unwrap(), sid(0x1A2B));
        assert!("1A2B".parse::<SymbolId>().is_err()); // too short
        assert!("0000000000001a2b".parse::<SymbolId>().is_err()); // lowercase
        assert!("000000000000001A2B".parse::<SymbolId>().is_err()); // too long
        assert!("0000000000001A2G".parse::<SymbolId>().is_err()); // bad digit
        assert!(" 000000000001A2B".parse::<SymbolId>().is_err()); // whitespace
    }

    #[test]
    fn parses_two_event_trace() {
        let text = "time_ms,symbol\n0,0000000000000001\n5,00000000000000FF\n";
        let trace = parse_trace_str(text, "ch").unwrap();
        assert_eq!(trace.events.len(), 2);
        assert_eq!(trace.events[0], SymbolEvent { time_ms: 0, symbol: sid(1) });
        assert_eq!(trace.events[1], SymbolEvent { time_ms: 5, symbol: sid(0xFF) });
    }

    #[test]
    fn rejects_decreasing_timestamps_with_line_number() {
        let text = "time_ms,symbol\n5,0000000000000001\n3,0000000000000001\n";
        let err = parse_trace_str(text, "ch").unwrap_err();
        assert_eq!(err.to_string(), "decreasing timestamp at line 3");
    }

    #[test]
    fn equal_timestamps_are_allowed() {
        let text = "time_ms,symbol\n5,0000000000000001\n5,0000000000000002\n";
        assert_eq!(parse_trace_str(text, "ch").unwrap().events.len(), 2);
    }

    #[test]
    fn rejects_empty_file_and_bad_header() {
        assert!(parse_trace_str("", "ch").is_err());
        let err = parse_trace_str("time,sym\n", "ch").unwrap_err();
        assert!(err.to_string().contains("line 1"));
    }

    #[test]
    fn rejects_malformed_rows() {
        for row in ["7", "7,", ",0000000000000001", "a,0000000000000001", "-1,0000000000000001", "+1,0000000000000001"] {
            let text = format!("time_ms,symbol\n{row}\n");
            assert!(parse_trace_str(&text, "ch").is_err(), "row {row:?} should fail");
        }
    }

    #[test]
    fn empty_trace_writes_header_only() {
        let trace = Trace::new("ch", vec![]);
        assert_eq!(trace_to_string(&trace), "time_ms,symbol\n");
    }

    #[test]
    fn file_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ch.csv");
        let trace = Trace::new(
            "ch",
            vec![
                SymbolEvent { time_ms: 0, symbol: sid(0x1) },
                SymbolEvent { time_ms: 0, symbol: sid(0xF000) },
                SymbolEvent { time_ms: 12, symbol: sid(u64::MAX) },
            ],
        );
        write_trace(&trace, &path).unwrap();
        let back = parse_trace(&path).unwrap();
        assert_eq!(back, trace);
        // and the bytes themselves are stable
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "time_ms,symbol\n0,0000000000000001\n0,000000000000F000\n12,FFFFFFFFFFFFFFFF\n"
        );
    }
}
