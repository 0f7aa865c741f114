//! Event stream serialization.
//!
//! Binary layout (all little-endian): magic `"NEVT"`, version `u16` = 1,
//! `n_channels: u16`, `duration_us: u64`, `event_count: u64`, then
//! `event_count` records of `{channel: u16, timestamp_us: u64, polarity: i8}`
//! (11 bytes each).
//!
//! CSV: header line `channel,timestamp_us,polarity`, one event per line.
//! CSV carries no stream metadata, so `n_channels` and `duration_us` are
//! inferred as `max(channel)+1` and `max(timestamp)` on read.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::{Event, EventError, EventStream};

pub const BINARY_MAGIC: &[u8; 4] = b"NEVT";
pub const BINARY_VERSION: u16 = 1;
const HEADER_LEN: u64 = 4 + 2 + 2 + 8 + 8;
const RECORD_LEN: u64 = 2 + 8 + 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Binary,
    Csv,
}

#[derive(Debug, Error)]
pub enum EventIoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: byte {offset}: {message}")]
    MalformedBinary {
        path: String,
        offset: u64,
        message: String,
    },
    #[error("{path}: line {line}: {message}")]
    MalformedCsv {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Domain {
        path: String,
        #[source]
        source: EventError,
    },
}

/// Result of [`read_events`]: the stream plus whether the file's event order
/// violated the canonical sort and had to be re-sorted.
#[derive(Clone, Debug)]
pub struct ReadOutcome {
    pub stream: EventStream,
    pub resorted: bool,
}

pub fn write_events(
    stream: &EventStream,
    path: impl AsRef<Path>,
    format: Format,
) -> Result<(), EventIoError> {
    let path = path.as_ref();
    let io_err = |source| EventIoError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    match format {
        Format::Binary => {
            w.write_all(BINARY_MAGIC).map_err(io_err)?;
            w.write_all(&BINARY_VERSION.to_le_bytes()).map_err(io_err)?;
            w.write_all(&stream.n_channels().to_le_bytes()).map_err(io_err)?;
            w.write_all(&stream.duration_us().to_le_bytes()).map_err(io_err)?;
            w.write_all(&(stream.len() as u64).to_le_bytes()).map_err(io_err)?;
            for ev in stream.events() {
                w.write_all(&ev.channel.to_le_bytes()).map_err(io_err)?;
                w.write_all(&ev.timestamp_us.to_le_bytes()).map_err(io_err)?;
                w.write_all(&ev.polarity.to_le_bytes()).map_err(io_err)?;
            }
        }
        Format::Csv => {
            writeln!(w, "channel,timestamp_us,polarity").map_err(io_err)?;
            for ev in stream.events() {
                writeln!(w, "{},{},{}", ev.channel, ev.timestamp_us, ev.polarity)
                    .map_err(io_err)?;
            }
        }
    }
    w.flush().map_err(io_err)
}

pub fn read_events(path: impl AsRef<Path>, format: Format) -> Result<ReadOutcome, EventIoError> {
    let path = path.as_ref();
    match format {
        Format::Binary => read_binary(path),
        Format::Csv => read_csv(path),
    }
}

fn read_binary(path: &Path) -> Result<ReadOutcome, EventIoError> {
    let p = path.display().to_string();
    let io_err = |source| EventIoError::Io {
        path: p.clone(),
        source,
    };
    let bad = |offset, message: String| EventIoError::MalformedBinary {
        path: p.clone(),
        offset,
        message,
    };

    let mut data = Vec::new();
    File::open(path)
        .map_err(io_err)?
        .read_to_end(&mut data)
        .map_err(io_err)?;

    if data.len() < HEADER_LEN as usize {
        return Err(bad(data.len() as u64, "truncated header".into()));
    }
    if &data[0..4] != BINARY_MAGIC {
        return Err(bad(0, "bad magic (expected \"NEVT\")".into()));
    }
    let version = u16::from_le_bytes([data[4], data[5]]);
    if version != BINARY_VERSION {
        return Err(bad(4, format!("unsupported version {version}")));
    }
    let n_channels = u16::from_le_bytes([data[6], data[7]]);
    let duration_us = u64::from_le_bytes(data[8..16].try_into().unwrap());
    let event_count = u64::from_le_bytes(data[16..24].try_into().unwrap());

    let expected = HEADER_LEN + event_count * RECORD_LEN;
    if (data.len() as u64) != expected {
        return Err(bad(
            data.len() as u64,
            format!(
                "file length {} does not match header event count {event_count} (expected {expected})",
                data.len()
            ),
        ));
    }

    let mut events = Vec::with_capacity(event_count as usize);
    for i in 0..event_count {
        let off = (HEADER_LEN + i * RECORD_LEN) as usize;
        let channel = u16::from_le_bytes([data[off], data[off + 1]]);
        let timestamp_us = u64::from_le_bytes(data[off + 2..off + 10].try_into().unwrap());
        let polarity = data[off + 10] as i8;
        if polarity != 1 && polarity != -1 {
            return Err(bad(
                (off + 10) as u64,
                format!("invalid polarity byte 0x{:02x}", data[off + 10]),
            ));
        }
        events.push(Event::new(channel, timestamp_us, polarity));
    }

    finish(p, n_channels, duration_us, events)
}

fn read_csv(path: &Path) -> Result<ReadOutcome, EventIoError> {
    let p = path.display().to_string();
    let io_err = |source| EventIoError::Io {
        path: p.clone(),
        source,
    };
    let bad = |line, message: String| EventIoError::MalformedCsv {
        path: p.clone(),
        line,
        message,
    };

    let reader = BufReader::new(File::open(path).map_err(io_err)?);
    let mut events = Vec::new();
    let mut max_channel: Option<u16> = None;
    let mut max_ts = 0u64;

    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err)?;
        let lineno = idx + 1;
        if idx == 0 {
            if line.trim() != "channel,timestamp_us,polarity" {
                return Err(bad(
                    lineno,
                    "expected header `channel,timestamp_us,polarity`".into(),
                ));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let channel: u16 = parse_field(&mut fields, "channel").map_err(|m| bad(lineno, m))?;
        let timestamp_us: u64 =
            parse_field(&mut fields, "timestamp_us").map_err(|m| bad(lineno, m))?;
        let polarity: i8 = parse_field(&mut fields, "polarity").map_err(|m| bad(lineno, m))?;
        if fields.next().is_some() {
            return Err(bad(lineno, "too many fields".into()));
        }
        if polarity != 1 && polarity != -1 {
            return Err(bad(lineno, format!("invalid polarity {polarity}")));
        }
        max_channel = Some(max_channel.map_or(channel, |m| m.max(channel)));
        max_ts = max_ts.max(timestamp_us);
        events.push(Event::new(channel, timestamp_us, polarity));
    }

    let n_channels = max_channel.map_or(1, |m| m + 1);
    finish(p, n_channels, max_ts, events)
}

fn parse_field<'a, T: std::str::FromStr>(
    fields: &mut impl Iterator<Item = &'a str>,
    name: &str,
) -> Result<T, String> {
    let raw = fields.next().ok_or_else(|| format!("missing {name}"))?;
    raw.trim()
        .parse()
        .map_err(|_| format!("cannot parse {name} from `{raw}`"))
}

fn finish(
    path: String,
    n_channels: u16,
    duration_us: u64,
    events: Vec<Event>,
) -> Result<ReadOutcome, EventIoError> {
    let (stream, resorted) = EventStream::sorted(n_channels, duration_us, events)
        .map_err(|source| EventIoError::Domain { path, source })?;
    Ok(ReadOutcome { stream, resorted })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> std::path::PathBuf {
        let mut p = std::env::temp_dir();
        p.push(format!("evdec-io-{}-{}", std::process::id(), name));
        p
    }

    #[test]
    fn empty_stream_binary_is_header_only() {
        let path = tmp("empty.nevt");
        let stream = EventStream::new(96, 0, vec![]).unwrap();
        write_events(&stream, &path, Format::Binary).unwrap();
        assert_eq!(std::fs::metadata(&path).unwrap().len(), HEADER_LEN);

        let out = read_events(&path, Format::Binary).unwrap();
        assert_eq!(out.stream.n_channels(), 96);
        assert_eq!(out.stream.duration_us(), 0);
        assert!(out.stream.is_empty());
        assert!(!out.resorted);
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn one_event_binary_layout_is_exact() {
        let path = tmp("one.nevt");
        let stream = EventStream::new(96, 2000, vec![Event::new(5, 1000, 1)]).unwrap();
        write_events(&stream, &path, Format::Binary).unwrap();

        let bytes = std::fs::read(&path).unwrap();
        // header (24 bytes) + one 11-byte record
        assert_eq!(bytes.len() as u64, HEADER_LEN + RECORD_LEN);
        let mut expect = Vec::new();
        expect.extend_from_slice(b"NEVT");
        expect.extend_from_slice(&1u16.to_le_bytes());
        expect.extend_from_slice(&96u16.to_le_bytes());
        expect.extend_from_slice(&2000u64.to_le_bytes());
        expect.extend_from_slice(&1u64.to_le_bytes());
        expect.extend_from_slice(&5u16.to_le_bytes());
        expect.extend_from_slice(&1000u64.to_le_bytes());
        expect.push(1u8);
        assert_eq!(bytes, expect);
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn bad_polarity_byte_reports_offset() {
        let path = tmp("badpol.nevt");
        let stream = EventStream::new(8, 100, vec![Event::new(0, 10, 1)]).unwrap();
        write_events(&stream, &path, Format::Binary).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let pol_off = (HEADER_LEN + RECORD_LEN - 1) as usize;
        bytes[pol_off] = 0x03;
        std::fs::write(&path, &bytes).unwrap();

        let err = read_events(&path, Format::Binary).unwrap_err();
        match err {
            EventIoError::MalformedBinary { offset, message, .. } => {
                assert_eq!(offset, pol_off as u64);
                assert!(message.contains("0x03"));
            }
            other => panic!("expected MalformedBinary, got {other:?}"),
        }
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn csv_parse_error_names_line() {
        let path = tmp("bad.csv");
        std::fs::write(&path, "channel,timestamp_us,polarity\n1,abc,1\n").unwrap();
        let err = read_events(&path, Format::Csv).unwrap_err();
        match err {
            EventIoError::MalformedCsv { line, .. } => assert_eq!(line, 2),
            other => panic!("expected MalformedCsv, got {other:?}"),
        }
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn unsorted_file_is_resorted_and_reported() {
        let path = tmp("unsorted.csv");
        std::fs::write(
            &path,
            "channel,timestamp_us,polarity\n0,500,1\n0,100,-1\n",
        )
        .unwrap();
        let out = read_events(&path, Format::Csv).unwrap();
        assert!(out.resorted);
        assert_eq!(out.stream.events()[0].timestamp_us, 100);
        std::fs::remove_file(&path).ok();
    }
}
