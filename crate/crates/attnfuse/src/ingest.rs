//! Parsing and validation of the three input file kinds: per-frame
//! feature CSVs, per-second attention files, and landmark CSVs.
//!
//! Parsers are pure functions over file contents; the resulting data
//! model is immutable after construction and grouped for downstream
//! per-second averaging.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::mat::Mat;
use crate::types::{Category, Point2};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: malformed row: {msg}")]
    MalformedRow { line: u64, msg: String },
    #[error("line {line}: category {category} expects {expected} values, got {got}")]
    DimensionMismatch {
        line: u64,
        category: Category,
        expected: usize,
        got: usize,
    },
    #[error("line {line}: non-monotonic timestamp {timestamp} in stream {stream}")]
    NonMonotonicTimestamp {
        line: u64,
        stream: String,
        timestamp: f64,
    },
    #[error("line {line}: value out of range: {msg}")]
    OutOfRange { line: u64, msg: String },
    #[error("empty stream")]
    EmptyStream,
}

pub type Result<T> = std::result::Result<T, IngestError>;

/// One timestamped feature observation for a single category.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameFeatureRecord {
    pub user_id: String,
    pub session_id: String,
    /// Seconds from session start.
    pub timestamp: f64,
    pub category: Category,
    /// Length equals `category.dim()`.
    pub values: Vec<f64>,
}

/// All observations of one (user, session, category) stream, kept in
/// timestamp order. Values are stored row-major, one frame per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryTrack {
    pub timestamps: Vec<f64>,
    pub values: Mat,
}

impl CategoryTrack {
    fn new(dim: usize) -> Self {
        CategoryTrack {
            timestamps: Vec::new(),
            values: Mat::with_cols(dim),
        }
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }
}

/// Frame features grouped by user, session, and category.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameFeatureStream {
    // user -> session -> category -> track
    streams: BTreeMap<String, BTreeMap<String, BTreeMap<Category, CategoryTrack>>>,
}

impl FrameFeatureStream {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append a record, enforcing the per-category dimension and the
    /// strictly increasing timestamp invariant of its stream.
    pub fn insert(&mut self, rec: FrameFeatureRecord, line: u64) -> Result<()> {
        let expected = rec.category.dim();
        if rec.values.len() != expected {
            return Err(IngestError::DimensionMismatch {
                line,
                category: rec.category,
                expected,
                got: rec.values.len(),
            });
        }
        if !rec.timestamp.is_finite() || rec.timestamp < 0.0 {
            return Err(IngestError::MalformedRow {
                line,
                msg: format!("timestamp {} is not a finite non-negative number", rec.timestamp),
            });
        }
        if rec.values.iter().any(|v| !v.is_finite()) {
            return Err(IngestError::MalformedRow {
                line,
                msg: "non-finite feature value".into(),
            });
        }
        if rec.category == Category::Eb {
            for &v in &rec.values {
                if !(0.0..=1.0).contains(&v) {
                    return Err(IngestError::OutOfRange {
                        line,
                        msg: format!("EB value {v} outside [0, 1]"),
                    });
                }
            }
        }
        let track = self
            .streams
            .entry(rec.user_id.clone())
            .or_default()
            .entry(rec.session_id.clone())
            .or_default()
            .entry(rec.category)
            .or_insert_with(|| CategoryTrack::new(expected));
        if let Some(&last) = track.timestamps.last() {
            if rec.timestamp <= last {
                return Err(IngestError::NonMonotonicTimestamp {
                    line,
                    stream: format!("{}/{}/{}", rec.user_id, rec.session_id, rec.category),
                    timestamp: rec.timestamp,
                });
            }
        }
        track.timestamps.push(rec.timestamp);
        track.values.push_row(&rec.values);
        Ok(())
    }

    pub fn users(&self) -> impl Iterator<Item = &str> {
        self.streams.keys().map(String::as_str)
    }

    pub fn sessions(&self, user: &str) -> impl Iterator<Item = &str> {
        self.streams
            .get(user)
            .into_iter()
            .flat_map(|s| s.keys().map(String::as_str))
    }

    pub fn track(&self, user: &str, session: &str, category: Category) -> Option<&CategoryTrack> {
        self.streams.get(user)?.get(session)?.get(&category)
    }

    pub fn categories(&self, user: &str, session: &str) -> Vec<Category> {
        self.streams
            .get(user)
            .and_then(|s| s.get(session))
            .map(|m| m.keys().copied().collect())
            .unwrap_or_default()
    }

    /// Drop any existing track for (user, session, category) and replace it.
    pub fn replace_track(&mut self, user: &str, session: &str, category: Category, track: CategoryTrack) {
        self.streams
            .entry(user.to_string())
            .or_default()
            .entry(session.to_string())
            .or_default()
            .insert(category, track);
    }

    pub fn is_empty(&self) -> bool {
        self.streams.is_empty()
    }

    /// Iterate all (user, session, category, track) in canonical order.
    pub fn iter_tracks(&self) -> impl Iterator<Item = (&str, &str, Category, &CategoryTrack)> {
        self.streams.iter().flat_map(|(u, sessions)| {
            sessions.iter().flat_map(move |(s, cats)| {
                cats.iter()
                    .map(move |(c, t)| (u.as_str(), s.as_str(), *c, t))
            })
        })
    }
}

/// Per-second attention ground truth for one user, values in [0, 100].
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionSeries {
    pub user_id: String,
    pub values: Vec<f64>,
}

/// One frame of 14 named landmarks: P0..P5 the annotated eye, P6..P13
/// head and nose extremes.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkFrame {
    pub user_id: String,
    pub timestamp: f64,
    pub valid: bool,
    pub points: [Point2; 14],
}

const FRAME_HEADER: &str = "user_id,session_id,timestamp,category,v1";
const LANDMARK_COLS: usize = 3 + 28;

fn parse_f64(field: &str, line: u64, what: &str) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| IngestError::MalformedRow {
        line,
        msg: format!("cannot parse {what} from `{field}`"),
    })
}

/// Parse a frame-feature CSV (`user_id,session_id,timestamp,category,v1[,v2,...]`).
pub fn parse_frame_features(path: &Path) -> Result<FrameFeatureStream> {
    parse_frame_features_reader(BufReader::new(File::open(path)?))
}

pub fn parse_frame_features_reader<R: Read>(reader: R) -> Result<FrameFeatureStream> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut stream = FrameFeatureStream::new();
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| IngestError::MalformedRow {
            line: idx as u64 + 1,
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(idx as u64 + 1, |p| p.line());
        if idx == 0 && rec.get(0) == Some("user_id") {
            continue; // header
        }
        if rec.len() < 5 {
            return Err(IngestError::MalformedRow {
                line,
                msg: format!("expected at least 5 fields, got {}", rec.len()),
            });
        }
        let category: Category =
            rec.get(3).unwrap().parse().map_err(|e| IngestError::MalformedRow {
                line,
                msg: format!("{e}"),
            })?;
        let mut values = Vec::with_capacity(category.dim());
        for field in rec.iter().skip(4) {
            values.push(parse_f64(field, line, "feature value")?);
        }
        stream.insert(
            FrameFeatureRecord {
                user_id: rec.get(0).unwrap().to_string(),
                session_id: rec.get(1).unwrap().to_string(),
                timestamp: parse_f64(rec.get(2).unwrap(), line, "timestamp")?,
                category,
                values,
            },
            line,
        )?;
    }
    Ok(stream)
}

/// Write a stream in canonical order: users and sessions sorted, rows
/// merged by (timestamp, category order). Floats use shortest
/// round-trip formatting, so parse(write(parse(f))) == parse(f).
pub fn write_frame_features<W: Write>(stream: &FrameFeatureStream, w: &mut W) -> io::Result<()> {
    writeln!(w, "{FRAME_HEADER}")?;
    for (user, sessions) in &stream.streams {
        for (session, cats) in sessions {
            // k-way merge over the per-category tracks
            let tracks: Vec<(Category, &CategoryTrack)> =
                cats.iter().map(|(c, t)| (*c, t)).collect();
            let mut cursor = vec![0usize; tracks.len()];
            loop {
                let mut best: Option<(usize, f64)> = None;
                for (k, (_, t)) in tracks.iter().enumerate() {
                    if cursor[k] < t.len() {
                        let ts = t.timestamps[cursor[k]];
                        // ties broken by canonical category order
                        let better = match best {
                            None => true,
                            Some((bk, bts)) => {
                                ts < bts || (ts == bts && tracks[k].0 < tracks[bk].0)
                            }
                        };
                        if better {
                            best = Some((k, ts));
                        }
                    }
                }
                let Some((k, ts)) = best else { break };
                let (cat, t) = tracks[k];
                write!(w, "{user},{session},{ts},{cat}")?;
                for v in t.values.row(cursor[k]) {
                    write!(w, ",{v}")?;
                }
                writeln!(w)?;
                cursor[k] += 1;
            }
        }
    }
    Ok(())
}

/// Parse an attention file: one value per line, optional header line.
/// The user id is taken from the file stem.
pub fn parse_attention_stream(path: &Path) -> Result<AttentionSeries> {
    let user_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_attention_reader(BufReader::new(File::open(path)?), &user_id)
}

pub fn parse_attention_reader<R: BufRead>(reader: R, user_id: &str) -> Result<AttentionSeries> {
    let mut values = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx as u64 + 1;
        let text = line?;
        let trimmed = text.trim();
        if trimmed.is_empty() {
            continue;
        }
        match trimmed.parse::<f64>() {
            Ok(v) => {
                if !(0.0..=100.0).contains(&v) {
                    return Err(IngestError::OutOfRange {
                        line: line_no,
                        msg: format!("attention value {v} outside [0, 100]"),
                    });
                }
                values.push(v);
            }
            Err(_) if idx == 0 => continue, // optional header
            Err(_) => {
                return Err(IngestError::MalformedRow {
                    line: line_no,
                    msg: format!("cannot parse attention value from `{trimmed}`"),
                })
            }
        }
    }
    if values.is_empty() {
        return Err(IngestError::EmptyStream);
    }
    Ok(AttentionSeries {
        user_id: user_id.to_string(),
        values,
    })
}

pub fn write_attention<W: Write>(series: &AttentionSeries, w: &mut W) -> io::Result<()> {
    for v in &series.values {
        writeln!(w, "{v}")?;
    }
    Ok(())
}

/// Parse a landmark CSV (`user_id,timestamp,valid,p0x,p0y,...,p13x,p13y`).
/// Frames flagged invalid are retained with `valid = false`. Timestamps
/// must be strictly increasing per user.
pub fn parse_landmarks(path: &Path) -> Result<Vec<LandmarkFrame>> {
    parse_landmarks_reader(BufReader::new(File::open(path)?))
}

pub fn parse_landmarks_reader<R: Read>(reader: R) -> Result<Vec<LandmarkFrame>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut frames: Vec<LandmarkFrame> = Vec::new();
    let mut last_ts: BTreeMap<String, f64> = BTreeMap::new();
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| IngestError::MalformedRow {
            line: idx as u64 + 1,
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(idx as u64 + 1, |p| p.line());
        if idx == 0 && rec.get(0) == Some("user_id") {
            continue;
        }
        if rec.len() != LANDMARK_COLS {
            return Err(IngestError::MalformedRow {
                line,
                msg: format!("expected {LANDMARK_COLS} fields, got {}", rec.len()),
            });
        }
        let user_id = rec.get(0).unwrap().to_string();
        let timestamp = parse_f64(rec.get(1).unwrap(), line, "timestamp")?;
        if !timestamp.is_finite() || timestamp < 0.0 {
            return Err(IngestError::MalformedRow {
                line,
                msg: format!("timestamp {timestamp} is not a finite non-negative number"),
            });
        }
        let valid = match rec.get(2).unwrap().trim() {
            "1" | "true" => true,
            "0" | "false" => false,
            other => {
                return Err(IngestError::MalformedRow {
                    line,
                    msg: format!("cannot parse valid flag from `{other}`"),
                })
            }
        };
        let mut points = [Point2::new(0.0, 0.0); 14];
        for (p, point) in points.iter_mut().enumerate() {
            let x = parse_f64(rec.get(3 + 2 * p).unwrap(), line, "coordinate")?;
            let y = parse_f64(rec.get(4 + 2 * p).unwrap(), line, "coordinate")?;
            if !x.is_finite() || !y.is_finite() {
                return Err(IngestError::MalformedRow {
                    line,
                    msg: "non-finite landmark coordinate".into(),
                });
            }
            *point = Point2::new(x, y);
        }
        if let Some(&last) = last_ts.get(&user_id) {
            if timestamp <= last {
                return Err(IngestError::NonMonotonicTimestamp {
                    line,
                    stream: user_id,
                    timestamp,
                });
            }
        }
        last_ts.insert(user_id.clone(), timestamp);
        frames.push(LandmarkFrame {
            user_id,
            timestamp,
            valid,
            points,
        });
    }
    Ok(frames)
}

pub fn write_landmarks<W: Write>(frames: &[LandmarkFrame], w: &mut W) -> io::Result<()> {
    write!(w, "user_id,timestamp,valid")?;
    for p in 0..14 {
        write!(w, ",p{p}x,p{p}y")?;
    }
    writeln!(w)?;
    for f in frames {
        write!(w, "{},{},{}", f.user_id, f.timestamp, u8::from(f.valid))?;
        for p in &f.points {
            write!(w, ",{},{}", p.x, p.y)?;
        }
        writeln!(w)?;
    }
    Ok(())
}
