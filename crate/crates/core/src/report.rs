//! Run reports and the JSON encoding shared with scenario files.
//!
//! Floats are written in scientific notation with 17 significant digits, so
//! every value round-trips exactly and files diff cleanly.

use std::collections::BTreeMap;
use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{Error, Result};

/// Name of the pseudo-random generator behind every seeded draw.
pub const PRNG_NAME: &str = "ChaCha8 (rand_chacha)";

/// Pretty JSON with fixed 17-significant-digit floats.
struct FixedFormatter<'a>(PrettyFormatter<'a>);

impl FixedFormatter<'_> {
    fn write_float<W: ?Sized + io::Write>(writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            writer.write_all(b"null")
        }
    }
}

impl Formatter for FixedFormatter<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        Self::write_float(writer, value)
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        Self::write_float(writer, value as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_array(writer)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object(writer)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object_value(writer)
    }
}

/// Serialize `value` as pretty JSON with fixed-precision floats and a
/// trailing newline.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedFormatter(PrettyFormatter::with_indent(b"  ")));
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Parse(format!("serialization failed: {e}")))?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("JSON output is UTF-8"))
}

#[derive(Debug, Clone, Serialize)]
pub struct Stage {
    pub name: String,
    pub pass: bool,
    /// Set when the stage aborted instead of producing its audit.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub detail: serde_json::Value,
}

impl Stage {
    pub fn new<T: Serialize>(name: &str, pass: bool, detail: &T) -> Self {
        Stage {
            name: name.to_owned(),
            pass,
            error: None,
            detail: serde_json::to_value(detail).expect("stage detail serializes"),
        }
    }

    pub fn failed(name: &str, error: &Error) -> Self {
        Stage {
            name: name.to_owned(),
            pass: false,
            error: Some(error.to_string()),
            detail: serde_json::Value::Null,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Versions {
    pub bapfactor: String,
    pub prng: String,
}

impl Default for Versions {
    fn default() -> Self {
        Versions {
            bapfactor: env!("CARGO_PKG_VERSION").to_owned(),
            prng: PRNG_NAME.to_owned(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    pub versions: Versions,
    pub seed: u64,
    pub pass: bool,
    /// Bound minus observed value for each certified inequality; negative
    /// entries are violations.
    pub margins: BTreeMap<String, f64>,
    pub stages: Vec<Stage>,
    /// Global partial-sum norm curve `(n, ‖Σ_{s<=n} Ã_s‖, 5K‖T‖, margin)`.
    pub curve: Vec<crate::splitting::CurvePoint>,
    pub wall_time_seconds: f64,
}

impl Report {
    pub fn new(command: &str, seed: u64) -> Self {
        Report {
            command: command.to_owned(),
            versions: Versions::default(),
            seed,
            pass: true,
            margins: BTreeMap::new(),
            stages: Vec::new(),
            curve: Vec::new(),
            wall_time_seconds: 0.0,
        }
    }

    pub fn push(&mut self, stage: Stage) {
        self.pass &= stage.pass;
        self.stages.push(stage);
    }

    pub fn margin(&mut self, key: &str, bound: f64, observed: f64) {
        self.margins.insert(key.to_owned(), bound - observed);
    }

    /// First failing stage, if any.
    pub fn first_failure(&self) -> Option<&Stage> {
        self.stages.iter().find(|s| !s.pass)
    }

    pub fn to_json(&self) -> Result<String> {
        to_json(self)
    }
}
