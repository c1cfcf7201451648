//! Report envelope and its JSON / CSV encodings.
//!
//! Floats are written with 17 significant digits, which round-trips every
//! `f64` exactly, so a report can be parsed back into the same numbers.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::Value;

use gauss_scan_core::constants::{ConstantEstimate, Method, Provenance};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// A constant that fed a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantUsed {
    pub name: String,
    pub d: Option<usize>,
    pub value: f64,
    pub abs_error: f64,
    pub method: Method,
    pub params: Provenance,
}

impl ConstantUsed {
    pub fn new(name: impl Into<String>, d: Option<usize>, c: &ConstantEstimate) -> Self {
        Self {
            name: name.into(),
            d,
            value: c.value,
            abs_error: c.abs_error,
            method: c.method,
            params: c.params.clone(),
        }
    }
}

/// Rows for CSV output. Cells hold the same JSON values the report does.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// One row per object, columns in the order of `header`.
    pub fn from_objects(header: &[&str], objects: &[Value]) -> Self {
        let mut t = Self::new(header);
        for o in objects {
            t.push(header.iter().map(|k| o.get(*k).cloned().unwrap_or(Value::Null)).collect());
        }
        t
    }

    pub fn write_csv<W: Write>(&self, out: W) -> io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(csv_cell))?;
        }
        w.flush()
    }
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Number(n) => match n.as_f64() {
            Some(f) if !n.is_i64() && !n.is_u64() => format_f64(f),
            _ => n.to_string(),
        },
        other => to_compact_string(other),
    }
}

/// The full output of one command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub code_version: String,
    /// Fully resolved configuration; feeding it back through `--config`
    /// reproduces the report.
    pub config: Value,
    pub constants_used: Vec<ConstantUsed>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Value>,
    pub summary: Value,
    pub runtime_seconds: f64,
    pub seed: u64,
}

impl Report {
    pub fn to_json(&self) -> String {
        to_pretty_string(self)
    }

    /// JSON with `runtime_seconds` zeroed, for byte comparisons.
    pub fn to_json_without_runtime(&self) -> String {
        let mut r = self.clone();
        r.runtime_seconds = 0.0;
        r.to_json()
    }
}

/// `v` with 17 significant digits in scientific notation.
pub fn format_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        // JSON has no infinities; serde_json writes these as null too.
        "null".to_string()
    }
}

struct Sig17<F>(F);

macro_rules! forward {
    ($($name:ident($($arg:ident: $ty:ty),*)),* $(,)?) => {
        $(
            fn $name<W: ?Sized + Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> io::Result<()> {
                self.0.$name(w $(, $arg)*)
            }
        )*
    };
}

impl<F: Formatter> Formatter for Sig17<F> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(format_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(value))
    }

    forward!(
        begin_array(),
        end_array(),
        begin_array_value(first: bool),
        end_array_value(),
        begin_object(),
        end_object(),
        begin_object_key(first: bool),
        end_object_key(),
        begin_object_value(),
        end_object_value(),
    );
}

fn encode<T: Serialize + ?Sized, F: Formatter>(value: &T, f: F) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17(f));
    value.serialize(&mut ser).expect("report values always serialize");
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}

pub fn to_pretty_string<T: Serialize + ?Sized>(value: &T) -> String {
    encode(value, PrettyFormatter::with_indent(b"  "))
}

pub fn to_compact_string<T: Serialize + ?Sized>(value: &T) -> String {
    encode(value, serde_json::ser::CompactFormatter)
}
