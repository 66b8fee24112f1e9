//! Deterministic JSON and CSV output.

use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::{json, Value};

use lpl_core::{Component, Computed, CriterionReport};

/// Schema version of `report.json`.
pub const SCHEMA_VERSION: u64 = 1;

/// JSON value for a float; non-finite values become the tokens
/// `"inf"`, `"-inf"`, `"nan"`.
pub fn num(x: f64) -> Value {
    match serde_json::Number::from_f64(x) {
        Some(n) => Value::Number(n),
        None if x.is_nan() => Value::String("nan".into()),
        None if x > 0.0 => Value::String("inf".into()),
        None => Value::String("-inf".into()),
    }
}

pub fn opt_num(x: Option<f64>) -> Value {
    x.map_or(Value::Null, num)
}

fn computed(v: Computed) -> Value {
    match v {
        Computed::Finite(x) => num(x),
        Computed::Infinite => Value::String("inf".into()),
        Computed::Unknown => Value::String("unknown".into()),
    }
}

fn component(c: &Component) -> Value {
    json!({
        "name": c.name,
        "verdict": c.verdict.as_str(),
        "value": computed(c.value),
        "margin": opt_num(c.margin),
        "tolerance": num(c.tolerance),
        "boundary": c.boundary,
        "note": c.note,
    })
}

pub fn criterion(r: &CriterionReport) -> Value {
    json!({
        "criterion": r.criterion,
        "verdict": r.verdict.as_str(),
        "boundary": r.boundary(),
        "components": r.components.iter().map(component).collect::<Vec<_>>(),
        "notes": r.notes,
    })
}

/// Pretty printing with every float written as `{:.16e}` (17 significant
/// digits, exact round trip).
struct FixedFloats(PrettyFormatter<'static>);

impl Formatter for FixedFloats {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        write!(w, "{:.16e}", v + 0.0)
    }
    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serialises with sorted keys (serde_json's default map) and fixed floats.
pub fn to_bytes(v: &Value) -> Vec<u8> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FixedFloats(PrettyFormatter::new()));
    v.serialize(&mut ser).expect("in-memory JSON write");
    out.push(b'\n');
    out
}
