use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::scenery::{ErrorSet, Record, RecordEntry, Scenery};
use crate::walk::Walk;

pub const SCHEMA_VERSION: u32 = 1;

pub fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_json(path: &Path, v: &Value) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

/// A walk file holds either a JSON array of +-1 or a line of '+' and '-'.
pub fn parse_walk(text: &str) -> Result<Walk> {
    let t = text.trim_start();
    if t.starts_with('[') {
        Ok(serde_json::from_str(t)?)
    } else if t.starts_with('{') {
        let v: Value = serde_json::from_str(t)?;
        let steps = v.get("steps").ok_or_else(|| Error::Parse("walk object needs \"steps\"".into()))?;
        Ok(serde_json::from_value(steps.clone())?)
    } else {
        Walk::from_text(t)
    }
}

pub fn read_walk(path: &Path) -> Result<Walk> {
    parse_walk(&fs::read_to_string(path)?)
}

pub fn walk_to_json(w: &Walk) -> Value {
    json!({ "schema_version": SCHEMA_VERSION, "steps": w.steps() })
}

pub fn record_to_json(r: &Record) -> Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "alphabet_size": r.alphabet_size,
        "steps": r.entries.iter().map(|e| e.step).collect::<Vec<_>>(),
        "colors": r.entries.iter().map(|e| e.color).collect::<Vec<_>>(),
    })
}

fn field<'a>(v: &'a Value, k: &str) -> Result<&'a Value> {
    v.get(k).ok_or_else(|| Error::Parse(format!("missing field {k:?}")))
}

pub fn record_from_json(v: &Value) -> Result<Record> {
    let alphabet_size: u32 = serde_json::from_value(field(v, "alphabet_size")?.clone())?;
    let steps: Vec<i64> = serde_json::from_value(field(v, "steps")?.clone())?;
    let colors: Vec<u32> = serde_json::from_value(field(v, "colors")?.clone())?;
    if steps.len() != colors.len() {
        return Err(Error::LengthMismatch(steps.len(), colors.len()));
    }
    let mut entries = Vec::with_capacity(steps.len());
    for (s, c) in steps.into_iter().zip(colors) {
        if s != 1 && s != -1 {
            return Err(Error::InvalidStep(s));
        }
        if c >= alphabet_size {
            return Err(Error::Parse(format!("color {c} outside alphabet of size {alphabet_size}")));
        }
        entries.push(RecordEntry { step: s as i8, color: c });
    }
    Ok(Record { alphabet_size, entries })
}

pub fn scenery_to_json(s: &Scenery) -> Value {
    let mut v = serde_json::to_value(s).expect("scenery serializes");
    v["schema_version"] = json!(SCHEMA_VERSION);
    v
}

pub fn scenery_from_json(v: &Value) -> Result<Scenery> {
    let alphabet_size: u32 = serde_json::from_value(field(v, "alphabet_size")?.clone())?;
    let lo: i64 = serde_json::from_value(field(v, "lo")?.clone())?;
    let colors: Vec<u32> = serde_json::from_value(field(v, "colors")?.clone())?;
    Scenery::new(alphabet_size, lo, colors)
}

/// Error set with a class tag per corrupted index.
pub fn errors_to_json(original: &Record, corrupted: &Record, e: &ErrorSet) -> Value {
    let entries: Vec<Value> = e
        .e
        .iter()
        .map(|&t| {
            let step = if e.e_plus.binary_search(&t).is_ok() {
                Value::from("plus")
            } else if e.e_minus.binary_search(&t).is_ok() {
                Value::from("minus")
            } else {
                Value::Null
            };
            let color = original.entries.get(t).map(|x| x.color) != corrupted.entries.get(t).map(|x| x.color);
            json!({ "t": t, "step": step, "color": color })
        })
        .collect();
    json!({
        "schema_version": SCHEMA_VERSION,
        "len": original.len(),
        "e": e.e,
        "e_plus": e.e_plus,
        "e_minus": e.e_minus,
        "entries": entries,
    })
}

pub fn errors_from_json(v: &Value) -> Result<ErrorSet> {
    Ok(ErrorSet {
        e: serde_json::from_value(field(v, "e")?.clone())?,
        e_plus: serde_json::from_value(field(v, "e_plus")?.clone())?,
        e_minus: serde_json::from_value(field(v, "e_minus")?.clone())?,
    })
}

/// JSON-lines output; every line carries the schema version and a kind tag.
pub struct JsonLines<W: Write> {
    out: W,
}

impl<W: Write> JsonLines<W> {
    pub fn new(out: W) -> Self {
        JsonLines { out }
    }

    pub fn write<T: Serialize>(&mut self, kind: &str, body: &T) -> Result<()> {
        let mut m = Map::new();
        m.insert("schema_version".into(), json!(SCHEMA_VERSION));
        m.insert("kind".into(), json!(kind));
        match serde_json::to_value(body)? {
            Value::Object(o) => m.extend(o),
            other => {
                m.insert("data".into(), other);
            }
        }
        serde_json::to_writer(&mut self.out, &Value::Object(m))?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        Ok(self.out.flush()?)
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}
