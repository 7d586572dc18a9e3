//! JSON envelopes and CSV artifacts.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter, PrettyFormatter};
use serde_json::Value;

pub const FORMAT_VERSION: u32 = 1;

/// Every finite float is written in scientific notation with 17
/// significant digits, so equal values always print identically.
struct Fixed17<F> {
    inner: F,
}

impl<F: Formatter> Formatter for Fixed17<F> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(w, first)
    }
    fn end_object_key<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_key(w)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_value(w)
    }
}

#[derive(Serialize)]
struct Envelope<'a, T> {
    kind: &'a str,
    version: u32,
    report: &'a T,
}

pub fn to_json<T: Serialize>(kind: &str, report: &T, pretty: bool) -> Result<String> {
    let envelope = Envelope { kind, version: FORMAT_VERSION, report };
    let mut buf = Vec::new();
    if pretty {
        let mut ser = serde_json::Serializer::with_formatter(&mut buf, Fixed17 { inner: PrettyFormatter::new() });
        envelope.serialize(&mut ser)?;
    } else {
        let mut ser = serde_json::Serializer::with_formatter(&mut buf, Fixed17 { inner: CompactFormatter });
        envelope.serialize(&mut ser)?;
    }
    buf.push(b'\n');
    Ok(String::from_utf8(buf)?)
}

/// Writes the envelope to `out`, or to stdout when `out` is `None`.
pub fn emit<T: Serialize>(kind: &str, report: &T, out: Option<&Path>) -> Result<()> {
    let text = to_json(kind, report, true)?;
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

pub fn write_csv<R: Serialize>(path: &Path, rows: impl IntoIterator<Item = R>) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = csv::Writer::from_writer(file);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Keys every report of a given kind must carry.
fn required_keys(kind: &str) -> Option<&'static [&'static str]> {
    Some(match kind {
        "bounds" => &["n", "M", "N", "master_bound", "quartic_bound", "behaviors", "notes"],
        "bounds_table" => &["rows"],
        "divcurve" => &["components", "M", "singular_points", "generic", "window", "grid", "warnings"],
        "contacts" => &["points", "N", "undecided_boxes", "window"],
        "oracle" => &["period", "closure_error", "cycle_energy", "start", "section"],
        "descend" => &["K", "epsilon", "runs"],
        "continuation" => &["K", "stages"],
        "census" => &["counts", "alternating_sum", "warnings"],
        _ => return None,
    })
}

/// Checks an emitted document: envelope shape, version and the keys of its
/// report. Returns the document kind.
pub fn validate(text: &str) -> Result<String, String> {
    let doc: Value = serde_json::from_str(text).map_err(|e| format!("not JSON: {e}"))?;
    let obj = doc.as_object().ok_or("document is not an object")?;
    let kind = obj.get("kind").and_then(Value::as_str).ok_or("missing string field `kind`")?;
    let version = obj.get("version").and_then(Value::as_u64).ok_or("missing integer field `version`")?;
    if version != u64::from(FORMAT_VERSION) {
        return Err(format!("unsupported version {version}"));
    }
    let report = obj.get("report").and_then(Value::as_object).ok_or("missing object field `report`")?;
    let keys = required_keys(kind).ok_or_else(|| format!("unknown kind `{kind}`"))?;
    let missing: Vec<&str> = keys.iter().copied().filter(|k| !report.contains_key(*k)).collect();
    if !missing.is_empty() {
        return Err(format!("{kind} report lacks {missing:?}"));
    }
    Ok(kind.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_seventeen_digits() {
        let text = to_json("census", &serde_json::json!({"x": 0.1, "y": [1.0, -2.5e-300]}), false).unwrap();
        assert!(text.contains("1.0000000000000001e-1"), "{text}");
        assert!(text.contains("-2.5000000000000000e-300"));
        let back: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["report"]["x"].as_f64(), Some(0.1));
    }

    #[test]
    fn non_finite_floats_become_null() {
        let text = to_json("census", &serde_json::json!({"x": f64::NAN}), false).unwrap();
        assert!(text.contains("\"x\":null"));
    }

    #[test]
    fn validation() {
        let good = to_json("census", &serde_json::json!({"counts": {}, "alternating_sum": 0, "warnings": []}), true).unwrap();
        assert_eq!(validate(&good).as_deref(), Ok("census"));
        let missing = to_json("census", &serde_json::json!({"counts": {}}), true).unwrap();
        assert!(validate(&missing).is_err());
        assert!(validate("{\"kind\": \"census\"}").is_err());
        assert!(validate("[1, 2").is_err());
        let unknown = to_json("nope", &serde_json::json!({}), true).unwrap();
        assert!(validate(&unknown).is_err());
    }
}
