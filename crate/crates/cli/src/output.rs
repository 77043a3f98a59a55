//! JSON and CSV writers. Floats are printed with 17 significant digits.

use std::io::{self, Write};

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::Value;

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Pretty JSON with 17-digit floats. Non-finite floats become `null`.
struct Digits17<'a>(PrettyFormatter<'a>);

impl Formatter for Digits17<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(fmt_f64(value).as_bytes())
    }
    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(value))
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn write_json<T: Serialize + ?Sized>(out: &mut dyn Write, value: &T) -> io::Result<()> {
    let mut ser = serde_json::Serializer::with_formatter(&mut *out, Digits17(PrettyFormatter::new()));
    value.serialize(&mut ser).map_err(io::Error::other)?;
    out.write_all(b"\n")
}

pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> io::Result<String> {
    let mut buf = Vec::new();
    write_json(&mut buf, value)?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

fn flatten(prefix: &str, v: &Value, rows: &mut Vec<(String, String)>) {
    let join = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(m) => m.iter().for_each(|(k, x)| flatten(&join(k), x, rows)),
        Value::Array(a) => a.iter().enumerate().for_each(|(i, x)| flatten(&join(&i.to_string()), x, rows)),
        Value::Number(n) => {
            let text = if n.is_f64() { fmt_f64(n.as_f64().unwrap_or(f64::NAN)) } else { n.to_string() };
            rows.push((prefix.to_string(), text));
        }
        Value::Null => rows.push((prefix.to_string(), String::new())),
        Value::Bool(b) => rows.push((prefix.to_string(), b.to_string())),
        Value::String(s) => rows.push((prefix.to_string(), s.clone())),
    }
}

/// Writes a JSON document as `field,value` rows, skipping the `problem` echo.
pub fn write_flat_csv(out: &mut dyn Write, doc: &Value) -> Result<(), csv::Error> {
    let mut rows = Vec::new();
    if let Value::Object(m) = doc {
        for (k, v) in m.iter().filter(|(k, _)| k.as_str() != "problem") {
            flatten(k, v, &mut rows);
        }
    }
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(["field", "value"])?;
    for (k, v) in rows {
        w.write_record([k, v])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a numeric table with a header row.
pub fn write_table(out: &mut dyn Write, header: &[String], rows: &[Vec<f64>]) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(|&v| fmt_f64(v)))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn seventeen_digits_round_trip() {
        let x = 0.1f64 + 0.2;
        let s = to_json_string(&json!({ "J": x, "k": 3, "inf": f64::INFINITY })).unwrap();
        assert!(s.contains("3.0000000000000004e-1"), "{s}");
        assert!(s.contains("\"k\": 3"), "{s}");
        assert!(s.contains("\"inf\": null"), "{s}");
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["J"].as_f64(), Some(x));
    }

    #[test]
    fn flat_csv_skips_problem() {
        let mut buf = Vec::new();
        write_flat_csv(&mut buf, &json!({ "problem": { "beta": 1.0 }, "C": { "0": 0.5 }, "ok": true })).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "field,value\nC.0,5.0000000000000000e-1\nok,true\n");
    }
}
