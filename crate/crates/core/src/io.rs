//! JSON and CSV writers that print every float with 17 significant digits.

use serde::Serialize;
use serde_json::ser::Formatter;
use std::io::{self, Write};

/// Formats a finite float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

/// Compact arrays, one indented line per object key, floats via [`fmt_f64`].
#[derive(Default)]
struct SigFormatter {
    /// One entry per open object: whether it has written a key yet.
    objects: Vec<bool>,
}

impl SigFormatter {
    fn newline<W: ?Sized + Write>(&self, writer: &mut W) -> io::Result<()> {
        writer.write_all(b"\n")?;
        for _ in 0..self.objects.len() {
            writer.write_all(b"  ")?;
        }
        Ok(())
    }
}

impl Formatter for SigFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.objects.push(false);
        writer.write_all(b"{")
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        if let Some(seen) = self.objects.last_mut() {
            *seen = true;
        }
        if !first {
            writer.write_all(b",")?;
        }
        self.newline(writer)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        writer.write_all(b": ")
    }

    fn end_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        let seen = self.objects.pop().unwrap_or(false);
        if seen {
            self.newline(writer)?;
        }
        writer.write_all(b"}")
    }
}

/// Serializes `value` to JSON; non-finite floats become `null`.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigFormatter::default());
    value.serialize(&mut ser).expect("serializing to memory cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

/// Renders rows as CSV with a header line; the first column is an integer index.
pub fn csv_string(header: &[&str], rows: &[(usize, Vec<f64>)]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for (index, row) in rows {
        out.push_str(&index.to_string());
        for &v in row {
            out.push(',');
            out.push_str(&fmt_f64(v));
        }
        out.push('\n');
    }
    out
}
