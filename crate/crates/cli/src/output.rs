//! Report emission: JSON with 17-significant-digit floats, or CSV.

use std::io::{self, Write};
use std::path::Path;

use clap::ValueEnum;
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Pretty JSON whose floats are written as `{:.16e}`. serde_json already maps
/// NaN and infinities to `null` before reaching the formatter.
struct SciFormatter<'a>(PrettyFormatter<'a>);

impl Formatter for SciFormatter<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }

    fn begin_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_array(writer)
    }

    fn end_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object(writer)
    }

    fn end_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object_value(writer)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut buf = Vec::new();
    let mut ser =
        serde_json::Serializer::with_formatter(&mut buf, SciFormatter(PrettyFormatter::new()));
    value
        .serialize(&mut ser)
        .expect("report serialization cannot fail");
    buf.push(b'\n');
    buf
}

/// Float cell for CSV output.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "nan".to_string()
    }
}

/// CSV table followed by `# ` comment lines.
pub fn to_csv(header: &[&str], rows: &[Vec<String>], comments: &[String]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv write");
    for row in rows {
        w.write_record(row).expect("in-memory csv write");
    }
    let mut buf = w.into_inner().expect("in-memory csv flush");
    for c in comments {
        buf.extend_from_slice(format!("# {c}\n").as_bytes());
    }
    buf
}

/// Writes the whole report at once: to stdout, or to `path` via a temporary
/// file in the same directory that is renamed into place.
pub fn emit(bytes: &[u8], path: Option<&Path>) -> io::Result<()> {
    match path {
        None => {
            let mut out = io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()
        }
        Some(path) => {
            let dir = match path.parent() {
                Some(d) if !d.as_os_str().is_empty() => d,
                _ => Path::new("."),
            };
            let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
            tmp.write_all(bytes)?;
            tmp.flush()?;
            tmp.persist(path).map_err(|e| e.error)?;
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Sample {
        a: f64,
        b: Vec<f64>,
        c: &'static str,
    }

    #[test]
    fn floats_have_seventeen_digits() {
        let s = Sample {
            a: 0.1,
            b: vec![1.0, f64::NAN, -2.5e-300],
            c: "x",
        };
        let text = String::from_utf8(to_json(&s)).unwrap();
        assert!(text.contains("1.0000000000000001e-1"), "{text}");
        assert!(text.contains("null"));
        assert!(text.contains("-2.5000000000000000e-300"));
        let back: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["a"].as_f64().unwrap(), 0.1);
        assert_eq!(back["b"][2].as_f64().unwrap(), -2.5e-300);
    }

    #[test]
    fn csv_with_comments() {
        let out = to_csv(
            &["x", "y"],
            &[vec![num(1.0), num(f64::NAN)]],
            &["root 0".into()],
        );
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text, "x,y\n1.0000000000000000e0,nan\n# root 0\n");
    }
}
