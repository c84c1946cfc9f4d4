//! Output encodings.
//!
//! CSV files start with `#`-prefixed preamble lines (tool line, manifest,
//! column list), then a header row and one row per point, and end with
//! `# key: <json>` footer lines. Floats are written with 17 significant
//! digits in scientific notation, independent of locale.

use std::fmt::Write;

use serde::Serialize;

use crate::manifest::RunManifest;

pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug)]
pub struct CsvWriter {
    buf: String,
    columns: usize,
}

impl CsvWriter {
    pub fn new(manifest: &RunManifest, columns: &[&str]) -> Self {
        let mut buf = String::new();
        writeln!(buf, "# {} {}", manifest.tool, manifest.version).unwrap();
        writeln!(buf, "# manifest: {}", manifest.to_json_line()).unwrap();
        writeln!(buf, "# columns: {}", columns.join(",")).unwrap();
        writeln!(buf, "{}", columns.join(",")).unwrap();
        CsvWriter {
            buf,
            columns: columns.len(),
        }
    }

    pub fn row(&mut self, fields: &[Field]) {
        debug_assert_eq!(fields.len(), self.columns);
        let line: Vec<String> = fields.iter().map(Field::render).collect();
        self.buf.push_str(&line.join(","));
        self.buf.push('\n');
    }

    pub fn footer<T: Serialize>(&mut self, key: &str, value: &T) {
        let json = serde_json::to_string(value).expect("footer serializes");
        writeln!(self.buf, "# {key}: {json}").unwrap();
    }

    pub fn finish(self) -> String {
        self.buf
    }
}

pub enum Field<'a> {
    F(f64),
    U(u64),
    B(bool),
    S(&'a str),
}

impl Field<'_> {
    fn render(&self) -> String {
        match self {
            Field::F(v) => float(*v),
            Field::U(v) => v.to_string(),
            Field::B(v) => (*v as u8).to_string(),
            Field::S(s) => s.to_string(),
        }
    }
}

/// `{"manifest": ..., "result": ...}`, pretty-printed with a trailing
/// newline.
pub fn json_document<T: Serialize>(manifest: &RunManifest, result: &T) -> String {
    #[derive(Serialize)]
    struct Doc<'a, T> {
        manifest: &'a RunManifest,
        result: &'a T,
    }
    let mut s =
        serde_json::to_string_pretty(&Doc { manifest, result }).expect("document serializes");
    s.push('\n');
    s
}
