use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::config::SCHEMA_VERSION;
use super::tables::RateRow;
use crate::batch::SampleBatch;
use crate::distance_lab::DistanceReport;
use crate::error::{Error, Result};
use crate::moment_oracle::MomentReport;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Config(format!("unknown format '{other}'"))),
        }
    }
}

/// Round-trippable float text: 17 significant digits.
pub fn format_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(format_f64).unwrap_or_default()
}

/// Rows that can be written as CSV.
pub trait Tabular: Serialize {
    fn header() -> &'static [&'static str];
    fn fields(&self) -> Vec<String>;
}

impl Tabular for DistanceReport {
    fn header() -> &'static [&'static str] {
        &["stage_a", "stage_b", "estimator", "value", "uncertainty", "L", "M", "R", "F", "T", "seed"]
    }
    fn fields(&self) -> Vec<String> {
        vec![
            self.stage_a.clone(),
            self.stage_b.clone(),
            self.estimator.name().into(),
            format_f64(self.value),
            format_f64(self.uncertainty),
            opt(self.l),
            opt(self.m),
            opt(self.r),
            opt(self.f),
            opt(self.t),
            self.seed.to_string(),
        ]
    }
}

impl Tabular for RateRow {
    fn header() -> &'static [&'static str] {
        &["T", "pair_a", "pair_b", "estimator", "value", "uncertainty", "theory_shape", "L", "M", "N", "seed", "flags"]
    }
    fn fields(&self) -> Vec<String> {
        vec![
            format_f64(self.t),
            self.pair_a.clone(),
            self.pair_b.clone(),
            self.estimator.clone(),
            format_f64(self.value),
            format_f64(self.uncertainty),
            opt(self.theory_shape),
            format_f64(self.l),
            format_f64(self.m),
            self.n.to_string(),
            self.seed.to_string(),
            self.flags.join(";"),
        ]
    }
}

impl Tabular for MomentReport {
    fn header() -> &'static [&'static str] {
        &["k", "l", "quad_re", "quad_im", "formula", "budget", "T", "Y", "N", "nodes"]
    }
    fn fields(&self) -> Vec<String> {
        vec![
            self.k.to_string(),
            self.l.to_string(),
            format_f64(self.quad_re),
            format_f64(self.quad_im),
            format_f64(self.formula),
            format_f64(self.budget),
            format_f64(self.t),
            format_f64(self.y),
            self.n.to_string(),
            self.nodes.to_string(),
        ]
    }
}

/// One sample row: stage, row index, flag, then coordinates.
#[derive(Serialize)]
pub struct SampleRow {
    pub stage: String,
    pub row: usize,
    pub flagged: bool,
    pub values: Vec<f64>,
}

impl SampleRow {
    pub fn from_batch(b: &SampleBatch) -> Vec<SampleRow> {
        (0..b.n)
            .map(|i| SampleRow { stage: b.stage.name().into(), row: i, flagged: b.flagged.contains(&i), values: b.row(i).to_vec() })
            .collect()
    }
}

impl Tabular for SampleRow {
    fn header() -> &'static [&'static str] {
        &["stage", "row", "flagged", "values"]
    }
    fn fields(&self) -> Vec<String> {
        vec![
            self.stage.clone(),
            self.row.to_string(),
            self.flagged.to_string(),
            self.values.iter().map(|&v| format_f64(v)).collect::<Vec<_>>().join(";"),
        ]
    }
}

struct Fmt;

impl serde_json::ser::Formatter for Fmt {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(format!("{value:.16e}").as_bytes())
    }
}

/// JSON with 17-digit floats. Non-finite floats become null.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Fmt);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json writes utf-8"))
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    kind: &'a str,
    rows: &'a [T],
}

fn io_err(path: &str) -> impl Fn(io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.into(), source }
}

/// Renders rows as text.
pub fn render<T: Tabular>(rows: &[T], format: Format, kind: &str) -> Result<String> {
    match format {
        Format::Json => {
            let mut s = to_json_string(&Envelope { schema_version: SCHEMA_VERSION, kind, rows })?;
            s.push('\n');
            Ok(s)
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let map = |e: csv::Error| Error::Io { path: "<csv>".into(), source: io::Error::other(e) };
            w.write_record(T::header()).map_err(map)?;
            for r in rows {
                w.write_record(r.fields()).map_err(map)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Io { path: "<csv>".into(), source: io::Error::other(e.to_string()) })?;
            Ok(String::from_utf8(bytes).expect("csv writes utf-8"))
        }
    }
}

/// Writes rows to `path`, or stdout when `path` is None.
pub fn emit<T: Tabular>(rows: &[T], format: Format, kind: &str, path: Option<&Path>) -> Result<()> {
    write_text(&render(rows, format, kind)?, path)
}

/// Writes an arbitrary JSON document tagged with the schema version.
pub fn emit_document<T: Serialize>(kind: &str, body: &T, path: Option<&Path>) -> Result<()> {
    #[derive(Serialize)]
    struct Doc<'a, T: Serialize> {
        schema_version: u32,
        kind: &'a str,
        #[serde(flatten)]
        body: &'a T,
    }
    let mut s = to_json_string(&Doc { schema_version: SCHEMA_VERSION, kind, body })?;
    s.push('\n');
    write_text(&s, path)
}

pub fn write_text(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => {
            let name = p.display().to_string();
            let mut f = File::create(p).map_err(io_err(&name))?;
            f.write_all(text.as_bytes()).map_err(io_err(&name))
        }
        None => io::stdout().lock().write_all(text.as_bytes()).map_err(io_err("<stdout>")),
    }
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(io_err(&name))?;
    Ok(serde_json::from_str(&text)?)
}
