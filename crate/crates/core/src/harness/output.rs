//! CSV and JSON serialization of curves and bound tables.
//!
//! Floats are written in scientific notation with 17 significant digits so
//! every value parses back to the identical `f64`.

use std::fmt::Write as _;
use std::io;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policies::PolicyKind;

pub const CURVE_COLUMNS: [&str; 7] = [
    "policy",
    "round",
    "mse_mean",
    "mse_stderr",
    "regret_mean",
    "regret_stderr",
    "n_trials",
];

pub const BOUNDS_COLUMNS: [&str; 6] = [
    "round",
    "mse_upper",
    "mse_lower",
    "tail_threshold",
    "ofu_floor",
    "ofu_regret_bound",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::usage(format!(
                "format: unknown value '{other}' (expected csv or json)"
            ))),
        }
    }
}

/// One aggregated point of a policy's MSE / regret curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub policy: PolicyKind,
    pub round: u64,
    pub mse_mean: f64,
    pub mse_stderr: f64,
    pub regret_mean: f64,
    pub regret_stderr: f64,
    pub n_trials: u64,
}

/// Closed-form bound overlays at one round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsRow {
    pub round: u64,
    pub mse_upper: f64,
    pub mse_lower: f64,
    pub tail_threshold: f64,
    pub ofu_floor: f64,
    pub ofu_regret_bound: f64,
}

pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

trait Row {
    fn csv_fields(&self) -> Vec<String>;
}

impl Row for CurvePoint {
    fn csv_fields(&self) -> Vec<String> {
        vec![
            self.policy.as_str().to_string(),
            self.round.to_string(),
            fmt_f64(self.mse_mean),
            fmt_f64(self.mse_stderr),
            fmt_f64(self.regret_mean),
            fmt_f64(self.regret_stderr),
            self.n_trials.to_string(),
        ]
    }
}

impl Row for BoundsRow {
    fn csv_fields(&self) -> Vec<String> {
        vec![
            self.round.to_string(),
            fmt_f64(self.mse_upper),
            fmt_f64(self.mse_lower),
            fmt_f64(self.tail_threshold),
            fmt_f64(self.ofu_floor),
            fmt_f64(self.ofu_regret_bound),
        ]
    }
}

/// serde_json formatter printing floats with 17 significant digits.
struct FullPrecision;

impl serde_json::ser::Formatter for FullPrecision {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(writer, "{}", fmt_f64(value))
        } else {
            writer.write_all(b"null")
        }
    }
}

fn render<T: Row + Serialize>(columns: &[&str], rows: &[T], format: Format) -> String {
    let mut out = String::new();
    match format {
        Format::Csv => {
            out.push_str(&columns.join(","));
            out.push('\n');
            for r in rows {
                out.push_str(&r.csv_fields().join(","));
                out.push('\n');
            }
        }
        Format::Json => {
            out.push('[');
            for (i, r) in rows.iter().enumerate() {
                out.push_str(if i == 0 { "\n  " } else { ",\n  " });
                let mut buf = Vec::new();
                let mut ser = serde_json::Serializer::with_formatter(&mut buf, FullPrecision);
                r.serialize(&mut ser).expect("serializing to memory");
                out.push_str(std::str::from_utf8(&buf).expect("utf-8 json"));
            }
            if !rows.is_empty() {
                out.push('\n');
            }
            let _ = writeln!(out, "]");
        }
    }
    out
}

pub fn render_curves(curves: &[CurvePoint], format: Format) -> String {
    render(&CURVE_COLUMNS, curves, format)
}

pub fn render_bounds(rows: &[BoundsRow], format: Format) -> String {
    render(&BOUNDS_COLUMNS, rows, format)
}

pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn emit_curves(curves: &[CurvePoint], path: &Path, format: Format) -> Result<()> {
    write_text(path, &render_curves(curves, format))
}

pub fn emit_bounds(rows: &[BoundsRow], path: &Path, format: Format) -> Result<()> {
    write_text(path, &render_bounds(rows, format))
}

/// Guesses the format of a curves file from its extension (CSV otherwise).
pub fn format_for_path(path: &Path) -> Format {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("json") => Format::Json,
        _ => Format::Csv,
    }
}

pub fn parse_curves(text: &str, format: Format, path: &Path) -> Result<Vec<CurvePoint>> {
    let parse_err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        message,
    };
    match format {
        Format::Json => serde_json::from_str(text).map_err(|e| parse_err(e.to_string())),
        Format::Csv => {
            let mut reader = csv::Reader::from_reader(text.as_bytes());
            let headers = reader.headers().map_err(|e| parse_err(e.to_string()))?;
            if headers.iter().ne(CURVE_COLUMNS.iter().copied()) {
                return Err(parse_err(format!(
                    "expected header '{}'",
                    CURVE_COLUMNS.join(",")
                )));
            }
            reader
                .deserialize()
                .collect::<std::result::Result<Vec<CurvePoint>, _>>()
                .map_err(|e| parse_err(e.to_string()))
        }
    }
}

pub fn read_curves(path: &Path) -> Result<Vec<CurvePoint>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_curves(&text, format_for_path(path), path)
}
