//! CSV surfaces and JSON reports. Floats are written with 17 significant
//! digits so identical inputs give identical bytes.

use std::io::{self, Write};
use std::path::Path;

use alphasplit_core::{SweepResult, Units};
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::CliError;

pub const CSV_HEADER: &str = "lambda_index,lambda_params,alpha,S,rank,energy,lz1,lx2";

pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// `name=value` pairs joined by `;`.
pub fn params_field(params: &[(String, f64)], lambda: f64) -> String {
    if params.is_empty() {
        return format!("lambda={}", fmt_f64(lambda));
    }
    params
        .iter()
        .map(|(k, v)| format!("{k}={}", fmt_f64(*v)))
        .collect::<Vec<_>>()
        .join(";")
}

pub fn surface_csv(result: &SweepResult, units: Units) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in &result.rows {
        let params = params_field(&row.params, row.lambda);
        for (alpha, s) in result.alphas.iter().zip(&row.entropies) {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                row.index,
                params,
                fmt_f64(*alpha),
                fmt_f64(units.convert(*s)),
                row.rank,
                fmt_f64(row.energy),
                fmt_opt(row.lz1),
                fmt_opt(row.lx2),
            ));
        }
    }
    out
}

/// Pretty JSON layout with fixed-precision floats.
pub struct FixedFloats(PrettyFormatter<'static>);

impl Default for FixedFloats {
    fn default() -> Self {
        FixedFloats(PrettyFormatter::new())
    }
}

impl Formatter for FixedFloats {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(format!("{value:.16e}").as_bytes())
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

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedFloats::default());
    value.serialize(&mut ser).expect("in-memory serialization");
    buf.push(b'\n');
    String::from_utf8(buf).expect("JSON is UTF-8")
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting() {
        assert_eq!(fmt_f64(0.01), "1.0000000000000000e-2");
        assert_eq!(fmt_f64(f64::NAN), "nan");
        assert_eq!(
            to_json(&vec![0.5, 1.0 / 3.0]).trim(),
            "[\n  5.0000000000000000e-1,\n  3.3333333333333331e-1\n]"
        );
        let back: Vec<f64> = serde_json::from_str(&to_json(&vec![0.1, 1e-300, -2.5])).unwrap();
        assert_eq!(back, vec![0.1, 1e-300, -2.5]);
    }

    #[test]
    fn params_column() {
        let p = vec![
            ("lambda_x".to_string(), 0.5),
            ("lambda_z".to_string(), 0.25),
        ];
        assert_eq!(
            params_field(&p, 0.5),
            "lambda_x=5.0000000000000000e-1;lambda_z=2.5000000000000000e-1"
        );
        assert_eq!(params_field(&[], 0.0), "lambda=0.0000000000000000e0");
    }
}
