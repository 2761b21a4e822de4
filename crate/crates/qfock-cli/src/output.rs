//! Deterministic rendering: JSON with sorted keys and shortest
//! round-trip floats, CSV with fixed column orders. Nothing here reads
//! clocks or environment, so equal inputs give byte-equal output.

use std::io::Write;
use std::path::Path;

use qfock::num::C64;
use qfock::{Error, Result};
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// One command's artifact plus its exit status.
pub struct Outcome {
    pub json: Value,
    pub csv: Option<String>,
    pub exit: i32,
}

impl Outcome {
    pub fn json_only(json: Value) -> Self {
        Outcome { json, csv: None, exit: 0 }
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Json => Ok(format!("{:#}\n", self.json)),
            Format::Csv => self.csv.clone().ok_or_else(|| {
                Error::ParseError("this command has no CSV form; use --format json".into())
            }),
        }
    }
}

/// JSON number, or null for NaN and infinities (JSON has no spelling
/// for them). Negative zero flattens to zero.
pub fn float_json(x: f64) -> Value {
    let x = if x == 0.0 { 0.0 } else { x };
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

pub fn c64_json(z: C64) -> Value {
    json!({ "im": float_json(z.im), "re": float_json(z.re) })
}

/// `inf`/`-inf`/`nan` spellings for CSV cells.
pub fn float_csv(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    if x.is_nan() {
        "nan".into()
    } else if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x}")
    }
}

pub fn write_artifact(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|()| stdout.flush())
                .map_err(|e| Error::ParseError(format!("cannot write to stdout: {e}")))
        }
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Error::ParseError(format!("cannot write {}: {e}", path.display()))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn non_finite_floats_become_null_or_words() {
        assert_eq!(float_json(f64::INFINITY), Value::Null);
        assert_eq!(float_json(1.5), json!(1.5));
        assert_eq!(float_csv(f64::INFINITY), "inf");
        assert_eq!(float_csv(0.1), "0.1");
    }

    #[test]
    fn json_keys_are_sorted() {
        let v = json!({"b": 1, "a": 2, "z": {"y": 0, "x": 1}});
        assert_eq!(format!("{v}"), r#"{"a":2,"b":1,"z":{"x":1,"y":0}}"#);
    }
}
