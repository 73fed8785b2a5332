//! Result files. Every file records the configuration hash and seed, and
//! floating point values are rounded to 12 significant digits so that
//! reruns are byte-identical.

use std::path::Path;

use serde_json::{Map, Value};

use rotbec::io::{atomic_write, density_image, pgm16, phase_image, write_field_binary, write_field_text};
use rotbec::Field64;

use crate::config::Loaded;
use crate::CliError;

pub fn round12(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

/// Number as JSON, rounded; non-finite values become `null`.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(round12(x)).map_or(Value::Null, Value::Number)
}

pub fn nums(xs: impl IntoIterator<Item = f64>) -> Value {
    Value::Array(xs.into_iter().map(num).collect())
}

/// Pretty JSON with `config_hash` and `seed` added at the top level.
pub fn write_json(run: &Loaded, path: &Path, body: Map<String, Value>) -> Result<(), CliError> {
    let mut doc = Map::new();
    doc.insert("config_hash".into(), Value::String(run.hash.clone()));
    doc.insert("seed".into(), Value::from(run.seed()));
    doc.extend(body);
    let mut text = serde_json::to_string_pretty(&Value::Object(doc)).map_err(|e| CliError::Io(e.into()))?;
    text.push('\n');
    atomic_write(path, text.as_bytes())?;
    Ok(())
}

/// A CSV cell.
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => {
                let r = round12(*x);
                if r != 0.0 && (r.abs() < 1e-4 || r.abs() >= 1e15) {
                    format!("{r:e}")
                } else {
                    format!("{r}")
                }
            }
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

/// CSV with a header row; `config_hash` and `seed` columns are appended to
/// every row.
pub fn write_csv(run: &Loaded, path: &Path, columns: &[&str], rows: &[Vec<Cell>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Io(std::io::Error::other(e));
    let mut header: Vec<&str> = columns.to_vec();
    header.extend(["config_hash", "seed"]);
    w.write_record(&header).map_err(io)?;
    let seed = run.seed().to_string();
    for row in rows {
        let mut rec: Vec<String> = row.iter().map(Cell::render).collect();
        rec.push(run.hash.clone());
        rec.push(seed.clone());
        w.write_record(&rec).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(std::io::Error::other(e.to_string())))?;
    atomic_write(path, &bytes)?;
    Ok(())
}

fn tags(run: &Loaded) -> Vec<(&'static str, String)> {
    vec![("config", run.hash.clone()), ("seed", run.seed().to_string())]
}

/// `<stem>.csv` (text) and `<stem>.bin` (binary plus sidecar) field dumps.
pub fn write_field(run: &Loaded, dir: &Path, stem: &str, phi: &Field64) -> Result<(), CliError> {
    let t = tags(run);
    let extra: Vec<(&str, String)> = t.iter().map(|(k, v)| (*k, v.clone())).collect();
    write_field_text(&dir.join(format!("{stem}.csv")), phi, &extra)?;
    write_field_binary(&dir.join(format!("{stem}.bin")), phi, &extra)?;
    Ok(())
}

/// Density and phase graymaps of a 2D plane.
pub fn write_images(run: &Loaded, dir: &Path, stem: &str, plane: &Field64) -> Result<(), CliError> {
    let comment = format!("config={} seed={}", run.hash, run.seed());
    let (w, h, px) = density_image(plane);
    atomic_write(&dir.join(format!("{stem}_density.pgm")), &pgm16(w, h, &px, Some(&comment)))?;
    let (w, h, px) = phase_image(plane);
    atomic_write(&dir.join(format!("{stem}_phase.pgm")), &pgm16(w, h, &px, Some(&comment)))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_keeps_twelve_digits() {
        assert_eq!(round12(3.0000000000004), 3.0);
        assert_eq!(round12(1.23456789012345e-7), 1.23456789012e-7);
        assert_eq!(round12(-2.5), -2.5);
        assert!(round12(f64::NAN).is_nan());
    }
}
