//! CSV and JSON file formats.

use std::fs::{self, File};
use std::io::{self, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use narx_fusion_core::TimeSeries;
use serde::Serialize;

/// Twelve significant digits; plain notation where it stays short.
pub fn fmt_num(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() {
            "NaN".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let rounded: f64 = format!("{v:.11e}").parse().expect("formatted float parses");
    let a = rounded.abs();
    if rounded == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

pub fn csv_writer(path: Option<&Path>) -> Result<csv::Writer<Box<dyn Write>>> {
    let sink: Box<dyn Write> = match path {
        Some(p) => Box::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    };
    Ok(csv::Writer::from_writer(sink))
}

/// Writes `k,u,y` rows.
pub fn write_series(path: Option<&Path>, series: &TimeSeries) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["k", "u", "y"])?;
    for (k, (u, y)) in series.u().iter().zip(series.y()).enumerate() {
        w.write_record([k.to_string(), fmt_num(*u), fmt_num(*y)])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a `k,u,y` file (extra columns are ignored, `k` is optional).
pub fn read_series(path: &Path, dt: f64) -> Result<TimeSeries> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("cannot open {}", path.display()))?;
    let headers = r.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let (Some(iu), Some(iy)) = (col("u"), col("y")) else {
        bail!("{}: header must contain columns u and y", path.display());
    };
    let mut u = Vec::new();
    let mut y = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let parse = |i: usize, name: &str| -> Result<f64> {
            let field = rec.get(i).unwrap_or("").trim();
            field
                .parse()
                .with_context(|| format!("{}: row {}: bad {name} value {field:?}", path.display(), line + 2))
        };
        u.push(parse(iu, "u")?);
        y.push(parse(iy, "y")?);
    }
    Ok(TimeSeries::new(u, y, dt)?)
}

pub fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => fs::write(p, text + "\n").with_context(|| format!("cannot write {}", p.display()))?,
        None => println!("{text}"),
    }
    Ok(())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("{}: invalid JSON", path.display()))
}
