//! Run artifacts: weight trajectory, JSON documents, model checkpoints, PR curves.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::Result;
use crate::fed::WeightRow;
use crate::metrics::PrPoint;
use crate::nn::{Manifest, ModelParams};
use crate::scalar::Scalar;

pub const WEIGHTS_HEADER: [&str; 6] = ["iteration", "client", "r", "s_jac", "s", "d"];

pub fn write_weights_csv(path: &Path, rows: &[WeightRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(WEIGHTS_HEADER)?;
    for r in rows {
        w.serialize((r.iteration, r.client, r.r, r.s_jac, r.s, r.d))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_weights_csv(path: &Path) -> Result<Vec<WeightRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.deserialize() {
        let (iteration, client, r, s_jac, s, d): (usize, usize, f64, f64, f64, f64) = rec?;
        out.push(WeightRow {
            iteration,
            client,
            r,
            s_jac,
            s,
            d,
        });
    }
    Ok(out)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// `<stem>.bin` holds the little-endian values, `<stem>.json` the manifest.
pub fn write_model<T: Scalar>(dir: &Path, stem: &str, params: &ModelParams<T>) -> Result<()> {
    std::fs::write(dir.join(format!("{stem}.bin")), params.to_bytes())?;
    write_json(&dir.join(format!("{stem}.json")), &params.manifest())
}

pub fn read_manifest(dir: &Path, stem: &str) -> Result<Manifest> {
    read_json(&dir.join(format!("{stem}.json")))
}

pub fn read_model<T: Scalar>(dir: &Path, stem: &str) -> Result<ModelParams<T>> {
    let manifest = read_manifest(dir, stem)?;
    let bytes = std::fs::read(dir.join(format!("{stem}.bin")))?;
    ModelParams::from_bytes(&manifest, &bytes)
}

pub fn write_pr_curve(path: &Path, points: &[PrPoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["threshold", "precision", "recall"])?;
    for p in points {
        w.serialize((p.threshold, p.precision, p.recall))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_pr_curve(path: &Path) -> Result<Vec<PrPoint>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.deserialize() {
        let (threshold, precision, recall): (f64, f64, f64) = rec?;
        out.push(PrPoint {
            threshold,
            precision,
            recall,
        });
    }
    Ok(out)
}
