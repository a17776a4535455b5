//! Comparison table over evaluated runs.
//!
//! Runs sharing a scheme and attack setting form one row; every metric is the mean over
//! the row's seeds, in percent. A row with any diverged run shows NaN for its metrics.

use std::collections::BTreeMap;

use anyhow::Result;
use fedgnids::experiment::RunSummary;
use fedgnids::fed::Scheme;
use fedgnids::metrics::MetricsReport;
use serde::Serialize;

pub const COLUMNS: [&str; 8] = ["AP", "AUC", "Precision", "Recall", "FP/flagged", "FPR", "SR", "EPM"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub scheme: Scheme,
    /// `none`, or `clients=1,2 p=1 gamma=100`.
    pub attack: String,
    pub runs: usize,
    pub diverged: usize,
    /// Aligned with [`COLUMNS`]; `None` when no run reports the value.
    pub values: Vec<Option<f64>>,
}

fn attack_label(s: &RunSummary) -> String {
    match &s.attack {
        None => "none".into(),
        Some(a) => {
            let clients: Vec<String> = a.malicious_clients.iter().map(|k| k.to_string()).collect();
            format!("clients={} p={} gamma={}", clients.join(","), a.p, a.gamma)
        }
    }
}

fn columns(m: &MetricsReport) -> [Option<f64>; 8] {
    [
        Some(m.ap * 100.0),
        Some(m.auc * 100.0),
        Some(m.precision * 100.0),
        Some(m.recall * 100.0),
        Some(m.fpr_printed * 100.0),
        Some(m.fpr_conventional * 100.0),
        m.sr.map(|v| v * 100.0),
        m.epm,
    ]
}

fn mean(xs: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = xs.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn build(summaries: &[RunSummary]) -> Vec<Row> {
    let mut groups: BTreeMap<(Scheme, String), Vec<&RunSummary>> = BTreeMap::new();
    for s in summaries {
        groups.entry((s.scheme, attack_label(s))).or_default().push(s);
    }
    groups
        .into_iter()
        .map(|((scheme, attack), runs)| {
            let diverged = runs.iter().filter(|r| r.metrics.is_none()).count();
            let values = if diverged > 0 {
                vec![Some(f64::NAN); COLUMNS.len()]
            } else {
                let cols: Vec<[Option<f64>; 8]> =
                    runs.iter().filter_map(|r| r.metrics.as_ref()).map(columns).collect();
                (0..COLUMNS.len()).map(|i| mean(cols.iter().map(|c| c[i]))).collect()
            };
            Row {
                scheme,
                attack,
                runs: runs.len(),
                diverged,
                values,
            }
        })
        .collect()
}

fn cell(v: Option<f64>) -> String {
    match v {
        None => "-".into(),
        Some(x) if x.is_nan() => "NaN".into(),
        Some(x) => format!("{x:.2}"),
    }
}

pub fn markdown(rows: &[Row]) -> String {
    let mut head = vec!["Scheme", "Attack", "Runs"];
    head.extend(COLUMNS);
    let mut out = format!("| {} |\n", head.join(" | "));
    out.push_str(&format!("|{}\n", "---|".repeat(head.len())));
    for r in rows {
        let mut cells = vec![r.scheme.to_string(), r.attack.clone(), r.runs.to_string()];
        cells.extend(r.values.iter().map(|&v| cell(v)));
        out.push_str(&format!("| {} |\n", cells.join(" | ")));
    }
    out
}

pub fn csv(rows: &[Row]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut head = vec!["scheme", "attack", "runs", "diverged"];
    head.extend(COLUMNS);
    w.write_record(&head)?;
    for r in rows {
        let mut rec = vec![r.scheme.to_string(), r.attack.clone(), r.runs.to_string(), r.diverged.to_string()];
        rec.extend(r.values.iter().map(|v| v.map_or(String::new(), |x| format!("{x:.2}"))));
        w.write_record(&rec)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}
