//! Gathers tables already written by other subcommands into one Markdown
//! summary and one JSON document. Nothing is recomputed.

use std::fmt::Write as _;
use std::path::Path;

use serde_json::{Map, Value};

use crate::error::{CliError, Result};
use crate::output::{Outputs, RunMetadata};

/// Summary documents, shown as key/value lists.
const SUMMARIES: &[(&str, &str)] = &[
    ("coverage_fit.json", "Coverage calibration"),
    ("selection_summary.json", "Model selection"),
    ("stability_summary.json", "Stability under date noise"),
    ("population_summary.json", "Trajectory classes"),
    ("truth_recovery.json", "Recovery of synthetic truth"),
    ("ensemble_summary.json", "Noise ensemble"),
    ("curves_summary.json", "Productivity curves"),
    ("medians_summary.json", "Institution medians"),
    ("authorship_summary.json", "Authorship order"),
];

/// Small tables, shown in full.
const TABLES: &[(&str, &str)] = &[
    ("ensemble.csv", "Ensemble regions"),
    ("gini.csv", "Gini by hire decade"),
    ("tstar_histogram.csv", "Change-point histogram"),
    ("peak_histogram.csv", "Peak-year histogram"),
];

fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::file(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::file(path, e))
}

fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::file(path, e))?;
    let header = rdr
        .headers()
        .map_err(|e| CliError::file(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let rows = rdr
        .records()
        .map(|r| r.map(|r| r.iter().map(str::to_string).collect()))
        .collect::<std::result::Result<Vec<Vec<String>>, _>>()
        .map_err(|e| CliError::file(path, e))?;
    Ok((header, rows))
}

fn scalar(v: &Value) -> String {
    match v {
        Value::Null => "n/a".into(),
        Value::String(s) => s.clone(),
        Value::Number(n) => match n.as_f64() {
            Some(f) if n.is_f64() => format!("{f:.4}"),
            _ => n.to_string(),
        },
        other => other.to_string(),
    }
}

fn markdown_table(md: &mut String, header: &[String], rows: &[Vec<String>]) {
    let _ = writeln!(md, "| {} |", header.join(" | "));
    let _ = writeln!(md, "|{}|", vec!["---"; header.len()].join("|"));
    for r in rows {
        let _ = writeln!(md, "| {} |", r.join(" | "));
    }
}

pub fn compose(in_dir: &Path, out: &mut Outputs, meta: &mut RunMetadata) -> Result<()> {
    if !in_dir.is_dir() {
        return Err(CliError::file(in_dir, "not a directory"));
    }
    let mut md = String::from("# Trajectory analysis report\n");
    let mut doc = Map::new();
    let mut found = 0;

    for &(name, title) in SUMMARIES {
        let path = in_dir.join(name);
        if !path.is_file() {
            continue;
        }
        let value = read_json(&path)?;
        found += 1;
        let _ = writeln!(md, "\n## {title}\n");
        match &value {
            Value::Object(m) => {
                for (k, v) in m {
                    let _ = writeln!(md, "- {k}: {}", scalar(v));
                }
            }
            other => {
                let _ = writeln!(md, "{}", scalar(other));
            }
        }
        doc.insert(name.to_string(), value);
    }

    let fits = in_dir.join("fits.csv");
    if fits.is_file() {
        let (header, rows) = read_csv(&fits)?;
        found += 1;
        let col = header.iter().position(|h| h == "chosen_model");
        let piecewise = col.map_or(0, |c| rows.iter().filter(|r| r[c] == "piecewise").count());
        let _ = writeln!(md, "\n## Fits\n\n- careers fitted: {}\n- piecewise chosen: {piecewise}", rows.len());
        doc.insert(
            "fits.csv".into(),
            serde_json::json!({ "n": rows.len(), "piecewise_chosen": piecewise }),
        );
    }

    for &(name, title) in TABLES {
        let path = in_dir.join(name);
        if !path.is_file() {
            continue;
        }
        let (header, rows) = read_csv(&path)?;
        found += 1;
        let _ = writeln!(md, "\n## {title}\n");
        markdown_table(&mut md, &header, &rows);
        let records: Vec<Value> = rows
            .iter()
            .map(|r| {
                Value::Object(
                    header
                        .iter()
                        .zip(r)
                        .map(|(h, v)| (h.clone(), Value::String(v.clone())))
                        .collect(),
                )
            })
            .collect();
        doc.insert(name.to_string(), Value::Array(records));
    }

    if found == 0 {
        return Err(CliError::file(in_dir, "no tables from earlier runs found"));
    }
    meta.count("artifacts_composed", found);
    meta.decide("recomputation", "none; on-disk tables only");
    out.text("report.md", &md)?;
    out.json("report.json", &Value::Object(doc))
}
