//! Trajectory export: CSV and JSON-lines with a deterministic column
//! layout (time, observables in declared order, then per-channel raw and
//! filtered records).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use pullsim::record::TrajectoryRecord;

use crate::config::OutputFormat;

fn columns(record: &TrajectoryRecord) -> Vec<(String, &[f64])> {
    let mut cols: Vec<(String, &[f64])> = vec![];
    for (name, series) in &record.observables {
        cols.push((name.clone(), series.as_slice()));
    }
    for ch in &record.channels {
        cols.push((format!("{}_raw", ch.name), ch.raw.as_slice()));
        cols.push((format!("{}_filt", ch.name), ch.filtered.as_slice()));
    }
    cols
}

fn write_csv(record: &TrajectoryRecord, path: &Path) -> Result<()> {
    let cols = columns(record);
    let mut out = String::new();
    out.push('t');
    for (name, _) in &cols {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (i, t) in record.times.iter().enumerate() {
        out.push_str(&format!("{t}"));
        for (_, series) in &cols {
            out.push(',');
            out.push_str(&format!("{}", series[i]));
        }
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

fn write_jsonl(record: &TrajectoryRecord, path: &Path) -> Result<()> {
    let cols = columns(record);
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = std::io::BufWriter::new(file);
    for (i, t) in record.times.iter().enumerate() {
        let mut line = String::from("{");
        line.push_str(&format!("\"t\":{t}"));
        for (name, series) in &cols {
            line.push_str(&format!(",\"{name}\":{}", series[i]));
        }
        line.push('}');
        writeln!(w, "{line}").with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

/// Write one trajectory record; the file name gets the format's extension.
/// Returns the written path.
pub fn export(record: &TrajectoryRecord, format: &OutputFormat, stem: &Path) -> Result<PathBuf> {
    if let Some(parent) = stem.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .with_context(|| format!("creating directory {}", parent.display()))?;
        }
    }
    let path = match format {
        OutputFormat::Csv => stem.with_extension("csv"),
        OutputFormat::JsonLines => stem.with_extension("jsonl"),
    };
    match format {
        OutputFormat::Csv => write_csv(record, &path)?,
        OutputFormat::JsonLines => write_jsonl(record, &path)?,
    }
    Ok(path)
}
