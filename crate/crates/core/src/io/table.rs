//! Long-form delimited panel files: one row per (subject, time) pair with a
//! header naming the feature columns, plus an optional response column.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::panel::TimeSeriesPanel;

pub const SUBJECT_COLUMN: &str = "subject";
pub const TIME_COLUMN: &str = "time";
pub const RESPONSE_COLUMN: &str = "response";

fn delimiter_for(path: &Path) -> u8 {
    match path.extension().and_then(|e| e.to_str()) {
        Some("tsv") | Some("tab") => b'\t',
        _ => b',',
    }
}

/// Reads a long-form table into a rectangular panel. Every subject must
/// cover the same time indices; duplicate (subject, time) rows are rejected.
/// A `response` column, when present, becomes the panel response.
pub fn load_panel(path: &Path) -> Result<TimeSeriesPanel> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter_for(path))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::data(format!("{}: {e}", path.display())))?;

    let headers = reader
        .headers()
        .map_err(|e| Error::data(format!("{}: missing header: {e}", path.display())))?
        .clone();
    let mut columns = headers.iter().map(str::to_string);
    if columns.next().as_deref() != Some(SUBJECT_COLUMN)
        || columns.next().as_deref() != Some(TIME_COLUMN)
    {
        return Err(Error::data(format!(
            "{}: header line must start with '{SUBJECT_COLUMN},{TIME_COLUMN}', got '{}'",
            path.display(),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut feature_names: Vec<String> = columns.collect();
    let has_response = feature_names.last().map(String::as_str) == Some(RESPONSE_COLUMN);
    if has_response {
        feature_names.pop();
    }
    if feature_names.is_empty() {
        return Err(Error::data(format!(
            "{}: no feature columns",
            path.display()
        )));
    }

    // subject -> time -> row values, with insertion order kept for subjects.
    let mut subject_order: Vec<String> = Vec::new();
    let mut rows: BTreeMap<String, BTreeMap<i64, Vec<f64>>> = BTreeMap::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            Error::data(format!("{}: data row {}: {e}", path.display(), line + 2))
        })?;
        let expected = 2 + feature_names.len() + usize::from(has_response);
        if record.len() != expected {
            return Err(Error::data(format!(
                "{}: data row {}: expected {} fields, found {}",
                path.display(),
                line + 2,
                expected,
                record.len()
            )));
        }
        let subject = record[0].to_string();
        let time: i64 = record[1].parse().map_err(|_| {
            Error::data(format!(
                "{}: data row {}: non-integer time '{}'",
                path.display(),
                line + 2,
                &record[1]
            ))
        })?;
        let values: Vec<f64> = record
            .iter()
            .skip(2)
            .map(|v| {
                if v.is_empty() || v.eq_ignore_ascii_case("na") || v.eq_ignore_ascii_case("nan") {
                    Ok(f64::NAN)
                } else {
                    v.parse::<f64>().map_err(|_| {
                        Error::data(format!(
                            "{}: data row {}: non-numeric value '{v}'",
                            path.display(),
                            line + 2
                        ))
                    })
                }
            })
            .collect::<Result<_>>()?;
        if !rows.contains_key(&subject) {
            subject_order.push(subject.clone());
        }
        if rows.entry(subject.clone()).or_default().insert(time, values).is_some() {
            return Err(Error::data(format!(
                "{}: duplicate (subject, time) key ({subject}, {time})",
                path.display()
            )));
        }
    }
    if subject_order.is_empty() {
        return Err(Error::data(format!("{}: no data rows", path.display())));
    }

    let expected_times: Vec<i64> = rows[&subject_order[0]].keys().copied().collect();
    let p = feature_names.len();
    let mut x = Vec::with_capacity(subject_order.len());
    let mut y = Vec::with_capacity(subject_order.len());
    for subject in &subject_order {
        let by_time = &rows[subject];
        let times: Vec<i64> = by_time.keys().copied().collect();
        if times != expected_times {
            return Err(Error::data(format!(
                "{}: subject '{subject}' covers different time points than '{}'",
                path.display(),
                subject_order[0]
            )));
        }
        let mut xm = Array2::zeros((times.len(), p));
        let mut ym = Array1::zeros(times.len());
        for (t, values) in by_time.values().enumerate() {
            for j in 0..p {
                xm[[t, j]] = values[j];
            }
            if has_response {
                ym[t] = values[p];
            }
        }
        x.push(xm);
        y.push(ym);
    }
    TimeSeriesPanel::new(
        subject_order,
        feature_names,
        x,
        has_response.then_some(y),
    )
}

/// Writes a panel in the same long-form layout, at full float precision so
/// a load round-trips bit-exactly.
pub fn write_panel(panel: &TimeSeriesPanel, path: &Path) -> Result<()> {
    let delimiter = delimiter_for(path);
    let mut writer = csv::WriterBuilder::new()
        .delimiter(delimiter)
        .from_path(path)
        .map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
    let mut header = vec![SUBJECT_COLUMN.to_string(), TIME_COLUMN.to_string()];
    header.extend(panel.feature_names.iter().cloned());
    if panel.y.is_some() {
        header.push(RESPONSE_COLUMN.to_string());
    }
    writer
        .write_record(&header)
        .map_err(|e| Error::data(e.to_string()))?;
    for (i, subject) in panel.subject_ids.iter().enumerate() {
        for t in 0..panel.time_points() {
            let mut record = vec![subject.clone(), t.to_string()];
            for j in 0..panel.features() {
                record.push(format_full(panel.x[i][[t, j]]));
            }
            if let Some(y) = &panel.y {
                record.push(format_full(y[i][t]));
            }
            writer
                .write_record(&record)
                .map_err(|e| Error::data(e.to_string()))?;
        }
    }
    writer.flush()?;
    Ok(())
}

/// Shortest decimal form that parses back to the identical float
/// (float Display in Rust is shortest-round-trip).
pub fn format_full(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v}")
    }
}
