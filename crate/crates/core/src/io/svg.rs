//! Minimal deterministic SVG plots: line charts, histograms, and heatmaps.
//! No display dependencies; output is a plain text file that is byte-stable
//! for identical inputs.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;

const PALETTE: [&str; 6] = ["#1b7837", "#c0392b", "#2166ac", "#e08214", "#762a83", "#4d4d4d"];

fn fmt(v: f64) -> String {
    format!("{:.3}", v)
}

fn axis_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn document(body: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n{body}</svg>\n"
    )
}

fn frame(title: &str) -> String {
    let x1 = MARGIN;
    let y1 = HEIGHT - MARGIN;
    let x2 = WIDTH - MARGIN;
    let y0 = MARGIN;
    format!(
        "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" \
         text-anchor=\"middle\">{}</text>\n\
         <line x1=\"{x1}\" y1=\"{y1}\" x2=\"{x2}\" y2=\"{y1}\" stroke=\"black\"/>\n\
         <line x1=\"{x1}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y1}\" stroke=\"black\"/>\n",
        WIDTH / 2.0,
        escape(title)
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Multi-series line chart over a shared x grid.
pub fn write_line_chart(
    title: &str,
    x: &[f64],
    series: &[(&str, Vec<f64>)],
    path: &Path,
) -> Result<()> {
    if x.is_empty() || series.is_empty() {
        return Err(Error::data("empty line chart input".to_string()));
    }
    for (name, ys) in series {
        if ys.len() != x.len() {
            return Err(Error::shape(format!(
                "series '{name}' has {} points for {} x values",
                ys.len(),
                x.len()
            )));
        }
    }
    let (x_lo, x_hi) = axis_range(x.iter().copied());
    let (y_lo, y_hi) = axis_range(series.iter().flat_map(|(_, ys)| ys.iter().copied()));
    let sx = |v: f64| MARGIN + (v - x_lo) / (x_hi - x_lo) * (WIDTH - 2.0 * MARGIN);
    let sy = |v: f64| HEIGHT - MARGIN - (v - y_lo) / (y_hi - y_lo) * (HEIGHT - 2.0 * MARGIN);

    let mut body = frame(title);
    for (idx, (name, ys)) in series.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let points: Vec<String> = x
            .iter()
            .zip(ys)
            .map(|(a, b)| format!("{},{}", fmt(sx(*a)), fmt(sy(*b))))
            .collect();
        let _ = writeln!(
            body,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>",
            points.join(" ")
        );
        let _ = writeln!(
            body,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" \
             fill=\"{color}\">{}</text>",
            WIDTH - MARGIN + 4.0,
            fmt(MARGIN + 14.0 * idx as f64),
            escape(name)
        );
    }
    std::fs::write(path, document(&body))?;
    Ok(())
}

/// Histogram with a fixed bin count over the data range.
pub fn write_histogram(title: &str, values: &[f64], bins: usize, path: &Path) -> Result<()> {
    if values.is_empty() || bins == 0 {
        return Err(Error::data("empty histogram input".to_string()));
    }
    let (lo, hi) = axis_range(values.iter().copied());
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for v in values {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let max_count = *counts.iter().max().unwrap() as f64;
    let plot_w = (WIDTH - 2.0 * MARGIN) / bins as f64;
    let mut body = frame(title);
    for (b, count) in counts.iter().enumerate() {
        let h = *count as f64 / max_count * (HEIGHT - 2.0 * MARGIN);
        let _ = writeln!(
            body,
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\" stroke=\"white\"/>",
            fmt(MARGIN + b as f64 * plot_w),
            fmt(HEIGHT - MARGIN - h),
            fmt(plot_w),
            fmt(h),
            PALETTE[2]
        );
    }
    std::fs::write(path, document(&body))?;
    Ok(())
}

/// Heatmap over a labelled grid; cell color interpolates white -> green over
/// [lo, hi] of the data.
pub fn write_heatmap(
    title: &str,
    row_labels: &[String],
    col_labels: &[String],
    cells: &[Vec<f64>],
    path: &Path,
) -> Result<()> {
    if cells.len() != row_labels.len()
        || cells.iter().any(|row| row.len() != col_labels.len())
        || cells.is_empty()
    {
        return Err(Error::shape("heatmap grid does not match labels".to_string()));
    }
    let (lo, hi) = axis_range(cells.iter().flatten().copied());
    let cell_w = (WIDTH - 2.0 * MARGIN) / col_labels.len() as f64;
    let cell_h = (HEIGHT - 2.0 * MARGIN) / row_labels.len() as f64;
    let mut body = frame(title);
    for (r, row) in cells.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            let t = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
            let green = (255.0 - t * 135.0) as u8;
            let other = (255.0 - t * 200.0) as u8;
            let _ = writeln!(
                body,
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" \
                 fill=\"rgb({other},{green},{other})\" stroke=\"white\"/>\
                 <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" \
                 text-anchor=\"middle\">{}</text>",
                fmt(MARGIN + c as f64 * cell_w),
                fmt(MARGIN + r as f64 * cell_h),
                fmt(cell_w),
                fmt(cell_h),
                fmt(MARGIN + (c as f64 + 0.5) * cell_w),
                fmt(MARGIN + (r as f64 + 0.5) * cell_h + 4.0),
                fmt(*v),
            );
        }
    }
    for (r, label) in row_labels.iter().enumerate() {
        let _ = writeln!(
            body,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" \
             text-anchor=\"end\">{}</text>",
            fmt(MARGIN - 6.0),
            fmt(MARGIN + (r as f64 + 0.5) * cell_h + 4.0),
            escape(label)
        );
    }
    for (c, label) in col_labels.iter().enumerate() {
        let _ = writeln!(
            body,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" \
             text-anchor=\"middle\">{}</text>",
            fmt(MARGIN + (c as f64 + 0.5) * cell_w),
            fmt(HEIGHT - MARGIN + 16.0),
            escape(label)
        );
    }
    std::fs::write(path, document(&body))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_chart_is_deterministic_and_valid() {
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.svg");
        let p2 = dir.path().join("b.svg");
        let x = vec![0.0, 1.0, 2.0];
        let series = vec![("power", vec![0.1, 0.8, 0.9]), ("fdr", vec![0.3, 0.2, 0.1])];
        write_line_chart("sweep", &x, &series, &p1).unwrap();
        write_line_chart("sweep", &x, &series, &p2).unwrap();
        let one = std::fs::read(&p1).unwrap();
        assert_eq!(one, std::fs::read(&p2).unwrap());
        let text = String::from_utf8(one).unwrap();
        assert!(text.starts_with("<svg"));
        assert!(text.contains("polyline"));
        assert!(text.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn histogram_counts_all_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.svg");
        write_histogram("w", &[0.0, 0.5, 1.0, 1.0, -2.0], 4, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.matches("<rect").count(), 1 + 4); // background + bins
    }

    #[test]
    fn heatmap_validates_grid() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("hm.svg");
        let rows = vec!["r1".to_string()];
        let cols = vec!["c1".to_string(), "c2".to_string()];
        assert!(write_heatmap("t", &rows, &cols, &[vec![1.0]], &path).is_err());
        write_heatmap("t", &rows, &cols, &[vec![1.0, 2.0]], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("rgb("));
    }

    #[test]
    fn escapes_markup_in_titles() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.svg");
        write_histogram("a<b&c", &[1.0, 2.0], 2, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("a&lt;b&amp;c"));
    }
}
