//! Report files: JSON summary, per-measure sweep curves, runtimes, and
//! SVG scatter plots of measure values split by reference label.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::ratings::{AgreementStats, Label};
use super::sweep::SweepResult;
use crate::engine::output::{csv_err, ensure_dir};
use crate::engine::{MeasureTiming, RankingRecord};
use crate::error::{Error, Result};

/// Runtime in whole minutes, e.g. `"16 mins"`.
pub fn format_minutes(seconds: f64) -> String {
    let mins = (seconds / 60.0).round() as u64;
    if mins == 1 {
        "1 min".to_string()
    } else {
        format!("{mins} mins")
    }
}

#[derive(Debug, Serialize)]
struct MeasureSummary<'a> {
    measure: &'a str,
    optimal_threshold: f64,
    optimal_balanced_accuracy: f64,
    positives: usize,
    negatives: usize,
    excluded_unresolved: usize,
    curve_file: String,
    scatter_file: String,
}

#[derive(Debug, Serialize)]
struct RuntimeRow<'a> {
    measure: &'a str,
    seconds: f64,
    runtime: String,
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    record_count: usize,
    measures: Vec<MeasureSummary<'a>>,
    agreement: Option<&'a AgreementStats>,
    runtimes: Vec<RuntimeRow<'a>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportFiles {
    pub summary: PathBuf,
    pub curves: Vec<PathBuf>,
    pub scatters: Vec<PathBuf>,
    pub runtimes: Option<PathBuf>,
}

fn file_safe(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' })
        .collect()
}

pub fn write_sweep_csv(sweep: &SweepResult, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for p in &sweep.points {
        w.serialize(p).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Values as dots in two columns (replica, non-replica) with the optimal
/// threshold drawn across.
pub fn scatter_svg(sweep: &SweepResult) -> String {
    const W: f64 = 360.0;
    const H: f64 = 300.0;
    const PAD: f64 = 40.0;
    let (mut lo, mut hi) = sweep
        .samples
        .iter()
        .map(|s| s.value)
        .chain([sweep.optimal_threshold])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if hi - lo < 1e-12 {
        lo -= 0.5;
        hi += 0.5;
    }
    let y = |v: f64| H - PAD - (v - lo) / (hi - lo) * (H - 2.0 * PAD);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
        W / 2.0,
        sweep.measure
    );
    let _ = writeln!(
        svg,
        r##"<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{}" stroke="#444"/>"##,
        H - PAD
    );
    for (col, (label, name, color)) in [
        (Label::Replica, "Replica", "#c0392b"),
        (Label::NotReplica, "Non-Replica", "#2e6da4"),
    ]
    .into_iter()
    .enumerate()
    {
        let cx = PAD + (W - 2.0 * PAD) * (0.25 + 0.5 * col as f64);
        let _ = writeln!(
            svg,
            r#"<text x="{cx}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">{name}</text>"#,
            H - PAD / 3.0
        );
        for (i, s) in sweep.samples.iter().filter(|s| s.label == label).enumerate() {
            // deterministic horizontal jitter
            let jitter = ((i * 37) % 21) as f64 - 10.0;
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}" fill-opacity="0.7"/>"#,
                cx + jitter,
                y(s.value)
            );
        }
    }
    let ty = y(sweep.optimal_threshold);
    let _ = writeln!(
        svg,
        r##"<line x1="{PAD}" y1="{ty:.2}" x2="{}" y2="{ty:.2}" stroke="#222" stroke-dasharray="4 3"/>"##,
        W - PAD
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{:.2}" text-anchor="end" font-family="sans-serif" font-size="10">T = {:.2}</text>"#,
        W - PAD,
        ty - 4.0,
        sweep.optimal_threshold
    );
    svg.push_str("</svg>\n");
    svg
}

/// Write the report into `out`, creating it if needed.
pub fn emit_report(
    records: &[RankingRecord],
    sweeps: &[SweepResult],
    stats: Option<&AgreementStats>,
    timings: &[MeasureTiming],
    out: impl AsRef<Path>,
) -> Result<ReportFiles> {
    let out = out.as_ref();
    ensure_dir(out)?;
    let mut curves = Vec::new();
    let mut scatters = Vec::new();
    let mut measures = Vec::new();
    for sweep in sweeps {
        let stem = file_safe(&sweep.measure);
        let curve = out.join(format!("sweep_{stem}.csv"));
        write_sweep_csv(sweep, &curve)?;
        let scatter = out.join(format!("scatter_{stem}.svg"));
        fs::write(&scatter, scatter_svg(sweep)).map_err(|e| Error::io(&scatter, e))?;
        measures.push(MeasureSummary {
            measure: &sweep.measure,
            optimal_threshold: sweep.optimal_threshold,
            optimal_balanced_accuracy: sweep.optimal_balanced_accuracy,
            positives: sweep.positives,
            negatives: sweep.negatives,
            excluded_unresolved: sweep.excluded_unresolved,
            curve_file: format!("sweep_{stem}.csv"),
            scatter_file: format!("scatter_{stem}.svg"),
        });
        curves.push(curve);
        scatters.push(scatter);
    }
    let runtimes: Vec<RuntimeRow> = timings
        .iter()
        .map(|t| RuntimeRow {
            measure: t.measure.name(),
            seconds: t.seconds,
            runtime: format_minutes(t.seconds),
        })
        .collect();
    let runtimes_path = if runtimes.is_empty() {
        None
    } else {
        let p = out.join("runtimes.csv");
        let mut w = csv::Writer::from_path(&p).map_err(|e| csv_err(&p, e))?;
        for r in &runtimes {
            w.serialize(r).map_err(|e| csv_err(&p, e))?;
        }
        w.flush().map_err(|e| Error::io(&p, e))?;
        Some(p)
    };
    let summary = Summary {
        record_count: records.len(),
        measures,
        agreement: stats,
        runtimes,
    };
    let summary_path = out.join("summary.json");
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(&summary_path, text).map_err(|e| Error::io(&summary_path, e))?;
    Ok(ReportFiles {
        summary: summary_path,
        curves,
        scatters,
        runtimes: runtimes_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::MeasureKind;
    use crate::evaluation::sweep::{sweep_thresholds, Sample};

    #[test]
    fn minutes_format() {
        assert_eq!(format_minutes(16.0 * 60.0), "16 mins");
        assert_eq!(format_minutes(15.6 * 60.0), "16 mins");
        assert_eq!(format_minutes(60.0), "1 min");
        assert_eq!(format_minutes(3.0), "0 mins");
    }

    #[test]
    fn empty_report() {
        let dir = tempfile::tempdir().unwrap();
        let files = emit_report(&[], &[], None, &[], dir.path()).unwrap();
        assert!(files.curves.is_empty());
        let summary: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(files.summary).unwrap()).unwrap();
        assert_eq!(summary["measures"].as_array().unwrap().len(), 0);
        let csvs = fs::read_dir(dir.path())
            .unwrap()
            .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "csv"))
            .count();
        assert_eq!(csvs, 0);
    }

    #[test]
    fn one_sweep_one_curve() {
        let samples = vec![
            Sample { value: 0.1, label: Label::Replica },
            Sample { value: 0.3, label: Label::NotReplica },
        ];
        let sweep = sweep_thresholds("rmse", &samples).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let timings = [MeasureTiming { measure: MeasureKind::Rmse, seconds: 960.0 }];
        let files = emit_report(&[], std::slice::from_ref(&sweep), None, &timings, dir.path()).unwrap();
        assert_eq!(files.curves.len(), 1);
        let text = fs::read_to_string(&files.curves[0]).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "threshold,sensitivity,specificity,balanced_accuracy");
        let rows: Vec<_> = lines.collect();
        assert_eq!(rows.len(), sweep.points.len());
        assert_eq!(rows[0], "0.1,0.0,1.0,0.5");
        let rt = fs::read_to_string(files.runtimes.unwrap()).unwrap();
        assert!(rt.contains("rmse,960.0,16 mins"));
        let svg = fs::read_to_string(&files.scatters[0]).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<circle").count(), 2);
    }

    #[test]
    fn unwritable_directory_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        assert!(matches!(
            emit_report(&[], &[], None, &[], blocker.join("sub")),
            Err(Error::Io { .. })
        ));
    }
}
