//! Text and CSV renderings of cross-validation results.

use std::fmt::Write as _;
use std::path::Path;

use crate::crossval::{CrossvalReport, StreamKind};
use crate::eval::ConfusionMatrix;
use crate::fsutil::write_atomic;
use crate::tensor::Real;

/// Accuracies published for the full-size benchmarks, shown for comparison only.
pub const REFERENCE_ACCURACIES: [(&str, Real); 3] =
    [("CK+", 96.94), ("Oulu-CASIA", 80.62), ("MMI", 66.33)];

pub fn display_name(kind: StreamKind) -> &'static str {
    match kind {
        StreamKind::Geometry => "DTGN",
        StreamKind::Appearance => "DTAN",
        StreamKind::Fused => "DTAGN",
    }
}

fn class_name(names: &[String], c: usize) -> String {
    names.get(c).cloned().unwrap_or_else(|| c.to_string())
}

pub fn pct(x: Real) -> String {
    format!("{:.2}", 100.0 * x)
}

pub fn folds_csv(report: &CrossvalReport) -> String {
    let streams = report.streams();
    let mut out = String::from("fold,test_subjects,train_sequences,test_sequences");
    for k in &streams {
        write!(out, ",{}_accuracy", k.name()).unwrap();
    }
    out.push('\n');
    for fold in &report.folds {
        let subjects: Vec<&str> = fold.test_subjects.iter().map(|s| s.as_str()).collect();
        write!(
            out,
            "{},{},{},{}",
            fold.fold,
            subjects.join(" "),
            fold.train_count,
            fold.predictions.len()
        )
        .unwrap();
        for &k in &streams {
            let acc = fold.confusion(k, report.classes).map_or(0.0, |m| m.accuracy());
            write!(out, ",{}", pct(acc)).unwrap();
        }
        out.push('\n');
    }
    out
}

/// Row-normalized percentages plus the raw row totals.
pub fn confusion_csv(matrix: &ConfusionMatrix, names: &[String]) -> String {
    let c = matrix.classes();
    let mut out = String::from("truth");
    for j in 0..c {
        write!(out, ",{}", class_name(names, j)).unwrap();
    }
    out.push_str(",samples,empty\n");
    for (i, row) in matrix.percentages().iter().enumerate() {
        out.push_str(&class_name(names, i));
        for v in row {
            write!(out, ",{v:.2}").unwrap();
        }
        let total = matrix.row_total(i);
        writeln!(out, ",{total},{}", total == 0).unwrap();
    }
    out
}

pub fn predictions_csv(report: &CrossvalReport) -> String {
    let streams = report.streams();
    let mut out = String::from("sequence_id,subject_id,label,fold");
    for k in &streams {
        write!(out, ",{}", k.name()).unwrap();
    }
    out.push('\n');
    for p in report.predictions() {
        write!(out, "{},{},{},{}", p.sequence_id, p.subject, p.label, p.fold).unwrap();
        for &k in &streams {
            let pred = p.scores(k).map(|s| s.prediction().to_string()).unwrap_or_default();
            write!(out, ",{pred}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Fixed-width table of row percentages.
pub fn confusion_text(matrix: &ConfusionMatrix, names: &[String]) -> String {
    let mut out = String::new();
    let c = matrix.classes();
    let width = (0..c).map(|i| class_name(names, i).len()).max().unwrap_or(1).max(6);
    write!(out, "{:>width$}", "").unwrap();
    for j in 0..c {
        write!(out, " {:>width$}", class_name(names, j)).unwrap();
    }
    out.push('\n');
    for (i, row) in matrix.percentages().iter().enumerate() {
        write!(out, "{:>width$}", class_name(names, i)).unwrap();
        for v in row {
            write!(out, " {v:>width$.2}").unwrap();
        }
        if matrix.row_total(i) == 0 {
            out.push_str("  (no samples)");
        }
        out.push('\n');
    }
    out
}

pub fn summary_text(report: &CrossvalReport, names: &[String]) -> String {
    let mut out = String::new();
    let total = report.predictions().count();
    writeln!(
        out,
        "{}-fold subject-independent cross-validation, {} test sequences, {} classes",
        report.folds.len(),
        total,
        report.classes
    )
    .unwrap();
    out.push('\n');
    writeln!(out, "{:<20} {:>12}", "Network", "Accuracy (%)").unwrap();
    for k in report.streams() {
        let label = match k {
            StreamKind::Fused => format!("{} (alpha={})", display_name(k), report.alpha),
            _ => display_name(k).to_string(),
        };
        let acc = report.accuracy(k).unwrap_or(0.0);
        writeln!(out, "{label:<20} {:>12}", pct(acc)).unwrap();
    }
    for k in report.streams() {
        if let Some(m) = report.confusion(k) {
            writeln!(out, "\nConfusion matrix, {} (rows: truth, columns: prediction, %)", display_name(k)).unwrap();
            out.push_str(&confusion_text(&m, names));
        }
    }
    out.push_str("\nReference accuracies on the full benchmarks (not reproduced at this scale):\n");
    for (name, acc) in REFERENCE_ACCURACIES {
        writeln!(out, "  {name:<12} {acc:.2}").unwrap();
    }
    out
}

/// Writes `folds.csv`, `predictions.csv`, `confusion_{stream}.csv` and `summary.txt`.
pub fn write_reports(dir: &Path, report: &CrossvalReport, names: &[String]) -> crate::Result<()> {
    write_atomic(&dir.join("folds.csv"), folds_csv(report).as_bytes())?;
    write_atomic(&dir.join("predictions.csv"), predictions_csv(report).as_bytes())?;
    for k in report.streams() {
        if let Some(m) = report.confusion(k) {
            write_atomic(
                &dir.join(format!("confusion_{}.csv", k.name())),
                confusion_csv(&m, names).as_bytes(),
            )?;
        }
    }
    write_atomic(&dir.join("summary.txt"), summary_text(report, names).as_bytes())
}
