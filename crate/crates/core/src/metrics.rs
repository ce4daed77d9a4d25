//! Accuracy, confusion matrices and per-subject report tables.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::formats::encode_pgm;
use crate::types::{class_names, SubjectId};

/// Percentage of positions where `predictions` equals `truth`.
pub fn accuracy(predictions: &[usize], truth: &[usize]) -> Result<f64> {
    if predictions.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} labels",
            predictions.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::InsufficientData("no items to score".into()));
    }
    let hits = predictions.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(100.0 * hits as f64 / truth.len() as f64)
}

/// Rows are true labels, columns are predictions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    n_classes: usize,
    counts: Vec<u64>,
    class_names: Vec<String>,
}

impl ConfusionMatrix {
    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.n_classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes).map(|i| self.get(i, i)).sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.chunks(self.n_classes).map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        (0..self.n_classes)
            .map(|p| (0..self.n_classes).map(|t| self.get(t, p)).sum())
            .collect()
    }

    /// `trace / total` in percent; 0 for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            n => 100.0 * self.trace() as f64 / n as f64,
        }
    }

    /// Header `truth\predicted,<names>`, then one row per true class.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("truth\\predicted");
        for name in &self.class_names {
            s.push(',');
            s.push_str(name);
        }
        s.push('\n');
        for (t, name) in self.class_names.iter().enumerate() {
            s.push_str(name);
            for p in 0..self.n_classes {
                let _ = write!(s, ",{}", self.get(t, p));
            }
            s.push('\n');
        }
        s
    }

    /// Binary PGM heat map, `cell` pixels per matrix entry. Each row is
    /// scaled by its own total so classes of different size compare.
    pub fn to_pgm(&self, cell: usize) -> Vec<u8> {
        let k = self.n_classes;
        let side = k * cell.max(1);
        let rows = self.row_sums();
        let mut px = vec![0u8; side * side];
        for (y, line) in px.chunks_mut(side).enumerate() {
            let t = y / cell.max(1);
            for (x, v) in line.iter_mut().enumerate() {
                let p = x / cell.max(1);
                if rows[t] > 0 {
                    *v = (255.0 * self.get(t, p) as f64 / rows[t] as f64).round() as u8;
                }
            }
        }
        encode_pgm(side, side, &px)
    }
}

pub fn confusion(predictions: &[usize], truth: &[usize], n_classes: usize) -> Result<ConfusionMatrix> {
    if predictions.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} labels",
            predictions.len(),
            truth.len()
        )));
    }
    if n_classes == 0 {
        return Err(Error::InvalidArgument("confusion matrix needs at least one class".into()));
    }
    let mut counts = vec![0u64; n_classes * n_classes];
    for (&p, &t) in predictions.iter().zip(truth) {
        if let Some(&code) = [p, t].iter().find(|&&c| c >= n_classes) {
            return Err(Error::InvalidLabel { code, n_classes });
        }
        counts[t * n_classes + p] += 1;
    }
    Ok(ConfusionMatrix {
        n_classes,
        counts,
        class_names: class_names(n_classes),
    })
}

/// Test-split outcome of one subject's model.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectResult {
    pub subject: SubjectId,
    /// Percent.
    pub accuracy: f64,
    pub n_test: usize,
    pub confusion: ConfusionMatrix,
}

impl SubjectResult {
    pub fn from_predictions(
        subject: SubjectId,
        predictions: &[usize],
        truth: &[usize],
        n_classes: usize,
    ) -> Result<Self> {
        Ok(SubjectResult {
            subject,
            accuracy: accuracy(predictions, truth)?,
            n_test: truth.len(),
            confusion: confusion(predictions, truth, n_classes)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub n_classes: usize,
    pub preset: String,
    pub seed: u64,
    /// Which parameter snapshot was scored, e.g. `best` or `final`.
    pub model: String,
    /// Sorted by subject.
    pub rows: Vec<SubjectResult>,
    /// Unweighted mean of the row accuracies.
    pub average: f64,
}

impl EvalReport {
    /// `subject,accuracy,n_test` with full-precision accuracies and a
    /// closing `average` row whose `n_test` is the total.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("subject,accuracy,n_test\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{}", r.subject.index(), r.accuracy, r.n_test);
        }
        let total: usize = self.rows.iter().map(|r| r.n_test).sum();
        let _ = writeln!(s, "average,{},{}", self.average, total);
        s
    }

    /// Aligned plain-text table with two decimals.
    pub fn to_table(&self) -> String {
        let header = format!(
            "model={} preset={} classes={} seed={}",
            self.model, self.preset, self.n_classes, self.seed
        );
        let rows: Vec<(u16, f64, usize)> = self
            .rows
            .iter()
            .map(|r| (r.subject.index(), r.accuracy, r.n_test))
            .collect();
        render_table(&header, &rows, self.average)
    }
}

/// Table body shared by [`EvalReport::to_table`] and reports rebuilt from
/// CSV: `(subject, accuracy %, n_test)` rows and an `Average` line.
pub fn render_table(header: &str, rows: &[(u16, f64, usize)], average: f64) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{header}");
    let _ = writeln!(s, "{:<10}{:>14}{:>10}", "Subject", "Accuracy (%)", "n_test");
    for &(subject, acc, n) in rows {
        let _ = writeln!(s, "{:<10}{:>14.2}{:>10}", format!("S{subject}"), acc, n);
    }
    let total: usize = rows.iter().map(|r| r.2).sum();
    let _ = writeln!(s, "{:<10}{:>14.2}{:>10}", "Average", average, total);
    s
}

/// Parses the `subject,accuracy,n_test` CSV written by [`EvalReport::to_csv`]
/// into subject rows and the recorded average.
pub fn parse_report_csv(text: &str) -> Result<(Vec<(u16, f64, usize)>, f64)> {
    let mut lines = text.lines();
    if lines.next() != Some("subject,accuracy,n_test") {
        return Err(Error::Format("report CSV header missing".into()));
    }
    let mut rows = Vec::new();
    let mut average = None;
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let bad = || Error::Format(format!("report CSV line {line:?}"));
        let mut f = line.split(',');
        let (Some(who), Some(acc), Some(n), None) = (f.next(), f.next(), f.next(), f.next()) else {
            return Err(bad());
        };
        let acc: f64 = acc.parse().map_err(|_| bad())?;
        let n: usize = n.parse().map_err(|_| bad())?;
        if who == "average" {
            average = Some(acc);
        } else if average.is_some() {
            return Err(bad());
        } else {
            rows.push((who.parse().map_err(|_| bad())?, acc, n));
        }
    }
    let average = average.ok_or_else(|| Error::Format("report CSV has no average row".into()))?;
    if rows.is_empty() {
        return Err(Error::InsufficientData("report CSV has no subject rows".into()));
    }
    Ok((rows, average))
}

pub fn build_report(
    mut rows: Vec<SubjectResult>,
    n_classes: usize,
    preset: &str,
    seed: u64,
    model: &str,
) -> Result<EvalReport> {
    if rows.is_empty() {
        return Err(Error::InsufficientData("report needs at least one subject".into()));
    }
    rows.sort_by_key(|r| r.subject);
    let average = rows.iter().map(|r| r.accuracy).sum::<f64>() / rows.len() as f64;
    Ok(EvalReport {
        n_classes,
        preset: preset.to_string(),
        seed,
        model: model.to_string(),
        rows,
        average,
    })
}
