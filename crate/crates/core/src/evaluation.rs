//! Confusion matrices, accuracy/precision/recall and prediction tables.
//!
//! Matrices are laid out with predicted classes on the rows and true classes
//! on the columns, so precision is read along a row and recall down a column.

use std::fmt::Write as _;
use std::io::Write;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knn::Prediction;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: Vec<String>,
    /// `counts[predicted][true]`
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    /// Build from raw counts (rows predicted, columns true).
    pub fn from_counts<S: AsRef<str>>(classes: &[S], counts: Vec<Vec<u64>>) -> Result<Self> {
        let classes: Vec<String> = classes.iter().map(|c| c.as_ref().to_string()).collect();
        if counts.len() != classes.len() || counts.iter().any(|r| r.len() != classes.len()) {
            return Err(Error::validation(format!(
                "confusion matrix must be {0}x{0}",
                classes.len()
            )));
        }
        check_distinct(&classes)?;
        Ok(ConfusionMatrix { classes, counts })
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sum(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    pub fn column_sum(&self, j: usize) -> u64 {
        self.counts.iter().map(|r| r[j]).sum()
    }

    fn index(&self, class: &str) -> Result<usize> {
        self.classes
            .iter()
            .position(|c| c == class)
            .ok_or_else(|| Error::validation(format!("unknown class '{}'", class)))
    }

    /// Correct predictions over all predictions.
    pub fn accuracy(&self) -> Result<f64> {
        let total = self.total();
        if total == 0 {
            return Err(Error::validation("accuracy of an empty confusion matrix"));
        }
        Ok(self.trace() as f64 / total as f64)
    }

    /// `None` when nothing was predicted as `class`.
    pub fn precision(&self, class: &str) -> Result<Option<f64>> {
        let i = self.index(class)?;
        let row = self.row_sum(i);
        Ok((row > 0).then(|| self.counts[i][i] as f64 / row as f64))
    }

    /// `None` when `class` never occurs in the true labels.
    pub fn recall(&self, class: &str) -> Result<Option<f64>> {
        let j = self.index(class)?;
        let col = self.column_sum(j);
        Ok((col > 0).then(|| self.counts[j][j] as f64 / col as f64))
    }

    pub fn report(&self) -> Result<MetricsReport> {
        let mut precision = IndexMap::new();
        let mut recall = IndexMap::new();
        for c in &self.classes {
            precision.insert(c.clone(), self.precision(c)?);
            recall.insert(c.clone(), self.recall(c)?);
        }
        Ok(MetricsReport {
            accuracy: self.accuracy()?,
            total: self.total(),
            precision,
            recall,
        })
    }

    /// Plain-text table with class precision per row and class recall as the
    /// last row.
    pub fn render(&self) -> String {
        let fmt_pct =
            |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{:.2}%", 100.0 * x));
        let mut header = vec![String::new()];
        header.extend(self.classes.iter().map(|c| format!("true {}", c)));
        header.push("class precision".into());
        let mut rows = vec![header];
        for (i, c) in self.classes.iter().enumerate() {
            let mut row = vec![format!("pred. {}", c)];
            row.extend(self.counts[i].iter().map(u64::to_string));
            row.push(fmt_pct(self.precision(c).ok().flatten()));
            rows.push(row);
        }
        let mut last = vec!["class recall".to_string()];
        last.extend(
            self.classes
                .iter()
                .map(|c| fmt_pct(self.recall(c).ok().flatten())),
        );
        last.push(String::new());
        rows.push(last);
        align(&rows)
    }
}

fn check_distinct(classes: &[String]) -> Result<()> {
    for (i, c) in classes.iter().enumerate() {
        if classes[..i].contains(c) {
            return Err(Error::validation(format!("class '{}' listed twice", c)));
        }
    }
    Ok(())
}

fn align(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|j| {
            rows.iter()
                .filter_map(|r| r.get(j))
                .map(String::len)
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for r in rows {
        let line: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(j, cell)| {
                if j == 0 {
                    format!("{:<w$}", cell, w = widths[j])
                } else {
                    format!("{:>w$}", cell, w = widths[j])
                }
            })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// Count `(predicted, true)` pairs into a matrix over `classes`.
pub fn confusion<T: AsRef<str>, P: AsRef<str>, C: AsRef<str>>(
    true_labels: &[T],
    predicted: &[P],
    classes: &[C],
) -> Result<ConfusionMatrix> {
    if true_labels.len() != predicted.len() {
        return Err(Error::validation(format!(
            "{} true labels but {} predictions",
            true_labels.len(),
            predicted.len()
        )));
    }
    let classes: Vec<String> = classes.iter().map(|c| c.as_ref().to_string()).collect();
    check_distinct(&classes)?;
    let pos = |l: &str| {
        classes
            .iter()
            .position(|c| c == l)
            .ok_or_else(|| Error::validation(format!("label '{}' is not a declared class", l)))
    };
    let n = classes.len();
    let mut counts = vec![vec![0u64; n]; n];
    for (t, p) in true_labels.iter().zip(predicted) {
        counts[pos(p.as_ref())?][pos(t.as_ref())?] += 1;
    }
    Ok(ConfusionMatrix { classes, counts })
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    cm.accuracy()
}

pub fn precision(cm: &ConfusionMatrix, class: &str) -> Result<Option<f64>> {
    cm.precision(class)
}

pub fn recall(cm: &ConfusionMatrix, class: &str) -> Result<Option<f64>> {
    cm.recall(class)
}

/// Overall accuracy plus per-class precision and recall. Undefined values
/// (zero denominators) are `None`, serialized as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub total: u64,
    pub precision: IndexMap<String, Option<f64>>,
    pub recall: IndexMap<String, Option<f64>>,
}

impl MetricsReport {
    /// Classes whose precision or recall is undefined.
    pub fn undefined_classes(&self) -> Vec<&str> {
        self.precision
            .iter()
            .zip(&self.recall)
            .filter(|((_, p), (_, r))| p.is_none() || r.is_none())
            .map(|((c, _), _)| c.as_str())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub row: usize,
    pub actual: String,
    pub predicted: String,
    pub confidences: Vec<f64>,
}

/// Per-record output: row number, actual label, predicted label and one
/// confidence column per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionTable {
    /// Name of the predicted attribute, used in the column headers.
    pub target: String,
    pub classes: Vec<String>,
    pub rows: Vec<PredictionRow>,
}

pub fn prediction_table<T: AsRef<str>>(
    target: &str,
    classes: &[String],
    true_labels: &[T],
    predictions: &[Prediction],
) -> Result<PredictionTable> {
    if true_labels.len() != predictions.len() {
        return Err(Error::validation(format!(
            "{} true labels but {} predictions",
            true_labels.len(),
            predictions.len()
        )));
    }
    let rows = true_labels
        .iter()
        .zip(predictions)
        .enumerate()
        .map(|(i, (t, p))| PredictionRow {
            row: i + 1,
            actual: t.as_ref().to_string(),
            predicted: p.label.clone(),
            confidences: classes
                .iter()
                .map(|c| p.confidences.get(c).copied().unwrap_or(0.0))
                .collect(),
        })
        .collect();
    Ok(PredictionTable {
        target: target.to_string(),
        classes: classes.to_vec(),
        rows,
    })
}

impl PredictionTable {
    pub fn header(&self) -> Vec<String> {
        let mut h = vec![
            "Row No.".to_string(),
            self.target.clone(),
            format!("prediction({})", self.target),
        ];
        h.extend(self.classes.iter().map(|c| format!("confidence({})", c)));
        h
    }

    fn cells(&self, r: &PredictionRow) -> Vec<String> {
        let mut cells = vec![r.row.to_string(), r.actual.clone(), r.predicted.clone()];
        cells.extend(r.confidences.iter().map(|c| format!("{:.3}", c)));
        cells
    }

    pub fn render(&self) -> String {
        let mut rows = vec![self.header()];
        rows.extend(self.rows.iter().map(|r| self.cells(r)));
        align(&rows)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.header())?;
        for r in &self.rows {
            w.write_record(self.cells(r))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Accuracy line, matrix and per-class metrics as plain text.
pub fn render_report(title: &str, cm: &ConfusionMatrix) -> Result<String> {
    let mut out = String::new();
    writeln!(out, "{}", title).unwrap();
    writeln!(out, "accuracy: {:.2}%", 100.0 * cm.accuracy()?).unwrap();
    writeln!(out).unwrap();
    out.push_str(&cm.render());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn behavior_matrix() -> ConfusionMatrix {
        ConfusionMatrix::from_counts(
            &["lying", "standing", "sitting", "walking"],
            vec![
                vec![19, 8, 3, 0],
                vec![1, 3, 0, 0],
                vec![4, 1, 22, 0],
                vec![0, 0, 0, 12],
            ],
        )
        .unwrap()
    }

    fn emergency_matrix() -> ConfusionMatrix {
        ConfusionMatrix::from_counts(
            &["non-emergency", "emergency"],
            vec![vec![41, 7], vec![3, 11]],
        )
        .unwrap()
    }

    fn pct(v: f64) -> f64 {
        (v * 10000.0).round() / 100.0
    }

    #[test]
    fn behavior_metrics() {
        let cm = behavior_matrix();
        assert_eq!(cm.total(), 73);
        assert_eq!(pct(cm.accuracy().unwrap()), 76.71);
        assert_eq!(pct(cm.precision("lying").unwrap().unwrap()), 63.33);
        assert_eq!(cm.precision("walking").unwrap(), Some(1.0));
        assert_eq!(cm.recall("standing").unwrap(), Some(0.25));
        assert!(cm.precision("running").is_err());
    }

    #[test]
    fn emergency_metrics() {
        let cm = emergency_matrix();
        assert_eq!(cm.total(), 62);
        assert_eq!(pct(cm.accuracy().unwrap()), 83.87);
        assert_eq!(pct(cm.precision("emergency").unwrap().unwrap()), 78.57);
        assert_eq!(pct(cm.recall("non-emergency").unwrap().unwrap()), 93.18);
    }

    #[test]
    fn counts_pairs() {
        let t = ["a", "a", "b", "b", "b"];
        let p = ["a", "b", "b", "b", "a"];
        let cm = confusion(&t, &p, &["a", "b"]).unwrap();
        assert_eq!(cm.counts(), [vec![1, 1], vec![1, 2]]);
        let diag = confusion(&t, &t, &["a", "b"]).unwrap();
        assert_eq!(diag.counts(), [vec![2, 0], vec![0, 3]]);
        assert_eq!(diag.accuracy().unwrap(), 1.0);
        assert!(confusion(&t, &p[..4], &["a", "b"]).is_err());
        assert!(confusion(&t, &p, &["a"]).is_err());
    }

    #[test]
    fn undefined_markers() {
        let cm = confusion(&["a", "a"], &["a", "a"], &["a", "b"]).unwrap();
        assert_eq!(cm.accuracy().unwrap(), 1.0);
        assert_eq!(cm.precision("b").unwrap(), None);
        assert_eq!(cm.recall("b").unwrap(), None);
        assert_eq!(cm.recall("a").unwrap(), Some(1.0));
        let report = cm.report().unwrap();
        assert_eq!(report.undefined_classes(), ["b"]);
        assert!(serde_json::to_string(&report).unwrap().contains("null"));
        assert!(cm.render().contains("n/a"));
        let empty = confusion::<&str, &str, _>(&[], &[], &["a"]).unwrap();
        assert!(empty.accuracy().is_err());
    }

    #[test]
    fn rendered_matrix() {
        let text = render_report("behavior", &behavior_matrix()).unwrap();
        assert!(text.contains("accuracy: 76.71%"));
        assert!(text.contains("81.48%"));
        assert!(text.contains("class recall"));
        assert!(text.contains("79.17%"));
    }

    #[test]
    fn prediction_tables() {
        let classes = vec!["lying".to_string(), "standing".to_string()];
        let pred = Prediction {
            label: "lying".into(),
            confidences: [
                ("lying".to_string(), 0.818),
                ("standing".to_string(), 0.182),
            ]
            .into_iter()
            .collect(),
        };
        let t = prediction_table("Activity", &classes, &["lying"], &[pred]).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.header()[2], "prediction(Activity)");
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let csv_text = String::from_utf8(buf).unwrap();
        assert!(csv_text.starts_with(
            "Row No.,Activity,prediction(Activity),confidence(lying),confidence(standing)"
        ));
        assert!(csv_text.contains("1,lying,lying,0.818,0.182"));

        let empty = prediction_table::<&str>("Activity", &classes, &[], &[]).unwrap();
        let mut buf = Vec::new();
        empty.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1);
    }
}
