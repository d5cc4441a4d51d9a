//! Baseline-versus-pipeline comparison tables.
//!
//! "Old" is the fixed multilinear basis, "new" the pruned basis found by
//! structural optimization. The CSV form keeps every number at full precision
//! and parses back to the same report.

use std::fmt::Write as _;

use spsnn_core::basis::MonomialBasis;
use spsnn_core::trainer::PruneResult;

use crate::error::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    TrainMse,
    TestMse,
    TrainAccuracy,
    TestAccuracy,
}

impl Metric {
    pub fn key(self) -> &'static str {
        match self {
            Metric::TrainMse => "train_mse",
            Metric::TestMse => "test_mse",
            Metric::TrainAccuracy => "train_accuracy",
            Metric::TestAccuracy => "test_accuracy",
        }
    }

    pub fn from_key(key: &str) -> Option<Self> {
        [
            Metric::TrainMse,
            Metric::TestMse,
            Metric::TrainAccuracy,
            Metric::TestAccuracy,
        ]
        .into_iter()
        .find(|m| m.key() == key)
    }

    pub fn higher_is_better(self) -> bool {
        matches!(self, Metric::TrainAccuracy | Metric::TestAccuracy)
    }

    pub fn is_train(self) -> bool {
        matches!(self, Metric::TrainMse | Metric::TrainAccuracy)
    }
}

/// Relative gain of `new` over `old` in percent, positive when `new` is better.
pub fn improvement_pct(metric: Metric, old: f64, new: f64) -> Option<f64> {
    if old == 0.0 || !old.is_finite() || !new.is_finite() {
        return None;
    }
    let gain = if metric.higher_is_better() {
        new - old
    } else {
        old - new
    };
    Some(gain / old * 100.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    /// `average`, `best` or `worst`.
    pub table: String,
    /// Learning rate (sweep) or round number / `overall` (cross validation).
    pub label: String,
    pub metric: Metric,
    pub old: f64,
    pub new: f64,
}

impl ReportRow {
    pub fn improvement_pct(&self) -> Option<f64> {
        improvement_pct(self.metric, self.old, self.new)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// One row per learning rate.
    Sweep,
    /// One row per cross-validation round plus an overall row, train and test side by side.
    Rounds,
}

impl Layout {
    fn key(self) -> &'static str {
        match self {
            Layout::Sweep => "sweep",
            Layout::Rounds => "rounds",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub experiment: String,
    pub layout: Layout,
    /// Run settings, written as `# key: value` lines.
    pub metadata: Vec<(String, String)>,
    pub rows: Vec<ReportRow>,
}

const CSV_HEADER: [&str; 6] = ["table", "label", "metric", "old", "new", "improvement_pct"];

impl ComparisonReport {
    pub fn tables(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.table.as_str()) {
                out.push(&r.table);
            }
        }
        out
    }

    pub fn rows_of<'a>(&'a self, table: &'a str) -> impl Iterator<Item = &'a ReportRow> + 'a {
        self.rows.iter().filter(move |r| r.table == table)
    }

    pub fn find(&self, table: &str, label: &str, metric: Metric) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.table == table && r.label == label && r.metric == metric)
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn to_csv(&self) -> Result<String, BenchError> {
        if self.rows.is_empty() {
            return Err(BenchError::Report("report has no rows".into()));
        }
        let mut out = String::new();
        let _ = writeln!(out, "# experiment: {}", self.experiment);
        let _ = writeln!(out, "# layout: {}", self.layout.key());
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k}: {v}");
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| BenchError::Report(e.to_string());
        w.write_record(CSV_HEADER).map_err(csv_err)?;
        for r in &self.rows {
            let imp = r
                .improvement_pct()
                .map(|v| v.to_string())
                .unwrap_or_default();
            w.write_record([
                r.table.as_str(),
                r.label.as_str(),
                r.metric.key(),
                &r.old.to_string(),
                &r.new.to_string(),
                &imp,
            ])
            .map_err(csv_err)?;
        }
        let body = w
            .into_inner()
            .map_err(|e| BenchError::Report(e.to_string()))?;
        out.push_str(&String::from_utf8(body).map_err(|e| BenchError::Report(e.to_string()))?);
        Ok(out)
    }

    /// Parses [`ComparisonReport::to_csv`] output. The improvement column must
    /// agree with the metric columns.
    pub fn from_csv(text: &str) -> Result<Self, BenchError> {
        let bad = |msg: String| BenchError::Report(msg);
        let mut experiment = None;
        let mut layout = None;
        let mut metadata = Vec::new();
        let mut body = String::new();
        for line in text.lines() {
            if let Some(meta) = line.strip_prefix("# ") {
                let (k, v) = meta
                    .split_once(": ")
                    .ok_or_else(|| bad(format!("bad metadata line `{line}`")))?;
                match k {
                    "experiment" => experiment = Some(v.to_string()),
                    "layout" => {
                        layout = Some(match v {
                            "sweep" => Layout::Sweep,
                            "rounds" => Layout::Rounds,
                            other => return Err(bad(format!("unknown layout `{other}`"))),
                        })
                    }
                    _ => metadata.push((k.to_string(), v.to_string())),
                }
            } else {
                body.push_str(line);
                body.push('\n');
            }
        }
        let mut reader = csv::Reader::from_reader(body.as_bytes());
        let header = reader.headers().map_err(|e| bad(e.to_string()))?;
        if header.iter().ne(CSV_HEADER) {
            return Err(bad("unexpected CSV header".into()));
        }
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let num = |k: usize| -> Result<f64, BenchError> {
                rec[k]
                    .parse()
                    .map_err(|_| bad(format!("row {}: bad number `{}`", i + 1, &rec[k])))
            };
            let metric = Metric::from_key(&rec[2])
                .ok_or_else(|| bad(format!("row {}: unknown metric `{}`", i + 1, &rec[2])))?;
            let row = ReportRow {
                table: rec[0].to_string(),
                label: rec[1].to_string(),
                metric,
                old: num(3)?,
                new: num(4)?,
            };
            let consistent = match (row.improvement_pct(), rec[5].is_empty()) {
                (None, true) => true,
                (Some(expected), false) => (num(5)? - expected).abs() <= 5e-3,
                _ => false,
            };
            if !consistent {
                return Err(bad(format!(
                    "row {}: improvement column disagrees with old/new",
                    i + 1
                )));
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(bad("report has no rows".into()));
        }
        Ok(Self {
            experiment: experiment.ok_or_else(|| bad("missing experiment".into()))?,
            layout: layout.ok_or_else(|| bad("missing layout".into()))?,
            metadata,
            rows,
        })
    }

    pub fn to_text(&self) -> Result<String, BenchError> {
        if self.rows.is_empty() {
            return Err(BenchError::Report("report has no rows".into()));
        }
        let mut out = String::new();
        let _ = writeln!(out, "Experiment: {}", self.experiment);
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "  {k}: {v}");
        }
        for table in self.tables() {
            out.push('\n');
            let (title, grid) = match self.layout {
                Layout::Sweep => self.sweep_table(table),
                Layout::Rounds => self.rounds_table(table),
            };
            let _ = writeln!(out, "{title}");
            out.push_str(&render_grid(&grid));
        }
        Ok(out)
    }

    fn sweep_table(&self, table: &str) -> (String, Vec<Vec<String>>) {
        let mut grid = vec![vec![
            "Learning Rate".to_string(),
            "Average Old".to_string(),
            "Average New".to_string(),
            "Improvement %".to_string(),
        ]];
        let mut metric = None;
        for r in self.rows_of(table) {
            metric.get_or_insert(r.metric);
            grid.push(vec![
                r.label.clone(),
                fmt_value(r.metric, r.old),
                fmt_value(r.metric, r.new),
                fmt_pct(r.improvement_pct()),
            ]);
        }
        let what = metric.map_or("", |m| describe(m));
        (format!("Comparison of {table} {what}"), grid)
    }

    fn rounds_table(&self, table: &str) -> (String, Vec<Vec<String>>) {
        let mut grid = vec![[
            "Round",
            "Old Train",
            "New Train",
            "Improvement%",
            "Old Test",
            "New Test",
            "Improvement%",
        ]
        .map(String::from)
        .to_vec()];
        let mut labels: Vec<&str> = Vec::new();
        for r in self.rows_of(table) {
            if !labels.contains(&r.label.as_str()) {
                labels.push(&r.label);
            }
        }
        let mut test_metric = None;
        for label in labels {
            let mut line = vec![display_label(label)];
            for want_train in [true, false] {
                match self
                    .rows_of(table)
                    .find(|r| r.label == label && r.metric.is_train() == want_train)
                {
                    Some(r) => {
                        if !want_train {
                            test_metric.get_or_insert(r.metric);
                        }
                        line.push(fmt_value(r.metric, r.old));
                        line.push(fmt_value(r.metric, r.new));
                        line.push(fmt_pct(r.improvement_pct()));
                    }
                    None => line.extend(["-", "-", "-"].map(String::from)),
                }
            }
            grid.push(line);
        }
        let what = test_metric.map_or("", |m| describe(m));
        (format!("Comparison of {table} {what}"), grid)
    }
}

fn describe(metric: Metric) -> &'static str {
    if metric.higher_is_better() {
        "classification accuracy (%)"
    } else {
        "mean squared error"
    }
}

fn display_label(label: &str) -> String {
    match label {
        "overall" => "Overall".to_string(),
        other => other.to_string(),
    }
}

fn fmt_value(metric: Metric, v: f64) -> String {
    if metric.higher_is_better() {
        format!("{v:.2}")
    } else {
        format!("{v:.6}")
    }
}

fn fmt_pct(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.2}"))
}

pub(crate) fn render_grid(grid: &[Vec<String>]) -> String {
    let cols = grid.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            grid.iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for (i, row) in grid.iter().enumerate() {
        let cells: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(s, w)| format!("{s:>w$}"))
            .collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
        if i == 0 {
            let total = widths.iter().sum::<usize>() + 2 * widths.len().saturating_sub(1);
            let _ = writeln!(out, "{}", "-".repeat(total));
        }
    }
    out
}

/// Surviving monomials in σ-notation with their index multisets.
pub fn selected_basis_summary(prune: &PruneResult) -> String {
    basis_summary(&prune.pruned_basis, Some(&prune.kept_indices))
}

pub fn basis_summary(basis: &MonomialBasis, positions: Option<&[usize]>) -> String {
    let mut grid = vec![vec!["q".to_string(), "term".to_string(), "Λ_q".to_string()]];
    if positions.is_some() {
        grid[0].push("complete-basis position".to_string());
    }
    for (q, term) in basis.terms().iter().enumerate() {
        let mut row = vec![(q + 1).to_string(), term.sigma_notation(), term.to_string()];
        if let Some(p) = positions {
            row.push((p[q] + 1).to_string());
        }
        grid.push(row);
    }
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} monomials in σ1..σ{}, order ≤ {}",
        basis.len(),
        basis.n_vars(),
        basis.order()
    );
    out.push_str(&render_grid(&grid));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use spsnn_core::basis::{enumerate_complete, Multiset};
    use spsnn_core::trainer::prune;

    fn sweep_report() -> ComparisonReport {
        ComparisonReport {
            experiment: "mayas".into(),
            layout: Layout::Sweep,
            metadata: vec![
                ("trials".into(), "20".into()),
                ("note".into(), "a, b: c".into()),
            ],
            rows: vec![
                ReportRow {
                    table: "average".into(),
                    label: "0.05".into(),
                    metric: Metric::TestMse,
                    old: 0.0039,
                    new: 0.0033,
                },
                ReportRow {
                    table: "average".into(),
                    label: "0.1".into(),
                    metric: Metric::TestMse,
                    old: 0.1 + 0.2,
                    new: 1.0 / 3.0,
                },
            ],
        }
    }

    fn rounds_report() -> ComparisonReport {
        let mut rows = Vec::new();
        for table in ["average", "best"] {
            for (label, base) in [("1", 70.0), ("overall", 75.17)] {
                rows.push(ReportRow {
                    table: table.into(),
                    label: label.into(),
                    metric: Metric::TrainAccuracy,
                    old: base + 5.0,
                    new: base + 10.0,
                });
                rows.push(ReportRow {
                    table: table.into(),
                    label: label.into(),
                    metric: Metric::TestAccuracy,
                    old: base,
                    new: 83.79,
                });
            }
        }
        ComparisonReport {
            experiment: "sonar".into(),
            layout: Layout::Rounds,
            metadata: vec![],
            rows,
        }
    }

    #[test]
    fn improvement_direction() {
        let mse = improvement_pct(Metric::TestMse, 0.0039, 0.0033).unwrap();
        assert!((mse - 15.38).abs() < 5e-3);
        let acc = improvement_pct(Metric::TestAccuracy, 75.17, 83.79).unwrap();
        assert!((acc - 11.467).abs() < 1e-3);
        assert!(improvement_pct(Metric::TestMse, 0.0, 1.0).is_none());
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        for report in [sweep_report(), rounds_report()] {
            let csv = report.to_csv().unwrap();
            let back = ComparisonReport::from_csv(&csv).unwrap();
            assert_eq!(back, report);
            assert_eq!(back.to_csv().unwrap(), csv);
        }
    }

    #[test]
    fn inconsistent_improvement_rejected() {
        let csv = sweep_report().to_csv().unwrap();
        let tampered = csv.replace(",0.0033,", ",0.0030,");
        assert!(ComparisonReport::from_csv(&tampered).is_err());
    }

    #[test]
    fn empty_report_rejected() {
        let mut r = sweep_report();
        r.rows.clear();
        assert!(r.to_csv().is_err());
        assert!(r.to_text().is_err());
    }

    #[test]
    fn rounds_header_order() {
        let text = rounds_report().to_text().unwrap();
        let header = text
            .lines()
            .find(|l| l.trim_start().starts_with("Round"))
            .unwrap();
        let cols: Vec<&str> = header
            .split("  ")
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .collect();
        assert_eq!(
            cols,
            [
                "Round",
                "Old Train",
                "New Train",
                "Improvement%",
                "Old Test",
                "New Test",
                "Improvement%"
            ]
        );
        assert!(text.contains("Overall"));
        assert!(text.contains("83.79"));
    }

    #[test]
    fn sweep_header_order() {
        let text = sweep_report().to_text().unwrap();
        assert!(text.contains("Learning Rate  Average Old  Average New  Improvement %"));
        assert!(text.contains("15.38"));
    }

    #[test]
    fn summary_renders_sigma_notation() {
        let basis = enumerate_complete(3, 3).unwrap();
        let w0: Vec<f64> = basis
            .terms()
            .iter()
            .map(|t| {
                if *t == Multiset::from_one_based(&[2, 3, 3]) {
                    5.0
                } else {
                    0.0
                }
            })
            .collect();
        let p = prune(&basis, &w0, 1, false);
        let s = selected_basis_summary(&p);
        assert!(s.contains("σ₂σ₃²"), "{s}");
        assert!(s.contains("{2,3,3}"), "{s}");

        let eight = prune(
            &basis,
            &(0..20).map(|i| i as f64).collect::<Vec<_>>(),
            8,
            true,
        );
        let s = selected_basis_summary(&eight);
        assert_eq!(s.lines().count(), 1 + 2 + 8);
        assert!(s.lines().any(|l| l.split_whitespace().nth(1) == Some("1")));
    }
}
