use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::grid::ModelKind;
use super::table::{CellRecord, ResultTable};
use crate::corpus::TaskId;
use crate::{Error, Result};

/// Test accuracy per task (rows) and model (columns), in percent.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub models: Vec<ModelKind>,
    pub rows: Vec<(TaskId, Vec<Option<f64>>)>,
    pub warnings: Vec<String>,
}

/// Percentage rounded to the one decimal shown in reports.
fn percent(acc: f64) -> f64 {
    (acc * 1000.0).round() / 10.0
}

impl Comparison {
    /// Columns holding the row maximum; ties are all marked.
    pub fn best(&self, row: usize) -> Vec<ModelKind> {
        let values = &self.rows[row].1;
        let max = values.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
        self.models
            .iter()
            .zip(values)
            .filter(|(_, v)| v.is_some_and(|v| v == max))
            .map(|(m, _)| *m)
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut cols: Vec<String> = vec!["Task".into()];
        cols.extend(self.models.iter().map(|m| m.to_string()));
        let mut cells: Vec<Vec<String>> = vec![cols];
        for (i, (task, values)) in self.rows.iter().enumerate() {
            let best = self.best(i);
            let mut line = vec![task.to_string()];
            for (m, v) in self.models.iter().zip(values) {
                line.push(match v {
                    Some(v) if best.contains(m) => format!("{v:.1}*"),
                    Some(v) => format!("{v:.1}"),
                    None => String::new(),
                });
            }
            cells.push(line);
        }
        let widths: Vec<usize> = (0..cells[0].len())
            .map(|c| cells.iter().map(|r| r[c].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::from("Test accuracy (%); * marks the best model per task\n");
        for r in &cells {
            let line: Vec<String> = r.iter().zip(&widths).map(|(s, &w)| format!("{s:<w$}")).collect();
            let _ = writeln!(out, "{}", line.join("  ").trim_end());
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("task");
        for m in &self.models {
            let _ = write!(out, ",{m}");
        }
        out.push_str(",best\n");
        for (i, (task, values)) in self.rows.iter().enumerate() {
            let _ = write!(out, "{}", task.get());
            for v in values {
                match v {
                    Some(v) => {
                        let _ = write!(out, ",{v:.1}");
                    }
                    None => out.push(','),
                }
            }
            let best: Vec<String> = self.best(i).iter().map(|m| m.to_string()).collect();
            let _ = writeln!(out, ",{}", best.join(";"));
        }
        out
    }

    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        for (name, body) in [("comparison.txt", self.to_text()), ("comparison.csv", self.to_csv())] {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }
}

/// Selected test accuracies laid out per task and model. A model with no
/// selected score for a task is left blank and reported in `warnings`.
pub fn emit_comparison(table: &ResultTable, models: &[ModelKind]) -> Comparison {
    let mut warnings = Vec::new();
    let rows = table
        .tasks()
        .into_iter()
        .map(|task| {
            let values = models
                .iter()
                .map(|&m| {
                    let v = table.selected(task, m).and_then(|r| r.test_accuracy).map(percent);
                    if v.is_none() {
                        let w = format!("no test score for {m} on {task}; column left blank");
                        log::warn!("{w}");
                        warnings.push(w);
                    }
                    v
                })
                .collect();
            (task, values)
        })
        .collect();
    Comparison {
        models: models.to_vec(),
        rows,
        warnings,
    }
}

/// Hyperparameter axes a trend can be drawn against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrendAxis {
    CorpusSize,
    Dim,
    TrainSize,
}

impl TrendAxis {
    pub const ALL: [TrendAxis; 3] = [TrendAxis::CorpusSize, TrendAxis::Dim, TrendAxis::TrainSize];

    pub fn name(self) -> &'static str {
        match self {
            TrendAxis::CorpusSize => "w2v_corpus_size",
            TrendAxis::Dim => "w2v_dim",
            TrendAxis::TrainSize => "train_size",
        }
    }

    fn applies_to(self, model: ModelKind) -> bool {
        self == TrendAxis::TrainSize || model.is_neural()
    }

    fn value(self, r: &CellRecord) -> Option<usize> {
        match self {
            TrendAxis::CorpusSize => r.w2v_corpus_size,
            TrendAxis::Dim => r.w2v_dim,
            TrendAxis::TrainSize => Some(r.train_size),
        }
    }
}

/// Mean dev accuracy per axis value, averaged over every other axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Trend {
    pub model: ModelKind,
    pub axis: TrendAxis,
    /// `(task, axis value, mean dev accuracy, cells averaged)`.
    pub points: Vec<(TaskId, usize, f64, usize)>,
}

impl Trend {
    pub fn to_csv(&self) -> String {
        let mut out = format!("task,{},mean_dev_accuracy,cells\n", self.axis.name());
        for (t, x, y, n) in &self.points {
            let _ = writeln!(out, "{},{x},{y},{n}", t.get());
        }
        out
    }

    /// Line chart with one series per task.
    pub fn to_svg(&self) -> String {
        let (w, h, pad) = (480.0, 320.0, 48.0);
        let xs: Vec<f64> = self.points.iter().map(|p| p.1 as f64).collect();
        let ys: Vec<f64> = self.points.iter().map(|p| p.2).collect();
        let (x0, x1) = (xs.iter().copied().fold(f64::INFINITY, f64::min), xs.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        let (mut y0, mut y1) = (ys.iter().copied().fold(f64::INFINITY, f64::min), ys.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        if y1 - y0 < 1e-9 {
            y0 -= 0.01;
            y1 += 0.01;
        }
        let sx = |x: f64| pad + (x - x0) / (x1 - x0).max(1e-12) * (w - 2.0 * pad);
        let sy = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
        let mut svg = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
             <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
             <text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">{} dev accuracy vs {}</text>\n\
             <line x1=\"{pad}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n\
             <line x1=\"{pad}\" y1=\"{pad}\" x2=\"{pad}\" y2=\"{}\" stroke=\"black\"/>\n\
             <text x=\"4\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">{y1:.3}</text>\n\
             <text x=\"4\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">{y0:.3}</text>\n",
            w / 2.0,
            self.model,
            self.axis.name(),
            h - pad,
            w - pad,
            h - pad,
            h - pad,
            pad + 4.0,
            h - pad,
        );
        let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];
        let mut by_task: BTreeMap<TaskId, Vec<(f64, f64)>> = BTreeMap::new();
        for (t, x, y, _) in &self.points {
            by_task.entry(*t).or_default().push((sx(*x as f64), sy(*y)));
        }
        for (i, (task, pts)) in by_task.iter().enumerate() {
            let color = colors[i % colors.len()];
            let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
            let _ = writeln!(
                svg,
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"><title>{task}</title></polyline>",
                path.join(" ")
            );
            for (x, y) in pts {
                let _ = writeln!(svg, "<circle cx=\"{x:.1}\" cy=\"{y:.1}\" r=\"3\" fill=\"{color}\"/>");
            }
        }
        for (x, label) in xs.iter().zip(self.points.iter().map(|p| p.1)) {
            let _ = writeln!(
                svg,
                "<text x=\"{:.1}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">{label}</text>",
                sx(*x),
                h - pad + 16.0
            );
        }
        svg.push_str("</svg>\n");
        svg
    }
}

/// Trend files written plus notices for axes that were skipped.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrendReport {
    pub trends: Vec<Trend>,
    pub files: Vec<PathBuf>,
    pub notices: Vec<String>,
}

/// Averages successful cells per (task, axis value) for every model and
/// axis that varies in `table`.
pub fn compute_trends(table: &ResultTable) -> (Vec<Trend>, Vec<String>) {
    let mut trends = Vec::new();
    let mut notices = Vec::new();
    for model in table.models() {
        for axis in TrendAxis::ALL {
            let mut sums: BTreeMap<(TaskId, usize), (f64, usize)> = BTreeMap::new();
            for r in table.rows.iter().filter(|r| r.model == model && r.is_ok()) {
                if let (Some(x), Some(dev)) = (axis.value(r), r.dev_accuracy) {
                    let e = sums.entry((r.task, x)).or_insert((0.0, 0));
                    e.0 += dev;
                    e.1 += 1;
                }
            }
            let mut values: Vec<usize> = sums.keys().map(|k| k.1).collect();
            values.sort_unstable();
            values.dedup();
            if values.len() < 2 {
                if axis.applies_to(model) {
                    notices.push(format!(
                        "skipping {} trend for {model}: the axis has {} value(s)",
                        axis.name(),
                        values.len()
                    ));
                }
                continue;
            }
            let points = sums.into_iter().map(|((t, x), (s, n))| (t, x, s / n as f64, n)).collect();
            trends.push(Trend { model, axis, points });
        }
    }
    (trends, notices)
}

/// Writes `trends/<model>-<axis>.csv` (and `.svg` when asked) for every
/// non-degenerate trend; degenerate axes are logged and skipped.
pub fn emit_trends(table: &ResultTable, dir: impl AsRef<Path>, svg: bool) -> Result<TrendReport> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (trends, notices) = compute_trends(table);
    for n in &notices {
        log::info!("{n}");
    }
    let mut files = Vec::new();
    for t in &trends {
        let stem = format!("{}-{}", t.model.name().to_lowercase(), t.axis.name());
        let p = dir.join(format!("{stem}.csv"));
        std::fs::write(&p, t.to_csv()).map_err(|e| Error::io(&p, e))?;
        files.push(p);
        if svg {
            let p = dir.join(format!("{stem}.svg"));
            std::fs::write(&p, t.to_svg()).map_err(|e| Error::io(&p, e))?;
            files.push(p);
        }
    }
    Ok(TrendReport { trends, files, notices })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::table::tests::record;

    fn with_test(mut r: CellRecord, acc: f64) -> CellRecord {
        r.selected = true;
        r.test_accuracy = Some(acc);
        r
    }

    #[test]
    fn table5_row_marks_both_tied_models() {
        let table = ResultTable::new(vec![
            with_test(record(0, 1, ModelKind::BowSvm, Some(0.8)), 0.855),
            with_test(record(1, 1, ModelKind::Cnn, Some(0.8)), 0.88),
            with_test(record(2, 1, ModelKind::Nam, Some(0.8)), 0.88),
        ]);
        let c = emit_comparison(&table, &[ModelKind::BowSvm, ModelKind::Cnn, ModelKind::Nam]);
        assert_eq!(c.rows[0].1, vec![Some(85.5), Some(88.0), Some(88.0)]);
        assert_eq!(c.best(0), vec![ModelKind::Cnn, ModelKind::Nam]);
        assert!(c.warnings.is_empty());
        let text = c.to_text();
        assert!(text.contains("85.5 "));
        assert!(text.contains("88.0*  88.0*"));
        assert_eq!(c.to_csv(), "task,BOW-SVM,CNN,NAM,best\n1,85.5,88.0,88.0,CNN;NAM\n");
    }

    #[test]
    fn single_cell_and_missing_column() {
        let table = ResultTable::new(vec![with_test(record(0, 3, ModelKind::Cnn, Some(0.8)), 0.9)]);
        let c = emit_comparison(&table, &[ModelKind::Cnn]);
        assert_eq!(c.rows.len(), 1);
        assert_eq!(c.to_csv(), "task,CNN,best\n3,90.0,CNN\n");
        let c = emit_comparison(&table, &[ModelKind::BowLr, ModelKind::Cnn]);
        assert_eq!(c.rows[0].1, vec![None, Some(90.0)]);
        assert_eq!(c.warnings.len(), 1);
        assert!(c.to_csv().contains("3,,90.0,CNN"));
    }

    fn neural(index: usize, size: usize, dim: usize, dev: f64) -> CellRecord {
        let mut r = record(index, 1, ModelKind::Cnn, Some(dev));
        r.w2v_corpus_size = Some(size);
        r.w2v_dim = Some(dim);
        r
    }

    #[test]
    fn trends_average_over_other_axes() {
        let table = ResultTable::new(vec![
            neural(0, 20_000, 50, 0.8),
            neural(1, 20_000, 100, 0.9),
            neural(2, 40_000, 50, 0.86),
            neural(3, 40_000, 100, 0.89),
        ]);
        let (trends, notices) = compute_trends(&table);
        let size = trends.iter().find(|t| t.axis == TrendAxis::CorpusSize).unwrap();
        assert_eq!(size.points.len(), 2);
        assert!((size.points[0].2 - 0.85).abs() < 1e-12);
        assert!((size.points[1].2 - 0.875).abs() < 1e-12);
        assert!(size.points[1].2 > size.points[0].2);
        assert!(trends.iter().any(|t| t.axis == TrendAxis::Dim));
        // Train size has a single value.
        assert_eq!(notices.len(), 1);
        assert!(notices[0].contains("train_size"));
    }

    #[test]
    fn degenerate_axes_write_no_files() {
        let table = ResultTable::new(vec![neural(0, 20_000, 50, 0.8), neural(1, 20_000, 50, 0.9)]);
        let dir = tempfile::tempdir().unwrap();
        let rep = emit_trends(&table, dir.path(), true).unwrap();
        assert!(rep.files.is_empty());
        assert_eq!(rep.notices.len(), 3);
        let table = ResultTable::new(vec![neural(0, 20_000, 50, 0.84), neural(1, 40_000, 50, 0.875)]);
        let rep = emit_trends(&table, dir.path(), true).unwrap();
        assert_eq!(rep.files.len(), 2);
        let csv = std::fs::read_to_string(&rep.files[0]).unwrap();
        assert_eq!(csv, "task,w2v_corpus_size,mean_dev_accuracy,cells\n1,20000,0.84,1\n1,40000,0.875,1\n");
        let svg = std::fs::read_to_string(&rep.files[1]).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }
}
