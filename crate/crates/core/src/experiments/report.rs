use std::path::{Path, PathBuf};

use serde_json::json;

use super::{pareto_front, selection_score, Direction, Metric, ParetoPoint, RunResult};
use crate::error::{Error, Result};
use crate::metrics::FairnessReport;

/// Paths written by [`emit_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReportFiles {
    pub results: PathBuf,
    pub summary: PathBuf,
    pub pareto_ind: PathBuf,
    pub pareto_con: PathBuf,
    pub pareto_3d: PathBuf,
    pub selection: PathBuf,
    pub shap_importance: Option<PathBuf>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

struct Csv {
    path: PathBuf,
    writer: csv::Writer<std::fs::File>,
}

impl Csv {
    fn create(path: PathBuf) -> Result<Self> {
        let writer = csv::Writer::from_path(&path).map_err(|e| Error::csv(&path, e))?;
        Ok(Self { path, writer })
    }

    fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).map_err(|e| Error::csv(&self.path, e))
    }

    fn finish(mut self) -> Result<PathBuf> {
        self.writer.flush().map_err(|e| Error::io(&self.path, e))?;
        Ok(self.path)
    }
}

const RESULT_METRICS: [&str; 10] = ["acc", "bacc", "ind", "sep", "suf", "con", "lip", "ent", "ent_within", "ent_between"];

fn report_fields(r: &FairnessReport) -> Vec<String> {
    vec![
        r.accuracy.to_string(),
        r.balanced_accuracy.to_string(),
        r.ind.to_string(),
        fmt_opt(r.sep),
        fmt_opt(r.suf),
        r.con.to_string(),
        fmt_opt(r.lip),
        fmt_opt(r.ent),
        fmt_opt(r.ent_within),
        fmt_opt(r.ent_between),
    ]
}

fn write_results(results: &[RunResult], path: PathBuf) -> Result<PathBuf> {
    let mut w = Csv::create(path)?;
    let mut header = vec!["id", "model", "status", "part", "fold", "n"];
    header.extend(RESULT_METRICS);
    w.row(header)?;
    for r in results {
        let lead = |part: &str, fold: String, n: String| {
            vec![
                r.config.id.to_string(),
                r.config.label(),
                r.status.to_string(),
                part.to_string(),
                fold,
                n,
            ]
        };
        if !r.is_ok() {
            let mut row = lead("", String::new(), String::new());
            row.extend(std::iter::repeat_n(String::new(), RESULT_METRICS.len()));
            w.row(row)?;
            continue;
        }
        for (k, f) in r.folds.iter().enumerate() {
            let mut row = lead("fold", k.to_string(), f.n.to_string());
            row.extend(report_fields(f));
            w.row(row)?;
        }
        if let Some(t) = &r.test {
            let mut row = lead("test", String::new(), t.n.to_string());
            row.extend(report_fields(t));
            w.row(row)?;
        }
    }
    w.finish()
}

const SUMMARY_METRICS: [Metric; 7] = [
    Metric::Acc,
    Metric::Ind,
    Metric::Suf,
    Metric::Sep,
    Metric::Con,
    Metric::Lip,
    Metric::Ent,
];

fn write_summary(results: &[RunResult], path: PathBuf) -> Result<PathBuf> {
    let mut w = Csv::create(path)?;
    let mut header = vec!["model".to_string()];
    for m in SUMMARY_METRICS {
        header.push(format!("{}_mean", m.name()));
        header.push(format!("{}_std", m.name()));
    }
    w.row(header)?;
    for r in results {
        let mut row = vec![r.config.label()];
        for m in SUMMARY_METRICS {
            row.push(fmt_opt(r.fold_mean(m)));
            row.push(fmt_opt(r.fold_std(m)));
        }
        w.row(row)?;
    }
    w.finish()
}

fn write_front(results: &[RunResult], objectives: &[(Metric, Direction)], path: PathBuf) -> Result<PathBuf> {
    let front: Vec<ParetoPoint> = pareto_front(results, objectives)?;
    let mut w = Csv::create(path)?;
    let mut header = vec!["id".to_string(), "model".to_string()];
    header.extend(objectives.iter().map(|(m, _)| m.name().to_string()));
    w.row(header)?;
    for p in front {
        let label = results
            .iter()
            .find(|r| r.config.id == p.id)
            .map(|r| r.config.label())
            .unwrap_or_default();
        let mut row = vec![p.id.to_string(), label];
        row.extend(p.objectives.iter().map(|v| v.to_string()));
        w.row(row)?;
    }
    w.finish()
}

fn write_json(value: &serde_json::Value, path: PathBuf) -> Result<PathBuf> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Serde {
        path: path.clone(),
        msg: e.to_string(),
    })?;
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Writes the result tables into `out_dir`.
///
/// `selection` is the chosen config id (if any); `importance` holds
/// `(feature, mean |shap|, normalised)` for the chosen config. Wall times are
/// left out so repeated runs produce identical files.
pub fn emit_report(
    results: &[RunResult],
    selection: Option<usize>,
    importance: Option<&[(String, f64, f64)]>,
    out_dir: impl AsRef<Path>,
) -> Result<ReportFiles> {
    let dir = out_dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let acc = (Metric::Acc, Direction::Maximize);
    let ind = (Metric::Ind, Direction::Minimize);
    let con = (Metric::Con, Direction::Minimize);

    let selected = selection.and_then(|id| results.iter().find(|r| r.config.id == id));
    let selection_json = match selected {
        Some(r) => json!({
            "selected_id": r.config.id,
            "model": r.config.label(),
            "config": r.config,
            "score": selection_score(r),
            "acc_mean": r.fold_mean(Metric::Acc),
            "ind_mean": r.fold_mean(Metric::Ind),
            "con_mean": r.fold_mean(Metric::Con),
            "test": r.test,
        }),
        None => json!({ "selected_id": null, "reason": "no successful run" }),
    };

    let shap_importance = match importance {
        Some(rows) => {
            let mut w = Csv::create(dir.join("shap_importance.csv"))?;
            w.row(["feature", "importance", "normalized"])?;
            for (f, raw, norm) in rows {
                w.row([f.clone(), raw.to_string(), norm.to_string()])?;
            }
            Some(w.finish()?)
        }
        None => None,
    };

    Ok(ReportFiles {
        results: write_results(results, dir.join("results.csv"))?,
        summary: write_summary(results, dir.join("summary.csv"))?,
        pareto_ind: write_front(results, &[acc, ind], dir.join("pareto2d_ind.csv"))?,
        pareto_con: write_front(results, &[acc, con], dir.join("pareto2d_con.csv"))?,
        pareto_3d: write_front(results, &[acc, ind, con], dir.join("pareto3d.csv"))?,
        selection: write_json(&selection_json, dir.join("selection.json"))?,
        shap_importance,
    })
}
