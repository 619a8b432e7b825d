//! Per-epoch records, their CSV form, and the run summary derived from them.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::{AblationMode, Method};
use crate::data::Scenario;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    Ok,
    /// Training hit a non-finite loss in this epoch and the fold was stopped.
    Diverged,
}

impl fmt::Display for RecordStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RecordStatus::Ok => "ok",
            RecordStatus::Diverged => "diverged",
        })
    }
}

/// One (seed, fold, epoch). Loss terms are means over the epoch's iterations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub seed: u64,
    pub fold_id: String,
    /// 0-based.
    pub epoch: usize,
    pub status: RecordStatus,
    pub cls: f64,
    pub mmd: f64,
    pub disc: f64,
    pub total: f64,
    pub alpha: f64,
    pub beta: f64,
    pub mean_branch_mmd: f64,
    pub source_acc: f64,
    pub target_acc: f64,
    pub branch_acc: Vec<f64>,
}

const HEADER: [&str; 14] = [
    "seed",
    "fold_id",
    "epoch",
    "status",
    "cls",
    "mmd",
    "disc",
    "total",
    "alpha",
    "beta",
    "mean_branch_mmd",
    "source_acc",
    "target_acc",
    "branch_acc",
];

/// Floats are written with Rust's shortest round-trip formatting, so reading
/// the file back reproduces every value exactly.
pub fn write_metrics_csv(path: impl AsRef<Path>, records: &[MetricsRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(HEADER).map_err(|e| csv_err(path, e))?;
    for r in records {
        let branch = r
            .branch_acc
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(";");
        w.write_record([
            r.seed.to_string(),
            r.fold_id.clone(),
            r.epoch.to_string(),
            r.status.to_string(),
            r.cls.to_string(),
            r.mmd.to_string(),
            r.disc.to_string(),
            r.total.to_string(),
            r.alpha.to_string(),
            r.beta.to_string(),
            r.mean_branch_mmd.to_string(),
            r.source_acc.to_string(),
            r.target_acc.to_string(),
            branch,
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e.to_string()))
}

pub fn read_metrics_csv(path: impl AsRef<Path>) -> Result<Vec<MetricsRecord>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        if rec.len() != HEADER.len() {
            return Err(bad(format!("expected {} fields", HEADER.len())));
        }
        fn num<T: FromStr>(s: &str, col: &str, bad: &dyn Fn(String) -> Error) -> Result<T> {
            s.parse()
                .map_err(|_| bad(format!("{col}: cannot parse {s:?}")))
        }
        let status = match &rec[3] {
            "ok" => RecordStatus::Ok,
            "diverged" => RecordStatus::Diverged,
            other => return Err(bad(format!("unknown status {other:?}"))),
        };
        let branch_acc = if rec[13].is_empty() {
            Vec::new()
        } else {
            rec[13]
                .split(';')
                .map(|s| num(s, "branch_acc", &bad))
                .collect::<Result<Vec<f64>>>()?
        };
        out.push(MetricsRecord {
            seed: num(&rec[0], "seed", &bad)?,
            fold_id: rec[1].to_string(),
            epoch: num(&rec[2], "epoch", &bad)?,
            status,
            cls: num(&rec[4], "cls", &bad)?,
            mmd: num(&rec[5], "mmd", &bad)?,
            disc: num(&rec[6], "disc", &bad)?,
            total: num(&rec[7], "total", &bad)?,
            alpha: num(&rec[8], "alpha", &bad)?,
            beta: num(&rec[9], "beta", &bad)?,
            mean_branch_mmd: num(&rec[10], "mean_branch_mmd", &bad)?,
            source_acc: num(&rec[11], "source_acc", &bad)?,
            target_acc: num(&rec[12], "target_acc", &bad)?,
            branch_acc,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub seed: u64,
    pub fold_id: String,
    pub epochs: usize,
    pub final_acc: f64,
    pub best_acc: f64,
    pub best_epoch: usize,
    pub first_mean_branch_mmd: f64,
    pub final_mean_branch_mmd: f64,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    /// Mean and population std of final-epoch target accuracy over folds.
    pub mean: f64,
    pub std: f64,
    pub best_mean: f64,
    pub folds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub method: Method,
    pub scenario: Scenario,
    pub ablation: Option<AblationMode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub meta: RunMeta,
    /// Mean over seeds of the per-seed fold mean.
    pub mean: f64,
    /// Mean over seeds of the per-seed fold std (the usual "± std over folds").
    pub fold_std: f64,
    /// Population std of the per-seed means.
    pub seed_std: f64,
    pub seeds: Vec<SeedSummary>,
    pub folds: Vec<FoldSummary>,
    pub diverged_folds: Vec<String>,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Builds the summary purely from records, in record order.
pub fn summarize(meta: RunMeta, records: &[MetricsRecord]) -> RunSummary {
    let mut folds: Vec<FoldSummary> = Vec::new();
    for r in records {
        let same = folds
            .last()
            .is_some_and(|f| f.seed == r.seed && f.fold_id == r.fold_id);
        if !same {
            folds.push(FoldSummary {
                seed: r.seed,
                fold_id: r.fold_id.clone(),
                epochs: 0,
                final_acc: r.target_acc,
                best_acc: r.target_acc,
                best_epoch: r.epoch,
                first_mean_branch_mmd: r.mean_branch_mmd,
                final_mean_branch_mmd: r.mean_branch_mmd,
                diverged: false,
            });
        }
        let f = folds.last_mut().expect("pushed above");
        f.epochs += 1;
        if r.status == RecordStatus::Diverged {
            f.diverged = true;
            continue;
        }
        f.final_acc = r.target_acc;
        f.final_mean_branch_mmd = r.mean_branch_mmd;
        if r.target_acc > f.best_acc {
            f.best_acc = r.target_acc;
            f.best_epoch = r.epoch;
        }
    }

    let mut seed_order: Vec<u64> = Vec::new();
    for f in &folds {
        if !seed_order.contains(&f.seed) {
            seed_order.push(f.seed);
        }
    }
    let seeds: Vec<SeedSummary> = seed_order
        .iter()
        .map(|&s| {
            let ok: Vec<&FoldSummary> = folds
                .iter()
                .filter(|f| f.seed == s && !f.diverged)
                .collect();
            let finals: Vec<f64> = ok.iter().map(|f| f.final_acc).collect();
            let bests: Vec<f64> = ok.iter().map(|f| f.best_acc).collect();
            let (mean, std) = mean_std(&finals);
            SeedSummary {
                seed: s,
                mean,
                std,
                best_mean: mean_std(&bests).0,
                folds: ok.len(),
            }
        })
        .collect();
    let means: Vec<f64> = seeds.iter().map(|s| s.mean).collect();
    let stds: Vec<f64> = seeds.iter().map(|s| s.std).collect();
    let (mean, seed_std) = mean_std(&means);
    RunSummary {
        meta,
        mean,
        fold_std: mean_std(&stds).0,
        seed_std,
        diverged_folds: folds
            .iter()
            .filter(|f| f.diverged)
            .map(|f| format!("seed{}:{}", f.seed, f.fold_id))
            .collect(),
        seeds,
        folds,
    }
}
