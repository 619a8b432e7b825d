use std::fs;
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{AblationMode, DataSource, ExperimentConfig, Method};
use super::metrics::{
    summarize, write_metrics_csv, MetricsRecord, RecordStatus, RunMeta, RunSummary,
};
use crate::data::{
    combine_sources, generate_synthetic, load_dataset_dir, make_folds, normalize_dataset,
    BatchSampler, DomainDataset, DomainId, TransferTask,
};
use crate::error::{Error, Result};
use crate::losses::KernelSpec;
use crate::model::{MsMdaModel, StepOutput};

/// Loads the configured domains without any normalization.
pub fn load_domains(source: &DataSource) -> Result<Vec<DomainDataset>> {
    match source {
        DataSource::Dir { path } => load_dataset_dir(path),
        DataSource::Synth(cfg) => generate_synthetic(cfg),
    }
}

/// Builds the folds for `config` and normalizes them for its method.
///
/// MS-MDA normalizes each domain with its own statistics. The concatenating
/// baseline merges the sources into one domain under the configured order,
/// and normalizes the target on its own.
pub fn prepare_tasks(
    config: &ExperimentConfig,
    domains: &[DomainDataset],
) -> Result<Vec<TransferTask>> {
    let folds = make_folds(domains, config.scenario, config.loso)?;
    let kind = config.normalization.kind;
    folds
        .into_iter()
        .map(|task| {
            let target = normalize_dataset(&task.target, kind);
            let sources = match config.method {
                Method::MsMda => task
                    .sources
                    .iter()
                    .map(|s| normalize_dataset(s, kind))
                    .collect(),
                Method::SourceCombine => {
                    let mut merged = combine_sources(&task.sources, config.normalization)?;
                    merged.domain_id = DomainId::COMBINED;
                    vec![merged]
                }
            };
            let task = TransferTask {
                sources,
                target,
                ..task
            };
            task.validate()?;
            Ok(task)
        })
        .collect()
}

/// Seeds for one (seed, fold) job: model init and batch sampling.
pub fn fold_seeds(seed: u64, fold_index: usize) -> (u64, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fold_index as u64);
    (rng.next_u64(), rng.next_u64())
}

#[derive(Debug)]
pub struct FoldResult {
    pub records: Vec<MetricsRecord>,
    pub model: MsMdaModel,
}

fn accuracy(pred: &[usize], labels: &[usize]) -> f64 {
    let hits = pred.iter().zip(labels).filter(|(a, b)| a == b).count();
    hits as f64 / labels.len().max(1) as f64
}

/// Trains one model on one fold, evaluating on the whole target after every epoch.
pub fn train_fold(
    config: &ExperimentConfig,
    task: &TransferTask,
    seed: u64,
    fold_index: usize,
) -> Result<FoldResult> {
    let (init_seed, sample_seed) = fold_seeds(seed, fold_index);
    let model_cfg = config.model.instantiate(
        task.feature_dim(),
        task.num_classes(),
        task.num_sources(),
        init_seed,
    );
    let mut model = MsMdaModel::new(model_cfg)?;
    let train = &config.train;
    let adam = train.adam();
    let largest = task.sources.iter().map(|s| s.len()).max().unwrap_or(1);
    let iters = train.iterations_for(largest);
    let mut sampler = BatchSampler::new(task, train.batch_size, iters, sample_seed);
    let mut records = Vec::with_capacity(train.epochs);

    for epoch in 0..train.epochs {
        let weights = train.weights_for_epoch(epoch)?;
        let mut sums = [0.0f64; 5];
        let mut diverged = false;
        for _ in 0..iters {
            let batch = sampler.next_batch(task)?;
            let out: StepOutput = match model.train_step(
                &batch.sources,
                &batch.target,
                weights,
                &train.kernel,
                &adam,
            ) {
                Ok(o) => o,
                Err(Error::NonFinite(msg)) => {
                    log::warn!("{} seed {seed} epoch {epoch}: {msg}", task.fold_id);
                    diverged = true;
                    break;
                }
                Err(e) => return Err(e),
            };
            let b = &out.breakdown;
            sums[0] += b.cls;
            sums[1] += b.mmd;
            sums[2] += b.disc;
            sums[3] += b.total;
            sums[4] += out.source_accuracy;
            if !b.total.is_finite() {
                diverged = true;
                break;
            }
        }
        if diverged {
            records.push(MetricsRecord {
                seed,
                fold_id: task.fold_id.clone(),
                epoch,
                status: RecordStatus::Diverged,
                cls: f64::NAN,
                mmd: f64::NAN,
                disc: f64::NAN,
                total: f64::NAN,
                alpha: weights.alpha,
                beta: weights.beta,
                mean_branch_mmd: f64::NAN,
                source_acc: f64::NAN,
                target_acc: f64::NAN,
                branch_acc: Vec::new(),
            });
            break;
        }
        let n = iters as f64;
        let pred = model.predict(&task.target.features)?;
        let branch_acc: Vec<f64> = pred
            .per_branch_probs
            .iter()
            .map(|p| accuracy(&crate::model::argmax_rows(p), &task.target.labels))
            .collect();
        records.push(MetricsRecord {
            seed,
            fold_id: task.fold_id.clone(),
            epoch,
            status: RecordStatus::Ok,
            cls: sums[0] / n,
            mmd: sums[1] / n,
            disc: sums[2] / n,
            total: sums[3] / n,
            alpha: weights.alpha,
            beta: weights.beta,
            mean_branch_mmd: mean_branch_mmd(&model, task, &train.kernel)?,
            source_acc: sums[4] / n,
            target_acc: accuracy(&pred.labels, &task.target.labels),
            branch_acc,
        });
    }
    Ok(FoldResult { records, model })
}

/// Mean over branches of the MMD between each branch's source
/// features and the target features, on (at most) the first 256 rows of each.
/// Uses the training kernel, independent of the loss weights.
fn mean_branch_mmd(model: &MsMdaModel, task: &TransferTask, kernel: &KernelSpec) -> Result<f64> {
    const ROWS: usize = 256;
    let head = |d: &DomainDataset| d.features.slice_rows(0, d.len().min(ROWS));
    let target = head(&task.target)?;
    let mut total = 0.0;
    for (b, source) in task.sources.iter().enumerate() {
        let fs = model.extract_branch_features(&head(source)?, b)?;
        let ft = model.extract_branch_features(&target, b)?;
        total += crate::losses::mmd_squared(&fs, &ft, kernel)?.value;
    }
    Ok(total / task.sources.len() as f64)
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub records: Vec<MetricsRecord>,
    pub summary: RunSummary,
    pub models: Vec<(u64, String, MsMdaModel)>,
}

fn meta(config: &ExperimentConfig) -> RunMeta {
    RunMeta {
        method: config.method,
        scenario: config.scenario,
        ablation: config.ablation,
    }
}

/// Runs every (seed, fold) job, in parallel, and writes the outputs when an
/// output directory is configured. Results are ordered by seed then fold
/// regardless of scheduling.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    config.validate()?;
    let domains = load_domains(&config.data)?;
    run_experiment_on(config, &domains)
}

pub fn run_experiment_on(
    config: &ExperimentConfig,
    domains: &[DomainDataset],
) -> Result<ExperimentOutcome> {
    config.validate()?;
    let tasks = prepare_tasks(config, domains)?;
    let jobs: Vec<(u64, usize)> = config
        .seeds
        .iter()
        .flat_map(|&s| (0..tasks.len()).map(move |f| (s, f)))
        .collect();
    let results: Vec<Result<FoldResult>> = jobs
        .par_iter()
        .map(|&(seed, f)| train_fold(config, &tasks[f], seed, f))
        .collect();

    let mut records = Vec::new();
    let mut models = Vec::new();
    for ((seed, f), r) in jobs.iter().zip(results) {
        let r = r?;
        records.extend(r.records);
        models.push((*seed, tasks[*f].fold_id.clone(), r.model));
    }
    let summary = summarize(meta(config), &records);
    if let Some(dir) = &config.output_dir {
        write_outputs(dir, config, &records, &summary, &models)?;
    }
    Ok(ExperimentOutcome {
        records,
        summary,
        models,
    })
}

fn write_outputs(
    dir: &Path,
    config: &ExperimentConfig,
    records: &[MetricsRecord],
    summary: &RunSummary,
    models: &[(u64, String, MsMdaModel)],
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_json(&dir.join("config.json"), config)?;
    write_metrics_csv(dir.join("metrics.csv"), records)?;
    write_json(&dir.join("summary.json"), summary)?;
    if config.save_checkpoints {
        let ckpt = dir.join("checkpoints");
        fs::create_dir_all(&ckpt).map_err(|e| Error::io(&ckpt, e))?;
        for (seed, fold, model) in models {
            model.save(ckpt.join(checkpoint_name(*seed, fold)))?;
        }
    }
    Ok(())
}

/// `seed3_cross-subject_session1.ckpt` for fold `cross-subject/session1`.
pub fn checkpoint_name(seed: u64, fold_id: &str) -> String {
    format!("seed{seed}_{}.ckpt", fold_id.replace('/', "_"))
}

pub(crate) fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// The concatenated-source baseline under otherwise identical settings.
pub fn run_baseline_source_combine(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let mut cfg = config.clone();
    cfg.method = Method::SourceCombine;
    run_experiment(&cfg)
}

pub fn run_ablation(config: &ExperimentConfig, mode: AblationMode) -> Result<ExperimentOutcome> {
    run_experiment(&config.clone().with_ablation(mode))
}
