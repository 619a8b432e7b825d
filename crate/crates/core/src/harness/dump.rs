use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::DomainDataset;
use crate::error::{Error, Result};
use crate::model::MsMdaModel;

pub const DEFAULT_DUMP_ROWS: usize = 100;

/// Writes `branch{b}.csv` for every branch: the branch-specific features of
/// up to `rows_per_domain` randomly chosen rows from each domain.
///
/// Columns are `domain,branch,label,f0,f1,...`. Rows keep their original order
/// within each domain.
pub fn dump_features(
    model: &MsMdaModel,
    domains: &[DomainDataset],
    rows_per_domain: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks: Vec<Vec<usize>> = domains
        .iter()
        .map(|d| {
            if d.len() < rows_per_domain {
                log::warn!(
                    "{} has only {} rows; dumping all of them",
                    d.domain_id,
                    d.len()
                );
            }
            let mut idx = sample(&mut rng, d.len(), rows_per_domain.min(d.len())).into_vec();
            idx.sort_unstable();
            idx
        })
        .collect();

    let mut paths = Vec::with_capacity(model.num_branches());
    for b in 0..model.num_branches() {
        let path = out_dir.join(format!("branch{b}.csv"));
        let csv_err = |e: csv::Error| Error::io(&path, std::io::Error::other(e.to_string()));
        let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
        let dim = model.config().dsfe_dim;
        let mut header = vec!["domain".to_string(), "branch".into(), "label".into()];
        header.extend((0..dim).map(|k| format!("f{k}")));
        w.write_record(&header).map_err(csv_err)?;
        for (d, idx) in domains.iter().zip(&picks) {
            let feats = model.extract_branch_features(&d.features.select_rows(idx)?, b)?;
            for (r, &i) in idx.iter().enumerate() {
                let mut row = vec![
                    d.domain_id.to_string(),
                    b.to_string(),
                    d.labels[i].to_string(),
                ];
                row.extend(feats.row(r).iter().map(|v| v.to_string()));
                w.write_record(&row).map_err(csv_err)?;
            }
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        paths.push(path);
    }
    Ok(paths)
}
