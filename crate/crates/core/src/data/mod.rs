//! Domain datasets, CSV ingestion, normalization, transfer folds, differential
//! entropy and synthetic multi-domain data.

mod csv_io;
mod dataset;
mod de;
mod folds;
mod normalize;
mod sampler;
mod synth;

pub use csv_io::{
    domain_path, load_dataset_dir, load_domain_csv, write_dataset_dir, write_domain_csv, Manifest,
    MANIFEST_FILE,
};
pub use dataset::{check_compatible, DomainDataset, DomainId, Scenario, TransferTask};
pub use de::{de_from_variance, de_gaussian};
pub use folds::make_folds;
pub use normalize::{
    apply_multi_source_normalization, combine_sources, normalize, normalize_dataset,
    normalize_domains, NormKind, NormOrder, NormalizationSpec,
};
pub use sampler::{BatchSampler, TrainingBatch};
pub use synth::{generate_synthetic, SynthConfig};
