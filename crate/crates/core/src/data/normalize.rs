//! Z-score normalization at three granularities.
//!
//! Standard deviations are population values (divide by n). A slice whose
//! entries are all equal maps to zeros.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{check_compatible, DomainDataset};
use crate::error::{Error, Result};
use crate::neuralcore::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    None,
    /// Each feature column independently.
    #[default]
    ElectrodeWise,
    /// Each sample row independently.
    SampleWise,
    /// One mean and std for the whole matrix.
    GlobalWise,
}

/// Whether multi-source data is normalized before (A) or after (B) concatenation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum NormOrder {
    #[default]
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NormalizationSpec {
    pub kind: NormKind,
    pub order: NormOrder,
}

impl FromStr for NormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(NormKind::None),
            "electrode" | "electrode_wise" => Ok(NormKind::ElectrodeWise),
            "sample" | "sample_wise" => Ok(NormKind::SampleWise),
            "global" | "global_wise" => Ok(NormKind::GlobalWise),
            other => Err(Error::validation(format!(
                "unknown normalization {other:?}"
            ))),
        }
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormKind::None => "none",
            NormKind::ElectrodeWise => "electrode",
            NormKind::SampleWise => "sample",
            NormKind::GlobalWise => "global",
        })
    }
}

/// Population mean and std of the values yielded by `values`.
/// Returns `None` for a constant (or empty) slice.
fn moments(values: impl Iterator<Item = f64> + Clone) -> Option<(f64, f64)> {
    let mut n = 0usize;
    let mut sum = 0.0;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values.clone() {
        n += 1;
        sum += v;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if n == 0 || lo == hi {
        return None;
    }
    let mean = sum / n as f64;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    let std = var.sqrt();
    (std > 0.0).then_some((mean, std))
}

pub fn normalize(m: &Matrix, kind: NormKind) -> Matrix {
    let (rows, cols) = m.shape();
    let mut out = m.clone();
    match kind {
        NormKind::None => {}
        NormKind::ElectrodeWise => {
            for c in 0..cols {
                let column = (0..rows).map(|r| m.get(r, c));
                match moments(column) {
                    Some((mean, std)) => {
                        for r in 0..rows {
                            out.set(r, c, (m.get(r, c) - mean) / std);
                        }
                    }
                    None => (0..rows).for_each(|r| out.set(r, c, 0.0)),
                }
            }
        }
        NormKind::SampleWise => {
            for r in 0..rows {
                let stats = moments(m.row(r).iter().copied());
                for v in out.row_mut(r) {
                    *v = stats.map_or(0.0, |(mean, std)| (*v - mean) / std);
                }
            }
        }
        NormKind::GlobalWise => {
            let stats = moments(m.data().iter().copied());
            for v in out.data_mut() {
                *v = stats.map_or(0.0, |(mean, std)| (*v - mean) / std);
            }
        }
    }
    out
}

pub fn normalize_dataset(ds: &DomainDataset, kind: NormKind) -> DomainDataset {
    DomainDataset {
        features: normalize(&ds.features, kind),
        ..ds.clone()
    }
}

/// Normalizes every domain with its own statistics (the multi-branch path).
pub fn normalize_domains(domains: &[DomainDataset], kind: NormKind) -> Result<Vec<DomainDataset>> {
    check_compatible(domains)?;
    Ok(domains.iter().map(|d| normalize_dataset(d, kind)).collect())
}

/// Source preparation for the concatenating baseline.
///
/// Order A returns each domain normalized on its own (ready to concatenate);
/// order B returns a single merged domain normalized as a whole.
pub fn apply_multi_source_normalization(
    domains: &[DomainDataset],
    spec: NormalizationSpec,
) -> Result<Vec<DomainDataset>> {
    if domains.is_empty() {
        return Err(Error::validation("no domains to normalize"));
    }
    check_compatible(domains)?;
    match spec.order {
        NormOrder::A => normalize_domains(domains, spec.kind),
        NormOrder::B => {
            let merged = DomainDataset::concat(domains)?;
            Ok(vec![normalize_dataset(&merged, spec.kind)])
        }
    }
}

/// Merged, normalized source for the baseline under either order.
pub fn combine_sources(
    domains: &[DomainDataset],
    spec: NormalizationSpec,
) -> Result<DomainDataset> {
    DomainDataset::concat(&apply_multi_source_normalization(domains, spec)?)
}
