use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neuralcore::Matrix;

/// Identifies one recording: a subject in a session. Both are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DomainId {
    pub session: u32,
    pub subject: u32,
}

impl DomainId {
    pub fn new(session: u32, subject: u32) -> Self {
        Self { session, subject }
    }

    /// Placeholder id for a merged source.
    pub const COMBINED: DomainId = DomainId {
        session: 0,
        subject: 0,
    };
}

impl fmt::Display for DomainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "session{}/subject{}", self.session, self.subject)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainDataset {
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub domain_id: DomainId,
    pub num_classes: usize,
}

impl DomainDataset {
    pub fn new(
        features: Matrix,
        labels: Vec<usize>,
        domain_id: DomainId,
        num_classes: usize,
    ) -> Result<Self> {
        let ds = Self {
            features,
            labels,
            domain_id,
            num_classes,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.rows() != self.labels.len() {
            return Err(Error::validation(format!(
                "{}: {} feature rows but {} labels",
                self.domain_id,
                self.features.rows(),
                self.labels.len()
            )));
        }
        if self.num_classes < 2 {
            return Err(Error::validation(format!(
                "{}: num_classes must be >= 2",
                self.domain_id
            )));
        }
        if let Some((row, l)) = self
            .labels
            .iter()
            .enumerate()
            .find(|(_, &l)| l >= self.num_classes)
        {
            return Err(Error::validation(format!(
                "{}: label {l} at row {row} outside [0, {})",
                self.domain_id, self.num_classes
            )));
        }
        if !self.features.is_finite() {
            return Err(Error::validation(format!(
                "{}: non-finite feature value",
                self.domain_id
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    /// Concatenates domains in order under the combined id.
    pub fn concat(domains: &[DomainDataset]) -> Result<DomainDataset> {
        let Some(first) = domains.first() else {
            return Err(Error::validation("cannot concatenate zero domains"));
        };
        check_compatible(domains)?;
        let parts: Vec<&Matrix> = domains.iter().map(|d| &d.features).collect();
        let features = Matrix::vstack(&parts)?;
        let labels = domains
            .iter()
            .flat_map(|d| d.labels.iter().copied())
            .collect();
        let id = if domains.len() == 1 {
            first.domain_id
        } else {
            DomainId::COMBINED
        };
        DomainDataset::new(features, labels, id, first.num_classes)
    }
}

/// All domains must agree on feature width and class count.
pub fn check_compatible(domains: &[DomainDataset]) -> Result<()> {
    let Some(first) = domains.first() else {
        return Ok(());
    };
    for d in domains {
        if d.feature_dim() != first.feature_dim() {
            return Err(Error::validation(format!(
                "mixed feature dims: {} has {}, {} has {}",
                first.domain_id,
                first.feature_dim(),
                d.domain_id,
                d.feature_dim()
            )));
        }
        if d.num_classes != first.num_classes {
            return Err(Error::validation(format!(
                "mixed class counts: {} has {}, {} has {}",
                first.domain_id, first.num_classes, d.domain_id, d.num_classes
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    CrossSubject,
    CrossSession,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::CrossSubject => "cross-subject",
            Scenario::CrossSession => "cross-session",
        })
    }
}

/// One transfer fold: N labeled sources and an unlabeled target.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferTask {
    pub sources: Vec<DomainDataset>,
    pub target: DomainDataset,
    pub scenario: Scenario,
    pub fold_id: String,
}

impl TransferTask {
    pub fn validate(&self) -> Result<()> {
        if self.sources.is_empty() {
            return Err(Error::validation(format!(
                "{}: no source domains",
                self.fold_id
            )));
        }
        let mut all: Vec<DomainDataset> = self.sources.clone();
        all.push(self.target.clone());
        check_compatible(&all)?;
        if self
            .sources
            .iter()
            .any(|s| s.domain_id == self.target.domain_id && s.domain_id != DomainId::COMBINED)
        {
            return Err(Error::validation(format!(
                "{}: target {} also appears as a source",
                self.fold_id, self.target.domain_id
            )));
        }
        Ok(())
    }

    pub fn num_sources(&self) -> usize {
        self.sources.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.target.feature_dim()
    }

    pub fn num_classes(&self) -> usize {
        self.target.num_classes
    }
}
