use std::collections::{BTreeMap, BTreeSet};

use super::{DomainDataset, DomainId, Scenario, TransferTask};
use crate::error::{Error, Result};

/// Builds transfer folds over a complete session × subject grid.
///
/// - cross-session: per subject, the last session is the target and all
///   earlier sessions are sources;
/// - cross-subject: per session, the last subject is the target and all
///   other subjects are sources.
///
/// With `loso`, every grid position along the transfer axis takes a turn as
/// the target instead of only the last one.
pub fn make_folds(
    domains: &[DomainDataset],
    scenario: Scenario,
    loso: bool,
) -> Result<Vec<TransferTask>> {
    let mut grid: BTreeMap<DomainId, &DomainDataset> = BTreeMap::new();
    for d in domains {
        if grid.insert(d.domain_id, d).is_some() {
            return Err(Error::validation(format!(
                "duplicate grid cell {}",
                d.domain_id
            )));
        }
    }
    let sessions: BTreeSet<u32> = grid.keys().map(|id| id.session).collect();
    let subjects: BTreeSet<u32> = grid.keys().map(|id| id.subject).collect();
    for &s in &sessions {
        for &j in &subjects {
            if !grid.contains_key(&DomainId::new(s, j)) {
                return Err(Error::validation(format!(
                    "missing grid cell {}",
                    DomainId::new(s, j)
                )));
            }
        }
    }

    // (outer fixed axis, transfer axis)
    let (outer, axis): (Vec<u32>, Vec<u32>) = match scenario {
        Scenario::CrossSession => (
            subjects.into_iter().collect(),
            sessions.into_iter().collect(),
        ),
        Scenario::CrossSubject => (
            sessions.into_iter().collect(),
            subjects.into_iter().collect(),
        ),
    };
    if axis.len() < 2 {
        return Err(Error::validation(format!(
            "{scenario} transfer needs at least two {} in the grid",
            match scenario {
                Scenario::CrossSession => "sessions",
                Scenario::CrossSubject => "subjects",
            }
        )));
    }
    let cell = |o: u32, a: u32| -> DomainId {
        match scenario {
            Scenario::CrossSession => DomainId::new(a, o),
            Scenario::CrossSubject => DomainId::new(o, a),
        }
    };
    let outer_name = match scenario {
        Scenario::CrossSession => "subject",
        Scenario::CrossSubject => "session",
    };
    let axis_name = match scenario {
        Scenario::CrossSession => "session",
        Scenario::CrossSubject => "subject",
    };

    let mut tasks = Vec::new();
    for &o in &outer {
        let targets: Vec<u32> = if loso {
            axis.clone()
        } else {
            vec![*axis.last().expect("axis has >= 2 entries")]
        };
        for t in targets {
            let sources = axis
                .iter()
                .filter(|&&a| a != t)
                .map(|&a| grid[&cell(o, a)].clone())
                .collect();
            let fold_id = if loso {
                format!("{scenario}/{outer_name}{o}/{axis_name}{t}")
            } else {
                format!("{scenario}/{outer_name}{o}")
            };
            let task = TransferTask {
                sources,
                target: grid[&cell(o, t)].clone(),
                scenario,
                fold_id,
            };
            task.validate()?;
            tasks.push(task);
        }
    }
    Ok(tasks)
}
