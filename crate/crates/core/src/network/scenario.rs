use itertools::Itertools;
use serde::Serialize;

use super::{build_admittance, build_incidence, AdmittanceMatrix, BranchId, NetworkCase};
use crate::error::{Error, Result};

/// A candidate outage: a set of removed lines and the admittance matrix of
/// the remaining network.
#[derive(Debug, Clone)]
pub struct OutageScenario {
    pub id: usize,
    /// Removed branch ids, ascending.
    pub removed: Vec<BranchId>,
    pub admittance: AdmittanceMatrix,
}

impl OutageScenario {
    pub fn label(&self) -> String {
        self.removed.iter().map(|l| l.to_string()).join("+")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum ExclusionReason {
    /// Removal leaves `isolated_buses` buses cut off from the reference bus.
    Islanding { isolated_buses: usize },
    /// Line was not in the requested candidate set.
    NotCandidate,
}

impl std::fmt::Display for ExclusionReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ExclusionReason::Islanding { isolated_buses } => {
                write!(f, "islanding ({isolated_buses} bus(es) separated)")
            }
            ExclusionReason::NotCandidate => write!(f, "outside candidate set"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Exclusion {
    pub removed: Vec<BranchId>,
    #[serde(flatten)]
    pub reason: ExclusionReason,
}

#[derive(Debug, Clone)]
pub struct ScenarioSet {
    pub scenarios: Vec<OutageScenario>,
    pub excluded: Vec<Exclusion>,
}

impl ScenarioSet {
    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    /// Scenario whose removed set is exactly `lines` (order-insensitive).
    pub fn find(&self, lines: &[BranchId]) -> Option<&OutageScenario> {
        let mut key = lines.to_vec();
        key.sort_unstable();
        key.dedup();
        self.scenarios.iter().find(|s| s.removed == key)
    }
}

/// True iff every bus is still reachable after removing `removed`.
pub fn is_connected(case: &NetworkCase, removed: &[BranchId]) -> bool {
    case.unreachable_buses(removed) == 0
}

/// All combinations of up to `max_simultaneous` lines whose removal keeps the
/// network connected.
pub fn enumerate_scenarios(case: &NetworkCase, max_simultaneous: usize) -> Result<ScenarioSet> {
    let all: Vec<BranchId> = case.branches().iter().map(|b| b.id).collect();
    enumerate_scenarios_among(case, &all, max_simultaneous)
}

/// Like [`enumerate_scenarios`] but only combining lines from `candidates`.
/// Single lines outside the candidate set are reported as
/// [`ExclusionReason::NotCandidate`].
///
/// Scenario ids are dense and follow the lexicographic order of the sorted
/// removed-line tuples.
pub fn enumerate_scenarios_among(
    case: &NetworkCase,
    candidates: &[BranchId],
    max_simultaneous: usize,
) -> Result<ScenarioSet> {
    if max_simultaneous == 0 {
        return Err(Error::InvalidParameter("max_simultaneous must be at least 1".into()));
    }
    let mut pool: Vec<BranchId> = candidates.to_vec();
    pool.sort_unstable();
    pool.dedup();
    if let Some(&bad) = pool.iter().find(|&&id| case.branch(id).is_none()) {
        return Err(Error::InvalidParameter(format!("unknown branch id {bad}")));
    }

    let mut admissible: Vec<Vec<BranchId>> = Vec::new();
    let mut excluded: Vec<Exclusion> = Vec::new();
    for size in 1..=max_simultaneous.min(pool.len()) {
        for combo in pool.iter().copied().combinations(size) {
            let isolated = case.unreachable_buses(&combo);
            if isolated == 0 {
                admissible.push(combo);
            } else {
                excluded.push(Exclusion {
                    removed: combo,
                    reason: ExclusionReason::Islanding {
                        isolated_buses: isolated,
                    },
                });
            }
        }
    }
    for br in case.branches() {
        if pool.binary_search(&br.id).is_err() {
            excluded.push(Exclusion {
                removed: vec![br.id],
                reason: ExclusionReason::NotCandidate,
            });
        }
    }
    admissible.sort();
    excluded.sort_by(|a, b| a.removed.cmp(&b.removed));

    let incidence = build_incidence(case);
    let scenarios = admissible
        .into_iter()
        .enumerate()
        .map(|(id, removed)| {
            let admittance = build_admittance(&incidence.without_lines(&removed), case.branches());
            OutageScenario {
                id,
                removed,
                admittance,
            }
        })
        .collect();
    Ok(ScenarioSet { scenarios, excluded })
}
