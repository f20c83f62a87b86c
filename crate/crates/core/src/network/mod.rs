//! Network topology: buses, branches, incidence and admittance matrices, and
//! the enumeration of admissible outage scenarios.
//!
//! A [`NetworkCase`] is immutable once validated. Buses are addressed
//! externally by [`BusId`] and internally by a dense index (their position in
//! [`NetworkCase::buses`]); every matrix in this crate uses the dense index.

mod admittance;
pub mod matpower;
mod scenario;

use std::collections::HashMap;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use admittance::{build_admittance, build_incidence, AdmittanceEntry, AdmittanceMatrix, IncidenceMatrix};
pub use scenario::{
    enumerate_scenarios, enumerate_scenarios_among, is_connected, Exclusion, ExclusionReason, OutageScenario,
    ScenarioSet,
};

pub type BusId = u32;
pub type BranchId = u32;

/// Schema version written by this crate.
pub const CASE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusKind {
    Reference,
    Generator,
    Load,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: BusId,
    pub kind: BusKind,
    /// Nominal voltage magnitude in p.u.
    #[serde(rename = "v_mag")]
    pub voltage_magnitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub id: BranchId,
    pub from_bus: BusId,
    pub to_bus: BusId,
    /// Series admittance `g + jb` in p.u.
    pub series_admittance: Complex64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BranchRecord {
    id: BranchId,
    from: BusId,
    to: BusId,
    g: f64,
    b: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CaseFile {
    version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    reference_bus: BusId,
    buses: Vec<Bus>,
    branches: Vec<BranchRecord>,
}

/// A validated transmission network.
#[derive(Debug, Clone)]
pub struct NetworkCase {
    name: Option<String>,
    buses: Vec<Bus>,
    branches: Vec<Branch>,
    reference: usize,
    index: HashMap<BusId, usize>,
}

impl NetworkCase {
    /// Validates and builds a case. Branches are sorted by id and must be
    /// numbered densely `1..=L`.
    pub fn new(buses: Vec<Bus>, mut branches: Vec<Branch>, reference_bus: BusId) -> Result<Self> {
        let mut index = HashMap::with_capacity(buses.len());
        for (i, bus) in buses.iter().enumerate() {
            if index.insert(bus.id, i).is_some() {
                return Err(Error::DuplicateBus(bus.id));
            }
            if !(bus.voltage_magnitude.is_finite() && bus.voltage_magnitude > 0.0) {
                return Err(Error::InvalidBus {
                    bus: bus.id,
                    reason: format!("voltage magnitude {} is not positive", bus.voltage_magnitude),
                });
            }
        }

        let references: Vec<&Bus> = buses.iter().filter(|b| b.kind == BusKind::Reference).collect();
        if references.len() != 1 {
            return Err(Error::ReferenceBus(references.len()));
        }
        let reference_bus_record = references[0];
        if reference_bus_record.id != reference_bus {
            return Err(Error::MalformedCase(format!(
                "reference_bus is {reference_bus} but bus {} is marked as reference",
                reference_bus_record.id
            )));
        }
        if (reference_bus_record.voltage_magnitude - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidBus {
                bus: reference_bus,
                reason: "reference bus magnitude must be 1.0 p.u.".into(),
            });
        }

        branches.sort_by_key(|b| b.id);
        for (i, branch) in branches.iter().enumerate() {
            if branch.id as usize != i + 1 {
                return Err(Error::MalformedCase(format!(
                    "branch ids must be dense 1..={}; found id {} at position {}",
                    branches.len(),
                    branch.id,
                    i + 1
                )));
            }
            for bus in [branch.from_bus, branch.to_bus] {
                if !index.contains_key(&bus) {
                    return Err(Error::DanglingEndpoint { branch: branch.id, bus });
                }
            }
            if branch.from_bus == branch.to_bus {
                return Err(Error::InvalidBranch {
                    branch: branch.id,
                    reason: "from and to bus coincide".into(),
                });
            }
            let y = branch.series_admittance;
            if !(y.re.is_finite() && y.im.is_finite()) || y == Complex64::new(0.0, 0.0) {
                return Err(Error::InvalidBranch {
                    branch: branch.id,
                    reason: "series admittance must be finite and nonzero".into(),
                });
            }
        }

        let reference = index[&reference_bus];
        let case = NetworkCase {
            name: None,
            buses,
            branches,
            reference,
            index,
        };
        let isolated = case.unreachable_buses(&[]);
        if isolated > 0 {
            return Err(Error::Disconnected { isolated });
        }
        Ok(case)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn n_branches(&self) -> usize {
        self.branches.len()
    }

    pub fn reference_bus(&self) -> BusId {
        self.buses[self.reference].id
    }

    /// Dense index of the reference bus.
    pub fn reference_index(&self) -> usize {
        self.reference
    }

    pub fn bus_index(&self, id: BusId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn branch(&self, id: BranchId) -> Option<&Branch> {
        id.checked_sub(1).and_then(|i| self.branches.get(i as usize))
    }

    /// Dense endpoint indices of a branch.
    pub fn endpoints(&self, branch: &Branch) -> (usize, usize) {
        (self.index[&branch.from_bus], self.index[&branch.to_bus])
    }

    /// Nominal magnitudes in dense bus order.
    pub fn nominal_magnitudes(&self) -> Vec<f64> {
        self.buses.iter().map(|b| b.voltage_magnitude).collect()
    }

    /// Dense indices of buses adjacent to `bus` (deduplicated, ascending).
    pub fn neighbors(&self, bus: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .branches
            .iter()
            .filter_map(|br| {
                let (a, b) = self.endpoints(br);
                if a == bus {
                    Some(b)
                } else if b == bus {
                    Some(a)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: CaseFile =
            serde_json::from_str(text).map_err(|e| Error::MalformedCase(e.to_string()))?;
        if file.version != CASE_SCHEMA_VERSION {
            return Err(Error::MalformedCase(format!("unsupported case version {}", file.version)));
        }
        let branches = file
            .branches
            .into_iter()
            .map(|r| Branch {
                id: r.id,
                from_bus: r.from,
                to_bus: r.to,
                series_admittance: Complex64::new(r.g, r.b),
            })
            .collect();
        let case = NetworkCase::new(file.buses, branches, file.reference_bus)?;
        Ok(match file.name {
            Some(name) => case.with_name(name),
            None => case,
        })
    }

    pub fn to_json_string(&self) -> Result<String> {
        let file = CaseFile {
            version: CASE_SCHEMA_VERSION,
            name: self.name.clone(),
            reference_bus: self.reference_bus(),
            buses: self.buses.clone(),
            branches: self
                .branches
                .iter()
                .map(|b| BranchRecord {
                    id: b.id,
                    from: b.from_bus,
                    to: b.to_bus,
                    g: b.series_admittance.re,
                    b: b.series_admittance.im,
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    /// Number of buses not reachable from the reference bus once `removed`
    /// branches are taken out.
    pub(crate) fn unreachable_buses(&self, removed: &[BranchId]) -> usize {
        let mut uf = petgraph::unionfind::UnionFind::<usize>::new(self.n_buses());
        for br in &self.branches {
            if removed.contains(&br.id) {
                continue;
            }
            let (a, b) = self.endpoints(br);
            uf.union(a, b);
        }
        let root = uf.find(self.reference);
        (0..self.n_buses()).filter(|&i| uf.find(i) != root).count()
    }
}

/// Reads a JSON case file.
pub fn parse_case(path: impl AsRef<Path>) -> Result<NetworkCase> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    NetworkCase::from_json_str(&text)
}

/// Loads a case by extension: `.m` goes through the MATPOWER importer
/// (warnings are returned), everything else is read as JSON.
pub fn load_case(path: impl AsRef<Path>) -> Result<(NetworkCase, Vec<String>)> {
    let path = path.as_ref();
    if path.extension().is_some_and(|e| e == "m") {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let imported = matpower::import_str(&text, &matpower::ImportOptions::default())?;
        Ok((imported.case, imported.warnings))
    } else {
        Ok((parse_case(path)?, Vec::new()))
    }
}
