//! Active-power/angle Jacobian of the AC power-flow equations, reduced to the
//! buses a PMU placement observes, and the static DC matrix `-B`.
//!
//! Off-diagonal entries are `dP_m/dθ_n = V_m V_n |Y_mn| sin(θ_m - θ_n - α_mn)`
//! and each diagonal entry is minus the sum of its row's off-diagonal terms.
//! When a neighbor of an observed bus carries no PMU its term cannot be
//! computed; [`NeighborRule`] decides what happens to it. The reference bus
//! is never part of the monitored vector but its angle (0) and magnitude are
//! always known, so its terms always enter the diagonal.

mod lowrank;

use std::fmt;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Factorization;
use crate::network::{AdmittanceEntry, AdmittanceMatrix, BusId, NetworkCase, OutageScenario};

pub use lowrank::{line_update, RankOneUpdate};

/// Sampling interval of a 30 Hz PMU stream, in seconds.
pub const PMU_INTERVAL_S: f64 = 1.0 / 30.0;

/// Source of the voltage magnitudes used when the stream carries angles only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VoltageProfile {
    /// Every bus at 1.0 p.u.
    #[default]
    Flat,
    /// The case file's nominal magnitudes.
    Nominal,
}

impl VoltageProfile {
    pub fn magnitudes(self, case: &NetworkCase) -> Vec<f64> {
        match self {
            VoltageProfile::Flat => vec![1.0; case.n_buses()],
            VoltageProfile::Nominal => case.nominal_magnitudes(),
        }
    }
}

/// Treatment of a coupling term whose far bus has no PMU.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NeighborRule {
    /// The term is left out of the diagonal sum.
    #[default]
    Drop,
    /// The term is evaluated with the far bus at the near bus's angle and its
    /// nominal magnitude.
    Nominal,
}

/// Which matrix stands in for the Jacobian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum JacobianModel {
    /// Time-variant AC Jacobian evaluated at the last measured state.
    Ac(NeighborRule),
    /// Static `-B`.
    Dc,
}

/// Bus angles (radians) and magnitudes (p.u.) at one sample, in dense bus
/// order. Buses without a measurement may hold `NaN`.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleState {
    pub sample_index: u64,
    pub angles: Vec<f64>,
    pub magnitudes: Vec<f64>,
}

impl AngleState {
    pub fn new(case: &NetworkCase, sample_index: u64, angles: Vec<f64>, magnitudes: Vec<f64>) -> Result<Self> {
        let n = case.n_buses();
        for len in [angles.len(), magnitudes.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, found: len });
            }
        }
        let r = case.reference_index();
        if angles[r] != 0.0 {
            return Err(Error::InvalidParameter(format!(
                "reference bus angle must be 0, got {}",
                angles[r]
            )));
        }
        Ok(Self {
            sample_index,
            angles,
            magnitudes,
        })
    }

    /// All angles zero, magnitudes from `profile`.
    pub fn flat(case: &NetworkCase, profile: VoltageProfile) -> Self {
        Self {
            sample_index: 0,
            angles: vec![0.0; case.n_buses()],
            magnitudes: profile.magnitudes(case),
        }
    }

    /// State assembled from the observed angles of `placement`; every other
    /// non-reference angle is `NaN`.
    pub fn from_observed(
        case: &NetworkCase,
        placement: &PmuPlacement,
        sample_index: u64,
        observed: &[f64],
        profile: VoltageProfile,
    ) -> Result<Self> {
        if observed.len() != placement.len() {
            return Err(Error::DimensionMismatch {
                expected: placement.len(),
                found: observed.len(),
            });
        }
        let mut angles = vec![f64::NAN; case.n_buses()];
        angles[case.reference_index()] = 0.0;
        for (&bus, &theta) in placement.indices().iter().zip(observed) {
            angles[bus] = theta;
        }
        Ok(Self {
            sample_index,
            angles,
            magnitudes: profile.magnitudes(case),
        })
    }

    /// Angles of the observed buses in placement order.
    pub fn observed(&self, placement: &PmuPlacement) -> DVector<f64> {
        DVector::from_iterator(placement.len(), placement.indices().iter().map(|&i| self.angles[i]))
    }
}

/// The ordered set of monitored buses. The reference bus is never monitored;
/// a PMU listed on it still counts toward [`PmuPlacement::pmu_count`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PmuPlacement {
    indices: Vec<usize>,
    ids: Vec<BusId>,
    position: Vec<Option<usize>>,
    pmu_count: usize,
}

impl PmuPlacement {
    /// Every bus carries a PMU.
    pub fn full(case: &NetworkCase) -> Self {
        let ids: Vec<BusId> = case.buses().iter().map(|b| b.id).collect();
        Self::new(case, &ids).expect("a full placement is always valid")
    }

    pub fn new(case: &NetworkCase, bus_ids: &[BusId]) -> Result<Self> {
        let mut position = vec![None; case.n_buses()];
        let mut indices = Vec::with_capacity(bus_ids.len());
        let mut ids = Vec::with_capacity(bus_ids.len());
        let mut seen = std::collections::HashSet::new();
        for &id in bus_ids {
            if !seen.insert(id) {
                return Err(Error::InvalidPlacement(format!("bus {id} listed twice")));
            }
            let idx = case
                .bus_index(id)
                .ok_or_else(|| Error::InvalidPlacement(format!("bus {id} does not exist")))?;
            if idx == case.reference_index() {
                continue;
            }
            position[idx] = Some(indices.len());
            indices.push(idx);
            ids.push(id);
        }
        if indices.is_empty() {
            return Err(Error::InvalidPlacement("no monitored non-reference bus".into()));
        }
        Ok(Self {
            indices,
            ids,
            position,
            pmu_count: bus_ids.len(),
        })
    }

    /// Monitored dimension `K`.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Number of PMUs, including one on the reference bus if listed.
    pub fn pmu_count(&self) -> usize {
        self.pmu_count
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn bus_ids(&self) -> &[BusId] {
        &self.ids
    }

    /// Position of a dense bus index in the monitored vector.
    pub fn position(&self, bus: usize) -> Option<usize> {
        self.position[bus]
    }

    /// True when every non-reference bus is monitored.
    pub fn is_full(&self) -> bool {
        self.indices.len() + 1 == self.position.len()
    }

    /// Monitored buses none of whose neighbors is monitored or the reference
    /// bus. Under [`NeighborRule::Drop`] their Jacobian rows vanish.
    pub fn isolated(&self, case: &NetworkCase) -> Vec<BusId> {
        self.indices
            .iter()
            .filter(|&&m| {
                case.neighbors(m)
                    .iter()
                    .all(|&n| n != case.reference_index() && self.position[n].is_none())
            })
            .map(|&m| case.buses()[m].id)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SnapshotOrigin {
    Base,
    Scenario(usize),
}

impl fmt::Display for SnapshotOrigin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SnapshotOrigin::Base => write!(f, "base"),
            SnapshotOrigin::Scenario(id) => write!(f, "scenario {id}"),
        }
    }
}

/// An evaluated (reduced) Jacobian with its factorization.
#[derive(Debug, Clone)]
pub struct JacobianSnapshot {
    pub origin: SnapshotOrigin,
    matrix: DMatrix<f64>,
    factor: Factorization,
    gram: OnceLock<DMatrix<f64>>,
}

impl JacobianSnapshot {
    pub fn new(origin: SnapshotOrigin, matrix: DMatrix<f64>) -> Result<Self> {
        let factor = Factorization::new(&matrix, &origin.to_string())?;
        Ok(Self {
            origin,
            matrix,
            factor,
            gram: OnceLock::new(),
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn log_abs_det(&self) -> f64 {
        self.factor.log_abs_det()
    }

    pub fn factorization(&self) -> &Factorization {
        &self.factor
    }

    /// `J^T J`, computed on first use.
    pub fn gram(&self) -> &DMatrix<f64> {
        self.gram.get_or_init(|| self.matrix.tr_mul(&self.matrix))
    }

    /// `‖J x‖² = x^T (J^T J) x`.
    pub fn quadratic_form(&self, x: &DVector<f64>) -> f64 {
        (&self.matrix * x).norm_squared()
    }
}

#[inline]
fn coupling(v_m: f64, v_n: f64, theta_mn: f64, entry: &AdmittanceEntry) -> f64 {
    v_m * v_n * entry.magnitude * (theta_mn - entry.angle).sin()
}

/// Net active power injections `P_m = V_m Σ_n V_n |Y_mn| cos(θ_m - θ_n - α_mn)`
/// for every bus.
pub fn active_power_injection(y: &AdmittanceMatrix, state: &AngleState) -> Vec<f64> {
    (0..y.dim())
        .map(|m| {
            let (vm, tm) = (state.magnitudes[m], state.angles[m]);
            vm * y
                .row(m)
                .iter()
                .map(|e| state.magnitudes[e.col] * e.magnitude * (tm - state.angles[e.col] - e.angle).cos())
                .sum::<f64>()
        })
        .collect()
}

/// Full `N x N` Jacobian including the reference bus row and column; every
/// row sums to zero.
pub fn unreduced_jacobian(y: &AdmittanceMatrix, state: &AngleState) -> DMatrix<f64> {
    let n = y.dim();
    let mut out = DMatrix::zeros(n, n);
    for m in 0..n {
        let mut diag = 0.0;
        for e in y.row(m).iter().filter(|e| e.col != m) {
            let t = coupling(
                state.magnitudes[m],
                state.magnitudes[e.col],
                state.angles[m] - state.angles[e.col],
                e,
            );
            out[(m, e.col)] = t;
            diag -= t;
        }
        out[(m, m)] = diag;
    }
    out
}

/// Reduced `K x K` matrix for `model` on the monitored buses.
pub fn assemble(
    case: &NetworkCase,
    y: &AdmittanceMatrix,
    state: &AngleState,
    placement: &PmuPlacement,
    model: JacobianModel,
) -> DMatrix<f64> {
    let k = placement.len();
    let mut out = DMatrix::zeros(k, k);
    let reference = case.reference_index();
    for (i, &m) in placement.indices().iter().enumerate() {
        let mut diag = 0.0;
        for e in y.row(m).iter().filter(|e| e.col != m) {
            let n = e.col;
            let observed = placement.position(n);
            let term = match model {
                JacobianModel::Dc => -e.value.im,
                JacobianModel::Ac(rule) => {
                    if observed.is_some() || n == reference {
                        coupling(
                            state.magnitudes[m],
                            state.magnitudes[n],
                            state.angles[m] - state.angles[n],
                            e,
                        )
                    } else {
                        match rule {
                            NeighborRule::Drop => continue,
                            NeighborRule::Nominal => coupling(
                                state.magnitudes[m],
                                case.buses()[n].voltage_magnitude,
                                0.0,
                                e,
                            ),
                        }
                    }
                }
            };
            if let Some(j) = observed {
                out[(i, j)] = term;
            }
            diag -= term;
        }
        out[(i, i)] = match model {
            JacobianModel::Dc => -y.get(m, m).im,
            JacobianModel::Ac(_) => diag,
        };
    }
    out
}

/// AC Jacobian on `placement` with unobservable neighbor terms dropped.
pub fn evaluate_jacobian(
    case: &NetworkCase,
    y: &AdmittanceMatrix,
    state: &AngleState,
    placement: &PmuPlacement,
) -> Result<JacobianSnapshot> {
    evaluate_with(case, y, state, placement, JacobianModel::Ac(NeighborRule::Drop), SnapshotOrigin::Base)
}

pub fn evaluate_with(
    case: &NetworkCase,
    y: &AdmittanceMatrix,
    state: &AngleState,
    placement: &PmuPlacement,
    model: JacobianModel,
    origin: SnapshotOrigin,
) -> Result<JacobianSnapshot> {
    JacobianSnapshot::new(origin, assemble(case, y, state, placement, model))
}

/// One snapshot per scenario, all at the same state; a singular scenario
/// yields an `Err` in its slot.
pub fn evaluate_scenario_jacobians(
    case: &NetworkCase,
    scenarios: &[OutageScenario],
    state: &AngleState,
    placement: &PmuPlacement,
    model: JacobianModel,
) -> Vec<Result<JacobianSnapshot>> {
    scenarios
        .iter()
        .map(|s| evaluate_with(case, &s.admittance, state, placement, model, SnapshotOrigin::Scenario(s.id)))
        .collect()
}

/// Static DC matrix `-B` restricted to `placement`.
pub fn dc_matrix(case: &NetworkCase, y: &AdmittanceMatrix, placement: &PmuPlacement) -> Result<JacobianSnapshot> {
    let dummy = AngleState::flat(case, VoltageProfile::Flat);
    evaluate_with(case, y, &dummy, placement, JacobianModel::Dc, SnapshotOrigin::Base)
}

#[cfg(test)]
mod tests;
