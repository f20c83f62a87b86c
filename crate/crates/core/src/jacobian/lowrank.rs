//! Rank-one change of the reduced Jacobian when a single line is removed.
//!
//! The Jacobian is linear in the off-diagonal admittances, and removing a
//! line of admittance `y` between buses `a` and `b` adds `+y` to `Y_ab`. The
//! reduced matrix therefore changes by `u v^T` with at most two nonzeros in
//! each of `u` and `v`.

use super::{AngleState, JacobianModel, NeighborRule, PmuPlacement};
use crate::network::{Branch, NetworkCase};

/// Sparse `u v^T` with `(position, value)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct RankOneUpdate {
    pub u: Vec<(usize, f64)>,
    pub v: Vec<(usize, f64)>,
}

impl RankOneUpdate {
    pub fn v_dot(&self, x: &[f64]) -> f64 {
        self.v.iter().map(|&(i, w)| w * x[i]).sum()
    }
}

/// Coupling term of a line alone, `V_m V_n (g sin θ_mn - b cos θ_mn)`.
#[inline]
fn line_term(v_m: f64, v_n: f64, theta_mn: f64, branch: &Branch) -> f64 {
    let y = branch.series_admittance;
    v_m * v_n * (y.re * theta_mn.sin() - y.im * theta_mn.cos())
}

/// Change of the reduced matrix caused by removing `branch`, or `None` when
/// the line leaves it unchanged (both ends unmonitored, or an unmonitored far
/// end whose term is dropped anyway).
pub fn line_update(
    case: &NetworkCase,
    branch: &Branch,
    state: &AngleState,
    placement: &PmuPlacement,
    model: JacobianModel,
) -> Option<RankOneUpdate> {
    let (a, b) = case.endpoints(branch);
    let reference = case.reference_index();
    let term = |m: usize, n: usize| -> Option<f64> {
        match model {
            JacobianModel::Dc => Some(-branch.series_admittance.im),
            JacobianModel::Ac(rule) => {
                if placement.position(n).is_some() || n == reference {
                    Some(line_term(
                        state.magnitudes[m],
                        state.magnitudes[n],
                        state.angles[m] - state.angles[n],
                        branch,
                    ))
                } else {
                    match rule {
                        NeighborRule::Drop => None,
                        NeighborRule::Nominal => Some(line_term(
                            state.magnitudes[m],
                            case.buses()[n].voltage_magnitude,
                            0.0,
                            branch,
                        )),
                    }
                }
            }
        }
    };

    match (placement.position(a), placement.position(b)) {
        (Some(pa), Some(pb)) => {
            let d_ab = term(a, b)?;
            let d_ba = term(b, a)?;
            Some(RankOneUpdate {
                u: vec![(pa, d_ab), (pb, -d_ba)],
                v: vec![(pa, -1.0), (pb, 1.0)],
            })
        }
        (Some(pa), None) => term(a, b).map(|d| RankOneUpdate {
            u: vec![(pa, -d)],
            v: vec![(pa, 1.0)],
        }),
        (None, Some(pb)) => term(b, a).map(|d| RankOneUpdate {
            u: vec![(pb, -d)],
            v: vec![(pb, 1.0)],
        }),
        (None, None) => None,
    }
}
