//! Per-sample evaluation of the likelihood-ratio terms for every scenario.
//!
//! Two interchangeable strategies produce the same numbers. [`Strategy::Dense`]
//! assembles and factors every scenario matrix. [`Strategy::LowRank`] factors
//! only the base matrix and obtains each scenario's determinant and quadratic
//! form from the rank-one line updates (matrix determinant lemma), falling back
//! to a dense evaluation when the update is close to singular.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jacobian::{
    assemble, line_update, AngleState, JacobianModel, JacobianSnapshot, PmuPlacement, RankOneUpdate, SnapshotOrigin,
};
use crate::linalg::Factorization;
use crate::network::{build_admittance, build_incidence, AdmittanceMatrix, Branch, NetworkCase, OutageScenario};

/// Below this `|det(I + V^T J0^-1 U)|` the scenario matrix is rebuilt and
/// factored directly.
const LEMMA_FALLBACK: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Dense,
    #[default]
    LowRank,
}

/// Scenario-dependent pieces of `Z`: `ln|J_l| - ln|J_0|` and
/// `‖J_0 Δθ‖² - ‖J_l Δθ‖²`. `Z = log_det + quad / (2σ²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LikelihoodTerms {
    pub log_det: f64,
    pub quad: f64,
}

impl LikelihoodTerms {
    pub fn z(&self, sigma2: f64) -> f64 {
        self.log_det + self.quad / (2.0 * sigma2)
    }
}

struct Fixed {
    base: JacobianSnapshot,
    scenarios: Vec<Option<JacobianSnapshot>>,
}

/// Everything needed to turn `(θ_{k-1}, Δθ_k)` into per-scenario terms.
pub struct Evaluator<'a> {
    case: &'a NetworkCase,
    base_y: AdmittanceMatrix,
    scenarios: &'a [OutageScenario],
    lines: Vec<Vec<&'a Branch>>,
    placement: &'a PmuPlacement,
    model: JacobianModel,
    strategy: Strategy,
    fixed: Option<Fixed>,
}

impl<'a> Evaluator<'a> {
    pub fn new(
        case: &'a NetworkCase,
        scenarios: &'a [OutageScenario],
        placement: &'a PmuPlacement,
        model: JacobianModel,
        strategy: Strategy,
    ) -> Result<Self> {
        if scenarios.is_empty() {
            return Err(Error::EmptyScenarioSet);
        }
        let lines = scenarios
            .iter()
            .map(|s| {
                s.removed
                    .iter()
                    .map(|&id| case.branch(id).ok_or(Error::UnknownScenario(s.id)))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let base_y = build_admittance(&build_incidence(case), case.branches());
        let mut out = Self {
            case,
            base_y,
            scenarios,
            lines,
            placement,
            model,
            strategy,
            fixed: None,
        };
        if model == JacobianModel::Dc {
            // -B does not depend on the state, so every snapshot is built once
            let state = AngleState::flat(case, crate::jacobian::VoltageProfile::Flat);
            let base = out.snapshot(&out.base_y, &state, SnapshotOrigin::Base)?;
            let scenarios = scenarios
                .iter()
                .map(|s| out.snapshot(&s.admittance, &state, SnapshotOrigin::Scenario(s.id)).ok())
                .collect();
            out.fixed = Some(Fixed { base, scenarios });
        }
        Ok(out)
    }

    pub fn case(&self) -> &NetworkCase {
        self.case
    }

    pub fn placement(&self) -> &PmuPlacement {
        self.placement
    }

    pub fn scenarios(&self) -> &[OutageScenario] {
        self.scenarios
    }

    pub fn model(&self) -> JacobianModel {
        self.model
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    fn snapshot(&self, y: &AdmittanceMatrix, state: &AngleState, origin: SnapshotOrigin) -> Result<JacobianSnapshot> {
        JacobianSnapshot::new(origin, assemble(self.case, y, state, self.placement, self.model))
    }

    /// Base snapshot at `state` (the fixed `-B` in DC mode).
    pub fn base_snapshot(&self, state: &AngleState) -> Result<JacobianSnapshot> {
        match &self.fixed {
            Some(f) => Ok(f.base.clone()),
            None => self.snapshot(&self.base_y, state, SnapshotOrigin::Base),
        }
    }

    /// Snapshot of scenario at position `index` evaluated at `state`.
    pub fn scenario_snapshot(&self, index: usize, state: &AngleState) -> Result<JacobianSnapshot> {
        let s = &self.scenarios[index];
        match &self.fixed {
            Some(f) => f.scenarios[index].clone().ok_or_else(|| Error::SingularJacobian {
                origin: SnapshotOrigin::Scenario(s.id).to_string(),
                pivot: 0.0,
                floor: 0.0,
            }),
            None => self.snapshot(&s.admittance, state, SnapshotOrigin::Scenario(s.id)),
        }
    }

    /// Terms for every scenario, in scenario order. `None` marks a scenario
    /// whose matrix is singular at `prev`. A singular base matrix is an error.
    pub fn terms(&self, prev: &AngleState, delta: &DVector<f64>) -> Result<Vec<Option<LikelihoodTerms>>> {
        if delta.len() != self.placement.len() {
            return Err(Error::DimensionMismatch {
                expected: self.placement.len(),
                found: delta.len(),
            });
        }
        if let Some(fixed) = &self.fixed {
            let base_q = fixed.base.quadratic_form(delta);
            return Ok(fixed
                .scenarios
                .iter()
                .map(|s| {
                    s.as_ref().map(|s| LikelihoodTerms {
                        log_det: s.log_abs_det() - fixed.base.log_abs_det(),
                        quad: base_q - s.quadratic_form(delta),
                    })
                })
                .collect());
        }
        match self.strategy {
            Strategy::Dense => self.dense_terms(prev, delta),
            Strategy::LowRank => self.low_rank_terms(prev, delta),
        }
    }

    /// `Z_k(l)` for every scenario with variance `sigma2`.
    pub fn log_likelihood_ratios(&self, prev: &AngleState, delta: &DVector<f64>, sigma2: f64) -> Result<Vec<Option<f64>>> {
        Ok(self
            .terms(prev, delta)?
            .into_iter()
            .map(|t| t.map(|t| t.z(sigma2)))
            .collect())
    }

    fn dense_terms(&self, prev: &AngleState, delta: &DVector<f64>) -> Result<Vec<Option<LikelihoodTerms>>> {
        let base = self.base_snapshot(prev)?;
        let base_q = base.quadratic_form(delta);
        Ok((0..self.scenarios.len())
            .map(|i| {
                self.scenario_snapshot(i, prev).ok().map(|s| LikelihoodTerms {
                    log_det: s.log_abs_det() - base.log_abs_det(),
                    quad: base_q - s.quadratic_form(delta),
                })
            })
            .collect())
    }

    fn low_rank_terms(&self, prev: &AngleState, delta: &DVector<f64>) -> Result<Vec<Option<LikelihoodTerms>>> {
        let j0 = assemble(self.case, &self.base_y, prev, self.placement, self.model);
        let factor = Factorization::new(&j0, &SnapshotOrigin::Base.to_string())?;
        let inverse = factor.inverse();
        let w = &j0 * delta;

        let mut out = Vec::with_capacity(self.scenarios.len());
        for (index, lines) in self.lines.iter().enumerate() {
            let updates: Vec<RankOneUpdate> = lines
                .iter()
                .filter_map(|b| line_update(self.case, b, prev, self.placement, self.model))
                .collect();
            if updates.is_empty() {
                out.push(Some(LikelihoodTerms { log_det: 0.0, quad: 0.0 }));
                continue;
            }
            let det = lemma_determinant(&inverse, &updates);
            if det.abs() < LEMMA_FALLBACK || !det.is_finite() {
                let dense = self.scenario_snapshot(index, prev).ok().map(|s| LikelihoodTerms {
                    log_det: s.log_abs_det() - factor.log_abs_det(),
                    quad: w.norm_squared() - s.quadratic_form(delta),
                });
                out.push(dense);
                continue;
            }
            out.push(Some(LikelihoodTerms {
                log_det: det.abs().ln(),
                quad: -perturbed_norm_gain(&w, delta, &updates),
            }));
        }
        Ok(out)
    }
}

/// `det(I + V^T J0^-1 U)` for the stacked rank-one updates.
fn lemma_determinant(inverse: &DMatrix<f64>, updates: &[RankOneUpdate]) -> f64 {
    // column b of J0^-1 U restricted to what v_a touches
    let entry = |a: &RankOneUpdate, b: &RankOneUpdate| -> f64 {
        a.v.iter()
            .map(|&(i, vi)| vi * b.u.iter().map(|&(j, uj)| inverse[(i, j)] * uj).sum::<f64>())
            .sum()
    };
    match updates {
        [only] => 1.0 + entry(only, only),
        _ => {
            let r = updates.len();
            let m = DMatrix::from_fn(r, r, |a, b| f64::from(u8::from(a == b)) + entry(&updates[a], &updates[b]));
            m.determinant()
        }
    }
}

/// `‖w + Σ u_i (v_i·Δθ)‖² - ‖w‖²`, touching only the nonzeros of the `u_i`.
fn perturbed_norm_gain(w: &DVector<f64>, delta: &DVector<f64>, updates: &[RankOneUpdate]) -> f64 {
    let mut touched: Vec<(usize, f64)> = Vec::with_capacity(2 * updates.len());
    for upd in updates {
        let s = upd.v_dot(delta.as_slice());
        for &(p, ui) in &upd.u {
            match touched.iter_mut().find(|(q, _)| *q == p) {
                Some((_, d)) => *d += ui * s,
                None => touched.push((p, ui * s)),
            }
        }
    }
    touched.iter().map(|&(p, d)| d * (2.0 * w[p] + d)).sum()
}
