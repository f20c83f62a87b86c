//! GLR control chart over per-scenario log-likelihood ratios.
//!
//! For every scenario `l` the chart keeps `W_l,k = max(0, W_l,k-1 + Z_k(l))`
//! and stops at the first sample where `max_l W_l,k >= c`.

mod engine;
mod run;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jacobian::{AngleState, JacobianModel, JacobianSnapshot, NeighborRule};

pub use engine::{Evaluator, LikelihoodTerms, Strategy};
pub use run::{run_stream, write_trace_jsonl, LatencyStats, RunOptions, RunOutcome, TraceRecord};

/// Default homogeneous injection variance σ².
pub const DEFAULT_SIGMA2: f64 = 0.005;

/// Largest number of consecutive missing samples bridged as one increment.
pub const MAX_MISSING_SAMPLES: u64 = 5;

const SECONDS_PER_DAY: f64 = 86_400.0;

/// `c = ln(ARL0 · p)` with `ARL0` counted in samples.
pub fn threshold_from_arl(arl0_days: f64, sample_rate_hz: f64, pmu_count: usize) -> Result<f64> {
    for (name, value) in [("arl0_days", arl0_days), ("sample_rate_hz", sample_rate_hz)] {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::InvalidParameter(format!("{name} must be positive, got {value}")));
        }
    }
    if pmu_count == 0 {
        return Err(Error::InvalidParameter("pmu count must be at least 1".into()));
    }
    Ok((arl0_days * SECONDS_PER_DAY * sample_rate_hz * pmu_count as f64).ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlrConfig {
    pub sigma2: f64,
    pub threshold: f64,
    /// Target samples to false alarm implied by `threshold` and `pmu_count`.
    pub arl0_samples: f64,
    pub pmu_count: usize,
    pub model: JacobianModel,
}

impl GlrConfig {
    /// Config with an explicit threshold.
    pub fn new(sigma2: f64, threshold: f64, pmu_count: usize, model: JacobianModel) -> Result<Self> {
        let config = Self {
            sigma2,
            threshold,
            arl0_samples: threshold.exp() / pmu_count.max(1) as f64,
            pmu_count,
            model,
        };
        config.validate()?;
        Ok(config)
    }

    /// Config whose threshold is calibrated from a false-alarm target.
    pub fn from_arl(
        sigma2: f64,
        arl0_days: f64,
        sample_rate_hz: f64,
        pmu_count: usize,
        model: JacobianModel,
    ) -> Result<Self> {
        let threshold = threshold_from_arl(arl0_days, sample_rate_hz, pmu_count)?;
        let mut config = Self::new(sigma2, threshold, pmu_count, model)?;
        config.arl0_samples = arl0_days * SECONDS_PER_DAY * sample_rate_hz;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2.is_finite() && self.sigma2 > 0.0) {
            return Err(Error::InvalidParameter(format!("sigma2 must be positive, got {}", self.sigma2)));
        }
        if !(self.threshold.is_finite() && self.threshold > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "threshold must be positive, got {}",
                self.threshold
            )));
        }
        if self.pmu_count == 0 {
            return Err(Error::InvalidParameter("pmu count must be at least 1".into()));
        }
        Ok(())
    }
}

impl Default for GlrConfig {
    fn default() -> Self {
        Self::from_arl(DEFAULT_SIGMA2, 1.0, 30.0, 39, JacobianModel::Ac(NeighborRule::Drop))
            .expect("defaults are valid")
    }
}

/// `Z = ln|J_l| - ln|J_0| + (‖J_0 Δθ‖² - ‖J_l Δθ‖²) / (2σ²)`.
pub fn log_likelihood_ratio(
    delta_theta: &DVector<f64>,
    base: &JacobianSnapshot,
    scenario: &JacobianSnapshot,
    sigma2: f64,
) -> Result<f64> {
    for dim in [base.dim(), scenario.dim()] {
        if dim != delta_theta.len() {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: delta_theta.len(),
            });
        }
    }
    let terms = LikelihoodTerms {
        log_det: scenario.log_abs_det() - base.log_abs_det(),
        quad: base.quadratic_form(delta_theta) - scenario.quadratic_form(delta_theta),
    };
    Ok(terms.z(sigma2))
}

/// Mutable state of the chart: one `W` per scenario plus the last sample.
#[derive(Debug, Clone)]
pub struct GlrState {
    scenario_ids: Vec<usize>,
    w: Vec<f64>,
    sample_index: u64,
    last_state: AngleState,
}

impl GlrState {
    /// All statistics at zero, anchored at the first sample of the stream.
    pub fn new(scenario_ids: Vec<usize>, initial: AngleState) -> Result<Self> {
        let w = vec![0.0; scenario_ids.len()];
        Self::from_parts(scenario_ids, w, initial)
    }

    pub fn from_parts(scenario_ids: Vec<usize>, w: Vec<f64>, last_state: AngleState) -> Result<Self> {
        if scenario_ids.is_empty() {
            return Err(Error::EmptyScenarioSet);
        }
        if w.len() != scenario_ids.len() {
            return Err(Error::DimensionMismatch {
                expected: scenario_ids.len(),
                found: w.len(),
            });
        }
        if let Some(bad) = w.iter().find(|x| !(**x >= 0.0)) {
            return Err(Error::InvalidParameter(format!("statistic {bad} is negative")));
        }
        Ok(Self {
            scenario_ids,
            w,
            sample_index: last_state.sample_index,
            last_state,
        })
    }

    pub fn scenario_ids(&self) -> &[usize] {
        &self.scenario_ids
    }

    pub fn statistics(&self) -> &[f64] {
        &self.w
    }

    pub fn sample_index(&self) -> u64 {
        self.sample_index
    }

    pub fn last_state(&self) -> &AngleState {
        &self.last_state
    }

    /// `max_l W_l`.
    pub fn overall(&self) -> f64 {
        self.w.iter().copied().fold(0.0, f64::max)
    }

    /// Eq. (19) for one sample; `None` leaves that scenario's `W` unchanged.
    pub fn apply(&mut self, z: &[Option<f64>]) -> Result<()> {
        if z.len() != self.w.len() {
            return Err(Error::DimensionMismatch {
                expected: self.w.len(),
                found: z.len(),
            });
        }
        for (w, z) in self.w.iter_mut().zip(z) {
            if let Some(z) = z {
                *w = (*w + z).max(0.0);
            }
        }
        Ok(())
    }

    pub fn reset(&mut self) {
        self.w.iter_mut().for_each(|w| *w = 0.0);
    }
}

/// Number of sample periods between `previous` and `next`, enforcing the gap
/// policy.
pub fn increment_span(previous: u64, next: u64) -> Result<u64> {
    if next <= previous {
        return Err(Error::NonIncreasingSample {
            previous,
            found: next,
        });
    }
    let missing = next - previous - 1;
    if missing > MAX_MISSING_SAMPLES {
        return Err(Error::SampleGap {
            gap: missing,
            max: MAX_MISSING_SAMPLES,
        });
    }
    Ok(next - previous)
}

/// The three largest statistics, ties broken by ascending scenario id.
pub fn identify_top3(state: &GlrState) -> Vec<(usize, f64)> {
    top_k(&state.scenario_ids, &state.w, 3)
}

pub(crate) fn top_k(ids: &[usize], w: &[f64], k: usize) -> Vec<(usize, f64)> {
    let mut ranked: Vec<(usize, f64)> = ids.iter().copied().zip(w.iter().copied()).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(k);
    ranked
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionEvent {
    pub alarm_sample: u64,
    pub overall_statistic: f64,
    pub top3: Vec<(usize, f64)>,
    /// `W` of every scenario at every processed sample up to the alarm.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_scenario_trace: Option<Vec<Vec<f64>>>,
}

/// One sample of the chart: Δθ from the last state, Z for every scenario
/// evaluated at the last state, the recursion, and the stopping rule.
pub fn step(
    state: &mut GlrState,
    sample: AngleState,
    evaluator: &Evaluator<'_>,
    config: &GlrConfig,
) -> Result<Option<DetectionEvent>> {
    let span = increment_span(state.sample_index, sample.sample_index)?;
    let placement = evaluator.placement();
    let delta = sample.observed(placement) - state.last_state.observed(placement);
    if delta.iter().any(|x| !x.is_finite()) {
        return Err(Error::Stream(format!(
            "sample {} has a non-finite angle on a monitored bus",
            sample.sample_index
        )));
    }
    let z = evaluator.log_likelihood_ratios(&state.last_state, &delta, config.sigma2 * span as f64)?;
    state.apply(&z)?;
    state.sample_index = sample.sample_index;
    state.last_state = sample;
    let overall = state.overall();
    Ok((overall >= config.threshold).then(|| DetectionEvent {
        alarm_sample: state.sample_index,
        overall_statistic: overall,
        top3: identify_top3(state),
        per_scenario_trace: None,
    }))
}

#[cfg(test)]
mod tests;
