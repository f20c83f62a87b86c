//! Synthetic angle streams drawn from the model the detector assumes:
//! `Δθ_k = J(θ_k-1)^-1 ΔP_k` with `ΔP_k ~ N(0, σ² I)`.
//!
//! Dynamics run on every non-reference bus of the network; the placement only
//! decides which angles are emitted.

mod io;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jacobian::{assemble, AngleState, JacobianModel, JacobianSnapshot, NeighborRule, PmuPlacement, SnapshotOrigin, VoltageProfile};
use crate::network::{build_admittance, build_incidence, AdmittanceMatrix, NetworkCase, OutageScenario};

pub use io::{read_initial_angles, read_truth, write_stream_csv, write_truth, CsvStream, StreamSample, Truth};

/// Fraction of the mean |Δθ| used as measurement-noise standard deviation.
pub const DEFAULT_NOISE_FRACTION: f64 = 0.10;
/// Relative jitter applied to a supplied initial state.
pub const DEFAULT_LOAD_PERTURBATION: f64 = 0.05;

const INCREMENT_STREAM: u64 = 0;
const INITIAL_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dynamics {
    /// `J` re-evaluated at the previous state every sample.
    #[default]
    TimeVariant,
    /// `J` evaluated once at `θ_0` (once more at the outage).
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub sigma2: f64,
    pub noise_fraction: f64,
    pub outage_sample: Option<u64>,
    /// Scenario id in the scenario set handed to the generator.
    pub outage_scenario: Option<usize>,
    /// Number of emitted samples, `θ_0` included.
    pub duration: u64,
    pub seed: u64,
    pub load_perturbation: f64,
    pub voltage: VoltageProfile,
    pub dynamics: Dynamics,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            sigma2: crate::detector::DEFAULT_SIGMA2,
            noise_fraction: DEFAULT_NOISE_FRACTION,
            outage_sample: None,
            outage_scenario: None,
            duration: 300,
            seed: 0,
            load_perturbation: DEFAULT_LOAD_PERTURBATION,
            voltage: VoltageProfile::Flat,
            dynamics: Dynamics::TimeVariant,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.sigma2.is_finite() && self.sigma2 >= 0.0) {
            return bad(format!("sigma2 must be nonnegative, got {}", self.sigma2));
        }
        if !(0.0..1.0).contains(&self.noise_fraction) {
            return bad(format!("noise fraction must be in [0, 1), got {}", self.noise_fraction));
        }
        if !(0.0..1.0).contains(&self.load_perturbation) {
            return bad(format!(
                "load perturbation must be in [0, 1), got {}",
                self.load_perturbation
            ));
        }
        if self.duration == 0 {
            return bad("duration must be at least one sample".into());
        }
        match (self.outage_sample, self.outage_scenario) {
            (None, None) => {}
            (Some(tau), Some(_)) => {
                if tau == 0 || tau >= self.duration {
                    return bad(format!("outage sample {tau} outside 1..{}", self.duration));
                }
            }
            _ => return bad("outage sample and outage scenario must be given together".into()),
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    PreOutage,
    PostOutage,
}

/// One emitted sample: angles of the placement's buses, in placement order.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamRecord {
    pub sample_index: u64,
    pub angles: Vec<f64>,
    pub truth: Phase,
}

impl StreamRecord {
    pub fn to_state(&self, case: &NetworkCase, placement: &PmuPlacement, profile: VoltageProfile) -> Result<AngleState> {
        AngleState::from_observed(case, placement, self.sample_index, &self.angles, profile)
    }
}

/// Draws `ΔP ~ N(0, σ² I)` and solves `J Δθ = ΔP`.
pub fn sample_increment<R: Rng + ?Sized>(snapshot: &JacobianSnapshot, sigma2: f64, rng: &mut R) -> DVector<f64> {
    let sd = sigma2.sqrt();
    let dp = DVector::from_fn(snapshot.dim(), |_, _| sd * rng.sample::<f64, _>(StandardNormal));
    snapshot.factorization().solve(&dp)
}

/// `θ_0` on every bus: `base` jittered multiplicatively by `1 + U(-f, f)`.
pub fn perturb_initial(base: &[f64], fraction: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(INITIAL_STREAM);
    base.iter()
        .map(|&theta| {
            if fraction == 0.0 || theta == 0.0 {
                theta
            } else {
                theta * (1.0 + rng.random_range(-fraction..=fraction))
            }
        })
        .collect()
}

/// Lazily generated stream without measurement noise.
pub struct StreamGenerator<'a> {
    case: &'a NetworkCase,
    placement: &'a PmuPlacement,
    full: PmuPlacement,
    base_y: AdmittanceMatrix,
    outage: Option<(u64, &'a OutageScenario)>,
    config: SimConfig,
    rng: ChaCha8Rng,
    state: AngleState,
    current: Option<JacobianSnapshot>,
    next: u64,
}

impl<'a> StreamGenerator<'a> {
    /// `initial` holds `θ_0` for every bus in dense order; `None` is the flat
    /// start.
    pub fn new(
        case: &'a NetworkCase,
        scenarios: &'a [OutageScenario],
        placement: &'a PmuPlacement,
        config: &SimConfig,
        initial: Option<&[f64]>,
    ) -> Result<Self> {
        config.validate()?;
        let outage = match (config.outage_sample, config.outage_scenario) {
            (Some(tau), Some(id)) => Some((
                tau,
                scenarios.iter().find(|s| s.id == id).ok_or(Error::UnknownScenario(id))?,
            )),
            _ => None,
        };
        let magnitudes = config.voltage.magnitudes(case);
        let angles = match initial {
            Some(theta) => perturb_initial(theta, config.load_perturbation, config.seed),
            None => vec![0.0; case.n_buses()],
        };
        let state = AngleState::new(case, 0, angles, magnitudes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(INCREMENT_STREAM);
        Ok(Self {
            case,
            placement,
            full: PmuPlacement::full(case),
            base_y: build_admittance(&build_incidence(case), case.branches()),
            outage,
            config: config.clone(),
            rng,
            state,
            current: None,
            next: 0,
        })
    }

    fn post_outage(&self, k: u64) -> Option<&'a OutageScenario> {
        self.outage.and_then(|(tau, s)| (k >= tau).then_some(s))
    }

    /// Refreshes `self.current` for the increment into sample `k`.
    fn refresh_jacobian(&mut self, k: u64) -> Result<()> {
        let (y, origin) = match self.post_outage(k) {
            Some(s) => (&s.admittance, SnapshotOrigin::Scenario(s.id)),
            None => (&self.base_y, SnapshotOrigin::Base),
        };
        let keep = self.config.dynamics == Dynamics::Fixed
            && self.current.as_ref().is_some_and(|c| c.origin == origin);
        if !keep {
            let j = assemble(self.case, y, &self.state, &self.full, JacobianModel::Ac(NeighborRule::Drop));
            self.current = Some(JacobianSnapshot::new(origin, j)?);
        }
        Ok(())
    }

    fn advance(&mut self, k: u64) -> Result<()> {
        self.refresh_jacobian(k)?;
        let j = self.current.as_ref().expect("refreshed above");
        let delta = sample_increment(j, self.config.sigma2, &mut self.rng);
        for (&bus, d) in self.full.indices().iter().zip(delta.iter()) {
            self.state.angles[bus] += d;
        }
        self.state.sample_index = k;
        Ok(())
    }
}

impl Iterator for StreamGenerator<'_> {
    type Item = Result<StreamRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        let k = self.next;
        if k >= self.config.duration {
            return None;
        }
        self.next += 1;
        if k > 0 {
            if let Err(e) = self.advance(k) {
                self.next = self.config.duration;
                return Some(Err(e));
            }
        }
        Some(Ok(StreamRecord {
            sample_index: k,
            angles: self.state.observed(self.placement).iter().copied().collect(),
            truth: if self.post_outage(k).is_some() {
                Phase::PostOutage
            } else {
                Phase::PreOutage
            },
        }))
    }
}

/// Whole stream with measurement noise applied.
pub fn generate_stream(
    case: &NetworkCase,
    scenarios: &[OutageScenario],
    placement: &PmuPlacement,
    config: &SimConfig,
    initial: Option<&[f64]>,
) -> Result<Vec<StreamRecord>> {
    let mut records = StreamGenerator::new(case, scenarios, placement, config, initial)?.collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(NOISE_STREAM);
    add_measurement_noise(&mut records, config.noise_fraction, &mut rng);
    Ok(records)
}

/// Perturbs every increment of bus `i` by `N(0, (fraction · mean_k |Δθ_i,k|)²)`
/// and re-accumulates the angles from the first sample.
pub fn add_measurement_noise<R: Rng + ?Sized>(records: &mut [StreamRecord], fraction: f64, rng: &mut R) {
    if fraction == 0.0 || records.len() < 2 {
        return;
    }
    let buses = records[0].angles.len();
    let steps = (records.len() - 1) as f64;
    let mut deltas: Vec<Vec<f64>> = records
        .windows(2)
        .map(|w| w[1].angles.iter().zip(&w[0].angles).map(|(b, a)| b - a).collect())
        .collect();
    let sd: Vec<f64> = (0..buses)
        .map(|i| fraction * deltas.iter().map(|d| d[i].abs()).sum::<f64>() / steps)
        .collect();
    for d in &mut deltas {
        for (x, &s) in d.iter_mut().zip(&sd) {
            *x += s * rng.sample::<f64, _>(StandardNormal);
        }
    }
    for (k, d) in deltas.iter().enumerate() {
        let prev = records[k].angles.clone();
        for (i, a) in records[k + 1].angles.iter_mut().enumerate() {
            *a = prev[i] + d[i];
        }
    }
}
