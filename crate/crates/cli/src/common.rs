use std::path::Path;

use anyhow::{bail, Context, Result};
use outage_core::detector::{threshold_from_arl, GlrConfig, Strategy, DEFAULT_SIGMA2};
use outage_core::jacobian::{JacobianModel, NeighborRule, PmuPlacement, VoltageProfile};
use outage_core::network::{enumerate_scenarios_among, load_case, BranchId, NetworkCase, ScenarioSet};
use outage_core::simulator::{Dynamics, SimConfig, DEFAULT_LOAD_PERTURBATION, DEFAULT_NOISE_FRACTION};
use serde::Serialize;

use crate::args::{CaseArgs, CommonArgs, DetectorArgs, DynamicsArg, Mode, Rule, SimArgs, StrategyArg, Voltage};
use crate::config::ConfigFile;

pub const DEFAULT_RATE_HZ: f64 = 30.0;

pub fn read_case(path: &Path) -> Result<NetworkCase> {
    let (case, warnings) = load_case(path).with_context(|| format!("loading case {}", path.display()))?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    Ok(case)
}

pub fn scenario_set(case: &NetworkCase, args: &CaseArgs, cfg: &ConfigFile) -> Result<ScenarioSet> {
    let max = cfg.get_or(args.max_simultaneous, "max-simultaneous", 1usize)?;
    let lines: Vec<BranchId> = match cfg.get_list(args.lines.clone(), "lines")? {
        Some(lines) => lines,
        None => case.branches().iter().map(|b| b.id).collect(),
    };
    Ok(enumerate_scenarios_among(case, &lines, max)?)
}

pub fn placement(case: &NetworkCase, ids: Option<Vec<u32>>) -> Result<PmuPlacement> {
    Ok(match ids {
        Some(ids) => PmuPlacement::new(case, &ids)?,
        None => PmuPlacement::full(case),
    })
}

/// Seed for sub-stream `tags` of a root seed (SplitMix64 steps).
pub fn derive_seed(root: u64, tags: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    tags.iter().fold(mix(root), |acc, &t| mix(acc.rotate_left(23) ^ mix(t)))
}

pub fn voltage_profile(v: Voltage) -> VoltageProfile {
    match v {
        Voltage::Flat => VoltageProfile::Flat,
        Voltage::Nominal => VoltageProfile::Nominal,
    }
}

/// Values shared by simulate, detect and batch after applying precedence.
#[derive(Debug, Clone, Serialize)]
pub struct Shared {
    pub placement: Vec<u32>,
    pub pmu_count: usize,
    pub sigma2: f64,
    pub voltage: VoltageProfile,
    pub seed: u64,
}

pub fn resolve_shared(case: &NetworkCase, args: &CommonArgs, cfg: &ConfigFile) -> Result<(Shared, PmuPlacement)> {
    let placement = placement(case, cfg.get_list(args.placement.clone(), "placement")?)?;
    let shared = Shared {
        placement: placement.bus_ids().to_vec(),
        pmu_count: placement.pmu_count(),
        sigma2: cfg.get_or(args.sigma2, "sigma2", DEFAULT_SIGMA2)?,
        voltage: voltage_profile(cfg.get_enum(args.voltage, "voltage", Voltage::Flat)?),
        seed: cfg.get_or(args.seed, "seed", 0u64)?,
    };
    if !(shared.sigma2.is_finite() && shared.sigma2 > 0.0) {
        bail!("sigma2 must be positive, got {}", shared.sigma2);
    }
    Ok((shared, placement))
}

#[derive(Debug, Clone, Serialize)]
pub struct DetectorSettings {
    pub threshold: f64,
    pub arl0_days: Option<f64>,
    pub sample_rate_hz: f64,
    pub mode: &'static str,
    pub neighbor_rule: &'static str,
    pub strategy: Strategy,
    #[serde(skip)]
    pub model: JacobianModel,
}

impl DetectorSettings {
    pub fn resolve(args: &DetectorArgs, cfg: &ConfigFile, pmu_count: usize) -> Result<Self> {
        let rate = cfg.get_or(args.rate, "rate", DEFAULT_RATE_HZ)?;
        let threshold = cfg.get(args.threshold, "threshold")?;
        let arl0_days = cfg.get(args.arl0_days, "arl0-days")?;
        let (threshold, arl0_days) = match threshold {
            Some(c) => (c, arl0_days),
            None => {
                let days = arl0_days.unwrap_or(1.0);
                (threshold_from_arl(days, rate, pmu_count)?, Some(days))
            }
        };
        let mode = cfg.get_enum(args.mode, "mode", Mode::Ac)?;
        let rule = cfg.get_enum(args.neighbor_rule, "neighbor-rule", Rule::Drop)?;
        let strategy = match cfg.get_enum(args.strategy, "strategy", StrategyArg::LowRank)? {
            StrategyArg::Dense => Strategy::Dense,
            StrategyArg::LowRank => Strategy::LowRank,
        };
        let rule = match rule {
            Rule::Drop => NeighborRule::Drop,
            Rule::Nominal => NeighborRule::Nominal,
        };
        let (model, mode_name) = match mode {
            Mode::Ac => (JacobianModel::Ac(rule), "ac"),
            Mode::Dc => (JacobianModel::Dc, "dc"),
        };
        Ok(Self {
            threshold,
            arl0_days,
            sample_rate_hz: rate,
            mode: mode_name,
            neighbor_rule: match rule {
                NeighborRule::Drop => "drop",
                NeighborRule::Nominal => "nominal",
            },
            strategy,
            model,
        })
    }

    pub fn glr_config(&self, sigma2: f64, pmu_count: usize, threshold: f64) -> Result<GlrConfig> {
        Ok(GlrConfig::new(sigma2, threshold, pmu_count, self.model)?)
    }
}

pub struct SimSettings {
    pub config: SimConfig,
    pub initial: Option<Vec<f64>>,
}

pub fn resolve_sim(case: &NetworkCase, args: &SimArgs, shared: &Shared, cfg: &ConfigFile) -> Result<SimSettings> {
    let initial = match cfg.get(args.initial.clone(), "initial")? {
        Some(path) => Some(
            outage_core::simulator::read_initial_angles(&path, case, false)
                .with_context(|| format!("reading initial state {}", path.display()))?,
        ),
        None => None,
    };
    let config = SimConfig {
        sigma2: shared.sigma2,
        noise_fraction: cfg.get_or(args.noise_fraction, "noise-fraction", DEFAULT_NOISE_FRACTION)?,
        load_perturbation: cfg.get_or(args.load_perturbation, "load-perturbation", DEFAULT_LOAD_PERTURBATION)?,
        voltage: shared.voltage,
        dynamics: match cfg.get_enum(args.dynamics, "dynamics", DynamicsArg::TimeVariant)? {
            DynamicsArg::TimeVariant => Dynamics::TimeVariant,
            DynamicsArg::Fixed => Dynamics::Fixed,
        },
        seed: shared.seed,
        ..SimConfig::default()
    };
    Ok(SimSettings { config, initial })
}
