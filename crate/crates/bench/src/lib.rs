//! Fixtures shared by the benchmarks: the 39-bus case and a short simulated
//! stream to step through.

use std::path::PathBuf;

use outage_core::detector::{Evaluator, GlrConfig, Strategy};
use outage_core::jacobian::{AngleState, JacobianModel, NeighborRule, PmuPlacement, VoltageProfile};
use outage_core::network::{enumerate_scenarios, parse_case, NetworkCase, ScenarioSet};
use outage_core::simulator::{generate_stream, SimConfig};

pub const AC: JacobianModel = JacobianModel::Ac(NeighborRule::Drop);

pub struct Fixture {
    pub case: NetworkCase,
    pub set: ScenarioSet,
    pub placement: PmuPlacement,
    /// Consecutive states of a noise-free null stream.
    pub states: Vec<AngleState>,
}

impl Fixture {
    pub fn ieee39(samples: u64) -> Self {
        let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../cases/ieee39.json");
        let case = parse_case(path).expect("39-bus case");
        let set = enumerate_scenarios(&case, 1).expect("scenarios");
        let placement = PmuPlacement::full(&case);
        let sim = SimConfig {
            noise_fraction: 0.0,
            duration: samples + 1,
            seed: 1,
            ..SimConfig::default()
        };
        let states = generate_stream(&case, &set.scenarios, &placement, &sim, None)
            .expect("stream")
            .iter()
            .map(|r| r.to_state(&case, &placement, VoltageProfile::Flat).expect("state"))
            .collect();
        Self {
            case,
            set,
            placement,
            states,
        }
    }

    pub fn evaluator(&self, model: JacobianModel, strategy: Strategy) -> Evaluator<'_> {
        Evaluator::new(&self.case, &self.set.scenarios, &self.placement, model, strategy).expect("evaluator")
    }

    /// A threshold no null stream of this length reaches.
    pub fn config(&self, model: JacobianModel) -> GlrConfig {
        GlrConfig::new(0.005, 1e6, self.placement.pmu_count(), model).expect("config")
    }
}
