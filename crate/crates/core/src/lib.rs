//! Streaming transmission-line outage detection from phasor angle data.
//!
//! [`network`] builds admittance matrices and outage scenarios, [`jacobian`]
//! evaluates the reduced power-flow Jacobians, [`detector`] runs the GLR
//! chart, and [`simulator`] draws synthetic streams from the same model.

pub mod detector;
pub mod error;
pub mod jacobian;
pub mod linalg;
pub mod network;
pub mod simulator;

pub use detector::{
    identify_top3, log_likelihood_ratio, run_stream, step, threshold_from_arl, DetectionEvent, Evaluator, GlrConfig,
    GlrState, RunOptions, RunOutcome, Strategy, TraceRecord,
};
pub use error::{Error, Result};
pub use jacobian::{
    dc_matrix, evaluate_jacobian, evaluate_scenario_jacobians, AngleState, JacobianModel, JacobianSnapshot,
    NeighborRule, PmuPlacement, VoltageProfile,
};
pub use network::{
    build_admittance, build_incidence, enumerate_scenarios, load_case, parse_case, BranchId, BusId, NetworkCase,
    OutageScenario, ScenarioSet,
};
pub use simulator::{generate_stream, SimConfig, StreamGenerator, StreamRecord};
