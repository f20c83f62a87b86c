use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};
use outage_core::detector::{run_stream, write_trace_jsonl, DetectionEvent, Evaluator, LatencyStats, RunOptions};
use outage_core::jacobian::AngleState;
use outage_core::network::{BranchId, ScenarioSet};
use outage_core::simulator::{read_truth, CsvStream, Truth};
use serde::Serialize;

use crate::args::DetectArgs;
use crate::common::{read_case, resolve_shared, scenario_set, DetectorSettings, Shared};
use crate::config::ConfigFile;

#[derive(Debug, Serialize)]
pub struct RankedScenario {
    pub scenario: usize,
    pub lines: Vec<BranchId>,
    #[serde(rename = "W")]
    pub w: f64,
}

pub fn ranked(set: &ScenarioSet, top3: &[(usize, f64)]) -> Vec<RankedScenario> {
    top3.iter()
        .map(|&(id, w)| RankedScenario {
            scenario: id,
            lines: set.scenarios[id].removed.clone(),
            w,
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct ConfigEcho {
    case: PathBuf,
    stream: PathBuf,
    #[serde(flatten)]
    shared: Shared,
    #[serde(flatten)]
    detector: DetectorSettings,
    scenarios: usize,
    degrees: bool,
    continue_after_alarm: bool,
}

#[derive(Debug, Serialize)]
struct Alarm {
    alarm_sample: u64,
    overall_statistic: f64,
    top3: Vec<RankedScenario>,
}

#[derive(Debug, Serialize)]
struct RunReport {
    config: ConfigEcho,
    samples_processed: u64,
    first_sample: Option<u64>,
    alarm: bool,
    alarm_sample: Option<u64>,
    /// Seconds from the first sample to the alarm.
    alarm_time_s: Option<f64>,
    /// Alarm sample minus the true outage sample; negative for a false alarm.
    delay_samples: Option<i64>,
    delay_s: Option<f64>,
    overall_statistic: Option<f64>,
    top3: Vec<RankedScenario>,
    truth: Option<Truth>,
    /// True scenario among the top three.
    identified: Option<bool>,
    alarms: Vec<Alarm>,
    trace_path: Option<PathBuf>,
    plot_data_path: Option<PathBuf>,
    latency: Option<LatencyStats>,
}

/// Scenario id of `truth` within `set`, matched by removed lines when known.
fn truth_scenario(set: &ScenarioSet, truth: &Truth) -> Option<usize> {
    if truth.lines.is_empty() {
        truth.scenario
    } else {
        set.find(&truth.lines).map(|s| s.id)
    }
}

/// Returns true when an alarm was raised.
pub fn run(args: &DetectArgs) -> Result<bool> {
    let cfg = ConfigFile::load(args.common.config.as_deref())?;
    let case = read_case(&args.case.case)?;
    let set = scenario_set(&case, &args.case, &cfg)?;
    let (shared, placement) = resolve_shared(&case, &args.common, &cfg)?;
    let detector = DetectorSettings::resolve(&args.detector, &cfg, shared.pmu_count)?;
    let degrees = cfg.get_flag(args.degrees, "degrees")?;
    let continue_after_alarm = cfg.get_flag(args.continue_after_alarm, "continue-after-alarm")?;
    cfg.finish()?;
    let glr = detector.glr_config(shared.sigma2, shared.pmu_count, detector.threshold)?;

    let truth = args
        .truth
        .as_ref()
        .map(|p| read_truth(p).with_context(|| format!("reading truth {}", p.display())))
        .transpose()?;

    let file = File::open(&args.stream).with_context(|| format!("opening stream {}", args.stream.display()))?;
    let stream = CsvStream::new(BufReader::new(file), placement.bus_ids(), degrees)
        .with_context(|| format!("reading stream {}", args.stream.display()))?;
    let voltage = shared.voltage;
    let states = stream.map(|row| {
        row.and_then(|s| AngleState::from_observed(&case, &placement, s.sample_index, &s.angles, voltage))
    });

    let evaluator = Evaluator::new(&case, &set.scenarios, &placement, detector.model, detector.strategy)?;
    let options = RunOptions {
        trace: args.trace.is_some() || args.plot_data.is_some(),
        scenario_trace: args.plot_data.is_some(),
        continue_after_alarm,
        max_samples: None,
    };
    let outcome = run_stream(states, &evaluator, &glr, options)
        .with_context(|| format!("running detector on {}", args.stream.display()))?;

    if let Some(path) = &args.trace {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut out = BufWriter::new(file);
        write_trace_jsonl(&mut out, &outcome.trace)?;
        out.flush()?;
    }
    if let Some(path) = &args.plot_data {
        write_plot_data(path, &set, &outcome.trace, &outcome.scenario_trace)?;
    }

    let first: Option<&DetectionEvent> = outcome.first_alarm();
    let rate = detector.sample_rate_hz;
    let tau = truth.as_ref().and_then(|t| t.outage_sample);
    let delay_samples = first.zip(tau).map(|(e, tau)| e.alarm_sample as i64 - tau as i64);
    let true_id = truth.as_ref().and_then(|t| truth_scenario(&set, t));
    let report = RunReport {
        samples_processed: outcome.processed,
        first_sample: outcome.first_sample,
        alarm: first.is_some(),
        alarm_sample: first.map(|e| e.alarm_sample),
        alarm_time_s: first
            .zip(outcome.first_sample)
            .map(|(e, k0)| (e.alarm_sample - k0) as f64 / rate),
        delay_samples,
        delay_s: delay_samples.map(|d| d as f64 / rate),
        overall_statistic: first.map(|e| e.overall_statistic),
        top3: first.map(|e| ranked(&set, &e.top3)).unwrap_or_default(),
        identified: first.zip(true_id).map(|(e, id)| e.top3.iter().any(|t| t.0 == id)),
        truth,
        alarms: outcome
            .events
            .iter()
            .map(|e| Alarm {
                alarm_sample: e.alarm_sample,
                overall_statistic: e.overall_statistic,
                top3: ranked(&set, &e.top3),
            })
            .collect(),
        trace_path: args.trace.clone(),
        plot_data_path: args.plot_data.clone(),
        latency: outcome.latency(),
        config: ConfigEcho {
            case: args.case.case.clone(),
            stream: args.stream.clone(),
            shared,
            detector,
            scenarios: set.len(),
            degrees,
            continue_after_alarm,
        },
    };

    let text = serde_json::to_string_pretty(&report)?;
    match &args.report {
        Some(path) => std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?,
        None => println!("{text}"),
    }
    Ok(report.alarm)
}

fn write_plot_data(
    path: &PathBuf,
    set: &ScenarioSet,
    trace: &[outage_core::TraceRecord],
    rows: &[Vec<f64>],
) -> Result<()> {
    let mut out = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    let mut header = vec!["sample".to_string(), "overall_W".to_string()];
    header.extend(set.scenarios.iter().map(|s| format!("W_{}", s.label())));
    out.write_record(&header)?;
    for (record, row) in trace.iter().zip(rows) {
        let mut line = vec![record.sample.to_string(), record.overall_w.to_string()];
        line.extend(row.iter().map(|w| w.to_string()));
        out.write_record(&line)?;
    }
    out.flush()?;
    Ok(())
}
