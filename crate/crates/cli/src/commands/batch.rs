use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use outage_core::detector::{run_stream, threshold_from_arl, Evaluator, RunOptions, TraceRecord};
use outage_core::network::BranchId;
use outage_core::simulator::{generate_stream, SimConfig};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::BatchArgs;
use crate::common::{derive_seed, read_case, resolve_shared, resolve_sim, scenario_set, DetectorSettings};
use crate::config::ConfigFile;

const DEFAULT_RUNS: usize = 10;
const DEFAULT_OUTAGE_SAMPLE: u64 = 90;
const DEFAULT_HORIZON: u64 = 300;

/// Outcome of one run at one threshold.
#[derive(Debug, Clone, Serialize)]
struct Row {
    line: String,
    scenario: usize,
    run: usize,
    seed: u64,
    arl0_days: f64,
    threshold: f64,
    alarm_sample: Option<u64>,
    delay_samples: Option<i64>,
    top1: Option<usize>,
    identified: bool,
}

#[derive(Debug, Serialize)]
struct ThresholdSummary {
    arl0_days: f64,
    threshold: f64,
    runs: usize,
    detected: usize,
    false_alarms: usize,
    missed: usize,
    /// Detected runs whose true scenario is in the top three.
    identified: usize,
    mean_delay_samples: Option<f64>,
    median_delay_samples: Option<f64>,
    per_line: BTreeMap<String, LineSummary>,
}

#[derive(Debug, Default, Serialize)]
struct LineSummary {
    runs: usize,
    detected: usize,
    identified: usize,
    mean_delay_samples: Option<f64>,
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 { values[n / 2] } else { 0.5 * (values[n / 2 - 1] + values[n / 2]) })
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// First trace record at or above `c`.
fn first_crossing(trace: &[TraceRecord], c: f64) -> Option<&TraceRecord> {
    trace.iter().find(|r| r.overall_w >= c)
}

pub fn run(args: &BatchArgs) -> Result<()> {
    let cfg = ConfigFile::load(args.common.config.as_deref())?;
    let case = read_case(&args.case.case)?;
    let set = scenario_set(&case, &args.case, &cfg)?;
    let (shared, placement) = resolve_shared(&case, &args.common, &cfg)?;
    let detector = DetectorSettings::resolve(&args.detector, &cfg, shared.pmu_count)?;
    let sim = resolve_sim(&case, &args.sim, &shared, &cfg)?;
    let runs = cfg.get_or(args.runs, "runs", DEFAULT_RUNS)?;
    let tau = cfg.get_or(args.outage_sample, "outage-sample", DEFAULT_OUTAGE_SAMPLE)?;
    let horizon = cfg.get_or(args.horizon, "horizon", DEFAULT_HORIZON)?;
    let lines: Option<Vec<BranchId>> = cfg.get_list(args.outage_lines.clone(), "outage-lines")?;
    let sweep: Option<Vec<f64>> = cfg.get_list(args.arl0_sweep.clone(), "arl0-sweep")?;
    let threads = cfg.get(args.threads, "threads")?;
    cfg.finish()?;

    if runs == 0 {
        bail!("runs must be at least 1");
    }
    if tau == 0 {
        bail!("outage sample must be at least 1");
    }
    let targets: Vec<(f64, f64)> = match sweep {
        Some(days) => days
            .iter()
            .map(|&d| Ok((d, threshold_from_arl(d, detector.sample_rate_hz, shared.pmu_count)?)))
            .collect::<Result<_>>()?,
        None => vec![(detector.arl0_days.unwrap_or(f64::NAN), detector.threshold)],
    };
    let c_max = targets.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);

    let outaged: Vec<_> = match &lines {
        Some(lines) => lines
            .iter()
            .map(|&l| set.find(&[l]).with_context(|| format!("line {l} is not an admissible single outage")))
            .collect::<Result<_>>()?,
        None => set.scenarios.iter().filter(|s| s.removed.len() == 1).collect(),
    };
    if outaged.is_empty() {
        bail!("no outage lines to simulate");
    }

    let glr = detector.glr_config(shared.sigma2, shared.pmu_count, c_max)?;
    let evaluator = Evaluator::new(&case, &set.scenarios, &placement, detector.model, detector.strategy)?;
    let jobs: Vec<(usize, usize)> = (0..outaged.len()).flat_map(|i| (0..runs).map(move |r| (i, r))).collect();

    let one = |&(i, r): &(usize, usize)| -> Result<Vec<Row>> {
        let scenario = outaged[i];
        let seed = derive_seed(shared.seed, &[scenario.id as u64, r as u64]);
        let config = SimConfig {
            seed,
            duration: tau + horizon + 1,
            outage_sample: Some(tau),
            outage_scenario: Some(scenario.id),
            ..sim.config.clone()
        };
        let records = generate_stream(&case, &set.scenarios, &placement, &config, sim.initial.as_deref())?;
        let states = records.iter().map(|rec| rec.to_state(&case, &placement, shared.voltage));
        let options = RunOptions {
            trace: true,
            ..RunOptions::default()
        };
        let outcome = run_stream(states, &evaluator, &glr, options)?;
        Ok(targets
            .iter()
            .map(|&(days, c)| {
                let hit = first_crossing(&outcome.trace, c);
                Row {
                    line: scenario.label(),
                    scenario: scenario.id,
                    run: r,
                    seed,
                    arl0_days: days,
                    threshold: c,
                    alarm_sample: hit.map(|h| h.sample),
                    delay_samples: hit.map(|h| h.sample as i64 - tau as i64),
                    top1: hit.and_then(|h| h.top3.first().map(|t| t.0)),
                    identified: hit.is_some_and(|h| h.top3.iter().any(|t| t.0 == scenario.id)),
                }
            })
            .collect())
    };

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().context("starting worker pool")?;
    let rows: Vec<Row> = pool
        .install(|| jobs.par_iter().map(one).collect::<Result<Vec<_>>>())?
        .into_iter()
        .flatten()
        .collect();

    fs::create_dir_all(&args.out_dir).with_context(|| format!("creating {}", args.out_dir.display()))?;
    write_delays(&args.out_dir.join("delays.csv"), &rows)?;
    write_heatmap(&args.out_dir.join("heatmap.csv"), &rows, &set.scenarios, targets[0].1)?;
    write_histogram(&args.out_dir.join("delay_histogram.csv"), &rows)?;

    let summaries: Vec<ThresholdSummary> = targets.iter().map(|&(days, c)| summarize(&rows, days, c)).collect();
    let summary = serde_json::json!({
        "case": args.case.case,
        "runs_per_line": runs,
        "outage_sample": tau,
        "horizon": horizon,
        "settings": { "shared": shared, "detector": detector, "noise_fraction": sim.config.noise_fraction },
        "thresholds": summaries,
    });
    fs::write(args.out_dir.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;

    for s in &summaries {
        println!(
            "c={:.2}: {}/{} detected, {} false alarms, {} missed, {} identified, median delay {}",
            s.threshold,
            s.detected,
            s.runs,
            s.false_alarms,
            s.missed,
            s.identified,
            s.median_delay_samples.map_or("n/a".into(), |d| format!("{d} samples")),
        );
    }
    Ok(())
}

fn summarize(rows: &[Row], days: f64, c: f64) -> ThresholdSummary {
    let rows: Vec<&Row> = rows.iter().filter(|r| r.threshold == c).collect();
    let detected: Vec<&&Row> = rows.iter().filter(|r| r.delay_samples.is_some_and(|d| d >= 0)).collect();
    let mut delays: Vec<f64> = detected.iter().filter_map(|r| r.delay_samples).map(|d| d as f64).collect();
    let mut per_line: BTreeMap<String, LineSummary> = BTreeMap::new();
    let mut line_delays: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in &rows {
        let entry = per_line.entry(r.line.clone()).or_default();
        entry.runs += 1;
        if let Some(d) = r.delay_samples.filter(|&d| d >= 0) {
            entry.detected += 1;
            entry.identified += usize::from(r.identified);
            line_delays.entry(r.line.clone()).or_default().push(d as f64);
        }
    }
    for (line, d) in &line_delays {
        if let Some(entry) = per_line.get_mut(line) {
            entry.mean_delay_samples = mean(d);
        }
    }
    ThresholdSummary {
        arl0_days: days,
        threshold: c,
        runs: rows.len(),
        detected: detected.len(),
        false_alarms: rows.iter().filter(|r| r.delay_samples.is_some_and(|d| d < 0)).count(),
        missed: rows.iter().filter(|r| r.alarm_sample.is_none()).count(),
        identified: detected.iter().filter(|r| r.identified).count(),
        mean_delay_samples: mean(&delays),
        median_delay_samples: median(&mut delays),
        per_line,
    }
}

fn write_delays(path: &Path, rows: &[Row]) -> Result<()> {
    let mut out = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for row in rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

/// Counts of the top-ranked scenario per true line at threshold `c`.
fn write_heatmap(
    path: &Path,
    rows: &[Row],
    scenarios: &[outage_core::network::OutageScenario],
    c: f64,
) -> Result<()> {
    let mut counts: BTreeMap<usize, Vec<u64>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.threshold == c) {
        let row = counts.entry(r.scenario).or_insert_with(|| vec![0; scenarios.len()]);
        if let Some(top) = r.top1 {
            row[top] += 1;
        }
    }
    let mut out = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    let mut header = vec!["true_line".to_string()];
    header.extend(scenarios.iter().map(|s| s.label()));
    out.write_record(&header)?;
    for (id, row) in counts {
        let mut line = vec![scenarios[id].label()];
        line.extend(row.iter().map(u64::to_string));
        out.write_record(&line)?;
    }
    out.flush()?;
    Ok(())
}

fn write_histogram(path: &Path, rows: &[Row]) -> Result<()> {
    let mut counts: BTreeMap<(u64, i64), (f64, f64, u64)> = BTreeMap::new();
    for r in rows {
        if let Some(d) = r.delay_samples {
            counts.entry((r.threshold.to_bits(), d)).or_insert((r.arl0_days, r.threshold, 0)).2 += 1;
        }
    }
    let mut out = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    out.write_record(["arl0_days", "threshold", "delay_samples", "count"])?;
    for ((_, d), (days, c, n)) in counts {
        out.write_record([days.to_string(), c.to_string(), d.to_string(), n.to_string()])?;
    }
    out.flush()?;
    Ok(())
}
