use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{step, top_k, DetectionEvent, Evaluator, GlrConfig, GlrState};
use crate::error::{Error, Result};
use crate::jacobian::AngleState;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Keep one [`TraceRecord`] per processed sample.
    pub trace: bool,
    /// Keep every scenario's `W` at every sample and attach it to events.
    pub scenario_trace: bool,
    /// Reset all `W` to zero after an alarm and keep monitoring.
    pub continue_after_alarm: bool,
    /// Stop after this many samples (the initial sample excluded).
    pub max_samples: Option<u64>,
}

/// One line of the JSONL trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub sample: u64,
    #[serde(rename = "overall_W")]
    pub overall_w: f64,
    pub alarm: bool,
    pub top3: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub samples: usize,
    pub mean_ms: f64,
    pub p99_ms: f64,
    pub max_ms: f64,
}

impl LatencyStats {
    pub fn from_seconds(latencies: &[f64]) -> Option<Self> {
        if latencies.is_empty() {
            return None;
        }
        let mut sorted = latencies.to_vec();
        sorted.sort_by(f64::total_cmp);
        let rank = ((0.99 * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
        Some(Self {
            samples: sorted.len(),
            mean_ms: 1e3 * sorted.iter().sum::<f64>() / sorted.len() as f64,
            p99_ms: 1e3 * sorted[rank - 1],
            max_ms: 1e3 * sorted[sorted.len() - 1],
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOutcome {
    /// Alarms in order; at most one unless `continue_after_alarm` is set.
    pub events: Vec<DetectionEvent>,
    pub trace: Vec<TraceRecord>,
    /// Sample index of the first sample of the stream.
    pub first_sample: Option<u64>,
    /// Samples that went through the recursion.
    pub processed: u64,
    /// Wall-clock seconds spent in each step.
    pub latencies: Vec<f64>,
    /// Every scenario's `W` after each processed sample, when requested.
    pub scenario_trace: Vec<Vec<f64>>,
}

impl RunOutcome {
    pub fn first_alarm(&self) -> Option<&DetectionEvent> {
        self.events.first()
    }

    pub fn latency(&self) -> Option<LatencyStats> {
        LatencyStats::from_seconds(&self.latencies)
    }
}

/// Runs the chart over `stream`. The first sample only anchors `θ_0`.
pub fn run_stream<I>(stream: I, evaluator: &Evaluator<'_>, config: &GlrConfig, options: RunOptions) -> Result<RunOutcome>
where
    I: IntoIterator<Item = Result<AngleState>>,
{
    config.validate()?;
    let mut samples = stream.into_iter();
    let mut outcome = RunOutcome::default();
    let Some(first) = samples.next().transpose()? else {
        return Err(Error::Stream("stream is empty".into()));
    };
    outcome.first_sample = Some(first.sample_index);
    let ids: Vec<usize> = evaluator.scenarios().iter().map(|s| s.id).collect();
    let mut state = GlrState::new(ids, first)?;

    for sample in samples {
        if options.max_samples.is_some_and(|max| outcome.processed >= max) {
            break;
        }
        let sample = sample?;
        let started = Instant::now();
        let event = step(&mut state, sample, evaluator, config)?;
        outcome.latencies.push(started.elapsed().as_secs_f64());
        outcome.processed += 1;

        if options.scenario_trace {
            outcome.scenario_trace.push(state.statistics().to_vec());
        }
        if options.trace {
            outcome.trace.push(TraceRecord {
                sample: state.sample_index(),
                overall_w: state.overall(),
                alarm: event.is_some(),
                top3: top_k(state.scenario_ids(), state.statistics(), 3),
            });
        }
        if let Some(mut event) = event {
            if options.scenario_trace {
                event.per_scenario_trace = Some(outcome.scenario_trace.clone());
            }
            outcome.events.push(event);
            if !options.continue_after_alarm {
                break;
            }
            state.reset();
        }
    }
    Ok(outcome)
}

pub fn write_trace_jsonl<W: Write>(mut out: W, records: &[TraceRecord]) -> Result<()> {
    for record in records {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n").map_err(|e| Error::io("trace", e))?;
    }
    Ok(())
}
