use std::fs::File;
use std::io::BufWriter;

use anyhow::{bail, Context, Result};
use outage_core::simulator::{generate_stream, write_stream_csv, write_truth, Truth};

use crate::args::SimulateArgs;
use crate::common::{read_case, resolve_shared, resolve_sim, scenario_set};
use crate::config::ConfigFile;

pub fn run(args: &SimulateArgs) -> Result<()> {
    let cfg = ConfigFile::load(args.common.config.as_deref())?;
    let case = read_case(&args.case.case)?;
    let set = scenario_set(&case, &args.case, &cfg)?;
    let (shared, placement) = resolve_shared(&case, &args.common, &cfg)?;
    let mut sim = resolve_sim(&case, &args.sim, &shared, &cfg)?;

    sim.config.duration = cfg.get_or(args.duration, "duration", sim.config.duration)?;
    sim.config.outage_sample = cfg.get(args.outage_sample, "outage-sample")?;
    let lines = cfg.get_list(args.outage_lines.clone(), "outage-lines")?;
    let by_id = cfg.get(args.outage_scenario, "outage-scenario")?;
    let scenario = match (lines, by_id) {
        (Some(_), Some(_)) => bail!("give either outage lines or an outage scenario, not both"),
        (Some(lines), None) => Some(
            set.find(&lines)
                .with_context(|| format!("lines {lines:?} are not an admissible scenario of this case"))?,
        ),
        (None, Some(id)) => Some(set.scenarios.get(id).with_context(|| format!("no scenario {id}"))?),
        (None, None) => None,
    };
    sim.config.outage_scenario = scenario.map(|s| s.id);
    cfg.finish()?;

    let records = generate_stream(&case, &set.scenarios, &placement, &sim.config, sim.initial.as_deref())?;
    let file = File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_stream_csv(BufWriter::new(file), placement.bus_ids(), &records)?;

    let truth_path = args.truth.clone().unwrap_or_else(|| args.out.with_extension("truth.json"));
    let truth = Truth {
        outage_sample: sim.config.outage_sample,
        scenario: sim.config.outage_scenario,
        seed: sim.config.seed,
        lines: scenario.map(|s| s.removed.clone()).unwrap_or_default(),
    };
    write_truth(&truth_path, &truth)?;
    println!(
        "wrote {} samples for {} buses to {} (truth: {})",
        records.len(),
        placement.len(),
        args.out.display(),
        truth_path.display()
    );
    Ok(())
}
