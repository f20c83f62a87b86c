use anyhow::Result;
use serde::Serialize;

use crate::args::ScenariosArgs;
use crate::common::{read_case, scenario_set};
use crate::config::ConfigFile;
use outage_core::network::{BranchId, Exclusion};

#[derive(Debug, Serialize)]
struct Listing<'a> {
    case: Option<&'a str>,
    admissible: Vec<Entry>,
    excluded: &'a [Exclusion],
}

#[derive(Debug, Serialize)]
struct Entry {
    id: usize,
    lines: Vec<BranchId>,
}

pub fn run(args: &ScenariosArgs) -> Result<()> {
    let case = read_case(&args.case.case)?;
    let set = scenario_set(&case, &args.case, &ConfigFile::default())?;
    if args.json {
        let listing = Listing {
            case: case.name(),
            admissible: set
                .scenarios
                .iter()
                .map(|s| Entry {
                    id: s.id,
                    lines: s.removed.clone(),
                })
                .collect(),
            excluded: &set.excluded,
        };
        println!("{}", serde_json::to_string_pretty(&listing)?);
        return Ok(());
    }

    println!("{} admissible, {} excluded", set.len(), set.excluded.len());
    println!("\nadmissible (scenario id: lines)");
    for s in &set.scenarios {
        println!("  {:>4}: {}", s.id, s.label());
    }
    if !set.excluded.is_empty() {
        println!("\nexcluded");
        for e in &set.excluded {
            let lines: Vec<String> = e.removed.iter().map(|l| l.to_string()).collect();
            println!("  {}: {}", lines.join("+"), e.reason);
        }
    }
    Ok(())
}
