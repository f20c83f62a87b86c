use anyhow::Result;
use outage_core::detector::threshold_from_arl;
use serde::Serialize;

use crate::args::CalibrateArgs;

/// False-alarm targets of the standard table, in days.
pub const TABLE_TARGETS: [(&str, f64); 7] = [
    ("1 hour", 1.0 / 24.0),
    ("6 hours", 0.25),
    ("12 hours", 0.5),
    ("1 day", 1.0),
    ("2 days", 2.0),
    ("1 week", 7.0),
    ("1 month", 30.0),
];

/// System sizes (PMU counts) of the standard table.
pub const TABLE_SYSTEMS: [usize; 3] = [10, 39, 1000];

#[derive(Debug, Serialize)]
struct Row {
    label: &'static str,
    arl0_days: f64,
    thresholds: Vec<(usize, f64)>,
}

pub fn run(args: &CalibrateArgs) -> Result<()> {
    if !args.table {
        let c = threshold_from_arl(args.arl0_days, args.rate, args.pmus as usize)?;
        if args.json {
            let out = serde_json::json!({
                "arl0_days": args.arl0_days,
                "rate_hz": args.rate,
                "pmus": args.pmus,
                "arl0_samples": args.arl0_days * 86_400.0 * args.rate,
                "threshold": c,
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
        } else {
            println!("{c:.2}");
        }
        return Ok(());
    }

    let rows = TABLE_TARGETS
        .iter()
        .map(|&(label, days)| {
            let thresholds = TABLE_SYSTEMS
                .iter()
                .map(|&p| threshold_from_arl(days, args.rate, p).map(|c| (p, c)))
                .collect::<outage_core::Result<Vec<_>>>()?;
            Ok(Row {
                label,
                arl0_days: days,
                thresholds,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    if args.json {
        println!("{}", serde_json::to_string_pretty(&rows)?);
        return Ok(());
    }
    print!("{:<10}", "ARL0");
    for p in TABLE_SYSTEMS {
        print!("{:>10}", format!("p={p}"));
    }
    println!();
    for row in &rows {
        print!("{:<10}", row.label);
        for (_, c) in &row.thresholds {
            print!("{c:>10.2}");
        }
        println!();
    }
    Ok(())
}
