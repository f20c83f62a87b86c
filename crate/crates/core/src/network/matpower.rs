//! Importer for the MATPOWER-style tabular case layout (`mpc.bus = [...]`,
//! `mpc.branch = [...]`).
//!
//! Only the series impedance of each in-service branch is kept. Line
//! charging, off-nominal taps, phase shifters and bus shunts are dropped, each
//! with a warning, since the admittance model here is strictly `A [y] A^T`.

use num_complex::Complex64;

use super::{Branch, Bus, BusId, BusKind, NetworkCase};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct ImportOptions {
    /// Use this bus as the reference instead of the file's type-3 bus.
    pub reference_bus: Option<BusId>,
}

#[derive(Debug, Clone)]
pub struct ImportedCase {
    pub case: NetworkCase,
    pub warnings: Vec<String>,
}

fn table(text: &str, name: &str) -> Result<Vec<Vec<f64>>> {
    let key = format!("mpc.{name}");
    let start = text
        .match_indices(&key)
        .find(|(i, _)| {
            text[i + key.len()..]
                .trim_start()
                .starts_with('=')
        })
        .map(|(i, _)| i)
        .ok_or_else(|| Error::MalformedCase(format!("missing {key} table")))?;
    let body_start = text[start..]
        .find('[')
        .map(|i| start + i + 1)
        .ok_or_else(|| Error::MalformedCase(format!("{key} has no opening bracket")))?;
    let body_end = text[body_start..]
        .find(']')
        .map(|i| body_start + i)
        .ok_or_else(|| Error::MalformedCase(format!("{key} has no closing bracket")))?;

    let mut rows = Vec::new();
    for line in text[body_start..body_end].lines() {
        let line = line.split('%').next().unwrap_or("");
        for chunk in line.split(';') {
            let fields: Vec<&str> = chunk.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty()).collect();
            if fields.is_empty() {
                continue;
            }
            let row = fields
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|_| Error::MalformedCase(format!("bad number {f:?} in {key}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
    }
    Ok(rows)
}

fn as_id(value: f64, what: &str) -> Result<BusId> {
    if value.fract() != 0.0 || value < 1.0 || value > f64::from(u32::MAX) {
        return Err(Error::MalformedCase(format!("{what} {value} is not a positive integer")));
    }
    Ok(value as BusId)
}

pub fn import_str(text: &str, options: &ImportOptions) -> Result<ImportedCase> {
    let bus_rows = table(text, "bus")?;
    let branch_rows = table(text, "branch")?;
    let mut warnings = Vec::new();

    let mut buses = Vec::with_capacity(bus_rows.len());
    let mut file_reference = None;
    for row in &bus_rows {
        if row.len() < 8 {
            return Err(Error::MalformedCase(format!("bus row has {} columns, need 8", row.len())));
        }
        let id = as_id(row[0], "bus id")?;
        let kind = match row[1] as i64 {
            3 => {
                file_reference.get_or_insert(id);
                BusKind::Reference
            }
            2 => BusKind::Generator,
            1 => BusKind::Load,
            4 => {
                warnings.push(format!("bus {id} is marked isolated (type 4) and was dropped"));
                continue;
            }
            other => return Err(Error::MalformedCase(format!("bus {id} has unknown type {other}"))),
        };
        if row[4] != 0.0 || row[5] != 0.0 {
            warnings.push(format!("bus {id}: shunt Gs={} Bs={} dropped", row[4], row[5]));
        }
        buses.push(Bus {
            id,
            kind,
            voltage_magnitude: row[7],
        });
    }

    let reference = options
        .reference_bus
        .or(file_reference)
        .ok_or(Error::ReferenceBus(0))?;
    for bus in &mut buses {
        if bus.kind == BusKind::Reference && bus.id != reference {
            bus.kind = BusKind::Generator;
        }
        if bus.id == reference {
            bus.kind = BusKind::Reference;
            if bus.voltage_magnitude != 1.0 {
                warnings.push(format!(
                    "reference bus {}: magnitude {} replaced by 1.0",
                    bus.id, bus.voltage_magnitude
                ));
                bus.voltage_magnitude = 1.0;
            }
        }
    }

    let mut branches = Vec::with_capacity(branch_rows.len());
    for (row_no, row) in branch_rows.iter().enumerate() {
        if row.len() < 4 {
            return Err(Error::MalformedCase(format!("branch row {} has too few columns", row_no + 1)));
        }
        let from = as_id(row[0], "from bus")?;
        let to = as_id(row[1], "to bus")?;
        if row.get(10).is_some_and(|&status| status == 0.0) {
            warnings.push(format!("branch {from}-{to} (row {}) is out of service and was dropped", row_no + 1));
            continue;
        }
        let id = branches.len() as u32 + 1;
        let z = Complex64::new(row[2], row[3]);
        if z.norm() == 0.0 {
            return Err(Error::InvalidBranch {
                branch: id,
                reason: format!("zero impedance between {from} and {to}"),
            });
        }
        if row.get(4).is_some_and(|&b| b != 0.0) {
            warnings.push(format!("branch {id} ({from}-{to}): line charging {} dropped", row[4]));
        }
        let ratio = row.get(8).copied().unwrap_or(0.0);
        let shift = row.get(9).copied().unwrap_or(0.0);
        if (ratio != 0.0 && ratio != 1.0) || shift != 0.0 {
            warnings.push(format!(
                "branch {id} ({from}-{to}): transformer tap {ratio} / shift {shift} dropped"
            ));
        }
        branches.push(Branch {
            id,
            from_bus: from,
            to_bus: to,
            series_admittance: z.inv(),
        });
    }

    let case = NetworkCase::new(buses, branches, reference)?;
    Ok(ImportedCase { case, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "
function mpc = tiny
mpc.baseMVA = 100;
%% bus data
mpc.bus = [
    1  3  0   0  0  0  1  1.02  0  345  1  1.1  0.9;
    2  2  0   0  0  0  1  1.01  0  345  1  1.1  0.9;
    3  1  90  30 0  5  1  0.99  0  345  1  1.1  0.9;  % shunt here
];
mpc.branch = [
    1  2  0.01  0.1  0.02  0  0  0  0      0  1  -360  360;
    2  3  0.00  0.2  0     0  0  0  1.05   0  1  -360  360;
    1  3  0.02  0.2  0     0  0  0  0      0  0  -360  360;
    1  3  0.02  0.25 0     0  0  0  0      0  1  -360  360;
];
";

    #[test]
    fn imports_series_admittances_and_warns() {
        let out = import_str(SMALL, &ImportOptions::default()).unwrap();
        let case = &out.case;
        assert_eq!(case.n_buses(), 3);
        assert_eq!(case.n_branches(), 3);
        assert_eq!(case.reference_bus(), 1);
        assert_eq!(case.buses()[0].voltage_magnitude, 1.0);
        let y = case.branches()[0].series_admittance;
        let expected = Complex64::new(0.01, 0.1).inv();
        assert!((y - expected).norm() < 1e-12);
        let joined = out.warnings.join("\n");
        for needle in ["shunt", "line charging", "tap", "out of service", "replaced by 1.0"] {
            assert!(joined.contains(needle), "missing warning about {needle}: {joined}");
        }
    }

    #[test]
    fn reference_override_demotes_file_reference() {
        let out = import_str(
            SMALL,
            &ImportOptions {
                reference_bus: Some(2),
            },
        )
        .unwrap();
        assert_eq!(out.case.reference_bus(), 2);
        assert_eq!(out.case.buses()[0].kind, BusKind::Generator);
    }

    #[test]
    fn missing_table_is_an_error() {
        assert!(matches!(
            import_str("mpc.bus = [1 3 0 0 0 0 1 1 0;];", &ImportOptions::default()),
            Err(Error::MalformedCase(_))
        ));
    }
}
